// Copyright 2026 The SiamEDP Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "siamedp/parallel.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace siamedp {
namespace {

std::atomic<int> g_override{0};

int workers_from_env() {
  const char* raw = std::getenv("SIAMEDP_WORKERS");
  if (raw == nullptr) return 1;
  int value = std::atoi(raw);
  return value > 0 ? value : 1;
}

}  // namespace

int worker_count() {
  int forced = g_override.load();
  return forced > 0 ? forced : workers_from_env();
}

void set_worker_count(int workers) { g_override.store(std::max(workers, 0)); }

void parallel_for(int n, const std::function<void(int)>& fn) {
  int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  int chunk = (n + workers - 1) / workers;
  for (int t = 0; t < workers; ++t) {
    int begin = t * chunk;
    int end = std::min(n, begin + chunk);
    threads.emplace_back([&, t, begin, end] {
      try {
        for (int i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace siamedp

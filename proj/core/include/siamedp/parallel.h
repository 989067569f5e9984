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

#pragma once

#include <functional>

namespace siamedp {

// Worker count from the SIAMEDP_WORKERS environment variable (default 1).
int worker_count();

// Overrides the environment value for the current process; 0 restores it.
void set_worker_count(int workers);

// Runs fn(i) for i in [0, n). Work is split into contiguous static chunks,
// so callers that write disjoint outputs per index get results that do not
// depend on the worker count.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace siamedp

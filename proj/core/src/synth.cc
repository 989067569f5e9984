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

#include "siamedp/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "siamedp/error.h"
#include "siamedp/parallel.h"
#include "siamedp/random.h"

namespace siamedp {
namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double mix(double a, double b, double t) { return a + (b - a) * t; }

// Lid profile heights at normalized position t in [-1, 1] (t = +1 nasal).
// The nasal corner is pointed, the temporal corner rounder.
double upper_lid(const EyeGeometry& e, double t) {
  const double base = std::max(0.0, 1.0 - t * t);
  const double shape = t > 0 ? std::pow(base, 0.9) : std::pow(base, 0.55);
  return e.upper_height * shape * (1.0 - 0.2 * t);
}

double lower_lid(const EyeGeometry& e, double t) {
  const double base = std::max(0.0, 1.0 - t * t);
  const double shape = t > 0 ? std::pow(base, 0.85) : std::pow(base, 0.6);
  return e.lower_height * shape;
}

struct LocalCoords {
  double t;   // along the eye axis, normalized, nasal positive
  double u;   // same in pixels
  double v;   // across the axis in pixels, down positive, corrected for droop
};

LocalCoords to_local(const EyeGeometry& e, double x, double y) {
  const double dx = x - e.opening_center.x;
  const double dy = y - e.opening_center.y;
  const double c = std::cos(e.roll), s = std::sin(e.roll);
  const double along = (dx * c + dy * s) * e.nasal_sign;
  const double across = -dx * s + dy * c;
  const double t = along / e.half_width;
  // The nasal corner sits slightly lower than the temporal one.
  const double droop = 0.12 * e.upper_height * std::clamp(t, -1.0, 1.0);
  return {t, along, across - droop};
}

// Draws one eye (brow, lids, iris, pupil, glint) over `canvas`.
void render_eye(std::vector<double>& canvas, int width, int height, const EyeGeometry& e) {
  const double reach = e.half_width * 1.4 + e.upper_height * 3.0 + 8.0;
  const int x0 = std::max(0, static_cast<int>(std::floor(e.opening_center.x - reach)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(e.opening_center.x + reach)));
  const int y0 = std::max(0, static_cast<int>(std::floor(e.opening_center.y - reach)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(e.opening_center.y + reach)));

  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double& px = canvas[static_cast<std::size_t>(y) * width + x];
      const LocalCoords lc = to_local(e, x, y);

      // Eyebrow: an arched dark band above the opening, heavier nasally.
      const double brow_center = -(e.upper_height * 2.1 + 4.0) + 0.25 * e.upper_height * lc.t * lc.t;
      const double brow_half = 0.5 * e.brow_thickness * (1.0 + 0.35 * lc.t);
      const double brow_span = clamp01((1.0 - std::abs(lc.t - (-0.1)) / 1.05) * 4.0);
      const double brow_cov = clamp01(brow_half - std::abs(lc.v - brow_center) + 0.5) * brow_span;
      px -= e.brow_depth * brow_cov;

      // Upper lash line just outside the opening, with a temporal wing.
      if (lc.t > -1.4 && lc.t < 1.05) {
        const double wing = std::max(0.0, -1.0 - lc.t);
        const double top = -upper_lid(e, std::clamp(lc.t, -1.0, 1.0)) - 0.8 * wing * e.upper_height;
        const double extent = lc.t < 0 ? clamp01((1.4 + lc.t) * 5.0) : clamp01((1.05 - lc.t) * 6.0);
        const double lash_cov = clamp01(1.0 - std::abs(lc.v - (top - 0.4)) + 0.2) * extent;
        // Lashes are denser toward the temporal corner.
        px = mix(px, e.lash, clamp01(0.8 - 0.5 * lc.t) * lash_cov);
      }

      const double open = e.opening_coverage(x, y);
      if (open <= 0.0) continue;
      double eye = e.sclera;
      // Caruncle: darker tissue filling the inner corner of the opening.
      eye = mix(eye, e.caruncle, clamp01((lc.t - 0.5) * 4.0));
      const double dist = std::hypot(x - e.pupil.x, y - e.pupil.y);
      eye = mix(eye, e.iris, clamp01(e.iris_radius - dist + 0.5));
      eye = mix(eye, e.pupil_level, clamp01(e.pupil_radius - dist + 0.5));
      const double gd = std::hypot(x - (e.pupil.x + e.glint_offset.x), y - (e.pupil.y + e.glint_offset.y));
      eye = mix(eye, 250.0, clamp01(1.0 - gd + 0.5));
      px = mix(px, eye, open);
    }
  }
}

EyeGeometry draw_eye(std::mt19937_64& rng, double iris_r) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double a, double b) { return a + (b - a) * u01(rng); };
  EyeGeometry e;
  e.iris_radius = iris_r;
  e.pupil_radius = iris_r * uniform(0.35, 0.55);
  e.half_width = iris_r * uniform(2.2, 2.5);
  e.upper_height = iris_r * uniform(1.05, 1.25);
  e.lower_height = iris_r * uniform(0.85, 1.0);
  e.sclera = uniform(195.0, 230.0);
  e.iris = uniform(60.0, 110.0);
  e.pupil_level = uniform(10.0, 35.0);
  e.lash = uniform(40.0, 70.0);
  e.brow_depth = uniform(40.0, 70.0);
  e.brow_thickness = uniform(2.5, 4.0);
  e.caruncle = uniform(55.0, 95.0);
  return e;
}

}  // namespace

double EyeGeometry::opening_coverage(double x, double y) const {
  const LocalCoords lc = to_local(*this, x, y);
  if (std::abs(lc.t) >= 1.0) return 0.0;
  const double up = upper_lid(*this, lc.t);
  const double lo = lower_lid(*this, lc.t);
  const double margin_v = std::min(lc.v + up, lo - lc.v);
  const double margin_u = (1.0 - std::abs(lc.t)) * half_width;
  return clamp01(std::min(margin_v, margin_u) + 0.5);
}

void SynthConfig::validate() const {
  if (width < 24 || height < 24) {
    throw Error("synth: image must be at least 24x24");
  }
  if (!(iris_radius_min > 0 && iris_radius_min <= iris_radius_max)) throw Error("synth: invalid iris radius range");
  if (!(eye_distance_min > 0 && eye_distance_min <= eye_distance_max)) {
    throw Error("synth: invalid inter-eye distance range");
  }
  if (max_roll_degrees < 0 || max_roll_degrees > 45) throw Error("synth: roll must lie in [0, 45] degrees");
  if (background_amplitude < 0 || noise_sigma < 0 || gaze_jitter < 0) throw Error("synth: negative amplitude");
  const double eye_reach = 2.5 * iris_radius_max + 2.0;
  if (eye_distance_min < 2.0 * eye_reach) throw Error("synth: eyes of maximal size would overlap");
  const double roll = max_roll_degrees * std::numbers::pi / 180.0;
  const double span_x = eye_distance_max * std::cos(0.0) + 2.0 * eye_reach;
  const double span_y = eye_distance_max * std::sin(roll) + 2.0 * (1.3 * iris_radius_max + 2.0);
  if (span_x >= width || span_y >= height) {
    throw Error("synth: a " + std::to_string(width) + "x" + std::to_string(height) +
                " frame cannot fit two eyes at the configured distance and size");
  }
}

SynthSample synth_sample(const SynthConfig& cfg, int index) {
  std::mt19937_64 rng(derive_seed(cfg.seed, 0, static_cast<std::uint64_t>(index)));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double a, double b) { return a + (b - a) * u01(rng); };

  const double iris_r = uniform(cfg.iris_radius_min, cfg.iris_radius_max);
  const double roll = uniform(-1.0, 1.0) * cfg.max_roll_degrees * std::numbers::pi / 180.0;
  const double c = std::cos(roll), s = std::sin(roll);

  // Sample the inter-eye distance, then place the pair so both openings fit.
  const double reach_x = 2.5 * iris_r + 2.0;
  const double reach_y = 1.3 * iris_r + 2.0;
  double distance = uniform(cfg.eye_distance_min, cfg.eye_distance_max);
  distance = std::min(distance, (cfg.width - 2.0 * reach_x - 1.0) / std::max(std::abs(c), 1e-6));
  const double half_dx = 0.5 * distance * c;
  const double half_dy = 0.5 * distance * s;
  const double min_x = reach_x + std::abs(half_dx), max_x = cfg.width - 1 - reach_x - std::abs(half_dx);
  const double min_y = reach_y + std::abs(half_dy), max_y = cfg.height - 1 - reach_y - std::abs(half_dy);
  const double mid_x = uniform(min_x, std::max(min_x, max_x));
  const double mid_y = uniform(min_y, std::max(min_y, max_y));

  const Vec2 gaze{uniform(-1.0, 1.0) * cfg.gaze_jitter * iris_r, uniform(-0.5, 0.5) * cfg.gaze_jitter * iris_r};
  // The illuminator sits on either side of the lens; both eyes share its glint offset.
  const double light_side = u01(rng) < 0.5 ? -1.0 : 1.0;
  const Vec2 glint{light_side * 0.35 * iris_r + uniform(-0.5, 0.5), -0.35 * iris_r + uniform(-0.5, 0.5)};

  SynthSample out;
  // Subject's right eye on the viewer's left; its inner corner points to +x.
  out.right = draw_eye(rng, iris_r);
  out.right.pupil = {mid_x - half_dx, mid_y - half_dy};
  out.right.nasal_sign = +1;
  out.left = draw_eye(rng, iris_r * uniform(0.95, 1.05));
  out.left.pupil = {mid_x + half_dx, mid_y + half_dy};
  out.left.nasal_sign = -1;
  for (EyeGeometry* e : {&out.right, &out.left}) {
    e->roll = roll;
    e->opening_center = {e->pupil.x - gaze.x, e->pupil.y - gaze.y};
    e->glint_offset = glint;
  }

  // Background: smooth skin with low-frequency shading and socket shadows.
  const double skin = uniform(135.0, 175.0);
  struct Wave {
    double kx, ky, phase, amp;
  };
  std::vector<Wave> waves;
  for (int k = 0; k < 3; ++k) {
    const double wavelength = uniform(40.0, 150.0);
    const double angle = uniform(0.0, 2.0 * std::numbers::pi);
    waves.push_back({std::cos(angle) * 2.0 * std::numbers::pi / wavelength,
                     std::sin(angle) * 2.0 * std::numbers::pi / wavelength, uniform(0.0, 2.0 * std::numbers::pi),
                     cfg.background_amplitude / 3.0 * uniform(0.5, 1.0)});
  }
  const double shadow = uniform(14.0, 26.0);
  const double nose = uniform(5.0, 15.0);
  std::vector<double> canvas(static_cast<std::size_t>(cfg.width) * cfg.height);
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      double v = skin;
      for (const auto& w : waves) v += w.amp * std::sin(w.kx * x + w.ky * y + w.phase);
      for (const EyeGeometry* e : {&out.right, &out.left}) {
        // The orbit is deepest on the nasal side.
        const double sx = (x - (e->opening_center.x + 0.8 * e->nasal_sign * e->half_width * c)) / (1.4 * e->half_width);
        const double sy = (y - (e->opening_center.y - 0.3 * e->upper_height)) / (2.0 * e->upper_height);
        v -= shadow * std::exp(-0.5 * (sx * sx + sy * sy));
      }
      // Nose bridge: brighter ridge between and below the eyes.
      const double along = (x - mid_x) * c + (y - mid_y) * s;
      const double across = -(x - mid_x) * s + (y - mid_y) * c;
      if (across > 0) v += nose * std::exp(-0.5 * std::pow(along / (0.08 * distance), 2)) * (1.0 - std::exp(-across / 6.0));
      canvas[static_cast<std::size_t>(y) * cfg.width + x] = v;
    }
  }
  render_eye(canvas, cfg.width, cfg.height, out.right);
  render_eye(canvas, cfg.width, cfg.height, out.left);

  std::normal_distribution<double> noise(0.0, 1.0);
  out.image = GrayImage(cfg.width, cfg.height);
  for (std::size_t i = 0; i < canvas.size(); ++i) {
    const double v = canvas[i] + cfg.noise_sigma * noise(rng);
    out.image.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }

  char name[32];
  std::snprintf(name, sizeof(name), "%06d.pgm", index);
  out.annotation = {name, out.right.pupil, out.left.pupil};
  return out;
}

std::vector<SynthSample> synth_generate(const SynthConfig& config, int n) {
  config.validate();
  if (n <= 0) throw Error("synth: sample count must be positive");
  std::vector<SynthSample> out(n);
  parallel_for(n, [&](int i) { out[i] = synth_sample(config, i); });
  return out;
}

GrayImage render_eye_template(const EyeGeometry& eye, int size, double skin) {
  EyeGeometry local = eye;
  const double cx = std::round(eye.pupil.x), cy = std::round(eye.pupil.y);
  const double shift_x = size / 2 - cx, shift_y = size / 2 - cy;
  local.pupil = {eye.pupil.x + shift_x, eye.pupil.y + shift_y};
  local.opening_center = {eye.opening_center.x + shift_x, eye.opening_center.y + shift_y};
  std::vector<double> canvas(static_cast<std::size_t>(size) * size, skin);
  render_eye(canvas, size, size, local);
  GrayImage out(size, size);
  for (std::size_t i = 0; i < canvas.size(); ++i) {
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(canvas[i]), 0L, 255L));
  }
  return out;
}

Vec2 ncc_locate(const GrayImage& image, const GrayImage& templ) {
  const int tw = templ.width, th = templ.height;
  if (tw > image.width || th > image.height) throw ShapeError("ncc_locate: template larger than image");
  const double n = static_cast<double>(tw) * th;
  double tmean = 0.0;
  for (auto p : templ.pixels) tmean += p;
  tmean /= n;
  double tvar = 0.0;
  for (auto p : templ.pixels) tvar += (p - tmean) * (p - tmean);

  double best = -2.0;
  Vec2 where;
  for (int oy = 0; oy + th <= image.height; ++oy) {
    for (int ox = 0; ox + tw <= image.width; ++ox) {
      double mean = 0.0;
      for (int y = 0; y < th; ++y)
        for (int x = 0; x < tw; ++x) mean += image.at(ox + x, oy + y);
      mean /= n;
      double cov = 0.0, var = 0.0;
      for (int y = 0; y < th; ++y) {
        for (int x = 0; x < tw; ++x) {
          const double a = image.at(ox + x, oy + y) - mean;
          cov += a * (templ.at(x, y) - tmean);
          var += a * a;
        }
      }
      const double denom = std::sqrt(var * tvar);
      const double score = denom > 0 ? cov / denom : 0.0;
      if (score > best) {
        best = score;
        where = {static_cast<double>(ox + tw / 2), static_cast<double>(oy + th / 2)};
      }
    }
  }
  return where;
}

AnnotationSet annotations_of(const std::vector<SynthSample>& samples, int width, int height) {
  AnnotationSet set;
  set.width = width;
  set.height = height;
  for (const auto& s : samples) set.records.push_back(s.annotation);
  return set;
}

}  // namespace siamedp

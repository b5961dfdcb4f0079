// Copyright 2026 The madc Authors
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

#include "madc/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "madc/rng.hpp"

namespace madc {
namespace {

constexpr int kMaxPlacementTries = 50;

struct Palette {
  float background;
  float interior;
  float halo;  ///< < 0 means no halo
};

Palette palette(Domain d) {
  switch (d) {
    case Domain::kFluor:
      return {0.10f, 0.85f, -1.0f};
    case Domain::kPhase:
    case Domain::kWorm:
      break;
  }
  return {0.80f, 0.25f, 0.95f};
}

using Polyline = std::vector<std::pair<double, double>>;

double segment_distance(double px, double py, std::pair<double, double> a, std::pair<double, double> b) {
  const double dx = b.first - a.first, dy = b.second - a.second;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0) t = std::clamp(((px - a.first) * dx + (py - a.second) * dy) / len2, 0.0, 1.0);
  return std::hypot(px - (a.first + t * dx), py - (a.second + t * dy));
}

double polyline_distance(double px, double py, const Polyline& line) {
  if (line.size() == 1) return std::hypot(px - line[0].first, py - line[0].second);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i)
    best = std::min(best, segment_distance(px, py, line[i], line[i + 1]));
  return best;
}

// Random walk of `steps` unit steps. Returns false when it leaves the frame.
bool walk(Rng& rng, double x, double y, double heading, int steps, double curvature, double margin,
          int w, int h, Polyline& out, std::vector<double>* headings) {
  out.clear();
  out.emplace_back(x, y);
  if (headings) headings->assign(1, heading);
  for (int s = 0; s < steps; ++s) {
    heading += rng.uniform(-curvature, curvature);
    x += std::cos(heading);
    y += std::sin(heading);
    if (x < margin || x > w - 1 - margin || y < margin || y > h - 1 - margin) return false;
    out.emplace_back(x, y);
    if (headings) headings->push_back(heading);
  }
  return true;
}

}  // namespace

const char* to_string(Domain d) {
  switch (d) {
    case Domain::kPhase:
      return "phase";
    case Domain::kFluor:
      return "fluor";
    case Domain::kWorm:
      return "worm";
  }
  return "phase";
}

Domain domain_from_string(const std::string& s) {
  if (s == "phase") return Domain::kPhase;
  if (s == "fluor") return Domain::kFluor;
  if (s == "worm") return Domain::kWorm;
  throw ConfigError("unknown domain '" + s + "' (expected phase, fluor or worm)");
}

void validate(const SynthConfig& cfg) {
  auto fail = [](const std::string& m) { throw ConfigError("synth config: " + m); };
  if (cfg.n_images < 1) fail("n_images must be >= 1");
  if (cfg.height < 8 || cfg.width < 8) fail("height and width must be >= 8");
  if (cfg.cells_min < 0 || cfg.cells_min > cfg.cells_max) fail("cells_per_image range is degenerate");
  if (cfg.radius_min < 1.0 || cfg.radius_min > cfg.radius_max) fail("radius range must satisfy 1 <= min <= max");
  if (cfg.radius_max >= std::min(cfg.height, cfg.width) / 2.0) fail("radius >= min(h,w)/2 cannot fit in the image");
  if (cfg.length_min < 0 || cfg.length_min > cfg.length_max) fail("skeleton_length range is degenerate");
  if (cfg.curvature < 0) fail("curvature must be >= 0");
  if (cfg.branch_prob < 0 || cfg.branch_prob > 1) fail("branch_prob must lie in [0,1]");
  if (cfg.noise_sigma < 0 || cfg.blur_sigma < 0) fail("noise_sigma and blur_sigma must be >= 0");
}

SynthConfig default_synth_config(Domain domain, int size) {
  SynthConfig cfg;
  cfg.domain = domain;
  cfg.height = cfg.width = size;
  cfg.name = to_string(domain);
  if (domain == Domain::kWorm) {
    cfg.cells_min = 2;
    cfg.cells_max = 4;
    cfg.radius_min = 1.5;
    cfg.radius_max = 2.5;
    cfg.length_min = size * 0.35;
    cfg.length_max = size * 0.6;
    cfg.curvature = 0.06;
    cfg.branch_prob = 0.0;
  }
  return cfg;
}

Grid<float> gaussian_blur(const Grid<float>& src, double sigma) {
  if (sigma <= 0) return src;
  const int half = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * half + 1);
  double sum = 0;
  for (int i = -half; i <= half; ++i) sum += k[i + half] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  for (auto& v : k) v /= sum;

  const Eigen::Index h = src.rows(), w = src.cols();
  Grid<float> tmp(h, w), out(h, w);
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c) {
      double acc = 0;
      for (int i = -half; i <= half; ++i) acc += k[i + half] * src(r, std::clamp<Eigen::Index>(c + i, 0, w - 1));
      tmp(r, c) = static_cast<float>(acc);
    }
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c) {
      double acc = 0;
      for (int i = -half; i <= half; ++i) acc += k[i + half] * tmp(std::clamp<Eigen::Index>(r + i, 0, h - 1), c);
      out(r, c) = static_cast<float>(acc);
    }
  return out;
}

Image render(const InstanceMask& mask, Domain domain, double blur_sigma, double noise_sigma,
             std::uint64_t noise_seed) {
  const Palette pal = palette(domain);
  const Eigen::Index h = mask.height(), w = mask.width();
  Grid<float> px = Grid<float>::Constant(h, w, pal.background);
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c) {
      if (mask.labels(r, c) != 0) {
        px(r, c) = pal.interior;
      } else if (pal.halo >= 0) {
        const bool touches = (r > 0 && mask.labels(r - 1, c)) || (r + 1 < h && mask.labels(r + 1, c)) ||
                             (c > 0 && mask.labels(r, c - 1)) || (c + 1 < w && mask.labels(r, c + 1));
        if (touches) px(r, c) = pal.halo;
      }
    }
  px = gaussian_blur(px, blur_sigma);
  if (noise_sigma > 0) {
    Rng rng(noise_seed);
    for (Eigen::Index i = 0; i < px.size(); ++i) px.data()[i] += static_cast<float>(noise_sigma * rng.normal());
  }
  return Image(px.max(0.0f).min(1.0f));
}

SynthImage gen_image(const SynthConfig& cfg, std::size_t index) {
  validate(cfg);
  Rng rng(Rng::mix(cfg.seed) ^ index);
  const int h = cfg.height, w = cfg.width;
  const double branch_prob = cfg.domain == Domain::kWorm ? 0.0 : cfg.branch_prob;

  LabelGrid occupied = LabelGrid::Zero(h, w);
  std::vector<CellShape> cells;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> anchor;  // one pixel per accepted cell
  const auto n_cells = rng.uniform_int(cfg.cells_min, cfg.cells_max);

  Polyline line, branch;
  std::vector<double> headings;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pixels;
  for (std::int64_t k = 0; k < n_cells; ++k) {
    for (int attempt = 0; attempt < kMaxPlacementTries; ++attempt) {
      const double radius = rng.uniform(cfg.radius_min, cfg.radius_max);
      const int steps = static_cast<int>(std::lround(rng.uniform(cfg.length_min, cfg.length_max)));
      const double margin = radius + 1.0;
      if (w - 1 - 2 * margin < 0 || h - 1 - 2 * margin < 0) continue;
      const double x0 = rng.uniform(margin, w - 1 - margin);
      const double y0 = rng.uniform(margin, h - 1 - margin);
      const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
      if (!walk(rng, x0, y0, heading, steps, cfg.curvature, margin, w, h, line, &headings)) continue;

      branch.clear();
      if (line.size() >= 4 && rng.uniform() < branch_prob) {
        const auto n = line.size();
        const auto at = static_cast<std::size_t>(rng.uniform_int(n / 4, (3 * n) / 4));
        const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
        const double turn = side * rng.uniform(std::numbers::pi / 4, std::numbers::pi / 2);
        const int bsteps = std::max(2, static_cast<int>(std::lround(steps * rng.uniform(1.0 / 3, 0.5))));
        if (!walk(rng, line[at].first, line[at].second, headings[at] + turn, bsteps, cfg.curvature, margin, w, h,
                  branch, nullptr))
          continue;
      }

      // Rasterize the tube: pixel centres within `radius` of either polyline.
      double x_lo = 1e9, x_hi = -1e9, y_lo = 1e9, y_hi = -1e9;
      for (const auto* pl : {&line, &branch})
        for (auto [x, y] : *pl) {
          x_lo = std::min(x_lo, x);
          x_hi = std::max(x_hi, x);
          y_lo = std::min(y_lo, y);
          y_hi = std::max(y_hi, y);
        }
      pixels.clear();
      bool blocked = false;
      const auto r_lo = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(y_lo - radius)));
      const auto r_hi = std::min<Eigen::Index>(h - 1, static_cast<Eigen::Index>(std::ceil(y_hi + radius)));
      const auto c_lo = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(x_lo - radius)));
      const auto c_hi = std::min<Eigen::Index>(w - 1, static_cast<Eigen::Index>(std::ceil(x_hi + radius)));
      for (Eigen::Index r = r_lo; r <= r_hi && !blocked; ++r)
        for (Eigen::Index c = c_lo; c <= c_hi && !blocked; ++c) {
          double dist = polyline_distance(double(c), double(r), line);
          if (!branch.empty()) dist = std::min(dist, polyline_distance(double(c), double(r), branch));
          if (dist > radius) continue;
          // Keep a one-pixel gap to existing cells (8-neighbourhood).
          for (Eigen::Index dr = -1; dr <= 1 && !blocked; ++dr)
            for (Eigen::Index dc = -1; dc <= 1; ++dc) {
              const Eigen::Index rr = r + dr, cc = c + dc;
              if (rr >= 0 && rr < h && cc >= 0 && cc < w && occupied(rr, cc) != 0) {
                blocked = true;
                break;
              }
            }
          pixels.emplace_back(r, c);
        }
      if (blocked || pixels.empty()) continue;

      const auto label = static_cast<std::uint32_t>(cells.size() + 1);
      for (auto [r, c] : pixels) occupied(r, c) = label;
      cells.push_back({line, branch, radius, label});
      anchor.push_back(pixels.front());
      break;
    }
  }

  SynthImage out;
  out.sample.mask = relabel(occupied);
  for (std::size_t i = 0; i < cells.size(); ++i)
    cells[i].label = out.sample.mask.labels(anchor[i].first, anchor[i].second);
  out.cells = std::move(cells);
  out.sample.image = render(out.sample.mask, cfg.domain, cfg.blur_sigma, cfg.noise_sigma, rng.next());
  return out;
}

Dataset gen_dataset(const SynthConfig& cfg) {
  validate(cfg);
  Dataset ds;
  ds.name = cfg.name;
  ds.split = cfg.split;
  ds.items.reserve(static_cast<std::size_t>(cfg.n_images));
  for (int i = 0; i < cfg.n_images; ++i) ds.items.push_back(gen_image(cfg, static_cast<std::size_t>(i)).sample);
  return ds;
}

Sample crop(const Sample& s, Eigen::Index top, Eigen::Index left, Eigen::Index h, Eigen::Index w) {
  require(top >= 0 && left >= 0 && top + h <= s.image.height() && left + w <= s.image.width(),
          "crop window outside image");
  Sample out;
  out.image = Image(s.image.pixels.block(top, left, h, w));
  out.mask = relabel(s.mask.labels.block(top, left, h, w));
  return out;
}

Dataset crop_patches(const Dataset& ds, int size, std::uint64_t seed) {
  Rng rng(seed);
  Dataset out;
  out.name = ds.name;
  out.split = ds.split;
  for (const auto& item : ds.items) {
    const auto h = item.image.height(), w = item.image.width();
    require(size >= 1 && size <= std::min(h, w), "patch size exceeds image size");
    const auto top = rng.uniform_int(0, h - size);
    const auto left = rng.uniform_int(0, w - size);
    out.items.push_back(crop(item, top, left, size, size));
  }
  return out;
}

}  // namespace madc

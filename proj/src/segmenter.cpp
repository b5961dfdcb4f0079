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

#include "madc/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace madc {
namespace {

float bilinear(const Grid<float>& g, float x, float y) {
  const Eigen::Index h = g.rows(), w = g.cols();
  const Eigen::Index x0 = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(x)), 0, std::max<Eigen::Index>(w - 2, 0));
  const Eigen::Index y0 = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(y)), 0, std::max<Eigen::Index>(h - 2, 0));
  const Eigen::Index x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const float fx = x - static_cast<float>(x0), fy = y - static_cast<float>(y0);
  return (1 - fy) * ((1 - fx) * g(y0, x0) + fx * g(y0, x1)) + fy * ((1 - fx) * g(y1, x0) + fx * g(y1, x1));
}

// Uniform bucket grid over the point set for radius queries.
class PointIndex {
 public:
  PointIndex(const std::vector<Eigen::Vector2f>& pts, float cell) : pts_(pts), cell_(cell) {
    float xmin = std::numeric_limits<float>::max(), ymin = xmin;
    float xmax = std::numeric_limits<float>::lowest(), ymax = xmax;
    for (const auto& p : pts) {
      xmin = std::min(xmin, p.x());
      ymin = std::min(ymin, p.y());
      xmax = std::max(xmax, p.x());
      ymax = std::max(ymax, p.y());
    }
    if (pts.empty()) return;
    x0_ = xmin;
    y0_ = ymin;
    nx_ = static_cast<int>((xmax - xmin) / cell) + 1;
    ny_ = static_cast<int>((ymax - ymin) / cell) + 1;
    buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    for (std::size_t i = 0; i < pts.size(); ++i) buckets_[bucket(pts[i])].push_back(i);
  }

  /// Indices within `radius`, ascending.
  void query(const Eigen::Vector2f& p, float radius, std::vector<std::size_t>& out) const {
    out.clear();
    if (buckets_.empty()) return;
    const int reach = static_cast<int>(std::ceil(radius / cell_));
    const int bx = cx(p), by = cy(p);
    const float r2 = radius * radius;
    for (int y = std::max(0, by - reach); y <= std::min(ny_ - 1, by + reach); ++y)
      for (int x = std::max(0, bx - reach); x <= std::min(nx_ - 1, bx + reach); ++x)
        for (auto j : buckets_[static_cast<std::size_t>(y) * nx_ + x])
          if ((pts_[j] - p).squaredNorm() <= r2) out.push_back(j);
    std::sort(out.begin(), out.end());
  }

 private:
  int cx(const Eigen::Vector2f& p) const { return std::clamp(static_cast<int>((p.x() - x0_) / cell_), 0, nx_ - 1); }
  int cy(const Eigen::Vector2f& p) const { return std::clamp(static_cast<int>((p.y() - y0_) / cell_), 0, ny_ - 1); }
  std::size_t bucket(const Eigen::Vector2f& p) const { return static_cast<std::size_t>(cy(p)) * nx_ + cx(p); }

  const std::vector<Eigen::Vector2f>& pts_;
  float cell_;
  float x0_ = 0, y0_ = 0;
  int nx_ = 0, ny_ = 0;
  std::vector<std::vector<std::size_t>> buckets_;
};

}  // namespace

void validate(const HeadConfig& cfg) {
  if (!(cfg.t_fg > 0) || cfg.n_steps <= 0 || !(cfg.step > 0) || !(cfg.cluster_eps > 0) || cfg.cluster_min_pts <= 0 ||
      cfg.min_instance_px <= 0)
    throw ConfigError("head config values must all be positive");
}

BinaryGrid foreground(const FeatureMap<float>& z, float t_fg) { return (z.phi > t_fg).cast<std::uint8_t>(); }

std::vector<Eigen::Vector2f> euler_integrate(const Grid<float>& u1, const Grid<float>& u2, const BinaryGrid& fg,
                                             int n_steps, float step) {
  const Eigen::Index h = fg.rows(), w = fg.cols();
  require_same_shape(u1, h, w, "euler u1");
  require_same_shape(u2, h, w, "euler u2");
  std::vector<Eigen::Vector2f> out;
  const float xmax = static_cast<float>(w - 1), ymax = static_cast<float>(h - 1);
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c) {
      if (!fg(r, c)) continue;
      float x = static_cast<float>(c), y = static_cast<float>(r);
      for (int s = 0; s < n_steps; ++s) {
        const float vx = bilinear(u1, x, y), vy = bilinear(u2, x, y);
        if (std::hypot(vx, vy) < kEulerStopNorm) break;
        x = std::clamp(x + step * vx, 0.0f, xmax);
        y = std::clamp(y + step * vy, 0.0f, ymax);
      }
      out.emplace_back(x, y);
    }
  return out;
}

std::vector<std::uint32_t> cluster(const std::vector<Eigen::Vector2f>& positions, float eps, int min_pts,
                                   int min_instance_px) {
  const std::size_t n = positions.size();
  constexpr int kUnvisited = -2, kNoise = -1;
  std::vector<int> label(n, kUnvisited);
  PointIndex index(positions, eps);
  std::vector<std::size_t> nbrs, nbrs2;

  int n_clusters = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kUnvisited) continue;
    index.query(positions[i], eps, nbrs);
    if (static_cast<int>(nbrs.size()) < min_pts) {
      label[i] = kNoise;
      continue;
    }
    const int id = n_clusters++;
    label[i] = id;
    std::deque<std::size_t> frontier(nbrs.begin(), nbrs.end());
    while (!frontier.empty()) {
      const auto j = frontier.front();
      frontier.pop_front();
      if (label[j] == kNoise) label[j] = id;  // border point
      if (label[j] != kUnvisited) continue;
      label[j] = id;
      index.query(positions[j], eps, nbrs2);
      if (static_cast<int>(nbrs2.size()) >= min_pts)
        for (auto k : nbrs2)
          if (label[k] == kUnvisited || label[k] == kNoise) frontier.push_back(k);
    }
  }

  // Noise adopts the nearest clustered point within 2*eps.
  std::vector<int> adopted = label;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kNoise) continue;
    index.query(positions[i], 2 * eps, nbrs);
    float best = std::numeric_limits<float>::max();
    for (auto j : nbrs) {
      if (label[j] < 0) continue;
      const float d2 = (positions[j] - positions[i]).squaredNorm();
      if (d2 < best) {
        best = d2;
        adopted[i] = label[j];
      }
    }
  }

  std::vector<int> sizes(static_cast<std::size_t>(n_clusters), 0);
  for (auto l : adopted)
    if (l >= 0) ++sizes[static_cast<std::size_t>(l)];
  std::vector<std::uint32_t> remap(static_cast<std::size_t>(n_clusters), 0);
  std::vector<bool> assigned(static_cast<std::size_t>(n_clusters), false);
  std::uint32_t next = 0;
  std::vector<std::uint32_t> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int l = adopted[i];
    if (l < 0 || sizes[static_cast<std::size_t>(l)] < min_instance_px) continue;
    if (!assigned[static_cast<std::size_t>(l)]) {
      assigned[static_cast<std::size_t>(l)] = true;
      remap[static_cast<std::size_t>(l)] = ++next;
    }
    out[i] = remap[static_cast<std::size_t>(l)];
  }
  return out;
}

InstanceMask segment(const FeatureMap<float>& z, const HeadConfig& cfg) {
  const auto fg = foreground(z, cfg.t_fg);
  const auto pos = euler_integrate(z.u1, z.u2, fg, cfg.n_steps, cfg.step);
  const auto ids = cluster(pos, cfg.cluster_eps, cfg.cluster_min_pts, cfg.min_instance_px);
  LabelGrid labels = LabelGrid::Zero(fg.rows(), fg.cols());
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < fg.rows(); ++r)
    for (Eigen::Index c = 0; c < fg.cols(); ++c)
      if (fg(r, c)) labels(r, c) = ids[k++];
  // Cluster ids are ordered by first point, which is row-major already.
  return relabel(labels);
}

FeatureMap<float> features_from_targets(const TargetField<float>& t) {
  return {t.d, t.gx, t.gy, (t.b * 20.0f - 10.0f)};
}

}  // namespace madc

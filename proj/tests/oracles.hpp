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

// Independent reference implementations used by the unit and acceptance
// tests. They are written for clarity, not speed.

#ifndef MADC_TESTS_ORACLES_HPP
#define MADC_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "madc/losses.hpp"
#include "madc/net.hpp"
#include "madc/rng.hpp"
#include "madc/types.hpp"

namespace madc::oracle {

/// O(n^2) nearest pixel with a different label.
inline Grid<float> brute_distance(const InstanceMask& m) {
  const Eigen::Index h = m.height(), w = m.width();
  Grid<float> d = Grid<float>::Zero(h, w);
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c) {
      const auto l = m.labels(r, c);
      if (!l) continue;
      long best = std::numeric_limits<long>::max();
      for (Eigen::Index r2 = 0; r2 < h; ++r2)
        for (Eigen::Index c2 = 0; c2 < w; ++c2)
          if (m.labels(r2, c2) != l) best = std::min<long>(best, (r - r2) * (r - r2) + (c - c2) * (c - c2));
      d(r, c) = static_cast<float>(std::sqrt(static_cast<double>(best)));
    }
  return d;
}

/// Random rectangles and blobs; later shapes overwrite earlier ones.
inline InstanceMask random_mask(Rng& rng, int h, int w, int max_shapes) {
  LabelGrid lab = LabelGrid::Zero(h, w);
  const int n = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(max_shapes)));
  for (int s = 1; s <= n; ++s) {
    const int r0 = static_cast<int>(rng.index(h)), c0 = static_cast<int>(rng.index(w));
    const int rh = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, h / 3))));
    const int cw = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, w / 3))));
    const bool ellipse = rng.uniform() < 0.5;
    for (int r = r0; r < std::min(h, r0 + rh); ++r)
      for (int c = c0; c < std::min(w, c0 + cw); ++c) {
        if (ellipse) {
          const double y = (r - r0 - (rh - 1) / 2.0) / (rh / 2.0 + 0.5), x = (c - c0 - (cw - 1) / 2.0) / (cw / 2.0 + 0.5);
          if (x * x + y * y > 1.0) continue;
        }
        lab(r, c) = static_cast<std::uint32_t>(s);
      }
  }
  return relabel(lab);
}

/// Maximum number of one-to-one pairs with IoU >= thr, by exhaustive search.
inline int brute_max_matching(const Eigen::MatrixXd& iou, double thr) {
  const int ng = static_cast<int>(iou.rows()), np = static_cast<int>(iou.cols());
  std::vector<char> used(static_cast<std::size_t>(np), 0);
  std::function<int(int)> go = [&](int g) -> int {
    if (g == ng) return 0;
    int best = go(g + 1);
    for (int p = 0; p < np; ++p)
      if (!used[p] && iou(g, p) >= thr) {
        used[p] = 1;
        best = std::max(best, 1 + go(g + 1));
        used[p] = 0;
      }
    return best;
  };
  return go(0);
}

/// Bilinear sample with clamp-to-edge.
inline double bilinear(const Grid<float>& g, double x, double y) {
  const double fx = std::clamp(x, 0.0, static_cast<double>(g.cols() - 1));
  const double fy = std::clamp(y, 0.0, static_cast<double>(g.rows() - 1));
  const auto x0 = static_cast<Eigen::Index>(std::floor(fx)), y0 = static_cast<Eigen::Index>(std::floor(fy));
  const auto x1 = std::min(x0 + 1, g.cols() - 1), y1 = std::min(y0 + 1, g.rows() - 1);
  const double tx = fx - x0, ty = fy - y0;
  return (1 - ty) * ((1 - tx) * g(y0, x0) + tx * g(y0, x1)) + ty * ((1 - tx) * g(y1, x0) + tx * g(y1, x1));
}

/// Central-difference check of a scalar function of the parameters against
/// an analytic gradient, on `n_coords` randomly chosen coordinates. Returns
/// ||analytic - numeric|| / max(||analytic||, ||numeric||) over them.
inline double param_gradient_error(Params<double> params, const Params<double>& analytic,
                                   const std::function<double(const Params<double>&)>& f, Rng& rng, int n_coords,
                                   double h = 1e-6) {
  std::vector<std::pair<std::string, Eigen::Index>> coords;
  std::vector<std::string> names;
  for (const auto& [k, v] : params) names.push_back(k);
  for (int i = 0; i < n_coords; ++i) {
    const auto& name = names[rng.index(names.size())];
    coords.emplace_back(name, static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(params.at(name).size()))));
  }
  double num2 = 0, ana2 = 0, diff2 = 0;
  for (const auto& [name, idx] : coords) {
    double& x = params.at(name).data()[idx];
    const double x0 = x;
    x = x0 + h;
    const double fp = f(params);
    x = x0 - h;
    const double fm = f(params);
    x = x0;
    const double numeric = (fp - fm) / (2 * h);
    const double a = analytic.at(name).data()[idx];
    num2 += numeric * numeric;
    ana2 += a * a;
    diff2 += (a - numeric) * (a - numeric);
  }
  const double scale = std::sqrt(std::max(num2, ana2));
  return scale == 0 ? 0.0 : std::sqrt(diff2) / scale;
}

}  // namespace madc::oracle

#endif  // MADC_TESTS_ORACLES_HPP

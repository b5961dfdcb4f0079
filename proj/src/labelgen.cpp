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

#include "madc/labelgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace madc {
namespace {

constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

struct Box {
  Eigen::Index r0 = std::numeric_limits<Eigen::Index>::max();
  Eigen::Index c0 = std::numeric_limits<Eigen::Index>::max();
  Eigen::Index r1 = -1;
  Eigen::Index c1 = -1;
};

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher), integer sample
// values; kInf entries are not sites.
void squared_edt_1d(const std::vector<std::int64_t>& f, std::vector<std::int64_t>& out,
                    std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] >= kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -std::numeric_limits<double>::infinity();
      z[1] = std::numeric_limits<double>::infinity();
      continue;
    }
    double s = 0;
    while (true) {
      const int p = v[k];
      s = (static_cast<double>(f[q] + std::int64_t(q) * q) - static_cast<double>(f[p] + std::int64_t(p) * p)) /
          (2.0 * (q - p));
      if (s > z[k]) break;
      --k;  // z[0] is -inf, so k stays >= 0
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const std::int64_t dq = q - v[j];
    out[q] = dq * dq + f[v[j]];
  }
}

}  // namespace

Grid<float> distance_field(const InstanceMask& mask) {
  const Eigen::Index h = mask.height(), w = mask.width();
  Grid<float> d = Grid<float>::Zero(h, w);
  if (mask.count == 0) return d;

  std::vector<Box> boxes(mask.count + 1);
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      const auto l = mask.labels(r, c);
      if (l == 0) continue;
      auto& b = boxes[l];
      b.r0 = std::min(b.r0, r);
      b.r1 = std::max(b.r1, r);
      b.c0 = std::min(b.c0, c);
      b.c1 = std::max(b.c1, c);
    }
  }

  std::vector<std::int64_t> f, g;
  std::vector<int> v;
  std::vector<double> z;
  for (std::uint32_t l = 1; l <= mask.count; ++l) {
    const auto& b = boxes[l];
    if (b.r1 < 0) continue;
    // The nearest foreign pixel of any cell pixel lies within the bounding box
    // grown by one: the box ring projects every farther pixel closer.
    const Eigen::Index r0 = std::max<Eigen::Index>(b.r0 - 1, 0), r1 = std::min(b.r1 + 1, h - 1);
    const Eigen::Index c0 = std::max<Eigen::Index>(b.c0 - 1, 0), c1 = std::min(b.c1 + 1, w - 1);
    const Eigen::Index bh = r1 - r0 + 1, bw = c1 - c0 + 1;

    Eigen::Array<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> col_pass(bh, bw);
    f.assign(static_cast<std::size_t>(std::max(bh, bw)), kInf);
    g.assign(f.size(), kInf);
    v.assign(f.size() + 1, 0);
    z.assign(f.size() + 2, 0.0);

    f.resize(static_cast<std::size_t>(bh));
    g.resize(f.size());
    for (Eigen::Index c = 0; c < bw; ++c) {
      for (Eigen::Index r = 0; r < bh; ++r) f[r] = mask.labels(r0 + r, c0 + c) != l ? 0 : kInf;
      squared_edt_1d(f, g, v, z);
      for (Eigen::Index r = 0; r < bh; ++r) col_pass(r, c) = g[r];
    }
    f.resize(static_cast<std::size_t>(bw));
    g.resize(f.size());
    bool any_site = false;
    for (Eigen::Index r = 0; r < bh; ++r) {
      for (Eigen::Index c = 0; c < bw; ++c) f[c] = col_pass(r, c);
      squared_edt_1d(f, g, v, z);
      for (Eigen::Index c = 0; c < bw; ++c) {
        if (mask.labels(r0 + r, c0 + c) != l) continue;
        if (g[c] >= kInf) continue;
        any_site = true;
        d(r0 + r, c0 + c) = static_cast<float>(std::sqrt(static_cast<double>(g[c])));
      }
    }
    if (!any_site) {
      for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index c = 0; c < w; ++c)
          if (mask.labels(r, c) == l) d(r, c) = static_cast<float>(std::min({r + 1, c + 1, h - r, w - c}));
    }
  }
  return d;
}

std::pair<Grid<float>, Grid<float>> flow_field(const Grid<float>& d, const InstanceMask& mask) {
  const Eigen::Index h = mask.height(), w = mask.width();
  require_same_shape(d, h, w, "flow_field distance vs mask");
  Grid<float> gx = Grid<float>::Zero(h, w), gy = Grid<float>::Zero(h, w);

  auto same = [&](Eigen::Index r, Eigen::Index c, std::uint32_t l) {
    return r >= 0 && r < h && c >= 0 && c < w && mask.labels(r, c) == l;
  };
  auto diff = [](bool lo_in, bool hi_in, double lo, double mid, double hi) {
    if (lo_in && hi_in) return 0.5 * (hi - lo);
    if (hi_in) return hi - mid;
    if (lo_in) return mid - lo;
    return 0.0;
  };

  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      const auto l = mask.labels(r, c);
      if (l == 0) continue;
      const bool left = same(r, c - 1, l), right = same(r, c + 1, l);
      const bool up = same(r - 1, c, l), down = same(r + 1, c, l);
      const double mid = d(r, c);
      const double dx = diff(left, right, left ? d(r, c - 1) : 0.0, mid, right ? d(r, c + 1) : 0.0);
      const double dy = diff(up, down, up ? d(r - 1, c) : 0.0, mid, down ? d(r + 1, c) : 0.0);
      const double n = std::hypot(dx, dy);
      if (n > kFlowEpsilon) {
        gx(r, c) = static_cast<float>(dx / n);
        gy(r, c) = static_cast<float>(dy / n);
      }
    }
  }
  return {std::move(gx), std::move(gy)};
}

BinaryGrid boundary_mask(const InstanceMask& mask) {
  const Eigen::Index h = mask.height(), w = mask.width();
  BinaryGrid b = BinaryGrid::Zero(h, w);
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      const auto l = mask.labels(r, c);
      if (l == 0) continue;
      const bool interior = r > 0 && r + 1 < h && c > 0 && c + 1 < w && mask.labels(r - 1, c) == l &&
                            mask.labels(r + 1, c) == l && mask.labels(r, c - 1) == l &&
                            mask.labels(r, c + 1) == l;
      b(r, c) = interior ? 0 : 1;
    }
  }
  return b;
}

TargetField<float> make_targets(const InstanceMask& mask) {
  TargetField<float> t;
  t.d = distance_field(mask);
  auto [gx, gy] = flow_field(t.d, mask);
  t.gx = std::move(gx);
  t.gy = std::move(gy);
  t.b = boundary_mask(mask).cast<float>();
  return t;
}

}  // namespace madc

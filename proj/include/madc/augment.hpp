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

#ifndef MADC_AUGMENT_HPP
#define MADC_AUGMENT_HPP

#include "madc/rng.hpp"
#include "madc/types.hpp"

namespace madc {

/// Flips are applied first, then `rot90` quarter turns. One quarter turn
/// maps pixel (x, y) of a w-wide image to (y, w-1-x).
struct Augmentation {
  bool flip_x = false;  ///< mirror columns
  bool flip_y = false;  ///< mirror rows
  int rot90 = 0;        ///< 0..3
  float scale = 1.0f;   ///< intensity gain
  float offset = 0.0f;  ///< intensity shift

  bool is_identity() const { return !flip_x && !flip_y && rot90 == 0 && scale == 1.0f && offset == 0.0f; }
};

/// Flips and rotations uniform; gain in [0.8,1.2], shift in [-0.1,0.1].
Augmentation sample_augmentation(Rng& rng);

template <typename T>
Grid<T> transform_grid(const Grid<T>& g, const Augmentation& a) {
  Grid<T> out = g;
  if (a.flip_x) out = out.rowwise().reverse().eval();
  if (a.flip_y) out = out.colwise().reverse().eval();
  for (int k = 0; k < (a.rot90 & 3); ++k) {
    // out'(i, j) = out(j, w-1-i)
    Grid<T> r(out.cols(), out.rows());
    for (Eigen::Index i = 0; i < r.rows(); ++i)
      for (Eigen::Index j = 0; j < r.cols(); ++j) r(i, j) = out(j, out.cols() - 1 - i);
    out = std::move(r);
  }
  return out;
}

/// Spatial transform plus intensity gain/shift, clamped to [0,1].
Image augment_image(const Image& img, const Augmentation& a);
/// Spatial transform with labels renumbered to first-appearance order.
InstanceMask augment_mask(const InstanceMask& mask, const Augmentation& a);
/// Spatial transform of every channel; flow vectors are rotated/reflected
/// with the grid so that the result equals make_targets(augment_mask(m)).
TargetField<float> augment_targets(const TargetField<float>& t, const Augmentation& a);

}  // namespace madc

#endif  // MADC_AUGMENT_HPP

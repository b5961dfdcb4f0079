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

#include "madc/augment.hpp"

namespace madc {

Augmentation sample_augmentation(Rng& rng) {
  Augmentation a;
  a.flip_x = rng.uniform() < 0.5;
  a.flip_y = rng.uniform() < 0.5;
  a.rot90 = static_cast<int>(rng.index(4));
  a.scale = static_cast<float>(rng.uniform(0.8, 1.2));
  a.offset = static_cast<float>(rng.uniform(-0.1, 0.1));
  return a;
}

Image augment_image(const Image& img, const Augmentation& a) {
  Grid<float> g = transform_grid(img.pixels, a);
  g = (g * a.scale + a.offset).cwiseMax(0.0f).cwiseMin(1.0f);
  return Image(std::move(g));
}

InstanceMask augment_mask(const InstanceMask& mask, const Augmentation& a) {
  return relabel(transform_grid(mask.labels, a));
}

TargetField<float> augment_targets(const TargetField<float>& t, const Augmentation& a) {
  Augmentation spatial = a;
  spatial.scale = 1.0f;
  spatial.offset = 0.0f;
  Grid<float> gx = t.gx, gy = t.gy;
  if (a.flip_x) gx = -gx;
  if (a.flip_y) gy = -gy;
  // A quarter turn sends displacement (dx, dy) to (dy, -dx).
  for (int k = 0; k < (a.rot90 & 3); ++k) {
    Grid<float> nx = gy;
    gy = -gx;
    gx = std::move(nx);
  }
  return {transform_grid(t.d, spatial), transform_grid(gx, spatial), transform_grid(gy, spatial),
          transform_grid(t.b, spatial)};
}

}  // namespace madc

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

#ifndef MADC_LABELGEN_HPP
#define MADC_LABELGEN_HPP

#include <utility>

#include "madc/types.hpp"

namespace madc {

inline constexpr double kFlowEpsilon = 1e-6;

/// Euclidean distance from each cell pixel to the nearest pixel centre carrying
/// a different label (background included); 0 on background. Exact: squared
/// distances are integers and the square root is taken once in double.
///
/// A mask consisting of a single instance that covers the whole grid has no
/// foreign pixel; its pixels get the distance to the nearest pixel centre
/// outside the grid instead.
Grid<float> distance_field(const InstanceMask& mask);

/// Unit up-slope gradient of `d` restricted to each instance. Central
/// differences where both neighbours share the label, one-sided where only
/// one does, 0 where neither does. Vectors with magnitude <= 1e-6 become (0,0).
std::pair<Grid<float>, Grid<float>> flow_field(const Grid<float>& d, const InstanceMask& mask);

/// 1 on cell pixels with a 4-neighbour of another label; the grid edge counts
/// as another label.
BinaryGrid boundary_mask(const InstanceMask& mask);

TargetField<float> make_targets(const InstanceMask& mask);

}  // namespace madc

#endif  // MADC_LABELGEN_HPP

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

#ifndef MADC_SEGMENTER_HPP
#define MADC_SEGMENTER_HPP

#include <vector>

#include <Eigen/Core>

#include "madc/types.hpp"

namespace madc {

struct HeadConfig {
  float t_fg = 0.5f;  ///< foreground iff phi > t_fg (pixels)
  // Short travel: exact distance fields have separate maxima along the
  // medial axis, and long integration drains a rod into several of them.
  int n_steps = 6;
  float step = 0.25f;
  float cluster_eps = 2.5f;
  int cluster_min_pts = 3;
  int min_instance_px = 4;
};

void validate(const HeadConfig& cfg);

inline constexpr float kEulerStopNorm = 0.05f;

BinaryGrid foreground(const FeatureMap<float>& z, float t_fg);

/// Final (x, y) positions of every foreground pixel, in row-major pixel order,
/// after `n_steps` Euler steps along the bilinearly sampled flow. A pixel
/// stops early once the sampled flow norm drops below 0.05; positions are
/// clamped to the image rectangle.
std::vector<Eigen::Vector2f> euler_integrate(const Grid<float>& u1, const Grid<float>& u2, const BinaryGrid& fg,
                                             int n_steps, float step);

/// DBSCAN (a point counts itself as a neighbour) followed by noise adoption
/// within 2*eps, erasure of clusters below `min_instance_px`, and renumbering
/// 1..N by each cluster's first point. Returns 0 for background.
std::vector<std::uint32_t> cluster(const std::vector<Eigen::Vector2f>& positions, float eps, int min_pts,
                                   int min_instance_px);

/// Y = g(Z): foreground -> Euler integration -> clustering.
InstanceMask segment(const FeatureMap<float>& z, const HeadConfig& cfg);

/// Feature map built from ground truth: phi = d, u = flow, z = +/-10 by border.
FeatureMap<float> features_from_targets(const TargetField<float>& t);

}  // namespace madc

#endif  // MADC_SEGMENTER_HPP

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

#ifndef MADC_SYNTHGEN_HPP
#define MADC_SYNTHGEN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "madc/types.hpp"

namespace madc {

/// Rendering style. `phase`: dark cells with a bright halo on a bright
/// background. `fluor`: bright cells on a dark background. `worm`: phase
/// rendering of long, gently curved, unbranched tubes.
enum class Domain { kPhase, kFluor, kWorm };

const char* to_string(Domain d);
Domain domain_from_string(const std::string& s);

struct SynthConfig {
  std::string name = "synth";
  Split split = Split::kTrain;
  std::uint64_t seed = 0;
  int n_images = 16;
  int height = 64;
  int width = 64;
  int cells_min = 3;
  int cells_max = 7;
  double radius_min = 1.5;
  double radius_max = 3.5;
  double length_min = 6.0;
  double length_max = 22.0;
  double curvature = 0.15;  ///< max heading change per 1-px step, radians
  double branch_prob = 0.2;
  Domain domain = Domain::kPhase;
  double noise_sigma = 0.03;
  double blur_sigma = 0.7;
};

/// Throws ConfigError on degenerate ranges or impossible geometry.
void validate(const SynthConfig& cfg);

/// Preset geometry and noise for a domain at the given image size.
SynthConfig default_synth_config(Domain domain, int size = 64);

struct CellShape {
  std::vector<std::pair<double, double>> skeleton;  ///< (x, y) polyline points
  std::vector<std::pair<double, double>> branch;    ///< empty when unbranched
  double radius = 0;
  std::uint32_t label = 0;
};

struct SynthImage {
  Sample sample;
  std::vector<CellShape> cells;
};

/// Image `index` of the dataset; a pure function of (cfg, index).
SynthImage gen_image(const SynthConfig& cfg, std::size_t index);

Dataset gen_dataset(const SynthConfig& cfg);

/// Palette, blur and noise for a mask. Noise is drawn from `noise_seed`.
Image render(const InstanceMask& mask, Domain domain, double blur_sigma, double noise_sigma,
             std::uint64_t noise_seed);

/// Separable Gaussian, kernel half-width ceil(3 sigma), clamp-to-edge borders.
Grid<float> gaussian_blur(const Grid<float>& src, double sigma);

/// One uniformly placed square crop per item; masks relabeled.
Dataset crop_patches(const Dataset& ds, int size, std::uint64_t seed);

/// Crop with the given top-left corner; mask relabeled.
Sample crop(const Sample& s, Eigen::Index top, Eigen::Index left, Eigen::Index h, Eigen::Index w);

}  // namespace madc

#endif  // MADC_SYNTHGEN_HPP

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

#ifndef MADC_TYPES_HPP
#define MADC_TYPES_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "madc/errors.hpp"

namespace madc {

/// Row-major 2D raster. Rows are y (downward), columns are x.
template <typename T>
using Grid = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using LabelGrid = Grid<std::uint32_t>;
using BinaryGrid = Grid<std::uint8_t>;

/// Grayscale intensities in [0,1].
struct Image {
  Grid<float> pixels;

  Image() = default;
  explicit Image(Grid<float> p) : pixels(std::move(p)) {}

  Eigen::Index height() const { return pixels.rows(); }
  Eigen::Index width() const { return pixels.cols(); }
};

/// Labels 0 (background) and 1..count, every label present.
struct InstanceMask {
  LabelGrid labels;
  std::uint32_t count = 0;

  Eigen::Index height() const { return labels.rows(); }
  Eigen::Index width() const { return labels.cols(); }
};

/// Supervision derived from an InstanceMask: distance, unit flow, border.
template <typename T>
struct TargetField {
  Grid<T> d;
  Grid<T> gx;
  Grid<T> gy;
  Grid<T> b;

  Eigen::Index height() const { return d.rows(); }
  Eigen::Index width() const { return d.cols(); }

  template <typename U>
  TargetField<U> cast() const {
    return {d.template cast<U>(), gx.template cast<U>(), gy.template cast<U>(),
            b.template cast<U>()};
  }
};

/// Network output per pixel: distance phi, flow (u1,u2), border logit z.
template <typename T>
struct FeatureMap {
  Grid<T> phi;
  Grid<T> u1;
  Grid<T> u2;
  Grid<T> z;

  FeatureMap() = default;
  FeatureMap(Eigen::Index h, Eigen::Index w)
      : phi(Grid<T>::Zero(h, w)),
        u1(Grid<T>::Zero(h, w)),
        u2(Grid<T>::Zero(h, w)),
        z(Grid<T>::Zero(h, w)) {}
  FeatureMap(Grid<T> p, Grid<T> a, Grid<T> b, Grid<T> s)
      : phi(std::move(p)), u1(std::move(a)), u2(std::move(b)), z(std::move(s)) {}

  Eigen::Index height() const { return phi.rows(); }
  Eigen::Index width() const { return phi.cols(); }

  bool all_finite() const {
    return phi.allFinite() && u1.allFinite() && u2.allFinite() && z.allFinite();
  }

  FeatureMap& operator+=(const FeatureMap& o) {
    phi += o.phi;
    u1 += o.u1;
    u2 += o.u2;
    z += o.z;
    return *this;
  }

  template <typename U>
  FeatureMap<U> cast() const {
    return {phi.template cast<U>(), u1.template cast<U>(), u2.template cast<U>(),
            z.template cast<U>()};
  }
};

struct Sample {
  Image image;
  InstanceMask mask;
};

enum class Split { kTrain, kTest };

struct Dataset {
  std::string name;
  Split split = Split::kTrain;
  std::vector<Sample> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
};

inline const char* to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

/// Throws ContractViolation unless sizes are >= 8 and values finite in [0,1].
void validate(const Image& img);
/// Throws ContractViolation unless labels are contiguous 0..count.
void validate(const InstanceMask& mask);

/// Relabels to 0..N in order of first appearance in a row-major scan.
InstanceMask relabel(const LabelGrid& labels);

template <typename T>
void require_same_shape(const Grid<T>& a, Eigen::Index h, Eigen::Index w, const char* what) {
  if (a.rows() != h || a.cols() != w) throw ContractViolation(std::string("shape mismatch: ") + what);
}

}  // namespace madc

#endif  // MADC_TYPES_HPP

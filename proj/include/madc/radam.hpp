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

#ifndef MADC_RADAM_HPP
#define MADC_RADAM_HPP

#include <cmath>
#include <cstdint>

#include "madc/net.hpp"

namespace madc {

template <typename T>
struct OptimState {
  Params<T> m;
  Params<T> v;
  std::int64_t t = 0;
  double lr = 0.03;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool decoupled_decay = false;
};

/// Length of the approximated simple moving average after t steps.
inline double radam_rho(std::int64_t t, double beta2) {
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double b2t = std::pow(beta2, static_cast<double>(t));
  return rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
}

/// Rectified Adam. With coupled decay wd*theta is added to the gradient
/// before the moment updates. While rho_t <= 4 the step is bias-corrected
/// momentum only; afterwards it is scaled by the variance rectification term.
template <typename T>
void radam_step(Params<T>& params, const Params<T>& grads, OptimState<T>& st) {
  if (st.m.empty()) {
    st.m = zeros_like(params);
    st.v = zeros_like(params);
  }
  for (const auto& [name, g] : grads)
    if (!g.allFinite()) throw NumericError("non-finite gradient for " + name);

  st.t += 1;
  const double t = static_cast<double>(st.t);
  const double bc1 = 1.0 - std::pow(st.beta1, t);
  const double bc2 = 1.0 - std::pow(st.beta2, t);
  const double rho_inf = 2.0 / (1.0 - st.beta2) - 1.0;
  const double rho = radam_rho(st.t, st.beta2);
  const bool adaptive = rho > 4.0;
  const double rect =
      adaptive ? std::sqrt((rho - 4.0) * (rho - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho)) : 0.0;

  for (auto& [name, theta] : params) {
    Mat<T> g = grads.at(name);
    if (!st.decoupled_decay && st.weight_decay != 0.0) g += T(st.weight_decay) * theta;
    Mat<T>& m = st.m.at(name);
    Mat<T>& v = st.v.at(name);
    m = T(st.beta1) * m + T(1.0 - st.beta1) * g;
    v = T(st.beta2) * v + T(1.0 - st.beta2) * g.cwiseProduct(g);
    if (st.decoupled_decay && st.weight_decay != 0.0) theta *= T(1.0 - st.lr * st.weight_decay);
    if (adaptive) {
      const T scale = T(st.lr * rect / bc1);
      theta.array() -= scale * m.array() / ((v.array() / T(bc2)).sqrt() + T(st.eps));
    } else {
      theta -= T(st.lr / bc1) * m;
    }
  }
}

/// Moments and step counter as optim.* tensors; shapes follow the params.
void store_optimizer(Checkpoint& ckpt, const OptimState<float>& st, const ModelConfig& cfg);
/// Restores moments and t; lr and decay settings are left untouched.
void load_optimizer(const Checkpoint& ckpt, OptimState<float>& st, const ModelConfig& cfg);

}  // namespace madc

#endif  // MADC_RADAM_HPP

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

#include "madc/losses.hpp"

namespace madc {

void validate(const LossConfig& cfg) {
  if (!(cfg.nu >= 0 && cfg.mu >= 0 && cfg.ivp_weight >= 0)) throw ConfigError("loss weights must be >= 0");
}

void validate(const AdaptConfig& cfg) {
  if (!(cfg.tau > 0)) throw ConfigError("tau must be > 0");
  if (!(cfg.margin > 0)) throw ConfigError("margin must be > 0");
  if (cfg.n_negatives < 1) throw ConfigError("n_negatives must be >= 1");
  if (!(cfg.sigma_rbf > 0)) throw ConfigError("sigma_rbf must be > 0");
  if (!(cfg.delta > 0 && cfg.delta < 1)) throw ConfigError("delta must be in (0,1)");
  if (!(cfg.gamma1 >= 0 && cfg.gamma2 >= 0 && cfg.lambda >= 0)) throw ConfigError("loss weights must be >= 0");
  if (cfg.pixels_per_pair < 1 || cfg.pairs_per_class < 1) throw ConfigError("sampling caps must be >= 1");
}

}  // namespace madc

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

#ifndef MADC_PROTOCOL_HPP
#define MADC_PROTOCOL_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "madc/losses.hpp"
#include "madc/net.hpp"
#include "madc/radam.hpp"
#include "madc/types.hpp"

namespace madc {

struct ShotSet {
  int k = 0;
  std::vector<Sample> patches;
  double source_diameter = 0;
  double target_diameter = 0;
  /// (item index, label) of the instance each patch was cut around.
  std::vector<std::pair<std::size_t, std::uint32_t>> seeds;
};

struct TrainConfig {
  double lr = 0.03;
  int epochs = 30;
  int batch = 4;
  double wd = 1e-5;
  int patch = 64;
  std::uint64_t seed = 0;
  bool augment = true;
  /// Constant factor on the objective before differentiation. Losses are
  /// pixel sums; 1/4096 turns a 64x64 patch sum into a mean for the step.
  double loss_scale = 1.0 / 4096.0;
  /// Global L2 bound on the scaled gradient of a step; 0 disables.
  double clip_norm = 1.0;
};

/// Two-phase adaptation schedule. Phase 1 minimizes loss_adapt over
/// (source image, shot) pairs; phase 2 minimizes L_IS on the shots.
struct AdaptSchedule {
  int phase1_epochs = 5;
  int phase2_epochs = 5;
  double lr = 0.003;
  double phase2_lr = 1e-7;
  double wd = 1e-5;
  bool augment = true;
  /// Applied to the whole pair objective, so term weights are unchanged.
  double loss_scale = 1.0 / 4096.0;
  double clip_norm = 1.0;
};

void validate(const TrainConfig& cfg);
void validate(const AdaptSchedule& cfg);

struct EpochLog {
  int phase = 0;  ///< 0 pretraining, 1 and 2 adaptation phases
  int epoch = 0;
  int steps = 0;
  int skipped = 0;  ///< steps dropped for lack of mining candidates
  double loss = 0;  ///< mean per-step objective
};

struct TrainResult {
  Params<float> params;
  OptimState<float> optim;
  std::vector<EpochLog> log;
};

using ProgressFn = std::function<void(const EpochLog&)>;

/// Mean over instances of 2 sqrt(area / pi).
double mean_diameter(const Dataset& ds);

/// Bilinear resize of images and nearest-neighbour resize of masks to
/// round(ratio * size). ratio == 1 copies.
Dataset rescale_dataset(const Dataset& ds, double ratio);

/// K distinct instances drawn uniformly; each patch is a square of side
/// ceil(2 * target mean diameter) (at least 16, at most the image) centred on
/// the instance centroid and keeps every instance it intersects.
ShotSet extract_shots(const Dataset& target_train, int k, std::uint64_t seed, double source_diameter);

/// Shot index for each of `n_steps` pairings, drawn without replacement from
/// a pool of `k` that is reshuffled whenever it runs dry.
std::vector<std::size_t> pair_schedule(std::size_t n_steps, std::size_t k, Rng& rng);

/// Mini-batch L_IS training on random patch crops with RAdam.
TrainResult pretrain(const Network<float>& net, Params<float> init, const Dataset& source, const TrainConfig& cfg,
                     const LossConfig& loss, const ProgressFn& progress = {});

/// Few-shot adaptation starting from `pretrained` with a fresh optimizer.
/// With gamma1 = gamma2 = 0 this is plain fine-tuning on the shots.
TrainResult adapt(const Network<float>& net, const Params<float>& pretrained, const Dataset& source,
                  const ShotSet& shots, const LossConfig& loss, const AdaptConfig& acfg, const AdaptSchedule& sched,
                  std::uint64_t seed, const ProgressFn& progress = {});

/// CSV columns: phase,epoch,steps,skipped,loss
std::string loss_log_csv(const std::vector<EpochLog>& log);

}  // namespace madc

#endif  // MADC_PROTOCOL_HPP

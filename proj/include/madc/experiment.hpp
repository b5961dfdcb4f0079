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

#ifndef MADC_EXPERIMENT_HPP
#define MADC_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "madc/losses.hpp"
#include "madc/net.hpp"
#include "madc/protocol.hpp"
#include "madc/segmenter.hpp"
#include "madc/synthgen.hpp"

namespace madc {

struct ExperimentConfig {
  std::uint64_t seed = 0;
  SynthConfig source;
  SynthConfig target_train;
  SynthConfig target_test;
  std::vector<int> k_grid{1, 2, 3, 5, 10};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<int> ablation_k{1};
  bool rescale_target = true;
  ModelConfig model;
  LossConfig loss;
  AdaptConfig adapt;
  AdaptSchedule schedule;
  TrainConfig pretrain;
  HeadConfig head;
  int threads = 1;
};

/// 200 phase source images, 200 + 50 fluor target images, 64 px, 30 epochs.
ExperimentConfig desk_scale_config();
/// A seconds-long variant of the desk-scale run for smoke and determinism tests.
ExperimentConfig mini_scale_config();

void validate(const ExperimentConfig& cfg);

inline const char* const kVariantLb = "LB";
inline const char* const kVariantFt = "FT";
inline const char* const kVariantAdapt = "ADAPT";
inline const char* const kVariantUb = "UB";
inline const char* const kVariantNoCb = "ADAPT-noCB";
inline const char* const kVariantNoCd = "ADAPT-noCD";
inline const char* const kVariantNoBoth = "ADAPT-noBoth";

struct ResultRow {
  std::string variant;
  int k = 0;
  std::uint64_t seed = 0;
  double mean_ap = 0;
  double pooled_ap = 0;
};

struct TimingRow {
  std::string variant;
  int k = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<TimingRow> timings;
  double source_diameter = 0;
  double target_diameter = 0;
  double ratio = 1;
  /// Every ablation run without contrastive terms matched FT parameter for parameter.
  bool no_both_matches_ft = true;
};

using LogFn = std::function<void(const std::string&)>;

/// LB, FT, ADAPT and UB for every (K, seed), plus the three ablations for K
/// in ablation_k. Writes results.csv, timings.csv, summary.md, ap_vs_k.svg,
/// config.json, checkpoints/ and logs/ under `out`.
ExperimentResult run_baselines(const ExperimentConfig& cfg, const std::filesystem::path& out, const LogFn& log = {});

/// Per-run seed used for shot sampling and adaptation.
std::uint64_t run_seed(std::uint64_t experiment_seed, std::uint64_t seed);

std::string results_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_results_csv(const std::string& text);
std::string timings_csv(const std::vector<TimingRow>& rows);

}  // namespace madc

#endif  // MADC_EXPERIMENT_HPP

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

#ifndef MADC_CONFIG_HPP
#define MADC_CONFIG_HPP

#include <filesystem>
#include <string>

#include "json.hpp"
#include "madc/experiment.hpp"
#include "madc/radam.hpp"

namespace madc {

using Json = nlohmann::ordered_json;

// Serialization writes every field. Parsing updates only the keys present
// and throws ConfigError on unknown keys or mistyped values.

Json to_json(const SynthConfig& c);
Json to_json(const ModelConfig& c);
Json to_json(const LossConfig& c);
Json to_json(const AdaptConfig& c);
Json to_json(const AdaptSchedule& c);
Json to_json(const TrainConfig& c);
Json to_json(const HeadConfig& c);
Json to_json(const ExperimentConfig& c);

void update_from_json(const Json& j, SynthConfig& c);
void update_from_json(const Json& j, ModelConfig& c);
void update_from_json(const Json& j, LossConfig& c);
void update_from_json(const Json& j, AdaptConfig& c);
void update_from_json(const Json& j, AdaptSchedule& c);
void update_from_json(const Json& j, TrainConfig& c);
void update_from_json(const Json& j, HeadConfig& c);
void update_from_json(const Json& j, ExperimentConfig& c);

/// img_####.pgm / msk_####.pgm pairs plus manifest.json holding the name,
/// split, file list and `meta` (for example the generating SynthConfig).
void save_dataset(const Dataset& ds, const std::filesystem::path& dir, const Json& meta = Json::object());
/// Reads manifest.json when present, else every img_*.pgm with its msk_*.pgm.
Dataset load_dataset(const std::filesystem::path& dir);

/// Parameters, optional optimizer state, the SHA-256 of `config` and an epoch.
Checkpoint make_checkpoint(const Params<float>& params, const OptimState<float>* optim, const ModelConfig& model,
                           const Json& config, std::uint64_t epoch);

/// Parses a file; syntax errors become ConfigError.
Json read_json(const std::filesystem::path& path);
void write_json(const Json& j, const std::filesystem::path& path);

}  // namespace madc

#endif  // MADC_CONFIG_HPP

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

#ifndef MADC_CHECKPOINT_HPP
#define MADC_CHECKPOINT_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace madc {

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> values;

  bool operator==(const Tensor&) const = default;
};

using Digest = std::array<std::uint8_t, 32>;

/// Named f32 tensors. Model parameters live under enc.*, dec.*, head.*;
/// optimizer moments under optim.*; bookkeeping under meta.*.
struct Checkpoint {
  std::map<std::string, Tensor> tensors;

  bool operator==(const Checkpoint&) const = default;
};

// MADC container, all integers little-endian:
//   "MADC" | u32 version=1 | u32 count |
//   count x { u32 name_len | name | u32 ndim | u64 dims[ndim] | f32 payload }
// Tensors are written in lexicographic name order.
inline constexpr std::uint32_t kMadcVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Digest sha256(std::string_view data);
std::string to_hex(const Digest& d);

void set_digest(Checkpoint& ckpt, const Digest& d);
Digest get_digest(const Checkpoint& ckpt);
void set_epoch(Checkpoint& ckpt, std::uint64_t epoch);
std::uint64_t get_epoch(const Checkpoint& ckpt);

}  // namespace madc

#endif  // MADC_CHECKPOINT_HPP

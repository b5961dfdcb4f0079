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

#ifndef MADC_DATAMODEL_HPP
#define MADC_DATAMODEL_HPP

#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "madc/types.hpp"

namespace madc {

// Binary PGM ("P5"). Images use maxval 255, masks maxval 65535 (16-bit
// big-endian samples). Header comments are accepted on read, never written.

using PgmContent = std::variant<Image, InstanceMask>;

/// Dispatches on maxval: 255 yields an Image, 65535 an InstanceMask.
PgmContent parse_pgm(std::span<const std::uint8_t> bytes);
PgmContent read_pgm(const std::filesystem::path& path);

Image read_image(const std::filesystem::path& path);
/// Accepts either maxval; raw values are relabeled to contiguous ids.
InstanceMask read_mask(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_pgm(const Image& img);
std::vector<std::uint8_t> encode_pgm(const InstanceMask& mask);
void write_pgm(const Image& img, const std::filesystem::path& path);
void write_pgm(const InstanceMask& mask, const std::filesystem::path& path);

/// Interleaved 8-bit RGB raster.
struct RgbImage {
  Eigen::Index height = 0;
  Eigen::Index width = 0;
  std::vector<std::uint8_t> data;
};

/// Binary "P6". Used for overlays only.
void write_ppm(const RgbImage& rgb, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace madc

#endif  // MADC_DATAMODEL_HPP

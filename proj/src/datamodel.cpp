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

#include "madc/datamodel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <unordered_map>

namespace madc {

void validate(const Image& img) {
  if (img.height() < 8 || img.width() < 8) throw ContractViolation("image smaller than 8x8");
  if (!img.pixels.allFinite()) throw ContractViolation("image has non-finite values");
  if ((img.pixels < 0.0f).any() || (img.pixels > 1.0f).any())
    throw ContractViolation("image values outside [0,1]");
}

void validate(const InstanceMask& mask) {
  std::vector<bool> seen(mask.count + 1, false);
  for (Eigen::Index i = 0; i < mask.labels.size(); ++i) {
    const auto v = mask.labels.data()[i];
    if (v > mask.count) throw ContractViolation("mask label exceeds instance count");
    seen[v] = true;
  }
  for (std::uint32_t l = 1; l <= mask.count; ++l)
    if (!seen[l]) throw ContractViolation("mask labels are not contiguous");
}

InstanceMask relabel(const LabelGrid& labels) {
  InstanceMask out;
  out.labels.resize(labels.rows(), labels.cols());
  std::unordered_map<std::uint32_t, std::uint32_t> ids;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const auto v = labels.data()[i];
    if (v == 0) {
      out.labels.data()[i] = 0;
      continue;
    }
    auto [it, inserted] = ids.try_emplace(v, out.count + 1);
    if (inserted) ++out.count;
    out.labels.data()[i] = it->second;
  }
  return out;
}

namespace {

struct HeaderCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("PGM header: " + what + " at byte offset " + std::to_string(pos));
  }

  void skip_space_and_comments() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  }

  std::uint64_t number() {
    skip_space_and_comments();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) fail("expected decimal integer");
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (1ull << 32)) fail("integer too large");
      ++pos;
    }
    return v;
  }
};

void append_header(std::vector<std::uint8_t>& out, Eigen::Index w, Eigen::Index h, int maxval) {
  const std::string hdr =
      "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
  out.insert(out.end(), hdr.begin(), hdr.end());
}

}  // namespace

PgmContent parse_pgm(std::span<const std::uint8_t> bytes) {
  HeaderCursor cur{bytes};
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') cur.fail("missing P5 magic");
  cur.pos = 2;
  const auto w = cur.number();
  const auto h = cur.number();
  const auto maxval = cur.number();
  if (w == 0 || h == 0) cur.fail("zero dimension");
  if (maxval != 255 && maxval != 65535) cur.fail("unsupported maxval " + std::to_string(maxval));
  if (cur.pos >= bytes.size() || !std::isspace(bytes[cur.pos])) cur.fail("expected whitespace after maxval");
  ++cur.pos;

  const std::size_t bpp = maxval == 255 ? 1 : 2;
  const std::size_t expected = static_cast<std::size_t>(w * h) * bpp;
  const std::size_t actual = bytes.size() - cur.pos;
  if (actual < expected) {
    throw FormatError("PGM payload truncated: expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(actual) + " (payload starts at byte offset " +
                      std::to_string(cur.pos) + ")");
  }
  const std::uint8_t* p = bytes.data() + cur.pos;
  const auto rows = static_cast<Eigen::Index>(h);
  const auto cols = static_cast<Eigen::Index>(w);
  if (bpp == 1) {
    Grid<float> px(rows, cols);
    for (Eigen::Index i = 0; i < px.size(); ++i) px.data()[i] = static_cast<float>(p[i]) / 255.0f;
    return Image(std::move(px));
  }
  LabelGrid raw(rows, cols);
  for (Eigen::Index i = 0; i < raw.size(); ++i)
    raw.data()[i] = (static_cast<std::uint32_t>(p[2 * i]) << 8) | p[2 * i + 1];
  return relabel(raw);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

PgmContent read_pgm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_pgm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Image read_image(const std::filesystem::path& path) {
  auto c = read_pgm(path);
  if (!std::holds_alternative<Image>(c)) throw FormatError(path.string() + ": expected maxval 255 image");
  return std::get<Image>(std::move(c));
}

InstanceMask read_mask(const std::filesystem::path& path) {
  auto c = read_pgm(path);
  if (auto* m = std::get_if<InstanceMask>(&c)) return std::move(*m);
  // 8-bit mask: raw byte values are labels.
  const auto& px = std::get<Image>(c).pixels;
  LabelGrid raw(px.rows(), px.cols());
  for (Eigen::Index i = 0; i < px.size(); ++i)
    raw.data()[i] = static_cast<std::uint32_t>(std::lround(px.data()[i] * 255.0f));
  return relabel(raw);
}

std::vector<std::uint8_t> encode_pgm(const Image& img) {
  std::vector<std::uint8_t> out;
  append_header(out, img.width(), img.height(), 255);
  out.reserve(out.size() + static_cast<std::size_t>(img.pixels.size()));
  for (Eigen::Index i = 0; i < img.pixels.size(); ++i) {
    const float v = std::clamp(img.pixels.data()[i], 0.0f, 1.0f);
    // round half up
    out.push_back(static_cast<std::uint8_t>(std::floor(v * 255.0f + 0.5f)));
  }
  return out;
}

std::vector<std::uint8_t> encode_pgm(const InstanceMask& mask) {
  if (mask.count > 65535) throw CapacityError("mask has " + std::to_string(mask.count) + " instances, PGM holds at most 65535");
  std::vector<std::uint8_t> out;
  append_header(out, mask.width(), mask.height(), 65535);
  out.reserve(out.size() + 2 * static_cast<std::size_t>(mask.labels.size()));
  for (Eigen::Index i = 0; i < mask.labels.size(); ++i) {
    const auto v = mask.labels.data()[i];
    if (v > 65535) throw CapacityError("label value exceeds 65535");
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  return out;
}

void write_pgm(const Image& img, const std::filesystem::path& path) { write_file(path, encode_pgm(img)); }

void write_pgm(const InstanceMask& mask, const std::filesystem::path& path) {
  write_file(path, encode_pgm(mask));
}

void write_ppm(const RgbImage& rgb, const std::filesystem::path& path) {
  require(rgb.data.size() == static_cast<std::size_t>(rgb.height * rgb.width * 3), "RGB buffer size");
  std::vector<std::uint8_t> out;
  const std::string hdr =
      "P6\n" + std::to_string(rgb.width) + " " + std::to_string(rgb.height) + "\n255\n";
  out.insert(out.end(), hdr.begin(), hdr.end());
  out.insert(out.end(), rgb.data.begin(), rgb.data.end());
  write_file(path, out);
}

}  // namespace madc

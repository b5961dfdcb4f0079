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

#include "madc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <limits>

#include <openssl/sha.h>

#include "madc/datamodel.hpp"
#include "madc/errors.hpp"

namespace madc {
namespace {

static_assert(std::endian::native == std::endian::little, "MADC I/O assumes a little-endian host");

constexpr char kMagic[4] = {'M', 'A', 'D', 'C'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

struct Reader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (bytes.size() - pos < n)
      throw FormatError(std::string("MADC truncated while reading ") + what + " at byte offset " +
                        std::to_string(pos));
  }

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.tensors.size() > std::numeric_limits<std::uint32_t>::max())
    throw CapacityError("too many tensors");
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint32_t>(out, kMadcVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    std::uint64_t n = 1;
    for (auto d : t.dims) {
      if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d)
        throw CapacityError("dimension product overflows for tensor " + name);
      n *= d;
    }
    if (n != t.values.size()) throw ContractViolation("tensor " + name + " dims do not match value count");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put<std::uint64_t>(out, d);
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.values.data());
    out.insert(out.end(), p, p + t.values.size() * sizeof(float));
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r{bytes};
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad MADC magic");
  r.pos = 4;
  const auto version = r.get<std::uint32_t>("version");
  if (version != kMadcVersion) throw FormatError("unsupported MADC version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>("tensor count");
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>("name length");
    r.need(len, "name");
    std::string name(reinterpret_cast<const char*>(bytes.data() + r.pos), len);
    r.pos += len;
    const auto ndim = r.get<std::uint32_t>("ndim");
    Tensor t;
    std::uint64_t n = 1;
    for (std::uint32_t k = 0; k < ndim; ++k) {
      const auto d = r.get<std::uint64_t>("dims");
      if (d != 0 && n > (std::numeric_limits<std::uint64_t>::max() / sizeof(float)) / d)
        throw CapacityError("dimension product overflows for tensor " + name);
      n *= d;
      t.dims.push_back(d);
    }
    r.need(n * sizeof(float), "payload");
    t.values.resize(n);
    std::memcpy(t.values.data(), bytes.data() + r.pos, n * sizeof(float));
    r.pos += n * sizeof(float);
    if (!ckpt.tensors.emplace(std::move(name), std::move(t)).second)
      throw FormatError("duplicate tensor name in MADC file");
  }
  if (r.pos != bytes.size()) throw FormatError("trailing bytes after MADC payload at offset " + std::to_string(r.pos));
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Digest sha256(std::string_view data) {
  Digest d{};
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), d.data());
  return d;
}

std::string to_hex(const Digest& d) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  for (auto b : d) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 15]);
  }
  return s;
}

void set_digest(Checkpoint& ckpt, const Digest& d) {
  Tensor t{{32}, {}};
  for (auto b : d) t.values.push_back(static_cast<float>(b));
  ckpt.tensors["meta.digest"] = std::move(t);
}

Digest get_digest(const Checkpoint& ckpt) {
  Digest d{};
  auto it = ckpt.tensors.find("meta.digest");
  if (it == ckpt.tensors.end()) return d;
  if (it->second.values.size() != 32) throw FormatError("meta.digest must hold 32 values");
  for (std::size_t i = 0; i < 32; ++i) d[i] = static_cast<std::uint8_t>(it->second.values[i]);
  return d;
}

void set_epoch(Checkpoint& ckpt, std::uint64_t epoch) {
  if (epoch > (1ull << 24)) throw CapacityError("epoch counter exceeds exact f32 range");
  ckpt.tensors["meta.epoch"] = Tensor{{1}, {static_cast<float>(epoch)}};
}

std::uint64_t get_epoch(const Checkpoint& ckpt) {
  auto it = ckpt.tensors.find("meta.epoch");
  if (it == ckpt.tensors.end() || it->second.values.empty()) return 0;
  return static_cast<std::uint64_t>(it->second.values[0]);
}

}  // namespace madc

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

#include "madc/net.hpp"
#include "madc/radam.hpp"

namespace madc {
namespace {

void add_conv(std::vector<ParamSpec>& out, const std::string& name, int in, int outc, int k) {
  const auto k2 = static_cast<std::uint64_t>(k) * k;
  if (k == 1)
    out.push_back({name + ".weight", {std::uint64_t(outc), std::uint64_t(in)}, in, outc, false});
  else
    out.push_back({name + ".weight", {std::uint64_t(outc), std::uint64_t(in), std::uint64_t(k), std::uint64_t(k)},
                   int(in * k2), int(outc * k2), false});
  out.push_back({name + ".bias", {std::uint64_t(outc)}, 0, 0, true});
}

}  // namespace

void validate(const ModelConfig& cfg) {
  if (cfg.levels < 1 || cfg.levels > 3) throw ConfigError("model levels must be in [1,3]");
  if (cfg.base_channels < 1) throw ConfigError("base_channels must be >= 1");
}

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
  std::vector<ParamSpec> s;
  auto ch = [&](int l) { return cfg.base_channels << l; };
  for (int l = 0; l < cfg.levels; ++l) {
    const std::string base = "enc." + std::to_string(l);
    add_conv(s, base + ".conv1", l == 0 ? ModelConfig::kInChannels : ch(l - 1), ch(l), 3);
    add_conv(s, base + ".conv2", ch(l), ch(l), 3);
  }
  for (int l = cfg.levels - 1; l >= 0; --l) {
    const std::string base = "dec." + std::to_string(l);
    const int up = l == cfg.levels - 1 ? ch(l) : ch(l + 1);
    add_conv(s, base + ".conv1", up + ch(l), ch(l), 3);
    add_conv(s, base + ".conv2", ch(l), ch(l), 3);
  }
  add_conv(s, "head", ch(0), ModelConfig::kOutChannels, 1);
  return s;
}

std::size_t param_count(const ModelConfig& cfg) {
  std::size_t n = 0;
  for (const auto& s : param_specs(cfg)) {
    std::size_t k = 1;
    for (auto d : s.dims) k *= d;
    n += k;
  }
  return n;
}

Params<float> params_from_checkpoint(const Checkpoint& ckpt, const ModelConfig& cfg) {
  Params<float> p;
  for (const auto& s : param_specs(cfg)) {
    auto it = ckpt.tensors.find(s.name);
    if (it == ckpt.tensors.end()) throw FormatError("checkpoint is missing tensor " + s.name);
    if (it->second.dims != s.dims) throw FormatError("checkpoint tensor " + s.name + " has the wrong shape");
    const auto rows = static_cast<Eigen::Index>(s.dims[0]);
    const auto cols = static_cast<Eigen::Index>(it->second.values.size()) / rows;
    p.emplace(s.name, Eigen::Map<const Mat<float>>(it->second.values.data(), rows, cols));
  }
  return p;
}

void store_params(Checkpoint& ckpt, const Params<float>& p, const ModelConfig& cfg) {
  for (const auto& s : param_specs(cfg)) {
    const auto& m = p.at(s.name);
    ckpt.tensors[s.name] = Tensor{s.dims, std::vector<float>(m.data(), m.data() + m.size())};
  }
}

ModelConfig model_config_from_checkpoint(const Checkpoint& ckpt) {
  ModelConfig cfg;
  cfg.levels = 0;
  while (ckpt.tensors.count("enc." + std::to_string(cfg.levels) + ".conv1.weight")) ++cfg.levels;
  if (cfg.levels == 0) throw FormatError("checkpoint holds no encoder tensors");
  const auto& dims = ckpt.tensors.at("enc.0.conv1.weight").dims;
  if (dims.empty()) throw FormatError("malformed enc.0.conv1.weight");
  cfg.base_channels = static_cast<int>(dims[0]);
  validate(cfg);
  return cfg;
}

void store_optimizer(Checkpoint& ckpt, const OptimState<float>& st, const ModelConfig& cfg) {
  if (st.m.empty()) return;
  for (const auto& s : param_specs(cfg)) {
    const auto& m = st.m.at(s.name);
    const auto& v = st.v.at(s.name);
    ckpt.tensors["optim.m." + s.name] = Tensor{s.dims, std::vector<float>(m.data(), m.data() + m.size())};
    ckpt.tensors["optim.v." + s.name] = Tensor{s.dims, std::vector<float>(v.data(), v.data() + v.size())};
  }
  if (st.t > (std::int64_t(1) << 24)) throw CapacityError("optimizer step exceeds exact f32 range");
  ckpt.tensors["optim.t"] = Tensor{{1}, {static_cast<float>(st.t)}};
}

void load_optimizer(const Checkpoint& ckpt, OptimState<float>& st, const ModelConfig& cfg) {
  auto t = ckpt.tensors.find("optim.t");
  if (t == ckpt.tensors.end()) {
    st.m.clear();
    st.v.clear();
    st.t = 0;
    return;
  }
  st.t = static_cast<std::int64_t>(t->second.values.at(0));
  for (const auto& s : param_specs(cfg)) {
    const auto rows = static_cast<Eigen::Index>(s.dims[0]);
    for (const char* which : {"m", "v"}) {
      auto it = ckpt.tensors.find(std::string("optim.") + which + "." + s.name);
      if (it == ckpt.tensors.end() || it->second.dims != s.dims)
        throw FormatError("checkpoint optimizer state incomplete for " + s.name);
      const auto cols = static_cast<Eigen::Index>(it->second.values.size()) / rows;
      Mat<float> m = Eigen::Map<const Mat<float>>(it->second.values.data(), rows, cols);
      (which[0] == 'm' ? st.m : st.v)[s.name] = std::move(m);
    }
  }
}

}  // namespace madc

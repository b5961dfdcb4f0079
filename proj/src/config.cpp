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

#include "madc/config.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "madc/datamodel.hpp"

namespace madc {
namespace {

class Fields {
 public:
  Fields(const Json& j, const char* what) : j_(j), what_(what) {
    if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  }

  template <typename T>
  Fields& operator()(const char* key, T& v) {
    known_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return *this;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("");
        if constexpr (std::is_unsigned_v<T>)
          if (it->is_number_integer() && !it->is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      }
      v = it->template get<T>();
    } catch (const std::exception&) {
      throw ConfigError(std::string(what_) + "." + key + " has the wrong type");
    }
    return *this;
  }

  template <typename T>
  Fields& nested(const char* key, T& v) {
    known_.insert(key);
    auto it = j_.find(key);
    if (it != j_.end()) update_from_json(*it, v);
    return *this;
  }

  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!known_.count(it.key())) throw ConfigError("unknown key " + std::string(what_) + "." + it.key());
  }

 private:
  const Json& j_;
  const char* what_;
  std::set<std::string> known_;
};

}  // namespace

Json to_json(const SynthConfig& c) {
  return {{"name", c.name},
          {"split", to_string(c.split)},
          {"seed", c.seed},
          {"n_images", c.n_images},
          {"height", c.height},
          {"width", c.width},
          {"cells_min", c.cells_min},
          {"cells_max", c.cells_max},
          {"radius_min", c.radius_min},
          {"radius_max", c.radius_max},
          {"length_min", c.length_min},
          {"length_max", c.length_max},
          {"curvature", c.curvature},
          {"branch_prob", c.branch_prob},
          {"domain", to_string(c.domain)},
          {"noise_sigma", c.noise_sigma},
          {"blur_sigma", c.blur_sigma}};
}

void update_from_json(const Json& j, SynthConfig& c) {
  std::string split = to_string(c.split), domain = to_string(c.domain);
  Fields(j, "synth")("name", c.name)("split", split)("seed", c.seed)("n_images", c.n_images)("height", c.height)(
      "width", c.width)("cells_min", c.cells_min)("cells_max", c.cells_max)("radius_min", c.radius_min)(
      "radius_max", c.radius_max)("length_min", c.length_min)("length_max", c.length_max)("curvature", c.curvature)(
      "branch_prob", c.branch_prob)("domain", domain)("noise_sigma", c.noise_sigma)("blur_sigma", c.blur_sigma)
      .done();
  if (split != "train" && split != "test") throw ConfigError("synth.split must be train or test");
  c.split = split == "train" ? Split::kTrain : Split::kTest;
  c.domain = domain_from_string(domain);
}

Json to_json(const ModelConfig& c) { return {{"levels", c.levels}, {"base_channels", c.base_channels}}; }

void update_from_json(const Json& j, ModelConfig& c) {
  Fields(j, "model")("levels", c.levels)("base_channels", c.base_channels).done();
}

Json to_json(const LossConfig& c) { return {{"nu", c.nu}, {"mu", c.mu}, {"ivp_weight", c.ivp_weight}}; }

void update_from_json(const Json& j, LossConfig& c) {
  Fields(j, "loss")("nu", c.nu)("mu", c.mu)("ivp_weight", c.ivp_weight).done();
}

Json to_json(const AdaptConfig& c) {
  return {{"tau", c.tau},
          {"margin", c.margin},
          {"n_negatives", c.n_negatives},
          {"gamma1", c.gamma1},
          {"gamma2", c.gamma2},
          {"sigma_rbf", c.sigma_rbf},
          {"delta", c.delta},
          {"lambda", c.lambda},
          {"pixels_per_pair", c.pixels_per_pair},
          {"pairs_per_class", c.pairs_per_class},
          {"detach_source", c.detach_source},
          {"mine_on_source_labels", c.mine_on_source_labels}};
}

void update_from_json(const Json& j, AdaptConfig& c) {
  Fields(j, "adapt")("tau", c.tau)("margin", c.margin)("n_negatives", c.n_negatives)("gamma1", c.gamma1)(
      "gamma2", c.gamma2)("sigma_rbf", c.sigma_rbf)("delta", c.delta)("lambda", c.lambda)(
      "pixels_per_pair", c.pixels_per_pair)("pairs_per_class", c.pairs_per_class)("detach_source", c.detach_source)(
      "mine_on_source_labels", c.mine_on_source_labels)
      .done();
}

Json to_json(const AdaptSchedule& c) {
  return {{"phase1_epochs", c.phase1_epochs}, {"phase2_epochs", c.phase2_epochs}, {"lr", c.lr},
          {"phase2_lr", c.phase2_lr},         {"wd", c.wd},                       {"augment", c.augment},
          {"loss_scale", c.loss_scale},       {"clip_norm", c.clip_norm}};
}

void update_from_json(const Json& j, AdaptSchedule& c) {
  Fields(j, "schedule")("phase1_epochs", c.phase1_epochs)("phase2_epochs", c.phase2_epochs)("lr", c.lr)(
      "phase2_lr", c.phase2_lr)("wd", c.wd)("augment", c.augment)("loss_scale", c.loss_scale)(
      "clip_norm", c.clip_norm)
      .done();
}

Json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},       {"epochs", c.epochs}, {"batch", c.batch},
          {"wd", c.wd},       {"patch", c.patch},   {"seed", c.seed},
          {"augment", c.augment}, {"loss_scale", c.loss_scale}, {"clip_norm", c.clip_norm}};
}

void update_from_json(const Json& j, TrainConfig& c) {
  Fields(j, "train")("lr", c.lr)("epochs", c.epochs)("batch", c.batch)("wd", c.wd)("patch", c.patch)("seed", c.seed)(
      "augment", c.augment)("loss_scale", c.loss_scale)("clip_norm", c.clip_norm)
      .done();
}

Json to_json(const HeadConfig& c) {
  return {{"t_fg", c.t_fg},
          {"n_steps", c.n_steps},
          {"step", c.step},
          {"cluster_eps", c.cluster_eps},
          {"cluster_min_pts", c.cluster_min_pts},
          {"min_instance_px", c.min_instance_px}};
}

void update_from_json(const Json& j, HeadConfig& c) {
  Fields(j, "head")("t_fg", c.t_fg)("n_steps", c.n_steps)("step", c.step)("cluster_eps", c.cluster_eps)(
      "cluster_min_pts", c.cluster_min_pts)("min_instance_px", c.min_instance_px)
      .done();
}

Json to_json(const ExperimentConfig& c) {
  return {{"seed", c.seed},
          {"source", to_json(c.source)},
          {"target_train", to_json(c.target_train)},
          {"target_test", to_json(c.target_test)},
          {"k_grid", c.k_grid},
          {"seeds", c.seeds},
          {"ablation_k", c.ablation_k},
          {"rescale_target", c.rescale_target},
          {"model", to_json(c.model)},
          {"loss", to_json(c.loss)},
          {"adapt", to_json(c.adapt)},
          {"schedule", to_json(c.schedule)},
          {"pretrain", to_json(c.pretrain)},
          {"head", to_json(c.head)},
          {"threads", c.threads}};
}

void update_from_json(const Json& j, ExperimentConfig& c) {
  Fields(j, "experiment")("seed", c.seed)
      .nested("source", c.source)
      .nested("target_train", c.target_train)
      .nested("target_test", c.target_test)("k_grid", c.k_grid)("seeds", c.seeds)("ablation_k", c.ablation_k)(
          "rescale_target", c.rescale_target)
      .nested("model", c.model)
      .nested("loss", c.loss)
      .nested("adapt", c.adapt)
      .nested("schedule", c.schedule)
      .nested("pretrain", c.pretrain)
      .nested("head", c.head)("threads", c.threads)
      .done();
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir, const Json& meta) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  Json files = Json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    char img[32], msk[32];
    std::snprintf(img, sizeof img, "img_%04zu.pgm", i);
    std::snprintf(msk, sizeof msk, "msk_%04zu.pgm", i);
    write_pgm(ds.items[i].image, dir / img);
    write_pgm(ds.items[i].mask, dir / msk);
    files.push_back({{"image", img}, {"mask", msk}});
  }
  write_json({{"name", ds.name}, {"split", to_string(ds.split)}, {"count", ds.size()}, {"files", files}, {"meta", meta}},
             dir / "manifest.json");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.name = dir.filename().string();
  std::vector<std::pair<std::string, std::string>> files;
  if (std::filesystem::exists(dir / "manifest.json")) {
    const auto m = read_json(dir / "manifest.json");
    try {
      ds.name = m.value("name", ds.name);
      ds.split = m.value("split", std::string("train")) == "test" ? Split::kTest : Split::kTrain;
      for (const auto& f : m.at("files")) files.emplace_back(f.at("image").get<std::string>(), f.at("mask").get<std::string>());
    } catch (const Json::exception& e) {
      throw FormatError((dir / "manifest.json").string() + ": " + e.what());
    }
  } else {
    if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<std::string> images;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      if (name.rfind("img_", 0) == 0 && e.path().extension() == ".pgm") images.push_back(name);
    }
    std::sort(images.begin(), images.end());
    for (const auto& img : images) files.emplace_back(img, "msk_" + img.substr(4));
  }
  for (const auto& [img, msk] : files) {
    Sample s{read_image(dir / img), read_mask(dir / msk)};
    if (s.image.height() != s.mask.height() || s.image.width() != s.mask.width())
      throw FormatError("image and mask shapes differ for " + img);
    ds.items.push_back(std::move(s));
  }
  if (ds.empty()) throw DataError("no samples found in " + dir.string());
  return ds;
}

Checkpoint make_checkpoint(const Params<float>& params, const OptimState<float>* optim, const ModelConfig& model,
                           const Json& config, std::uint64_t epoch) {
  Checkpoint ckpt;
  store_params(ckpt, params, model);
  if (optim) store_optimizer(ckpt, *optim, model);
  set_digest(ckpt, sha256(config.dump()));
  set_epoch(ckpt, epoch);
  return ckpt;
}

Json read_json(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return Json::parse(bytes.begin(), bytes.end());
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const Json& j, const std::filesystem::path& path) {
  const auto text = j.dump(2) + "\n";
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace madc

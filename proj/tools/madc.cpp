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

// madc: command-line driver for data generation, training, adaptation,
// segmentation and evaluation.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "madc/augment.hpp"
#include "madc/checkpoint.hpp"
#include "madc/config.hpp"
#include "madc/datamodel.hpp"
#include "madc/evaluator.hpp"
#include "madc/experiment.hpp"
#include "madc/labelgen.hpp"
#include "madc/protocol.hpp"
#include "madc/report.hpp"
#include "madc/segmenter.hpp"
#include "madc/synthgen.hpp"

namespace fs = std::filesystem;
using namespace madc;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 1;
};

// Sections shared by the training and inference subcommands.
struct ToolConfig {
  ModelConfig model;
  LossConfig loss;
  TrainConfig train = desk_scale_config().pretrain;  // desk-stable lr
  AdaptConfig adapt;
  AdaptSchedule schedule;
  HeadConfig head;
  int k = 1;
  bool rescale_target = true;
};

Json to_json(const ToolConfig& c) {
  return {{"model", madc::to_json(c.model)}, {"loss", madc::to_json(c.loss)},
          {"train", madc::to_json(c.train)}, {"adapt", madc::to_json(c.adapt)},
          {"schedule", madc::to_json(c.schedule)}, {"head", madc::to_json(c.head)},
          {"k", c.k}, {"rescale_target", c.rescale_target}};
}

ToolConfig load_tool_config(const Globals& g) {
  ToolConfig c;
  if (g.config.empty()) return c;
  const Json j = read_json(g.config);
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& key = it.key();
    if (key == "model") update_from_json(*it, c.model);
    else if (key == "loss") update_from_json(*it, c.loss);
    else if (key == "train") update_from_json(*it, c.train);
    else if (key == "adapt") update_from_json(*it, c.adapt);
    else if (key == "schedule") update_from_json(*it, c.schedule);
    else if (key == "head") update_from_json(*it, c.head);
    else if (key == "k" && it->is_number_integer()) c.k = it->get<int>();
    else if (key == "rescale_target" && it->is_boolean()) c.rescale_target = it->get<bool>();
    else throw ConfigError("unknown or mistyped config key " + key);
  }
  return c;
}

fs::path require_out(const Globals& g) {
  if (g.out.empty()) throw CLI::ValidationError("--out", "an output directory is required");
  fs::create_directories(g.out);
  return g.out;
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

// Images only: img_*.pgm files of a directory in name order.
std::vector<std::pair<std::string, Image>> load_images(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto n = e.path().filename().string();
    if (n.rfind("img_", 0) == 0 && e.path().extension() == ".pgm") names.push_back(n);
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw DataError("no img_*.pgm files in " + dir.string());
  std::vector<std::pair<std::string, Image>> out;
  for (const auto& n : names) out.emplace_back(n, read_image(dir / n));
  return out;
}

std::vector<std::pair<std::string, InstanceMask>> load_masks(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto n = e.path().filename().string();
    if (n.rfind("msk_", 0) == 0 && e.path().extension() == ".pgm") names.push_back(n);
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw DataError("no msk_*.pgm files in " + dir.string());
  std::vector<std::pair<std::string, InstanceMask>> out;
  for (const auto& n : names) out.emplace_back(n, read_mask(dir / n));
  return out;
}

std::array<std::uint8_t, 3> instance_color(std::uint32_t label) {
  constexpr double kGolden = 0.618033988749894848;
  const double h = std::fmod(label * kGolden, 1.0) * 6.0, s = 0.65, v = 0.95;
  const int i = static_cast<int>(h) % 6;
  const double f = h - std::floor(h), p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r, g, b;
  switch (i) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
  auto byte = [](double x) { return static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0, 1.0) * 255)); };
  return {byte(r), byte(g), byte(b)};
}

RgbImage overlay(const Image& img, const InstanceMask& mask) {
  RgbImage rgb{img.height(), img.width(), {}};
  rgb.data.resize(static_cast<std::size_t>(img.height() * img.width() * 3));
  for (Eigen::Index i = 0; i < img.pixels.size(); ++i) {
    const double gray = img.pixels.data()[i];
    const auto label = mask.labels.data()[i];
    for (int c = 0; c < 3; ++c) {
      double v = gray;
      if (label) v = 0.4 * gray + 0.6 * instance_color(label)[c] / 255.0;
      rgb.data[static_cast<std::size_t>(i) * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255));
    }
  }
  return rgb;
}

void print_progress(const std::string& what, const EpochLog& e) {
  std::cerr << what << " phase " << e.phase << " epoch " << e.epoch << " loss " << e.loss;
  if (e.skipped) std::cerr << " skipped " << e.skipped;
  std::cerr << '\n';
}

// ---------------------------------------------------------------------------

int cmd_synth(const Globals& g, const std::string& domain, int n_images, const std::string& split) {
  SynthConfig cfg = default_synth_config(domain.empty() ? Domain::kPhase : domain_from_string(domain));
  if (!g.config.empty()) update_from_json(read_json(g.config), cfg);
  if (!domain.empty() && !g.config.empty()) cfg.domain = domain_from_string(domain);
  if (n_images > 0) cfg.n_images = n_images;
  if (!split.empty()) cfg.split = split == "test" ? Split::kTest : Split::kTrain;
  if (g.seed) cfg.seed = *g.seed;
  validate(cfg);
  const auto out = require_out(g);
  const Dataset ds = gen_dataset(cfg);
  save_dataset(ds, out, {{"synth", to_json(cfg)}});
  std::cout << "wrote " << ds.size() << " samples to " << out.string() << '\n';
  return 0;
}

int cmd_targets(const Globals& g, const std::string& data) {
  const auto out = require_out(g);
  const auto masks = load_masks(data);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const auto t = make_targets(masks[i].second);
    const std::vector<std::uint64_t> dims{std::uint64_t(t.height()), std::uint64_t(t.width())};
    Checkpoint c;
    auto put = [&](const char* name, const Grid<float>& v) {
      c.tensors[name] = Tensor{dims, std::vector<float>(v.data(), v.data() + v.size())};
    };
    put("d", t.d);
    put("gx", t.gx);
    put("gy", t.gy);
    put("b", t.b);
    auto name = masks[i].first;
    name.replace(0, 4, "tgt_");
    save_checkpoint(c, out / fs::path(name).replace_extension(".madc"));
  }
  std::cout << "wrote " << masks.size() << " target fields to " << out.string() << '\n';
  return 0;
}

int cmd_pretrain(const Globals& g, const std::string& data, const std::string& init) {
  ToolConfig tc = load_tool_config(g);
  if (g.seed) tc.train.seed = *g.seed;
  const auto out = require_out(g);
  const Dataset ds = load_dataset(data);
  Params<float> params;
  if (!init.empty()) {
    const auto ck = load_checkpoint(init);
    tc.model = model_config_from_checkpoint(ck);
    params = params_from_checkpoint(ck, tc.model);
  } else {
    params = init_params<float>(tc.model, tc.train.seed);
  }
  const Network<float> net(tc.model);
  const auto r = pretrain(net, std::move(params), ds, tc.train, tc.loss,
                          [](const EpochLog& e) { print_progress("pretrain", e); });
  save_checkpoint(make_checkpoint(r.params, &r.optim, tc.model, to_json(tc), std::uint64_t(tc.train.epochs)),
                  out / "model.madc");
  write_text(out / "loss_log.csv", loss_log_csv(r.log));
  write_json(to_json(tc), out / "config.json");
  std::cout << "wrote " << (out / "model.madc").string() << '\n';
  return 0;
}

int cmd_adapt(const Globals& g, const std::string& ckpt, const std::string& source_dir, const std::string& target_dir,
              int k) {
  ToolConfig tc = load_tool_config(g);
  if (k > 0) tc.k = k;
  const std::uint64_t seed = g.seed.value_or(0);
  const auto out = require_out(g);
  const auto ck = load_checkpoint(ckpt);
  tc.model = model_config_from_checkpoint(ck);
  const Network<float> net(tc.model);
  const Dataset source = load_dataset(source_dir);
  Dataset target = load_dataset(target_dir);
  const double ds = mean_diameter(source), dt = mean_diameter(target);
  if (tc.rescale_target) target = rescale_dataset(target, ds / dt);
  const ShotSet shots = extract_shots(target, tc.k, seed, ds);
  save_dataset({"shots", Split::kTrain, shots.patches}, out / "shots");
  const auto r = adapt(net, params_from_checkpoint(ck, tc.model), source, shots, tc.loss, tc.adapt, tc.schedule, seed,
                       [](const EpochLog& e) { print_progress("adapt", e); });
  save_checkpoint(make_checkpoint(r.params, &r.optim, tc.model, to_json(tc),
                                  std::uint64_t(tc.schedule.phase1_epochs + tc.schedule.phase2_epochs)),
                  out / "adapted.madc");
  write_text(out / "loss_log.csv", loss_log_csv(r.log));
  write_json(to_json(tc), out / "config.json");
  std::cout << "diameters: source " << ds << " target " << dt << "; wrote " << (out / "adapted.madc").string() << '\n';
  return 0;
}

int cmd_segment(const Globals& g, const std::string& ckpt, const std::string& images) {
  const ToolConfig tc = load_tool_config(g);
  validate(tc.head);
  const auto out = require_out(g);
  const auto ck = load_checkpoint(ckpt);
  const ModelConfig mc = model_config_from_checkpoint(ck);
  const Network<float> net(mc);
  const auto params = params_from_checkpoint(ck, mc);
  const auto imgs = load_images(images);
  for (const auto& [name, img] : imgs) {
    const auto mask = segment(net.forward(params, img.pixels), tc.head);
    const std::string id = name.substr(4, name.size() - 8);
    write_pgm(mask, out / ("msk_" + id + ".pgm"));
    write_ppm(overlay(img, mask), out / ("overlay_" + id + ".ppm"));
  }
  std::cout << "segmented " << imgs.size() << " images into " << g.out << '\n';
  return 0;
}

int cmd_eval(const Globals& g, const std::string& gt_dir, const std::string& pred_dir) {
  const auto gt = load_masks(gt_dir);
  std::vector<InstanceMask> gts, preds;
  for (const auto& [name, m] : gt) {
    if (!fs::exists(fs::path(pred_dir) / name)) throw DataError("prediction missing for " + name);
    gts.push_back(m);
    preds.push_back(read_mask(fs::path(pred_dir) / name));
  }
  const auto rep = score_masks(gts, preds);
  const auto csv = report_csv(rep);
  if (!g.out.empty()) write_text(require_out(g) / "report.csv", csv);
  else std::cout << csv;
  std::cout << "mean_ap " << rep.mean_ap << " pooled_ap " << rep.pooled_ap << '\n';
  return 0;
}

int cmd_experiment(const Globals& g, const std::string& scale) {
  ExperimentConfig cfg = scale == "mini" ? mini_scale_config() : desk_scale_config();
  if (!g.config.empty()) update_from_json(read_json(g.config), cfg);
  if (g.seed) cfg.seed = *g.seed;
  cfg.threads = g.threads;
  const auto out = require_out(g);
  const auto res = run_baselines(cfg, out, [](const std::string& s) { std::cerr << s << '\n'; });
  std::cout << "wrote " << res.rows.size() << " result rows to " << (out / "results.csv").string() << '\n';
  return 0;
}

int cmd_report(const Globals& g, const std::string& results) {
  const auto bytes = read_file(results);
  const auto rows = parse_results_csv(std::string(bytes.begin(), bytes.end()));
  const auto checks = trend_checks(rows);
  const auto md = summary_markdown(rows, checks);
  if (!g.out.empty()) {
    const auto out = require_out(g);
    write_text(out / "summary.md", md);
    write_text(out / "ap_vs_k.svg", ap_chart_svg(rows));
  }
  for (const auto& c : checks) std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot contrastive adaptation for cell instance segmentation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "JSON configuration file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--threads", g.threads, "worker threads for per-image stages")->check(CLI::Range(1, 1024));

  std::string domain, split, data, init, ckpt, source, target, images, gt, pred, scale = "desk", results;
  int n_images = 0, k = 0;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--domain", domain, "phase, fluor or worm")->check(CLI::IsMember({"phase", "fluor", "worm"}));
  synth->add_option("--n", n_images, "number of images")->check(CLI::PositiveNumber);
  synth->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));

  auto* targets = app.add_subcommand("targets", "write distance/flow/border targets as MADC tensors");
  targets->add_option("--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);

  auto* pre = app.add_subcommand("pretrain", "train on a labelled dataset");
  pre->add_option("--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  pre->add_option("--init", init, "starting checkpoint")->check(CLI::ExistingFile);

  auto* ad = app.add_subcommand("adapt", "few-shot adaptation of a pretrained checkpoint");
  ad->add_option("--checkpoint", ckpt, "pretrained checkpoint")->required()->check(CLI::ExistingFile);
  ad->add_option("--source", source, "source dataset directory")->required()->check(CLI::ExistingDirectory);
  ad->add_option("--target", target, "labelled target dataset directory")->required()->check(CLI::ExistingDirectory);
  ad->add_option("--k", k, "number of shots")->check(CLI::PositiveNumber);

  auto* seg = app.add_subcommand("segment", "predict instance masks and overlays");
  seg->add_option("--checkpoint", ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
  seg->add_option("--images", images, "directory of img_*.pgm")->required()->check(CLI::ExistingDirectory);

  auto* ev = app.add_subcommand("eval", "score predicted masks against ground truth");
  ev->add_option("--gt", gt, "directory of ground-truth msk_*.pgm")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--pred", pred, "directory of predicted msk_*.pgm")->required()->check(CLI::ExistingDirectory);

  auto* ex = app.add_subcommand("experiment", "run LB/FT/ADAPT/UB and ablations");
  ex->add_option("--scale", scale, "desk or mini")->check(CLI::IsMember({"desk", "mini"}));

  auto* rep = app.add_subcommand("report", "evaluate trend checks on results.csv");
  rep->add_option("--results", results, "results.csv")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
    if (seed_opt->count()) g.seed = seed;
    if (*synth) return cmd_synth(g, domain, n_images, split);
    if (*targets) return cmd_targets(g, data);
    if (*pre) return cmd_pretrain(g, data, init);
    if (*ad) return cmd_adapt(g, ckpt, source, target, k);
    if (*seg) return cmd_segment(g, ckpt, images);
    if (*ev) return cmd_eval(g, gt, pred);
    if (*ex) return cmd_experiment(g, scale);
    if (*rep) return cmd_report(g, results);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

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

#include "madc/experiment.hpp"

#include <chrono>
#include <iomanip>
#include <map>
#include <sstream>

#include "madc/config.hpp"
#include "madc/datamodel.hpp"
#include "madc/evaluator.hpp"
#include "madc/report.hpp"

namespace madc {
namespace {

SynthConfig dataset_config(Domain domain, const char* name, Split split, int n, std::uint64_t seed) {
  SynthConfig c = default_synth_config(domain, 64);
  c.name = name;
  c.split = split;
  c.n_images = n;
  c.seed = seed;
  return c;
}

SynthConfig seeded(SynthConfig c, std::uint64_t experiment_seed) {
  c.seed ^= Rng::mix(experiment_seed);
  return c;
}

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ExperimentConfig desk_scale_config() {
  ExperimentConfig c;
  c.source = dataset_config(Domain::kPhase, "source", Split::kTrain, 200, 1);
  c.target_train = dataset_config(Domain::kFluor, "target_train", Split::kTrain, 200, 2);
  c.target_test = dataset_config(Domain::kFluor, "target_test", Split::kTest, 50, 3);
  // Without normalization layers the net diverges within 30 epochs at 0.03.
  c.pretrain.lr = 0.01;
  return c;
}

ExperimentConfig mini_scale_config() {
  ExperimentConfig c = desk_scale_config();
  c.source.n_images = 12;
  c.target_train.n_images = 12;
  c.target_test.n_images = 6;
  c.k_grid = {1, 3};
  c.seeds = {0, 1};
  c.ablation_k = {1};
  c.model.base_channels = 8;
  c.pretrain.epochs = 2;
  c.schedule.phase1_epochs = 1;
  c.schedule.phase2_epochs = 1;
  c.adapt.pixels_per_pair = 64;
  c.adapt.pairs_per_class = 128;
  return c;
}

void validate(const ExperimentConfig& cfg) {
  validate(cfg.source);
  validate(cfg.target_train);
  validate(cfg.target_test);
  validate(cfg.model);
  validate(cfg.loss);
  validate(cfg.adapt);
  validate(cfg.schedule);
  validate(cfg.pretrain);
  validate(cfg.head);
  if (cfg.k_grid.empty() || cfg.seeds.empty()) throw ConfigError("k_grid and seeds must be nonempty");
  for (int k : cfg.k_grid)
    if (k < 1) throw ConfigError("every K must be >= 1");
  for (int k : cfg.ablation_k)
    if (k < 1) throw ConfigError("every ablation K must be >= 1");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
}

std::uint64_t run_seed(std::uint64_t experiment_seed, std::uint64_t seed) {
  return Rng::mix(Rng::mix(experiment_seed) ^ (seed + 0x51ed270b27bd8e1dull));
}

ExperimentResult run_baselines(const ExperimentConfig& cfg, const std::filesystem::path& out, const LogFn& log) {
  validate(cfg);
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  const auto ckpt_dir = out / "checkpoints", log_dir = out / "logs";
  std::filesystem::create_directories(ckpt_dir);
  std::filesystem::create_directories(log_dir);

  Json config_json = to_json(cfg);
  config_json.erase("threads");
  write_json(config_json, out / "config.json");

  const Network<float> net(cfg.model);
  ExperimentResult res;

  const Dataset source = gen_dataset(seeded(cfg.source, cfg.seed));
  Dataset target_train = gen_dataset(seeded(cfg.target_train, cfg.seed));
  Dataset target_test = gen_dataset(seeded(cfg.target_test, cfg.seed));
  res.source_diameter = mean_diameter(source);
  res.target_diameter = mean_diameter(target_train);
  res.ratio = res.source_diameter / res.target_diameter;
  if (cfg.rescale_target) {
    target_train = rescale_dataset(target_train, res.ratio);
    target_test = rescale_dataset(target_test, res.ratio);
  }
  {
    std::ostringstream os;
    os << std::setprecision(4) << "diameters: source " << res.source_diameter << " px, target "
       << res.target_diameter << " px, ratio " << res.ratio;
    say(os.str());
  }

  auto evaluate = [&](const Params<float>& p) { return evaluate_dataset(net, p, target_test, cfg.head, cfg.threads); };
  auto save = [&](const std::string& stem, const TrainResult& tr, std::uint64_t epochs) {
    save_checkpoint(make_checkpoint(tr.params, &tr.optim, cfg.model, config_json, epochs), ckpt_dir / (stem + ".madc"));
    write_text(log_dir / (stem + ".csv"), loss_log_csv(tr.log));
  };
  auto progress = [&](const std::string& what) {
    return [&, what](const EpochLog& e) {
      std::ostringstream os;
      os << what << " phase " << e.phase << " epoch " << e.epoch << " loss " << std::setprecision(6) << e.loss;
      if (e.skipped) os << " skipped " << e.skipped;
      say(os.str());
    };
  };

  // Source and target-trained models are pretrained once per experiment.
  TrainConfig pcfg = cfg.pretrain;
  pcfg.seed = Rng::mix(cfg.seed ^ cfg.pretrain.seed);
  auto t0 = std::chrono::steady_clock::now();
  const TrainResult src_model =
      pretrain(net, init_params<float>(cfg.model, pcfg.seed), source, pcfg, cfg.loss, progress("pretrain source"));
  const double src_seconds = seconds_since(t0);
  save("source", src_model, static_cast<std::uint64_t>(pcfg.epochs));
  const EvalReport lb = evaluate(src_model.params);
  say("LB mean AP " + std::to_string(lb.mean_ap));

  TrainConfig ucfg = pcfg;
  ucfg.seed = Rng::mix(pcfg.seed ^ 0x7562ull);
  t0 = std::chrono::steady_clock::now();
  const TrainResult ub_model = pretrain(net, init_params<float>(cfg.model, ucfg.seed), target_train, ucfg, cfg.loss,
                                        progress("pretrain target"));
  const double ub_seconds = seconds_since(t0);
  save("ub", ub_model, static_cast<std::uint64_t>(ucfg.epochs));
  const EvalReport ub = evaluate(ub_model.params);
  say("UB mean AP " + std::to_string(ub.mean_ap));

  auto run = [&](const char* variant, int k, std::uint64_t seed, const ShotSet& shots, AdaptConfig acfg) {
    const auto t = std::chrono::steady_clock::now();
    const std::string stem = lower(variant) + "_k" + std::to_string(k) + "_s" + std::to_string(seed);
    TrainResult tr = adapt(net, src_model.params, source, shots, cfg.loss, acfg, cfg.schedule,
                           run_seed(cfg.seed, seed), progress(stem));
    const double secs = seconds_since(t);
    save(stem, tr, static_cast<std::uint64_t>(cfg.schedule.phase1_epochs + cfg.schedule.phase2_epochs));
    const EvalReport r = evaluate(tr.params);
    say(stem + " mean AP " + std::to_string(r.mean_ap) + " (" + std::to_string(secs) + " s)");
    res.rows.push_back({variant, k, seed, r.mean_ap, r.pooled_ap});
    res.timings.push_back({variant, k, seed, secs});
    return tr.params;
  };

  AdaptConfig ft_cfg = cfg.adapt;
  ft_cfg.gamma1 = ft_cfg.gamma2 = 0.0;
  std::map<std::pair<int, std::uint64_t>, Params<float>> ft_params;
  for (int k : cfg.k_grid)
    for (auto seed : cfg.seeds) {
      const ShotSet shots = extract_shots(target_train, k, run_seed(cfg.seed, seed), res.source_diameter);
      res.rows.push_back({kVariantLb, k, seed, lb.mean_ap, lb.pooled_ap});
      res.timings.push_back({kVariantLb, k, seed, src_seconds});
      ft_params[{k, seed}] = run(kVariantFt, k, seed, shots, ft_cfg);
      run(kVariantAdapt, k, seed, shots, cfg.adapt);
      res.rows.push_back({kVariantUb, k, seed, ub.mean_ap, ub.pooled_ap});
      res.timings.push_back({kVariantUb, k, seed, ub_seconds});
    }
  for (int k : cfg.ablation_k)
    for (auto seed : cfg.seeds) {
      const ShotSet shots = extract_shots(target_train, k, run_seed(cfg.seed, seed), res.source_diameter);
      AdaptConfig no_cb = cfg.adapt, no_cd = cfg.adapt;
      no_cb.gamma1 = 0.0;
      no_cd.gamma2 = 0.0;
      run(kVariantNoCb, k, seed, shots, no_cb);
      run(kVariantNoCd, k, seed, shots, no_cd);
      const auto p = run(kVariantNoBoth, k, seed, shots, ft_cfg);
      auto it = ft_params.find({k, seed});
      if (it != ft_params.end() && it->second != p) res.no_both_matches_ft = false;
    }

  write_text(out / "results.csv", results_csv(res.rows));
  write_text(out / "timings.csv", timings_csv(res.timings));
  const auto checks = trend_checks(res.rows);
  std::ostringstream note;
  note << std::setprecision(4) << "Mean diameter: source " << res.source_diameter << " px, target "
       << res.target_diameter << " px (rescale ratio " << res.ratio << (cfg.rescale_target ? ", applied" : ", not applied")
       << ").";
  const std::vector<std::string> notes{
      note.str(), std::string("No-both ablation parameters identical to FT: ") + (res.no_both_matches_ft ? "yes" : "no") + "."};
  write_text(out / "summary.md", summary_markdown(res.rows, checks, notes));
  write_text(out / "ap_vs_k.svg", ap_chart_svg(res.rows));
  return res;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(17) << "variant,K,seed,mean_ap,pooled_ap\n";
  for (const auto& r : rows) os << r.variant << ',' << r.k << ',' << r.seed << ',' << r.mean_ap << ',' << r.pooled_ap << '\n';
  return os.str();
}

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("variant,K,seed,mean_ap,pooled_ap", 0) != 0)
    throw FormatError("results.csv header must start with variant,K,seed,mean_ap,pooled_ap");
  std::vector<ResultRow> rows;
  int n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[5];
    for (auto& x : f)
      if (!std::getline(ls, x, ',')) throw FormatError("results.csv line " + std::to_string(n) + " has too few fields");
    try {
      rows.push_back({f[0], std::stoi(f[1]), std::stoull(f[2]), std::stod(f[3]), std::stod(f[4])});
    } catch (const std::exception&) {
      throw FormatError("results.csv line " + std::to_string(n) + " is malformed");
    }
  }
  return rows;
}

std::string timings_csv(const std::vector<TimingRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(6) << "variant,K,seed,wall_seconds\n";
  for (const auto& r : rows) os << r.variant << ',' << r.k << ',' << r.seed << ',' << r.wall_seconds << '\n';
  return os.str();
}

}  // namespace madc

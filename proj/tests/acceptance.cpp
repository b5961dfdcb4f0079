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

// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Usage: madc_acceptance [--out DIR] N [N ...]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "madc/augment.hpp"
#include "madc/checkpoint.hpp"
#include "madc/config.hpp"
#include "madc/datamodel.hpp"
#include "madc/evaluator.hpp"
#include "madc/experiment.hpp"
#include "madc/labelgen.hpp"
#include "madc/losses.hpp"
#include "madc/net.hpp"
#include "madc/protocol.hpp"
#include "madc/report.hpp"
#include "madc/segmenter.hpp"
#include "madc/synthgen.hpp"
#include "oracles.hpp"

using namespace madc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (!pass) detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

fs::path g_out = fs::temp_directory_path() / "madc_acceptance";

// ---------------------------------------------------------------------------
// 1: gradients through the tiny model

Params<double> jittered_params(const ModelConfig& mc, Rng& rng) {
  auto p = init_params<double>(mc, rng.next());
  for (auto& [k, v] : p)
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] += 0.05 * rng.normal();
  return p;
}

Grid<double> random_image(Rng& rng, int h, int w) {
  Grid<double> g(h, w);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.uniform();
  return g;
}

// A labelled image with at least one interior pixel.
TargetField<double> random_labels(Rng& rng, int h, int w) {
  for (;;) {
    const auto t = make_targets(oracle::random_mask(rng, h, w, 3)).cast<double>();
    if (!interior_pixels(t).empty()) return t;
  }
}

Params<double> add(Params<double> a, const Params<double>& b) {
  for (auto& [k, v] : a) v += b.at(k);
  return a;
}

void criterion_gradients(Outcome& o) {
  constexpr int kTrials = 20, kCoords = 24, kSize = 12;
  ModelConfig mc;
  mc.levels = 1;
  mc.base_channels = 2;
  const Network<double> net(mc);
  const LossConfig lcfg;
  AdaptConfig acfg;
  acfg.pixels_per_pair = 16;
  acfg.pairs_per_class = 16;
  acfg.gamma1 = 0.7;
  acfg.gamma2 = 0.9;
  Rng rng(2026);
  std::map<std::string, double> worst;

  for (int trial = 0; trial < kTrials; ++trial) {
    const auto p = jittered_params(mc, rng);
    const auto it = random_image(rng, kSize, kSize), is = random_image(rng, kSize, kSize);
    const auto tt = random_labels(rng, kSize, kSize), ts = random_labels(rng, kSize, kSize);
    auto check = [&](const std::string& name, const Params<double>& g, const std::function<double(const Params<double>&)>& f) {
      const double e = oracle::param_gradient_error(p, g, f, rng, kCoords);
      worst[name] = std::max(worst[name], e);
    };

    Tape<double> tape_t, tape_s;
    const auto zt = net.forward(p, it, &tape_t);
    const auto zs = net.forward(p, is, &tape_s);

    check("L_IS", net.backward(p, tape_t, loss_is(zt, tt, lcfg).grad),
          [&](const Params<double>& q) { return loss_is(net.forward(q, it), tt, lcfg).value; });
    check("L_IVP", net.backward(p, tape_t, loss_ivp(zt, tt).grad),
          [&](const Params<double>& q) { return loss_ivp(net.forward(q, it), tt).value; });

    Rng plan_rng(rng.next());
    const auto cd = plan_cd(tt, zs, ts, acfg, plan_rng);
    const auto cb = plan_cb(tt.b, ts.b, acfg, plan_rng);
    const auto lcd = loss_cd(zt, zs, cd, acfg.tau, acfg.sigma_rbf);
    check("L_CD", add(net.backward(p, tape_t, lcd.grad_target), net.backward(p, tape_s, lcd.grad_source)),
          [&](const Params<double>& q) {
            return loss_cd(net.forward(q, it), net.forward(q, is), cd, acfg.tau, acfg.sigma_rbf).value;
          });
    const auto lcb = loss_cb(zt, zs, cb, acfg.margin, acfg.lambda);
    check("L_CB", add(net.backward(p, tape_t, lcb.grad_target), net.backward(p, tape_s, lcb.grad_source)),
          [&](const Params<double>& q) {
            return loss_cb(net.forward(q, it), net.forward(q, is), cb, acfg.margin, acfg.lambda).value;
          });

    AdaptPlan frozen;
    const auto la = loss_adapt(net, p, it, tt, is, ts, lcfg, acfg, plan_rng, nullptr, &frozen);
    check("L_ISA", la.grads, [&](const Params<double>& q) {
      Rng unused(0);
      return loss_adapt(net, q, it, tt, is, ts, lcfg, acfg, unused, &frozen).total;
    });
  }
  for (const auto& [name, e] : worst) {
    o.detail << name << " " << e << " ";
    if (e > 1e-4) o.require(false, name + " relative error above 1e-4");
  }
}

// ---------------------------------------------------------------------------
// 2: distance, flow and ascent against brute force

void criterion_geometry(Outcome& o) {
  Rng rng(31);
  long exact = 0, flows = 0, unit = 0, ascent_total = 0, ascent_ok = 0;
  for (int t = 0; t < 50; ++t) {
    const auto m = oracle::random_mask(rng, 32, 32, 6);
    const auto tf = make_targets(m);
    exact += (tf.d == oracle::brute_distance(m)).all();
    for (Eigen::Index r = 0; r < 32; ++r)
      for (Eigen::Index c = 0; c < 32; ++c) {
        const double n = std::hypot(double(tf.gx(r, c)), double(tf.gy(r, c)));
        if (n == 0) continue;
        ++flows;
        unit += std::abs(n - 1) <= 1e-6;
        ++ascent_total;
        ascent_ok += oracle::bilinear(tf.d, c + tf.gx(r, c), r + tf.gy(r, c)) >= tf.d(r, c) - 1e-6;
      }
  }
  const double ascent = ascent_total ? double(ascent_ok) / ascent_total : 0.0;
  o.detail << "exact " << exact << "/50, unit " << unit << "/" << flows << ", ascent " << ascent;
  o.require(exact == 50, "distance field differs from brute force");
  o.require(unit == flows, "non-unit flow vector");
  o.require(ascent >= 0.99, "ascent below 99%");
}

// ---------------------------------------------------------------------------
// 3: segmenting ground-truth features

void criterion_round_trip(Outcome& o) {
  auto cfg = default_synth_config(Domain::kPhase);
  cfg.n_images = 20;
  cfg.seed = 303;
  std::vector<InstanceMask> gt, pred;
  std::size_t curved = 0, branched = 0, cells = 0;
  for (int i = 0; i < cfg.n_images; ++i) {
    const auto im = gen_image(cfg, static_cast<std::size_t>(i));
    for (const auto& c : im.cells) {
      ++cells;
      branched += !c.branch.empty();
      // turning polyline: end-to-end chord shorter than the path
      double path = 0;
      for (std::size_t j = 1; j < c.skeleton.size(); ++j)
        path += std::hypot(c.skeleton[j].first - c.skeleton[j - 1].first,
                           c.skeleton[j].second - c.skeleton[j - 1].second);
      const double chord = std::hypot(c.skeleton.back().first - c.skeleton.front().first,
                                      c.skeleton.back().second - c.skeleton.front().second);
      curved += path > chord + 0.5;
    }
    gt.push_back(im.sample.mask);
    pred.push_back(segment(features_from_targets(make_targets(im.sample.mask)), HeadConfig{}));
  }
  const double ap = score_masks(gt, pred).mean_ap;
  o.detail << "mean AP " << ap << " over 20 images (" << cells << " cells, " << curved << " curved, " << branched
           << " branched)";
  o.require(ap >= 0.95, "mean AP below 0.95");
  o.require(curved > 0 && branched > 0 && curved < cells, "shape mix lacks straight, curved or branched cells");
}

// ---------------------------------------------------------------------------
// 4: identity examples of the objective

FeatureMap<double> pixel(double phi, double u1, double u2, double z) {
  FeatureMap<double> f(1, 1);
  f.phi(0, 0) = phi, f.u1(0, 0) = u1, f.u2(0, 0) = u2, f.z(0, 0) = z;
  return f;
}

void criterion_identities(Outcome& o) {
  TargetField<double> t{Grid<double>::Constant(1, 1, 3), Grid<double>::Constant(1, 1, 0),
                        Grid<double>::Constant(1, 1, 1), Grid<double>::Constant(1, 1, 1)};
  LossConfig no_ivp;
  no_ivp.ivp_weight = 0;
  const double perfect = loss_is(pixel(3, 0, 1, 20), t, no_ivp).value;
  o.require(perfect > 2.0e-9 && perfect < 2.2e-9, "perfect one-pixel prediction");

  LabelGrid lab = LabelGrid::Zero(6, 6);
  lab.block(1, 1, 4, 4) = 1;
  const auto tt = make_targets(relabel(lab)).cast<double>();
  FeatureMap<double> z(6, 6);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) z.phi(r, c) = 0.3 * c + 0.4 * r;
  z.u1.setConstant(0.6);
  z.u2.setConstant(0.8);
  o.require(std::abs(loss_ivp(z, tt).value) <= 1e-12, "IVP of exact normalized gradient");
  TargetField<double> empty = tt;
  empty.d.setZero();
  o.require(loss_ivp(z, empty).value == 0.0, "IVP with empty foreground");

  o.require(std::abs(similarity(1.3, 0.2, -0.7, 1.3, 0.2, -0.7, 2.0) - 1.0) <= 1e-12, "similarity identity");
  o.require(similarity(0.0, 1.0, 0.0, 5.0, 0.0, 3.0, 2.0) == 0.0, "orthogonal similarity");
  o.require(argmax_similarity<double>({0.4}, {7}) == 7, "single candidate");
  o.require(argmax_similarity<double>({0.2, 0.9, 0.9}, {5, 9, 17}) == 9, "tie break");
  o.require(select_hard_negatives<double>({0.6, 0.7}, {0, 1}, 0.5, 5).empty(), "no hard negatives");
  o.require(select_hard_negatives<double>({0.1, 0.3}, {0, 1}, 0.5, 20).size() == 2, "n above candidate count");

  FeatureMap<double> zs(1, 3);
  zs.phi << 1, 1, 1;
  zs.u1 << 1, 0, 0.5;
  zs.u2 << 0, 1, 0.5;
  const auto zt = pixel(1, 1, 0, 0);
  o.require(loss_cd(zt, zs, CdPlan{{0}, {0}, {{}}}, 0.1, 2.0).value == 0.0, "empty negative set");
  o.require(loss_cd(zt, zs, CdPlan{{0}, {0}, {{2}}}, 0.1, 2.0).value >
                loss_cd(zt, zs, CdPlan{{0}, {0}, {{1}}}, 0.1, 2.0).value,
            "monotone in negative similarity");

  FeatureMap<double> bt(1, 2), bs(1, 2);
  bt.z << 1, 1;
  bs.z << 1, 20;
  o.require(loss_cb(bt, bs, CbPlan{{{0, 0}}, {{1, 1}}}, 10, 1).value == 0.0, "matched and beyond-margin pairs");

  // gamma1 = gamma2 = 0 is plain L_IS on the shot
  ModelConfig mc;
  mc.levels = 1;
  mc.base_channels = 2;
  const Network<double> net(mc);
  Rng rng(4);
  const auto p = jittered_params(mc, rng);
  const auto img = random_image(rng, 6, 6);
  AdaptConfig off;
  off.gamma1 = off.gamma2 = 0;
  const auto la = loss_adapt(net, p, img, tt, img, tt, LossConfig{}, off, rng);
  o.require(la.total == loss_is(net.forward(p, img), tt, LossConfig{}).value, "no contrastive terms reduce to L_IS");

  o.detail << (o.pass ? "all identity examples hold" : "");
}

// ---------------------------------------------------------------------------
// 5 and 6: desk-scale experiment trends

struct DeskRun {
  bool done = false;
  ExperimentResult result;
  std::vector<TrendCheck> checks;
  double seconds = 0;
};

DeskRun& desk_run() {
  static DeskRun run;
  if (!run.done) {
    const auto dir = g_out / "desk";
    fs::remove_all(dir);
    const auto t0 = Clock::now();
    run.result = run_baselines(desk_scale_config(), dir, [](const std::string& line) { std::cerr << line << '\n'; });
    run.seconds = seconds_since(t0);
    run.checks = trend_checks(run.result.rows);
    run.done = true;
  }
  return run;
}

void report_checks(Outcome& o, const std::vector<TrendCheck>& checks, std::size_t from, std::size_t to) {
  for (std::size_t i = from; i < to && i < checks.size(); ++i) {
    o.detail << "[" << (checks[i].pass ? "ok" : "fail") << "] " << checks[i].name << " (" << checks[i].detail << ") ";
    if (!checks[i].pass) o.pass = false;
  }
}

void criterion_table1(Outcome& o) {
  auto& run = desk_run();
  report_checks(o, run.checks, 0, 4);
  o.detail << "wall " << run.seconds << " s";
  o.require(run.seconds <= 45 * 60, "desk run over 45 minutes");
}

void criterion_table2(Outcome& o) {
  auto& run = desk_run();
  report_checks(o, run.checks, 4, 8);
  o.require(run.result.no_both_matches_ft, "no-both parameters differ from FT");
}

// ---------------------------------------------------------------------------
// 7: wall clock of one desk-scale adaptation

void criterion_adapt_time(Outcome& o) {
  const auto cfg = desk_scale_config();
  const auto source = gen_dataset(cfg.source);
  const auto target = gen_dataset(cfg.target_train);
  const Network<float> net(cfg.model);
  const auto pretrained = init_params<float>(cfg.model, 1);
  const int k = *std::max_element(cfg.k_grid.begin(), cfg.k_grid.end());
  const auto shots = extract_shots(target, k, 1, mean_diameter(source));
  const auto t0 = Clock::now();
  const auto r = adapt(net, pretrained, source, shots, cfg.loss, cfg.adapt, cfg.schedule, 1);
  const double s = seconds_since(t0);
  o.detail << "K=" << k << ", " << source.size() << " source images, " << r.log.size() << " epochs in " << s << " s";
  o.require(s <= 180, "adaptation over 3 minutes");
}

// ---------------------------------------------------------------------------
// 8: determinism and formats

bool same_files(const fs::path& a, const fs::path& b, std::string& why) {
  std::set<fs::path> names;
  for (const auto* root : {&a, &b})
    for (const auto& e : fs::recursive_directory_iterator(*root))
      if (e.is_regular_file()) names.insert(fs::relative(e.path(), *root));
  for (const auto& n : names) {
    if (n == "timings.csv" || n.filename() == "summary.md") continue;  // wall-clock content
    if (!fs::exists(a / n) || !fs::exists(b / n) || read_file(a / n) != read_file(b / n)) {
      why = n.string();
      return false;
    }
  }
  return true;
}

void criterion_determinism(Outcome& o) {
  const auto cfg = mini_scale_config();
  const auto a = g_out / "mini_a", b = g_out / "mini_b";
  fs::remove_all(a);
  fs::remove_all(b);
  run_baselines(cfg, a);
  run_baselines(cfg, b);
  std::string why;
  o.require(same_files(a, b, why), "repeated experiment differs in " + why);
  o.require(fs::exists(a / "results.csv") && fs::exists(a / "checkpoints" / "source.madc"), "missing outputs");

  // formats
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto m = oracle::random_mask(rng, 17, 23, 5);
    const auto back = std::get<InstanceMask>(parse_pgm(encode_pgm(m)));
    o.require((back.labels == m.labels).all(), "mask PGM round trip");
    Image img(Grid<float>(9, 7));
    for (Eigen::Index i = 0; i < img.pixels.size(); ++i) img.pixels.data()[i] = std::round(255 * rng.uniform()) / 255;
    const auto ib = std::get<Image>(parse_pgm(encode_pgm(img)));
    o.require((ib.pixels == img.pixels).all(), "image PGM round trip");
  }
  const auto ck = load_checkpoint(a / "checkpoints" / "source.madc");
  o.require(decode_checkpoint(encode_checkpoint(ck)) == ck, "checkpoint round trip");
  const auto raw = read_file(a / "results.csv");
  const std::string text(raw.begin(), raw.end());
  o.require(results_csv(parse_results_csv(text)) == text, "results CSV round trip");
  ExperimentConfig back;
  update_from_json(read_json(a / "config.json"), back);
  Json again = to_json(back);
  again.erase("threads");  // not part of the recorded configuration
  o.require(again == read_json(a / "config.json"), "config JSON round trip");
  o.detail << (o.pass ? "results.csv, checkpoints and logs identical across runs; formats round-trip" : "");
}

// ---------------------------------------------------------------------------
// 9: greedy matching vs. brute force

void criterion_matching(Outcome& o) {
  Rng rng(909);
  int agree = 0;
  constexpr int kCases = 250;
  for (int t = 0; t < kCases; ++t) {
    const auto g = oracle::random_mask(rng, 16, 16, 6);
    const auto p = oracle::random_mask(rng, 16, 16, 6);
    agree += match_and_score(g, p).tp == oracle::brute_max_matching(iou_matrix(g, p), 0.5);
  }
  o.detail << agree << "/" << kCases << " cases agree";
  o.require(agree == kCases, "greedy TP differs from optimal");
}

const std::map<int, std::pair<const char*, void (*)(Outcome&)>> kCriteria = {
    {1, {"gradient correctness", criterion_gradients}},
    {2, {"geometry oracle", criterion_geometry}},
    {3, {"round-trip head", criterion_round_trip}},
    {4, {"loss identity suite", criterion_identities}},
    {5, {"source-only / fine-tune / adapt / target-trained trends", criterion_table1}},
    {6, {"contrastive term ablation", criterion_table2}},
    {7, {"adaptation wall clock", criterion_adapt_time}},
    {8, {"determinism and formats", criterion_determinism}},
    {9, {"evaluator matching oracle", criterion_matching}},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc) {
      g_out = argv[++i];
    } else {
      which.push_back(std::stoi(a));
    }
  }
  if (which.empty())
    for (const auto& [n, c] : kCriteria) which.push_back(n);
  fs::create_directories(g_out);

  int failed = 0;
  for (int n : which) {
    const auto it = kCriteria.find(n);
    if (it == kCriteria.end()) {
      std::cerr << "unknown criterion " << n << '\n';
      return 2;
    }
    Outcome o;
    const auto t0 = Clock::now();
    try {
      it->second.second(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    std::printf("%s criterion %d: %s [%.1f s] %s\n", o.pass ? "PASS" : "FAIL", n, it->second.first,
                seconds_since(t0), o.detail.str().c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}

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

#include <algorithm>

#include "doctest.h"
#include "madc/augment.hpp"
#include "madc/experiment.hpp"
#include "madc/labelgen.hpp"
#include "madc/protocol.hpp"
#include "madc/synthgen.hpp"
#include "oracles.hpp"

using namespace madc;

namespace {

Sample sample_of(const LabelGrid& lab) {
  Sample s;
  s.mask = relabel(lab);
  s.image = Image(s.mask.labels.cast<float>().min(1.0f) * 0.8f);
  return s;
}

Dataset small_dataset(Domain d, int n, std::uint64_t seed, int size = 32) {
  auto cfg = default_synth_config(d, size);
  cfg.n_images = n;
  cfg.seed = seed;
  return gen_dataset(cfg);
}

ModelConfig tiny_model() {
  ModelConfig m;
  m.levels = 1;
  m.base_channels = 4;
  return m;
}

double max_abs_change(const Params<float>& a, const Params<float>& b) {
  double m = 0;
  for (const auto& [k, v] : a) m = std::max(m, static_cast<double>((v - b.at(k)).cwiseAbs().maxCoeff()));
  return m;
}

}  // namespace

TEST_CASE("mean diameter examples") {
  LabelGrid lab = LabelGrid::Zero(20, 20);
  lab.block(2, 2, 10, 10) = 1;
  Dataset ds;
  ds.items.push_back(sample_of(lab));
  CHECK(mean_diameter(ds) == doctest::Approx(2 * std::sqrt(100 / M_PI)).epsilon(1e-9));
  CHECK(mean_diameter(ds) == doctest::Approx(11.284).epsilon(1e-4));

  LabelGrid eq = LabelGrid::Zero(30, 30);
  eq.block(1, 1, 10, 10) = 1;
  eq.block(15, 15, 10, 10) = 2;
  Dataset two;
  two.items.push_back(sample_of(eq));
  CHECK(mean_diameter(two) == doctest::Approx(mean_diameter(ds)));

  Dataset empty;
  empty.items.push_back(sample_of(LabelGrid::Zero(8, 8)));
  CHECK_THROWS_AS(mean_diameter(empty), ContractViolation);
}

TEST_CASE("doubling masks doubles the diameter") {
  const auto ds = small_dataset(Domain::kFluor, 4, 5);
  Dataset big = ds;
  for (auto& s : big.items) {
    const auto& l = s.mask.labels;
    LabelGrid up(l.rows() * 2, l.cols() * 2);
    for (Eigen::Index r = 0; r < up.rows(); ++r)
      for (Eigen::Index c = 0; c < up.cols(); ++c) up(r, c) = l(r / 2, c / 2);
    s.mask = relabel(up);
  }
  CHECK(std::abs(mean_diameter(big) / (2 * mean_diameter(ds)) - 1) <= 0.1);
}

TEST_CASE("rescaling by one is the identity and by two quadruples areas") {
  const auto ds = small_dataset(Domain::kFluor, 3, 9, 64);
  const auto same = rescale_dataset(ds, 1.0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK((same.items[i].image.pixels == ds.items[i].image.pixels).all());
    CHECK((same.items[i].mask.labels == ds.items[i].mask.labels).all());
  }
  const auto up = rescale_dataset(ds, 2.0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(up.items[i].image.height() == 128);
    CHECK(up.items[i].image.width() == 128);
    CHECK_NOTHROW(validate(up.items[i].mask));
    const double a0 = (ds.items[i].mask.labels > 0).cast<double>().sum();
    const double a1 = (up.items[i].mask.labels > 0).cast<double>().sum();
    CHECK(std::abs(a1 / (4 * a0) - 1) <= 0.15);
  }
  CHECK_THROWS_AS(rescale_dataset(ds, 0.1), ConfigError);
}

TEST_CASE("shot extraction is seeded and keeps its instance") {
  const auto ds = small_dataset(Domain::kFluor, 6, 3, 64);
  for (int k : {1, 2, 3, 5, 10}) {
    const auto a = extract_shots(ds, k, 42, 10.0);
    const auto b = extract_shots(ds, k, 42, 10.0);
    REQUIRE(a.patches.size() == static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
      CHECK((a.patches[j].image.pixels == b.patches[j].image.pixels).all());
      CHECK((a.patches[j].mask.labels == b.patches[j].mask.labels).all());
      CHECK(a.patches[j].mask.count >= 1);
      CHECK(a.patches[j].image.height() >= 16);
    }
    std::vector<std::pair<std::size_t, std::uint32_t>> seeds = a.seeds;
    std::sort(seeds.begin(), seeds.end());
    CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
  }
  CHECK_THROWS_AS(extract_shots(ds, 100000, 1, 10.0), DataError);
}

TEST_CASE("pair schedule balances shot usage") {
  Rng rng(7);
  const auto s1 = pair_schedule(9, 1, rng);
  CHECK(std::all_of(s1.begin(), s1.end(), [](std::size_t i) { return i == 0; }));
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = pair_schedule(7, 3, rng);
    // first two full pools: every shot exactly twice; last step from a new pool
    std::array<int, 3> n{};
    for (int i = 0; i < 6; ++i) ++n[s[i]];
    CHECK(n == std::array<int, 3>{2, 2, 2});
    std::array<int, 3> all = n;
    ++all[s[6]];
    CHECK(*std::max_element(all.begin(), all.end()) - *std::min_element(all.begin(), all.end()) <= 1);
  }
}

TEST_CASE("augmented targets equal targets of the augmented mask") {
  Rng rng(13);
  for (int t = 0; t < 40; ++t) {
    const auto m = oracle::random_mask(rng, 14, 10, 4);
    Augmentation a;
    a.flip_x = rng.uniform() < 0.5;
    a.flip_y = rng.uniform() < 0.5;
    a.rot90 = static_cast<int>(rng.index(4));
    const auto moved = augment_targets(make_targets(m), a);
    const auto ref = make_targets(augment_mask(m, a));
    CHECK((moved.d - ref.d).abs().maxCoeff() <= 1e-5f);
    CHECK((moved.b == ref.b).all());
    CHECK((moved.gx - ref.gx).abs().maxCoeff() <= 1e-5f);
    CHECK((moved.gy - ref.gy).abs().maxCoeff() <= 1e-5f);
  }
}

TEST_CASE("intensity augmentation stays within its ranges") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto a = sample_augmentation(rng);
    CHECK(a.scale >= 0.8f);
    CHECK(a.scale <= 1.2f);
    CHECK(a.offset >= -0.1f);
    CHECK(a.offset <= 0.1f);
  }
}

TEST_CASE("pretraining: zero epochs is the identity, training lowers the loss") {
  const auto ds = small_dataset(Domain::kPhase, 6, 1, 32);
  const Network<float> net(tiny_model());
  const auto init = init_params<float>(net.config(), 3);
  TrainConfig cfg;
  cfg.patch = 32;
  cfg.epochs = 0;
  const auto none = pretrain(net, init, ds, cfg, LossConfig{});
  CHECK(max_abs_change(none.params, init) == 0.0);

  cfg.epochs = 20;
  cfg.augment = false;
  const auto r = pretrain(net, init, ds, cfg, LossConfig{});
  REQUIRE(r.log.size() == 20);
  CHECK(r.log.back().loss < r.log.front().loss);

  const auto again = pretrain(net, init, ds, cfg, LossConfig{});
  CHECK(max_abs_change(r.params, again.params) == 0.0);
}

TEST_CASE("adaptation: tiny phase-2 steps, and no contrastive terms equals fine-tuning") {
  const auto src = small_dataset(Domain::kPhase, 4, 1, 32);
  const auto tgt = small_dataset(Domain::kFluor, 4, 2, 32);
  const Network<float> net(tiny_model());
  const auto init = init_params<float>(net.config(), 5);
  const auto shots = extract_shots(tgt, 2, 11, mean_diameter(src));
  AdaptConfig acfg;
  acfg.pixels_per_pair = 32;
  acfg.pairs_per_class = 32;

  AdaptSchedule p2;
  p2.phase1_epochs = 0;
  p2.phase2_epochs = 5;
  const auto r2 = adapt(net, init, src, shots, LossConfig{}, acfg, p2, 9);
  CHECK(max_abs_change(r2.params, init) < 1e-3);
  CHECK(max_abs_change(r2.params, init) > 0.0);

  AdaptSchedule s;
  s.phase1_epochs = 1;
  s.phase2_epochs = 1;
  AdaptConfig off = acfg;
  off.gamma1 = off.gamma2 = 0;
  const auto a = adapt(net, init, src, shots, LossConfig{}, off, s, 9);
  const auto b = adapt(net, init, src, shots, LossConfig{}, off, s, 9);
  CHECK(max_abs_change(a.params, b.params) == 0.0);
  const auto full = adapt(net, init, src, shots, LossConfig{}, acfg, s, 9);
  CHECK(max_abs_change(full.params, a.params) > 0.0);
  CHECK(loss_log_csv(full.log).rfind("phase,epoch,steps,skipped,loss\n", 0) == 0);
}

TEST_CASE("results table bookkeeping") {
  std::vector<ResultRow> rows;
  rows.push_back({"ADAPT", 1, 0, 0.5, 0.25});
  rows.push_back({"LB", 3, 2, 0.125, 1.0 / 3});
  const auto back = parse_results_csv(results_csv(rows));
  REQUIRE(back.size() == 2);
  CHECK(back[1].variant == "LB");
  CHECK(back[1].k == 3);
  CHECK(back[1].seed == 2);
  CHECK(back[1].pooled_ap == 1.0 / 3);
}

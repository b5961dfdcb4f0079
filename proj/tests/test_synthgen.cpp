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

#include "doctest.h"
#include "madc/labelgen.hpp"
#include "madc/synthgen.hpp"

using namespace madc;

TEST_CASE("generation is deterministic") {
  SynthConfig cfg = default_synth_config(Domain::kPhase);
  cfg.n_images = 4;
  cfg.seed = 17;
  const auto a = gen_dataset(cfg), b = gen_dataset(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK((a.items[i].image.pixels == b.items[i].image.pixels).all());
    CHECK((a.items[i].mask.labels == b.items[i].mask.labels).all());
  }
  cfg.seed = 18;
  const auto c = gen_dataset(cfg);
  CHECK(!(a.items[0].image.pixels == c.items[0].image.pixels).all());
}

TEST_CASE("straight unbranched cells are capsules") {
  SynthConfig cfg = default_synth_config(Domain::kPhase);
  cfg.curvature = 0;
  cfg.branch_prob = 0;
  cfg.seed = 5;
  int checked = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    const auto s = gen_image(cfg, i);
    const auto d = distance_field(s.sample.mask);
    for (const auto& cell : s.cells) {
      CHECK(cell.branch.empty());
      float mx = 0;
      for (Eigen::Index p = 0; p < d.size(); ++p)
        if (s.sample.mask.labels.data()[p] == cell.label) mx = std::max(mx, d.data()[p]);
      CHECK(mx >= cell.radius - 0.5);
      CHECK(mx <= cell.radius + 1.0);
      ++checked;
    }
  }
  CHECK(checked > 10);
}

TEST_CASE("phase and fluor renders of one mask are near negatives") {
  SynthConfig cfg = default_synth_config(Domain::kPhase);
  cfg.seed = 3;
  const auto s = gen_image(cfg, 0);
  const auto phase = render(s.sample.mask, Domain::kPhase, cfg.blur_sigma, cfg.noise_sigma, 1);
  const auto fluor = render(s.sample.mask, Domain::kFluor, cfg.blur_sigma, cfg.noise_sigma, 1);
  double bp = 0, bf = 0;
  int n = 0;
  for (Eigen::Index i = 0; i < s.sample.mask.labels.size(); ++i)
    if (s.sample.mask.labels.data()[i] == 0) {
      bp += phase.pixels.data()[i];
      bf += fluor.pixels.data()[i];
      ++n;
    }
  CHECK(bp / n - bf / n > 0.5);
}

TEST_CASE("generated masks are valid and cells do not touch") {
  for (auto dom : {Domain::kPhase, Domain::kFluor, Domain::kWorm}) {
    SynthConfig cfg = default_synth_config(dom);
    cfg.n_images = 6;
    const auto ds = gen_dataset(cfg);
    for (const auto& s : ds.items) {
      CHECK_NOTHROW(validate(s.mask));
      CHECK_NOTHROW(validate(s.image));
      CHECK(s.mask.count >= 1);
    }
  }
}

TEST_CASE("impossible geometry is a config error") {
  SynthConfig cfg = default_synth_config(Domain::kPhase);
  cfg.height = cfg.width = 16;
  cfg.radius_max = 8;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  CHECK_THROWS_AS(gen_dataset(cfg), ConfigError);
  cfg = default_synth_config(Domain::kPhase);
  cfg.radius_min = 0.5;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("full-size crop is the identity") {
  SynthConfig cfg = default_synth_config(Domain::kFluor);
  cfg.n_images = 3;
  const auto ds = gen_dataset(cfg);
  const auto cr = crop_patches(ds, 64, 9);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK((cr.items[i].image.pixels == ds.items[i].image.pixels).all());
    CHECK((cr.items[i].mask.labels == ds.items[i].mask.labels).all());
  }
}

TEST_CASE("112 crops from 224 images") {
  SynthConfig cfg = default_synth_config(Domain::kPhase, 224);
  cfg.n_images = 2;
  const auto cr = crop_patches(gen_dataset(cfg), 112, 1);
  for (const auto& s : cr.items) {
    CHECK(s.image.height() == 112);
    CHECK(s.image.width() == 112);
    CHECK_NOTHROW(validate(s.mask));
  }
}

TEST_CASE("blur half-width and normalization") {
  Grid<float> g = Grid<float>::Zero(15, 15);
  g(7, 7) = 1;
  const auto b = gaussian_blur(g, 1.0);
  CHECK(b.sum() == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(b(7, 10) > 0);   // within ceil(3 sigma)
  CHECK(b(7, 11) == 0);  // beyond it
}

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
#include "madc/checkpoint.hpp"
#include "madc/net.hpp"
#include "madc/radam.hpp"
#include "oracles.hpp"

using namespace madc;

namespace {

Grid<double> random_image(Rng& rng, int h, int w) {
  Grid<double> g(h, w);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.uniform();
  return g;
}

// Weighted sum of all outputs: dL/dZ = the weights.
double weighted_sum(const FeatureMap<double>& z, const FeatureMap<double>& wts) {
  return (z.phi * wts.phi).sum() + (z.u1 * wts.u1).sum() + (z.u2 * wts.u2).sum() + (z.z * wts.z).sum();
}

}  // namespace

TEST_CASE("default model size") {
  ModelConfig cfg;
  CHECK(param_count(cfg) == 53396);
  CHECK_THROWS_AS(validate(ModelConfig{0, 16}), ConfigError);
}

TEST_CASE("init is deterministic with zero biases and centred weights") {
  ModelConfig cfg;
  const auto a = init_params<float>(cfg, 3), b = init_params<float>(cfg, 3);
  CHECK(a == b);
  double sum = 0;
  std::size_t n = 0;
  for (const auto& s : param_specs(cfg)) {
    const auto& m = a.at(s.name);
    if (s.bias) {
      CHECK((m.array() == 0).all());
    } else {
      const double lim = std::sqrt(6.0 / (s.fan_in + s.fan_out));
      CHECK(m.cwiseAbs().maxCoeff() <= lim);
      sum += m.sum();
      n += static_cast<std::size_t>(m.size());
    }
  }
  CHECK(n >= 10000);
  CHECK(std::abs(sum / n) < 0.01);
}

TEST_CASE("zero parameters and zero input give zero output") {
  ModelConfig cfg;
  Network<float> net(cfg);
  auto p = zeros_like(init_params<float>(cfg, 1));
  const auto z = net.forward(p, Grid<float>::Zero(20, 28));
  CHECK(z.height() == 20);
  CHECK(z.width() == 28);
  CHECK((z.phi == 0).all());
  CHECK((z.z == 0).all());
}

TEST_CASE("output shape matches odd input sizes") {
  ModelConfig cfg{2, 4};
  Network<float> net(cfg);
  const auto p = init_params<float>(cfg, 1);
  for (auto [h, w] : {std::pair{9, 13}, {16, 16}, {17, 8}}) {
    const auto z = net.forward(p, Grid<float>::Constant(h, w, 0.5f));
    CHECK(z.height() == h);
    CHECK(z.width() == w);
    CHECK(z.all_finite());
  }
}

TEST_CASE("translation by 2^levels shifts the interior output") {
  ModelConfig cfg{2, 4};
  Network<double> net(cfg);
  Rng rng(2);
  const auto p = init_params<double>(cfg, 5);
  const auto img = random_image(rng, 64, 64);
  Grid<double> shifted = Grid<double>::Zero(64, 64);
  shifted.block(4, 4, 60, 60) = img.block(0, 0, 60, 60);
  const auto a = net.forward(p, img), b = net.forward(p, shifted);
  // Receptive-field radius of the 2-level net is about 21 px.
  const auto ia = a.phi.block(28, 28, 8, 8), ib = b.phi.block(32, 32, 8, 8);
  CHECK((ia - ib).abs().maxCoeff() < 1e-12);
}

TEST_CASE("backward matches finite differences on a 1-level model") {
  ModelConfig cfg{1, 3};
  Network<double> net(cfg);
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    auto p = init_params<double>(cfg, 100 + trial);
    for (auto& [k, v] : p)
      for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] += 0.1 * rng.normal();
    const auto img = random_image(rng, 16, 16);
    FeatureMap<double> wts(16, 16);
    for (auto* g : {&wts.phi, &wts.u1, &wts.u2, &wts.z})
      for (Eigen::Index i = 0; i < g->size(); ++i) g->data()[i] = rng.normal();
    Tape<double> tape;
    net.forward(p, img, &tape);
    const auto grads = net.backward(p, tape, wts);
    const double err = oracle::param_gradient_error(
        p, grads, [&](const Params<double>& q) { return weighted_sum(net.forward(q, img), wts); }, rng, 40);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("unused output channel gives exactly zero head gradient rows") {
  ModelConfig cfg{1, 3};
  Network<double> net(cfg);
  const auto p = init_params<double>(cfg, 1);
  Rng rng(1);
  const auto img = random_image(rng, 8, 8);
  Tape<double> tape;
  net.forward(p, img, &tape);
  FeatureMap<double> dz(8, 8);
  dz.phi.setOnes();
  const auto g = net.backward(p, tape, dz);
  CHECK((g.at("head.weight").row(3).array() == 0).all());
  CHECK(g.at("head.bias")(3, 0) == 0);
  const auto g2 = net.backward(p, tape, dz);
  CHECK(g == g2);
}

TEST_CASE("non-finite activations name the layer") {
  ModelConfig cfg{1, 2};
  Network<float> net(cfg);
  auto p = init_params<float>(cfg, 1);
  p.at("enc.0.conv1.bias").setConstant(std::numeric_limits<float>::infinity());
  try {
    net.forward(p, Grid<float>::Zero(8, 8));
    FAIL("no error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("enc.0.conv1") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip preserves forward output") {
  ModelConfig cfg{2, 4};
  Network<float> net(cfg);
  const auto p = init_params<float>(cfg, 8);
  Checkpoint c;
  store_params(c, p, cfg);
  const auto back = params_from_checkpoint(decode_checkpoint(encode_checkpoint(c)), cfg);
  const auto mc = model_config_from_checkpoint(c);
  CHECK(mc.levels == 2);
  CHECK(mc.base_channels == 4);
  Grid<float> img = Grid<float>::Constant(16, 16, 0.3f);
  img(3, 4) = 0.9f;
  const auto a = net.forward(p, img), b = net.forward(back, img);
  CHECK((a.phi == b.phi).all());
  CHECK((a.z == b.z).all());
}

TEST_CASE("rho_t gates the first four steps") {
  for (int t = 1; t <= 4; ++t) CHECK(radam_rho(t, 0.999) <= 4.0);
  CHECK(radam_rho(5, 0.999) > 4.0);
  // Independent evaluation of the definition.
  const double rinf = 2.0 / (1 - 0.999) - 1;
  const double r5 = rinf - 2.0 * 5 * std::pow(0.999, 5) / (1 - std::pow(0.999, 5));
  CHECK(radam_rho(5, 0.999) == doctest::Approx(r5).epsilon(1e-12));
}

TEST_CASE("radam: zero gradient and no decay leaves parameters alone") {
  Params<double> p{{"w", Mat<double>::Constant(2, 3, 0.7)}};
  const auto g = zeros_like(p);
  OptimState<double> st;
  st.weight_decay = 0;
  for (int i = 0; i < 8; ++i) radam_step(p, g, st);
  CHECK((p.at("w").array() == 0.7).all());
  CHECK(st.t == 8);
}

TEST_CASE("radam: weight decay shrinks parameters each step") {
  Params<double> p{{"w", Mat<double>::Constant(1, 2, 1.0)}};
  const auto g = zeros_like(p);
  OptimState<double> st;
  st.lr = 0.03;
  st.weight_decay = 1e-5;
  double prev = 1.0;
  for (int i = 0; i < 10; ++i) {
    radam_step(p, g, st);
    CHECK(p.at("w")(0, 0) < prev);
    CHECK(p.at("w")(0, 0) > 0);
    prev = p.at("w")(0, 0);
  }
}

TEST_CASE("radam: momentum branch, then rectified step") {
  Params<double> p{{"w", Mat<double>::Constant(1, 1, 0.0)}};
  Params<double> g{{"w", Mat<double>::Constant(1, 1, 2.0)}};
  OptimState<double> st;
  st.weight_decay = 0;
  st.lr = 0.1;
  radam_step(p, g, st);
  // m_hat = g on the first step; plain momentum update lr * m_hat.
  CHECK(p.at("w")(0, 0) == doctest::Approx(-0.2));
  for (int i = 0; i < 4; ++i) radam_step(p, g, st);
  const double rho = radam_rho(5, 0.999), rinf = 2.0 / 0.001 - 1;
  const double rect = std::sqrt((rho - 4) * (rho - 2) * rinf / ((rinf - 4) * (rinf - 2) * rho));
  // constant gradient: m_hat = 2, v_hat = 4
  CHECK(p.at("w")(0, 0) == doctest::Approx(-0.8 - 0.1 * rect * 2.0 / (2.0 + 1e-8)));
  Params<double> bad{{"w", Mat<double>::Constant(1, 1, std::nan(""))}};
  CHECK_THROWS_AS(radam_step(p, bad, st), NumericError);
}

TEST_CASE("optimizer state survives a checkpoint") {
  ModelConfig cfg{1, 2};
  auto p = init_params<float>(cfg, 1);
  OptimState<float> st;
  Params<float> g = zeros_like(p);
  for (auto& [k, v] : g) v.setConstant(0.5f);
  radam_step(p, g, st);
  radam_step(p, g, st);
  Checkpoint c;
  store_params(c, p, cfg);
  store_optimizer(c, st, cfg);
  OptimState<float> back;
  load_optimizer(decode_checkpoint(encode_checkpoint(c)), back, cfg);
  CHECK(back.t == 2);
  CHECK(back.m == st.m);
  CHECK(back.v == st.v);
}

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

#include "madc/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "madc/augment.hpp"
#include "madc/labelgen.hpp"
#include "madc/synthgen.hpp"

namespace madc {
namespace {

enum Stream : std::uint64_t { kOrder = 1, kCrop, kAugment, kPool, kMining };

struct Prepared {
  Grid<float> image;
  TargetField<float> targets;
};

Prepared prepare(const Sample& s, bool augment, Rng& rng) {
  if (!augment) return {s.image.pixels, make_targets(s.mask)};
  const auto a = sample_augmentation(rng);
  return {augment_image(s.image, a).pixels, augment_targets(make_targets(s.mask), a)};
}

[[noreturn]] void rethrow_with_context(const NumericError& e, int phase, int epoch, int step) {
  std::ostringstream os;
  os << "training diverged (phase " << phase << ", epoch " << epoch << ", step " << step << "): " << e.what();
  throw NumericError(os.str());
}

void apply_step(Params<float>& params, Params<float>& grads, OptimState<float>& st, double clip_norm, double loss,
                int phase, int epoch, int step) {
  try {
    if (!std::isfinite(loss)) throw NumericError("non-finite loss");
    if (clip_norm > 0) {
      double sq = 0;
      for (const auto& [name, g] : grads) sq += static_cast<double>(g.squaredNorm());
      const double norm = std::sqrt(sq);
      if (norm > clip_norm)
        for (auto& [name, g] : grads) g *= static_cast<float>(clip_norm / norm);
    }
    radam_step(params, grads, st);
  } catch (const NumericError& e) {
    rethrow_with_context(e, phase, epoch, step);
  }
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr > 0)) throw ConfigError("lr must be > 0");
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (cfg.batch < 1) throw ConfigError("batch must be >= 1");
  if (!(cfg.wd >= 0)) throw ConfigError("weight decay must be >= 0");
  if (cfg.patch < 8) throw ConfigError("patch must be >= 8");
  if (!(cfg.loss_scale > 0)) throw ConfigError("loss_scale must be > 0");
  if (!(cfg.clip_norm >= 0)) throw ConfigError("clip_norm must be >= 0");
}

void validate(const AdaptSchedule& cfg) {
  if (cfg.phase1_epochs < 0 || cfg.phase2_epochs < 0) throw ConfigError("adaptation epochs must be >= 0");
  if (!(cfg.lr > 0 && cfg.phase2_lr > 0)) throw ConfigError("adaptation learning rates must be > 0");
  if (!(cfg.wd >= 0)) throw ConfigError("weight decay must be >= 0");
  if (!(cfg.loss_scale > 0)) throw ConfigError("loss_scale must be > 0");
  if (!(cfg.clip_norm >= 0)) throw ConfigError("clip_norm must be >= 0");
}

double mean_diameter(const Dataset& ds) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& s : ds.items) {
    std::vector<std::size_t> area(s.mask.count + 1, 0);
    for (Eigen::Index i = 0; i < s.mask.labels.size(); ++i) ++area[s.mask.labels.data()[i]];
    for (std::size_t l = 1; l < area.size(); ++l) {
      sum += 2.0 * std::sqrt(static_cast<double>(area[l]) / M_PI);
      ++n;
    }
  }
  require(n > 0, "mean_diameter needs at least one instance");
  return sum / static_cast<double>(n);
}

Dataset rescale_dataset(const Dataset& ds, double ratio) {
  if (!(ratio > 0) || !std::isfinite(ratio)) throw ConfigError("rescale ratio must be a positive number");
  if (ratio == 1.0) return ds;
  Dataset out{ds.name, ds.split, {}};
  for (const auto& s : ds.items) {
    const Eigen::Index h = s.image.height(), w = s.image.width();
    const auto nh = static_cast<Eigen::Index>(std::lround(h * ratio));
    const auto nw = static_cast<Eigen::Index>(std::lround(w * ratio));
    if (nh < 8 || nw < 8) throw ConfigError("rescaled image would be smaller than 8 px");
    const double sy = static_cast<double>(h) / nh, sx = static_cast<double>(w) / nw;
    Grid<float> img(nh, nw);
    LabelGrid lab(nh, nw);
    for (Eigen::Index r = 0; r < nh; ++r) {
      const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
      const auto y0 = static_cast<Eigen::Index>(fy);
      const auto y1 = std::min(y0 + 1, h - 1);
      const double ty = fy - y0;
      const auto ny = std::min(static_cast<Eigen::Index>((r + 0.5) * sy), h - 1);
      for (Eigen::Index c = 0; c < nw; ++c) {
        const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
        const auto x0 = static_cast<Eigen::Index>(fx);
        const auto x1 = std::min(x0 + 1, w - 1);
        const double tx = fx - x0;
        const auto& p = s.image.pixels;
        const double v = (1 - ty) * ((1 - tx) * p(y0, x0) + tx * p(y0, x1)) + ty * ((1 - tx) * p(y1, x0) + tx * p(y1, x1));
        img(r, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        const auto nx = std::min(static_cast<Eigen::Index>((c + 0.5) * sx), w - 1);
        lab(r, c) = s.mask.labels(ny, nx);
      }
    }
    out.items.push_back({Image(std::move(img)), relabel(lab)});
  }
  return out;
}

ShotSet extract_shots(const Dataset& target_train, int k, std::uint64_t seed, double source_diameter) {
  if (k < 1) throw ConfigError("K must be >= 1");
  std::vector<std::pair<std::size_t, std::uint32_t>> pool;
  for (std::size_t i = 0; i < target_train.size(); ++i)
    for (std::uint32_t l = 1; l <= target_train.items[i].mask.count; ++l) pool.emplace_back(i, l);
  if (pool.size() < static_cast<std::size_t>(k))
    throw DataError("target split has " + std::to_string(pool.size()) + " instances, fewer than K=" +
                    std::to_string(k));

  ShotSet shots;
  shots.k = k;
  shots.source_diameter = source_diameter;
  shots.target_diameter = mean_diameter(target_train);
  const auto side_wanted =
      std::max<Eigen::Index>(16, static_cast<Eigen::Index>(std::ceil(2.0 * shots.target_diameter)));

  Rng rng(Rng::mix(seed));
  for (int j = 0; j < k; ++j) {
    std::swap(pool[j], pool[j + rng.index(pool.size() - j)]);
    const auto [item, label] = pool[j];
    const Sample& s = target_train.items[item];
    double cx = 0, cy = 0;
    std::size_t n = 0;
    for (Eigen::Index r = 0; r < s.mask.height(); ++r)
      for (Eigen::Index c = 0; c < s.mask.width(); ++c)
        if (s.mask.labels(r, c) == label) {
          cx += c;
          cy += r;
          ++n;
        }
    cx /= n;
    cy /= n;
    const Eigen::Index h = s.mask.height(), w = s.mask.width();
    const Eigen::Index side = std::min({side_wanted, h, w});
    const Eigen::Index top = std::clamp<Eigen::Index>(std::lround(cy) - (side - 1) / 2, 0, h - side);
    const Eigen::Index left = std::clamp<Eigen::Index>(std::lround(cx) - (side - 1) / 2, 0, w - side);
    Sample patch = crop(s, top, left, side, side);
    if (patch.mask.count == 0) throw DataError("shot patch contains no instance");
    shots.patches.push_back(std::move(patch));
    shots.seeds.emplace_back(item, label);
  }
  return shots;
}

std::vector<std::size_t> pair_schedule(std::size_t n_steps, std::size_t k, Rng& rng) {
  require(k >= 1, "pair_schedule needs at least one shot");
  std::vector<std::size_t> out, pool;
  out.reserve(n_steps);
  while (out.size() < n_steps) {
    if (pool.empty()) {
      pool.resize(k);
      std::iota(pool.begin(), pool.end(), std::size_t(0));
      rng.shuffle(pool);
      std::reverse(pool.begin(), pool.end());
    }
    out.push_back(pool.back());
    pool.pop_back();
  }
  return out;
}

TrainResult pretrain(const Network<float>& net, Params<float> init, const Dataset& source, const TrainConfig& cfg,
                     const LossConfig& loss, const ProgressFn& progress) {
  validate(cfg);
  validate(loss);
  require(!source.empty(), "pretraining needs a nonempty dataset");
  TrainResult r;
  r.params = std::move(init);
  r.optim.lr = cfg.lr;
  r.optim.weight_decay = cfg.wd;
  const Rng base(Rng::mix(cfg.seed));
  Rng order = base.fork(kOrder), crops = base.fork(kCrop), aug = base.fork(kAugment);

  std::vector<std::size_t> idx(source.size());
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order.shuffle(idx);
    EpochLog log{0, epoch, 0, 0, 0.0};
    for (std::size_t b = 0; b < idx.size(); b += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t e = std::min(idx.size(), b + static_cast<std::size_t>(cfg.batch));
      const float inv = 1.0f / static_cast<float>(e - b);
      const float gscale = inv * static_cast<float>(cfg.loss_scale);
      Params<float> grads = zeros_like(r.params);
      double batch_loss = 0;
      try {
        for (std::size_t q = b; q < e; ++q) {
          const Sample& s = source.items[idx[q]];
          const Eigen::Index ph = std::min<Eigen::Index>(cfg.patch, s.image.height());
          const Eigen::Index pw = std::min<Eigen::Index>(cfg.patch, s.image.width());
          const auto top = static_cast<Eigen::Index>(crops.index(static_cast<std::size_t>(s.image.height() - ph + 1)));
          const auto left = static_cast<Eigen::Index>(crops.index(static_cast<std::size_t>(s.image.width() - pw + 1)));
          const bool whole = ph == s.image.height() && pw == s.image.width();
          const auto p = prepare(whole ? s : crop(s, top, left, ph, pw), cfg.augment, aug);
          Tape<float> tape;
          const auto z = net.forward(r.params, p.image, &tape);
          const auto l = loss_is(z, p.targets, loss);
          add_scaled(grads, net.backward(r.params, tape, l.grad), gscale);
          batch_loss += static_cast<double>(l.value) * inv;
        }
      } catch (const NumericError& err) {
        rethrow_with_context(err, 0, epoch, log.steps + 1);
      }
      apply_step(r.params, grads, r.optim, cfg.clip_norm, batch_loss, 0, epoch, log.steps + 1);
      log.loss += batch_loss;
      ++log.steps;
    }
    log.loss /= std::max(log.steps, 1);
    r.log.push_back(log);
    if (progress) progress(log);
  }
  return r;
}

TrainResult adapt(const Network<float>& net, const Params<float>& pretrained, const Dataset& source,
                  const ShotSet& shots, const LossConfig& loss, const AdaptConfig& acfg, const AdaptSchedule& sched,
                  std::uint64_t seed, const ProgressFn& progress) {
  validate(loss);
  validate(acfg);
  validate(sched);
  require(!shots.patches.empty(), "adaptation needs at least one shot");
  require(!source.empty(), "adaptation needs a nonempty source dataset");
  TrainResult r;
  r.params = pretrained;
  r.optim.lr = sched.lr;
  r.optim.weight_decay = sched.wd;
  const Rng base(Rng::mix(seed));
  Rng order = base.fork(kOrder), pool = base.fork(kPool), aug = base.fork(kAugment), mining = base.fork(kMining);

  const bool contrastive = acfg.gamma1 != 0.0 || acfg.gamma2 != 0.0;
  std::vector<TargetField<float>> source_targets;
  if (contrastive)
    for (const auto& s : source.items) source_targets.push_back(make_targets(s.mask));

  const std::size_t n_src = source.size();
  const auto schedule = pair_schedule(n_src * static_cast<std::size_t>(sched.phase1_epochs), shots.patches.size(), pool);
  std::vector<std::size_t> idx(n_src);
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  std::size_t step = 0;
  for (int epoch = 1; epoch <= sched.phase1_epochs; ++epoch) {
    order.shuffle(idx);
    EpochLog log{1, epoch, 0, 0, 0.0};
    for (std::size_t q = 0; q < n_src; ++q, ++step) {
      const auto shot = prepare(shots.patches[schedule[step]], sched.augment, aug);
      AdaptLoss<float> l;
      try {
        if (contrastive) {
          const auto& s = source.items[idx[q]];
          l = loss_adapt(net, r.params, shot.image, shot.targets, s.image.pixels, source_targets[idx[q]], loss, acfg,
                         mining);
        } else {
          l = loss_adapt(net, r.params, shot.image, shot.targets, Grid<float>(), TargetField<float>{}, loss, acfg,
                         mining);
        }
      } catch (const MiningError&) {
        ++log.skipped;
        continue;
      } catch (const NumericError& err) {
        rethrow_with_context(err, 1, epoch, static_cast<int>(q) + 1);
      }
      for (auto& [name, g] : l.grads) g *= static_cast<float>(sched.loss_scale);
      apply_step(r.params, l.grads, r.optim, sched.clip_norm, static_cast<double>(l.total), 1, epoch, static_cast<int>(q) + 1);
      log.loss += static_cast<double>(l.total);
      ++log.steps;
    }
    log.loss /= std::max(log.steps, 1);
    r.log.push_back(log);
    if (progress) progress(log);
  }

  r.optim.lr = sched.phase2_lr;
  std::vector<std::size_t> sidx(shots.patches.size());
  std::iota(sidx.begin(), sidx.end(), std::size_t(0));
  for (int epoch = 1; epoch <= sched.phase2_epochs; ++epoch) {
    order.shuffle(sidx);
    EpochLog log{2, epoch, 0, 0, 0.0};
    for (auto k : sidx) {
      const auto shot = prepare(shots.patches[k], sched.augment, aug);
      Tape<float> tape;
      Params<float> grads;
      float value = 0;
      try {
        const auto z = net.forward(r.params, shot.image, &tape);
        auto l = loss_is(z, shot.targets, loss);
        value = l.value;
        grads = net.backward(r.params, tape, l.grad);
        for (auto& [name, gr] : grads) gr *= static_cast<float>(sched.loss_scale);
      } catch (const NumericError& err) {
        rethrow_with_context(err, 2, epoch, log.steps + 1);
      }
      apply_step(r.params, grads, r.optim, sched.clip_norm, static_cast<double>(value), 2, epoch, log.steps + 1);
      log.loss += static_cast<double>(value);
      ++log.steps;
    }
    log.loss /= std::max(log.steps, 1);
    r.log.push_back(log);
    if (progress) progress(log);
  }
  return r;
}

std::string loss_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os.precision(9);
  os << "phase,epoch,steps,skipped,loss\n";
  for (const auto& e : log) os << e.phase << ',' << e.epoch << ',' << e.steps << ',' << e.skipped << ',' << e.loss << '\n';
  return os.str();
}

}  // namespace madc

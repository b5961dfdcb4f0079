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

#ifndef MADC_LOSSES_HPP
#define MADC_LOSSES_HPP

// Training objectives. Every loss returns its value together with dLoss/dZ
// for each feature map it reads; the network turns those into parameter
// gradients.
//
//   loss_is   per-pixel distance / flow / border supervision, summed, + IVP
//   loss_ivp  predicted flow vs. normalized gradient of predicted distance
//   loss_cd   InfoNCE over (phi, u) with an RBF x cosine similarity kernel
//   loss_cb   pull/push on border logits across the two domains
//   loss_adapt  shot L_IS + gamma1 * L_CB + gamma2 * L_CD for one pair

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "madc/net.hpp"
#include "madc/rng.hpp"
#include "madc/types.hpp"

namespace madc {

struct LossConfig {
  double nu = 0.5;
  double mu = 1.0;
  double ivp_weight = 1.0;
};

struct AdaptConfig {
  double tau = 0.1;
  double margin = 10.0;
  int n_negatives = 20;
  double gamma1 = 0.05;  ///< weight of L_CB
  double gamma2 = 0.05;  ///< weight of L_CD
  double sigma_rbf = 2.0;
  double delta = 0.5;
  double lambda = 1.0;
  int pixels_per_pair = 256;
  int pairs_per_class = 512;
  bool detach_source = false;
  /// Mine positives/negatives on source labels instead of source predictions.
  bool mine_on_source_labels = false;
};

void validate(const LossConfig& cfg);
void validate(const AdaptConfig& cfg);

inline constexpr double kIvpEpsilon = 1e-6;
inline constexpr double kCosineGuard = 1e-8;

template <typename T>
struct LossGrad {
  T value{};
  FeatureMap<T> grad;
};

template <typename T>
struct PairLoss {
  T value{};
  FeatureMap<T> grad_target;
  FeatureMap<T> grad_source;
};

// ---------------------------------------------------------------------------
// Instance segmentation loss

/// Binary cross-entropy of sigmoid(z) against b, in softplus form.
template <typename T>
T bce_with_logit(T z, T b) {
  using std::abs;
  using std::exp;
  using std::log1p;
  return std::max(z, T(0)) + log1p(exp(-abs(z))) - b * z;
}

template <typename T>
LossGrad<T> loss_ivp(const FeatureMap<T>& z, const TargetField<T>& t) {
  const Eigen::Index h = z.height(), w = z.width();
  require_same_shape(t.d, h, w, "loss_ivp targets");
  LossGrad<T> out{T(0), FeatureMap<T>(h, w)};
  Eigen::Index n_cells = 0;
  for (Eigen::Index i = 0; i < t.d.size(); ++i) n_cells += t.d.data()[i] > T(0) ? 1 : 0;
  if (n_cells == 0) return out;
  const T inv = T(1) / T(n_cells);
  const T eps = T(kIvpEpsilon);

  // Central differences, one-sided on the grid edge: returns the stencil
  // (lo, hi, scale) so the gradient can be scattered back.
  auto stencil = [](Eigen::Index i, Eigen::Index n) {
    struct S {
      Eigen::Index lo, hi;
      T scale;
    };
    if (n == 1) return S{i, i, T(0)};
    if (i == 0) return S{0, 1, T(1)};
    if (i == n - 1) return S{n - 2, n - 1, T(1)};
    return S{i - 1, i + 1, T(0.5)};
  };

  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c) {
      if (!(t.d(r, c) > T(0))) continue;
      const auto sx = stencil(c, w), sy = stencil(r, h);
      const T gx = sx.scale * (z.phi(r, sx.hi) - z.phi(r, sx.lo));
      const T gy = sy.scale * (z.phi(sy.hi, c) - z.phi(sy.lo, c));
      const T norm = std::sqrt(gx * gx + gy * gy);
      const bool big = norm > eps;
      const T denom = big ? norm : eps;
      const T nx = gx / denom, ny = gy / denom;
      const T ex = z.u1(r, c) - nx, ey = z.u2(r, c) - ny;
      out.value += inv * (ex * ex + ey * ey);
      out.grad.u1(r, c) += T(2) * inv * ex;
      out.grad.u2(r, c) += T(2) * inv * ey;
      const T dnx = -T(2) * inv * ex, dny = -T(2) * inv * ey;
      T dgx, dgy;
      if (big) {
        const T proj = nx * dnx + ny * dny;
        dgx = (dnx - nx * proj) / norm;
        dgy = (dny - ny * proj) / norm;
      } else {
        dgx = dnx / eps;
        dgy = dny / eps;
      }
      out.grad.phi(r, sx.hi) += sx.scale * dgx;
      out.grad.phi(r, sx.lo) -= sx.scale * dgx;
      out.grad.phi(sy.hi, c) += sy.scale * dgy;
      out.grad.phi(sy.lo, c) -= sy.scale * dgy;
    }
  return out;
}

/// Sum over pixels of (phi-d)^2 + nu |u-g|^2 + mu H(b, sigmoid(z)), plus
/// ivp_weight * loss_ivp.
template <typename T>
LossGrad<T> loss_is(const FeatureMap<T>& z, const TargetField<T>& t, const LossConfig& cfg) {
  const Eigen::Index h = z.height(), w = z.width();
  require_same_shape(t.d, h, w, "loss_is targets");
  if (!z.all_finite()) throw NumericError("non-finite feature map in loss_is");
  const T nu = T(cfg.nu), mu = T(cfg.mu);
  LossGrad<T> out{T(0), FeatureMap<T>(h, w)};
  const auto ephi = z.phi - t.d;
  const auto e1 = z.u1 - t.gx;
  const auto e2 = z.u2 - t.gy;
  out.value = ephi.square().sum() + nu * (e1.square().sum() + e2.square().sum());
  out.grad.phi = T(2) * ephi;
  out.grad.u1 = T(2) * nu * e1;
  out.grad.u2 = T(2) * nu * e2;
  for (Eigen::Index i = 0; i < z.z.size(); ++i) {
    const T zi = z.z.data()[i], bi = t.b.data()[i];
    out.value += mu * bce_with_logit(zi, bi);
    out.grad.z.data()[i] = mu * (T(1) / (T(1) + std::exp(-zi)) - bi);
  }
  if (cfg.ivp_weight != 0.0) {
    auto ivp = loss_ivp(z, t);
    out.value += T(cfg.ivp_weight) * ivp.value;
    out.grad.phi += T(cfg.ivp_weight) * ivp.grad.phi;
    out.grad.u1 += T(cfg.ivp_weight) * ivp.grad.u1;
    out.grad.u2 += T(cfg.ivp_weight) * ivp.grad.u2;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Similarity kernel

template <typename T>
struct SimilarityGrad {
  T value{};
  T dphi{}, du1{}, du2{};  ///< w.r.t. the first argument
  T dpsi{}, dv1{}, dv2{};  ///< w.r.t. the second argument
};

/// exp(-(phi-psi)^2 / (2 sigma)) * u.v / max(|u||v|, 1e-8)
template <typename T>
T similarity(T phi, T u1, T u2, T psi, T v1, T v2, double sigma) {
  const T rbf = std::exp(-(phi - psi) * (phi - psi) / T(2 * sigma));
  const T denom = std::max(std::sqrt(u1 * u1 + u2 * u2) * std::sqrt(v1 * v1 + v2 * v2), T(kCosineGuard));
  return rbf * (u1 * v1 + u2 * v2) / denom;
}

template <typename T>
SimilarityGrad<T> similarity_grad(T phi, T u1, T u2, T psi, T v1, T v2, double sigma) {
  SimilarityGrad<T> g;
  const T diff = phi - psi;
  const T rbf = std::exp(-diff * diff / T(2 * sigma));
  const T nu = std::sqrt(u1 * u1 + u2 * u2), nv = std::sqrt(v1 * v1 + v2 * v2);
  const T dot = u1 * v1 + u2 * v2;
  const T prod = nu * nv;
  T cos, dc_du1, dc_du2, dc_dv1, dc_dv2;
  if (prod > T(kCosineGuard)) {
    cos = dot / prod;
    // d cos / du = v/(|u||v|) - cos u/|u|^2
    dc_du1 = v1 / prod - cos * u1 / (nu * nu);
    dc_du2 = v2 / prod - cos * u2 / (nu * nu);
    dc_dv1 = u1 / prod - cos * v1 / (nv * nv);
    dc_dv2 = u2 / prod - cos * v2 / (nv * nv);
  } else {
    const T g0 = T(kCosineGuard);
    cos = dot / g0;
    dc_du1 = v1 / g0;
    dc_du2 = v2 / g0;
    dc_dv1 = u1 / g0;
    dc_dv2 = u2 / g0;
  }
  g.value = rbf * cos;
  const T drbf = -rbf * diff / T(sigma);  // d rbf / d phi
  g.dphi = drbf * cos;
  g.dpsi = -drbf * cos;
  g.du1 = rbf * dc_du1;
  g.du2 = rbf * dc_du2;
  g.dv1 = rbf * dc_dv1;
  g.dv2 = rbf * dc_dv2;
  return g;
}

// ---------------------------------------------------------------------------
// Mining

/// Index of the largest similarity; ties go to the smallest pixel index.
template <typename T>
Eigen::Index argmax_similarity(const std::vector<T>& sims, const std::vector<Eigen::Index>& idx) {
  if (sims.empty()) throw MiningError("no positive candidates");
  std::size_t best = 0;
  for (std::size_t k = 1; k < sims.size(); ++k)
    if (sims[k] > sims[best] || (sims[k] == sims[best] && idx[k] < idx[best])) best = k;
  return idx[best];
}

/// Candidates with similarity below `delta`, hardest (largest similarity)
/// first, at most `n`; ties by smaller pixel index.
template <typename T>
std::vector<Eigen::Index> select_hard_negatives(const std::vector<T>& sims, const std::vector<Eigen::Index>& idx,
                                                double delta, int n) {
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < sims.size(); ++k)
    if (sims[k] < T(delta)) order.push_back(k);
  const auto keep = std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(n, 0)));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (sims[a] != sims[b]) return sims[a] > sims[b];
                      return idx[a] < idx[b];
                    });
  std::vector<Eigen::Index> out;
  for (std::size_t k = 0; k < keep; ++k) out.push_back(idx[order[k]]);
  return out;
}

/// Source cell-interior pixels (d > 0, b = 0), row-major flat indices.
template <typename T>
std::vector<Eigen::Index> interior_pixels(const TargetField<T>& t) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < t.d.size(); ++i)
    if (t.d.data()[i] > T(0) && t.b.data()[i] == T(0)) out.push_back(i);
  return out;
}

/// Source pixel whose (phi, u) best matches the label (d, gx, gy).
template <typename T>
Eigen::Index mine_positive(T d, T gx, T gy, const FeatureMap<T>& src, const std::vector<Eigen::Index>& candidates,
                           double sigma) {
  std::vector<T> sims;
  sims.reserve(candidates.size());
  for (auto j : candidates)
    sims.push_back(similarity(src.phi.data()[j], src.u1.data()[j], src.u2.data()[j], d, gx, gy, sigma));
  return argmax_similarity(sims, candidates);
}

/// Hard negatives for a mined positive, compared on source features.
template <typename T>
std::vector<Eigen::Index> mine_negatives(Eigen::Index positive, const FeatureMap<T>& src,
                                         const std::vector<Eigen::Index>& candidates, double delta, int n,
                                         double sigma) {
  const T pp = src.phi.data()[positive], p1 = src.u1.data()[positive], p2 = src.u2.data()[positive];
  std::vector<T> sims;
  sims.reserve(candidates.size());
  for (auto j : candidates)
    sims.push_back(similarity(pp, p1, p2, src.phi.data()[j], src.u1.data()[j], src.u2.data()[j], sigma));
  return select_hard_negatives(sims, candidates, delta, n);
}

// ---------------------------------------------------------------------------
// Pair plans: the piecewise-constant choices (sampling and mining) made once
// per (target, source) pair. Losses are smooth functions given a plan.

struct CdPlan {
  std::vector<Eigen::Index> anchors;  ///< target pixels (set B)
  std::vector<Eigen::Index> positives;
  std::vector<std::vector<Eigen::Index>> negatives;
};

struct CbPlan {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> positive;  ///< (target, source), same b
  std::vector<std::pair<Eigen::Index, Eigen::Index>> negative;  ///< different b
};

struct AdaptPlan {
  CdPlan cd;
  CbPlan cb;
};

/// Samples B from target interior pixels and mines on the source. Throws
/// MiningError when the source has no interior pixel.
template <typename T>
CdPlan plan_cd(const TargetField<T>& target, const FeatureMap<T>& src_pred, const TargetField<T>& src_labels,
               const AdaptConfig& cfg, Rng& rng) {
  CdPlan plan;
  const auto candidates = interior_pixels(src_labels);
  if (candidates.empty()) throw MiningError("source image has no cell-interior pixel");
  auto pool = interior_pixels(target);
  const auto take = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(cfg.pixels_per_pair));
  for (std::size_t k = 0; k < take; ++k) std::swap(pool[k], pool[k + rng.index(pool.size() - k)]);
  pool.resize(take);

  const FeatureMap<T> src_labels_as_features(src_labels.d, src_labels.gx, src_labels.gy, src_labels.b);
  const FeatureMap<T>& mined = cfg.mine_on_source_labels ? src_labels_as_features : src_pred;
  for (auto i : pool) {
    const auto pos = mine_positive(target.d.data()[i], target.gx.data()[i], target.gy.data()[i], mined, candidates,
                                   cfg.sigma_rbf);
    plan.anchors.push_back(i);
    plan.positives.push_back(pos);
    plan.negatives.push_back(mine_negatives(pos, mined, candidates, cfg.delta, cfg.n_negatives, cfg.sigma_rbf));
  }
  return plan;
}

/// Up to pairs_per_class positive (same b) and negative (different b)
/// pairs. The first quarter of anchors of each class comes from target
/// border pixels when there are any.
template <typename T>
CbPlan plan_cb(const Grid<T>& target_b, const Grid<T>& source_b, const AdaptConfig& cfg, Rng& rng) {
  std::vector<Eigen::Index> t_all(static_cast<std::size_t>(target_b.size())), t_border, s_by_b[2];
  std::iota(t_all.begin(), t_all.end(), Eigen::Index(0));
  for (Eigen::Index i = 0; i < target_b.size(); ++i)
    if (target_b.data()[i] > T(0.5)) t_border.push_back(i);
  for (Eigen::Index j = 0; j < source_b.size(); ++j) s_by_b[source_b.data()[j] > T(0.5) ? 1 : 0].push_back(j);

  CbPlan plan;
  const int n = cfg.pairs_per_class;
  const int n_border = t_border.empty() ? 0 : (n + 3) / 4;
  for (int want_same = 1; want_same >= 0; --want_same) {
    auto& dst = want_same ? plan.positive : plan.negative;
    for (int k = 0; k < n; ++k) {
      const auto& anchors = k < n_border ? t_border : t_all;
      const Eigen::Index ti = anchors[rng.index(anchors.size())];
      const int tb = target_b.data()[ti] > T(0.5) ? 1 : 0;
      const auto& partners = s_by_b[want_same ? tb : 1 - tb];
      if (partners.empty()) continue;
      dst.emplace_back(ti, partners[rng.index(partners.size())]);
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Contrastive losses

/// Mean over anchors of -log softmax_0 of s(t, .)/tau over [positive, negatives].
template <typename T>
PairLoss<T> loss_cd(const FeatureMap<T>& zt, const FeatureMap<T>& zs, const CdPlan& plan, double tau, double sigma,
                    bool detach_source = false) {
  PairLoss<T> out{T(0), FeatureMap<T>(zt.height(), zt.width()), FeatureMap<T>(zs.height(), zs.width())};
  const std::size_t nb = plan.anchors.size();
  if (nb == 0) return out;
  const T inv = T(1) / T(nb);
  std::vector<Eigen::Index> others;
  std::vector<T> logits;
  std::vector<SimilarityGrad<T>> grads;
  for (std::size_t a = 0; a < nb; ++a) {
    const Eigen::Index i = plan.anchors[a];
    const T tp = zt.phi.data()[i], t1 = zt.u1.data()[i], t2 = zt.u2.data()[i];
    others.assign(1, plan.positives[a]);
    others.insert(others.end(), plan.negatives[a].begin(), plan.negatives[a].end());
    logits.clear();
    grads.clear();
    for (auto j : others) {
      grads.push_back(similarity_grad(tp, t1, t2, zs.phi.data()[j], zs.u1.data()[j], zs.u2.data()[j], sigma));
      logits.push_back(grads.back().value / T(tau));
    }
    const T mx = *std::max_element(logits.begin(), logits.end());
    T sum = 0;
    for (auto l : logits) sum += std::exp(l - mx);
    out.value += inv * (std::log(sum) + mx - logits[0]);
    for (std::size_t k = 0; k < others.size(); ++k) {
      const T soft = std::exp(logits[k] - mx) / sum;
      const T dl = inv * (soft - (k == 0 ? T(1) : T(0))) / T(tau);  // dL/ds_k
      const auto& g = grads[k];
      out.grad_target.phi.data()[i] += dl * g.dphi;
      out.grad_target.u1.data()[i] += dl * g.du1;
      out.grad_target.u2.data()[i] += dl * g.du2;
      if (!detach_source) {
        const Eigen::Index j = others[k];
        out.grad_source.phi.data()[j] += dl * g.dpsi;
        out.grad_source.u1.data()[j] += dl * g.dv1;
        out.grad_source.u2.data()[j] += dl * g.dv2;
      }
    }
  }
  return out;
}

/// (1/|P|) sum 1/2 (zt - zs)^2 + lambda (1/|N|) sum 1/2 max(0, m - |zt - zs|)^2.
template <typename T>
PairLoss<T> loss_cb(const FeatureMap<T>& zt, const FeatureMap<T>& zs, const CbPlan& plan, double margin,
                    double lambda, bool detach_source = false) {
  PairLoss<T> out{T(0), FeatureMap<T>(zt.height(), zt.width()), FeatureMap<T>(zs.height(), zs.width())};
  if (!plan.positive.empty()) {
    const T inv = T(1) / T(plan.positive.size());
    for (auto [i, j] : plan.positive) {
      const T diff = zt.z.data()[i] - zs.z.data()[j];
      out.value += inv * T(0.5) * diff * diff;
      out.grad_target.z.data()[i] += inv * diff;
      if (!detach_source) out.grad_source.z.data()[j] -= inv * diff;
    }
  }
  if (!plan.negative.empty()) {
    const T inv = T(lambda) / T(plan.negative.size());
    for (auto [i, j] : plan.negative) {
      const T diff = zt.z.data()[i] - zs.z.data()[j];
      const T gap = T(margin) - std::abs(diff);
      if (gap <= T(0)) continue;
      out.value += inv * T(0.5) * gap * gap;
      const T sign = diff > T(0) ? T(1) : (diff < T(0) ? T(-1) : T(0));
      out.grad_target.z.data()[i] -= inv * gap * sign;
      if (!detach_source) out.grad_source.z.data()[j] += inv * gap * sign;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Combined adaptation objective for one (target shot, source image) pair

template <typename T>
struct AdaptLoss {
  T total{};
  T is{};
  T cb{};
  T cd{};
  Params<T> grads;
};

/// L_IS(shot) + gamma1 L_CB(pair) + gamma2 L_CD(pair) with parameter
/// gradients. With `frozen` set, its plan is reused instead of sampling and
/// mining; `used` receives the plan that was applied. The source image is not
/// run through the network when both gammas are zero.
template <typename T>
AdaptLoss<T> loss_adapt(const Network<T>& net, const Params<T>& params, const Grid<T>& target_image,
                        const TargetField<T>& target_labels, const Grid<T>& source_image,
                        const TargetField<T>& source_labels, const LossConfig& lcfg, const AdaptConfig& acfg,
                        Rng& rng, const AdaptPlan* frozen = nullptr, AdaptPlan* used = nullptr) {
  AdaptLoss<T> out;
  Tape<T> tt;
  const auto zt = net.forward(params, target_image, &tt);
  auto is = loss_is(zt, target_labels, lcfg);
  out.is = is.value;
  FeatureMap<T> dzt = std::move(is.grad);

  const bool contrastive = acfg.gamma1 != 0.0 || acfg.gamma2 != 0.0;
  if (!contrastive) {
    out.total = out.is;
    out.grads = net.backward(params, tt, dzt);
    return out;
  }

  Tape<T> ts;
  const auto zs = net.forward(params, source_image, &ts);
  AdaptPlan plan;
  if (frozen) {
    plan = *frozen;
  } else {
    if (acfg.gamma2 != 0.0) plan.cd = plan_cd(target_labels, zs, source_labels, acfg, rng);
    if (acfg.gamma1 != 0.0) plan.cb = plan_cb(target_labels.b, source_labels.b, acfg, rng);
  }
  FeatureMap<T> dzs(zs.height(), zs.width());
  if (acfg.gamma1 != 0.0) {
    auto cb = loss_cb(zt, zs, plan.cb, acfg.margin, acfg.lambda, acfg.detach_source);
    out.cb = cb.value;
    const T g1 = T(acfg.gamma1);
    dzt.z += g1 * cb.grad_target.z;
    dzs.z += g1 * cb.grad_source.z;
  }
  if (acfg.gamma2 != 0.0) {
    auto cd = loss_cd(zt, zs, plan.cd, acfg.tau, acfg.sigma_rbf, acfg.detach_source);
    out.cd = cd.value;
    const T g2 = T(acfg.gamma2);
    dzt.phi += g2 * cd.grad_target.phi;
    dzt.u1 += g2 * cd.grad_target.u1;
    dzt.u2 += g2 * cd.grad_target.u2;
    dzs.phi += g2 * cd.grad_source.phi;
    dzs.u1 += g2 * cd.grad_source.u1;
    dzs.u2 += g2 * cd.grad_source.u2;
  }
  out.total = out.is + T(acfg.gamma1) * out.cb + T(acfg.gamma2) * out.cd;
  out.grads = net.backward(params, tt, dzt);
  if (!acfg.detach_source) add_scaled(out.grads, net.backward(params, ts, dzs), T(1));
  if (used) *used = std::move(plan);
  return out;
}

}  // namespace madc

#endif  // MADC_LOSSES_HPP

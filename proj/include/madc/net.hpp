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

#ifndef MADC_NET_HPP
#define MADC_NET_HPP

// Encoder-decoder producing the 4-channel feature map [phi, u1, u2, z].
//
//   encoder level l: conv3x3-swish-conv3x3-swish (-> skip l), maxpool 2x2
//   decoder level l: nearest x2 upsample, concat [up; skip l],
//                    conv3x3-swish-conv3x3-swish
//   head:            conv1x1 to 4 channels, no output nonlinearity
//
// Activations are (channels, h*w) row-major matrices; convolutions go through
// im2col and a single GEMM each way. Everything is templated on the scalar so
// gradient checks can run in double.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "madc/checkpoint.hpp"
#include "madc/errors.hpp"
#include "madc/rng.hpp"
#include "madc/types.hpp"

namespace madc {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Conv weights are (out, in*k*k); biases (out, 1). Ordered by name.
template <typename T>
using Params = std::map<std::string, Mat<T>>;

struct ModelConfig {
  int levels = 2;
  int base_channels = 16;

  static constexpr int kInChannels = 1;
  static constexpr int kOutChannels = 4;
  static constexpr int kKernel = 3;
};

void validate(const ModelConfig& cfg);

struct ParamSpec {
  std::string name;
  std::vector<std::uint64_t> dims;  ///< [out, in, k, k] or [out]
  int fan_in = 0;
  int fan_out = 0;
  bool bias = false;
};

std::vector<ParamSpec> param_specs(const ModelConfig& cfg);
std::size_t param_count(const ModelConfig& cfg);

/// Glorot-uniform weights, zero biases.
template <typename T>
Params<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Rng rng(seed);
  Params<T> p;
  for (const auto& s : param_specs(cfg)) {
    const auto rows = static_cast<Eigen::Index>(s.dims[0]);
    Eigen::Index cols = 1;
    for (std::size_t i = 1; i < s.dims.size(); ++i) cols *= static_cast<Eigen::Index>(s.dims[i]);
    Mat<T> m = Mat<T>::Zero(rows, cols);
    if (!s.bias) {
      const double a = std::sqrt(6.0 / (s.fan_in + s.fan_out));
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.uniform(-a, a));
    }
    p.emplace(s.name, std::move(m));
  }
  return p;
}

template <typename T>
Params<T> zeros_like(const Params<T>& p) {
  Params<T> z;
  for (const auto& [k, v] : p) z.emplace(k, Mat<T>::Zero(v.rows(), v.cols()));
  return z;
}

template <typename T>
void add_scaled(Params<T>& acc, const Params<T>& g, T scale) {
  for (auto& [k, v] : acc) v += scale * g.at(k);
}

template <typename To, typename From>
Params<To> cast_params(const Params<From>& p) {
  Params<To> out;
  for (const auto& [k, v] : p) out.emplace(k, v.template cast<To>());
  return out;
}

/// Model tensors of a checkpoint (names under enc./dec./head.).
Params<float> params_from_checkpoint(const Checkpoint& ckpt, const ModelConfig& cfg);
/// Writes the model tensors into `ckpt`, replacing existing ones.
void store_params(Checkpoint& ckpt, const Params<float>& p, const ModelConfig& cfg);
/// Depth and width read back from the encoder tensor shapes.
ModelConfig model_config_from_checkpoint(const Checkpoint& ckpt);

template <typename T>
struct ConvCache {
  Mat<T> cols;  ///< im2col of the input (or the input itself for 1x1)
  Mat<T> pre;   ///< pre-activation output
};

template <typename T>
struct Tape {
  Eigen::Index height = 0, width = 0;    ///< caller's image size
  Eigen::Index padded_h = 0, padded_w = 0;
  std::vector<Eigen::Index> level_h, level_w;
  std::vector<ConvCache<T>> enc;  ///< 2 per level
  std::vector<ConvCache<T>> dec;  ///< 2 per level, indexed by level
  std::vector<std::vector<Eigen::Index>> pool_argmax;
  std::vector<Eigen::Index> up_channels;  ///< channels coming from below, per decoder level
  ConvCache<T> head;
};

namespace detail {

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
Mat<T> im2col3(const Mat<T>& in, Eigen::Index h, Eigen::Index w) {
  const Eigen::Index c_in = in.rows();
  Mat<T> cols = Mat<T>::Zero(c_in * 9, h * w);
  for (Eigen::Index c = 0; c < c_in; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = cols.row(c * 9 + ky * 3 + kx).data();
        const T* src = in.row(c).data();
        for (Eigen::Index y = 0; y < h; ++y) {
          const Eigen::Index sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const Eigen::Index x_lo = std::max<Eigen::Index>(0, 1 - kx);
          const Eigen::Index x_hi = std::min<Eigen::Index>(w, w + 1 - kx);
          for (Eigen::Index x = x_lo; x < x_hi; ++x) dst[y * w + x] = src[sy * w + x + kx - 1];
        }
      }
  return cols;
}

template <typename T>
Mat<T> col2im3(const Mat<T>& cols, Eigen::Index c_in, Eigen::Index h, Eigen::Index w) {
  Mat<T> out = Mat<T>::Zero(c_in, h * w);
  for (Eigen::Index c = 0; c < c_in; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = cols.row(c * 9 + ky * 3 + kx).data();
        T* dst = out.row(c).data();
        for (Eigen::Index y = 0; y < h; ++y) {
          const Eigen::Index sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const Eigen::Index x_lo = std::max<Eigen::Index>(0, 1 - kx);
          const Eigen::Index x_hi = std::min<Eigen::Index>(w, w + 1 - kx);
          for (Eigen::Index x = x_lo; x < x_hi; ++x) dst[sy * w + x + kx - 1] += src[y * w + x];
        }
      }
  return out;
}

template <typename T>
Mat<T> swish(const Mat<T>& pre) {
  return pre.unaryExpr([](T v) { return v * sigmoid(v); });
}

template <typename T>
Mat<T> swish_backward(const Mat<T>& pre, const Mat<T>& dy) {
  return dy.binaryExpr(pre, [](T g, T v) {
    const T s = sigmoid(v);
    return g * s * (T(1) + v * (T(1) - s));
  });
}

inline Eigen::Index reflect(Eigen::Index i, Eigen::Index n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

}  // namespace detail

template <typename T>
class Network {
 public:
  explicit Network(ModelConfig cfg) : cfg_(cfg) { validate(cfg_); }

  const ModelConfig& config() const { return cfg_; }

  /// Z = f(I). The tape keeps what backward needs.
  FeatureMap<T> forward(const Params<T>& p, const Grid<T>& image, Tape<T>* tape = nullptr) const {
    Tape<T> local;
    Tape<T>& tp = tape ? *tape : local;
    const Eigen::Index h = image.rows(), w = image.cols();
    const Eigen::Index mult = Eigen::Index(1) << cfg_.levels;
    const Eigen::Index hp = (h + mult - 1) / mult * mult, wp = (w + mult - 1) / mult * mult;
    tp = Tape<T>{};
    tp.height = h;
    tp.width = w;
    tp.padded_h = hp;
    tp.padded_w = wp;

    Mat<T> x(1, hp * wp);
    for (Eigen::Index y = 0; y < hp; ++y)
      for (Eigen::Index xx = 0; xx < wp; ++xx) x(0, y * wp + xx) = image(detail::reflect(y, h), detail::reflect(xx, w));

    std::vector<Mat<T>> skips;
    Eigen::Index ch = hp, cw = wp;
    for (int l = 0; l < cfg_.levels; ++l) {
      tp.level_h.push_back(ch);
      tp.level_w.push_back(cw);
      const std::string base = "enc." + std::to_string(l);
      x = conv_act(p, base + ".conv1", x, ch, cw, tp.enc);
      x = conv_act(p, base + ".conv2", x, ch, cw, tp.enc);
      skips.push_back(x);
      std::vector<Eigen::Index> argmax;
      x = maxpool(x, ch, cw, argmax);
      tp.pool_argmax.push_back(std::move(argmax));
      ch /= 2;
      cw /= 2;
    }

    tp.dec.resize(2 * static_cast<std::size_t>(cfg_.levels));
    tp.up_channels.assign(static_cast<std::size_t>(cfg_.levels), 0);
    for (int l = cfg_.levels - 1; l >= 0; --l) {
      Mat<T> up = upsample(x, ch, cw);
      ch *= 2;
      cw *= 2;
      tp.up_channels[static_cast<std::size_t>(l)] = up.rows();
      Mat<T> cat(up.rows() + skips[static_cast<std::size_t>(l)].rows(), ch * cw);
      cat << up, skips[static_cast<std::size_t>(l)];
      const std::string base = "dec." + std::to_string(l);
      std::vector<ConvCache<T>> caches;
      x = conv_act(p, base + ".conv1", cat, ch, cw, caches);
      x = conv_act(p, base + ".conv2", x, ch, cw, caches);
      tp.dec[2 * static_cast<std::size_t>(l)] = std::move(caches[0]);
      tp.dec[2 * static_cast<std::size_t>(l) + 1] = std::move(caches[1]);
    }

    const Mat<T>& hw = p.at("head.weight");
    const Mat<T>& hb = p.at("head.bias");
    Mat<T> out = hw * x;
    out.colwise() += hb.col(0);
    check_finite(out, "head");
    tp.head.cols = std::move(x);

    FeatureMap<T> z(h, w);
    Grid<T>* chans[4] = {&z.phi, &z.u1, &z.u2, &z.z};
    for (int c = 0; c < 4; ++c)
      for (Eigen::Index y = 0; y < h; ++y)
        for (Eigen::Index xx = 0; xx < w; ++xx) (*chans[c])(y, xx) = out(c, y * wp + xx);
    return z;
  }

  /// Exact parameter gradients of a scalar loss given dLoss/dZ.
  Params<T> backward(const Params<T>& p, const Tape<T>& tp, const FeatureMap<T>& dz) const {
    require(tp.enc.size() == 2 * static_cast<std::size_t>(cfg_.levels) &&
                tp.dec.size() == 2 * static_cast<std::size_t>(cfg_.levels),
            "tape does not match network depth");
    require(dz.height() == tp.height && dz.width() == tp.width, "gradient shape does not match tape");
    require(p.at("head.weight").cols() == tp.head.cols.rows(), "tape does not match parameters");
    Params<T> g = zeros_like(p);
    const Eigen::Index hp = tp.padded_h, wp = tp.padded_w;

    Mat<T> dout = Mat<T>::Zero(4, hp * wp);
    const Grid<T>* chans[4] = {&dz.phi, &dz.u1, &dz.u2, &dz.z};
    for (int c = 0; c < 4; ++c)
      for (Eigen::Index y = 0; y < tp.height; ++y)
        for (Eigen::Index x = 0; x < tp.width; ++x) dout(c, y * wp + x) = (*chans[c])(y, x);

    g.at("head.weight").noalias() += dout * tp.head.cols.transpose();
    g.at("head.bias") += dout.rowwise().sum();
    Mat<T> dx = p.at("head.weight").transpose() * dout;

    std::vector<Mat<T>> dskip(static_cast<std::size_t>(cfg_.levels));
    for (int l = 0; l < cfg_.levels; ++l) {
      const auto li = static_cast<std::size_t>(l);
      const Eigen::Index ch = tp.level_h[li], cw = tp.level_w[li];
      const std::string base = "dec." + std::to_string(l);
      dx = conv_act_backward(p, g, base + ".conv2", tp.dec[2 * li + 1], dx, ch, cw);
      Mat<T> dcat = conv_act_backward(p, g, base + ".conv1", tp.dec[2 * li], dx, ch, cw);
      const Eigen::Index nup = tp.up_channels[li];
      dskip[li] = dcat.bottomRows(dcat.rows() - nup);
      dx = upsample_backward(dcat.topRows(nup), ch, cw);
    }

    for (int l = cfg_.levels - 1; l >= 0; --l) {
      const auto li = static_cast<std::size_t>(l);
      const Eigen::Index ch = tp.level_h[li], cw = tp.level_w[li];
      Mat<T> d = dskip[li];
      maxpool_backward(dx, tp.pool_argmax[li], d);
      const std::string base = "enc." + std::to_string(l);
      d = conv_act_backward(p, g, base + ".conv2", tp.enc[2 * li + 1], d, ch, cw);
      dx = conv_act_backward(p, g, base + ".conv1", tp.enc[2 * li], d, ch, cw, /*need_input_grad=*/l > 0);
    }
    return g;
  }

 private:
  static void check_finite(const Mat<T>& m, const std::string& layer) {
    if (!m.allFinite()) throw NumericError("non-finite activation in layer " + layer);
  }

  static Mat<T> conv_act(const Params<T>& p, const std::string& name, const Mat<T>& in, Eigen::Index h,
                         Eigen::Index w, std::vector<ConvCache<T>>& caches) {
    ConvCache<T> cache;
    cache.cols = detail::im2col3(in, h, w);
    const Mat<T>& wt = p.at(name + ".weight");
    require(wt.cols() == cache.cols.rows(), "weight shape mismatch for " + name);
    cache.pre.noalias() = wt * cache.cols;
    cache.pre.colwise() += p.at(name + ".bias").col(0);
    check_finite(cache.pre, name);
    Mat<T> out = detail::swish(cache.pre);
    caches.push_back(std::move(cache));
    return out;
  }

  static Mat<T> conv_act_backward(const Params<T>& p, Params<T>& g, const std::string& name,
                                  const ConvCache<T>& cache, const Mat<T>& dy, Eigen::Index h, Eigen::Index w,
                                  bool need_input_grad = true) {
    const Mat<T> dpre = detail::swish_backward(cache.pre, dy);
    g.at(name + ".weight").noalias() += dpre * cache.cols.transpose();
    g.at(name + ".bias") += dpre.rowwise().sum();
    if (!need_input_grad) return {};
    const Mat<T>& wt = p.at(name + ".weight");
    const Mat<T> dcols = wt.transpose() * dpre;
    return detail::col2im3(dcols, wt.cols() / 9, h, w);
  }

  static Mat<T> maxpool(const Mat<T>& in, Eigen::Index h, Eigen::Index w, std::vector<Eigen::Index>& argmax) {
    const Eigen::Index oh = h / 2, ow = w / 2;
    Mat<T> out(in.rows(), oh * ow);
    argmax.resize(static_cast<std::size_t>(in.rows() * oh * ow));
    for (Eigen::Index c = 0; c < in.rows(); ++c)
      for (Eigen::Index y = 0; y < oh; ++y)
        for (Eigen::Index x = 0; x < ow; ++x) {
          Eigen::Index best = (2 * y) * w + 2 * x;
          for (Eigen::Index k : {(2 * y) * w + 2 * x + 1, (2 * y + 1) * w + 2 * x, (2 * y + 1) * w + 2 * x + 1})
            if (in(c, k) > in(c, best)) best = k;
          out(c, y * ow + x) = in(c, best);
          argmax[static_cast<std::size_t>(c * oh * ow + y * ow + x)] = best;
        }
    return out;
  }

  static void maxpool_backward(const Mat<T>& dout, const std::vector<Eigen::Index>& argmax, Mat<T>& din) {
    const Eigen::Index n = dout.cols();
    for (Eigen::Index c = 0; c < dout.rows(); ++c)
      for (Eigen::Index i = 0; i < n; ++i) din(c, argmax[static_cast<std::size_t>(c * n + i)]) += dout(c, i);
  }

  static Mat<T> upsample(const Mat<T>& in, Eigen::Index h, Eigen::Index w) {
    Mat<T> out(in.rows(), 4 * h * w);
    const Eigen::Index ow = 2 * w;
    for (Eigen::Index c = 0; c < in.rows(); ++c)
      for (Eigen::Index y = 0; y < 2 * h; ++y)
        for (Eigen::Index x = 0; x < ow; ++x) out(c, y * ow + x) = in(c, (y / 2) * w + x / 2);
    return out;
  }

  /// `dout` lives at (h, w); returns the gradient at (h/2, w/2).
  static Mat<T> upsample_backward(const Mat<T>& dout, Eigen::Index h, Eigen::Index w) {
    const Eigen::Index ih = h / 2, iw = w / 2;
    Mat<T> din = Mat<T>::Zero(dout.rows(), ih * iw);
    for (Eigen::Index c = 0; c < dout.rows(); ++c)
      for (Eigen::Index y = 0; y < h; ++y)
        for (Eigen::Index x = 0; x < w; ++x) din(c, (y / 2) * iw + x / 2) += dout(c, y * w + x);
    return din;
  }

  ModelConfig cfg_;
};

}  // namespace madc

#endif  // MADC_NET_HPP

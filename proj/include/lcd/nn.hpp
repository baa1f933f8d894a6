#pragma once
// Minimal training engine: conv/relu/upsample/linear layers with explicit
// backward passes, a parameter-free correlation layer, Adam/SGD, and a
// weighted BCE-with-logits loss. Convolutions run as im2col + Eigen GEMM.
// All gradients are analytic; the test suite checks them against central
// finite differences.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lcd/hash.hpp"
#include "lcd/rng.hpp"
#include "lcd/tensor.hpp"

namespace lcd::nn {

// --------------------------------------------------------------- parameters

template <typename S>
struct Param {
  std::string name;
  std::vector<S>* value = nullptr;
  std::vector<S>* grad = nullptr;
};

template <typename S>
inline std::string checksum(const std::vector<Param<S>>& params) {
  Fnv1a h;
  for (const auto& p : params) h.update(p.value->data(), p.value->size() * sizeof(S));
  return h.hex();
}

template <typename S>
inline void zero_grads(std::vector<Param<S>>& params) {
  for (auto& p : params) std::fill(p.grad->begin(), p.grad->end(), S(0));
}

// ------------------------------------------------------------------- layers

template <typename S>
struct ConvCache {
  int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  MatR<S> cols;  // (in_c*k*k) x (out_h*out_w)
};

template <typename S>
struct Conv2d {
  int in_c = 0, out_c = 0, k = 3, stride = 1, pad = 1;
  std::vector<S> weight;  // row-major out_c x (in_c*k*k)
  std::vector<S> bias;
  std::vector<S> gweight;
  std::vector<S> gbias;

  Conv2d() = default;
  Conv2d(int ic, int oc, int kernel, int stride_, int pad_)
      : in_c(ic), out_c(oc), k(kernel), stride(stride_), pad(pad_) {
    size_t wn = static_cast<size_t>(oc) * ic * kernel * kernel;
    weight.assign(wn, S(0));
    gweight.assign(wn, S(0));
    bias.assign(static_cast<size_t>(oc), S(0));
    gbias.assign(static_cast<size_t>(oc), S(0));
  }

  // He-normal weights; small uniform biases (exactly-zero biases leave ReLU
  // pre-activations sitting on the kink whenever a window is all zeros)
  void init_he(Rng& rng) {
    double std_dev = std::sqrt(2.0 / (in_c * k * k));
    for (auto& v : weight) v = static_cast<S>(rng.normal() * std_dev);
    double bound = 1.0 / std::sqrt(static_cast<double>(in_c) * k * k);
    for (auto& v : bias) v = static_cast<S>(rng.uniform(-bound, bound));
  }

  int cols_rows() const { return in_c * k * k; }
  int out_dim(int in) const { return (in + 2 * pad - k) / stride + 1; }

  Eigen::Map<const MatR<S>> wmat() const {
    return Eigen::Map<const MatR<S>>(weight.data(), out_c, cols_rows());
  }
  Eigen::Map<MatR<S>> gwmat() {
    return Eigen::Map<MatR<S>>(gweight.data(), out_c, cols_rows());
  }

  void im2col(const Tensor<S>& x, MatR<S>& cols, int oh, int ow) const {
    cols.setZero(cols_rows(), oh * ow);
    for (int ci = 0; ci < in_c; ++ci) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          int row = (ci * k + ky) * k + kx;
          for (int oy = 0; oy < oh; ++oy) {
            int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= x.h) continue;
            S* dst = cols.data() + (static_cast<size_t>(row) * oh + oy) * ow;
            const S* src = x.v.data() + (static_cast<size_t>(ci) * x.h + iy) * x.w;
            for (int ox = 0; ox < ow; ++ox) {
              int ix = ox * stride + kx - pad;
              if (ix >= 0 && ix < x.w) dst[ox] = src[ix];
            }
          }
        }
      }
    }
  }

  Tensor<S> forward(const Tensor<S>& x, ConvCache<S>& cache) const {
    int oh = out_dim(x.h), ow = out_dim(x.w);
    cache.in_h = x.h;
    cache.in_w = x.w;
    cache.out_h = oh;
    cache.out_w = ow;
    im2col(x, cache.cols, oh, ow);
    Tensor<S> y(out_c, oh, ow);
    y.mat().noalias() = wmat() * cache.cols;
    for (int co = 0; co < out_c; ++co) y.mat().row(co).array() += bias[static_cast<size_t>(co)];
    return y;
  }

  // Inference-only path; no cache retained.
  Tensor<S> forward(const Tensor<S>& x) const {
    ConvCache<S> cache;
    return forward(x, cache);
  }

  // Accumulates weight/bias grads; returns grad w.r.t. the input.
  // Reductions are explicit loops: Eigen's vectorized sums split at the
  // runtime pointer alignment, which breaks bit-reproducibility across
  // allocations.
  Tensor<S> backward(const Tensor<S>& gy, const ConvCache<S>& cache) {
    gwmat().noalias() += gy.mat() * cache.cols.transpose();
    const int n = gy.plane();
    for (int co = 0; co < out_c; ++co) {
      const S* row = gy.v.data() + static_cast<size_t>(co) * n;
      S acc = S(0);
      for (int i = 0; i < n; ++i) acc += row[i];
      gbias[static_cast<size_t>(co)] += acc;
    }
    MatR<S> gcols = wmat().transpose() * gy.mat();
    Tensor<S> gx(in_c, cache.in_h, cache.in_w);
    const int oh = cache.out_h, ow = cache.out_w;
    for (int ci = 0; ci < in_c; ++ci) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          int row = (ci * k + ky) * k + kx;
          for (int oy = 0; oy < oh; ++oy) {
            int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= cache.in_h) continue;
            const S* src = gcols.data() + (static_cast<size_t>(row) * oh + oy) * ow;
            S* dst = gx.v.data() + (static_cast<size_t>(ci) * cache.in_h + iy) * cache.in_w;
            for (int ox = 0; ox < ow; ++ox) {
              int ix = ox * stride + kx - pad;
              if (ix >= 0 && ix < cache.in_w) dst[ix] += src[ox];
            }
          }
        }
      }
    }
    return gx;
  }

  void collect_params(const std::string& prefix, std::vector<Param<S>>& out) {
    out.push_back({prefix + ".weight", &weight, &gweight});
    out.push_back({prefix + ".bias", &bias, &gbias});
  }

  size_t param_count() const { return weight.size() + bias.size(); }
};

template <typename S>
inline Tensor<S> relu(const Tensor<S>& x) {
  Tensor<S> y = x;
  for (auto& v : y.v) v = v > S(0) ? v : S(0);
  return y;
}

template <typename S>
inline Tensor<S> relu_backward(const Tensor<S>& gy, const Tensor<S>& y) {
  Tensor<S> gx = gy;
  for (size_t i = 0; i < gx.v.size(); ++i)
    if (y.v[i] <= S(0)) gx.v[i] = S(0);
  return gx;
}

template <typename S>
inline Tensor<S> upsample2(const Tensor<S>& x) {
  Tensor<S> y(x.c, x.h * 2, x.w * 2);
  for (int c = 0; c < x.c; ++c)
    for (int yy = 0; yy < y.h; ++yy)
      for (int xx = 0; xx < y.w; ++xx) y.at(c, yy, xx) = x.at(c, yy / 2, xx / 2);
  return y;
}

template <typename S>
inline Tensor<S> upsample2_backward(const Tensor<S>& gy) {
  Tensor<S> gx(gy.c, gy.h / 2, gy.w / 2);
  for (int c = 0; c < gy.c; ++c)
    for (int yy = 0; yy < gy.h; ++yy)
      for (int xx = 0; xx < gy.w; ++xx) gx.at(c, yy / 2, xx / 2) += gy.at(c, yy, xx);
  return gx;
}

// ------------------------------------------------------------- correlation
//
// out[k, y, x] = <A[:,y,x], B[:,y+dy,x+dx]> / C for the k-th displacement in
// row-major (dy, dx) order over [-d, d]^2; displaced samples outside B are 0.

inline int correlation_channels(int max_disp) {
  int s = 2 * max_disp + 1;
  return s * s;
}

template <typename S>
inline Tensor<S> correlation_forward(const Tensor<S>& a, const Tensor<S>& b, int max_disp) {
  if (a.c != b.c || a.h != b.h || a.w != b.w)
    fail(ErrorCode::invalid_input, "correlation: feature shape mismatch");
  const int d = max_disp, side = 2 * d + 1;
  Tensor<S> out(side * side, a.h, a.w);
  const S inv_c = S(1) / static_cast<S>(a.c);
  for (int dy = -d; dy <= d; ++dy) {
    for (int dx = -d; dx <= d; ++dx) {
      int kk = (dy + d) * side + (dx + d);
      for (int y = 0; y < a.h; ++y) {
        int by = y + dy;
        if (by < 0 || by >= a.h) continue;
        for (int x = 0; x < a.w; ++x) {
          int bx = x + dx;
          if (bx < 0 || bx >= a.w) continue;
          S acc = S(0);
          for (int c = 0; c < a.c; ++c) acc += a.at(c, y, x) * b.at(c, by, bx);
          out.at(kk, y, x) = acc * inv_c;
        }
      }
    }
  }
  return out;
}

template <typename S>
inline void correlation_backward(const Tensor<S>& g, const Tensor<S>& a, const Tensor<S>& b,
                                 int max_disp, Tensor<S>& ga, Tensor<S>& gb) {
  const int d = max_disp, side = 2 * d + 1;
  ga = Tensor<S>(a.c, a.h, a.w);
  gb = Tensor<S>(b.c, b.h, b.w);
  const S inv_c = S(1) / static_cast<S>(a.c);
  for (int dy = -d; dy <= d; ++dy) {
    for (int dx = -d; dx <= d; ++dx) {
      int kk = (dy + d) * side + (dx + d);
      for (int y = 0; y < a.h; ++y) {
        int by = y + dy;
        if (by < 0 || by >= a.h) continue;
        for (int x = 0; x < a.w; ++x) {
          int bx = x + dx;
          if (bx < 0 || bx >= a.w) continue;
          S gv = g.at(kk, y, x) * inv_c;
          for (int c = 0; c < a.c; ++c) {
            ga.at(c, y, x) += gv * b.at(c, by, bx);
            gb.at(c, by, bx) += gv * a.at(c, y, x);
          }
        }
      }
    }
  }
}

// ------------------------------------------------------- dense / pooling

template <typename S>
struct Linear {
  int in_n = 0, out_n = 0;
  std::vector<S> weight;  // row-major out_n x in_n
  std::vector<S> bias;
  std::vector<S> gweight;
  std::vector<S> gbias;

  Linear() = default;
  Linear(int in, int out) : in_n(in), out_n(out) {
    weight.assign(static_cast<size_t>(in) * out, S(0));
    gweight.assign(static_cast<size_t>(in) * out, S(0));
    bias.assign(static_cast<size_t>(out), S(0));
    gbias.assign(static_cast<size_t>(out), S(0));
  }

  void init_he(Rng& rng) {
    double std_dev = std::sqrt(2.0 / in_n);
    for (auto& v : weight) v = static_cast<S>(rng.normal() * std_dev);
  }

  std::vector<S> forward(const std::vector<S>& x) const {
    std::vector<S> y(static_cast<size_t>(out_n));
    for (int o = 0; o < out_n; ++o) {
      S acc = bias[static_cast<size_t>(o)];
      const S* wrow = weight.data() + static_cast<size_t>(o) * in_n;
      for (int i = 0; i < in_n; ++i) acc += wrow[i] * x[static_cast<size_t>(i)];
      y[static_cast<size_t>(o)] = acc;
    }
    return y;
  }

  std::vector<S> backward(const std::vector<S>& gy, const std::vector<S>& x) {
    std::vector<S> gx(static_cast<size_t>(in_n), S(0));
    for (int o = 0; o < out_n; ++o) {
      gbias[static_cast<size_t>(o)] += gy[static_cast<size_t>(o)];
      const S* wrow = weight.data() + static_cast<size_t>(o) * in_n;
      S* gwrow = gweight.data() + static_cast<size_t>(o) * in_n;
      for (int i = 0; i < in_n; ++i) {
        gwrow[i] += gy[static_cast<size_t>(o)] * x[static_cast<size_t>(i)];
        gx[static_cast<size_t>(i)] += wrow[i] * gy[static_cast<size_t>(o)];
      }
    }
    return gx;
  }

  void collect_params(const std::string& prefix, std::vector<Param<S>>& out) {
    out.push_back({prefix + ".weight", &weight, &gweight});
    out.push_back({prefix + ".bias", &bias, &gbias});
  }
};

template <typename S>
inline std::vector<S> global_avg_pool(const Tensor<S>& x) {
  std::vector<S> y(static_cast<size_t>(x.c));
  const S inv = S(1) / static_cast<S>(x.plane());
  const int n = x.plane();
  for (int c = 0; c < x.c; ++c) {
    const S* row = x.v.data() + static_cast<size_t>(c) * n;
    S acc = S(0);
    for (int i = 0; i < n; ++i) acc += row[i];  // fixed order, see Conv2d::backward
    y[static_cast<size_t>(c)] = acc * inv;
  }
  return y;
}

template <typename S>
inline Tensor<S> global_avg_pool_backward(const std::vector<S>& gy, int c, int h, int w) {
  Tensor<S> gx(c, h, w);
  const S inv = S(1) / static_cast<S>(h * w);
  for (int ci = 0; ci < c; ++ci) gx.mat().row(ci).setConstant(gy[static_cast<size_t>(ci)] * inv);
  return gx;
}

// --------------------------------------------------------------------- loss
//
// Stable BCE with logits. Each positive pixel carries weight `pos_weight`,
// negatives weight 1; `inv_norm` is the caller's 1/sum-of-weights over the
// whole batch so per-sample contributions just add up.

template <typename S>
inline double bce_with_logits(const Tensor<S>& logits, const ImageU8& mask, S pos_weight,
                              S inv_norm, Tensor<S>& gz) {
  gz = Tensor<S>(logits.c, logits.h, logits.w);
  double loss = 0.0;
  for (int y = 0; y < logits.h; ++y) {
    for (int x = 0; x < logits.w; ++x) {
      S z = logits.at(0, y, x);
      S t = mask.at(x, y) != 0 ? S(1) : S(0);
      S w = t > S(0) ? pos_weight : S(1);
      double zd = static_cast<double>(z);
      double bce = std::max(zd, 0.0) - zd * static_cast<double>(t) +
                   std::log1p(std::exp(-std::abs(zd)));
      loss += static_cast<double>(w) * bce * static_cast<double>(inv_norm);
      S sig = static_cast<S>(1.0 / (1.0 + std::exp(-zd)));
      gz.at(0, y, x) = w * (sig - t) * inv_norm;
    }
  }
  return loss;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// --------------------------------------------------------------- optimizers

template <typename S>
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(std::vector<Param<S>>& params) {
    if (m_.empty()) {
      m_.resize(params.size());
      v_.resize(params.size());
      for (size_t i = 0; i < params.size(); ++i) {
        m_[i].assign(params[i].value->size(), S(0));
        v_[i].assign(params[i].value->size(), S(0));
      }
    }
    ++t_;
    double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      auto& val = *params[i].value;
      auto& grd = *params[i].grad;
      for (size_t j = 0; j < val.size(); ++j) {
        double g = grd[j];
        double m = b1_ * m_[i][j] + (1.0 - b1_) * g;
        double v = b2_ * v_[i][j] + (1.0 - b2_) * g * g;
        m_[i][j] = static_cast<S>(m);
        v_[i][j] = static_cast<S>(v);
        val[j] -= static_cast<S>(lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_));
      }
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<std::vector<S>> m_, v_;
};

template <typename S>
class Sgd {
 public:
  explicit Sgd(double lr) : lr_(lr) {}

  void step(std::vector<Param<S>>& params) {
    for (auto& p : params) {
      auto& val = *p.value;
      auto& grd = *p.grad;
      for (size_t j = 0; j < val.size(); ++j) val[j] -= static_cast<S>(lr_ * grd[j]);
    }
  }

 private:
  double lr_;
};

}  // namespace lcd::nn

#pragma once
// CHW tensors with Eigen views. Scalar type is a template parameter: float for
// production training, double for finite-difference gradient tests.

#include <Eigen/Core>

#include <cstddef>
#include <vector>

#include "lcd/error.hpp"
#include "lcd/image.hpp"

namespace lcd::nn {

template <typename S>
using MatR = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<S> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_, S fill = S(0))
      : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, fill) {}

  size_t size() const { return v.size(); }
  int plane() const { return h * w; }

  S& at(int ch, int y, int x) { return v[(static_cast<size_t>(ch) * h + y) * w + x]; }
  const S& at(int ch, int y, int x) const {
    return v[(static_cast<size_t>(ch) * h + y) * w + x];
  }

  // channels-by-pixels view
  Eigen::Map<MatR<S>> mat() { return Eigen::Map<MatR<S>>(v.data(), c, plane()); }
  Eigen::Map<const MatR<S>> mat() const {
    return Eigen::Map<const MatR<S>>(v.data(), c, plane());
  }

  void zero() { std::fill(v.begin(), v.end(), S(0)); }
};

template <typename S>
inline Tensor<S> image_to_tensor(const ImageU8& img) {
  Tensor<S> t(img.channels, img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int ch = 0; ch < img.channels; ++ch)
        t.at(ch, y, x) = static_cast<S>(img.at(x, y, ch)) / S(255);
  return t;
}

template <typename S>
inline Tensor<S> image_to_tensor(const ImageF& img) {
  Tensor<S> t(img.channels, img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int ch = 0; ch < img.channels; ++ch) t.at(ch, y, x) = static_cast<S>(img.at(x, y, ch));
  return t;
}

template <typename S>
inline Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.h != b.h || a.w != b.w) fail(ErrorCode::invalid_input, "concat: spatial mismatch");
  Tensor<S> out(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

template <typename S>
inline void split_channels(const Tensor<S>& g, Tensor<S>& ga, Tensor<S>& gb) {
  std::copy(g.v.begin(), g.v.begin() + static_cast<std::ptrdiff_t>(ga.size()), ga.v.begin());
  std::copy(g.v.begin() + static_cast<std::ptrdiff_t>(ga.size()), g.v.end(), gb.v.begin());
}

// Edge-replicated pad on right/bottom so H and W become multiples of `factor`.
template <typename S>
inline Tensor<S> pad_to_multiple(const Tensor<S>& t, int factor, int& orig_h, int& orig_w) {
  orig_h = t.h;
  orig_w = t.w;
  int ph = (t.h + factor - 1) / factor * factor;
  int pw = (t.w + factor - 1) / factor * factor;
  if (ph == t.h && pw == t.w) return t;
  Tensor<S> out(t.c, ph, pw);
  for (int ch = 0; ch < t.c; ++ch)
    for (int y = 0; y < ph; ++y)
      for (int x = 0; x < pw; ++x)
        out.at(ch, y, x) = t.at(ch, std::min(y, t.h - 1), std::min(x, t.w - 1));
  return out;
}

}  // namespace lcd::nn

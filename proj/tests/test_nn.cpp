#include <catch2/catch.hpp>

#include <functional>

#include "lcd/nn.hpp"
#include "oracles.hpp"

using namespace lcd;
using nn::Tensor;

namespace {

Tensor<double> random_tensor(Rng& rng, int c, int h, int w, double scale = 1.0) {
  Tensor<double> t(c, h, w);
  for (auto& v : t.v) v = rng.uniform(-scale, scale);
  return t;
}

double weighted_sum(const Tensor<double>& y, const Tensor<double>& r) {
  double s = 0;
  for (size_t i = 0; i < y.v.size(); ++i) s += y.v[i] * r.v[i];
  return s;
}

// central finite difference of f at *p
double fd(std::function<double()> f, double* p, double h = 1e-6) {
  double orig = *p;
  *p = orig + h;
  double up = f();
  *p = orig - h;
  double down = f();
  *p = orig;
  return (up - down) / (2 * h);
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

}  // namespace

TEST_CASE("conv2d analytic gradients match finite differences") {
  for (int stride : {1, 2}) {
    Rng rng(5 + stride);
    nn::Conv2d<double> conv(3, 4, 3, stride, 1);
    conv.init_he(rng);
    Tensor<double> x = random_tensor(rng, 3, 8, 8);
    Tensor<double> r = random_tensor(rng, 4, conv.out_dim(8), conv.out_dim(8));

    auto loss = [&]() {
      nn::ConvCache<double> cache;
      return weighted_sum(conv.forward(x, cache), r);
    };

    nn::ConvCache<double> cache;
    conv.forward(x, cache);
    std::fill(conv.gweight.begin(), conv.gweight.end(), 0.0);
    std::fill(conv.gbias.begin(), conv.gbias.end(), 0.0);
    Tensor<double> gx = conv.backward(r, cache);

    Rng pick(7);
    for (int k = 0; k < 12; ++k) {
      size_t wi = pick.next_below(conv.weight.size());
      REQUIRE(rel_err(conv.gweight[wi], fd(loss, &conv.weight[wi])) < 1e-6);
      size_t xi = pick.next_below(x.v.size());
      REQUIRE(rel_err(gx.v[xi], fd(loss, &x.v[xi])) < 1e-6);
    }
    REQUIRE(rel_err(conv.gbias[0], fd(loss, &conv.bias[0])) < 1e-6);
  }
}

TEST_CASE("correlation forward matches the brute-force oracle") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    int c = rng.uniform_int(1, 8), h = rng.uniform_int(2, 16), w = rng.uniform_int(2, 16);
    int d = rng.uniform_int(0, 2);
    Tensor<double> a = random_tensor(rng, c, h, w);
    Tensor<double> b = random_tensor(rng, c, h, w);
    Tensor<double> mine = nn::correlation_forward(a, b, d);
    Tensor<double> ref = oracles::brute_force_correlation(a, b, d);
    REQUIRE(mine.c == (2 * d + 1) * (2 * d + 1));
    for (size_t i = 0; i < mine.v.size(); ++i)
      REQUIRE(std::abs(mine.v[i] - ref.v[i]) < 1e-6);
  }
}

TEST_CASE("correlation backward matches finite differences") {
  Rng rng(13);
  Tensor<double> a = random_tensor(rng, 3, 5, 6);
  Tensor<double> b = random_tensor(rng, 3, 5, 6);
  int d = 1;
  Tensor<double> r = random_tensor(rng, 9, 5, 6);

  auto loss = [&]() { return weighted_sum(nn::correlation_forward(a, b, d), r); };

  Tensor<double> ga, gb;
  nn::correlation_backward(r, a, b, d, ga, gb);
  Rng pick(17);
  for (int k = 0; k < 10; ++k) {
    size_t ai = pick.next_below(a.v.size());
    REQUIRE(rel_err(ga.v[ai], fd(loss, &a.v[ai])) < 1e-6);
    size_t bi = pick.next_below(b.v.size());
    REQUIRE(rel_err(gb.v[bi], fd(loss, &b.v[bi])) < 1e-6);
  }
}

TEST_CASE("correlation rejects mismatched shapes") {
  Tensor<double> a(2, 4, 4), b(2, 4, 5);
  REQUIRE_THROWS_AS(nn::correlation_forward(a, b, 1), Error);
}

TEST_CASE("upsample2 backward is the transpose of forward") {
  Rng rng(19);
  Tensor<double> x = random_tensor(rng, 2, 3, 4);
  Tensor<double> r = random_tensor(rng, 2, 6, 8);
  auto loss = [&]() { return weighted_sum(nn::upsample2(x), r); };
  Tensor<double> gx = nn::upsample2_backward(r);
  for (size_t i = 0; i < x.v.size(); ++i) REQUIRE(rel_err(gx.v[i], fd(loss, &x.v[i])) < 1e-6);
}

TEST_CASE("linear and global average pool gradients") {
  Rng rng(23);
  nn::Linear<double> lin(6, 3);
  lin.init_he(rng);
  Tensor<double> x = random_tensor(rng, 6, 2, 2);
  std::vector<double> r = {0.3, -1.2, 0.7};

  auto loss = [&]() {
    auto pooled = nn::global_avg_pool(x);
    auto y = lin.forward(pooled);
    double s = 0;
    for (size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
    return s;
  };

  auto pooled = nn::global_avg_pool(x);
  std::fill(lin.gweight.begin(), lin.gweight.end(), 0.0);
  std::fill(lin.gbias.begin(), lin.gbias.end(), 0.0);
  auto gp = lin.backward(r, pooled);
  Tensor<double> gx = nn::global_avg_pool_backward(gp, 6, 2, 2);

  Rng pick(29);
  for (int k = 0; k < 8; ++k) {
    size_t wi = pick.next_below(lin.weight.size());
    REQUIRE(rel_err(lin.gweight[wi], fd(loss, &lin.weight[wi])) < 1e-6);
    size_t xi = pick.next_below(x.v.size());
    REQUIRE(rel_err(gx.v[xi], fd(loss, &x.v[xi])) < 1e-6);
  }
}

TEST_CASE("bce-with-logits gradient and value") {
  Rng rng(31);
  Tensor<double> logits = random_tensor(rng, 1, 4, 5, 2.0);
  ImageU8 mask(5, 4, 1, 0);
  mask.at(1, 1) = 255;
  mask.at(3, 2) = 255;
  double pos_w = 7.0;
  double inv_norm = 1.0 / (pos_w * 2 + 18);

  Tensor<double> gz;
  nn::bce_with_logits(logits, mask, pos_w, inv_norm, gz);
  auto loss = [&]() {
    Tensor<double> tmp;
    return nn::bce_with_logits(logits, mask, pos_w, inv_norm, tmp);
  };
  for (size_t i = 0; i < logits.v.size(); ++i)
    REQUIRE(rel_err(gz.v[i], fd(loss, &logits.v[i])) < 1e-6);

  // perfect confident prediction drives the loss toward zero
  Tensor<double> sharp(1, 4, 5);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) sharp.at(0, y, x) = mask.at(x, y) ? 30.0 : -30.0;
  Tensor<double> tmp;
  REQUIRE(nn::bce_with_logits(sharp, mask, pos_w, inv_norm, tmp) < 1e-9);
}

TEST_CASE("optimizers are deterministic across runs") {
  auto run = [](auto&& make_opt) {
    Rng rng(37);
    std::vector<float> w(64), g(64);
    for (auto& v : w) v = static_cast<float>(rng.uniform(-1, 1));
    std::vector<nn::Param<float>> ps = {{"w", &w, &g}};
    auto opt = make_opt();
    for (int it = 0; it < 50; ++it) {
      for (size_t i = 0; i < g.size(); ++i)
        g[i] = static_cast<float>(rng.uniform(-0.1, 0.1)) + w[i] * 0.01f;
      opt.step(ps);
    }
    Fnv1a hash;
    hash.update_vec(w);
    return hash.hex();
  };
  REQUIRE(run([] { return nn::Adam<float>(1e-3); }) == run([] { return nn::Adam<float>(1e-3); }));
  REQUIRE(run([] { return nn::Sgd<float>(1e-2); }) == run([] { return nn::Sgd<float>(1e-2); }));
}

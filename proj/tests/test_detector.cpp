#include <catch2/catch.hpp>

#include <filesystem>

#include "lcd/detector.hpp"
#include "oracles.hpp"

using namespace lcd;

namespace {

// <=1e4-parameter architecture for gradient checks
DetectorArch gradcheck_arch() {
  DetectorArch a;
  a.enc_widths = {2, 4, 4, 4};
  a.dec_widths = {4, 4, 4, 4};
  a.head_width = 2;
  a.max_disp = 1;
  return a;
}

std::vector<SamplePair> bright_square_set(int n, int side, uint64_t seed) {
  std::vector<SamplePair> out;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    ImageU8 bg(side, side, 3);
    for (auto& v : bg.data) v = static_cast<uint8_t>(40 + (rng.next_u64() % 40));
    SamplePair s;
    s.reference = bg;
    s.live = bg;
    s.mask = ImageU8(side, side, 1, 0);
    int sq = rng.uniform_int(4, 8);
    int x = rng.uniform_int(0, side - sq), y = rng.uniform_int(0, side - sq);
    for (int yy = y; yy < y + sq; ++yy)
      for (int xx = x; xx < x + sq; ++xx) {
        s.live.at(xx, yy, 0) = 230;
        s.live.at(xx, yy, 1) = 60;
        s.live.at(xx, yy, 2) = 60;
        s.mask.at(xx, yy) = 255;
      }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("build_model is deterministic under seed") {
  DetectorModel a = build_model(ArchScale::tiny, 2, 99);
  DetectorModel b = build_model(ArchScale::tiny, 2, 99);
  REQUIRE(a.encoder_checksum() == b.encoder_checksum());
  REQUIRE(a.decoder_checksum() == b.decoder_checksum());
  DetectorModel c = build_model(ArchScale::tiny, 2, 100);
  REQUIRE(a.encoder_checksum() != c.encoder_checksum());
}

TEST_CASE("tiny topology stays under one million parameters") {
  DetectorModel m = build_model(ArchScale::tiny, 2, 1);
  REQUIRE(m.net.param_count() < 1000000);
  DetectorNet<double> tiny_check(gradcheck_arch());
  REQUIRE(tiny_check.param_count() <= 10000);
}

TEST_CASE("correlation channel count and self-similarity argmax") {
  DetectorModel m = build_model(ArchScale::tiny, 0, 1);
  (void)m;
  REQUIRE(nn::correlation_channels(0) == 1);
  REQUIRE(nn::correlation_channels(2) == 25);

  // unit-norm feature columns: zero displacement wins everywhere inside
  Rng rng(3);
  nn::Tensor<double> a(4, 6, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      double norm = 0;
      double vals[4];
      for (int c = 0; c < 4; ++c) {
        vals[c] = rng.uniform(-1, 1);
        norm += vals[c] * vals[c];
      }
      norm = std::sqrt(norm);
      for (int c = 0; c < 4; ++c) a.at(c, y, x) = vals[c] / norm;
    }
  nn::Tensor<double> corr = correlation_layer(a, a, 1);
  for (int y = 1; y < 5; ++y)
    for (int x = 1; x < 5; ++x) {
      int best = 0;
      for (int k = 1; k < 9; ++k)
        if (corr.at(k, y, x) > corr.at(best, y, x)) best = k;
      REQUIRE(best == 4);  // (dy,dx) = (0,0)
    }

  // featB shifted right by one pixel: interior argmax lands on (0,+1)
  nn::Tensor<double> b(4, 6, 6);
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) b.at(c, y, x) = a.at(c, y, std::max(0, x - 1));
  nn::Tensor<double> corr2 = correlation_layer(a, b, 1);
  for (int y = 1; y < 5; ++y)
    for (int x = 1; x < 4; ++x) {
      int best = 0;
      for (int k = 1; k < 9; ++k)
        if (corr2.at(k, y, x) > corr2.at(best, y, x)) best = k;
      REQUIRE(best == 5);  // (dy,dx) = (0,+1)
    }
}

TEST_CASE("full detector gradients match central finite differences") {
  DetectorNet<double> net(gradcheck_arch());
  net.init(21);
  Rng rng(22);
  nn::Tensor<double> ref(3, 16, 16), live(3, 16, 16);
  for (auto& v : ref.v) v = rng.uniform(0, 1);
  for (auto& v : live.v) v = rng.uniform(0, 1);
  ImageU8 mask(16, 16, 1, 0);
  for (int i = 0; i < 30; ++i)
    mask.at(rng.uniform_int(0, 15), rng.uniform_int(0, 15)) = 255;
  const double pos_w = 4.0;
  const double inv_norm = 1.0 / 256.0;

  auto loss = [&]() {
    DetectorNet<double>::Trace tr;
    nn::Tensor<double> logits = net.forward(ref, live, tr);
    nn::Tensor<double> gz;
    return nn::bce_with_logits(logits, mask, pos_w, inv_norm, gz);
  };

  auto params = net.all_params();
  nn::zero_grads(params);
  DetectorNet<double>::Trace tr;
  nn::Tensor<double> logits = net.forward(ref, live, tr);
  nn::Tensor<double> gz;
  nn::bce_with_logits(logits, mask, pos_w, inv_norm, gz);
  net.backward(gz, tr);

  Rng pick(23);
  int checked = 0;
  while (checked < 20) {
    size_t ti = pick.next_below(params.size());
    size_t i = pick.next_below(params[ti].value->size());
    double analytic = (*params[ti].grad)[i];
    double* slot = &(*params[ti].value)[i];
    double orig = *slot;
    double h = 1e-6;  // small enough that ReLU kink crossings stay negligible
    *slot = orig + h;
    double up = loss();
    *slot = orig - h;
    double down = loss();
    *slot = orig;
    double numeric = (up - down) / (2 * h);
    if (std::abs(analytic) < 1e-12 && std::abs(numeric) < 1e-10) {
      ++checked;
      continue;
    }
    double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-12});
    INFO(params[ti].name << "[" << i << "] analytic=" << analytic << " numeric=" << numeric);
    REQUIRE(err <= 1e-3);
    ++checked;
  }
}

TEST_CASE("train contracts: empty data, zero iterations, freeze ordering") {
  DetectorModel m = build_model(ArchScale::tiny, 1, 5);
  TrainConfig cfg;
  cfg.iterations = 0;

  REQUIRE_THROWS_AS(train(m, {}, cfg), Error);

  auto data = bright_square_set(4, 32, 7);
  std::string before = m.encoder_checksum();
  train(m, data, cfg);
  REQUIRE(m.encoder_checksum() == before);
  REQUIRE(m.decoder_checksum() == build_model(ArchScale::tiny, 1, 5).decoder_checksum());

  cfg.freeze_encoder = true;
  cfg.iterations = 1;
  try {
    train(m, data, cfg);  // never trained: trained_once still false
    FAIL("expected lifecycle-order");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::lifecycle_order);
  }
}

TEST_CASE("freeze contract: encoder bits fixed, decoder moves") {
  DetectorModel m = build_model(ArchScale::tiny, 1, 9);
  auto data = bright_square_set(8, 32, 11);
  TrainConfig cfg;
  cfg.iterations = 12;
  cfg.batch = 2;
  cfg.rng_seed = 1;
  train(m, data, cfg);
  REQUIRE(m.trained_once);

  std::string enc = m.encoder_checksum();
  std::string dec = m.decoder_checksum();
  cfg.freeze_encoder = true;
  cfg.rng_seed = 2;
  train(m, data, cfg);
  REQUIRE(m.encoder_checksum() == enc);   // bit-identical
  REQUIRE(m.decoder_checksum() != dec);
}

TEST_CASE("training is deterministic under seed") {
  auto data = bright_square_set(8, 32, 13);
  TrainConfig cfg;
  cfg.iterations = 10;
  cfg.batch = 2;
  cfg.rng_seed = 77;
  DetectorModel a = build_model(ArchScale::tiny, 1, 15);
  DetectorModel b = build_model(ArchScale::tiny, 1, 15);
  train(a, data, cfg);
  train(b, data, cfg);
  REQUIRE(a.encoder_checksum() == b.encoder_checksum());
  REQUIRE(a.decoder_checksum() == b.decoder_checksum());
}

TEST_CASE("predict shape, range, and determinism") {
  DetectorModel m = build_model(ArchScale::tiny, 1, 17);
  ImageU8 ref(48, 36, 3, 100);  // not multiples of 16: exercises pad-and-crop
  ImageU8 live(48, 36, 3, 105);
  ProbabilityMap p1 = predict(m, ref, live);
  REQUIRE(p1.width == 48);
  REQUIRE(p1.height == 36);
  for (float v : p1.data) {
    REQUIRE(v >= 0.0f);
    REQUIRE(v <= 1.0f);
  }
  ProbabilityMap p2 = predict(m, ref, live);
  REQUIRE(p1 == p2);

  ImageU8 wrong(32, 36, 3, 0);
  REQUIRE_THROWS_AS(predict(m, ref, wrong), Error);
}

TEST_CASE("trained detector separates changed from unchanged pairs") {
  auto data = bright_square_set(24, 32, 19);
  DetectorModel m = build_model(ArchScale::tiny, 1, 23);
  TrainConfig cfg;
  cfg.iterations = 150;
  cfg.batch = 4;
  cfg.rng_seed = 3;
  TrainStats stats = train(m, data, cfg);
  REQUIRE(stats.last_decile_loss < stats.first_decile_loss);

  auto held = bright_square_set(6, 32, 29);
  double with_obj = 0.0, without_obj = 0.0;
  for (const auto& s : held) {
    ProbabilityMap pm = predict(m, s.reference, s.live);
    for (float v : pm.data) with_obj += v;
    ProbabilityMap pn = predict(m, s.reference, s.reference);
    for (float v : pn.data) without_obj += v;
  }
  REQUIRE(with_obj > without_obj);
}

TEST_CASE("self-fit sanity: tiny model reaches F >= 0.5 on its training set") {
  auto data = bright_square_set(48, 32, 31);
  DetectorModel m = build_model(ArchScale::tiny, 2, 37);
  TrainConfig cfg;
  cfg.iterations = 1200;
  cfg.batch = 8;
  cfg.rng_seed = 5;
  train(m, data, cfg);

  size_t tp = 0, fp = 0, fn = 0;
  for (const auto& s : data) {
    ProbabilityMap pm = predict(m, s.reference, s.live);
    for (int y = 0; y < pm.height; ++y)
      for (int x = 0; x < pm.width; ++x) {
        bool pred = pm.at(x, y) >= 0.5f;
        bool gt = s.mask.at(x, y) != 0;
        tp += pred && gt;
        fp += pred && !gt;
        fn += !pred && gt;
      }
  }
  double precision = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
  double recall = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
  double f = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  INFO("train F = " << f);
  REQUIRE(f >= 0.5);
}

TEST_CASE("binarize_and_extract component semantics") {
  ImageU8 live(20, 16, 3, 90);

  ProbabilityMap zero(20, 16, 1, 0.0f);
  REQUIRE(binarize_and_extract(zero, live, 0.5, 1).empty());

  ProbabilityMap blobs(20, 16, 1, 0.0f);
  for (int y = 2; y < 7; ++y)
    for (int x = 2; x < 7; ++x) blobs.at(x, y) = 1.0f;
  for (int y = 9; y < 14; ++y)
    for (int x = 12; x < 17; ++x) blobs.at(x, y) = 1.0f;
  auto dets = binarize_and_extract(blobs, live, 0.5, 1, "frame0");
  REQUIRE(dets.size() == 2);
  for (const auto& d : dets) {
    REQUIRE(d.area_px == 25);
    REQUIRE(d.w == 5);
    REQUIRE(d.h == 5);
    REQUIRE(d.score == Approx(1.0));
    REQUIRE(d.frame_id == "frame0");
  }

  // min_area filtering
  REQUIRE(binarize_and_extract(blobs, live, 0.5, 26).empty());

  REQUIRE_THROWS_AS(binarize_and_extract(blobs, live, 1.5, 1), Error);
}

TEST_CASE("component count equals the flood-fill oracle on random maps") {
  Rng rng(41);
  for (int rep = 0; rep < 20; ++rep) {
    int w = rng.uniform_int(8, 40), h = rng.uniform_int(8, 40);
    ProbabilityMap pm(w, h, 1);
    for (auto& v : pm.data) v = static_cast<float>(rng.uniform());
    ImageU8 live(w, h, 3, 50);
    auto dets = binarize_and_extract(pm, live, 0.5, 1);

    ImageU8 binary(w, h, 1, 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) binary.at(x, y) = pm.at(x, y) >= 0.5f ? 255 : 0;
    REQUIRE(static_cast<int>(dets.size()) == oracles::flood_fill_components(binary));

    size_t total_area = 0;
    for (const auto& d : dets) total_area += d.area_px;
    REQUIRE(total_area == count_nonzero(binary));
  }
}

TEST_CASE("detector checkpoints round trip with checksums") {
  DetectorModel m = build_model(ArchScale::tiny, 2, 51);
  auto data = bright_square_set(4, 32, 53);
  TrainConfig cfg;
  cfg.iterations = 5;
  cfg.batch = 2;
  train(m, data, cfg);

  auto dir = std::filesystem::temp_directory_path() / "lcd_detector_io";
  std::filesystem::remove_all(dir);
  save_detector(dir, m, &cfg);
  DetectorModel back = load_detector(dir);
  REQUIRE(back.encoder_checksum() == m.encoder_checksum());
  REQUIRE(back.decoder_checksum() == m.decoder_checksum());
  REQUIRE(back.trained_once == m.trained_once);

  ImageU8 ref(32, 32, 3, 80), live(32, 32, 3, 120);
  REQUIRE(predict(back, ref, live) == predict(m, ref, live));
  std::filesystem::remove_all(dir);
}

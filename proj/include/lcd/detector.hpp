#pragma once
// Siamese correlation change detector. One shared convolutional encoder runs
// over both frames, a parameter-free correlation layer compares the deepest
// features within a +/-d window, and a decoder with skip connections from the
// reference branch upsamples back to a full-resolution change probability
// map. The encoder parameter group can be frozen for retraining generations.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lcd/compositor.hpp"
#include "lcd/error.hpp"
#include "lcd/image.hpp"
#include "lcd/knowledge_base.hpp"
#include "lcd/model_io.hpp"
#include "lcd/nn.hpp"
#include "lcd/rng.hpp"

namespace lcd {

enum class ArchScale { tiny, small };

inline const char* to_string(ArchScale s) { return s == ArchScale::tiny ? "tiny" : "small"; }

struct DetectorArch {
  int in_channels = 3;
  std::vector<int> enc_widths = {16, 32, 64, 64};  // four stride-2 blocks
  std::vector<int> dec_widths = {64, 32, 16, 16};
  int head_width = 8;
  int max_disp = 2;
};

inline DetectorArch arch_for(ArchScale scale, int max_disp) {
  if (max_disp < 0) fail(ErrorCode::invalid_config, "correlation max_disp must be >= 0");
  DetectorArch a;
  a.max_disp = max_disp;
  if (scale == ArchScale::small) {
    a.enc_widths = {24, 48, 96, 96};
    a.dec_widths = {96, 48, 24, 24};
    a.head_width = 12;
  }
  return a;
}

// Spec'd cost-volume contract, exposed at module level (see nn:: for the
// backward pass): out[k,y,x] = <A[:,y,x], B[:,y+dy,x+dx]>/C, zero-padded.
template <typename S>
inline nn::Tensor<S> correlation_layer(const nn::Tensor<S>& feat_a, const nn::Tensor<S>& feat_b,
                                       int max_disp) {
  return nn::correlation_forward(feat_a, feat_b, max_disp);
}

template <typename S>
struct DetectorNet {
  DetectorArch arch;
  nn::Conv2d<S> e1, e2, e3, e4;          // shared Siamese encoder
  nn::Conv2d<S> d1, d2, d3, d4, h1, h2;  // decoder + head

  explicit DetectorNet(const DetectorArch& a = {}) : arch(a) {
    const auto& ew = a.enc_widths;
    const auto& dw = a.dec_widths;
    int corr_c = nn::correlation_channels(a.max_disp);
    e1 = nn::Conv2d<S>(a.in_channels, ew[0], 3, 2, 1);
    e2 = nn::Conv2d<S>(ew[0], ew[1], 3, 2, 1);
    e3 = nn::Conv2d<S>(ew[1], ew[2], 3, 2, 1);
    e4 = nn::Conv2d<S>(ew[2], ew[3], 3, 2, 1);
    // skips concatenate both Siamese streams at every level, as in the
    // correlated-Siamese backbone; reference-only skips cannot resolve
    // live-only objects above the correlation resolution
    d1 = nn::Conv2d<S>(corr_c + 2 * ew[3], dw[0], 3, 1, 1);
    d2 = nn::Conv2d<S>(dw[0] + 2 * ew[2], dw[1], 3, 1, 1);
    d3 = nn::Conv2d<S>(dw[1] + 2 * ew[1], dw[2], 3, 1, 1);
    d4 = nn::Conv2d<S>(dw[2] + 2 * ew[0], dw[3], 3, 1, 1);
    h1 = nn::Conv2d<S>(dw[3], a.head_width, 3, 1, 1);
    h2 = nn::Conv2d<S>(a.head_width, 1, 1, 1, 0);
  }

  void init(uint64_t seed) {
    Rng rng(derive_seed(seed, "detector-init"));
    for (auto* c : {&e1, &e2, &e3, &e4, &d1, &d2, &d3, &d4, &h1, &h2}) c->init_he(rng);
  }

  std::vector<nn::Param<S>> encoder_params() {
    std::vector<nn::Param<S>> ps;
    e1.collect_params("e1", ps);
    e2.collect_params("e2", ps);
    e3.collect_params("e3", ps);
    e4.collect_params("e4", ps);
    return ps;
  }

  std::vector<nn::Param<S>> decoder_params() {
    std::vector<nn::Param<S>> ps;
    d1.collect_params("d1", ps);
    d2.collect_params("d2", ps);
    d3.collect_params("d3", ps);
    d4.collect_params("d4", ps);
    h1.collect_params("h1", ps);
    h2.collect_params("h2", ps);
    return ps;
  }

  std::vector<nn::Param<S>> all_params() {
    auto ps = encoder_params();
    auto dec = decoder_params();
    ps.insert(ps.end(), dec.begin(), dec.end());
    return ps;
  }

  size_t param_count() {
    size_t n = 0;
    for (const auto& p : all_params()) n += p.value->size();
    return n;
  }

  struct Trace {
    nn::ConvCache<S> ka1, ka2, ka3, ka4, kb1, kb2, kb3, kb4;
    nn::ConvCache<S> kd1, kd2, kd3, kd4, kh1, kh2;
    nn::Tensor<S> fa1, fa2, fa3, fa4, fb1, fb2, fb3, fb4;
    nn::Tensor<S> x4, x3, x2, x1, x0;
  };

  // Inputs are CHW tensors with H, W multiples of 16.
  nn::Tensor<S> forward(const nn::Tensor<S>& ref, const nn::Tensor<S>& live, Trace& t) const {
    t.fa1 = nn::relu(e1.forward(ref, t.ka1));
    t.fa2 = nn::relu(e2.forward(t.fa1, t.ka2));
    t.fa3 = nn::relu(e3.forward(t.fa2, t.ka3));
    t.fa4 = nn::relu(e4.forward(t.fa3, t.ka4));
    t.fb1 = nn::relu(e1.forward(live, t.kb1));
    t.fb2 = nn::relu(e2.forward(t.fb1, t.kb2));
    t.fb3 = nn::relu(e3.forward(t.fb2, t.kb3));
    t.fb4 = nn::relu(e4.forward(t.fb3, t.kb4));

    nn::Tensor<S> corr = nn::correlation_forward(t.fa4, t.fb4, arch.max_disp);
    auto cat3 = [](const nn::Tensor<S>& a, const nn::Tensor<S>& b, const nn::Tensor<S>& c) {
      return nn::concat_channels(nn::concat_channels(a, b), c);
    };
    t.x4 = nn::relu(d1.forward(cat3(corr, t.fa4, t.fb4), t.kd1));
    t.x3 = nn::relu(d2.forward(cat3(nn::upsample2(t.x4), t.fa3, t.fb3), t.kd2));
    t.x2 = nn::relu(d3.forward(cat3(nn::upsample2(t.x3), t.fa2, t.fb2), t.kd3));
    t.x1 = nn::relu(d4.forward(cat3(nn::upsample2(t.x2), t.fa1, t.fb1), t.kd4));
    t.x0 = nn::relu(h1.forward(nn::upsample2(t.x1), t.kh1));
    return h2.forward(t.x0, t.kh2);
  }

  // Accumulates parameter gradients for one sample.
  void backward(const nn::Tensor<S>& glogits, Trace& t) {
    nn::Tensor<S> g = h2.backward(glogits, t.kh2);
    g = h1.backward(nn::relu_backward(g, t.x0), t.kh1);
    g = nn::upsample2_backward(g);

    // splits concat(front, skipA, skipB) gradients back into the three parts
    auto split3 = [](const nn::Tensor<S>& gc, int front_c, int skip_c, nn::Tensor<S>& gfront,
                     nn::Tensor<S>& gska, nn::Tensor<S>& gskb) {
      gfront = nn::Tensor<S>(front_c, gc.h, gc.w);
      gska = nn::Tensor<S>(skip_c, gc.h, gc.w);
      gskb = nn::Tensor<S>(skip_c, gc.h, gc.w);
      auto it = gc.v.begin();
      std::copy(it, it + static_cast<std::ptrdiff_t>(gfront.size()), gfront.v.begin());
      it += static_cast<std::ptrdiff_t>(gfront.size());
      std::copy(it, it + static_cast<std::ptrdiff_t>(gska.size()), gska.v.begin());
      it += static_cast<std::ptrdiff_t>(gska.size());
      std::copy(it, gc.v.end(), gskb.v.begin());
    };

    nn::Tensor<S> gfront, ga1, ga2, ga3, ga4_skip, gb1, gb2, gb3, gb4_skip;
    nn::Tensor<S> gc = d4.backward(nn::relu_backward(g, t.x1), t.kd4);
    split3(gc, arch.dec_widths[2], arch.enc_widths[0], gfront, ga1, gb1);
    g = nn::upsample2_backward(gfront);
    gc = d3.backward(nn::relu_backward(g, t.x2), t.kd3);
    split3(gc, arch.dec_widths[1], arch.enc_widths[1], gfront, ga2, gb2);
    g = nn::upsample2_backward(gfront);
    gc = d2.backward(nn::relu_backward(g, t.x3), t.kd2);
    split3(gc, arch.dec_widths[0], arch.enc_widths[2], gfront, ga3, gb3);
    g = nn::upsample2_backward(gfront);
    gc = d1.backward(nn::relu_backward(g, t.x4), t.kd1);
    nn::Tensor<S> gcorr;
    split3(gc, nn::correlation_channels(arch.max_disp), arch.enc_widths[3], gcorr, ga4_skip,
           gb4_skip);

    nn::Tensor<S> ga4, gb4;
    nn::correlation_backward(gcorr, t.fa4, t.fb4, arch.max_disp, ga4, gb4);
    for (size_t i = 0; i < ga4.v.size(); ++i) ga4.v[i] += ga4_skip.v[i];
    for (size_t i = 0; i < gb4.v.size(); ++i) gb4.v[i] += gb4_skip.v[i];

    // both branches feed the shared encoder: correlation plus their skips
    nn::Tensor<S> gx = e4.backward(nn::relu_backward(ga4, t.fa4), t.ka4);
    for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += ga3.v[i];
    gx = e3.backward(nn::relu_backward(gx, t.fa3), t.ka3);
    for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += ga2.v[i];
    gx = e2.backward(nn::relu_backward(gx, t.fa2), t.ka2);
    for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += ga1.v[i];
    e1.backward(nn::relu_backward(gx, t.fa1), t.ka1);

    gx = e4.backward(nn::relu_backward(gb4, t.fb4), t.kb4);
    for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += gb3.v[i];
    gx = e3.backward(nn::relu_backward(gx, t.fb3), t.kb3);
    for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += gb2.v[i];
    gx = e2.backward(nn::relu_backward(gx, t.fb2), t.kb2);
    for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += gb1.v[i];
    e1.backward(nn::relu_backward(gx, t.fb1), t.kb1);
  }
};

struct DetectorModel {
  DetectorNet<float> net;
  ArchScale scale = ArchScale::tiny;
  uint64_t seed = 0;
  bool trained_once = false;

  std::string encoder_checksum() {
    auto ps = net.encoder_params();
    return nn::checksum(ps);
  }
  std::string decoder_checksum() {
    auto ps = net.decoder_params();
    return nn::checksum(ps);
  }
};

inline DetectorModel build_model(ArchScale scale, int correlation_max_disp, uint64_t rng_seed) {
  DetectorModel m;
  m.scale = scale;
  m.seed = rng_seed;
  m.net = DetectorNet<float>(arch_for(scale, correlation_max_disp));
  m.net.init(rng_seed);
  return m;
}

// ------------------------------------------------------------------ training

enum class Optimizer { adam, sgd };

struct TrainConfig {
  int iterations = 3000;
  double lr = 1e-4;
  int batch = 8;
  Optimizer optimizer = Optimizer::adam;
  bool freeze_encoder = false;
  uint64_t rng_seed = 0;
};

struct TrainStats {
  double first_decile_loss = 0.0;
  double last_decile_loss = 0.0;
  std::string encoder_checksum_before, encoder_checksum_after;
};

namespace detector_detail {

template <typename S>
inline void pad_sample(const SamplePair& s, nn::Tensor<S>& ref, nn::Tensor<S>& live,
                       ImageU8& mask) {
  int oh = 0, ow = 0;
  ref = nn::pad_to_multiple(nn::image_to_tensor<S>(s.reference), 16, oh, ow);
  live = nn::pad_to_multiple(nn::image_to_tensor<S>(s.live), 16, oh, ow);
  if (ref.h == s.mask.height && ref.w == s.mask.width) {
    mask = s.mask;
  } else {
    mask = ImageU8(ref.w, ref.h, 1, 0);  // zero-padded labels
    for (int y = 0; y < s.mask.height; ++y)
      for (int x = 0; x < s.mask.width; ++x) mask.at(x, y) = s.mask.at(x, y);
  }
}

}  // namespace detector_detail

// Pixelwise weighted BCE training. Positive pixels are upweighted by the
// batch negative/positive ratio clamped to [1,100]; the encoder group is
// skipped entirely when cfg.freeze_encoder is set.
inline TrainStats train(DetectorModel& model, const std::vector<SamplePair>& data,
                        const TrainConfig& cfg) {
  if (data.empty()) fail(ErrorCode::insufficient_data, "no training samples");
  if (cfg.freeze_encoder && !model.trained_once)
    fail(ErrorCode::lifecycle_order, "cannot freeze the encoder of a never-trained model");
  if (cfg.lr <= 0.0) fail(ErrorCode::invalid_config, "learning rate must be positive");
  if (cfg.batch < 1) fail(ErrorCode::invalid_config, "batch must be >= 1");

  TrainStats stats;
  stats.encoder_checksum_before = model.encoder_checksum();
  if (cfg.iterations == 0) {
    stats.encoder_checksum_after = stats.encoder_checksum_before;
    return stats;
  }

  auto trainable = cfg.freeze_encoder ? model.net.decoder_params() : model.net.all_params();
  auto all = model.net.all_params();  // grads accumulate everywhere; updates only on trainable
  nn::Adam<float> adam(cfg.lr);
  nn::Sgd<float> sgd(cfg.lr);

  Rng rng(derive_seed(cfg.rng_seed, "detector-train"));
  int decile = std::max(1, cfg.iterations / 10);
  double first_sum = 0.0, last_sum = 0.0;
  int first_n = 0, last_n = 0;

  std::vector<size_t> batch_idx(static_cast<size_t>(cfg.batch));
  for (int it = 0; it < cfg.iterations; ++it) {
    for (auto& bi : batch_idx) bi = rng.next_below(data.size());

    // batch-level class balance
    size_t pos = 0, neg = 0;
    for (size_t bi : batch_idx) {
      size_t p = count_nonzero(data[bi].mask);
      pos += p;
      neg += data[bi].mask.pixel_count() - p;
    }
    float pos_weight =
        pos == 0 ? 1.0f
                 : static_cast<float>(std::clamp(
                       static_cast<double>(neg) / static_cast<double>(pos), 1.0, 100.0));
    float inv_norm = 1.0f / (pos_weight * static_cast<float>(pos) + static_cast<float>(neg));

    nn::zero_grads(all);

    double loss = 0.0;
    for (size_t bi : batch_idx) {
      nn::Tensor<float> ref, live;
      ImageU8 mask;
      detector_detail::pad_sample(data[bi], ref, live, mask);
      DetectorNet<float>::Trace tr;
      nn::Tensor<float> logits = model.net.forward(ref, live, tr);
      nn::Tensor<float> gz;
      loss += nn::bce_with_logits(logits, mask, pos_weight, inv_norm, gz);
      model.net.backward(gz, tr);
    }
    if (cfg.optimizer == Optimizer::adam)
      adam.step(trainable);
    else
      sgd.step(trainable);

    if (it < decile) {
      first_sum += loss;
      ++first_n;
    }
    if (it >= cfg.iterations - decile) {
      last_sum += loss;
      ++last_n;
    }
  }
  stats.first_decile_loss = first_sum / std::max(1, first_n);
  stats.last_decile_loss = last_sum / std::max(1, last_n);
  model.trained_once = true;
  stats.encoder_checksum_after = model.encoder_checksum();
  return stats;
}

// ----------------------------------------------------------------- inference

using ProbabilityMap = ImageF;  // single channel, values in [0,1]

inline ProbabilityMap predict(const DetectorModel& model, const ImageU8& reference,
                              const ImageU8& live) {
  if (reference.width != live.width || reference.height != live.height)
    fail(ErrorCode::invalid_input, "reference/live dimensions differ");
  int oh = 0, ow = 0;
  nn::Tensor<float> ref = nn::pad_to_multiple(nn::image_to_tensor<float>(reference), 16, oh, ow);
  nn::Tensor<float> liv = nn::pad_to_multiple(nn::image_to_tensor<float>(live), 16, oh, ow);
  DetectorNet<float>::Trace tr;
  nn::Tensor<float> logits = model.net.forward(ref, liv, tr);
  ProbabilityMap out(ow, oh, 1);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      out.at(x, y) = static_cast<float>(nn::sigmoid(logits.at(0, y, x)));
  return out;
}

// 8-connected components of (pmap >= threshold) with area >= min_area become
// Detection records; score is the mean probability over the component.
inline std::vector<Detection> binarize_and_extract(const ProbabilityMap& pmap,
                                                   const ImageU8& live, double threshold,
                                                   size_t min_area,
                                                   const std::string& frame_id = "") {
  if (threshold < 0.0 || threshold > 1.0)
    fail(ErrorCode::invalid_input, "threshold must lie in [0,1]");
  if (pmap.width != live.width || pmap.height != live.height)
    fail(ErrorCode::invalid_input, "probability map and live frame dimensions differ");

  const int w = pmap.width, h = pmap.height;
  std::vector<int> label(static_cast<size_t>(w) * h, -1);
  auto hot = [&](int x, int y) { return pmap.at(x, y) >= static_cast<float>(threshold); };

  std::vector<Detection> out;
  std::deque<std::pair<int, int>> queue;
  int next_label = 0;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (!hot(x0, y0) || label[static_cast<size_t>(y0) * w + x0] >= 0) continue;
      int id = next_label++;
      queue.clear();
      queue.emplace_back(x0, y0);
      label[static_cast<size_t>(y0) * w + x0] = id;
      std::vector<std::pair<int, int>> pixels;
      double score_sum = 0.0;
      int bx0 = x0, by0 = y0, bx1 = x0, by1 = y0;
      while (!queue.empty()) {
        auto [x, y] = queue.front();
        queue.pop_front();
        pixels.emplace_back(x, y);
        score_sum += pmap.at(x, y);
        bx0 = std::min(bx0, x);
        by0 = std::min(by0, y);
        bx1 = std::max(bx1, x);
        by1 = std::max(by1, y);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            size_t idx = static_cast<size_t>(ny) * w + nx;
            if (hot(nx, ny) && label[idx] < 0) {
              label[idx] = id;
              queue.emplace_back(nx, ny);
            }
          }
      }
      if (pixels.size() < min_area) continue;
      Detection d;
      d.frame_id = frame_id;
      d.x = bx0;
      d.y = by0;
      d.w = bx1 - bx0 + 1;
      d.h = by1 - by0 + 1;
      d.mask_crop = ImageU8(d.w, d.h, 1, 0);
      for (auto [x, y] : pixels) d.mask_crop.at(x - bx0, y - by0) = 255;
      d.color_crop = crop(live, bx0, by0, d.w, d.h);
      d.area_px = pixels.size();
      d.score = score_sum / static_cast<double>(pixels.size());
      out.push_back(std::move(d));
    }
  }
  return out;
}

// ------------------------------------------------------------------- storage
// Checkpoints carry per-group checksums: the freeze-audit trail.

inline void save_detector(const std::filesystem::path& dir, DetectorModel& model,
                          const TrainConfig* cfg = nullptr) {
  auto ps = model.net.all_params();
  nn::save_params(dir / "model.bin", ps);
  nlohmann::json j;
  j["scale"] = to_string(model.scale);
  j["max_disp"] = model.net.arch.max_disp;
  j["enc_widths"] = model.net.arch.enc_widths;
  j["dec_widths"] = model.net.arch.dec_widths;
  j["head_width"] = model.net.arch.head_width;
  j["seed"] = model.seed;
  j["trained_once"] = model.trained_once;
  j["encoder_checksum"] = model.encoder_checksum();
  j["decoder_checksum"] = model.decoder_checksum();
  if (cfg) {
    j["train"] = {{"iterations", cfg->iterations},
                  {"lr", cfg->lr},
                  {"batch", cfg->batch},
                  {"optimizer", cfg->optimizer == Optimizer::adam ? "adam" : "sgd"},
                  {"freeze_encoder", cfg->freeze_encoder},
                  {"rng_seed", cfg->rng_seed}};
  }
  std::ofstream os(dir / "meta.json");
  os << j.dump(2) << "\n";
}

inline DetectorModel load_detector(const std::filesystem::path& dir) {
  std::ifstream is(dir / "meta.json");
  if (!is) fail(ErrorCode::not_found, "no detector model at " + dir.string());
  nlohmann::json j;
  is >> j;
  DetectorArch arch;
  arch.max_disp = j["max_disp"].get<int>();
  arch.enc_widths = j["enc_widths"].get<std::vector<int>>();
  arch.dec_widths = j["dec_widths"].get<std::vector<int>>();
  arch.head_width = j["head_width"].get<int>();
  DetectorModel m;
  m.scale = j["scale"].get<std::string>() == "small" ? ArchScale::small : ArchScale::tiny;
  m.seed = j["seed"].get<uint64_t>();
  m.trained_once = j["trained_once"].get<bool>();
  m.net = DetectorNet<float>(arch);
  auto ps = m.net.all_params();
  nn::load_params(dir / "model.bin", ps);
  return m;
}

}  // namespace lcd

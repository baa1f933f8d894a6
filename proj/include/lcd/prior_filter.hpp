#pragma once
// Realism filter for object priors. Candidate crops become Sobel edge images
// resized to 224x224; a small CNN scores them realistic/unrealistic. Positives
// come from harvested detections, negatives from random background crops, and
// only generic priors can be pruned — detected priors bypass the filter.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
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

constexpr int kEdgeSize = 224;

namespace filter_detail {

// Sobel gradient magnitude with replicate borders; valid for any size >= 1x1
// (clamped sampling), unnormalized. The weighted column/row sums are built
// identically and subtracted at the end so constant regions cancel exactly
// even under FMA contraction.
inline ImageF sobel_raw(const ImageF& gray) {
  ImageF out(gray.width, gray.height, 1);
  auto px = [&](int x, int y) {
    return gray.at(std::clamp(x, 0, gray.width - 1), std::clamp(y, 0, gray.height - 1));
  };
  for (int y = 0; y < gray.height; ++y) {
    for (int x = 0; x < gray.width; ++x) {
      float left = px(x - 1, y - 1) + 2.0f * px(x - 1, y) + px(x - 1, y + 1);
      float right = px(x + 1, y - 1) + 2.0f * px(x + 1, y) + px(x + 1, y + 1);
      float top = px(x - 1, y - 1) + 2.0f * px(x, y - 1) + px(x + 1, y - 1);
      float bottom = px(x - 1, y + 1) + 2.0f * px(x, y + 1) + px(x + 1, y + 1);
      float gx = right - left;
      float gy = bottom - top;
      out.at(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

inline void normalize_by_max(ImageF& img) {
  float mx = 0.0f;
  for (float v : img.data) mx = std::max(mx, v);
  if (mx <= 1e-6f) {  // numerically zero gradient field
    std::fill(img.data.begin(), img.data.end(), 0.0f);
    return;
  }
  for (float& v : img.data) v /= mx;
}

}  // namespace filter_detail

// Per-pixel gradient magnitude, normalized by the image maximum (an all-zero
// gradient stays all-zero).
inline ImageF sobel_magnitude(const ImageF& gray) {
  if (gray.width < 3 || gray.height < 3)
    fail(ErrorCode::invalid_input, "sobel input must be at least 3x3");
  ImageF out = filter_detail::sobel_raw(gray);
  filter_detail::normalize_by_max(out);
  return out;
}

enum class EdgeLabel { negative = 0, positive = 1 };

struct EdgeSample {
  ImageF edge;  // kEdgeSize x kEdgeSize, values in [0,1]
  EdgeLabel label = EdgeLabel::negative;
  std::string source_id;
};

// bbox crop -> grayscale -> Sobel (replicate borders, max-normalized) ->
// bilinear resize to 224x224. Degenerate crops below 3x3 are legal and give
// all-zero edges.
inline EdgeSample crop_and_edge(const ImageU8& frame, int x, int y, int w, int h) {
  if (w < 1 || h < 1 || x < 0 || y < 0 || x + w > frame.width || y + h > frame.height)
    fail(ErrorCode::invalid_input, "bbox outside frame");
  ImageU8 sub = crop(frame, x, y, w, h);
  ImageF gray = to_gray(sub);
  ImageF edge = filter_detail::sobel_raw(gray);
  filter_detail::normalize_by_max(edge);
  EdgeSample s;
  s.edge = resize_bilinear(edge, kEdgeSize, kEdgeSize);
  for (auto& v : s.edge.data) v = std::clamp(v, 0.0f, 1.0f);
  return s;
}

// The canonical edge rendering of a prior for classification: its sprite
// composited over context. With background frames available the context is a
// deterministic crop (seeded by the prior id), mirroring how harvested
// positives carry scene context around the object; otherwise a flat mid-grey
// patch.
inline EdgeSample prior_edge_sample(const ObjectPrior& prior,
                                    const std::vector<ImageU8>* contexts = nullptr) {
  int w = prior.color.width, h = prior.color.height;
  ImageU8 patch(w, h, 3, 128);
  if (contexts && !contexts->empty()) {
    Rng rng(derive_seed(hash_tag(prior.id), "prior-context"));
    const ImageU8& bg = (*contexts)[rng.next_below(contexts->size())];
    if (bg.width >= w && bg.height >= h) {
      int x = rng.uniform_int(0, bg.width - w);
      int y = rng.uniform_int(0, bg.height - h);
      patch = crop(bg, x, y, w, h);
    }
  }
  ScaledSprite s{prior.color, prior.alpha};
  composite_sprite(patch, nullptr, s, 0, 0, kAlphaThreshold);
  EdgeSample e = crop_and_edge(patch, 0, 0, patch.width, patch.height);
  e.source_id = prior.id;
  return e;
}

// Balanced positive/negative edge training set; positives resample detections
// with replacement when scarce, negatives are random crops of the supplied
// background pool pushed through the same pipeline.
inline std::vector<EdgeSample> build_filter_training_set(
    const std::vector<Detection>& positives, const std::vector<ImageU8>& negative_source,
    int per_class, uint64_t rng_seed) {
  if (positives.empty())
    fail(ErrorCode::insufficient_data, "no positive detections for filter training");
  if (negative_source.empty())
    fail(ErrorCode::insufficient_data, "no negative source images for filter training");
  if (per_class < 0) fail(ErrorCode::invalid_input, "per_class must be >= 0");

  std::vector<EdgeSample> out;
  out.reserve(static_cast<size_t>(per_class) * 2);
  Rng rng(derive_seed(rng_seed, "filter-set"));
  for (int i = 0; i < per_class; ++i) {
    const Detection& d = positives[rng.next_below(positives.size())];
    EdgeSample s = crop_and_edge(d.color_crop, 0, 0, d.color_crop.width, d.color_crop.height);
    s.label = EdgeLabel::positive;
    s.source_id = d.frame_id;
    out.push_back(std::move(s));
  }
  for (int i = 0; i < per_class; ++i) {
    const ImageU8& img = negative_source[rng.next_below(negative_source.size())];
    int w = rng.uniform_int(8, std::min(img.width, 128));
    int h = rng.uniform_int(8, std::min(img.height, 128));
    int x = rng.uniform_int(0, img.width - w);
    int y = rng.uniform_int(0, img.height - h);
    EdgeSample s = crop_and_edge(img, x, y, w, h);
    s.label = EdgeLabel::negative;
    out.push_back(std::move(s));
  }
  return out;
}

// Small binary classifier: four stride-2 conv blocks, global average pool
// plus an edge-density feature, per-feature standardization frozen from the
// training set, and a linear head. Randomly initialized at desk scale;
// load_params() is the hook for externally supplied pretrained weights. The
// standardized features carry a fixed gain so the head converges within the
// short published schedule (10 epochs, SGD 1e-3) from random conv features.
struct FilterModel {
  static constexpr int kFeatures = 33;  // 32 pooled channels + input density
  static constexpr float kFeatGain = 8.0f;

  nn::Conv2d<float> c1{1, 8, 3, 2, 1};
  nn::Conv2d<float> c2{8, 16, 3, 2, 1};
  nn::Conv2d<float> c3{16, 32, 3, 2, 1};
  nn::Conv2d<float> c4{32, 32, 3, 2, 1};
  nn::Linear<float> head{kFeatures, 1};
  std::vector<float> feat_mean = std::vector<float>(kFeatures, 0.0f);
  std::vector<float> feat_std = std::vector<float>(kFeatures, 1.0f);
  double decision_threshold = 0.5;
  int trained_epochs = 0;
  uint64_t seed = 0;

  void init(uint64_t rng_seed) {
    seed = rng_seed;
    Rng rng(derive_seed(rng_seed, "filter-init"));
    c1.init_he(rng);
    c2.init_he(rng);
    c3.init_he(rng);
    c4.init_he(rng);
    // the head starts neutral and trains like a linear probe
  }

  // trainable tensors
  std::vector<nn::Param<float>> params() {
    std::vector<nn::Param<float>> ps;
    c1.collect_params("c1", ps);
    c2.collect_params("c2", ps);
    c3.collect_params("c3", ps);
    c4.collect_params("c4", ps);
    head.collect_params("head", ps);
    return ps;
  }

  // everything that defines the model on disk (adds the frozen statistics)
  std::vector<nn::Param<float>> io_params() {
    auto ps = params();
    ps.push_back({"norm.mean", &feat_mean, &feat_mean});
    ps.push_back({"norm.std", &feat_std, &feat_std});
    return ps;
  }

  std::string param_checksum() {
    auto ps = io_params();
    return nn::checksum(ps);
  }

  struct Trace {
    nn::ConvCache<float> k1, k2, k3, k4;
    nn::Tensor<float> a1, a2, a3, a4;
    std::vector<float> pooled;  // standardized, gain applied
  };

  // raw 33-feature vector before standardization
  std::vector<float> raw_features(const ImageF& edge, Trace& t) const {
    nn::Tensor<float> x = nn::image_to_tensor<float>(edge);
    float density = 0.0f;
    for (float v : edge.data) density += v;
    density /= static_cast<float>(edge.data.size());
    t.a1 = nn::relu(c1.forward(x, t.k1));
    t.a2 = nn::relu(c2.forward(t.a1, t.k2));
    t.a3 = nn::relu(c3.forward(t.a2, t.k3));
    t.a4 = nn::relu(c4.forward(t.a3, t.k4));
    std::vector<float> f = nn::global_avg_pool(t.a4);
    f.push_back(density);
    return f;
  }

  float forward(const ImageF& edge, Trace* tr = nullptr) const {
    Trace local;
    Trace& t = tr ? *tr : local;
    std::vector<float> f = raw_features(edge, t);
    t.pooled.resize(f.size());
    for (size_t i = 0; i < f.size(); ++i)
      t.pooled[i] = (f[i] - feat_mean[i]) / feat_std[i] * kFeatGain;
    return head.forward(t.pooled)[0];
  }

  void backward(float glogit, const Trace& t) {
    std::vector<float> gp = head.backward({glogit}, t.pooled);
    std::vector<float> gpool(static_cast<size_t>(t.a4.c));
    for (size_t i = 0; i < gpool.size(); ++i)
      gpool[i] = gp[i] * kFeatGain / feat_std[i];
    // the density feature has no trainable parameters upstream
    nn::Tensor<float> g = nn::global_avg_pool_backward(gpool, t.a4.c, t.a4.h, t.a4.w);
    g = c4.backward(nn::relu_backward(g, t.a4), t.k4);
    g = c3.backward(nn::relu_backward(g, t.a3), t.k3);
    g = c2.backward(nn::relu_backward(g, t.a2), t.k2);
    c1.backward(nn::relu_backward(g, t.a1), t.k1);
  }

  // Freezes standardization statistics from a sample of feature vectors.
  void fit_feature_stats(const std::vector<std::vector<float>>& feats) {
    std::fill(feat_mean.begin(), feat_mean.end(), 0.0f);
    std::fill(feat_std.begin(), feat_std.end(), 1.0f);
    if (feats.empty()) return;
    for (int i = 0; i < kFeatures; ++i) {
      double sum = 0.0;
      for (const auto& f : feats) sum += f[static_cast<size_t>(i)];
      double mean = sum / static_cast<double>(feats.size());
      double var = 0.0;
      for (const auto& f : feats) {
        double d = f[static_cast<size_t>(i)] - mean;
        var += d * d;
      }
      var /= static_cast<double>(feats.size());
      feat_mean[static_cast<size_t>(i)] = static_cast<float>(mean);
      feat_std[static_cast<size_t>(i)] = static_cast<float>(std::max(std::sqrt(var), 1e-3));
    }
  }

  double predict(const ImageF& edge) const { return nn::sigmoid(forward(edge)); }
};

// SGD training per the published schedule defaults (10 epochs, lr 1e-3,
// batch 32). Deterministic under rng_seed.
inline FilterModel train_filter(const std::vector<EdgeSample>& data, int epochs, double lr,
                                int batch, uint64_t rng_seed) {
  bool has_pos = false, has_neg = false;
  for (const auto& s : data) (s.label == EdgeLabel::positive ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    fail(ErrorCode::insufficient_data, "filter training needs both classes");
  if (batch < 1) fail(ErrorCode::invalid_input, "batch must be >= 1");

  FilterModel model;
  model.init(rng_seed);
  if (epochs <= 0) return model;

  {  // freeze feature standardization on the init-time training-set features
    std::vector<std::vector<float>> feats;
    feats.reserve(data.size());
    for (const auto& s : data) {
      FilterModel::Trace tr;
      feats.push_back(model.raw_features(s.edge, tr));
    }
    model.fit_feature_stats(feats);
  }

  nn::Sgd<float> opt(lr);
  auto params = model.params();
  Rng shuffle_rng(derive_seed(rng_seed, "filter-shuffle"));
  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int e = 0; e < epochs; ++e) {
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch)) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(batch));
      nn::zero_grads(params);
      for (size_t i = start; i < end; ++i) {
        const EdgeSample& s = data[order[i]];
        FilterModel::Trace tr;
        float logit = model.forward(s.edge, &tr);
        float t = s.label == EdgeLabel::positive ? 1.0f : 0.0f;
        float sig = static_cast<float>(nn::sigmoid(logit));
        model.backward((sig - t) / static_cast<float>(end - start), tr);
      }
      opt.step(params);
    }
  }
  model.trained_epochs = epochs;
  return model;
}

// Partition priors by classifier score at the model's decision threshold.
// Detected priors are never removed.
inline std::pair<std::vector<ObjectPrior>, std::vector<ObjectPrior>> filter_priors(
    const std::vector<ObjectPrior>& priors, const FilterModel& model,
    const std::vector<ImageU8>* contexts = nullptr) {
  std::vector<ObjectPrior> kept, removed;
  for (const auto& p : priors) {
    if (p.provenance == Provenance::detected) {
      kept.push_back(p);
      continue;
    }
    double prob = model.predict(prior_edge_sample(p, contexts).edge);
    (prob >= model.decision_threshold ? kept : removed).push_back(p);
  }
  return {kept, removed};
}

// ----------------------------------------------------------------- storage

inline void save_filter(const std::filesystem::path& dir, FilterModel& model,
                        const std::string& training_set_hash = "") {
  auto ps = model.io_params();
  nn::save_params(dir / "model.bin", ps);
  nlohmann::json j;
  j["decision_threshold"] = model.decision_threshold;
  j["trained_epochs"] = model.trained_epochs;
  j["seed"] = model.seed;
  j["training_set_hash"] = training_set_hash;
  j["checksum"] = model.param_checksum();
  std::ofstream os(dir / "meta.json");
  os << j.dump(2) << "\n";
}

inline FilterModel load_filter(const std::filesystem::path& dir) {
  std::ifstream is(dir / "meta.json");
  if (!is) fail(ErrorCode::not_found, "no filter model at " + dir.string());
  nlohmann::json j;
  is >> j;
  FilterModel model;
  model.decision_threshold = j["decision_threshold"].get<double>();
  model.trained_epochs = j["trained_epochs"].get<int>();
  model.seed = j["seed"].get<uint64_t>();
  auto ps = model.io_params();
  nn::load_params(dir / "model.bin", ps);
  return model;
}

inline std::string edge_set_hash(const std::vector<EdgeSample>& data) {
  Fnv1a h;
  for (const auto& s : data) {
    h.update_vec(s.edge.data);
    h.update_pod(s.label);
  }
  return h.hex();
}

}  // namespace lcd

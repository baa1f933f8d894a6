#pragma once
// Synthetic sample construction: alpha-over pasting of object priors onto
// background frames, whole-dataset synthesis, and generation mixing.
//
// Conventions pinned here because tests oracle them:
//  - sprite alpha is u8; the paste mask is alpha >= 128 (i.e. > 0.5),
//    resampled with nearest-neighbor; sprite color resamples bilinearly.
//  - composite: out = (a*sprite + (255-a)*bg + 127) / 255, integer math.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lcd/error.hpp"
#include "lcd/hash.hpp"
#include "lcd/image.hpp"
#include "lcd/rng.hpp"

namespace lcd {

constexpr uint8_t kAlphaThreshold = 128;  // u8 equivalent of alpha > 0.5

enum class Provenance { generic, detected };

inline const char* to_string(Provenance p) {
  return p == Provenance::generic ? "generic" : "detected";
}

struct ObjectPrior {
  std::string id;  // content hash of sprite bytes
  ImageU8 color;   // RGB
  ImageU8 alpha;   // single channel, 0..255; bounding box is tight
  Provenance provenance = Provenance::generic;
  int source_generation = 0;
  size_t area_px = 0;  // alpha > 0 pixel count
  std::string group_tag;
};

inline std::string prior_content_id(const ImageU8& color, const ImageU8& alpha) {
  Fnv1a h;
  h.update_pod(color.width);
  h.update_pod(color.height);
  h.update_vec(color.data);
  h.update_vec(alpha.data);
  return h.hex();
}

// Builds a prior from raw color+alpha, cropping to the tight alpha bounding box.
inline ObjectPrior make_prior(const ImageU8& color, const ImageU8& alpha, Provenance prov,
                              int source_generation, const std::string& group_tag = "") {
  if (color.width != alpha.width || color.height != alpha.height)
    fail(ErrorCode::invalid_input, "prior color/alpha dimensions differ");
  int x0 = alpha.width, y0 = alpha.height, x1 = -1, y1 = -1;
  for (int y = 0; y < alpha.height; ++y)
    for (int x = 0; x < alpha.width; ++x)
      if (alpha.at(x, y) > 0) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) fail(ErrorCode::invalid_input, "prior alpha footprint is empty");
  ObjectPrior p;
  p.color = crop(color, x0, y0, x1 - x0 + 1, y1 - y0 + 1);
  p.alpha = crop(alpha, x0, y0, x1 - x0 + 1, y1 - y0 + 1);
  p.area_px = count_nonzero(p.alpha);
  p.provenance = prov;
  p.source_generation = source_generation;
  p.group_tag = group_tag;
  p.id = prior_content_id(p.color, p.alpha);
  return p;
}

enum class SampleOrigin { synthetic, harvested };

inline const char* to_string(SampleOrigin o) {
  return o == SampleOrigin::synthetic ? "synthetic" : "harvested";
}

struct PasteRecord {
  std::string prior_id;
  int x = 0, y = 0;
  double scale = 1.0;
};

struct SamplePair {
  ImageU8 reference;  // RGB
  ImageU8 live;       // RGB
  ImageU8 mask;       // single channel, {0,255}
  SampleOrigin origin = SampleOrigin::synthetic;
  int generation = 0;
  std::vector<PasteRecord> pastes;  // provenance of synthetic pastes
};

struct ScaledSprite {
  ImageU8 color;
  ImageU8 alpha;
};

// Nearest-neighbor alpha, bilinear color. Throws degenerate_scale when the
// thresholded footprint vanishes.
inline ScaledSprite scale_sprite(const ObjectPrior& prior, double scale, uint8_t threshold) {
  if (scale <= 0.0) fail(ErrorCode::degenerate_scale, "scale must be positive");
  int ow = static_cast<int>(std::lround(prior.alpha.width * scale));
  int oh = static_cast<int>(std::lround(prior.alpha.height * scale));
  if (ow < 1 || oh < 1)
    fail(ErrorCode::degenerate_scale, "scaled sprite collapses to zero size");
  ScaledSprite s;
  s.alpha = resize_nearest(prior.alpha, ow, oh);
  bool any = false;
  for (uint8_t a : s.alpha.data)
    if (a >= threshold) {
      any = true;
      break;
    }
  if (!any) fail(ErrorCode::degenerate_scale, "scaled footprint is empty");
  ImageF cf(prior.color.width, prior.color.height, prior.color.channels);
  for (size_t i = 0; i < cf.data.size(); ++i) cf.data[i] = prior.color.data[i];
  ImageF cs = resize_bilinear(cf, ow, oh);
  s.color = ImageU8(ow, oh, prior.color.channels);
  for (size_t i = 0; i < cs.data.size(); ++i)
    s.color.data[i] = static_cast<uint8_t>(std::clamp(std::lround(cs.data[i]), 0L, 255L));
  return s;
}

// Alpha-over composite at (x, y) top-left; marks footprint_threshold-exceeding
// pixels in `mask` when provided. Caller guarantees bounds.
inline void composite_sprite(ImageU8& canvas, ImageU8* mask, const ScaledSprite& s, int x,
                             int y, uint8_t footprint_threshold) {
  for (int j = 0; j < s.alpha.height; ++j) {
    for (int i = 0; i < s.alpha.width; ++i) {
      uint32_t a = s.alpha.at(i, j);
      if (a > 0) {
        for (int c = 0; c < canvas.channels; ++c) {
          uint32_t sp = s.color.at(i, j, std::min(c, s.color.channels - 1));
          uint32_t bg = canvas.at(x + i, y + j, c);
          canvas.at(x + i, y + j, c) = static_cast<uint8_t>((a * sp + (255 - a) * bg + 127) / 255);
        }
      }
      if (mask && a >= footprint_threshold) mask->at(x + i, y + j) = 255;
    }
  }
}

inline SamplePair paste_object(const ImageU8& background, const ObjectPrior& prior,
                               int x, int y, double scale) {
  ScaledSprite s = scale_sprite(prior, scale, kAlphaThreshold);
  if (x < 0 || y < 0 || x + s.alpha.width > background.width ||
      y + s.alpha.height > background.height)
    fail(ErrorCode::out_of_bounds, "scaled sprite does not fit at the requested position");
  SamplePair sp;
  sp.reference = background;
  sp.live = background;
  sp.mask = ImageU8(background.width, background.height, 1, 0);
  composite_sprite(sp.live, &sp.mask, s, x, y, kAlphaThreshold);
  sp.origin = SampleOrigin::synthetic;
  sp.pastes.push_back({prior.id, x, y, scale});
  return sp;
}

struct SynthesisConfig {
  int n_samples = 0;
  int objects_min = 1;
  int objects_max = 3;
  double scale_lo = 0.5;
  double scale_hi = 1.0;
  uint64_t rng_seed = 0;
  int generation = 0;
};

inline std::vector<SamplePair> synthesize_dataset(const std::vector<ImageU8>& backgrounds,
                                                  const std::vector<ObjectPrior>& priors,
                                                  const SynthesisConfig& cfg) {
  if (priors.empty())
    fail(ErrorCode::empty_knowledge_base, "cannot synthesize without object priors");
  if (backgrounds.empty())
    fail(ErrorCode::empty_knowledge_base, "cannot synthesize without background frames");
  if (cfg.objects_min < 1 || cfg.objects_max < cfg.objects_min)
    fail(ErrorCode::invalid_config, "objects_per_image range must satisfy 1 <= min <= max");
  if (cfg.scale_lo <= 0.0 || cfg.scale_hi < cfg.scale_lo)
    fail(ErrorCode::invalid_config, "scale_range must be positive and ordered");

  std::vector<SamplePair> out;
  out.reserve(static_cast<size_t>(cfg.n_samples));
  for (int i = 0; i < cfg.n_samples; ++i) {
    Rng rng(derive_seed(cfg.rng_seed, "synth-sample", static_cast<uint64_t>(i)));
    const ImageU8& bg = backgrounds[rng.next_below(backgrounds.size())];
    SamplePair sp;
    sp.reference = bg;
    sp.live = bg;
    sp.mask = ImageU8(bg.width, bg.height, 1, 0);
    sp.origin = SampleOrigin::synthetic;
    sp.generation = cfg.generation;
    int k = rng.uniform_int(cfg.objects_min, cfg.objects_max);
    int pasted = 0;
    for (int attempt = 0; pasted < k && attempt < 100 * k; ++attempt) {
      const ObjectPrior& prior = priors[rng.next_below(priors.size())];
      double scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
      ScaledSprite s;
      try {
        s = scale_sprite(prior, scale, kAlphaThreshold);
      } catch (const Error&) {
        continue;  // degenerate at this scale; redraw
      }
      if (s.alpha.width > bg.width || s.alpha.height > bg.height) continue;
      int x = rng.uniform_int(0, bg.width - s.alpha.width);
      int y = rng.uniform_int(0, bg.height - s.alpha.height);
      composite_sprite(sp.live, &sp.mask, s, x, y, kAlphaThreshold);
      sp.pastes.push_back({prior.id, x, y, scale});
      ++pasted;
    }
    if (pasted == 0)
      fail(ErrorCode::insufficient_data, "no prior could be pasted onto the background");
    out.push_back(std::move(sp));
  }
  return out;
}

// Mixes generation-0 synthetic samples with harvested ones so the expected
// harvested fraction equals `ratio`; resamples with replacement.
inline std::vector<SamplePair> mix_generations(const std::vector<SamplePair>& gen0,
                                               const std::vector<SamplePair>& harvested,
                                               double ratio, uint64_t rng_seed) {
  if (ratio < 0.0 || ratio > 1.0) fail(ErrorCode::invalid_input, "ratio must lie in [0,1]");
  if (gen0.empty() && harvested.empty())
    fail(ErrorCode::empty_knowledge_base, "nothing to mix: both sample pools are empty");
  size_t n = gen0.size() + harvested.size();
  Rng rng(derive_seed(rng_seed, "mix-generations"));
  std::vector<SamplePair> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    bool take_harvested = rng.uniform() < ratio;
    if (harvested.empty()) take_harvested = false;
    if (gen0.empty()) take_harvested = true;
    const auto& pool = take_harvested ? harvested : gen0;
    out.push_back(pool[rng.next_below(pool.size())]);
  }
  return out;
}

// ------------------------------------------------------------- dataset I/O

inline void save_samples(const std::filesystem::path& dir, const std::vector<SamplePair>& samples,
                         uint64_t seed = 0) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = nlohmann::json::array();
  char name[32];
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    std::snprintf(name, sizeof(name), "%04zu", i);
    write_png(dir / (std::string(name) + "_ref.png"), s.reference);
    write_png(dir / (std::string(name) + "_live.png"), s.live);
    write_png(dir / (std::string(name) + "_mask.png"), s.mask);
    nlohmann::json rec;
    rec["index"] = i;
    rec["origin"] = to_string(s.origin);
    rec["generation"] = s.generation;
    nlohmann::json pastes = nlohmann::json::array();
    for (const auto& p : s.pastes)
      pastes.push_back({{"prior_id", p.prior_id}, {"x", p.x}, {"y", p.y}, {"scale", p.scale}});
    rec["pastes"] = pastes;
    manifest.push_back(rec);
  }
  nlohmann::json root;
  root["seed"] = seed;
  root["samples"] = manifest;
  std::ofstream os(dir / "samples.json");
  os << root.dump(2) << "\n";
}

inline std::vector<SamplePair> load_samples(const std::filesystem::path& dir) {
  std::ifstream is(dir / "samples.json");
  if (!is) fail(ErrorCode::not_found, "missing samples.json in " + dir.string());
  nlohmann::json root;
  is >> root;
  std::vector<SamplePair> out;
  char name[32];
  for (const auto& rec : root["samples"]) {
    size_t i = rec["index"].get<size_t>();
    std::snprintf(name, sizeof(name), "%04zu", i);
    SamplePair s;
    s.reference = read_png(dir / (std::string(name) + "_ref.png"));
    s.live = read_png(dir / (std::string(name) + "_live.png"));
    s.mask = read_png(dir / (std::string(name) + "_mask.png"));
    s.origin = rec["origin"].get<std::string>() == "harvested" ? SampleOrigin::harvested
                                                               : SampleOrigin::synthetic;
    s.generation = rec["generation"].get<int>();
    for (const auto& p : rec["pastes"])
      s.pastes.push_back({p["prior_id"].get<std::string>(), p["x"].get<int>(), p["y"].get<int>(),
                          p["scale"].get<double>()});
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace lcd

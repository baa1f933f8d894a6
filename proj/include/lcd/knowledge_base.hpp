#pragma once
// Generational store of domain knowledge: object priors, background frames,
// and harvested training samples. Single writer; snapshots are immutable and
// the whole store reloads from its directory. Ids are content hashes, so
// re-ingesting the same pixels is a no-op.
//
// Layout: kb/priors/<id>/{sprite.png,alpha.png,meta.json}
//         kb/backgrounds/<id>.png
//         kb/samples/<id>_{ref,live,mask}.png + <id>.json
//         kb/generations/<g>.json

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lcd/compositor.hpp"
#include "lcd/error.hpp"
#include "lcd/image.hpp"

namespace lcd {

struct Detection {
  std::string frame_id;
  ImageU8 mask_crop;   // {0,255}, same dims as color_crop
  ImageU8 color_crop;  // RGB
  int x = 0, y = 0, w = 0, h = 0;  // bbox in frame coordinates
  size_t area_px = 0;
  double score = 0.0;
};

struct GenerationRecord {
  int index = 0;
  int parent_index = -1;
  std::string created_at;
  std::vector<std::string> prior_ids;
  std::vector<std::string> background_ids;
  std::vector<std::string> sample_ids;
};

struct IngestResult {
  std::vector<ObjectPrior> accepted;
  struct Rejected {
    std::string frame_id;
    std::string reason;  // too_small | empty_mask | malformed_bbox
  };
  std::vector<Rejected> rejected;
  size_t deduplicated = 0;
};

namespace kb_detail {

inline std::string now_utc() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

inline std::string image_content_id(const ImageU8& img) {
  Fnv1a h;
  h.update_pod(img.width);
  h.update_pod(img.height);
  h.update_pod(img.channels);
  h.update_vec(img.data);
  return h.hex();
}

// mask must touch all four edges of its crop for the bbox to be tight
inline bool bbox_tight(const ImageU8& mask) {
  bool top = false, bottom = false, left = false, right = false;
  for (int x = 0; x < mask.width; ++x) {
    top |= mask.at(x, 0) != 0;
    bottom |= mask.at(x, mask.height - 1) != 0;
  }
  for (int y = 0; y < mask.height; ++y) {
    left |= mask.at(0, y) != 0;
    right |= mask.at(mask.width - 1, y) != 0;
  }
  return top && bottom && left && right;
}

inline double bbox_iou(int ax, int ay, int aw, int ah, int bx, int by, int bw, int bh) {
  int ix0 = std::max(ax, bx), iy0 = std::max(ay, by);
  int ix1 = std::min(ax + aw, bx + bw), iy1 = std::min(ay + ah, by + bh);
  double inter = (ix1 > ix0 && iy1 > iy0)
                     ? static_cast<double>(ix1 - ix0) * static_cast<double>(iy1 - iy0)
                     : 0.0;
  double uni = static_cast<double>(aw) * ah + static_cast<double>(bw) * bh - inter;
  return uni > 0 ? inter / uni : 0.0;
}

}  // namespace kb_detail

class KnowledgeBase {
 public:
  // Empty root keeps the store memory-only (tests); otherwise every mutation
  // lands in the directory as it happens and snapshots pin the manifest.
  explicit KnowledgeBase(std::filesystem::path root = {}) : root_(std::move(root)) {}

  bool persistent() const { return !root_.empty(); }
  const std::filesystem::path& root() const { return root_; }

  // ---------------------------------------------------------- generation 0

  GenerationRecord init_with_generic(const std::vector<ObjectPrior>& priors) {
    if (!generations_.empty())
      fail(ErrorCode::lifecycle_order, "knowledge base already initialized");
    if (priors.empty())
      fail(ErrorCode::empty_knowledge_base, "generation 0 needs at least one generic prior");
    for (const auto& p : priors)
      if (p.provenance != Provenance::generic)
        fail(ErrorCode::provenance_violation,
             "generation 0 accepts only generic priors (got detected: " + p.id + ")");
    for (const auto& p : priors) store_prior(p);
    GenerationRecord rec = build_record(0, -1);
    commit_record(rec);
    dirty_ = false;
    return rec;
  }

  void add_backgrounds(const std::vector<ImageU8>& frames) {
    for (const auto& f : frames) {
      std::string id = kb_detail::image_content_id(f);
      if (backgrounds_.count(id)) continue;
      backgrounds_.emplace(id, f);
      if (persistent()) write_png(root_ / "backgrounds" / (id + ".png"), f);
      dirty_ = true;
    }
  }

  // ------------------------------------------------------------- ingestion

  // Acceptance rule: any detection with at least `min_area_px` changed pixels
  // becomes a detected-provenance prior for the next generation.
  IngestResult ingest_detections(const std::vector<Detection>& dets, size_t min_area_px = 1) {
    if (min_area_px < 1) fail(ErrorCode::invalid_input, "min_area_px must be >= 1");
    require_initialized();
    IngestResult result;

    // batch-level dedup: same frame, bbox IoU > 0.9, keep the higher score
    std::vector<char> drop(dets.size(), 0);
    for (size_t i = 0; i < dets.size(); ++i)
      for (size_t j = i + 1; j < dets.size(); ++j) {
        if (drop[i] || drop[j] || dets[i].frame_id != dets[j].frame_id) continue;
        if (kb_detail::bbox_iou(dets[i].x, dets[i].y, dets[i].w, dets[i].h, dets[j].x,
                                dets[j].y, dets[j].w, dets[j].h) > 0.9) {
          drop[dets[j].score > dets[i].score ? i : j] = 1;
          ++result.deduplicated;
        }
      }

    int next_gen = current_generation() + 1;
    for (size_t i = 0; i < dets.size(); ++i) {
      if (drop[i]) continue;
      const Detection& d = dets[i];
      if (d.w < 1 || d.h < 1 || d.mask_crop.width != d.w || d.mask_crop.height != d.h ||
          d.color_crop.width != d.w || d.color_crop.height != d.h) {
        result.rejected.push_back({d.frame_id, "malformed_bbox"});
        continue;
      }
      size_t area = count_nonzero(d.mask_crop);
      if (area == 0) {
        result.rejected.push_back({d.frame_id, "empty_mask"});
        continue;
      }
      if (!kb_detail::bbox_tight(d.mask_crop)) {
        result.rejected.push_back({d.frame_id, "malformed_bbox"});
        continue;
      }
      if (area < min_area_px) {
        result.rejected.push_back({d.frame_id, "too_small"});
        continue;
      }
      ObjectPrior prior = make_prior(d.color_crop, d.mask_crop, Provenance::detected, next_gen);
      if (priors_.count(prior.id)) {
        ++result.deduplicated;  // same pixels already known
        continue;
      }
      store_prior(prior);
      dirty_ = true;
      result.accepted.push_back(std::move(prior));
    }
    return result;
  }

  void add_harvested_samples(const std::vector<SamplePair>& samples) {
    require_initialized();
    for (const auto& s : samples) {
      Fnv1a h;
      h.update_vec(s.reference.data);
      h.update_vec(s.live.data);
      h.update_vec(s.mask.data);
      std::string id = h.hex();
      if (samples_.count(id)) continue;
      samples_.emplace(id, s);
      if (persistent()) {
        auto dir = root_ / "samples";
        write_png(dir / (id + "_ref.png"), s.reference);
        write_png(dir / (id + "_live.png"), s.live);
        write_png(dir / (id + "_mask.png"), s.mask);
        nlohmann::json j;
        j["origin"] = to_string(s.origin);
        j["generation"] = s.generation;
        std::ofstream os(dir / (id + ".json"));
        os << j.dump(2) << "\n";
      }
      dirty_ = true;
    }
  }

  // ----------------------------------------------------------- generations

  GenerationRecord snapshot_generation(bool force = false) {
    require_initialized();
    if (!dirty_ && !force)
      fail(ErrorCode::lifecycle_order, "no mutations since the previous snapshot");
    GenerationRecord rec =
        build_record(static_cast<int>(generations_.size()), current_generation());
    commit_record(rec);
    dirty_ = false;
    return rec;
  }

  // Excludes the listed generic priors from all future generations. Detected
  // priors are untouchable; repeating a removal is a no-op.
  void remove_generic_priors(const std::vector<std::string>& ids) {
    require_initialized();
    for (const auto& id : ids) {
      auto it = priors_.find(id);
      if (it == priors_.end()) fail(ErrorCode::not_found, "unknown prior id: " + id);
      if (it->second.provenance == Provenance::detected)
        fail(ErrorCode::provenance_violation, "cannot remove detected prior: " + id);
      if (removed_generic_.insert(id).second) dirty_ = true;
    }
  }

  // ----------------------------------------------------------------- views

  int current_generation() const { return static_cast<int>(generations_.size()) - 1; }
  const std::vector<GenerationRecord>& generations() const { return generations_; }

  std::vector<ObjectPrior> active_priors() const {
    std::vector<ObjectPrior> out;
    for (const auto& [id, p] : priors_)
      if (!removed_generic_.count(id)) out.push_back(p);
    return out;
  }

  std::vector<ObjectPrior> active_generic_priors() const {
    std::vector<ObjectPrior> out;
    for (const auto& [id, p] : priors_)
      if (p.provenance == Provenance::generic && !removed_generic_.count(id)) out.push_back(p);
    return out;
  }

  std::vector<ObjectPrior> detected_priors() const {
    std::vector<ObjectPrior> out;
    for (const auto& [id, p] : priors_)
      if (p.provenance == Provenance::detected) out.push_back(p);
    return out;
  }

  // Resolves the priors named by a generation record, regardless of later
  // removals.
  std::vector<ObjectPrior> priors_by_ids(const std::vector<std::string>& ids) const {
    std::vector<ObjectPrior> out;
    for (const auto& id : ids) {
      auto it = priors_.find(id);
      if (it == priors_.end()) fail(ErrorCode::not_found, "unknown prior id: " + id);
      out.push_back(it->second);
    }
    return out;
  }

  std::vector<ImageU8> backgrounds() const {
    std::vector<ImageU8> out;
    for (const auto& [id, f] : backgrounds_) out.push_back(f);
    return out;
  }

  std::vector<SamplePair> harvested_samples() const {
    std::vector<SamplePair> out;
    for (const auto& [id, s] : samples_) out.push_back(s);
    return out;
  }

  const GenerationRecord& record(int index) const {
    if (index < 0 || index >= static_cast<int>(generations_.size()))
      fail(ErrorCode::not_found, "no generation " + std::to_string(index));
    return generations_[static_cast<size_t>(index)];
  }

  // ------------------------------------------------------------------ load

  static KnowledgeBase load(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root / "generations"))
      fail(ErrorCode::not_found, "no knowledge base at " + root.string());
    KnowledgeBase kb(root);

    std::vector<fs::path> gen_files;
    for (const auto& e : fs::directory_iterator(root / "generations"))
      if (e.path().extension() == ".json") gen_files.push_back(e.path());
    std::sort(gen_files.begin(), gen_files.end());
    for (const auto& f : gen_files) {
      std::ifstream is(f);
      nlohmann::json j;
      is >> j;
      GenerationRecord rec;
      rec.index = j["index"].get<int>();
      rec.parent_index = j["parent_index"].get<int>();
      rec.created_at = j["created_at"].get<std::string>();
      rec.prior_ids = j["prior_ids"].get<std::vector<std::string>>();
      rec.background_ids = j["background_ids"].get<std::vector<std::string>>();
      rec.sample_ids = j["sample_ids"].get<std::vector<std::string>>();
      kb.generations_.push_back(std::move(rec));
    }
    if (kb.generations_.empty())
      fail(ErrorCode::not_found, "knowledge base has no generations: " + root.string());

    if (fs::is_directory(root / "priors")) {
      std::vector<fs::path> dirs;
      for (const auto& e : fs::directory_iterator(root / "priors"))
        if (e.is_directory()) dirs.push_back(e.path());
      std::sort(dirs.begin(), dirs.end());
      for (const auto& d : dirs) {
        std::ifstream is(d / "meta.json");
        nlohmann::json j;
        is >> j;
        ObjectPrior p;
        p.id = j["id"].get<std::string>();
        p.provenance = j["provenance"].get<std::string>() == "detected" ? Provenance::detected
                                                                        : Provenance::generic;
        p.source_generation = j["source_generation"].get<int>();
        p.group_tag = j["group_tag"].get<std::string>();
        p.color = read_png(d / "sprite.png");
        p.alpha = read_png(d / "alpha.png");
        p.area_px = count_nonzero(p.alpha);
        kb.priors_.emplace(p.id, std::move(p));
      }
    }
    // generic priors absent from the latest manifest were removed
    const auto& latest = kb.generations_.back();
    std::set<std::string> live_ids(latest.prior_ids.begin(), latest.prior_ids.end());
    for (const auto& [id, p] : kb.priors_)
      if (p.provenance == Provenance::generic && !live_ids.count(id))
        kb.removed_generic_.insert(id);

    if (fs::is_directory(root / "backgrounds")) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(root / "backgrounds"))
        if (e.path().extension() == ".png") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) kb.backgrounds_.emplace(f.stem().string(), read_png(f));
    }

    if (fs::is_directory(root / "samples")) {
      std::vector<fs::path> metas;
      for (const auto& e : fs::directory_iterator(root / "samples"))
        if (e.path().extension() == ".json") metas.push_back(e.path());
      std::sort(metas.begin(), metas.end());
      for (const auto& f : metas) {
        std::string id = f.stem().string();
        std::ifstream is(f);
        nlohmann::json j;
        is >> j;
        SamplePair s;
        s.origin = j["origin"].get<std::string>() == "harvested" ? SampleOrigin::harvested
                                                                 : SampleOrigin::synthetic;
        s.generation = j["generation"].get<int>();
        s.reference = read_png(root / "samples" / (id + "_ref.png"));
        s.live = read_png(root / "samples" / (id + "_live.png"));
        s.mask = read_png(root / "samples" / (id + "_mask.png"));
        kb.samples_.emplace(id, std::move(s));
      }
    }
    kb.dirty_ = false;
    return kb;
  }

 private:
  void require_initialized() const {
    if (generations_.empty())
      fail(ErrorCode::empty_knowledge_base, "knowledge base has no generation 0");
  }

  void store_prior(const ObjectPrior& p) {
    if (priors_.count(p.id)) return;
    priors_.emplace(p.id, p);
    if (persistent()) {
      auto dir = root_ / "priors" / p.id;
      write_png(dir / "sprite.png", p.color);
      write_png(dir / "alpha.png", p.alpha);
      nlohmann::json j;
      j["id"] = p.id;
      j["provenance"] = to_string(p.provenance);
      j["source_generation"] = p.source_generation;
      j["area_px"] = p.area_px;
      j["group_tag"] = p.group_tag;
      std::ofstream os(dir / "meta.json");
      os << j.dump(2) << "\n";
    }
  }

  GenerationRecord build_record(int index, int parent) const {
    GenerationRecord rec;
    rec.index = index;
    rec.parent_index = parent;
    rec.created_at = kb_detail::now_utc();
    for (const auto& [id, p] : priors_)
      if (!removed_generic_.count(id)) rec.prior_ids.push_back(id);
    for (const auto& [id, f] : backgrounds_) rec.background_ids.push_back(id);
    for (const auto& [id, s] : samples_) rec.sample_ids.push_back(id);
    return rec;
  }

  void commit_record(const GenerationRecord& rec) {
    generations_.push_back(rec);
    if (persistent()) {
      nlohmann::json j;
      j["index"] = rec.index;
      j["parent_index"] = rec.parent_index;
      j["created_at"] = rec.created_at;
      j["prior_ids"] = rec.prior_ids;
      j["background_ids"] = rec.background_ids;
      j["sample_ids"] = rec.sample_ids;
      auto dir = root_ / "generations";
      std::filesystem::create_directories(dir);
      char name[16];
      std::snprintf(name, sizeof(name), "%04d.json", rec.index);
      std::ofstream os(dir / name);
      os << j.dump(2) << "\n";
    }
  }

  std::filesystem::path root_;
  std::map<std::string, ObjectPrior> priors_;
  std::set<std::string> removed_generic_;
  std::map<std::string, ImageU8> backgrounds_;
  std::map<std::string, SamplePair> samples_;
  std::vector<GenerationRecord> generations_;
  bool dirty_ = false;
};

}  // namespace lcd

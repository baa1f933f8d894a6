#pragma once
// Experiment configuration: one JSON document drives every module. The
// canonical dump is hashed into all output manifests.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lcd/detector.hpp"
#include "lcd/error.hpp"
#include "lcd/hash.hpp"
#include "lcd/simworld.hpp"

namespace lcd {

struct ExperimentConfig {
  uint64_t seed = 1;
  std::string out = "runs/out";

  std::vector<std::string> styles = {"shelf_grid", "table_blobs", "sofa_stripes",
                                     "corridor_plain"};
  struct {
    int height = 128;
    int width = 1024;
    std::string style = "shelf_grid";  // single-cell CLI runs
  } workspace;

  struct {
    int frame_height = 64;
    int frame_width = 64;
    int subgoal_count = 2;
    int frames_per_segment = 127;  // (n-1)*fps+1 = 128 frames per capture
  } traversal;

  struct {
    int objects_per_capture = 12;
    double plant_scale_lo = 0.16;
    double plant_scale_hi = 0.34;
    int jitter = 2;
    double brightness_lo = 0.95;
    double brightness_hi = 1.05;
  } capture;

  struct {
    int generic_per_kind = 2;  // 9 kinds -> 18 generation-0 priors
    int group_per_kind = 3;
  } priors;

  struct {
    int n_samples = 192;
    int objects_min = 1;
    int objects_max = 3;
    double scale_lo = 0.16;
    double scale_hi = 0.34;
    double mix_ratio = 0.5;
  } compositor;

  struct {
    bool enabled = true;
    int epochs = 10;
    double lr = 0.001;
    int batch = 32;
    int per_class = 64;
    double threshold = 0.5;
    int min_positives = 8;
  } filter;

  struct {
    std::string scale = "tiny";
    int max_disp = 2;
    int iterations = 3000;
    int retrain_iterations = 0;  // 0 -> iterations/4, the published 4:1 ratio
    double lr = 1e-4;
    int batch = 8;
    std::string optimizer = "adam";
    double bin_threshold = 0.5;
    double harvest_threshold = -1.0;  // <0 -> bin_threshold; deploy-time strictness
    int min_area = 1;
  } detector;

  double effective_harvest_threshold() const {
    return detector.harvest_threshold >= 0.0 ? detector.harvest_threshold
                                             : detector.bin_threshold;
  }

  int generations = 2;
  std::string train_group = "group1";
  std::string test_group = "group2";
  int threads = 2;

  int retrain_iterations() const {
    return detector.retrain_iterations > 0 ? detector.retrain_iterations
                                           : detector.iterations / 4;
  }

  ArchScale arch_scale() const {
    if (detector.scale == "tiny") return ArchScale::tiny;
    if (detector.scale == "small") return ArchScale::small;
    fail(ErrorCode::invalid_config, "unknown detector scale: " + detector.scale);
  }

  void validate() const {
    if (generations < 1) fail(ErrorCode::invalid_config, "generations must be >= 1");
    if (train_group == test_group)
      fail(ErrorCode::invalid_config, "train and test groups must differ");
    if (detector.bin_threshold < 0 || detector.bin_threshold > 1)
      fail(ErrorCode::invalid_config, "bin_threshold must lie in [0,1]");
    if (traversal.subgoal_count < 2)
      fail(ErrorCode::invalid_config, "traversal needs >= 2 subgoals");
    for (const auto& s : styles) texture_style_from_string(s);
    texture_style_from_string(workspace.style);
    (void)arch_scale();
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["styles"] = c.styles;
  j["workspace"] = {{"height", c.workspace.height},
                    {"width", c.workspace.width},
                    {"style", c.workspace.style}};
  j["traversal"] = {{"frame_height", c.traversal.frame_height},
                    {"frame_width", c.traversal.frame_width},
                    {"subgoal_count", c.traversal.subgoal_count},
                    {"frames_per_segment", c.traversal.frames_per_segment}};
  j["capture"] = {{"objects_per_capture", c.capture.objects_per_capture},
                  {"plant_scale_lo", c.capture.plant_scale_lo},
                  {"plant_scale_hi", c.capture.plant_scale_hi},
                  {"jitter", c.capture.jitter},
                  {"brightness_lo", c.capture.brightness_lo},
                  {"brightness_hi", c.capture.brightness_hi}};
  j["priors"] = {{"generic_per_kind", c.priors.generic_per_kind},
                 {"group_per_kind", c.priors.group_per_kind}};
  j["compositor"] = {{"n_samples", c.compositor.n_samples},
                     {"objects_min", c.compositor.objects_min},
                     {"objects_max", c.compositor.objects_max},
                     {"scale_lo", c.compositor.scale_lo},
                     {"scale_hi", c.compositor.scale_hi},
                     {"mix_ratio", c.compositor.mix_ratio}};
  j["filter"] = {{"enabled", c.filter.enabled},
                 {"epochs", c.filter.epochs},
                 {"lr", c.filter.lr},
                 {"batch", c.filter.batch},
                 {"per_class", c.filter.per_class},
                 {"threshold", c.filter.threshold},
                 {"min_positives", c.filter.min_positives}};
  j["detector"] = {{"scale", c.detector.scale},
                   {"max_disp", c.detector.max_disp},
                   {"iterations", c.detector.iterations},
                   {"retrain_iterations", c.detector.retrain_iterations},
                   {"lr", c.detector.lr},
                   {"batch", c.detector.batch},
                   {"optimizer", c.detector.optimizer},
                   {"bin_threshold", c.detector.bin_threshold},
                   {"harvest_threshold", c.detector.harvest_threshold},
                   {"min_area", c.detector.min_area}};
  j["generations"] = c.generations;
  j["train_group"] = c.train_group;
  j["test_group"] = c.test_group;
  j["threads"] = c.threads;
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  auto get = [](const nlohmann::json& obj, const char* key, auto& slot) {
    if (obj.contains(key)) slot = obj[key].get<std::decay_t<decltype(slot)>>();
  };
  get(j, "seed", c.seed);
  get(j, "out", c.out);
  get(j, "styles", c.styles);
  if (j.contains("workspace")) {
    get(j["workspace"], "height", c.workspace.height);
    get(j["workspace"], "width", c.workspace.width);
    get(j["workspace"], "style", c.workspace.style);
  }
  if (j.contains("traversal")) {
    get(j["traversal"], "frame_height", c.traversal.frame_height);
    get(j["traversal"], "frame_width", c.traversal.frame_width);
    get(j["traversal"], "subgoal_count", c.traversal.subgoal_count);
    get(j["traversal"], "frames_per_segment", c.traversal.frames_per_segment);
  }
  if (j.contains("capture")) {
    get(j["capture"], "objects_per_capture", c.capture.objects_per_capture);
    get(j["capture"], "plant_scale_lo", c.capture.plant_scale_lo);
    get(j["capture"], "plant_scale_hi", c.capture.plant_scale_hi);
    get(j["capture"], "jitter", c.capture.jitter);
    get(j["capture"], "brightness_lo", c.capture.brightness_lo);
    get(j["capture"], "brightness_hi", c.capture.brightness_hi);
  }
  if (j.contains("priors")) {
    get(j["priors"], "generic_per_kind", c.priors.generic_per_kind);
    get(j["priors"], "group_per_kind", c.priors.group_per_kind);
  }
  if (j.contains("compositor")) {
    get(j["compositor"], "n_samples", c.compositor.n_samples);
    get(j["compositor"], "objects_min", c.compositor.objects_min);
    get(j["compositor"], "objects_max", c.compositor.objects_max);
    get(j["compositor"], "scale_lo", c.compositor.scale_lo);
    get(j["compositor"], "scale_hi", c.compositor.scale_hi);
    get(j["compositor"], "mix_ratio", c.compositor.mix_ratio);
  }
  if (j.contains("filter")) {
    get(j["filter"], "enabled", c.filter.enabled);
    get(j["filter"], "epochs", c.filter.epochs);
    get(j["filter"], "lr", c.filter.lr);
    get(j["filter"], "batch", c.filter.batch);
    get(j["filter"], "per_class", c.filter.per_class);
    get(j["filter"], "threshold", c.filter.threshold);
    get(j["filter"], "min_positives", c.filter.min_positives);
  }
  if (j.contains("detector")) {
    get(j["detector"], "scale", c.detector.scale);
    get(j["detector"], "max_disp", c.detector.max_disp);
    get(j["detector"], "iterations", c.detector.iterations);
    get(j["detector"], "retrain_iterations", c.detector.retrain_iterations);
    get(j["detector"], "lr", c.detector.lr);
    get(j["detector"], "batch", c.detector.batch);
    get(j["detector"], "optimizer", c.detector.optimizer);
    get(j["detector"], "bin_threshold", c.detector.bin_threshold);
    get(j["detector"], "harvest_threshold", c.detector.harvest_threshold);
    get(j["detector"], "min_area", c.detector.min_area);
  }
  get(j, "generations", c.generations);
  get(j, "train_group", c.train_group);
  get(j, "test_group", c.test_group);
  get(j, "threads", c.threads);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::invalid_config, "cannot open config: " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    fail(ErrorCode::invalid_config, std::string("config parse error: ") + e.what());
  }
  ExperimentConfig c = config_from_json(j);
  c.validate();
  return c;
}

inline std::string config_hash(const ExperimentConfig& c) {
  std::string dump = to_json(c).dump();
  return fnv1a_hex(dump.data(), dump.size());
}

inline void save_config(const std::filesystem::path& path, const ExperimentConfig& c) {
  std::filesystem::create_directories(path.parent_path());
  nlohmann::json j = to_json(c);
  j["config_hash"] = config_hash(c);
  std::ofstream os(path);
  os << j.dump(2) << "\n";
}

}  // namespace lcd

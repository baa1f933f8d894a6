#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>

#include "lcd/lifecycle.hpp"

using namespace lcd;

namespace {

ExperimentConfig mini_config(const std::filesystem::path& out) {
  ExperimentConfig cfg;
  cfg.seed = 11;
  cfg.out = out.string();
  cfg.styles = {"shelf_grid"};
  cfg.workspace = {128, 384, "shelf_grid"};
  cfg.traversal = {64, 64, 2, 7};  // 8 frames per capture
  cfg.capture = {6, 0.3, 0.6, 1, 1.0, 1.0};
  cfg.priors = {1, 1};
  cfg.compositor = {16, 1, 2, 0.3, 0.6, 0.5};
  cfg.filter = {true, 2, 0.001, 8, 8, 0.5, 2};
  cfg.detector = {"tiny", 1, 40, 10, 3e-4, 4, "adam", 0.5, 1};
  cfg.generations = 2;
  cfg.train_group = "group1";
  cfg.test_group = "group2";
  cfg.threads = 2;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST_CASE("config round trips through json with a stable hash") {
  ExperimentConfig cfg = mini_config("/tmp/x");
  auto j = to_json(cfg);
  ExperimentConfig back = config_from_json(j);
  REQUIRE(config_hash(cfg) == config_hash(back));
  REQUIRE(back.detector.iterations == 40);
  REQUIRE(back.retrain_iterations() == 10);

  ExperimentConfig derived = cfg;
  derived.detector.retrain_iterations = 0;
  REQUIRE(derived.retrain_iterations() == 10);  // iterations/4

  ExperimentConfig bad = cfg;
  bad.test_group = bad.train_group;
  REQUIRE_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.workspace.style = "lunar_base";
  REQUIRE_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("steps refuse to run out of order") {
  auto root = std::filesystem::temp_directory_path() / "lcd_order";
  std::filesystem::remove_all(root);
  CellRunner runner(mini_config(root), root);
  try {
    runner.synth();  // simulate has not run
    FAIL("expected lifecycle-order");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::lifecycle_order);
  }
  std::filesystem::remove_all(root);
}

TEST_CASE("zero generic priors abort before any training") {
  auto root = std::filesystem::temp_directory_path() / "lcd_nopriors";
  std::filesystem::remove_all(root);
  ExperimentConfig cfg = mini_config(root);
  cfg.priors.generic_per_kind = 0;
  CellRunner runner(cfg, root);
  runner.simulate();
  try {
    runner.synth();
    FAIL("expected empty-knowledge-base");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::empty_knowledge_base);
  }
  REQUIRE_FALSE(std::filesystem::exists(root / "detector"));
  std::filesystem::remove_all(root);
}

TEST_CASE("deploy is deterministic and honors the min-area contract") {
  auto root = std::filesystem::temp_directory_path() / "lcd_deploy";
  std::filesystem::remove_all(root);
  ExperimentConfig cfg = mini_config(root);
  cfg.detector.min_area = 3;
  CellRunner runner(cfg, root);
  runner.simulate();
  runner.synth();
  runner.train_gen0();

  auto a = runner.deploy(runner.deploy_capture_id(), root / "detector" / "gen0", "gen1");
  auto b = runner.deploy(runner.deploy_capture_id(), root / "detector" / "gen0", "gen1");
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].x == b[i].x);
    REQUIRE(a[i].y == b[i].y);
    REQUIRE(a[i].area_px == b[i].area_px);
    REQUIRE(a[i].area_px >= 3);
    REQUIRE(a[i].score == b[i].score);
  }

  // detections round trip through the run directory
  auto loaded = load_detections(root / "detections" / "gen1");
  REQUIRE(loaded.size() == a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE(loaded[i].mask_crop == a[i].mask_crop);
    REQUIRE(loaded[i].frame_id == a[i].frame_id);
  }
  std::filesystem::remove_all(root);
}

TEST_CASE("prior_update bookkeeping, filter skip, and barren harvests") {
  auto root = std::filesystem::temp_directory_path() / "lcd_update";
  std::filesystem::remove_all(root);
  ExperimentConfig cfg = mini_config(root);
  cfg.filter.min_positives = 100;  // force the filter to be skipped
  CellRunner runner(cfg, root);
  runner.simulate();
  runner.synth();

  KnowledgeBase kb = KnowledgeBase::load(root / "kb");
  size_t generic_before = kb.active_generic_priors().size();

  // 4 valid constructed detections
  std::vector<Detection> dets;
  for (int i = 0; i < 4; ++i) {
    Detection d;
    d.frame_id = "0001";
    d.x = 5 * i;
    d.y = 3;
    d.w = 4;
    d.h = 4;
    d.color_crop = ImageU8(4, 4, 3, static_cast<uint8_t>(30 + 40 * i));
    d.mask_crop = ImageU8(4, 4, 1, 255);
    d.area_px = 16;
    d.score = 0.9;
    dets.push_back(std::move(d));
  }
  runner.prior_update(kb, dets, runner.deploy_capture_id(), cfg.filter.enabled, "gen1");
  REQUIRE(kb.current_generation() == 1);
  REQUIRE(kb.detected_priors().size() == 4);
  REQUIRE(kb.active_generic_priors().size() == generic_before);  // filter skipped
  REQUIRE_FALSE(std::filesystem::exists(root / "filter" / "gen1"));

  // barren update: generation still advances with unchanged priors
  runner.prior_update(kb, {}, runner.deploy_capture_id(), cfg.filter.enabled, "gen2");
  REQUIRE(kb.current_generation() == 2);
  REQUIRE(kb.record(2).prior_ids == kb.record(1).prior_ids);
  std::filesystem::remove_all(root);
}

TEST_CASE("retrain freezes the encoder and drops removed priors from the dataset") {
  auto root = std::filesystem::temp_directory_path() / "lcd_retrain";
  std::filesystem::remove_all(root);
  ExperimentConfig cfg = mini_config(root);
  CellRunner runner(cfg, root);
  runner.simulate();
  runner.synth();
  runner.train_gen0();

  KnowledgeBase kb = KnowledgeBase::load(root / "kb");
  auto generic = kb.active_generic_priors();
  std::vector<std::string> removed = {generic[0].id, generic[1].id};
  kb.remove_generic_priors(removed);
  kb.snapshot_generation();

  runner.retrain(kb, root / "detector" / "gen0", root / "detector" / "gen1", "gen1", "gen1");

  auto before = load_detector(root / "detector" / "gen0");
  auto after = load_detector(root / "detector" / "gen1");
  REQUIRE(before.encoder_checksum() == after.encoder_checksum());
  REQUIRE(before.decoder_checksum() != after.decoder_checksum());

  auto mixed = load_samples(root / "datasets" / "gen1");
  for (const auto& s : mixed)
    for (const auto& paste : s.pastes)
      for (const auto& id : removed) REQUIRE(paste.prior_id != id);
  std::filesystem::remove_all(root);
}

TEST_CASE("mini benchmark: full grid rows, disjoint groups, reproducible csv") {
  auto out1 = std::filesystem::temp_directory_path() / "lcd_bench1";
  auto out2 = std::filesystem::temp_directory_path() / "lcd_bench2";
  std::filesystem::remove_all(out1);
  std::filesystem::remove_all(out2);
  ExperimentConfig cfg = mini_config(out1);

  BenchmarkResult r1 = run_benchmark(cfg, out1);
  REQUIRE(r1.rows.size() == 2 * 4);  // one style, two assignments, four methods
  for (const auto& row : r1.rows) {
    REQUIRE(row.workspace == "shelf_grid");
    REQUIRE((row.group == "group1" || row.group == "group2"));
  }
  REQUIRE(std::filesystem::exists(r1.metrics_csv));
  REQUIRE(std::filesystem::exists(r1.report_md));

  // swapped assignments trained/tested on disjoint prior sets
  for (const auto& grp : {"group1", "group2"}) {
    auto cell = out1 / "cells" / (std::string("shelf_grid-") + grp);
    std::ifstream is_deploy(cell / "captures" /
                            (std::string("deploy_") + (std::string(grp) == "group1" ? "group2" : "group1")) /
                            "manifest.json");
    std::ifstream is_test(cell / "captures" / (std::string("test_") + grp) / "manifest.json");
    nlohmann::json jd, jt;
    is_deploy >> jd;
    is_test >> jt;
    std::set<std::string> deploy_ids, test_ids;
    for (const auto& p : jd["placements_live"]) deploy_ids.insert(p["prior_id"].get<std::string>());
    for (const auto& p : jt["placements_live"]) test_ids.insert(p["prior_id"].get<std::string>());
    for (const auto& id : test_ids) REQUIRE_FALSE(deploy_ids.count(id));
  }

  BenchmarkResult r2 = run_benchmark(cfg, out2);
  REQUIRE(slurp(r1.metrics_csv) == slurp(r2.metrics_csv));

  std::filesystem::remove_all(out1);
  std::filesystem::remove_all(out2);
}

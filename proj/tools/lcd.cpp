// Command-line front end for the lifelong change-detection pipeline.
//
// Stepwise subcommands (simulate/synth/train/deploy/update/retrain/eval)
// operate on a single workspace cell rooted at the configured output
// directory; `bench` replays the full 8-cell protocol and `report`
// regenerates report.md from metrics.csv.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>

#include "lcd/lifecycle.hpp"

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_override;
  int64_t seed_override = -1;
};

lcd::ExperimentConfig resolve_config(const GlobalArgs& g) {
  lcd::ExperimentConfig cfg;
  if (!g.config_path.empty()) cfg = lcd::load_config(g.config_path);
  if (const char* env = std::getenv("LCD_OUT"); env && *env) cfg.out = env;
  if (!g.out_override.empty()) cfg.out = g.out_override;
  if (g.seed_override >= 0) cfg.seed = static_cast<uint64_t>(g.seed_override);
  cfg.validate();
  return cfg;
}

std::vector<lcd::MetricsRecord> load_rows_if_any(const std::filesystem::path& csv) {
  if (!std::filesystem::exists(csv)) return {};
  return lcd::read_metrics_csv(csv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lifelong change detection pipeline"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "experiment config JSON");
  app.add_option("--out", g.out_override, "output root (beats LCD_OUT and config)");
  app.add_option("--seed", g.seed_override, "global seed override");

  auto* cmd_simulate = app.add_subcommand("simulate", "generate workspace and captures");
  auto* cmd_synth = app.add_subcommand("synth", "init knowledge base and synthesize gen-0 data");
  auto* cmd_train = app.add_subcommand("train", "train the generation-0 detector");
  bool train_supervised = false;
  cmd_train->add_flag("--supervised", train_supervised,
                      "train the supervised comparator instead");
  auto* cmd_deploy = app.add_subcommand("deploy", "run the detector over a capture");
  std::string deploy_capture;
  cmd_deploy->add_option("--capture", deploy_capture, "capture id (default deploy capture)");
  auto* cmd_update = app.add_subcommand("update", "ingest detections and update priors");
  auto* cmd_retrain = app.add_subcommand("retrain", "retrain with a frozen encoder");
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a model on the test capture");
  std::string eval_method = "generic";
  cmd_eval->add_option("--method", eval_method,
                       "generic | proposed | ablation_no_filter | supervised");
  auto* cmd_bench = app.add_subcommand("bench", "run the full benchmark grid");
  auto* cmd_report = app.add_subcommand("report", "regenerate report.md from metrics.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    lcd::ExperimentConfig cfg = resolve_config(g);
    std::filesystem::path root = cfg.out;

    if (cmd_bench->parsed()) {
      lcd::BenchmarkResult res = lcd::run_benchmark(cfg, root);
      std::printf("benchmark: %zu rows in %.1f s\n", res.rows.size(), res.wall_seconds);
      std::printf("metrics: %s\nreport:  %s\n", res.metrics_csv.string().c_str(),
                  res.report_md.string().c_str());
      return 0;
    }
    if (cmd_report->parsed()) {
      auto rows = lcd::read_metrics_csv(root / "metrics.csv");
      std::ofstream os(root / "report.md");
      os << lcd::compare_report(rows);
      std::printf("report:  %s\n", (root / "report.md").string().c_str());
      return 0;
    }

    lcd::CellRunner runner(cfg, root);
    if (cmd_simulate->parsed()) {
      runner.simulate();
      std::printf("simulated workspace '%s' into %s\n", cfg.workspace.style.c_str(),
                  root.string().c_str());
    } else if (cmd_synth->parsed()) {
      runner.synth();
      std::printf("generation-0 knowledge base and dataset ready\n");
    } else if (cmd_train->parsed()) {
      if (train_supervised) {
        runner.train_supervised();
        std::printf("supervised comparator trained\n");
      } else {
        runner.train_gen0();
        std::printf("generation-0 detector trained\n");
      }
    } else if (cmd_deploy->parsed()) {
      std::string capture = deploy_capture.empty() ? runner.deploy_capture_id() : deploy_capture;
      auto dets = runner.deploy(capture, root / "detector" / "gen0", "gen1");
      std::printf("deployed on '%s': %zu detections\n", capture.c_str(), dets.size());
    } else if (cmd_update->parsed()) {
      auto dets = lcd::load_detections(root / "detections" / "gen1");
      lcd::KnowledgeBase kb = lcd::KnowledgeBase::load(root / "kb");
      runner.prior_update(kb, dets, runner.deploy_capture_id(), cfg.filter.enabled, "gen1");
      std::printf("knowledge base advanced to generation %d\n", kb.current_generation());
    } else if (cmd_retrain->parsed()) {
      lcd::KnowledgeBase kb = lcd::KnowledgeBase::load(root / "kb");
      runner.retrain(kb, root / "detector" / "gen0", root / "detector" / "gen1", "gen1", "gen1");
      std::printf("retrained detector saved under detector/gen1\n");
    } else if (cmd_eval->parsed()) {
      std::filesystem::path model_dir;
      if (eval_method == "generic") model_dir = root / "detector" / "gen0";
      else if (eval_method == "proposed") model_dir = root / "detector" / "gen1";
      else if (eval_method == "ablation_no_filter") model_dir = root / "detector" / "gen1_nofilter";
      else if (eval_method == "supervised") model_dir = root / "detector" / "supervised";
      else lcd::fail(lcd::ErrorCode::invalid_config, "unknown method: " + eval_method);
      lcd::MetricsRecord row = runner.evaluate(model_dir, eval_method);
      auto rows = load_rows_if_any(root / "metrics.csv");
      rows.erase(std::remove_if(rows.begin(), rows.end(),
                                [&](const lcd::MetricsRecord& r) {
                                  return r.method_tag == row.method_tag &&
                                         r.workspace == row.workspace && r.group == row.group;
                                }),
                 rows.end());
      rows.push_back(row);
      lcd::write_metrics_csv(root / "metrics.csv", rows);
      std::printf("%s: P=%.4f R=%.4f F=%.4f\n", eval_method.c_str(), row.precision, row.recall,
                  row.f_score);
    }
    return 0;
  } catch (const lcd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == lcd::ErrorCode::invalid_config ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

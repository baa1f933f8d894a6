// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. The benchmark-backed criteria (1, 2, 3, 10) share two full
// benchmark runs of the reference tiny-scale configuration.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "lcd/lifecycle.hpp"
#include "oracles.hpp"

using namespace lcd;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
  std::printf("%s criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, what.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

ExperimentConfig reference_config(const std::filesystem::path& out) {
#ifdef LCD_SOURCE_DIR
  std::filesystem::path cfg_path = std::filesystem::path(LCD_SOURCE_DIR) / "configs" /
                                   "bench_tiny.json";
  ExperimentConfig cfg = load_config(cfg_path);
#else
  ExperimentConfig cfg;
#endif
  cfg.out = out.string();
  return cfg;
}

struct CellKey {
  std::string workspace, group;
  bool operator<(const CellKey& o) const {
    return workspace != o.workspace ? workspace < o.workspace : group < o.group;
  }
};

std::map<CellKey, std::map<std::string, double>> by_cell(const std::vector<MetricsRecord>& rows) {
  std::map<CellKey, std::map<std::string, double>> out;
  for (const auto& r : rows) out[{r.workspace, r.group}][r.method_tag] = r.f_score;
  return out;
}

// ---- criteria 1 + 2 + 3 + 10: benchmark-backed ----------------------------

void run_benchmark_criteria() {
  std::filesystem::path base = "acceptance_out";
  std::filesystem::remove_all(base);
  ExperimentConfig cfg = reference_config(base / "run1");

  auto t0 = std::chrono::steady_clock::now();
  BenchmarkResult r1 = run_benchmark(cfg, base / "run1");
  double bench_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                             .count();

  auto cells = by_cell(r1.rows);

  // criterion 1: proposed vs generic ordering
  {
    int total = 0, wins = 0;
    double improvement_sum = 0.0;
    for (const auto& [key, methods] : cells) {
      auto gi = methods.find("generic");
      auto pi = methods.find("proposed");
      if (gi == methods.end() || pi == methods.end()) continue;
      ++total;
      if (pi->second >= gi->second) ++wins;
      improvement_sum += pi->second - gi->second;
    }
    double mean_improvement = total ? improvement_sum / total : 0.0;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "proposed >= generic in %d/%d cells, mean improvement %+.4f, wall %.0f s",
                  wins, total, mean_improvement, bench_seconds);
    report(1, total == 8 && wins >= 6 && mean_improvement >= 0.03 && bench_seconds < 7200.0,
           "proposed outperforms the generation-0 detector", detail);
  }

  // criterion 2: filter ablation ordering
  {
    int total = 0, wins = 0;
    for (const auto& [key, methods] : cells) {
      auto wi = methods.find("proposed");
      auto wo = methods.find("ablation_no_filter");
      if (wi == methods.end() || wo == methods.end()) continue;
      ++total;
      if (wi->second >= wo->second) ++wins;
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "with-filter >= without in %d/%d cells", wins, total);
    report(2, total == 8 && wins >= 5, "prior filtering helps", detail);
  }

  // criterion 3: frozen-encoder checksums across every retrain in every cell
  {
    bool ok = true;
    std::string detail = "all encoder checksums bit-identical";
    for (const auto& entry :
         std::filesystem::directory_iterator(base / "run1" / "cells")) {
      auto meta = [&](const std::string& gen) {
        std::ifstream is(entry.path() / "detector" / gen / "meta.json");
        nlohmann::json j;
        is >> j;
        return j["encoder_checksum"].get<std::string>();
      };
      std::string gen0 = meta("gen0");
      for (const std::string tag : {"gen1", "gen1_nofilter"}) {
        if (!std::filesystem::exists(entry.path() / "detector" / tag)) {
          ok = false;
          detail = "missing retrained model in " + entry.path().filename().string();
          continue;
        }
        if (meta(tag) != gen0) {
          ok = false;
          detail = "encoder drifted in " + entry.path().filename().string() + "/" + tag;
        }
      }
    }
    report(3, ok, "encoder frozen across every retrain", detail);
  }

  // criterion 10: byte-identical metrics.csv across two full runs
  {
    ExperimentConfig cfg2 = reference_config(base / "run2");
    BenchmarkResult r2 = run_benchmark(cfg2, base / "run2");
    std::string a = slurp(r1.metrics_csv);
    std::string b = slurp(r2.metrics_csv);
    char detail[96];
    std::snprintf(detail, sizeof(detail), "%zu bytes vs %zu bytes", a.size(), b.size());
    report(10, !a.empty() && a == b, "two benchmark runs produce identical metrics.csv", detail);
  }
}

// ---- criterion 4: correlation equals the brute-force oracle ---------------

void criterion_correlation() {
  Rng rng(401);
  double max_err = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    int c = rng.uniform_int(1, 8), h = rng.uniform_int(1, 16), w = rng.uniform_int(1, 16);
    int d = rng.uniform_int(0, 2);
    nn::Tensor<float> a(c, h, w), b(c, h, w);
    for (auto& v : a.v) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : b.v) v = static_cast<float>(rng.uniform(-1, 1));
    nn::Tensor<float> mine = correlation_layer(a, b, d);
    nn::Tensor<float> ref = oracles::brute_force_correlation(a, b, d);
    for (size_t i = 0; i < mine.v.size(); ++i)
      max_err = std::max(max_err, std::abs(static_cast<double>(mine.v[i]) - ref.v[i]));
  }
  char detail[64];
  std::snprintf(detail, sizeof(detail), "max abs err %.3g over 100 pairs", max_err);
  report(4, max_err <= 1e-6, "correlation layer matches triple-loop oracle", detail);
}

// ---- criterion 5: analytic vs finite-difference gradients ------------------

void criterion_gradients() {
  DetectorArch arch;
  arch.enc_widths = {2, 4, 4, 4};
  arch.dec_widths = {4, 4, 4, 4};
  arch.head_width = 2;
  arch.max_disp = 1;
  DetectorNet<double> net(arch);
  net.init(501);
  if (net.param_count() > 10000) {
    report(5, false, "gradient check", "model exceeds 1e4 parameters");
    return;
  }

  Rng rng(502);
  nn::Tensor<double> ref(3, 16, 16), live(3, 16, 16);
  for (auto& v : ref.v) v = rng.uniform(0, 1);
  for (auto& v : live.v) v = rng.uniform(0, 1);
  ImageU8 mask(16, 16, 1, 0);
  for (int i = 0; i < 30; ++i) mask.at(rng.uniform_int(0, 15), rng.uniform_int(0, 15)) = 255;
  const double pos_w = 4.0, inv_norm = 1.0 / 256.0;

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

  Rng pick(503);
  double worst = 0.0;
  int checked = 0;
  while (checked < 20) {
    size_t ti = pick.next_below(params.size());
    size_t i = pick.next_below(params[ti].value->size());
    double analytic = (*params[ti].grad)[i];
    double* slot = &(*params[ti].value)[i];
    double orig = *slot, h = 1e-6;
    *slot = orig + h;
    double up = loss();
    *slot = orig - h;
    double down = loss();
    *slot = orig;
    double numeric = (up - down) / (2 * h);
    ++checked;
    if (std::abs(analytic) < 1e-12 && std::abs(numeric) < 1e-10) continue;
    worst = std::max(worst, std::abs(analytic - numeric) /
                                std::max({std::abs(analytic), std::abs(numeric), 1e-12}));
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "%zu params, worst rel err %.3g over 20 samples",
                net.param_count(), worst);
  report(5, worst <= 1e-3, "analytic gradients match finite differences", detail);
}

// ---- criterion 6: compositing exactness over 1000 random pastes ------------

void criterion_compositing() {
  Rng rng(601);
  ImageU8 bg(96, 72, 3);
  for (auto& v : bg.data) v = static_cast<uint8_t>(rng.next_u64() & 0xff);

  size_t mismatches = 0;
  int done = 0;
  while (done < 1000) {
    int w = rng.uniform_int(2, 20), h = rng.uniform_int(2, 20);
    ImageU8 color(w, h, 3);
    ImageU8 alpha(w, h, 1);
    for (auto& v : color.data) v = static_cast<uint8_t>(rng.next_u64() & 0xff);
    for (auto& v : alpha.data) v = static_cast<uint8_t>(rng.next_u64() & 0xff);
    alpha.at(w / 2, h / 2) = 255;
    ObjectPrior prior = make_prior(color, alpha, Provenance::generic, 0);

    double scale = rng.uniform(0.3, 2.5);
    int ow = static_cast<int>(std::lround(prior.alpha.width * scale));
    int oh = static_cast<int>(std::lround(prior.alpha.height * scale));
    if (ow < 1 || oh < 1 || ow > bg.width || oh > bg.height) continue;
    int x = rng.uniform_int(0, bg.width - ow);
    int y = rng.uniform_int(0, bg.height - oh);
    SamplePair s;
    try {
      s = paste_object(bg, prior, x, y, scale);
    } catch (const Error&) {
      continue;  // degenerate scaled footprint; not a paste
    }
    ++done;
    ImageU8 expect = oracles::nn_alpha_footprint(prior.alpha, ow, oh, kAlphaThreshold);
    for (int j = 0; j < oh; ++j)
      for (int i = 0; i < ow; ++i)
        mismatches += (s.mask.at(x + i, y + j) != 0) != (expect.at(i, j) != 0);
    // outside the paste box the mask must be empty
    long long inside = static_cast<long long>(count_nonzero(expect));
    long long total = static_cast<long long>(count_nonzero(s.mask));
    mismatches += static_cast<size_t>(std::abs(total - inside));
  }
  char detail[64];
  std::snprintf(detail, sizeof(detail), "%zu mismatched pixels over 1000 pastes", mismatches);
  report(6, mismatches == 0, "paste masks equal the resampling oracle exactly", detail);
}

// ---- criterion 7: metric identities over 1e4 random mask pairs -------------

void criterion_metric_identities() {
  Rng rng(701);
  size_t violations = 0;
  for (int rep = 0; rep < 10000; ++rep) {
    int w = rng.uniform_int(1, 12), h = rng.uniform_int(1, 12);
    ImageU8 a(w, h, 1), b(w, h, 1);
    double density = rng.uniform();
    for (auto& v : a.data) v = rng.uniform() < density ? 255 : 0;
    for (auto& v : b.data) v = rng.uniform() < density ? 255 : 0;
    MetricsRecord ab = pixel_metrics(a, b);
    MetricsRecord ba = pixel_metrics(b, a);

    if (ab.tp + ab.fp + ab.fn + ab.tn != static_cast<uint64_t>(w) * h) ++violations;
    if (ab.precision != ba.recall || ab.recall != ba.precision) ++violations;
    double expect_f = ab.precision + ab.recall > 0
                          ? 2.0 * ab.precision * ab.recall / (ab.precision + ab.recall)
                          : 0.0;
    if (ab.f_score != expect_f) ++violations;
    if ((ab.f_score == 0.0) != (ab.tp == 0)) ++violations;
  }
  char detail[64];
  std::snprintf(detail, sizeof(detail), "%zu violations over 10000 pairs", violations);
  report(7, violations == 0, "metric identities hold exactly", detail);
}

// ---- criterion 8: ingestion rule fuzz --------------------------------------

void criterion_ingestion() {
  KnowledgeBase kb;
  kb.init_with_generic(make_generic_priors(801, 1));
  Rng rng(802);
  size_t wrong = 0;
  for (int i = 0; i < 1000; ++i) {
    size_t area = static_cast<size_t>(rng.next_below(40));
    // 1 x max(1, area) bbox, fully filled: tight for every area >= 1
    int w = static_cast<int>(std::max<size_t>(1, area));
    Detection d;
    d.frame_id = "fuzz" + std::to_string(i);
    d.x = 0;
    d.y = 0;
    d.w = w;
    d.h = 1;
    d.color_crop = ImageU8(w, 1, 3, static_cast<uint8_t>(i & 0xff));
    d.mask_crop = ImageU8(w, 1, 1, area >= 1 ? 255 : 0);
    d.area_px = area;
    d.score = rng.uniform();
    // vary pixel content so content-addressed ids never collide
    d.color_crop.at(0, 0, 1) = static_cast<uint8_t>((i >> 8) & 0xff);
    auto r = kb.ingest_detections({d});
    bool accepted = r.accepted.size() == 1;
    if (accepted != (area >= 1)) ++wrong;
  }
  char detail[64];
  std::snprintf(detail, sizeof(detail), "%zu rule violations over 1000 detections", wrong);
  report(8, wrong == 0, "ingestion accepts exactly the area >= 1 detections", detail);
}

// ---- criterion 9: filter sanity on the separable set -----------------------

void criterion_filter() {
  auto make_set = [](int per_class, uint64_t seed) {
    std::vector<EdgeSample> out;
    Rng rng(seed);
    for (int i = 0; i < per_class * 2; ++i) {
      EdgeSample s;
      s.edge = ImageF(kEdgeSize, kEdgeSize, 1, 0.0f);
      bool pos = i < per_class;
      for (auto& v : s.edge.data) {
        if (pos && rng.uniform() < 0.3) v = static_cast<float>(rng.uniform(0.5, 1.0));
        if (!pos && rng.uniform() < 0.01) v = static_cast<float>(rng.uniform(0.0, 0.05));
      }
      s.label = pos ? EdgeLabel::positive : EdgeLabel::negative;
      out.push_back(std::move(s));
    }
    return out;
  };
  auto train_set = make_set(64, 901);
  auto held_out = make_set(32, 902);
  FilterModel model = train_filter(train_set, 10, 0.001, 32, 903);
  int correct = 0;
  for (const auto& s : held_out) {
    bool predicted = model.predict(s.edge) >= model.decision_threshold;
    correct += predicted == (s.label == EdgeLabel::positive);
  }
  double acc = static_cast<double>(correct) / static_cast<double>(held_out.size());
  char detail[64];
  std::snprintf(detail, sizeof(detail), "held-out accuracy %.3f over %zu samples", acc,
                held_out.size());
  report(9, acc >= 0.95, "edge filter separates the constructed set", detail);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n================\n");
  criterion_correlation();     // 4
  criterion_gradients();       // 5
  criterion_compositing();     // 6
  criterion_metric_identities();  // 7
  criterion_ingestion();       // 8
  criterion_filter();          // 9
  run_benchmark_criteria();    // 1, 2, 3, 10
  std::printf("================\n%s (%d failing)\n", failures == 0 ? "ALL PASS" : "FAILURES",
              failures);
  return failures == 0 ? 0 : 1;
}

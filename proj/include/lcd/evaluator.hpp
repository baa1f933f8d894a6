#pragma once
// Pixelwise precision/recall/F evaluation, micro-aggregation over runs, the
// metrics.csv table, and the method-comparison report.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lcd/error.hpp"
#include "lcd/image.hpp"

namespace lcd {

enum class MetricScope { per_image, aggregate };

struct MetricsRecord {
  uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0, recall = 0.0, f_score = 0.0;
  MetricScope scope = MetricScope::per_image;
  std::string run_id, method_tag, workspace, group;
  double macro_f = 0.0;  // aggregate only: mean of per-image F

  // zero-denominator convention: undefined rates are 0
  void derive_rates() {
    precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    f_score = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
};

inline MetricsRecord pixel_metrics(const ImageU8& pred, const ImageU8& gt) {
  if (pred.width != gt.width || pred.height != gt.height)
    fail(ErrorCode::invalid_input, "prediction/ground-truth dimensions differ");
  MetricsRecord m;
  for (int y = 0; y < pred.height; ++y)
    for (int x = 0; x < pred.width; ++x) {
      bool p = pred.at(x, y) != 0;
      bool g = gt.at(x, y) != 0;
      m.tp += p && g;
      m.fp += p && !g;
      m.fn += !p && g;
      m.tn += !p && !g;
    }
  m.derive_rates();
  m.scope = MetricScope::per_image;
  return m;
}

// Micro-aggregation: counts are summed across images, then rates derived from
// the sums. The per-image macro mean F rides along for the report.
inline MetricsRecord aggregate(const std::vector<MetricsRecord>& records) {
  if (records.empty()) fail(ErrorCode::insufficient_data, "nothing to aggregate");
  MetricsRecord agg;
  agg.scope = MetricScope::aggregate;
  agg.run_id = records.front().run_id;
  agg.method_tag = records.front().method_tag;
  agg.workspace = records.front().workspace;
  agg.group = records.front().group;
  double macro_sum = 0.0;
  for (const auto& r : records) {
    agg.tp += r.tp;
    agg.fp += r.fp;
    agg.fn += r.fn;
    agg.tn += r.tn;
    macro_sum += r.f_score;
  }
  agg.derive_rates();
  agg.macro_f = macro_sum / static_cast<double>(records.size());
  return agg;
}

// --------------------------------------------------------------- metrics.csv

inline void write_metrics_csv(const std::filesystem::path& path,
                              const std::vector<MetricsRecord>& rows) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  os << "run_id,method,workspace,group,tp,fp,fn,tn,precision,recall,f_score\n";
  char buf[64];
  for (const auto& r : rows) {
    os << r.run_id << ',' << r.method_tag << ',' << r.workspace << ',' << r.group << ','
       << r.tp << ',' << r.fp << ',' << r.fn << ',' << r.tn;
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%.6f\n", r.precision, r.recall, r.f_score);
    os << buf;
  }
}

inline std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::not_found, "missing metrics csv: " + path.string());
  std::vector<MetricsRecord> rows;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i)
      if (i == line.size() || line[i] == ',') {
        cols.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    if (cols.size() != 11) fail(ErrorCode::invalid_input, "malformed metrics row: " + line);
    MetricsRecord r;
    r.scope = MetricScope::aggregate;
    r.run_id = cols[0];
    r.method_tag = cols[1];
    r.workspace = cols[2];
    r.group = cols[3];
    r.tp = std::stoull(cols[4]);
    r.fp = std::stoull(cols[5]);
    r.fn = std::stoull(cols[6]);
    r.tn = std::stoull(cols[7]);
    r.precision = std::stod(cols[8]);
    r.recall = std::stod(cols[9]);
    r.f_score = std::stod(cols[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

// -------------------------------------------------------------------- report

namespace eval_detail {

inline std::string pct(double f) {  // F on the 0..100 scale, one decimal
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.1f", f * 100.0);
  return buf;
}

inline std::string signed_pct(double d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%+.1f", d * 100.0);
  return buf;
}

}  // namespace eval_detail

// Markdown comparison document: per-cell F table across methods, pairwise
// difference tables with sign, and per-method win counts.
inline std::string compare_report(const std::vector<MetricsRecord>& aggregates) {
  std::set<std::string> method_set;
  std::set<std::pair<std::string, std::string>> cell_set;
  std::map<std::pair<std::string, std::string>, std::map<std::string, const MetricsRecord*>> table;
  for (const auto& r : aggregates) {
    method_set.insert(r.method_tag);
    auto cell = std::make_pair(r.workspace, r.group);
    cell_set.insert(cell);
    table[cell][r.method_tag] = &r;
  }
  if (method_set.size() < 2)
    fail(ErrorCode::invalid_input, "comparison needs at least two methods");
  std::vector<std::string> methods(method_set.begin(), method_set.end());

  std::string out;
  out += "# Change-detection comparison\n\n";
  out += "F-scores (micro over pixels, x100). Missing cells are marked `-`.\n\n";
  out += "| workspace | group |";
  for (const auto& m : methods) out += " " + m + " |";
  out += "\n|---|---|";
  for (size_t i = 0; i < methods.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& cell : cell_set) {
    out += "| " + cell.first + " | " + cell.second + " |";
    for (const auto& m : methods) {
      auto it = table[cell].find(m);
      out += it == table[cell].end() ? " - |" : " " + eval_detail::pct(it->second->f_score) + " |";
    }
    out += "\n";
  }

  out += "\n## Pairwise differences\n";
  for (size_t i = 0; i < methods.size(); ++i) {
    for (size_t j = 0; j < methods.size(); ++j) {
      if (i == j) continue;
      const std::string& a = methods[i];
      const std::string& b = methods[j];
      // emit each unordered pair once, in a fixed direction
      if (a > b) continue;
      out += "\n### " + b + " minus " + a + "\n\n";
      out += "| workspace | group | " + a + " | " + b + " | difference |\n|---|---|---|---|---|\n";
      int wins = 0, losses = 0, cells = 0;
      for (const auto& cell : cell_set) {
        auto ia = table[cell].find(a);
        auto ib = table[cell].find(b);
        if (ia == table[cell].end() || ib == table[cell].end()) {
          out += "| " + cell.first + " | " + cell.second + " | - | - | - |\n";
          continue;
        }
        double diff = ib->second->f_score - ia->second->f_score;
        ++cells;
        wins += diff > 0;
        losses += diff < 0;
        out += "| " + cell.first + " | " + cell.second + " | " +
               eval_detail::pct(ia->second->f_score) + " | " +
               eval_detail::pct(ib->second->f_score) + " | **" + eval_detail::signed_pct(diff) +
               "** |\n";
      }
      out += "\n" + b + " wins " + std::to_string(wins) + "/" + std::to_string(cells) +
             " cells (ties " + std::to_string(cells - wins - losses) + ").\n";
    }
  }

  out += "\n## Win counts (best F per cell)\n\n";
  std::map<std::string, int> wins;
  for (const auto& cell : cell_set) {
    const MetricsRecord* best = nullptr;
    for (const auto& m : methods) {
      auto it = table[cell].find(m);
      if (it != table[cell].end() && (!best || it->second->f_score > best->f_score))
        best = it->second;
    }
    if (best) ++wins[best->method_tag];
  }
  for (const auto& m : methods)
    out += "- " + m + ": " + std::to_string(wins[m]) + "\n";
  return out;
}

}  // namespace lcd

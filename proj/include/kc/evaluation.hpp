#pragma once

// Per-vertical average precision.
//
// For one vertical, only test samples whose groundtruth maps to that
// vertical are ranked, and only that vertical's class columns are read.
// Each class gets an AP over those samples; pvap is the mean over classes
// that have at least one positive, and mpvap the unweighted mean of pvap.

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <ostream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kc/error.hpp"
#include "kc/io.hpp"
#include "kc/taxonomy.hpp"

namespace kc {

// Mean over positives of precision at the positive's rank. Rank order is
// descending score, ties broken by ascending id.
inline double average_precision(std::span<const double> scores,
                                std::span<const std::uint8_t> relevant,
                                std::span<const std::uint64_t> ids) {
  if (scores.size() != relevant.size() || scores.size() != ids.size()) {
    throw DimensionError("average_precision: input lengths differ");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!relevant[order[rank]]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
  }
  if (hits == 0) throw UndefinedApError("average_precision: no positives");
  return sum / static_cast<double>(hits);
}

// Dense score table: rows are samples, columns are class label ids.
struct Predictions {
  std::vector<std::uint64_t> sample_ids;
  std::vector<LabelId> labels;
  std::vector<LabelId> class_ids;
  std::vector<double> scores;  // [sample_ids.size() x class_ids.size()]

  std::size_t column(LabelId label) const {
    auto it = std::find(class_ids.begin(), class_ids.end(), label);
    if (it == class_ids.end()) {
      throw LookupError("predictions: no column for class " +
                        std::to_string(label));
    }
    return static_cast<std::size_t>(it - class_ids.begin());
  }
};

struct ClassAp {
  LabelId class_id = 0;
  double ap = 0.0;
};

struct VerticalResult {
  LabelId vertical = 0;
  double pvap = 0.0;
  std::size_t num_samples = 0;
  std::size_t skipped_classes = 0;  // no positives in the test samples
  std::vector<ClassAp> class_ap;
};

struct EvalResult {
  std::vector<VerticalResult> verticals;
  double mpvap = 0.0;
  std::size_t skipped_classes = 0;
};

inline VerticalResult pvap(const Predictions& preds, const LabelTaxonomy& tax,
                           LabelId vertical) {
  const std::size_t ncols = preds.class_ids.size();
  if (preds.scores.size() != preds.sample_ids.size() * ncols ||
      preds.labels.size() != preds.sample_ids.size()) {
    throw DimensionError("pvap: prediction table is inconsistent");
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < preds.labels.size(); ++r)
    if (f_map(tax, preds.labels[r]) == vertical) rows.push_back(r);
  if (rows.empty()) {
    throw NoDataError("pvap: no test samples for vertical " +
                      std::to_string(vertical));
  }
  VerticalResult out;
  out.vertical = vertical;
  out.num_samples = rows.size();
  std::vector<double> col(rows.size());
  std::vector<std::uint8_t> rel(rows.size());
  std::vector<std::uint64_t> ids(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) ids[i] = preds.sample_ids[rows[i]];
  for (LabelId cls : tax.leaves_of(vertical)) {
    const std::size_t c = preds.column(cls);
    std::size_t positives = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      col[i] = preds.scores[rows[i] * ncols + c];
      rel[i] = preds.labels[rows[i]] == cls;
      positives += rel[i];
    }
    if (positives == 0) {
      ++out.skipped_classes;
      continue;
    }
    out.class_ap.push_back({cls, average_precision(col, rel, ids)});
  }
  double total = 0.0;
  for (const auto& c : out.class_ap) total += c.ap;
  out.pvap = total / static_cast<double>(out.class_ap.size());
  return out;
}

inline double mpvap(std::span<const double> pvaps) {
  if (pvaps.empty()) throw ContractError("mpvap: no verticals");
  double total = 0.0;
  for (double v : pvaps) total += v;
  return total / static_cast<double>(pvaps.size());
}

inline EvalResult evaluate(const Predictions& preds, const LabelTaxonomy& tax) {
  EvalResult out;
  std::vector<double> values;
  for (LabelId v : tax.vertical_roots()) {
    out.verticals.push_back(pvap(preds, tax, v));
    values.push_back(out.verticals.back().pvap);
    out.skipped_classes += out.verticals.back().skipped_classes;
  }
  out.mpvap = mpvap(values);
  return out;
}

inline nlohmann::ordered_json eval_to_json(const EvalResult& r,
                                           const LabelTaxonomy& tax) {
  nlohmann::ordered_json j;
  j["mpvap"] = r.mpvap;
  j["skipped_classes"] = r.skipped_classes;
  j["verticals"] = nlohmann::ordered_json::array();
  for (const auto& v : r.verticals) {
    nlohmann::ordered_json e;
    e["vertical"] = v.vertical;
    e["name"] = tax.node(v.vertical).name;
    e["pvap"] = v.pvap;
    e["samples"] = v.num_samples;
    e["skipped_classes"] = v.skipped_classes;
    e["class_ap"] = nlohmann::ordered_json::array();
    for (const auto& c : v.class_ap)
      e["class_ap"].push_back(nlohmann::ordered_json::array({c.class_id, c.ap}));
    j["verticals"].push_back(std::move(e));
  }
  return j;
}

// One table row per method, columns per vertical, then the mean; values in
// percent.
inline std::string eval_table(
    const std::vector<std::pair<std::string, EvalResult>>& rows,
    const LabelTaxonomy& tax) {
  std::ostringstream os;
  os << std::left << std::setw(28) << "method";
  for (LabelId v : tax.vertical_roots())
    os << std::right << std::setw(12) << tax.node(v).name;
  os << std::setw(8) << "mean" << '\n';
  os << std::fixed << std::setprecision(1);
  for (const auto& [label, r] : rows) {
    os << std::left << std::setw(28) << label << std::right;
    for (const auto& v : r.verticals) os << std::setw(12) << 100.0 * v.pvap;
    os << std::setw(8) << 100.0 * r.mpvap << '\n';
  }
  return os.str();
}

struct LossCurve {
  std::string label;
  std::vector<double> losses;  // one per step, step = index
};

// CSV with header "step,run,loss"; rows grouped by run, then step.
inline std::string export_loss_curves(std::span<const LossCurve> runs) {
  for (const auto& r : runs) {
    if (r.label.find_first_of(",\n\r\"") != std::string::npos) {
      throw ValidationError("loss curve label '" + r.label +
                            "' contains a CSV delimiter");
    }
    if (r.losses.size() != runs[0].losses.size()) {
      throw ValidationError("loss curves do not share a step grid ('" +
                            runs[0].label + "' vs '" + r.label + "')");
    }
  }
  std::string out = "step,run,loss\n";
  for (const auto& r : runs)
    for (std::size_t s = 0; s < r.losses.size(); ++s)
      out += std::to_string(s) + "," + r.label + "," + format_double(r.losses[s]) + "\n";
  return out;
}

inline std::vector<LossCurve> parse_loss_curves(std::string_view csv) {
  std::vector<LossCurve> out;
  std::istringstream is{std::string(csv)};
  std::string line;
  if (!std::getline(is, line) || line != "step,run,loss") {
    throw FormatError("loss curve CSV: missing header");
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto a = line.find(',');
    const auto b = line.rfind(',');
    if (a == std::string::npos || a == b) {
      throw FormatError("loss curve CSV line " + std::to_string(lineno) +
                        ": expected 3 fields");
    }
    const std::string label = line.substr(a + 1, b - a - 1);
    const std::size_t step = std::stoul(line.substr(0, a));
    const double loss = std::strtod(line.c_str() + b + 1, nullptr);
    if (out.empty() || out.back().label != label) out.push_back({label, {}});
    if (step != out.back().losses.size()) {
      throw FormatError("loss curve CSV line " + std::to_string(lineno) +
                        ": steps out of order");
    }
    out.back().losses.push_back(loss);
  }
  return out;
}

// Prediction file: a header line {"class_ids": [...]} followed by one line
// per sample {"sample_id", "label_id", "scores": [...]} in column order.
inline void write_predictions(std::ostream& os, const Predictions& p) {
  nlohmann::ordered_json head;
  head["class_ids"] = p.class_ids;
  os << head.dump() << '\n';
  const std::size_t C = p.class_ids.size();
  for (std::size_t r = 0; r < p.sample_ids.size(); ++r) {
    nlohmann::ordered_json j;
    j["sample_id"] = p.sample_ids[r];
    j["label_id"] = p.labels[r];
    j["scores"] = std::vector<double>(p.scores.begin() + r * C,
                                      p.scores.begin() + (r + 1) * C);
    os << j.dump() << '\n';
  }
}

inline Predictions read_predictions(std::istream& is) {
  Predictions p;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        p.class_ids = j.at("class_ids").get<std::vector<LabelId>>();
        have_header = true;
        continue;
      }
      const auto scores = j.at("scores").get<std::vector<double>>();
      if (scores.size() != p.class_ids.size()) {
        throw FormatError("predictions line " + std::to_string(lineno) + ": " +
                          std::to_string(scores.size()) + " scores for " +
                          std::to_string(p.class_ids.size()) + " classes");
      }
      p.sample_ids.push_back(j.at("sample_id").get<std::uint64_t>());
      p.labels.push_back(j.at("label_id").get<LabelId>());
      p.scores.insert(p.scores.end(), scores.begin(), scores.end());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("predictions line " + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
  if (!have_header) throw FormatError("predictions: missing header line");
  return p;
}

}  // namespace kc

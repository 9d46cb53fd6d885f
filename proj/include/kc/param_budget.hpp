#pragma once

// Closed-form weight counts for the four two-layer top structures.
// Biases are not counted; models built with biases report them separately.

#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kc/error.hpp"

namespace kc {

enum class Topology {
  kFcFc,         // FC(s1)-FC(s2)
  kFcSc,         // FC(s1s)-SC(s2): shared top-1, per-vertical top-2
  kScSc,         // SC(s1i)-SC(s2): per-vertical top-1 and top-2
  kFcScGeneric,  // FC(s1s)-SC(s2,x): top-2 split into shared x + (s2-x) each
};

inline std::string_view topology_name(Topology t) {
  switch (t) {
    case Topology::kFcFc: return "fc-fc";
    case Topology::kFcSc: return "fc-sc";
    case Topology::kScSc: return "sc-sc";
    case Topology::kFcScGeneric: return "fc-sc-generic";
  }
  return "?";
}

inline Topology parse_topology(std::string_view s) {
  for (auto t : {Topology::kFcFc, Topology::kFcSc, Topology::kScSc,
                 Topology::kFcScGeneric})
    if (topology_name(t) == s) return t;
  throw ValidationError("unknown topology '" + std::string(s) + "'");
}

struct BudgetInput {
  Topology topology = Topology::kFcFc;
  std::uint64_t num_classes = 0;    // N
  std::uint64_t num_verticals = 0;  // M
  std::uint64_t base_size = 0;      // s_b
  std::uint64_t top1_size = 0;      // s1, s1s or s1i
  std::uint64_t top2_size = 0;      // s2
  std::uint64_t generic_size = 0;   // x, FC_SC_GENERIC only

  void validate() const {
    auto positive = [](std::uint64_t v, const char* name) {
      if (v == 0) throw ValidationError(std::string(name) + " must be positive");
    };
    positive(num_classes, "num_classes");
    positive(num_verticals, "num_verticals");
    positive(base_size, "base_size");
    positive(top1_size, "top1_size");
    positive(top2_size, "top2_size");
    if (generic_size > top2_size) {
      throw ValidationError("generic_size " + std::to_string(generic_size) +
                            " exceeds top2_size " + std::to_string(top2_size));
    }
    if (generic_size != 0 && topology != Topology::kFcScGeneric) {
      throw ValidationError("generic_size is only valid for fc-sc-generic");
    }
  }
};

inline std::uint64_t count_params(const BudgetInput& in) {
  in.validate();
  const auto N = in.num_classes, M = in.num_verticals, sb = in.base_size,
             s1 = in.top1_size, s2 = in.top2_size, x = in.generic_size;
  switch (in.topology) {
    case Topology::kFcFc: return s2 * N + s2 * s1 + s1 * sb;
    case Topology::kFcSc: return s2 * N + M * s2 * s1 + s1 * sb;
    case Topology::kScSc: return s2 * N + M * s2 * s1 + M * s1 * sb;
    case Topology::kFcScGeneric:
      return s2 * N + M * (s2 - x) * s1 + x * s1 + s1 * sb;
  }
  return 0;
}

inline std::string budget_label(const BudgetInput& in) {
  std::ostringstream os;
  switch (in.topology) {
    case Topology::kFcFc:
      os << "FC" << in.top1_size << "-FC" << in.top2_size;
      break;
    case Topology::kFcSc:
      os << "FC" << in.top1_size << "-SC" << in.top2_size;
      break;
    case Topology::kScSc:
      os << "SC" << in.top1_size << "-SC" << in.top2_size;
      break;
    case Topology::kFcScGeneric:
      os << "FC" << in.top1_size << "-SC(" << in.top2_size << ","
         << in.generic_size << ")";
      break;
  }
  return os.str();
}

struct BudgetRow {
  std::string label;
  BudgetInput input;
  std::uint64_t params = 0;
  std::optional<std::int64_t> delta;  // vs baseline; absent for the baseline
  std::uint64_t bytes = 0;            // 8 bytes per parameter

  bool operator==(const BudgetRow& o) const {
    return label == o.label && params == o.params && delta == o.delta &&
           bytes == o.bytes && input.topology == o.input.topology &&
           input.num_classes == o.input.num_classes &&
           input.num_verticals == o.input.num_verticals &&
           input.base_size == o.input.base_size &&
           input.top1_size == o.input.top1_size &&
           input.top2_size == o.input.top2_size &&
           input.generic_size == o.input.generic_size;
  }
};

struct BudgetReport {
  std::size_t baseline = 0;
  std::vector<BudgetRow> rows;
  bool operator==(const BudgetReport&) const = default;
};

inline BudgetReport compare_budgets(const std::vector<BudgetInput>& inputs,
                                    std::size_t baseline = 0) {
  if (inputs.empty()) throw ValidationError("compare_budgets: no inputs");
  if (baseline >= inputs.size()) {
    throw ValidationError("compare_budgets: baseline index out of range");
  }
  BudgetReport report;
  report.baseline = baseline;
  const auto base = static_cast<std::int64_t>(count_params(inputs[baseline]));
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    BudgetRow row;
    row.label = budget_label(inputs[i]);
    row.input = inputs[i];
    row.params = count_params(inputs[i]);
    row.bytes = row.params * 8;
    if (inputs.size() > 1 && i != baseline)
      row.delta = static_cast<std::int64_t>(row.params) - base;
    report.rows.push_back(std::move(row));
  }
  return report;
}

inline nlohmann::ordered_json budget_to_json(const BudgetReport& r) {
  nlohmann::ordered_json j;
  j["baseline"] = r.baseline;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json e;
    e["label"] = row.label;
    e["topology"] = topology_name(row.input.topology);
    e["num_classes"] = row.input.num_classes;
    e["num_verticals"] = row.input.num_verticals;
    e["base_size"] = row.input.base_size;
    e["top1_size"] = row.input.top1_size;
    e["top2_size"] = row.input.top2_size;
    e["generic_size"] = row.input.generic_size;
    e["params"] = row.params;
    e["delta"] = row.delta ? nlohmann::ordered_json(*row.delta)
                           : nlohmann::ordered_json(nullptr);
    e["bytes"] = row.bytes;
    j["rows"].push_back(std::move(e));
  }
  return j;
}

inline BudgetReport budget_from_json(const nlohmann::json& j) {
  try {
    BudgetReport r;
    r.baseline = j.at("baseline").get<std::size_t>();
    for (const auto& e : j.at("rows")) {
      BudgetRow row;
      row.label = e.at("label").get<std::string>();
      row.input.topology = parse_topology(e.at("topology").get<std::string>());
      row.input.num_classes = e.at("num_classes").get<std::uint64_t>();
      row.input.num_verticals = e.at("num_verticals").get<std::uint64_t>();
      row.input.base_size = e.at("base_size").get<std::uint64_t>();
      row.input.top1_size = e.at("top1_size").get<std::uint64_t>();
      row.input.top2_size = e.at("top2_size").get<std::uint64_t>();
      row.input.generic_size = e.at("generic_size").get<std::uint64_t>();
      row.params = e.at("params").get<std::uint64_t>();
      if (!e.at("delta").is_null()) row.delta = e["delta"].get<std::int64_t>();
      row.bytes = e.at("bytes").get<std::uint64_t>();
      r.rows.push_back(std::move(row));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("budget report: ") + e.what());
  }
}

inline std::string budget_to_text(const BudgetReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "architecture" << std::right
     << std::setw(14) << "params" << std::setw(14) << "delta" << std::setw(16)
     << "bytes" << '\n';
  for (const auto& row : r.rows) {
    os << std::left << std::setw(24) << row.label << std::right
       << std::setw(14) << row.params << std::setw(14)
       << (row.delta ? std::to_string(*row.delta) : std::string("-"))
       << std::setw(16) << row.bytes << '\n';
  }
  return os.str();
}

}  // namespace kc

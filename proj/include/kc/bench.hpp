#pragma once

// The seeded desk-scale benchmark: one dataset, one teacher per vertical,
// then every student arm needed by the distillation, topology and
// self-paced ablations plus the five loss-curve variants. Arms that appear
// in several groups are trained once.
//
// Output layout under `out`:
//   config.json
//   data/taxonomy.jsonl, data/dataset.jsonl
//   teachers/vertical_<id>.ckpt, teachers/loss.csv
//   soft_targets.jsonl
//   arms/<arm>/model.ckpt, arms/<arm>/loss.csv, arms/<arm>/eval.json
//   gamma_loss_curves.csv
//   report.json, report.txt
// Nothing written depends on wall-clock time, so two runs with the same
// config are byte-identical.

#include <chrono>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kc/config.hpp"
#include "kc/evaluation.hpp"
#include "kc/log.hpp"
#include "kc/pipeline.hpp"

namespace kc {

struct BenchArm {
  std::string name;
  NetConfig net;
  bool distill = true;
};

// A report row names the arm it reads from.
struct BenchRow {
  std::string table;
  std::string row;
  std::string arm;
};

inline constexpr const char* kSpecialistsArm = "specialists";

// The tuned profile behind the default benchmark. RunConfig{} keeps the
// published training defaults, which need far more steps than fit in the
// benchmark's time budget.
inline RunConfig bench_profile() {
  RunConfig c;
  c.seed = 7;
  c.label = "default-benchmark";
  c.out = "kc_bench";
  // Four verticals of unequal size, 100 leaves in total, 150 training
  // samples per leaf so the teachers cannot simply memorize their data.
  c.data.vertical_sizes = {10, 20, 30, 40};
  c.data.train_per_class = 150;
  c.data.noise_scale = 0.5;
  c.data.vertical_scale = 1.0;
  c.data.class_scale = 0.7;
  c.data.mode_scale = 0.35;

  c.teacher.base_hidden = 64;
  c.teacher.base_size = 64;
  c.teacher.top1_size = 64;
  c.teacher.top2_size = 64;
  c.teacher.use_bias = true;
  c.teacher_train.learning_rate = 0.1;
  c.teacher_train.adagrad_init = 0.0;
  c.teacher_train.epochs = 60;

  c.student.base_hidden = 32;
  c.student.base_size = 16;
  c.student.top1_size = 64;
  c.student.top2_size = 32;
  c.student.use_bias = true;
  c.train.learning_rate = 1.0;
  c.train.adagrad_init = 0.1;
  c.train.epochs = 120;
  return c;
}

inline std::vector<BenchArm> bench_arms(const NetConfig& student) {
  auto with = [&](Topology t, ScaleMode mode, GammaInit init, bool trainable) {
    NetConfig n = student;
    n.topology = t;
    n.head.mode = mode;
    const double dev = student.head.init.dev;
    n.head.init = init;
    n.head.init.dev = dev;
    n.head.trainable = trainable;
    return n;
  };
  const GammaInit sqrt_nv{};
  GammaInit ten;
  ten.kind = GammaInit::Kind::kConstant;
  ten.value = 10.0;
  const auto none = ScaleMode::kNone, vert = ScaleMode::kVertical,
             cls = ScaleMode::kClass;
  return {
      {"fc-fc", with(Topology::kFcFc, none, sqrt_nv, true), false},
      {"fc-fc+D", with(Topology::kFcFc, none, sqrt_nv, true), true},
      {"sc-sc", with(Topology::kScSc, none, sqrt_nv, true), false},
      {"sc-sc+D", with(Topology::kScSc, none, sqrt_nv, true), true},
      {"fc-sc+D", with(Topology::kFcSc, none, sqrt_nv, true), true},
      {"fc-sc+D+vertical", with(Topology::kFcSc, vert, sqrt_nv, true), true},
      {"fc-sc+D+class", with(Topology::kFcSc, cls, sqrt_nv, true), true},
      {"fc-sc+D+vertical-fixed", with(Topology::kFcSc, vert, sqrt_nv, false), true},
      {"fc-sc+D+vertical-mean10", with(Topology::kFcSc, vert, ten, true), true},
      {"fc-sc+D+class-mean10", with(Topology::kFcSc, cls, ten, true), true},
  };
}

inline const std::vector<BenchRow>& bench_rows() {
  static const std::vector<BenchRow> rows = {
      {"distillation", "FC-FC", "fc-fc"},
      {"distillation", "FC-FC+D", "fc-fc+D"},
      {"distillation", "SC-SC", "sc-sc"},
      {"distillation", "SC-SC+D", "sc-sc+D"},
      {"topology", "FC-FC", "fc-fc+D"},
      {"topology", "FC-SC", "fc-sc+D"},
      {"topology", "SC-SC", "sc-sc+D"},
      {"self-paced", "w/o self-paced", "fc-sc+D"},
      {"self-paced", "w/ class-level", "fc-sc+D+class"},
      {"self-paced", "w/ vertical-level", "fc-sc+D+vertical"},
      {"vs-specialists", "specialists", kSpecialistsArm},
      {"vs-specialists", "FC-FC", "fc-fc"},
      {"vs-specialists", "FC-FC+D", "fc-fc+D"},
      {"vs-specialists", "FC-SC+D", "fc-sc+D"},
      {"vs-specialists", "FC-SC+D+vertical", "fc-sc+D+vertical"},
      {"gamma", "fixed sqrt(N_v) vertical", "fc-sc+D+vertical-fixed"},
      {"gamma", "trainable mean-10 vertical", "fc-sc+D+vertical-mean10"},
      {"gamma", "trainable mean-10 class", "fc-sc+D+class-mean10"},
      {"gamma", "trainable sqrt(N_v) vertical", "fc-sc+D+vertical"},
      {"gamma", "trainable sqrt(N_v) class", "fc-sc+D+class"},
  };
  return rows;
}

struct ArmResult {
  std::string name;
  EvalResult eval;
  std::vector<double> losses;  // one per step
  double final_loss = 0.0;
};

// Differences the acceptance checks read, in mpvap points (x100) except
// for the loss gap.
struct BenchTrends {
  double distill_gain_fcfc = 0.0;   // fc-fc+D - fc-fc
  double distill_gain_scsc = 0.0;   // sc-sc+D - sc-sc
  double fcsc_over_fcfc = 0.0;      // fc-sc+D - fc-fc+D
  double vertical_gain = 0.0;       // fc-sc+D+vertical - fc-sc+D
  double class_change = 0.0;        // fc-sc+D+class - fc-sc+D
  double specialist_margin = 0.0;   // specialists - best single model
  double fixed_minus_trainable_loss = 0.0;  // final losses, fixed - trainable
};

struct BenchResult {
  EvalResult specialists;
  std::vector<ArmResult> arms;
  BenchTrends trends;

  const ArmResult& arm(std::string_view name) const {
    for (const auto& a : arms)
      if (a.name == name) return a;
    throw LookupError("bench: no arm '" + std::string(name) + "'");
  }
  double mpvap_of(std::string_view name) const {
    return name == kSpecialistsArm ? specialists.mpvap : arm(name).eval.mpvap;
  }
};

inline BenchTrends bench_trends(const BenchResult& r) {
  auto m = [&](std::string_view a) { return 100.0 * r.mpvap_of(a); };
  BenchTrends t;
  t.distill_gain_fcfc = m("fc-fc+D") - m("fc-fc");
  t.distill_gain_scsc = m("sc-sc+D") - m("sc-sc");
  t.fcsc_over_fcfc = m("fc-sc+D") - m("fc-fc+D");
  t.vertical_gain = m("fc-sc+D+vertical") - m("fc-sc+D");
  t.class_change = m("fc-sc+D+class") - m("fc-sc+D");
  double best = -1.0;
  for (const auto& a : r.arms) best = std::max(best, 100.0 * a.eval.mpvap);
  t.specialist_margin = m(kSpecialistsArm) - best;
  t.fixed_minus_trainable_loss = r.arm("fc-sc+D+vertical-fixed").final_loss -
                                 r.arm("fc-sc+D+vertical").final_loss;
  return t;
}

inline nlohmann::ordered_json trends_to_json(const BenchTrends& t) {
  nlohmann::ordered_json j;
  j["distill_gain_fcfc"] = t.distill_gain_fcfc;
  j["distill_gain_scsc"] = t.distill_gain_scsc;
  j["fcsc_over_fcfc"] = t.fcsc_over_fcfc;
  j["vertical_gain"] = t.vertical_gain;
  j["class_change"] = t.class_change;
  j["specialist_margin"] = t.specialist_margin;
  j["fixed_minus_trainable_loss"] = t.fixed_minus_trainable_loss;
  return j;
}

inline nlohmann::ordered_json bench_report_json(const BenchResult& r,
                                                const RunConfig& cfg,
                                                const LabelTaxonomy& tax) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["label"] = cfg.label;
  j["specialists"] = eval_to_json(r.specialists, tax);
  j["arms"] = nlohmann::ordered_json::array();
  for (const auto& a : r.arms) {
    nlohmann::ordered_json e;
    e["arm"] = a.name;
    e["mpvap"] = a.eval.mpvap;
    e["final_loss"] = a.final_loss;
    nlohmann::ordered_json pv;
    for (const auto& v : a.eval.verticals) pv[tax.node(v.vertical).name] = v.pvap;
    e["pvap"] = std::move(pv);
    j["arms"].push_back(std::move(e));
  }
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : bench_rows()) {
    nlohmann::ordered_json e;
    e["table"] = row.table;
    e["row"] = row.row;
    e["arm"] = row.arm;
    e["mpvap"] = r.mpvap_of(row.arm);
    if (row.arm != kSpecialistsArm) e["final_loss"] = r.arm(row.arm).final_loss;
    j["rows"].push_back(std::move(e));
  }
  j["trends"] = trends_to_json(r.trends);
  return j;
}

inline std::string bench_report_text(const BenchResult& r, const LabelTaxonomy& tax) {
  std::ostringstream os;
  std::string current;
  std::vector<std::pair<std::string, EvalResult>> rows;
  auto flush = [&] {
    if (current.empty()) return;
    os << "== " << current << '\n' << eval_table(rows, tax) << '\n';
    rows.clear();
  };
  for (const auto& row : bench_rows()) {
    if (row.table == "gamma") continue;
    if (row.table != current) {
      flush();
      current = row.table;
    }
    rows.emplace_back(row.row, row.arm == kSpecialistsArm ? r.specialists
                                                          : r.arm(row.arm).eval);
  }
  flush();
  os << "== gamma (final loss, mean over the last epoch)\n";
  for (const auto& row : bench_rows()) {
    if (row.table != "gamma") continue;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-32s %10.4f\n", row.row.c_str(),
                  r.arm(row.arm).final_loss);
    os << buf;
  }
  os << "\n== trends\n" << trends_to_json(r.trends).dump(2) << '\n';
  return os.str();
}

inline std::string loss_csv(const std::string& label, const std::vector<double>& losses) {
  const LossCurve c{label, losses};
  return export_loss_curves(std::span<const LossCurve>(&c, 1));
}

// Runs the whole benchmark, writing every artifact under `out`.
inline BenchResult run_bench(const RunConfig& cfg, const fs::path& out) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto elapsed = [&] {
    return std::to_string(std::chrono::duration<double>(clock::now() - t0).count()) + "s";
  };

  write_file_atomic(out / "config.json", config_to_json(cfg).dump(2) + "\n");
  const auto data = generate_synthetic(data_config(cfg));
  const auto& tax = data.taxonomy;
  const auto& ds = data.dataset;
  save_taxonomy(out / "data" / "taxonomy.jsonl", tax);
  save_dataset(out / "data" / "dataset.jsonl", ds);
  const ClassLayout layout = class_layout(tax);

  std::vector<Teacher> teachers;
  std::vector<LossCurve> teacher_curves;
  for (LabelId v : tax.vertical_roots()) {
    auto r = train_teacher(tax, ds, v, cfg.teacher, teacher_train_config(cfg, v));
    save_checkpoint(teacher_path(out / "teachers", v), r.teacher.model,
                    teacher_meta(r.teacher));
    log_info("bench: teacher " + tax.node(v).name + " trained (" + elapsed() + ")");
    teacher_curves.push_back({tax.node(v).name, std::move(r.losses)});
    teachers.push_back(std::move(r.teacher));
  }
  {
    std::string csv = "step,run,loss\n";
    for (const auto& c : teacher_curves)
      csv += loss_csv(c.label, c.losses).substr(14);  // drop repeated header
    write_file_atomic(out / "teachers" / "loss.csv", csv);
  }

  BenchResult res;
  res.specialists = evaluate(predict_specialists(teachers, tax, ds), tax);
  const auto soft = generate_soft_targets(tax, ds, teachers, cfg.train.top_k,
                                          cfg.train.force_groundtruth);
  save_soft_targets(out / "soft_targets.jsonl", soft);

  const TrainConfig tc = student_train_config(cfg);
  const std::size_t per_epoch =
      steps_per_epoch(ds.subset(Split::kTrain).size(), tc.batch_size);
  for (const auto& arm : bench_arms(cfg.student)) {
    auto trained = arm.distill ? train_student(tax, ds, soft, arm.net, tc)
                               : train_generalist_baseline(tax, ds, arm.net, tc);
    ArmResult a;
    a.name = arm.name;
    a.eval = evaluate(predict(trained.model, layout, ds), tax);
    a.final_loss = final_loss(trained.losses, per_epoch);
    a.losses = std::move(trained.losses);
    const fs::path dir = out / "arms" / arm.name;
    nlohmann::json meta = {{"role", "student"}, {"arm", arm.name},
                           {"distill", arm.distill}};
    save_checkpoint(dir / "model.ckpt", trained.model, meta);
    write_file_atomic(dir / "loss.csv", loss_csv(arm.name, a.losses));
    write_file_atomic(dir / "eval.json", eval_to_json(a.eval, tax).dump(2) + "\n");
    log_info("bench: " + arm.name + " mpvap " + std::to_string(a.eval.mpvap) +
             " (" + elapsed() + ")");
    res.arms.push_back(std::move(a));
  }

  std::vector<LossCurve> gamma;
  for (const auto& row : bench_rows())
    if (row.table == "gamma") gamma.push_back({row.arm, res.arm(row.arm).losses});
  write_file_atomic(out / "gamma_loss_curves.csv", export_loss_curves(gamma));

  res.trends = bench_trends(res);
  write_file_atomic(out / "report.json", bench_report_json(res, cfg, tax).dump(2) + "\n");
  write_file_atomic(out / "report.txt", bench_report_text(res, tax));
  log_info("bench: done (" + elapsed() + ")");
  return res;
}

}  // namespace kc

// kc_cli: command-line driver for the knowledge-concentration pipeline.
//
// Every subcommand reads the same run config: defaults, then --config,
// then flags. Failures print one JSON line to stderr and exit with a code
// that identifies the error class (see exit_code_for).

#include <cstdio>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kc/bench.hpp"
#include "kc/config.hpp"
#include "kc/evaluation.hpp"
#include "kc/log.hpp"
#include "kc/param_budget.hpp"
#include "kc/pipeline.hpp"

namespace {

using namespace kc;

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kIo = 3,
  kValidation = 4,
  kFormat = 5,
  kData = 6,
  kOther = 7,
};

int exit_code_for(const std::string& code) {
  if (code == "io") return kIo;
  if (code == "validation") return kValidation;
  if (code == "format") return kFormat;
  if (code == "no_data" || code == "routing" || code == "missing_targets" ||
      code == "lookup" || code == "no_vertical" || code == "undefined_ap")
    return kData;
  return kOther;
}

int fail(const std::string& code, int exit, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = code;
  j["exit"] = exit;
  j["message"] = message;
  std::cerr << j.dump() << std::endl;
  return exit;
}

// Flags shared by every subcommand; unset ones leave the config alone.
struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> arch;
  std::optional<std::size_t> generic_size;
  std::optional<std::string> self_paced;
  std::optional<std::string> gamma_init;
  std::optional<std::string> gamma_trainable;
  std::optional<std::size_t> k;
  std::optional<std::size_t> epochs;
};

void add_common(CLI::App& app, Overrides& o) {
  app.add_option("--config", o.config, "JSON run config");
  app.add_option("--seed", o.seed, "root seed");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--arch", o.arch, "student topology")
      ->check(CLI::IsMember({"fc-fc", "fc-sc", "sc-sc", "fc-sc-generic"}));
  app.add_option("--generic-size", o.generic_size, "shared top-2 width x");
  app.add_option("--self-paced", o.self_paced, "self-paced head")
      ->check(CLI::IsMember({"none", "vertical", "class"}));
  app.add_option("--gamma-init", o.gamma_init, "sqrt-nv or const:<v>");
  app.add_option("--gamma-trainable", o.gamma_trainable, "true or false")
      ->check(CLI::IsMember({"true", "false"}));
  app.add_option("--k", o.k, "soft targets kept per sample");
  app.add_option("--epochs", o.epochs, "epochs for every training stage run");
}

RunConfig resolve(const Overrides& o, RunConfig cfg) {
  if (!o.config.empty()) load_config_file(cfg, o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.out = *o.out;
  if (o.arch) cfg.student.topology = parse_topology(*o.arch);
  if (o.generic_size) cfg.student.generic_size = *o.generic_size;
  if (o.self_paced) cfg.student.head.mode = parse_scale_mode(*o.self_paced);
  if (o.gamma_init) {
    const double dev = cfg.student.head.init.dev;
    cfg.student.head.init = GammaInit::parse(*o.gamma_init);
    cfg.student.head.init.dev = dev;
  }
  if (o.gamma_trainable) cfg.student.head.trainable = *o.gamma_trainable == "true";
  if (o.k) cfg.train.top_k = *o.k;
  if (o.epochs) {
    cfg.train.epochs = *o.epochs;
    cfg.teacher_train.epochs = *o.epochs;
  }
  return cfg;
}

fs::path or_default(const std::string& set, const fs::path& fallback) {
  return set.empty() ? fallback : fs::path(set);
}

struct Paths {
  fs::path out, taxonomy, dataset, teachers, soft_targets;
  explicit Paths(const RunConfig& c)
      : out(c.out),
        taxonomy(or_default(c.taxonomy, out / "taxonomy.jsonl")),
        dataset(or_default(c.dataset, out / "dataset.jsonl")),
        teachers(or_default(c.teachers_dir, out / "teachers")),
        soft_targets(or_default(c.soft_targets, out / "soft_targets.jsonl")) {}
};

struct Inputs {
  LabelTaxonomy tax;
  Dataset data;
};

Inputs load_inputs(const Paths& p) {
  Inputs in{load_taxonomy(p.taxonomy), load_dataset(p.dataset)};
  in.data.validate(in.tax);
  return in;
}

void print_eval(const EvalResult& r, const LabelTaxonomy& tax, const std::string& label,
                const fs::path& json_path) {
  write_file_atomic(json_path, eval_to_json(r, tax).dump(2) + "\n");
  std::cout << eval_table({{label, r}}, tax);
  std::cout << "mpvap " << format_double(r.mpvap) << "\n";
  if (r.skipped_classes) {
    log_warn(std::to_string(r.skipped_classes) +
             " classes had no test positives and were skipped");
  }
}

int cmd_gen_data(const RunConfig& cfg) {
  const Paths p(cfg);
  const auto d = generate_synthetic(data_config(cfg));
  save_taxonomy(p.taxonomy, d.taxonomy);
  save_dataset(p.dataset, d.dataset);
  std::cout << "taxonomy " << p.taxonomy.string() << " (" << d.taxonomy.num_classes()
            << " leaves, " << d.taxonomy.vertical_roots().size() << " verticals)\n"
            << "dataset " << p.dataset.string() << " (" << d.dataset.samples.size()
            << " samples)\n";
  return kOk;
}

int cmd_train_teacher(const RunConfig& cfg, LabelId vertical) {
  const Paths p(cfg);
  const auto in = load_inputs(p);
  auto r = train_teacher(in.tax, in.data, vertical, cfg.teacher,
                         teacher_train_config(cfg, vertical));
  const auto path = teacher_path(p.teachers, vertical);
  save_checkpoint(path, r.teacher.model, teacher_meta(r.teacher));
  const std::string label = "vertical_" + std::to_string(vertical);
  write_file_atomic(p.teachers / (label + "_loss.csv"), loss_csv(label, r.losses));
  std::cout << "teacher " << path.string() << " final step loss "
            << format_double(r.losses.back()) << "\n";
  return kOk;
}

int cmd_gen_soft_targets(const RunConfig& cfg) {
  const Paths p(cfg);
  const auto in = load_inputs(p);
  const auto teachers = load_teachers(p.teachers, in.tax);
  const auto recs = generate_soft_targets(in.tax, in.data, teachers, cfg.train.top_k,
                                          cfg.train.force_groundtruth);
  save_soft_targets(p.soft_targets, recs);
  std::cout << "soft targets " << p.soft_targets.string() << " (" << recs.size()
            << " records, k=" << cfg.train.top_k << ")\n";
  return kOk;
}

int train_generalist(const RunConfig& cfg, bool distill) {
  const Paths p(cfg);
  const auto in = load_inputs(p);
  const TrainConfig tc = student_train_config(cfg);
  TrainedModel r;
  if (distill) {
    const auto recs = load_soft_targets(p.soft_targets);
    r = train_student(in.tax, in.data, recs, cfg.student, tc);
  } else {
    r = train_generalist_baseline(in.tax, in.data, cfg.student, tc);
  }
  const std::string name = distill ? "student" : "baseline";
  const fs::path ckpt = or_default(cfg.checkpoint, p.out / (name + ".ckpt"));
  save_checkpoint(ckpt, r.model,
                  {{"role", name}, {"distill", distill}, {"label", cfg.label}});
  write_file_atomic(p.out / (name + "_loss.csv"), loss_csv(name, r.losses));
  const auto per_epoch = steps_per_epoch(in.data.subset(Split::kTrain).size(), tc.batch_size);
  std::cout << name << " " << ckpt.string() << " final loss "
            << format_double(final_loss(r.losses, per_epoch)) << "\n";
  return kOk;
}

int cmd_eval(const RunConfig& cfg, const std::string& predictions, bool specialists) {
  const Paths p(cfg);
  const std::string pred_path = predictions.empty() ? cfg.predictions : predictions;
  if (!pred_path.empty()) {
    const auto tax = load_taxonomy(p.taxonomy);
    std::istringstream is(read_file(pred_path));
    print_eval(evaluate(read_predictions(is), tax), tax, "predictions",
               p.out / "eval.json");
    return kOk;
  }
  const auto in = load_inputs(p);
  Predictions preds;
  std::string label;
  if (specialists) {
    preds = predict_specialists(load_teachers(p.teachers, in.tax), in.tax, in.data);
    label = "specialists";
  } else {
    const fs::path ckpt = or_default(cfg.checkpoint, p.out / "student.ckpt");
    preds = predict(load_checkpoint(ckpt).model, class_layout(in.tax), in.data);
    label = ckpt.stem().string();
  }
  std::ostringstream os;
  write_predictions(os, preds);
  write_file_atomic(p.out / "predictions.jsonl", os.str());
  print_eval(evaluate(preds, in.tax), in.tax, label, p.out / "eval.json");
  return kOk;
}

std::vector<BudgetInput> budget_preset(const std::string& preset, const RunConfig& cfg) {
  std::uint64_t N, M, sb, s1, s2, x;
  if (preset == "desk") {
    N = 10, M = 2, sb = 8, s1 = 4, s2 = 3, x = 1;
  } else if (preset == "large") {
    N = 100000, M = 20, sb = 9216, s1 = 4096, s2 = 512, x = 256;
  } else {  // the configured student on the configured data
    const auto sizes = cfg.data.sizes();
    N = std::accumulate(sizes.begin(), sizes.end(), std::uint64_t{0});
    M = sizes.size();
    sb = cfg.student.base_size, s1 = cfg.student.top1_size, s2 = cfg.student.top2_size;
    x = cfg.student.generic_size ? cfg.student.generic_size : s2 / 2;
  }
  return {{Topology::kFcFc, N, M, sb, s1, s2, 0},
          {Topology::kFcSc, N, M, sb, s1, s2, 0},
          {Topology::kScSc, N, M, sb, s1, s2, 0},
          {Topology::kFcScGeneric, N, M, sb, s1, s2, x}};
}

int cmd_params(const RunConfig& cfg, const std::string& preset, bool json) {
  const auto report = compare_budgets(budget_preset(preset, cfg));
  if (json) {
    std::cout << budget_to_json(report).dump(2) << "\n";
  } else {
    std::cout << budget_to_text(report);
  }
  return kOk;
}

int cmd_export_curves(const RunConfig& cfg, const std::vector<std::string>& inputs) {
  if (inputs.empty()) throw ValidationError("export-curves: no input CSV files");
  std::vector<LossCurve> runs;
  for (const auto& f : inputs)
    for (auto& c : parse_loss_curves(read_file(f))) runs.push_back(std::move(c));
  const fs::path path = fs::path(cfg.out) / "loss_curves.csv";
  write_file_atomic(path, export_loss_curves(runs));
  std::cout << "curves " << path.string() << " (" << runs.size() << " runs)\n";
  return kOk;
}

int cmd_bench(const RunConfig& cfg) {
  const auto r = run_bench(cfg, cfg.out);
  std::cout << read_file(fs::path(cfg.out) / "report.txt");
  (void)r;
  return kOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Multi-teacher distillation, SC layers and self-paced learning at desk scale"};
  app.require_subcommand(1);
  Overrides o;
  LabelId vertical = 0;
  std::string predictions, preset = "desk";
  bool specialists = false, as_json = false;
  std::vector<std::string> curve_files;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic taxonomy and dataset");
  auto* teacher = app.add_subcommand("train-teacher", "train one vertical's specialist");
  teacher->add_option("--vertical", vertical, "vertical root id")->required();
  auto* soft = app.add_subcommand("gen-soft-targets", "top-K teacher targets for every training sample");
  auto* student = app.add_subcommand("train-student", "train the distilled generalist");
  auto* baseline = app.add_subcommand("train-baseline", "train the hard-label generalist");
  auto* eval = app.add_subcommand("eval", "per-vertical AP of a checkpoint, the specialists, or a prediction file");
  eval->add_option("--predictions", predictions, "prediction file to score");
  eval->add_flag("--specialists", specialists, "score the teachers, each on its own vertical");
  auto* params = app.add_subcommand("params", "top-layer parameter counts for the four topologies");
  params->add_option("--preset", preset, "desk, large or config")
      ->check(CLI::IsMember({"desk", "large", "config"}));
  params->add_flag("--json", as_json, "print JSON instead of a table");
  auto* curves = app.add_subcommand("export-curves", "merge loss CSVs into one table");
  curves->add_option("inputs", curve_files, "loss CSV files");
  auto* bench = app.add_subcommand("bench", "run the full benchmark matrix");

  for (auto* sub : {gen, teacher, soft, student, baseline, eval, params, curves, bench})
    add_common(*sub, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    // Subcommand help also arrives here as a parse error with exit code 0.
    if (e.get_exit_code() == 0) return app.exit(e);
    std::string msg = e.what();
    for (auto& c : msg)
      if (c == '\n') c = ' ';
    return fail("usage", kUsage, msg);
  }

  const RunConfig defaults = bench->parsed() ? bench_profile() : RunConfig{};
  const RunConfig cfg = resolve(o, defaults);
  if (gen->parsed()) return cmd_gen_data(cfg);
  if (teacher->parsed()) return cmd_train_teacher(cfg, vertical);
  if (soft->parsed()) return cmd_gen_soft_targets(cfg);
  if (student->parsed()) return train_generalist(cfg, true);
  if (baseline->parsed()) return train_generalist(cfg, false);
  if (eval->parsed()) return cmd_eval(cfg, predictions, specialists);
  if (params->parsed()) return cmd_params(cfg, preset, as_json);
  if (curves->parsed()) return cmd_export_curves(cfg, curve_files);
  return cmd_bench(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const kc::Error& e) {
    return fail(e.code(), exit_code_for(e.code()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail("io", kIo, e.what());
  } catch (const std::exception& e) {
    return fail("internal", kInternal, e.what());
  }
}

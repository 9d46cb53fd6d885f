#pragma once

// Run configuration shared by the CLI subcommands.
//
// A config file is a JSON object whose sections mirror the structs below;
// keys left out keep their defaults and unknown keys are rejected. Command
// line flags are applied on top of the file.

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "kc/dataset.hpp"
#include "kc/distillation.hpp"
#include "kc/error.hpp"
#include "kc/io.hpp"

namespace kc {

struct RunConfig {
  std::uint64_t seed = 1;
  std::string label;
  std::string out = "kc_out";
  std::string taxonomy;
  std::string dataset;
  std::string soft_targets;
  std::string checkpoint;
  std::string predictions;
  std::string teachers_dir;

  SyntheticConfig data;
  NetConfig teacher;
  TrainConfig teacher_train;
  NetConfig student;
  TrainConfig train;
};

namespace detail {

// Applies `fn(key, value)` to each entry, rejecting keys outside `allowed`.
template <typename Fn>
void for_each_key(const nlohmann::json& j, std::string_view section,
                  std::initializer_list<std::string_view> allowed, Fn fn) {
  if (!j.is_object()) {
    throw ValidationError("config: section '" + std::string(section) +
                          "' must be an object");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (auto a : allowed) known = known || a == it.key();
    if (!known) {
      throw ValidationError("config: unknown key '" + std::string(section) +
                            (section.empty() ? "" : ".") + it.key() + "'");
    }
    fn(it.key(), it.value());
  }
}

inline void read_train(const nlohmann::json& j, std::string_view section,
                       TrainConfig& t) {
  for_each_key(j, section,
               {"k", "batch_size", "learning_rate", "adagrad_eps", "adagrad_init", "epochs",
                "force_groundtruth"},
               [&](const std::string& k, const nlohmann::json& v) {
                 if (k == "k") t.top_k = v.get<std::size_t>();
                 if (k == "batch_size") t.batch_size = v.get<std::size_t>();
                 if (k == "learning_rate") t.learning_rate = v.get<double>();
                 if (k == "adagrad_eps") t.adagrad_eps = v.get<double>();
                 if (k == "adagrad_init") t.adagrad_init = v.get<double>();
                 if (k == "epochs") t.epochs = v.get<std::size_t>();
                 if (k == "force_groundtruth") t.force_groundtruth = v.get<bool>();
               });
}

inline void read_net(const nlohmann::json& j, std::string_view section,
                     NetConfig& n) {
  for_each_key(j, section,
               {"arch", "base_hidden", "base_size", "top1_size", "top2_size",
                "generic_size", "use_bias", "self_paced", "gamma_init",
                "gamma_dev", "gamma_trainable"},
               [&](const std::string& k, const nlohmann::json& v) {
                 if (k == "arch") n.topology = parse_topology(v.get<std::string>());
                 if (k == "base_hidden") n.base_hidden = v.get<std::size_t>();
                 if (k == "base_size") n.base_size = v.get<std::size_t>();
                 if (k == "top1_size") n.top1_size = v.get<std::size_t>();
                 if (k == "top2_size") n.top2_size = v.get<std::size_t>();
                 if (k == "generic_size") n.generic_size = v.get<std::size_t>();
                 if (k == "use_bias") n.use_bias = v.get<bool>();
                 if (k == "self_paced") n.head.mode = parse_scale_mode(v.get<std::string>());
                 if (k == "gamma_init") {
                   const double dev = n.head.init.dev;
                   n.head.init = GammaInit::parse(v.get<std::string>());
                   n.head.init.dev = dev;
                 }
                 if (k == "gamma_dev") n.head.init.dev = v.get<double>();
                 if (k == "gamma_trainable") n.head.trainable = v.get<bool>();
               });
}

inline void read_data(const nlohmann::json& j, SyntheticConfig& d) {
  for_each_key(j, "data",
               {"verticals", "leaves_per_vertical", "vertical_sizes", "groups_per_vertical",
                "input_dim", "train_per_class", "test_per_class",
                "modes_per_class", "confusability", "vertical_scale",
                "class_scale", "mode_scale", "noise_scale"},
               [&](const std::string& k, const nlohmann::json& v) {
                 if (k == "verticals") d.num_verticals = v.get<std::size_t>();
                 if (k == "leaves_per_vertical") d.leaves_per_vertical = v.get<std::size_t>();
                 if (k == "vertical_sizes") d.vertical_sizes = v.get<std::vector<std::size_t>>();
                 if (k == "groups_per_vertical") d.groups_per_vertical = v.get<std::size_t>();
                 if (k == "input_dim") d.input_dim = v.get<std::size_t>();
                 if (k == "train_per_class") d.train_per_class = v.get<std::size_t>();
                 if (k == "test_per_class") d.test_per_class = v.get<std::size_t>();
                 if (k == "modes_per_class") d.modes_per_class = v.get<std::size_t>();
                 if (k == "confusability") d.confusability = v.get<double>();
                 if (k == "vertical_scale") d.vertical_scale = v.get<double>();
                 if (k == "class_scale") d.class_scale = v.get<double>();
                 if (k == "mode_scale") d.mode_scale = v.get<double>();
                 if (k == "noise_scale") d.noise_scale = v.get<double>();
               });
}

}  // namespace detail

// Overlays the keys present in `j` onto `cfg`.
inline void apply_config_json(RunConfig& cfg, const nlohmann::json& j) {
  try {
    detail::for_each_key(
        j, "",
        {"seed", "label", "out", "taxonomy", "dataset", "soft_targets",
         "checkpoint", "predictions", "teachers_dir", "data", "teacher",
         "teacher_train", "student", "train"},
        [&](const std::string& k, const nlohmann::json& v) {
          if (k == "seed") cfg.seed = v.get<std::uint64_t>();
          if (k == "label") cfg.label = v.get<std::string>();
          if (k == "out") cfg.out = v.get<std::string>();
          if (k == "taxonomy") cfg.taxonomy = v.get<std::string>();
          if (k == "dataset") cfg.dataset = v.get<std::string>();
          if (k == "soft_targets") cfg.soft_targets = v.get<std::string>();
          if (k == "checkpoint") cfg.checkpoint = v.get<std::string>();
          if (k == "predictions") cfg.predictions = v.get<std::string>();
          if (k == "teachers_dir") cfg.teachers_dir = v.get<std::string>();
          if (k == "data") detail::read_data(v, cfg.data);
          if (k == "teacher") detail::read_net(v, "teacher", cfg.teacher);
          if (k == "teacher_train") detail::read_train(v, "teacher_train", cfg.teacher_train);
          if (k == "student") detail::read_net(v, "student", cfg.student);
          if (k == "train") detail::read_train(v, "train", cfg.train);
        });
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

inline void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  }
  apply_config_json(cfg, j);
}

inline nlohmann::ordered_json train_to_json(const TrainConfig& t) {
  nlohmann::ordered_json j;
  j["k"] = t.top_k;
  j["batch_size"] = t.batch_size;
  j["learning_rate"] = t.learning_rate;
  j["adagrad_eps"] = t.adagrad_eps;
  j["adagrad_init"] = t.adagrad_init;
  j["epochs"] = t.epochs;
  j["force_groundtruth"] = t.force_groundtruth;
  return j;
}

inline nlohmann::ordered_json net_to_json(const NetConfig& n) {
  nlohmann::ordered_json j;
  j["arch"] = topology_name(n.topology);
  j["base_hidden"] = n.base_hidden;
  j["base_size"] = n.base_size;
  j["top1_size"] = n.top1_size;
  j["top2_size"] = n.top2_size;
  j["generic_size"] = n.generic_size;
  j["use_bias"] = n.use_bias;
  j["self_paced"] = scale_mode_name(n.head.mode);
  j["gamma_init"] = n.head.init.to_string();
  j["gamma_dev"] = n.head.init.dev;
  j["gamma_trainable"] = n.head.trainable;
  return j;
}

inline nlohmann::ordered_json data_to_json(const SyntheticConfig& d) {
  nlohmann::ordered_json j;
  j["verticals"] = d.num_verticals;
  j["leaves_per_vertical"] = d.leaves_per_vertical;
  j["vertical_sizes"] = d.vertical_sizes;
  j["groups_per_vertical"] = d.groups_per_vertical;
  j["input_dim"] = d.input_dim;
  j["train_per_class"] = d.train_per_class;
  j["test_per_class"] = d.test_per_class;
  j["modes_per_class"] = d.modes_per_class;
  j["confusability"] = d.confusability;
  j["vertical_scale"] = d.vertical_scale;
  j["class_scale"] = d.class_scale;
  j["mode_scale"] = d.mode_scale;
  j["noise_scale"] = d.noise_scale;
  return j;
}

// Full config as JSON; feeding it back through apply_config_json is the
// identity.
inline nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["label"] = c.label;
  j["out"] = c.out;
  j["taxonomy"] = c.taxonomy;
  j["dataset"] = c.dataset;
  j["soft_targets"] = c.soft_targets;
  j["checkpoint"] = c.checkpoint;
  j["predictions"] = c.predictions;
  j["teachers_dir"] = c.teachers_dir;
  j["data"] = data_to_json(c.data);
  j["teacher"] = net_to_json(c.teacher);
  j["teacher_train"] = train_to_json(c.teacher_train);
  j["student"] = net_to_json(c.student);
  j["train"] = train_to_json(c.train);
  return j;
}

}  // namespace kc

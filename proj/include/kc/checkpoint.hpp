#pragma once

// Checkpoint layout (all integers and values little-endian):
//
//   8 bytes   magic "KCCKPT\0\0"
//   u32       format version
//   u64       header length H
//   H bytes   JSON header: arch, head, seed, meta, tensors[{name, shape}]
//   per tensor, in header order:
//     u64     value count
//     f64[]   values
//
// Loading rebuilds the model from the embedded arch/head and overwrites
// every parameter, so a mismatch between the header's shapes and the
// architecture is caught before any values are used.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kc/error.hpp"
#include "kc/io.hpp"
#include "kc/model.hpp"

namespace kc {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::array<char, 8> kCheckpointMagic = {'K', 'C', 'C', 'K',
                                                         'P', 'T', 0,   0};

inline nlohmann::ordered_json arch_to_json(const ArchSpec& a) {
  nlohmann::ordered_json j;
  j["topology"] = topology_name(a.topology);
  j["input_dim"] = a.input_dim;
  j["base_hidden"] = a.base_hidden;
  j["base_size"] = a.base_size;
  j["top1_size"] = a.top1_size;
  j["top2_size"] = a.top2_size;
  j["generic_size"] = a.generic_size;
  j["num_classes"] = a.num_classes;
  j["class_counts"] = a.class_counts;
  j["use_bias"] = a.use_bias;
  return j;
}

inline ArchSpec arch_from_json(const nlohmann::json& j) {
  ArchSpec a;
  a.topology = parse_topology(j.at("topology").get<std::string>());
  a.input_dim = j.at("input_dim").get<std::size_t>();
  a.base_hidden = j.at("base_hidden").get<std::size_t>();
  a.base_size = j.at("base_size").get<std::size_t>();
  a.top1_size = j.at("top1_size").get<std::size_t>();
  a.top2_size = j.at("top2_size").get<std::size_t>();
  a.generic_size = j.at("generic_size").get<std::size_t>();
  a.num_classes = j.at("num_classes").get<std::size_t>();
  a.class_counts = j.at("class_counts").get<std::vector<std::size_t>>();
  a.use_bias = j.at("use_bias").get<bool>();
  return a;
}

inline nlohmann::ordered_json head_to_json(const HeadSpec& h) {
  nlohmann::ordered_json j;
  j["mode"] = scale_mode_name(h.mode);
  j["gamma_init"] = h.init.to_string();
  j["gamma_dev"] = h.init.dev;
  j["trainable"] = h.trainable;
  return j;
}

inline HeadSpec head_from_json(const nlohmann::json& j) {
  HeadSpec h;
  h.mode = parse_scale_mode(j.at("mode").get<std::string>());
  h.init = GammaInit::parse(j.at("gamma_init").get<std::string>());
  h.init.dev = j.at("gamma_dev").get<double>();
  h.trainable = j.at("trainable").get<bool>();
  return h;
}

struct LoadedCheckpoint {
  Model model;
  nlohmann::json meta;
};

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::uint64_t n, const char* what) {
    if (n > bytes_.size() - pos_) {
      throw FormatError(std::string("checkpoint truncated while reading ") +
                        what);
    }
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  template <typename T>
  T get_le(const char* what) {
    auto raw = take(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[i])) << (8 * i);
    return static_cast<T>(v);
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const Model& model,
                                        const nlohmann::json& meta = nlohmann::json::object()) {
  nlohmann::ordered_json header;
  header["arch"] = arch_to_json(model.spec());
  header["head"] = head_to_json(model.head());
  header["seed"] = model.seed();
  header["meta"] = meta;
  header["tensors"] = nlohmann::ordered_json::array();
  for (const auto& p : model.parameters()) {
    nlohmann::ordered_json t;
    t["name"] = p.name;
    t["shape"] = p.tensor.shape();
    header["tensors"].push_back(std::move(t));
  }
  const std::string text = header.dump();

  std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& p : model.parameters()) {
    detail::put_le<std::uint64_t>(out, p.tensor.size());
    for (double v : p.tensor.data())
      detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

inline LoadedCheckpoint deserialize_checkpoint(std::string_view bytes) {
  detail::ByteReader r(bytes);
  const auto magic = r.take(kCheckpointMagic.size(), "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic.data(), magic.size()) != 0) {
    throw FormatError("checkpoint: bad magic");
  }
  const auto version = r.get_le<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: version " + std::to_string(version) +
                      " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = r.get_le<std::uint64_t>("header length");
  const auto text = r.take(header_len, "header");
  nlohmann::json header;
  ArchSpec arch;
  HeadSpec head;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, Shape>> listed;
  try {
    header = nlohmann::json::parse(text);
    arch = arch_from_json(header.at("arch"));
    head = head_from_json(header.at("head"));
    seed = header.at("seed").get<std::uint64_t>();
    for (const auto& t : header.at("tensors"))
      listed.emplace_back(t.at("name").get<std::string>(), t.at("shape").get<Shape>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  LoadedCheckpoint out{build_model(arch, head, seed), header.value("meta", nlohmann::json::object())};
  auto& params = out.model.parameters();
  if (listed.size() != params.size()) {
    throw FormatError("checkpoint: header lists " + std::to_string(listed.size()) +
                      " tensors, architecture has " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, shape] = listed[i];
    if (name != params[i].name || shape != params[i].tensor.shape()) {
      throw FormatError("checkpoint: tensor '" + name + "' " + shape_string(shape) +
                        " does not match architecture tensor '" + params[i].name +
                        "' " + shape_string(params[i].tensor.shape()));
    }
  }
  // Decode everything before touching the model so a bad file leaves no
  // partially restored parameters behind.
  std::vector<std::vector<double>> values(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto count = r.get_le<std::uint64_t>("tensor length");
    if (count != params[i].tensor.size()) {
      throw FormatError("checkpoint: tensor '" + params[i].name + "' stores " +
                        std::to_string(count) + " values, expected " +
                        std::to_string(params[i].tensor.size()));
    }
    values[i].resize(count);
    for (auto& v : values[i])
      v = std::bit_cast<double>(r.get_le<std::uint64_t>("tensor values"));
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_data();
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
  return out;
}

inline void save_checkpoint(const std::filesystem::path& path, const Model& model,
                            const nlohmann::json& meta = nlohmann::json::object()) {
  write_file_atomic(path, serialize_checkpoint(model, meta));
}

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace kc

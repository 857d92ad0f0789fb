#pragma once

// Model checkpoint container:
//
//   bytes 0..7    magic "AMXFCKPT"
//   bytes 8..11   format version, uint32 little-endian (currently 1)
//   bytes 12..19  header length L, uint64 little-endian
//   next L bytes  UTF-8 JSON header
//   remainder     tensor payload, float32 little-endian, row-major
//
// The header carries the architecture, layer specs, training config, loss
// history, epochs_trained and a tensor table {name, shape, offset, count}
// where offset and count are in float32 elements from the payload start.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "amxfer/nn/train.hpp"

namespace amxfer::nn {

inline constexpr char kCheckpointMagic[8] = {'A', 'M', 'X', 'F', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const void *data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto *p = static_cast<const unsigned char *>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string &s) { return fnv1a64(s.data(), s.size()); }

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline nlohmann::json to_json(const Architecture &a) {
  return {{"height", a.height}, {"width", a.width}, {"steps", a.steps},
          {"channel_divisor", a.channel_divisor}};
}

inline Architecture architecture_from_json(const nlohmann::json &j) {
  Architecture a;
  a.height = j.value("height", a.height);
  a.width = j.value("width", a.width);
  a.steps = j.value("steps", a.steps);
  a.channel_divisor = j.value("channel_divisor", a.channel_divisor);
  return a;
}

inline nlohmann::json to_json(const TrainConfig &c) {
  return {{"epochs", c.epochs},   {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},     {"beta2", c.beta2},           {"epsilon", c.epsilon},
          {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json &j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.seed = j.value("seed", c.seed);
  return c;
}

inline nlohmann::json to_json(const LayerSpec &s) {
  return {{"kind", to_string(s.kind)},
          {"in_channels", s.in_channels},
          {"out_channels", s.out_channels},
          {"kernel", s.kernel},
          {"stride", s.stride},
          {"activation", to_string(s.activation)},
          {"group", to_string(s.group)},
          {"frozen", s.frozen}};
}

inline LayerSpec layer_spec_from_json(const nlohmann::json &j) {
  LayerSpec s;
  const std::string kind = j.at("kind").get<std::string>();
  bool found = false;
  for (auto k : {LayerKind::conv2d, LayerKind::batch_norm, LayerKind::conv_lstm,
                 LayerKind::conv2d_transpose})
    if (to_string(k) == kind) {
      s.kind = k;
      found = true;
    }
  if (!found)
    throw TaggingError("unknown layer kind '" + kind + "'");
  s.in_channels = j.at("in_channels").get<int>();
  s.out_channels = j.at("out_channels").get<int>();
  s.kernel = j.at("kernel").get<int>();
  s.stride = j.at("stride").get<int>();
  const std::string act = j.at("activation").get<std::string>();
  found = false;
  for (auto a : {Activation::none, Activation::relu, Activation::sigmoid, Activation::tanh})
    if (to_string(a) == act) {
      s.activation = a;
      found = true;
    }
  if (!found)
    throw ValidationError("unknown activation '" + act + "'");
  s.group = j.value("group", std::string("cnn")) == "convlstm" ? Group::convlstm : Group::cnn;
  s.frozen = j.value("frozen", false);
  return s;
}

template <class S> nlohmann::json history_json(const Autoencoder<S> &m) {
  nlohmann::json h = nlohmann::json::array();
  for (const auto &r : m.history)
    h.push_back({{"epoch", r.epoch}, {"phase", r.phase}, {"loss", r.loss}});
  return h;
}

namespace detail {

template <class S>
std::vector<std::pair<std::string, Tensor<S> *>> checkpoint_tensors(Autoencoder<S> &m) {
  std::vector<std::pair<std::string, Tensor<S> *>> out;
  for (std::size_t n = 0; n < m.size(); ++n) {
    const std::string prefix = "layer" + std::to_string(n) + ".";
    for (auto &p : m.layer(n).params())
      out.emplace_back(prefix + p.name, p.value);
    for (auto &[name, t] : m.layer(n).state())
      out.emplace_back(prefix + name, t);
  }
  return out;
}

inline void put_le(std::string &buf, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i)
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_le(const unsigned char *p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

} // namespace detail

/// Serializes a model to the checkpoint byte layout.
template <class S>
std::string checkpoint_bytes(Autoencoder<S> &m, const TrainConfig &cfg,
                             const nlohmann::json &extra = nlohmann::json::object()) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto &s : m.specs())
    layers.push_back(to_json(s));
  nlohmann::json table = nlohmann::json::array();
  std::string payload;
  std::size_t offset = 0;
  for (auto &[name, t] : detail::checkpoint_tensors(m)) {
    table.push_back({{"name", name}, {"shape", t->shape}, {"offset", offset}, {"count", t->size()}});
    for (S v : t->data) {
      const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      detail::put_le(payload, bits, 4);
    }
    offset += t->size();
  }
  nlohmann::json header = {{"format", "amxfer.checkpoint"},
                           {"architecture", to_json(m.architecture())},
                           {"layers", layers},
                           {"tensors", table},
                           {"training", to_json(cfg)},
                           {"epochs_trained", m.epochs_trained},
                           {"loss_history", history_json(m)},
                           {"extra", extra}};
  const std::string h = header.dump();
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_le(out, kCheckpointVersion, 4);
  detail::put_le(out, h.size(), 8);
  out += h;
  out += payload;
  return out;
}

struct LoadedCheckpoint {
  Autoencoder<float> model;
  TrainConfig training;
  nlohmann::json header;
};

inline LoadedCheckpoint checkpoint_from_bytes(const std::string &bytes) {
  const auto *p = reinterpret_cast<const unsigned char *>(bytes.data());
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    throw ValidationError("checkpoint: bad magic");
  const auto version = detail::get_le(p + 8, 4);
  if (version != kCheckpointVersion)
    throw ValidationError("checkpoint: unsupported version " + std::to_string(version));
  const auto hlen = detail::get_le(p + 12, 8);
  if (20 + hlen > bytes.size())
    throw ValidationError("checkpoint: truncated header");
  nlohmann::json header = nlohmann::json::parse(bytes.substr(20, hlen));
  const std::size_t payload_start = 20 + hlen;
  const std::size_t payload_floats = (bytes.size() - payload_start) / 4;

  std::vector<LayerSpec> specs;
  for (const auto &j : header.at("layers"))
    specs.push_back(layer_spec_from_json(j));
  Autoencoder<float> model(architecture_from_json(header.at("architecture")), specs, 0);
  std::map<std::string, Tensor<float> *> by_name;
  for (auto &[name, t] : detail::checkpoint_tensors(model))
    by_name[name] = t;
  std::size_t restored = 0;
  for (const auto &e : header.at("tensors")) {
    const auto name = e.at("name").get<std::string>();
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw ValidationError("checkpoint: unexpected tensor " + name);
    Tensor<float> &t = *it->second;
    if (e.at("shape").get<std::vector<int>>() != t.shape)
      throw ShapeError("checkpoint: tensor " + name + " has wrong shape");
    const std::size_t off = e.at("offset").get<std::size_t>(), cnt = e.at("count").get<std::size_t>();
    if (cnt != t.size() || off + cnt > payload_floats)
      throw ValidationError("checkpoint: tensor " + name + " out of payload range");
    for (std::size_t i = 0; i < cnt; ++i)
      t.data[i] = std::bit_cast<float>(
          static_cast<std::uint32_t>(detail::get_le(p + payload_start + 4 * (off + i), 4)));
    ++restored;
  }
  if (restored != by_name.size())
    throw ValidationError("checkpoint: missing tensors");
  model.epochs_trained = header.value("epochs_trained", 0);
  for (const auto &r : header.value("loss_history", nlohmann::json::array()))
    model.history.push_back({r.at("epoch").get<int>(), r.at("phase").get<std::string>(),
                             r.at("loss").get<double>()});
  return {std::move(model), train_config_from_json(header.value("training", nlohmann::json::object())),
          std::move(header)};
}

template <class S>
std::uint64_t save_checkpoint(Autoencoder<S> &m, const TrainConfig &cfg,
                              const std::filesystem::path &path,
                              const nlohmann::json &extra = nlohmann::json::object()) {
  const std::string bytes = checkpoint_bytes(m, cfg, extra);
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw IoError("cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f)
    throw IoError("write failed: " + path.string());
  return fnv1a64(bytes.data(), bytes.size());
}

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path &path) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return checkpoint_from_bytes(ss.str());
}

/// Hash of the parameter and state tensors only.
template <class S> std::uint64_t parameter_hash(Autoencoder<S> &m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto &[name, t] : detail::checkpoint_tensors(m)) {
    h = fnv1a64(name.data(), name.size(), h);
    h = fnv1a64(t->data.data(), t->data.size() * sizeof(S), h);
  }
  return h;
}

} // namespace amxfer::nn

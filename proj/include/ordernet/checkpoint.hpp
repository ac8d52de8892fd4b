#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ordernet/errors.hpp"
#include "ordernet/io.hpp"
#include "ordernet/model.hpp"

// Checkpoint container: magic "ONET", one version byte (0x01), a 4-byte
// little-endian header length, a JSON header {format_version, model,
// tensors: [{name, shape, offset}, ...]}, then raw little-endian float32
// payloads at the stated offsets (relative to the end of the header).
// Tensors cover every learnable parameter followed by the batch-norm
// running statistics, both in their canonical model order.

namespace ordernet {

inline constexpr char kCheckpointMagic[4] = {'O', 'N', 'E', 'T'};
inline constexpr std::uint8_t kCheckpointVersion = 0x01;

namespace detail {

inline void append_f32_le(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  out.push_back(static_cast<char>(bits & 0xFF));
  out.push_back(static_cast<char>((bits >> 8) & 0xFF));
  out.push_back(static_cast<char>((bits >> 16) & 0xFF));
  out.push_back(static_cast<char>((bits >> 24) & 0xFF));
}

inline float read_f32_le(const char* p) {
  std::uint32_t bits = static_cast<std::uint8_t>(p[0]) |
                       (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[1])) << 8) |
                       (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[2])) << 16) |
                       (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[3])) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline nlohmann::json config_to_json(const ModelConfig& cfg) {
  return {{"input_dim", cfg.input_dim},
          {"encoder_blocks", cfg.encoder_blocks},
          {"encoder_layer1_depth", cfg.encoder_layer1_depth},
          {"encoder_layer2_depth", cfg.encoder_layer2_depth},
          {"encoder_pool", cfg.encoder_pool == PoolKind::Max ? "max" : "avg"},
          {"decoder_blocks", cfg.decoder_blocks},
          {"decoder_depth", cfg.decoder_depth}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.input_dim = j.at("input_dim").get<int>();
  cfg.encoder_blocks = j.at("encoder_blocks").get<int>();
  cfg.encoder_layer1_depth = j.at("encoder_layer1_depth").get<int>();
  cfg.encoder_layer2_depth = j.at("encoder_layer2_depth").get<int>();
  const std::string pool = j.at("encoder_pool").get<std::string>();
  if (pool == "max") {
    cfg.encoder_pool = PoolKind::Max;
  } else if (pool == "avg") {
    cfg.encoder_pool = PoolKind::Avg;
  } else {
    throw IoError("checkpoint: unknown pool kind '" + pool + "'");
  }
  cfg.decoder_blocks = j.at("decoder_blocks").get<int>();
  cfg.decoder_depth = j.at("decoder_depth").get<int>();
  cfg.validate();
  return cfg;
}

}  // namespace detail

template <typename S>
void save_checkpoint(const std::string& path, OrderNet<S>& model) {
  nlohmann::json manifest = nlohmann::json::array();
  std::string payload;
  auto emit = [&](const std::string& name, const std::vector<int>& shape,
                  const std::vector<S>& data) {
    manifest.push_back(
        {{"name", name}, {"shape", shape}, {"offset", static_cast<std::uint64_t>(payload.size())}});
    for (S v : data) detail::append_f32_le(payload, static_cast<float>(v));
  };
  for (const auto& [name, t] : model.params().items()) emit(name, t.shape(), t.data());
  for (const auto& [name, buf] : model.named_buffers())
    emit(name, {static_cast<int>(buf->size())}, *buf);

  nlohmann::json header{{"format_version", static_cast<int>(kCheckpointVersion)},
                        {"model", detail::config_to_json(model.config())},
                        {"tensors", manifest}};
  const std::string head = header.dump();
  if (head.size() > 0xFFFFFFFFull) throw IoError("checkpoint header too large");

  std::string out;
  out.reserve(9 + head.size() + payload.size());
  out.append(kCheckpointMagic, 4);
  out.push_back(static_cast<char>(kCheckpointVersion));
  const std::uint32_t hlen = static_cast<std::uint32_t>(head.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((hlen >> (8 * i)) & 0xFF));
  out += head;
  out += payload;
  write_file_atomic(path, out);
}

template <typename S>
OrderNet<S> load_checkpoint(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 9 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw IoError(path + ": not a checkpoint file (bad magic)");
  const std::uint8_t version = static_cast<std::uint8_t>(bytes[4]);
  if (version != kCheckpointVersion)
    throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
  std::uint32_t hlen = 0;
  for (int i = 0; i < 4; ++i)
    hlen |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[5 + i])) << (8 * i);
  if (bytes.size() < 9ull + hlen) throw IoError(path + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(9, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": bad checkpoint header: " + e.what());
  }

  OrderNet<S> model(detail::config_from_json(header.at("model")), 0);
  const char* payload = bytes.data() + 9 + hlen;
  const std::size_t payload_size = bytes.size() - 9 - hlen;
  auto fill = [&](const nlohmann::json& entry, const std::string& want_name,
                  const std::vector<int>& want_shape, std::vector<S>& dst) {
    const std::string name = entry.at("name").get<std::string>();
    if (name != want_name)
      throw IoError(path + ": tensor '" + name + "' where '" + want_name + "' was expected");
    const auto shape = entry.at("shape").get<std::vector<int>>();
    if (shape != want_shape)
      throw IoError(path + ": shape mismatch for '" + name + "'");
    const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
    if (offset + 4ull * dst.size() > payload_size)
      throw IoError(path + ": payload truncated at tensor '" + name + "'");
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] = static_cast<S>(detail::read_f32_le(payload + offset + 4 * i));
  };

  const auto& tensors = header.at("tensors");
  auto buffers = model.named_buffers();
  const std::size_t want = model.params().size() + buffers.size();
  if (tensors.size() != want)
    throw IoError(path + ": manifest has " + std::to_string(tensors.size()) + " tensors, model needs " +
                  std::to_string(want));
  std::size_t e = 0;
  for (auto& [name, t] : model.params().items()) fill(tensors[e++], name, t.shape(), t.data());
  for (auto& [name, buf] : buffers)
    fill(tensors[e++], name, {static_cast<int>(buf->size())}, *buf);
  return model;
}

}  // namespace ordernet

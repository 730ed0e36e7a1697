// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "evd/checkpoint.hpp"
#include "evd/error.hpp"
#include "json_util.hpp"

namespace evd {

namespace {

constexpr std::string_view kMagicLine = "EVDCKPT1\n";
constexpr std::string_view kExtraPrefix = "extra:";

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

void append_doubles(std::vector<std::uint8_t>& out, std::span<const double> values) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
  out.insert(out.end(), p, p + values.size() * sizeof(double));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  using detail::json;
  json manifest = json::array();
  std::size_t offset = 0;
  const auto add_entry = [&](const std::string& key, const Tensor& t) {
    manifest.push_back({{"key", key}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel() * sizeof(double);
  };
  for (const auto& [k, t] : ckpt.params) add_entry(k, t);
  for (const auto& [k, t] : ckpt.extra) add_entry(std::string(kExtraPrefix) + k, t);

  json header{{"config", detail::model_config_to_json(ckpt.config)},
              {"meta", ckpt.meta},
              {"manifest", manifest},
              {"payload_bytes", offset}};
  const std::string line = header.dump() + "\n";

  std::vector<std::uint8_t> out(kMagicLine.begin(), kMagicLine.end());
  out.insert(out.end(), line.begin(), line.end());
  out.reserve(out.size() + offset);
  for (const auto& [k, t] : ckpt.params) append_doubles(out, t.values());
  for (const auto& [k, t] : ckpt.extra) append_doubles(out, t.values());
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  using detail::json;
  if (bytes.size() < kMagicLine.size() ||
      std::memcmp(bytes.data(), kMagicLine.data(), kMagicLine.size()) != 0) {
    throw CodecError("not a checkpoint file (bad magic line)", 0);
  }
  std::size_t pos = kMagicLine.size();
  std::size_t end = pos;
  while (end < bytes.size() && bytes[end] != '\n') ++end;
  if (end == bytes.size()) throw CodecError("checkpoint header line is not terminated", pos);
  json header;
  try {
    header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                         bytes.begin() + static_cast<std::ptrdiff_t>(end));
  } catch (const json::exception& e) {
    throw CodecError(std::string("checkpoint header is not valid JSON: ") + e.what(), pos);
  }
  const std::size_t payload = end + 1;

  Checkpoint ckpt;
  try {
    ckpt.config = detail::model_config_from_json(header.at("config"));
    ckpt.meta = header.at("meta").get<std::map<std::string, std::string>>();
    const auto payload_bytes = header.at("payload_bytes").get<std::size_t>();
    if (bytes.size() - payload != payload_bytes) {
      throw CodecError("checkpoint payload length mismatch: expected " + std::to_string(payload_bytes) +
                           " bytes, actual " + std::to_string(bytes.size() - payload),
                       payload);
    }
    for (const auto& entry : header.at("manifest")) {
      auto key = entry.at("key").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const std::size_t n = shape_numel(shape);
      if (offset + n * sizeof(double) > payload_bytes) {
        throw CodecError("manifest entry '" + key + "' runs past the payload", payload + offset);
      }
      std::vector<double> values(n);
      std::memcpy(values.data(), bytes.data() + payload + offset, n * sizeof(double));
      if (key.starts_with(kExtraPrefix)) {
        ckpt.extra.emplace(key.substr(kExtraPrefix.size()), Tensor(shape, std::move(values)));
      } else {
        ckpt.params.emplace(std::move(key), Tensor(shape, std::move(values), true));
      }
    }
  } catch (const json::exception& e) {
    throw CodecError(std::string("malformed checkpoint header: ") + e.what(), pos);
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void check_compatible(const Checkpoint& ckpt, const swin::ModelConfig& config) {
  std::string missing, mismatched;
  for (const auto& spec : swin::manifest(config)) {
    const auto it = ckpt.params.find(spec.key);
    if (it == ckpt.params.end()) {
      missing += (missing.empty() ? "" : ", ") + spec.key;
    } else if (it->second.shape() != spec.shape) {
      mismatched += (mismatched.empty() ? "" : ", ") + spec.key + " " + shape_string(it->second.shape()) +
                    " vs " + shape_string(spec.shape);
    }
  }
  if (missing.empty() && mismatched.empty()) return;
  std::string msg = "checkpoint does not match model config;";
  if (!missing.empty()) msg += " missing keys: " + missing + ";";
  if (!mismatched.empty()) msg += " shape mismatches: " + mismatched + ";";
  throw StructuralError(msg);
}

}  // namespace evd

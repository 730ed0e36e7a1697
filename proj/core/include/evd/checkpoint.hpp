// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "evd/swin.hpp"

namespace evd {

/// Self-describing model snapshot.
///
/// On disk: the line "EVDCKPT1", then a single JSON line holding the model
/// config, `meta` and a manifest of {key, shape, offset}, then the payload of
/// little-endian IEEE-754 doubles. Offsets are bytes from the payload start.
/// Keys of `params` and `extra` share one namespace in the manifest; extra
/// tensors carry an "extra:" prefix.
struct Checkpoint {
  swin::ModelConfig config;
  swin::ModelParams params;
  std::map<std::string, Tensor> extra;
  std::map<std::string, std::string> meta;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws StructuralError listing every key the config expects that the
/// checkpoint lacks (and shape mismatches).
void check_compatible(const Checkpoint& ckpt, const swin::ModelConfig& config);

}  // namespace evd

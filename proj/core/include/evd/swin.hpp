// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "evd/tensor.hpp"

namespace evd::swin {

/// Architecture hyperparameters of the Swin U-Net reconstructor.
struct ModelConfig {
  std::size_t s = 2;          // space-to-depth factor
  std::size_t C = 32;         // base channel width
  std::size_t stages = 4;
  std::size_t depth = 2;      // Swin blocks per stage
  std::size_t window = 8;     // window side, in feature pixels
  std::size_t heads = 4;
  double mlp_ratio = 4.0;
  std::uint64_t seed = 0;     // parameter-init seed

  /// Throws ParameterError naming the offending field.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

enum class Preset { Tiny, Small, Medium, Large };

/// Depth 2/4/6/8 for Tiny/Small/Medium/Large, everything else default.
ModelConfig preset(Preset p);
/// "tiny", "small", "medium", "large" (case-insensitive).
ModelConfig preset(std::string_view name);

enum class Init { TruncNormal, Zeros, Ones };

struct ParamSpec {
  std::string key;
  Shape shape;
  Init init;
};

/// Every learnable tensor of the model, in canonical order.
std::vector<ParamSpec> manifest(const ModelConfig& config);

using ModelParams = std::map<std::string, Tensor>;

/// Deterministic initialization: truncated normal (std 0.02, cut at 2 std)
/// for projections, zeros for biases and LN offsets, ones for LN scales.
/// Each tensor draws from its own stream derived from (seed, key).
ModelParams init_params(const ModelConfig& config);

std::size_t param_count(const ModelConfig& config);

/// Sinusoidal embedding: channels [0, C/2) encode the row index, [C/2, C)
/// the column index, sin on even and cos on odd channels with frequency
/// 10000^(2i/(C/2)).
Tensor positional_embedding(std::size_t h, std::size_t w, std::size_t C);

/// H x W x C -> nWindows x window^2 x C, windows in row-major order.
Tensor window_partition(const Tensor& x, std::size_t window);
Tensor window_reverse(const Tensor& windows, std::size_t window, std::size_t h, std::size_t w);

/// Window and shift actually used on an h x w feature map: the window
/// shrinks to the map when the map is not larger, and then no shift applies.
struct StageGeometry {
  std::size_t window = 0;
  std::size_t shift = 0;  // used by odd-indexed blocks
};
StageGeometry stage_geometry(const ModelConfig& config, std::size_t h, std::size_t w);

struct AttentionParams {
  Tensor qkv_weight, qkv_bias, proj_weight, proj_bias;
};

struct BlockParams {
  Tensor ln1_gamma, ln1_beta;
  AttentionParams attn;
  Tensor ln2_gamma, ln2_beta;
  Tensor fc1_weight, fc1_bias, fc2_weight, fc2_bias;
};

BlockParams block_params(const ModelParams& params, const std::string& prefix);

/// Region label of every token after the cyclic shift, per window
/// ([nWindows][window^2]). Tokens with different labels were not neighbours
/// before the shift and never attend to each other.
std::vector<std::vector<int>> shift_region_labels(std::size_t h, std::size_t w, std::size_t window,
                                                  std::size_t shift);

/// Window multi-head self-attention, optionally on the cyclically shifted
/// map. `shift` must be 0 or window/2.
Tensor wmsa(const Tensor& x, const AttentionParams& params, std::size_t window, std::size_t shift,
            std::size_t heads);

/// The softmax weights wmsa would use, [nWindows*heads, N, N] with batch
/// index window*heads + head.
Tensor attention_weights(const Tensor& x, const AttentionParams& params, std::size_t window,
                         std::size_t shift, std::size_t heads);

/// x + WMSA(LN(x)), then + MLP(LN(.)) with a GELU hidden layer.
Tensor swin_block(const Tensor& x, const BlockParams& params, std::size_t window, std::size_t shift,
                  std::size_t heads);

/// 2x2 space-to-depth then linear 4C -> 2C.
Tensor downsample(const Tensor& x, const Tensor& weight, const Tensor& bias);
/// Linear C -> 2C then 2x2 depth-to-space to C/2.
Tensor upsample(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Smallest multiple of the input that forward accepts along an axis: H
/// must be divisible by s*2^(stages-1) and every stage extent by its window.
bool valid_extent(const ModelConfig& config, std::size_t extent);
std::size_t padded_extent(const ModelConfig& config, std::size_t extent);

/// H x W x 1 RAW tensor -> H x W x 3 reconstruction (unclamped). Throws
/// DimensionError when H or W is not a valid extent.
Tensor forward(const Tensor& raw, const ModelParams& params, const ModelConfig& config);

/// forward() on arbitrary sizes: reflect-pads bottom/right to valid extents
/// and crops the result back.
Tensor reconstruct(const Tensor& raw, const ModelParams& params, const ModelConfig& config);

}  // namespace evd::swin

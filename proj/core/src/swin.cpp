// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "evd/error.hpp"
#include "evd/mosaic.hpp"
#include "evd/swin.hpp"

namespace evd::swin {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kMaskValue = -1e9;

std::string block_key(const std::string& stage, std::size_t j) {
  return stage + ".block" + std::to_string(j);
}

std::size_t width_at(const ModelConfig& c, std::size_t level) { return c.C << level; }

std::size_t hidden_width(const ModelConfig& c, std::size_t width) {
  return static_cast<std::size_t>(std::lround(c.mlp_ratio * static_cast<double>(width)));
}

void add_block(std::vector<ParamSpec>& out, const std::string& prefix, std::size_t d, std::size_t hidden) {
  out.push_back({prefix + ".ln1.gamma", {d}, Init::Ones});
  out.push_back({prefix + ".ln1.beta", {d}, Init::Zeros});
  out.push_back({prefix + ".attn.qkv.weight", {d, 3 * d}, Init::TruncNormal});
  out.push_back({prefix + ".attn.qkv.bias", {3 * d}, Init::Zeros});
  out.push_back({prefix + ".attn.proj.weight", {d, d}, Init::TruncNormal});
  out.push_back({prefix + ".attn.proj.bias", {d}, Init::Zeros});
  out.push_back({prefix + ".ln2.gamma", {d}, Init::Ones});
  out.push_back({prefix + ".ln2.beta", {d}, Init::Zeros});
  out.push_back({prefix + ".mlp.fc1.weight", {d, hidden}, Init::TruncNormal});
  out.push_back({prefix + ".mlp.fc1.bias", {hidden}, Init::Zeros});
  out.push_back({prefix + ".mlp.fc2.weight", {hidden, d}, Init::TruncNormal});
  out.push_back({prefix + ".mlp.fc2.bias", {d}, Init::Zeros});
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

const Tensor& lookup(const ModelParams& params, const std::string& key) {
  const auto it = params.find(key);
  if (it == params.end()) throw StructuralError("missing model parameter '" + key + "'");
  return it->second;
}

Tensor constant_mask(std::size_t h, std::size_t w, std::size_t window, std::size_t shift,
                     std::size_t heads) {
  const auto labels = shift_region_labels(h, w, window, shift);
  const std::size_t n = window * window;
  std::vector<double> mask(labels.size() * heads * n * n, 0.0);
  for (std::size_t win = 0; win < labels.size(); ++win) {
    for (std::size_t hd = 0; hd < heads; ++hd) {
      double* m = mask.data() + (win * heads + hd) * n * n;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (labels[win][i] != labels[win][j]) m[i * n + j] = kMaskValue;
        }
      }
    }
  }
  return Tensor({labels.size() * heads, n, n}, std::move(mask));
}

Tensor attend(const Tensor& x, const AttentionParams& p, std::size_t window, std::size_t shift,
              std::size_t heads, Tensor* weights_out) {
  if (x.rank() != 3) throw ShapeError("wmsa expects H x W x C, got " + shape_string(x.shape()));
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (heads == 0 || c % heads != 0) {
    throw ParameterError("wmsa: " + std::to_string(c) + " channels not divisible by " +
                         std::to_string(heads) + " heads");
  }
  if (shift != 0 && shift * 2 != window) {
    throw ParameterError("wmsa shift must be 0 or window/2, got " + std::to_string(shift));
  }
  const long long sh = static_cast<long long>(shift);
  Tensor t = shift ? roll(x, {-sh, -sh, 0}) : x;
  t = window_partition(t, window);
  const std::size_t nw = t.dim(0), n = window * window, d = c / heads, batch = nw * heads;

  t = linear(t, p.qkv_weight, p.qkv_bias);
  t = reshape(t, {nw, n, 3, heads, d});
  t = permute(t, {2, 0, 3, 1, 4});
  t = reshape(t, {3, batch, n, d});
  const auto part = [&](std::size_t i) { return reshape(slice(t, 0, i, i + 1), {batch, n, d}); };
  const Tensor q = scale(part(0), 1.0 / std::sqrt(static_cast<double>(d)));
  const Tensor k = part(1);
  const Tensor v = part(2);

  Tensor logits = matmul(q, permute(k, {0, 2, 1}));
  if (shift) logits = add(logits, constant_mask(h, w, window, shift, heads));
  const Tensor weights = softmax(logits, 2);
  if (weights_out) *weights_out = weights;

  Tensor o = matmul(weights, v);
  o = reshape(o, {nw, heads, n, d});
  o = permute(o, {0, 2, 1, 3});
  o = reshape(o, {nw, n, c});
  o = linear(o, p.proj_weight, p.proj_bias);
  o = window_reverse(o, window, h, w);
  return shift ? roll(o, {sh, sh, 0}) : o;
}

}  // namespace

void ModelConfig::validate() const {
  const auto fail = [](const std::string& what) { throw ParameterError("model config: " + what); };
  if (s < 1) fail("s must be >= 1");
  if (stages < 1) fail("stages must be >= 1");
  if (depth < 1) fail("depth must be >= 1");
  if (window < 2) fail("window must be >= 2");
  if (window % 2 != 0) fail("window must be even so the shift is window/2");
  if (heads < 1 || C % heads != 0) fail("C must be divisible by heads");
  if (C % 2 != 0) fail("C must be even for the positional embedding");
  if (C % (s * s) != 0) fail("C must be divisible by s^2 for depth-to-space");
  if (!(mlp_ratio > 0.0)) fail("mlp_ratio must be > 0");
}

ModelConfig preset(Preset p) {
  ModelConfig c;
  switch (p) {
    case Preset::Tiny: c.depth = 2; break;
    case Preset::Small: c.depth = 4; break;
    case Preset::Medium: c.depth = 6; break;
    case Preset::Large: c.depth = 8; break;
  }
  return c;
}

ModelConfig preset(std::string_view name) {
  std::string n(name);
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (n == "tiny") return preset(Preset::Tiny);
  if (n == "small") return preset(Preset::Small);
  if (n == "medium") return preset(Preset::Medium);
  if (n == "large") return preset(Preset::Large);
  throw ParameterError("unknown model preset '" + std::string(name) + "'");
}

std::vector<ParamSpec> manifest(const ModelConfig& c) {
  c.validate();
  std::vector<ParamSpec> out;
  out.push_back({"stem.weight", {c.s * c.s, c.C}, Init::TruncNormal});
  out.push_back({"stem.bias", {c.C}, Init::Zeros});
  for (std::size_t k = 0; k < c.stages; ++k) {
    const std::size_t d = width_at(c, k);
    const std::string stage = "enc" + std::to_string(k);
    for (std::size_t j = 0; j < c.depth; ++j) add_block(out, block_key(stage, j), d, hidden_width(c, d));
    if (k + 1 < c.stages) {
      out.push_back({stage + ".down.weight", {4 * d, 2 * d}, Init::TruncNormal});
      out.push_back({stage + ".down.bias", {2 * d}, Init::Zeros});
    }
  }
  for (std::size_t k = c.stages - 1; k-- > 0;) {
    const std::size_t d = width_at(c, k);
    const std::string stage = "dec" + std::to_string(k);
    out.push_back({stage + ".up.weight", {2 * d, 4 * d}, Init::TruncNormal});
    out.push_back({stage + ".up.bias", {4 * d}, Init::Zeros});
    out.push_back({stage + ".fuse.weight", {2 * d, d}, Init::TruncNormal});
    out.push_back({stage + ".fuse.bias", {d}, Init::Zeros});
    for (std::size_t j = 0; j < c.depth; ++j) add_block(out, block_key(stage, j), d, hidden_width(c, d));
  }
  out.push_back({"head.weight", {c.C / (c.s * c.s), 3}, Init::TruncNormal});
  out.push_back({"head.bias", {3}, Init::Zeros});
  return out;
}

ModelParams init_params(const ModelConfig& config) {
  ModelParams params;
  for (const auto& spec : manifest(config)) {
    std::vector<double> values(shape_numel(spec.shape), 0.0);
    if (spec.init == Init::Ones) {
      std::fill(values.begin(), values.end(), 1.0);
    } else if (spec.init == Init::TruncNormal) {
      const std::uint64_t kh = fnv1a(spec.key);
      std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                        static_cast<std::uint32_t>(kh), static_cast<std::uint32_t>(kh >> 32)};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (auto& v : values) {
        double z;
        do {
          z = normal(rng);
        } while (std::abs(z) > 2.0);
        v = 0.02 * z;
      }
    }
    params.emplace(spec.key, Tensor(spec.shape, std::move(values), true));
  }
  return params;
}

std::size_t param_count(const ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& spec : manifest(config)) n += shape_numel(spec.shape);
  return n;
}

Tensor positional_embedding(std::size_t h, std::size_t w, std::size_t C) {
  if (C == 0 || C % 2 != 0) throw ParameterError("positional embedding needs even C, got " + std::to_string(C));
  const std::size_t half = C / 2;
  std::vector<double> freq(half);
  for (std::size_t j = 0; j < half; ++j) {
    const double i = static_cast<double>(j / 2);
    freq[j] = std::pow(10000.0, 2.0 * i / static_cast<double>(half));
  }
  const auto enc = [&](std::size_t j, double p) {
    return (j % 2 == 0) ? std::sin(p / freq[j]) : std::cos(p / freq[j]);
  };
  std::vector<double> out(h * w * C);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double* px = out.data() + (y * w + x) * C;
      for (std::size_t j = 0; j < half; ++j) {
        px[j] = enc(j, static_cast<double>(y));
        px[half + j] = enc(j, static_cast<double>(x));
      }
    }
  }
  return Tensor({h, w, C}, std::move(out));
}

Tensor window_partition(const Tensor& x, std::size_t window) {
  if (x.rank() != 3) throw ShapeError("window_partition expects H x W x C, got " + shape_string(x.shape()));
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (window == 0 || h % window != 0 || w % window != 0) {
    throw DimensionError("window_partition: " + shape_string(x.shape()) + " not divisible by window " +
                         std::to_string(window));
  }
  auto t = reshape(x, {h / window, window, w / window, window, c});
  t = permute(t, {0, 2, 1, 3, 4});
  return reshape(t, {(h / window) * (w / window), window * window, c});
}

Tensor window_reverse(const Tensor& windows, std::size_t window, std::size_t h, std::size_t w) {
  if (windows.rank() != 3 || window == 0 || h % window != 0 || w % window != 0 ||
      windows.dim(0) != (h / window) * (w / window) || windows.dim(1) != window * window) {
    throw DimensionError("window_reverse: " + shape_string(windows.shape()) + " does not tile " +
                         std::to_string(h) + "x" + std::to_string(w) + " with window " +
                         std::to_string(window));
  }
  const std::size_t c = windows.dim(2);
  auto t = reshape(windows, {h / window, w / window, window, window, c});
  t = permute(t, {0, 2, 1, 3, 4});
  return reshape(t, {h, w, c});
}

StageGeometry stage_geometry(const ModelConfig& config, std::size_t h, std::size_t w) {
  StageGeometry g;
  const std::size_t smallest = std::min(h, w);
  g.window = std::min(config.window, smallest);
  g.shift = smallest > config.window ? config.window / 2 : 0;
  if (g.window == 0 || h % g.window != 0 || w % g.window != 0) {
    throw DimensionError("feature map " + std::to_string(h) + "x" + std::to_string(w) +
                         " cannot be tiled by window " + std::to_string(g.window));
  }
  return g;
}

BlockParams block_params(const ModelParams& p, const std::string& prefix) {
  BlockParams b;
  b.ln1_gamma = lookup(p, prefix + ".ln1.gamma");
  b.ln1_beta = lookup(p, prefix + ".ln1.beta");
  b.attn.qkv_weight = lookup(p, prefix + ".attn.qkv.weight");
  b.attn.qkv_bias = lookup(p, prefix + ".attn.qkv.bias");
  b.attn.proj_weight = lookup(p, prefix + ".attn.proj.weight");
  b.attn.proj_bias = lookup(p, prefix + ".attn.proj.bias");
  b.ln2_gamma = lookup(p, prefix + ".ln2.gamma");
  b.ln2_beta = lookup(p, prefix + ".ln2.beta");
  b.fc1_weight = lookup(p, prefix + ".mlp.fc1.weight");
  b.fc1_bias = lookup(p, prefix + ".mlp.fc1.bias");
  b.fc2_weight = lookup(p, prefix + ".mlp.fc2.weight");
  b.fc2_bias = lookup(p, prefix + ".mlp.fc2.bias");
  return b;
}

std::vector<std::vector<int>> shift_region_labels(std::size_t h, std::size_t w, std::size_t window,
                                                  std::size_t shift) {
  if (window == 0 || h % window != 0 || w % window != 0) {
    throw DimensionError("shift_region_labels: map not divisible by window");
  }
  const auto region = [&](std::size_t p, std::size_t extent) {
    if (shift == 0 || p < extent - window) return 0;
    return p < extent - shift ? 1 : 2;
  };
  const std::size_t wy = h / window, wx = w / window;
  std::vector<std::vector<int>> labels(wy * wx, std::vector<int>(window * window));
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t win = (y / window) * wx + x / window;
      const std::size_t tok = (y % window) * window + x % window;
      labels[win][tok] = region(y, h) * 3 + region(x, w);
    }
  }
  return labels;
}

Tensor wmsa(const Tensor& x, const AttentionParams& params, std::size_t window, std::size_t shift,
            std::size_t heads) {
  return attend(x, params, window, shift, heads, nullptr);
}

Tensor attention_weights(const Tensor& x, const AttentionParams& params, std::size_t window,
                         std::size_t shift, std::size_t heads) {
  Tensor weights;
  attend(x, params, window, shift, heads, &weights);
  return weights;
}

Tensor swin_block(const Tensor& x, const BlockParams& p, std::size_t window, std::size_t shift,
                  std::size_t heads) {
  Tensor t = layer_norm(x, p.ln1_gamma, p.ln1_beta, kLnEps);
  Tensor y = add(x, wmsa(t, p.attn, window, shift, heads));
  t = layer_norm(y, p.ln2_gamma, p.ln2_beta, kLnEps);
  t = gelu(linear(t, p.fc1_weight, p.fc1_bias));
  t = linear(t, p.fc2_weight, p.fc2_bias);
  return add(y, t);
}

Tensor downsample(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 3 || x.dim(0) % 2 != 0 || x.dim(1) % 2 != 0) {
    throw DimensionError("downsample needs even spatial extents, got " + shape_string(x.shape()));
  }
  return linear(space_to_depth(x, 2), weight, bias);
}

Tensor upsample(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 3 || x.dim(2) % 2 != 0) {
    throw DimensionError("upsample needs an even channel count, got " + shape_string(x.shape()));
  }
  return depth_to_space(linear(x, weight, bias), 2);
}

bool valid_extent(const ModelConfig& config, std::size_t extent) {
  const std::size_t unit = config.s << (config.stages - 1);
  if (extent == 0 || extent % unit != 0) return false;
  for (std::size_t k = 0; k < config.stages; ++k) {
    const std::size_t e = extent / (config.s << k);
    const std::size_t win = std::min(config.window, e);
    if (e % win != 0) return false;
  }
  return true;
}

std::size_t padded_extent(const ModelConfig& config, std::size_t extent) {
  std::size_t e = std::max<std::size_t>(extent, 1);
  while (!valid_extent(config, e)) ++e;
  return e;
}

Tensor forward(const Tensor& raw, const ModelParams& params, const ModelConfig& c) {
  c.validate();
  if (raw.rank() != 3 || raw.dim(2) != 1) {
    throw ShapeError("forward expects an H x W x 1 RAW tensor, got " + shape_string(raw.shape()));
  }
  const std::size_t H = raw.dim(0), W = raw.dim(1);
  if (!valid_extent(c, H) || !valid_extent(c, W)) {
    throw DimensionError("input " + std::to_string(H) + "x" + std::to_string(W) +
                         " is not a valid model extent (next valid: " +
                         std::to_string(padded_extent(c, H)) + "x" + std::to_string(padded_extent(c, W)) +
                         ")");
  }

  Tensor x = space_to_depth(raw, c.s);
  x = conv1x1(x, lookup(params, "stem.weight"), lookup(params, "stem.bias"));
  x = add(x, positional_embedding(x.dim(0), x.dim(1), c.C));

  const auto run_blocks = [&](Tensor t, const std::string& stage) {
    const auto g = stage_geometry(c, t.dim(0), t.dim(1));
    for (std::size_t j = 0; j < c.depth; ++j) {
      t = swin_block(t, block_params(params, block_key(stage, j)), g.window, j % 2 ? g.shift : 0, c.heads);
    }
    return t;
  };

  std::vector<Tensor> skips;
  for (std::size_t k = 0; k < c.stages; ++k) {
    const std::string stage = "enc" + std::to_string(k);
    x = run_blocks(x, stage);
    if (k + 1 < c.stages) {
      skips.push_back(x);
      x = downsample(x, lookup(params, stage + ".down.weight"), lookup(params, stage + ".down.bias"));
    }
  }
  for (std::size_t k = c.stages - 1; k-- > 0;) {
    const std::string stage = "dec" + std::to_string(k);
    x = upsample(x, lookup(params, stage + ".up.weight"), lookup(params, stage + ".up.bias"));
    x = concat_last(x, skips[k]);
    x = conv1x1(x, lookup(params, stage + ".fuse.weight"), lookup(params, stage + ".fuse.bias"));
    x = run_blocks(x, stage);
  }
  x = depth_to_space(x, c.s);
  return conv1x1(x, lookup(params, "head.weight"), lookup(params, "head.bias"));
}

Tensor reconstruct(const Tensor& raw, const ModelParams& params, const ModelConfig& c) {
  if (raw.rank() != 3) throw ShapeError("reconstruct expects H x W x 1, got " + shape_string(raw.shape()));
  const std::size_t H = raw.dim(0), W = raw.dim(1);
  const std::size_t ph = padded_extent(c, H) - H, pw = padded_extent(c, W) - W;
  if (ph == 0 && pw == 0) return forward(raw, params, c);
  if (H == 0 || W == 0) throw DimensionError("reconstruct on an empty input");
  const Tensor padded = pad(raw, {{0, ph}, {0, pw}, {0, 0}}, PadMode::Reflect);
  const Tensor out = forward(padded, params, c);
  return slice(slice(out, 0, 0, H), 1, 0, W);
}

}  // namespace evd::swin

// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "evd/metrics.hpp"
#include "evd/train.hpp"

namespace evd::train {

namespace {

std::mt19937_64 seeded(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (auto p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

constexpr std::uint64_t kCropStream = 0x63726f70;   // "crop"
constexpr std::uint64_t kOrderStream = 0x6f726472;  // "ordr"

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  // Explicit rejection sampling: std::uniform_int_distribution is not
  // guaranteed to produce the same sequence across standard libraries.
  if (n <= 1) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do r = rng();
  while (r >= limit);
  return static_cast<std::size_t>(r % n);
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, int stage, std::size_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = seeded({seed, kOrderStream, static_cast<std::uint64_t>(stage), epoch});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  return order;
}

bool finite_all(const Gradients& g) {
  for (const auto& [_, v] : g) {
    for (double x : v) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr1_init >= 0.0) || !std::isfinite(lr1_init)) throw ParameterError("lr1_init must be finite and >= 0");
  if (!(lr2_init >= 0.0) || !std::isfinite(lr2_init)) throw ParameterError("lr2_init must be finite and >= 0");
  if (batch != 1) throw ParameterError("batch must be 1 (got " + std::to_string(batch) + ")");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ParameterError("beta1 must lie in [0,1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ParameterError("beta2 must lie in [0,1)");
  if (!(adam.epsilon > 0.0)) throw ParameterError("epsilon must be > 0");
  if (!(grad_clip >= 0.0)) throw ParameterError("grad_clip must be >= 0");
  loss::validate(loss::Charbonnier{charbonnier_eps});
  loss::validate(stage2_loss, lambda_cap);
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.stage1_epochs = 30;
  c.stage2_epochs = 10;
  c.lr1_init = 1e-3;
  c.lr2_init = 1e-4;
  c.crop = 64;
  return c;
}

Dataset load_dataset(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest '" + manifest.string() + "'");
  const auto base = manifest.parent_path();
  const auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  Dataset data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(manifest.string() + ":" + std::to_string(lineno) + ": expected 'raw<TAB>gt'");
    }
    Sample s;
    const auto raw_path = resolve(line.substr(0, tab));
    s.id = raw_path.stem().string();
    s.raw = read_hevs(raw_path);
    s.gt = read_png(resolve(line.substr(tab + 1)));
    if (s.raw.width != s.gt.width || s.raw.height != s.gt.height) {
      throw DataError("size mismatch between '" + raw_path.string() + "' and its ground truth");
    }
    data.push_back(std::move(s));
  }
  if (data.empty()) throw DataError("manifest '" + manifest.string() + "' lists no samples");
  return data;
}

void TrainHistory::append(const TrainHistory& other) {
  steps.insert(steps.end(), other.steps.begin(), other.steps.end());
  epochs.insert(epochs.end(), other.epochs.begin(), other.epochs.end());
}

void write_history_csv(std::ostream& out, const TrainHistory& history) {
  const auto old = out.precision(17);
  out << "step,stage,lr,loss,grad_norm\n";
  for (const auto& r : history.steps) {
    out << r.step << ',' << r.stage << ',' << r.lr << ',' << r.loss << ',' << r.grad_norm << '\n';
  }
  out.precision(old);
}

TrainHistory read_history_csv(std::istream& in) {
  TrainHistory h;
  std::string line;
  if (!std::getline(in, line)) return h;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 5) throw DataError("malformed history row: " + line);
    StepRecord r;
    try {
      r.step = static_cast<std::size_t>(std::stoull(cells[0]));
      r.stage = std::stoi(cells[1]);
      r.lr = std::stod(cells[2]);
      r.loss = std::stod(cells[3]);
      r.grad_norm = std::stod(cells[4]);
    } catch (const std::exception&) {
      throw DataError("malformed history row: " + line);
    }
    h.steps.push_back(r);
  }
  return h;
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr_init) {
  if (total_steps == 0) throw ParameterError("cosine_lr: total_steps must be >= 1");
  if (step > total_steps) {
    throw ParameterError("cosine_lr: step " + std::to_string(step) + " exceeds total " + std::to_string(total_steps));
  }
  if (step == total_steps) return 0.0;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_init * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

std::pair<RawImage, RgbImage> random_crop(const RawImage& raw, const RgbImage& gt, std::size_t crop,
                                          std::mt19937_64& rng, CropOffset* offset) {
  if (raw.width != gt.width || raw.height != gt.height) throw ShapeError("random_crop: RAW and RGB sizes differ");
  const auto pattern = pattern_from_id(raw.pattern_id);
  if (crop == 0 || crop % pattern.tile_h != 0 || crop % pattern.tile_w != 0) {
    throw ParameterError("crop " + std::to_string(crop) + " is not a positive multiple of the " +
                         std::to_string(pattern.tile_h) + "x" + std::to_string(pattern.tile_w) + " CFA tile");
  }
  if (raw.width < crop || raw.height < crop) {
    throw DataError("image " + std::to_string(raw.width) + "x" + std::to_string(raw.height) +
                    " is smaller than the crop " + std::to_string(crop));
  }
  const std::size_t ny = (raw.height - crop) / pattern.tile_h + 1;
  const std::size_t nx = (raw.width - crop) / pattern.tile_w + 1;
  const std::size_t y0 = uniform_index(rng, ny) * pattern.tile_h;
  const std::size_t x0 = uniform_index(rng, nx) * pattern.tile_w;
  if (offset) *offset = {x0, y0};

  RawImage r;
  r.width = r.height = crop;
  r.pattern_id = raw.pattern_id;
  r.white_level = raw.white_level;
  r.samples.resize(crop * crop);
  RgbImage g(crop, crop);
  for (std::size_t y = 0; y < crop; ++y) {
    for (std::size_t x = 0; x < crop; ++x) {
      r.samples[y * crop + x] = raw.at(y0 + y, x0 + x);
      for (std::size_t c = 0; c < 3; ++c) g.at(y, x, c) = gt.at(y0 + y, x0 + x, c);
    }
  }
  return {std::move(r), std::move(g)};
}

Gradients collect_gradients(const swin::ModelParams& params) {
  Gradients g;
  for (const auto& [k, t] : params) {
    auto& v = g[k];
    if (t.has_grad()) {
      v.assign(t.grad().begin(), t.grad().end());
    } else {
      v.assign(t.numel(), 0.0);
    }
  }
  return g;
}

double global_norm(const Gradients& grads) {
  double acc = 0.0;
  for (const auto& [_, v] : grads) {
    for (double x : v) acc += x * x;
  }
  return std::sqrt(acc);
}

void optimizer_step(swin::ModelParams& params, const Gradients& grads, AdamState& state, double lr,
                    const AdamHyper& hyper) {
  std::string missing;
  for (const auto& [k, _] : params) {
    if (!grads.contains(k)) missing += (missing.empty() ? "" : ", ") + k;
  }
  for (const auto& [k, _] : grads) {
    if (!params.contains(k)) missing += (missing.empty() ? "" : ", ") + ("unexpected " + k);
  }
  if (!missing.empty()) throw StructuralError("optimizer_step: gradient keys do not match parameters: " + missing);

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(hyper.beta1, t);
  const double bc2 = 1.0 - std::pow(hyper.beta2, t);
  for (auto& [k, p] : params) {
    const auto& g = grads.at(k);
    auto values = p.mutable_values();
    if (g.size() != values.size()) throw StructuralError("optimizer_step: gradient size mismatch for " + k);
    auto& m = state.m[k];
    auto& v = state.v[k];
    m.resize(values.size(), 0.0);
    v.resize(values.size(), 0.0);
    double* __restrict pm = m.data();
    double* __restrict pv = v.data();
    double* __restrict pw = values.data();
    const double* __restrict pg = g.data();
    const double b1 = hyper.beta1, b2 = hyper.beta2, eps = hyper.epsilon;
    for (std::size_t i = 0; i < values.size(); ++i) {
      pm[i] = b1 * pm[i] + (1.0 - b1) * pg[i];
      pv[i] = b2 * pv[i] + (1.0 - b2) * pg[i] * pg[i];
      pw[i] -= lr * (pm[i] / bc1) / (std::sqrt(pv[i] / bc2) + eps);
    }
  }
}

swin::ModelParams clone_params(const swin::ModelParams& params) {
  swin::ModelParams out;
  for (const auto& [k, t] : params) {
    Tensor c = t.detach();
    c.set_requires_grad(true);
    out.emplace(k, std::move(c));
  }
  return out;
}

Checkpoint to_checkpoint(const TrainState& state, const swin::ModelConfig& config) {
  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.params = clone_params(state.params);
  for (const auto& [k, m] : state.adam.m) ckpt.extra.emplace("adam.m/" + k, Tensor({m.size()}, m));
  for (const auto& [k, v] : state.adam.v) ckpt.extra.emplace("adam.v/" + k, Tensor({v.size()}, v));
  ckpt.meta["global_step"] = std::to_string(state.global_step);
  ckpt.meta["adam_step"] = std::to_string(state.adam.step);
  return ckpt;
}

TrainState from_checkpoint(const Checkpoint& ckpt, const swin::ModelConfig& config) {
  check_compatible(ckpt, config);
  TrainState s;
  for (const auto& spec : swin::manifest(config)) {
    Tensor t = ckpt.params.at(spec.key).detach();
    t.set_requires_grad(true);
    s.params.emplace(spec.key, std::move(t));
  }
  for (const auto& [k, t] : ckpt.extra) {
    const auto v = t.values();
    if (k.starts_with("adam.m/")) s.adam.m[k.substr(7)].assign(v.begin(), v.end());
    if (k.starts_with("adam.v/")) s.adam.v[k.substr(7)].assign(v.begin(), v.end());
  }
  const auto read_count = [&](const char* key) -> std::size_t {
    const auto it = ckpt.meta.find(key);
    if (it == ckpt.meta.end()) return 0;
    try {
      return static_cast<std::size_t>(std::stoull(it->second));
    } catch (const std::exception&) {
      throw DataError(std::string("checkpoint meta '") + key + "' is not a count");
    }
  };
  s.global_step = read_count("global_step");
  s.adam.step = read_count("adam_step");
  return s;
}

RgbImage reconstruct_image(const swin::ModelParams& params, const swin::ModelConfig& model, const RawImage& raw) {
  NoGradGuard no_grad;
  const auto in = raw_to_tensor(raw);
  auto rgb = tensor_to_rgb(swin::reconstruct(in.values, params, model));
  rgb.clamp();
  return rgb;
}

TrainHistory train_stage(TrainState& state, const swin::ModelConfig& model, const Dataset& dataset,
                         const TrainConfig& config, const loss::LossSpec& loss_spec, int stage_id,
                         std::size_t epochs, double lr_init, std::size_t stage_start, const Hooks& hooks) {
  TrainHistory history;
  if (epochs == 0) return history;
  if (dataset.empty()) throw DataError("train_stage: empty dataset");
  loss::validate(loss_spec, config.lambda_cap);

  const std::size_t n = dataset.size();
  const std::size_t total = epochs * n;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const std::size_t epoch_start = stage_start + epoch * n;
    if (state.global_step >= epoch_start + n) continue;  // already done (resume)
    const auto order = epoch_order(config.seed, stage_id, epoch, n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t step = epoch_start + i;
      if (step < state.global_step) continue;
      const Sample& sample = dataset[order[i]];

      RawImage raw = sample.raw;
      RgbImage gt = sample.gt;
      if (config.crop != 0) {
        auto rng = seeded({config.seed, kCropStream, step});
        std::tie(raw, gt) = random_crop(sample.raw, sample.gt, config.crop, rng);
      }

      StepRecord rec;
      rec.step = step;
      rec.stage = stage_id;
      rec.lr = cosine_lr(step - stage_start, total, lr_init);

      Gradients grads;
      try {
        const auto input = raw_to_tensor(raw);
        const Tensor pred = swin::reconstruct(input.values, state.params, model);
        const Tensor loss = loss::evaluate(loss_spec, pred, rgb_to_tensor(gt));
        rec.loss = loss.item();
        if (!std::isfinite(rec.loss)) throw NumericError("non-finite loss");
        backward(loss);
        grads = collect_gradients(state.params);
        for (auto& [_, p] : state.params) p.zero_grad();
        if (!finite_all(grads)) throw NumericError("non-finite gradient");
      } catch (const NumericError& e) {
        for (auto& [_, p] : state.params) p.zero_grad();
        if (std::isfinite(rec.loss)) rec.loss = std::numeric_limits<double>::quiet_NaN();
        history.steps.push_back(rec);
        if (hooks.on_step) hooks.on_step(rec);
        throw TrainingAborted("training aborted at step " + std::to_string(step) + " (stage " +
                                  std::to_string(stage_id) + "): " + e.what(),
                              std::move(history), step);
      }

      rec.grad_norm = global_norm(grads);
      if (config.grad_clip > 0.0 && rec.grad_norm > config.grad_clip) {
        const double f = config.grad_clip / rec.grad_norm;
        for (auto& [_, v] : grads) {
          for (double& x : v) x *= f;
        }
      }
      optimizer_step(state.params, grads, state.adam, rec.lr, config.adam);
      state.global_step = step + 1;
      history.steps.push_back(rec);
      if (hooks.on_step) hooks.on_step(rec);
      if (config.checkpoint_every != 0 && state.global_step % config.checkpoint_every == 0 &&
          hooks.on_checkpoint) {
        hooks.on_checkpoint(state);
      }
    }
    if (config.eval_every != 0 && (epoch + 1) % config.eval_every == 0) {
      EpochRecord er{stage_id, epoch, 0.0, 0.0};
      for (const auto& s : dataset) {
        const auto pred = reconstruct_image(state.params, model, s.raw);
        er.psnr += metrics::psnr(pred, s.gt);
        er.ssim += std::min(s.gt.width, s.gt.height) >= metrics::kSsimWindow ? metrics::ssim(pred, s.gt) : 0.0;
      }
      er.psnr /= static_cast<double>(n);
      er.ssim /= static_cast<double>(n);
      history.epochs.push_back(er);
    }
  }
  return history;
}

TwoStageResult two_stage_train(const swin::ModelConfig& model, const Dataset& dataset, const TrainConfig& config,
                               const TrainState* resume, const Hooks& hooks) {
  model.validate();
  config.validate();
  if (dataset.empty()) throw DataError("two_stage_train: empty dataset");
  TwoStageResult result;
  if (resume) {
    result.state.params = clone_params(resume->params);
    result.state.adam = resume->adam;
    result.state.global_step = resume->global_step;
  } else {
    result.state.params = swin::init_params(model);
  }

  const std::size_t stage2_start = config.stage1_epochs * dataset.size();
  const std::size_t end = stage2_start + config.stage2_epochs * dataset.size();
  if (result.state.global_step > end) {
    throw StateError("resume step " + std::to_string(result.state.global_step) + " is past the end of training (" +
                     std::to_string(end) + " steps)");
  }

  result.history = train_stage(result.state, model, dataset, config, loss::Charbonnier{config.charbonnier_eps}, 1,
                               config.stage1_epochs, config.lr1_init, 0, hooks);
  result.stage1_params = clone_params(result.state.params);

  if (result.state.global_step == stage2_start) result.state.adam = AdamState{};
  result.history.append(train_stage(result.state, model, dataset, config, config.stage2_loss, 2,
                                    config.stage2_epochs, config.lr2_init, stage2_start, hooks));
  return result;
}

}  // namespace evd::train

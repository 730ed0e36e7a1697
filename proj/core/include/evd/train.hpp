// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "evd/checkpoint.hpp"
#include "evd/error.hpp"
#include "evd/image.hpp"
#include "evd/losses.hpp"
#include "evd/mosaic.hpp"
#include "evd/swin.hpp"

namespace evd::train {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  std::size_t stage1_epochs = 500;
  std::size_t stage2_epochs = 200;
  double lr1_init = 1e-4;
  double lr2_init = 1e-5;
  std::size_t crop = 640;  // 0 trains on whole images
  std::size_t batch = 1;
  std::uint64_t seed = 0;
  AdamHyper adam;
  double charbonnier_eps = 1e-3;
  loss::LossSpec stage2_loss = loss::PixelFocusExp{1.1};
  double lambda_cap = loss::kDefaultLambdaCap;
  std::size_t checkpoint_every = 0;  // steps, 0 disables periodic snapshots
  double grad_clip = 0.0;            // global L2 norm, 0 disables
  std::size_t eval_every = 0;        // epochs between PSNR/SSIM passes, 0 disables

  /// Throws ParameterError naming the offending field.
  void validate() const;

  /// Small-scale preset for desk runs: 30 + 10 epochs, 64 px crops, lr 1e-3 / 1e-4.
  static TrainConfig desk();
};

struct Sample {
  std::string id;
  RawImage raw;
  RgbImage gt;
};

using Dataset = std::vector<Sample>;

/// Reads a manifest of "raw<TAB>gt" lines; relative paths resolve against the
/// manifest's directory. Blank lines and lines starting with '#' are skipped.
Dataset load_dataset(const std::filesystem::path& manifest);

struct StepRecord {
  std::size_t step = 0;  // global, 0-based
  int stage = 1;
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct EpochRecord {
  int stage = 1;
  std::size_t epoch = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;

  void append(const TrainHistory& other);
};

void write_history_csv(std::ostream& out, const TrainHistory& history);
TrainHistory read_history_csv(std::istream& in);

/// lr_init * (1 + cos(pi * step / total_steps)) / 2.
double cosine_lr(std::size_t step, std::size_t total_steps, double lr_init);

struct CropOffset {
  std::size_t x = 0, y = 0;
};

/// Co-located crop of a RAW/RGB pair. Offsets are drawn uniformly among the
/// multiples of the CFA tile that keep the crop inside the image, so the
/// crop keeps the pattern phase. `crop` must be a multiple of the tile.
std::pair<RawImage, RgbImage> random_crop(const RawImage& raw, const RgbImage& gt, std::size_t crop,
                                          std::mt19937_64& rng, CropOffset* offset = nullptr);

struct AdamState {
  std::size_t step = 0;
  std::map<std::string, std::vector<double>> m, v;
};

using Gradients = std::map<std::string, std::vector<double>>;

/// Copies the accumulated gradient of every parameter (zeros when absent).
Gradients collect_gradients(const swin::ModelParams& params);
double global_norm(const Gradients& grads);

/// One bias-corrected Adam update in place. Throws StructuralError when the
/// keys of `grads` differ from those of `params`.
void optimizer_step(swin::ModelParams& params, const Gradients& grads, AdamState& state, double lr,
                    const AdamHyper& hyper);

/// Everything needed to continue a run exactly where it stopped.
struct TrainState {
  swin::ModelParams params;
  AdamState adam;
  std::size_t global_step = 0;  // optimizer steps completed so far
};

/// Deep copy of parameter values (fresh leaves).
swin::ModelParams clone_params(const swin::ModelParams& params);

Checkpoint to_checkpoint(const TrainState& state, const swin::ModelConfig& config);
TrainState from_checkpoint(const Checkpoint& ckpt, const swin::ModelConfig& config);

struct Hooks {
  std::function<void(const StepRecord&)> on_step;
  /// Called every `checkpoint_every` steps with the state after the step.
  std::function<void(const TrainState&)> on_checkpoint;
};

/// Raised when a step produces a non-finite loss or gradient. The history
/// ends with the offending step.
class TrainingAborted : public NumericError {
public:
  TrainingAborted(const std::string& what, TrainHistory history, std::size_t step)
      : NumericError(what), history_(std::move(history)), step_(step) {}
  const TrainHistory& history() const noexcept { return history_; }
  std::size_t step() const noexcept { return step_; }

private:
  TrainHistory history_;
  std::size_t step_;
};

/// Runs `epochs` passes over the dataset with batch size one. Global steps
/// [stage_start, stage_start + epochs*|dataset|) belong to this stage; steps
/// already covered by `state.global_step` are skipped, which is how a resumed
/// run continues. Sample order per epoch derives from (seed, stage, epoch)
/// and each crop from (seed, global step).
TrainHistory train_stage(TrainState& state, const swin::ModelConfig& model, const Dataset& dataset,
                         const TrainConfig& config, const loss::LossSpec& loss, int stage_id,
                         std::size_t epochs, double lr_init, std::size_t stage_start,
                         const Hooks& hooks = {});

struct TwoStageResult {
  TrainState state;
  TrainHistory history;
  swin::ModelParams stage1_params;
};

/// Charbonnier stage then fine-tuning with `config.stage2_loss`. The Adam
/// moments restart at the stage boundary. Pass `resume` to continue from a
/// saved state.
TwoStageResult two_stage_train(const swin::ModelConfig& model, const Dataset& dataset, const TrainConfig& config,
                               const TrainState* resume = nullptr, const Hooks& hooks = {});

/// Network reconstruction of a RAW image, clamped to [0,1].
RgbImage reconstruct_image(const swin::ModelParams& params, const swin::ModelConfig& model, const RawImage& raw);

}  // namespace evd::train

// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evd/checkpoint.hpp"
#include "evd/config.hpp"
#include "evd/error.hpp"
#include "evd/losses.hpp"
#include "evd/metrics.hpp"
#include "evd/mosaic.hpp"
#include "evd/synthetic.hpp"
#include "evd/train.hpp"
#include "evd/verification.hpp"
#include "plot.hpp"

namespace evd::cli {

namespace {

namespace fs = std::filesystem;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool verbose = false;
};

struct Context {
  Globals g;
  std::ostream& out;
  std::ostream& err;

  void log(const std::string& msg) const {
    if (g.verbose) err << msg << '\n';
  }
  void warn(const std::string& msg) const { err << "warning: " << msg << '\n'; }
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Parameter:
    case ErrorKind::Structural:
      return kUsage;
    case ErrorKind::Data:
    case ErrorKind::Codec:
    case ErrorKind::Shape:
    case ErrorKind::Dimension:
      return kData;
    case ErrorKind::Numeric:
    case ErrorKind::Domain:
      return kNumeric;
    case ErrorKind::State:
      break;
  }
  return kInternal;
}

RunConfig run_config(const Context& ctx) {
  RunConfig rc = ctx.g.config.empty() ? parse_run_config("{}") : load_run_config(ctx.g.config);
  if (ctx.g.seed) {
    rc.train.seed = *ctx.g.seed;
    rc.model.seed = *ctx.g.seed;
  }
  if (!ctx.g.out.empty()) rc.out = ctx.g.out;
  if (rc.out.empty()) rc.out = ".";
  return rc;
}

fs::path out_dir(const Context& ctx) { return ctx.g.out.empty() ? fs::path(".") : fs::path(ctx.g.out); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw DataError("failed writing '" + path.string() + "'");
}

template <class F>
void write_stream(const fs::path& path, F&& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  body(f);
  if (!f) throw DataError("failed writing '" + path.string() + "'");
}

// -- simulate -------------------------------------------------------------------

struct SimulateArgs {
  std::string input;
  std::size_t synthetic = 0;
  std::size_t size = 64;
  std::string pattern = "hybridevs";
  std::uint16_t white_level = kDefaultWhiteLevel;
};

int cmd_simulate(const Context& ctx, const SimulateArgs& a) {
  if (a.input.empty() == (a.synthetic == 0)) {
    throw ConfigError("simulate needs exactly one of --input DIR or --synthetic N");
  }
  const auto pattern = pattern_from_id(a.pattern);
  const fs::path root = out_dir(ctx);
  fs::create_directories(root / "raw");
  fs::create_directories(root / "gt");

  std::vector<std::string> rows;
  const auto emit = [&](const std::string& stem, const RgbImage& gt) {
    const RawImage raw = mosaic(gt, pattern, a.white_level);
    write_hevs(raw, root / "raw" / (stem + ".hevs"));
    rows.push_back("raw/" + stem + ".hevs\tgt/" + stem + ".png");
    ctx.log("simulated " + stem);
  };

  if (a.synthetic != 0) {
    const std::uint64_t seed = ctx.g.seed.value_or(0);
    const auto data = synthetic::make_dataset(a.synthetic, a.size, a.size, seed, pattern);
    for (const auto& s : data) {
      const fs::path gt_path = root / "gt" / (s.id + ".png");
      write_png(gt_path, s.gt, 16);
      emit(s.id, read_png(gt_path));  // mosaic what was actually stored
    }
  } else {
    if (!fs::is_directory(a.input)) throw DataError("input '" + a.input + "' is not a directory");
    std::vector<fs::path> inputs;
    for (const auto& e : fs::directory_iterator(a.input)) {
      auto ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (e.is_regular_file() && ext == ".png") inputs.push_back(e.path());
    }
    std::sort(inputs.begin(), inputs.end());
    if (inputs.empty()) throw DataError("no inputs: '" + a.input + "' contains no PNG files");
    for (const auto& p : inputs) {
      try {
        const RgbImage gt = read_png(p);
        if (gt.width % pattern.tile_w != 0 || gt.height % pattern.tile_h != 0) {
          throw DimensionError(std::to_string(gt.width) + "x" + std::to_string(gt.height) +
                               " is not a multiple of the " + std::to_string(pattern.tile_h) + "x" +
                               std::to_string(pattern.tile_w) + " tile");
        }
        const std::string stem = p.stem().string();
        fs::copy_file(p, root / "gt" / (stem + ".png"), fs::copy_options::overwrite_existing);
        emit(stem, gt);
      } catch (const Error& e) {
        ctx.warn("skipping '" + p.string() + "': " + e.what());
      }
    }
    if (rows.empty()) throw DataError("all " + std::to_string(inputs.size()) + " inputs failed");
  }

  std::string manifest;
  for (const auto& r : rows) manifest += r + "\n";
  write_text(root / "manifest.tsv", manifest);
  ctx.out << "wrote " << rows.size() << " pairs to " << (root / "manifest.tsv").string() << '\n';
  return kOk;
}

// -- train ----------------------------------------------------------------------

struct TrainArgs {
  std::string dataset;
  std::string resume;
};

int cmd_train(const Context& ctx, const TrainArgs& a) {
  RunConfig rc = run_config(ctx);
  if (!a.dataset.empty()) rc.dataset = a.dataset;
  if (rc.dataset.empty()) throw ConfigError("no dataset: set \"dataset\" in the config or pass --dataset");
  const auto dataset = train::load_dataset(rc.dataset);
  const fs::path root = rc.out;
  fs::create_directories(root / "checkpoints");
  write_text(root / "config.json", dump_run_config(rc) + "\n");

  std::optional<train::TrainState> resume;
  train::TrainHistory history;
  if (!a.resume.empty()) {
    const Checkpoint ckpt = load_checkpoint(a.resume);
    resume = train::from_checkpoint(ckpt, rc.model);
    std::ifstream prev(root / "history.csv");
    if (prev) {
      for (const auto& r : train::read_history_csv(prev).steps) {
        if (r.step < resume->global_step) history.steps.push_back(r);
      }
    }
    ctx.log("resuming at step " + std::to_string(resume->global_step));
  }

  // Paths stay out of the checkpoint so identical runs give identical bytes.
  RunConfig portable = rc;
  portable.dataset.clear();
  portable.out.clear();
  const std::string config_text = dump_run_config(portable);
  const auto save = [&](const train::TrainState& state, const fs::path& path) {
    Checkpoint ckpt = train::to_checkpoint(state, rc.model);
    ckpt.meta["run_config"] = config_text;
    save_checkpoint(path, ckpt);
  };
  train::Hooks hooks;
  hooks.on_step = [&](const train::StepRecord& r) {
    if (ctx.g.verbose && r.step % 50 == 0) {
      char line[128];
      std::snprintf(line, sizeof line, "step %zu stage %d lr %.3e loss %.6f |g| %.4f", r.step, r.stage, r.lr, r.loss,
                    r.grad_norm);
      ctx.err << line << '\n';
    }
  };
  hooks.on_checkpoint = [&](const train::TrainState& state) {
    char name[64];
    std::snprintf(name, sizeof name, "step_%08zu.ckpt", state.global_step);
    save(state, root / "checkpoints" / name);
  };

  const auto write_history = [&](const train::TrainHistory& h) {
    write_stream(root / "history.csv", [&](std::ostream& f) { train::write_history_csv(f, h); });
    if (!h.epochs.empty()) {
      write_stream(root / "epochs.csv", [&](std::ostream& f) {
        f << "stage,epoch,psnr,ssim\n";
        for (const auto& e : h.epochs) {
          f << e.stage << ',' << e.epoch << ',' << metrics::format_metric(e.psnr, 6) << ','
            << metrics::format_metric(e.ssim, 6) << '\n';
        }
      });
    }
  };

  train::TwoStageResult result;
  try {
    result = train::two_stage_train(rc.model, dataset, rc.train, resume ? &*resume : nullptr, hooks);
  } catch (const train::TrainingAborted& e) {
    history.append(e.history());
    write_history(history);
    throw;
  }
  history.append(result.history);
  write_history(history);

  train::TrainState stage1;
  stage1.params = result.stage1_params;
  stage1.global_step = rc.train.stage1_epochs * dataset.size();
  save(stage1, root / "stage1.ckpt");
  save(result.state, root / "final.ckpt");
  ctx.out << "trained " << result.history.steps.size() << " steps; final checkpoint "
          << (root / "final.ckpt").string() << '\n';
  return kOk;
}

// -- eval -----------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::string predictions;
  bool baseline = false;
  std::size_t bins = 64;
};

int cmd_eval(const Context& ctx, const EvalArgs& a) {
  if (a.checkpoint.empty() == a.predictions.empty()) {
    throw ConfigError("eval needs exactly one of --checkpoint FILE or --predictions DIR");
  }
  std::string dataset_path = a.dataset;
  if (dataset_path.empty() && !ctx.g.config.empty()) dataset_path = run_config(ctx).dataset.string();
  if (dataset_path.empty()) throw ConfigError("no dataset: pass --dataset or set it in the config");
  const auto dataset = train::load_dataset(dataset_path);

  std::optional<Checkpoint> ckpt;
  if (!a.checkpoint.empty()) {
    ckpt = load_checkpoint(a.checkpoint);
    if (!ctx.g.config.empty()) check_compatible(*ckpt, run_config(ctx).model);
    check_compatible(*ckpt, ckpt->config);
  }

  const fs::path root = out_dir(ctx);
  for (const char* d : {"recon", "diff", "hist"}) fs::create_directories(root / d);
  if (a.baseline) fs::create_directories(root / "baseline");

  metrics::MetricsReport report;
  for (const auto& s : dataset) {
    RgbImage pred;
    if (ckpt) {
      pred = train::reconstruct_image(ckpt->params, ckpt->config, s.raw);
      write_png(root / "recon" / (s.id + ".png"), pred, 16);
    } else {
      pred = read_png(fs::path(a.predictions) / (s.id + ".png"));
    }
    metrics::ImageMetrics m;
    m.id = s.id;
    m.psnr = metrics::psnr(pred, s.gt);
    m.ssim = metrics::ssim(pred, s.gt);
    const auto dm = metrics::difference_map(pred, s.gt, a.bins);
    m.difference_map = root / "diff" / (s.id + ".png");
    m.histogram_csv = root / "hist" / (s.id + ".csv");
    write_png_gray8(m.difference_map, dm.image);
    write_stream(m.histogram_csv, [&](std::ostream& f) { metrics::write_histogram_csv(f, dm.histogram); });
    write_png(root / "hist" / (s.id + ".png"), plot::histogram_plot(dm.histogram));
    if (a.baseline) {
      const RgbImage base = bilinear_demosaic(s.raw);
      write_png(root / "baseline" / (s.id + ".png"), base, 16);
      m.has_baseline = true;
      m.baseline_psnr = metrics::psnr(base, s.gt);
      m.baseline_ssim = metrics::ssim(base, s.gt);
    }
    ctx.log(s.id + ": psnr " + metrics::format_metric(m.psnr, 4) + " ssim " + metrics::format_metric(m.ssim, 4));
    report.images.push_back(std::move(m));
  }
  write_stream(root / "metrics.csv", [&](std::ostream& f) { metrics::write_report_csv(f, report); });
  ctx.out << "images " << report.images.size() << "  mean psnr " << metrics::format_metric(report.mean_psnr(), 4)
          << "  mean ssim " << metrics::format_metric(report.mean_ssim(), 4);
  if (report.has_baseline()) {
    ctx.out << "  baseline psnr " << metrics::format_metric(report.mean_baseline_psnr(), 4) << "  baseline ssim "
            << metrics::format_metric(report.mean_baseline_ssim(), 4);
  }
  ctx.out << '\n';
  return kOk;
}

// -- losscurves -----------------------------------------------------------------

struct CurveArgs {
  std::vector<std::string> losses;
  std::size_t samples = 101;
  std::size_t zoom_samples = 101;
};

int cmd_losscurves(const Context& ctx, const CurveArgs& a) {
  std::vector<std::string> names = a.losses;
  if (names.empty()) names = {"charbonnier", "pixel_focus_power", "pixel_focus_exp:lambda=1.1"};
  std::vector<loss::LossSpec> specs;
  for (const auto& n : names) {
    specs.push_back(parse_loss_spec(n));
    loss::validate(specs.back());
  }
  const fs::path root = out_dir(ctx);
  fs::create_directories(root);

  std::vector<plot::Series> value_full, grad_full, value_zoom, grad_zoom;
  std::ostringstream csv;
  csv.precision(17);
  csv << "curve,range,d,value,gradient\n";
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto color = plot::palette()[i % plot::palette().size()];
    const std::string id = loss::describe(specs[i]);
    for (const bool zoom : {false, true}) {
      const auto rows = zoom ? loss::loss_curve_samples(specs[i], a.zoom_samples, 0.0, 0.1)
                             : loss::loss_curve_samples(specs[i], a.samples);
      plot::Series v{{}, {}, color}, g{{}, {}, color};
      for (const auto& r : rows) {
        csv << id << ',' << (zoom ? "zoom" : "full") << ',' << r.d << ',' << r.value << ',' << r.gradient << '\n';
        v.x.push_back(r.d);
        v.y.push_back(r.value);
        g.x.push_back(r.d);
        g.y.push_back(r.gradient);
      }
      (zoom ? value_zoom : value_full).push_back(std::move(v));
      (zoom ? grad_zoom : grad_full).push_back(std::move(g));
    }
  }
  write_text(root / "loss_curves.csv", csv.str());
  write_png(root / "loss_curves.png",
            plot::hstack({plot::line_plot(value_full, 400, 300), plot::line_plot(grad_full, 400, 300),
                          plot::line_plot(value_zoom, 400, 300), plot::line_plot(grad_zoom, 400, 300)}));
  ctx.out << "wrote " << specs.size() << " curves to " << (root / "loss_curves.csv").string() << '\n';
  return kOk;
}

// -- gradcheck ------------------------------------------------------------------

struct GradArgs {
  double threshold = 1e-4;
  double eps = 1e-5;
  std::size_t coords_per_param = 3;
};

int cmd_gradcheck(const Context& ctx, const GradArgs& a) {
  if (!(a.threshold > 0.0)) throw ParameterError("--threshold must be > 0");
  verify::SuiteOptions opt;
  if (!ctx.g.config.empty()) opt.model = run_config(ctx).model;
  opt.seed = ctx.g.seed.value_or(0);
  opt.eps = a.eps;
  opt.threshold = a.threshold;
  opt.coords_per_param = a.coords_per_param;
  std::size_t failed = 0, total = 0;
  verify::run_gradcheck_suite(opt, [&](const verify::CheckItem& item) {
    char line[160];
    std::snprintf(line, sizeof line, "%-24s max_rel_err %.3e  coords %6zu  %s", item.name.c_str(), item.max_rel_error,
                  item.coords, item.passed ? "PASS" : "FAIL");
    ctx.out << line << '\n';
    ++total;
    if (!item.passed) ++failed;
  });
  ctx.out << (total - failed) << "/" << total << " checks below " << a.threshold << '\n';
  return failed == 0 ? kOk : kNumeric;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Event-aware demosaicing: simulate data, train, evaluate and verify.", "evd"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--seed", g.seed, "Seed override for data synthesis, init and training");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("-v,--verbose", g.verbose, "Progress on stderr");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Mosaic RGB images into .hevs RAW files plus a manifest");
  simulate->add_option("--input", sim.input, "Directory of ground-truth PNGs");
  simulate->add_option("--synthetic", sim.synthetic, "Generate N synthetic scenes instead");
  simulate->add_option("--size", sim.size, "Side of synthetic scenes")->capture_default_str();
  simulate->add_option("--pattern", sim.pattern, "CFA pattern id or inline layout")->capture_default_str();
  simulate->add_option("--white-level", sim.white_level, "RAW white level")->capture_default_str();

  TrainArgs tr;
  auto* trainc = app.add_subcommand("train", "Two-stage training");
  trainc->add_option("--dataset", tr.dataset, "Manifest overriding the config");
  trainc->add_option("--resume", tr.resume, "Checkpoint to continue from");

  EvalArgs ev;
  auto* evalc = app.add_subcommand("eval", "PSNR/SSIM, reconstructions and difference maps");
  evalc->add_option("--checkpoint", ev.checkpoint, "Model checkpoint");
  evalc->add_option("--predictions", ev.predictions, "Directory of <id>.png predictions instead of a model");
  evalc->add_option("--dataset", ev.dataset, "Manifest of RAW/ground-truth pairs");
  evalc->add_flag("--baseline", ev.baseline, "Also score the classical interpolation baseline");
  evalc->add_option("--bins", ev.bins, "Difference histogram bins")->capture_default_str();

  CurveArgs cu;
  auto* curves = app.add_subcommand("losscurves", "Loss and gradient curves over d in [0,1] and [0,0.1]");
  curves->add_option("--loss", cu.losses, "Loss spec, e.g. charbonnier:eps=1e-3 or pf_exp:lambda=1.1 (repeatable)");
  curves->add_option("--samples", cu.samples, "Samples on [0,1]")->capture_default_str();
  curves->add_option("--zoom-samples", cu.zoom_samples, "Samples on [0,0.1]")->capture_default_str();

  GradArgs gr;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference verification of every gradient");
  grad->add_option("--threshold", gr.threshold, "Maximum relative error")->capture_default_str();
  grad->add_option("--eps", gr.eps, "Central-difference step")->capture_default_str();
  grad->add_option("--coords-per-param", gr.coords_per_param, "Sampled coordinates per parameter tensor")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (app.exit(e, out, err) == 0) return kOk;
    err << '\n' << app.help();
    return kUsage;
  }

  const Context ctx{g, out, err};
  try {
    if (*simulate) return cmd_simulate(ctx, sim);
    if (*trainc) return cmd_train(ctx, tr);
    if (*evalc) return cmd_eval(ctx, ev);
    if (*curves) return cmd_losscurves(ctx, cu);
    if (*grad) return cmd_gradcheck(ctx, gr);
  } catch (const CodecError& e) {
    err << "error (codec): " << e.what() << '\n';
    return kData;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error (io): " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}

}  // namespace evd::cli

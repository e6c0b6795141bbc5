#include "poselift/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "poselift/checkpoint.hpp"
#include "poselift/dataset_io.hpp"
#include "poselift/errors.hpp"
#include "poselift/eval.hpp"
#include "poselift/report.hpp"
#include "poselift/run_config.hpp"

namespace poselift::cli {

namespace fs = std::filesystem;

namespace {

// Flag values are applied on top of the config file once it has been loaded.
class Overrides {
 public:
  template <typename T, typename Setter>
  CLI::Option* option(CLI::App* app, const std::string& name, const std::string& help,
                      Setter setter) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, help);
    appliers_.push_back([opt, value, setter](RunConfig& c) {
      if (opt->count() > 0) setter(c, *value);
    });
    return opt;
  }

  template <typename Setter>
  CLI::Option* flag(CLI::App* app, const std::string& name, const std::string& help,
                    Setter setter) {
    auto value = std::make_shared<bool>(false);
    CLI::Option* opt = app->add_flag(name, *value, help);
    appliers_.push_back([opt, value, setter](RunConfig& c) {
      if (opt->count() > 0) setter(c, *value);
    });
    return opt;
  }

  void apply(RunConfig& c) const {
    for (const auto& f : appliers_) f(c);
  }

 private:
  std::vector<std::function<void(RunConfig&)>> appliers_;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::string config_path;
  RunConfig config;
  std::string hash;
};

void add_network_flags(CLI::App* app, Overrides& ov, bool with_shape) {
  if (with_shape) {
    ov.option<int>(app, "--width", "units per hidden layer",
                   [](RunConfig& c, int v) { c.network.width = v; });
    ov.option<int>(app, "--blocks", "residual blocks",
                   [](RunConfig& c, int v) { c.network.blocks = v; });
  }
  ov.option<double>(app, "--dropout", "dropout rate",
                    [](RunConfig& c, double v) { c.network.dropout_rate = v; });
  ov.flag(app, "--batchnorm,!--no-batchnorm", "batch normalization",
          [](RunConfig& c, bool v) { c.network.use_batchnorm = v; });
  ov.flag(app, "--residual,!--no-residual", "residual connections",
          [](RunConfig& c, bool v) { c.network.use_residual = v; });
  ov.flag(app, "--maxnorm,!--no-maxnorm", "max-norm weight constraint",
          [](RunConfig& c, bool v) { c.network.use_maxnorm = v; });
  ov.option<double>(app, "--maxnorm-c", "max-norm radius",
                    [](RunConfig& c, double v) { c.network.maxnorm_c = v; });
}

void add_training_flags(CLI::App* app, Overrides& ov) {
  ov.option<int>(app, "--epochs", "training epochs",
                 [](RunConfig& c, int v) { c.training.epochs = v; });
  ov.option<int>(app, "--batch-size", "minibatch size",
                 [](RunConfig& c, int v) { c.training.batch_size = v; });
  ov.option<double>(app, "--lr", "initial learning rate",
                    [](RunConfig& c, double v) { c.training.learning_rate = v; });
  ov.option<double>(app, "--lr-decay", "per-epoch learning rate factor",
                    [](RunConfig& c, double v) { c.training.lr_decay = v; });
  ov.option<std::string>(app, "--optimizer", "adam or sgd", [](RunConfig& c, std::string v) {
    c.training.optimizer = optimizer_from_string(v);
  });
  ov.option<std::uint64_t>(app, "--seed", "initialization, shuffling and dropout seed",
                           [](RunConfig& c, std::uint64_t v) { c.training.seed = v; });
}

void add_common_flags(CLI::App* app, Overrides& ov, std::string& config_path) {
  app->add_option("--config", config_path,
                  std::string("JSON config file (default: $") + kConfigEnvVar + ")");
  ov.option<std::string>(app, "--mpjpe-joints", "all_joints or non_root",
                         [](RunConfig& c, std::string v) {
                           c.eval.averaging = joint_averaging_from_string(v);
                           c.training.averaging = c.eval.averaging;
                         });
  ov.option<int>(app, "--workers", "parallel training runs",
                 [](RunConfig& c, int v) { c.eval.workers = v; });
  ov.flag(app, "--include-root", "keep the root joint in network vectors",
          [](RunConfig& c, bool v) { c.include_root = v; });
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << text;
  if (!f.flush()) throw IoError("write failed for '" + path.string() + "'");
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// The dataset joints must be exactly the configured skeleton's joints.
SkeletonSpec dataset_skeleton(const DatasetFile& file, const RunConfig& config) {
  const SkeletonSpec want = config.skeleton();
  if (file.skeleton.joint_names != want.joint_names ||
      file.skeleton.root_index != want.root_index) {
    throw InvalidInput("dataset skeleton does not match the configured skeleton");
  }
  return want;
}

TrainingData load_training_data(const fs::path& dataset, const RunConfig& config) {
  const DatasetFile file = read_dataset(dataset);
  const SkeletonSpec spec = dataset_skeleton(file, config);
  PairedDataset train = make_paired(file.samples, Split::train, spec);
  PairedDataset val = make_paired(file.samples, Split::val, spec);
  return make_training_data(spec, std::move(train), std::move(val));
}

int cmd_synth(Context& ctx, const fs::path& out_path) {
  const auto tmpl = SkeletonTemplate::human36m();
  DatasetFile file;
  file.skeleton = tmpl.spec;
  file.image_width = ctx.config.synth.image_width;
  file.image_height = ctx.config.synth.image_height;
  file.config_hash = ctx.hash;
  file.samples = make_dataset(tmpl, ctx.config.synth);
  write_dataset(out_path, file);
  const SplitSizes sizes = split_sizes(ctx.config.synth.samples);
  ctx.out << "wrote " << out_path.string() << " (config " << ctx.hash << ")\n"
          << "train " << sizes.train << "\nval " << sizes.val << "\ntest " << sizes.test << "\n";
  return kExitOk;
}

int cmd_train(Context& ctx, const fs::path& dataset, const fs::path& out_dir,
              std::string checkpoint_path) {
  const RunConfig& cfg = ctx.config;
  const TrainingData data = load_training_data(dataset, cfg);
  Checkpoint ckpt;
  ckpt.skeleton = data.skeleton;
  ckpt.network = init_network(data.skeleton, cfg.network, cfg.training.seed);
  ckpt.input_stats = data.input_stats;
  ckpt.output_stats = data.output_stats;
  ckpt.config_hash = ctx.hash;

  const TrainingLog log = train(ckpt.network, data, cfg.training);
  const fs::path log_path =
      out_dir / report_filename("train_log", ctx.hash, cfg.training.seed, "csv");
  write_text(log_path, training_log_csv(log, ctx.hash));
  ctx.out << "log " << log_path.string() << "\n";
  if (log.diverged()) {
    ctx.err << "error: non-finite loss at epoch " << log.epochs.back().epoch << "\n";
    return kExitNumerical;
  }
  const fs::path ckpt_path = checkpoint_path.empty()
                                 ? out_dir / report_filename("model", ctx.hash,
                                                             cfg.training.seed, "ckpt")
                                 : fs::path(checkpoint_path);
  write_checkpoint(ckpt_path, ckpt);
  ctx.out << "checkpoint " << ckpt_path.string() << "\n";
  const EpochRecord* last =
      !log.epochs.empty() ? &log.epochs.back() : (log.initial ? &*log.initial : nullptr);
  if (last != nullptr) {
    ctx.out << "epochs " << log.epochs.size() << " train_loss " << fixed(last->train_loss, 6)
            << " train_mpjpe " << fixed(last->train_mpjpe) << " val_mpjpe "
            << fixed(last->val_mpjpe) << "\n";
  } else {
    ctx.out << "epochs 0\n";
  }
  return kExitOk;
}

int cmd_eval(Context& ctx, const fs::path& checkpoint, const fs::path& dataset,
             const std::string& split_name, const fs::path& out_dir, bool cr,
             const std::string& stage_name) {
  const RunConfig& cfg = ctx.config;
  const Split split = split_from_string(split_name);
  const Checkpoint model = read_checkpoint(checkpoint);
  const DatasetFile file = read_dataset(dataset);
  if (file.skeleton.joint_names != model.skeleton.joint_names ||
      file.skeleton.root_index != model.skeleton.root_index) {
    throw InvalidInput("checkpoint skeleton does not match the dataset skeleton");
  }
  TrainingData frame;
  frame.skeleton = model.skeleton;
  frame.input_stats = model.input_stats;
  frame.output_stats = model.output_stats;
  const PairedDataset paired = make_paired(file.samples, split, model.skeleton);
  if (paired.size() == 0) throw InvalidInput("split '" + split_name + "' is empty");
  const SplitScore score = score_split(model.network, paired, frame, cfg.eval.averaging);

  std::ostringstream csv;
  csv << "# poselift eval config=" << ctx.hash << " mpjpe_joints=" << to_string(cfg.eval.averaging)
      << " checkpoint=" << model.config_hash << "\n";
  csv << "split,samples,mpjpe";
  if (cr) csv << ",mpjpe_cr,mpjpe_no_cr,mpjpe_direct";
  csv << "\n" << split_name << "," << paired.size() << "," << format_real(score.mpjpe);
  ctx.out << "split " << split_name << " samples " << paired.size() << " mpjpe "
          << format_real(score.mpjpe) << "\n";
  if (cr) {
    std::vector<Sample> chosen;
    for (const auto& s : file.samples) {
      if (s.split == split) chosen.push_back(s);
    }
    PoseStage2D stage;
    if (stage_name == "identity") {
      stage = identity_stage();
    } else if (stage_name == "heatmap") {
      stage = heatmap_detector_stage(cfg.eval.crop_size, cfg.eval.detector_grid,
                                     cfg.eval.detector_noise, cfg.eval.detector_blob_sigma,
                                     cfg.training.seed);
    } else {
      throw InvalidInput("unknown 2D stage '" + stage_name + "' (identity, heatmap)");
    }
    const CrToggleResult r =
        evaluate_with_cr_toggle(chosen, model, file.image_width, file.image_height, stage,
                                CropOptions{cfg.eval.crop_margin, cfg.eval.crop_size},
                                cfg.eval.averaging);
    csv << "," << format_real(r.mpjpe_with_cr) << "," << format_real(r.mpjpe_without_cr) << ","
        << format_real(r.mpjpe_direct);
    ctx.out << "stage " << stage_name << " with_cr " << fixed(r.mpjpe_with_cr) << " without_cr "
            << fixed(r.mpjpe_without_cr) << " direct " << fixed(r.mpjpe_direct) << "\n";
  }
  csv << "\n";
  const fs::path report =
      out_dir / report_filename("eval_" + split_name, ctx.hash, cfg.training.seed, "csv");
  write_text(report, csv.str());
  ctx.out << "report " << report.string() << "\n";
  return kExitOk;
}

int cmd_ablate(Context& ctx, const fs::path& dataset, const fs::path& out_dir) {
  const RunConfig& cfg = ctx.config;
  const TrainingData data = load_training_data(dataset, cfg);
  const AblationReport report =
      run_ablation(data, cfg.network_for_skeleton(), cfg.training, cfg.eval.workers);
  const auto seed = cfg.training.seed;
  const fs::path csv = out_dir / report_filename("ablation", ctx.hash, seed, "csv");
  const fs::path txt = out_dir / report_filename("ablation", ctx.hash, seed, "txt");
  write_text(csv, ablation_csv(report, ctx.hash));
  write_text(txt, "# config " + ctx.hash + "\n" + ablation_text(report));
  ctx.out << ablation_text(report) << "report " << csv.string() << "\n";
  return kExitOk;
}

int cmd_sweep(Context& ctx, const fs::path& dataset, const fs::path& out_dir) {
  const RunConfig& cfg = ctx.config;
  const TrainingData data = load_training_data(dataset, cfg);
  const SweepReport report = capacity_sweep(data, cfg.network_for_skeleton(), cfg.training,
                                            cfg.sweep.blocks, cfg.sweep.widths, cfg.eval.workers);
  const auto seed = cfg.training.seed;
  const fs::path csv = out_dir / report_filename("sweep", ctx.hash, seed, "csv");
  const fs::path txt = out_dir / report_filename("sweep", ctx.hash, seed, "txt");
  write_text(csv, sweep_csv(report, ctx.hash));
  write_text(txt, "# config " + ctx.hash + "\n" + sweep_text(report));
  ctx.out << sweep_text(report) << "report " << csv.string() << "\n";
  return kExitOk;
}

int cmd_gradcheck(Context& ctx, bool all_flags, int batch, double eps, double tolerance) {
  const RunConfig& cfg = ctx.config;
  if (batch < 1) throw InvalidInput("--batch must be >= 1");
  const NetworkConfig base = cfg.network_for_skeleton();
  std::vector<NetworkConfig> configs;
  if (all_flags) {
    for (int i = 0; i < 8; ++i) {
      NetworkConfig n = base;
      n.use_maxnorm = (i & 4) != 0;
      n.use_batchnorm = (i & 2) != 0;
      n.use_residual = (i & 1) != 0;
      configs.push_back(n);
    }
  } else {
    configs.push_back(base);
  }
  Rng rng(cfg.training.seed);
  std::normal_distribution<double> normal;
  Matrix x(batch, base.input_dim);
  Matrix y(batch, base.output_dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = normal(rng);

  double worst = 0.0;
  ctx.out << "maxnorm,batchnorm,residual,blocks,width,max_rel_error\n";
  for (const auto& n : configs) {
    if (n.use_batchnorm && batch < 2) {
      throw InvalidInput("batch normalization needs --batch >= 2");
    }
    const LiftingNetwork net = make_grad_check_network(n, cfg.training.seed);
    const double e = grad_check(net, x, y, eps, cfg.training.seed);
    worst = std::max(worst, std::isnan(e) ? INFINITY : e);
    ctx.out << n.use_maxnorm << "," << n.use_batchnorm << "," << n.use_residual << ","
            << n.blocks << "," << n.width << "," << format_real(e) << "\n";
  }
  ctx.out << "max_rel_error " << format_real(worst) << " tolerance " << format_real(tolerance)
          << " config " << ctx.hash << "\n";
  if (!(worst <= tolerance)) {
    ctx.err << "error: gradient check failed\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_predict(Context& ctx, const fs::path& checkpoint, const fs::path& input,
                const fs::path& output) {
  const Checkpoint model = read_checkpoint(checkpoint);
  const PoseFile2D in = read_poses2d(input);
  if (in.joint_names != model.skeleton.joint_names) {
    throw InvalidInput("pose file joints do not match the checkpoint skeleton");
  }
  PoseFile3D out;
  out.joint_names = in.joint_names;
  out.ids = in.ids;
  out.poses = lift_poses(model, in.poses);
  write_poses3d(output, out);
  ctx.out << "wrote " << out.poses.size() << " poses to " << output.string() << "\n";
  return kExitOk;
}

void load_config(Context& ctx, const Overrides& ov) {
  std::string path = ctx.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv(kConfigEnvVar); env != nullptr && *env != '\0') path = env;
  }
  RunConfig cfg = path.empty() ? RunConfig{} : load_run_config(path);
  ov.apply(cfg);
  cfg.validate();
  ctx.config = cfg;
  ctx.hash = run_config_hash(cfg);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"poselift: 2D-to-3D human pose lifting experiments"};
  app.require_subcommand(1);
  Context ctx{out, err, {}, {}, {}};
  std::function<int()> action;

  // synth
  Overrides synth_ov;
  auto* synth = app.add_subcommand("synth", "generate a synthetic paired dataset");
  std::string synth_out = "dataset.csv";
  add_common_flags(synth, synth_ov, ctx.config_path);
  synth->add_option("--out", synth_out, "dataset file to write");
  synth_ov.option<int>(synth, "--samples", "number of samples",
                       [](RunConfig& c, int v) { c.synth.samples = v; });
  synth_ov.option<std::uint64_t>(synth, "--seed", "generator seed",
                                 [](RunConfig& c, std::uint64_t v) { c.synth.seed = v; });
  synth_ov.option<double>(synth, "--noise", "2D noise sigma in pixels",
                          [](RunConfig& c, double v) { c.synth.noise_sigma = v; });
  synth_ov.option<int>(synth, "--cameras", "camera pool size",
                       [](RunConfig& c, int v) { c.synth.cameras = v; });
  synth->callback([&] {
    action = [&] {
      load_config(ctx, synth_ov);
      return cmd_synth(ctx, synth_out);
    };
  });

  // train
  Overrides train_ov;
  auto* train_cmd = app.add_subcommand("train", "train a lifting network");
  std::string train_data, train_dir = ".", train_ckpt;
  add_common_flags(train_cmd, train_ov, ctx.config_path);
  train_cmd->add_option("--dataset", train_data, "dataset file")->required();
  train_cmd->add_option("--out-dir", train_dir, "directory for the checkpoint and log");
  train_cmd->add_option("--checkpoint", train_ckpt, "explicit checkpoint path");
  add_network_flags(train_cmd, train_ov, true);
  add_training_flags(train_cmd, train_ov);
  train_cmd->callback([&] {
    action = [&] {
      load_config(ctx, train_ov);
      return cmd_train(ctx, train_data, train_dir, train_ckpt);
    };
  });

  // eval
  Overrides eval_ov;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a dataset split");
  std::string eval_ckpt, eval_data, eval_split = "val", eval_dir = ".", eval_stage = "heatmap";
  bool eval_cr = false;
  add_common_flags(eval_cmd, eval_ov, ctx.config_path);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--dataset", eval_data, "dataset file")->required();
  eval_cmd->add_option("--split", eval_split, "train, val or test");
  eval_cmd->add_option("--out-dir", eval_dir, "directory for the report");
  eval_cmd->add_flag("--cr", eval_cr, "also compare crop-and-resize against whole-image input");
  eval_cmd->add_option("--stage", eval_stage, "2D stage for --cr: heatmap or identity");
  eval_ov.option<double>(eval_cmd, "--detector-noise", "detector jitter in pixels",
                         [](RunConfig& c, double v) { c.eval.detector_noise = v; });
  eval_ov.option<double>(eval_cmd, "--crop-margin", "crop margin as a fraction of the box side",
                         [](RunConfig& c, double v) { c.eval.crop_margin = v; });
  eval_cmd->callback([&] {
    action = [&] {
      load_config(ctx, eval_ov);
      return cmd_eval(ctx, eval_ckpt, eval_data, eval_split, eval_dir, eval_cr, eval_stage);
    };
  });

  // ablate
  Overrides ablate_ov;
  auto* ablate = app.add_subcommand("ablate", "train all eight flag combinations");
  std::string ablate_data, ablate_dir = ".";
  add_common_flags(ablate, ablate_ov, ctx.config_path);
  ablate->add_option("--dataset", ablate_data, "dataset file")->required();
  ablate->add_option("--out-dir", ablate_dir, "directory for the reports");
  ablate_ov.option<int>(ablate, "--width", "units per hidden layer",
                        [](RunConfig& c, int v) { c.network.width = v; });
  ablate_ov.option<int>(ablate, "--blocks", "residual blocks",
                        [](RunConfig& c, int v) { c.network.blocks = v; });
  ablate_ov.option<double>(ablate, "--dropout", "dropout rate",
                           [](RunConfig& c, double v) { c.network.dropout_rate = v; });
  add_training_flags(ablate, ablate_ov);
  ablate->callback([&] {
    action = [&] {
      load_config(ctx, ablate_ov);
      return cmd_ablate(ctx, ablate_data, ablate_dir);
    };
  });

  // sweep
  Overrides sweep_ov;
  auto* sweep = app.add_subcommand("sweep", "validation error over blocks x widths");
  std::string sweep_data, sweep_dir = ".";
  add_common_flags(sweep, sweep_ov, ctx.config_path);
  sweep->add_option("--dataset", sweep_data, "dataset file")->required();
  sweep->add_option("--out-dir", sweep_dir, "directory for the reports");
  sweep_ov.option<std::vector<int>>(sweep, "--blocks", "comma-separated block counts",
                                    [](RunConfig& c, std::vector<int> v) { c.sweep.blocks = v; })
      ->delimiter(',');
  sweep_ov.option<std::vector<int>>(sweep, "--widths", "comma-separated widths",
                                    [](RunConfig& c, std::vector<int> v) { c.sweep.widths = v; })
      ->delimiter(',');
  add_network_flags(sweep, sweep_ov, false);
  add_training_flags(sweep, sweep_ov);
  sweep->callback([&] {
    action = [&] {
      load_config(ctx, sweep_ov);
      return cmd_sweep(ctx, sweep_data, sweep_dir);
    };
  });

  // gradcheck
  Overrides grad_ov;
  auto* grad = app.add_subcommand("gradcheck", "compare backprop with finite differences");
  bool all_flags = false;
  int grad_batch = 4;
  double grad_eps = 1e-5, grad_tol = 1e-4;
  add_common_flags(grad, grad_ov, ctx.config_path);
  grad->add_flag("--all-flags", all_flags, "check all eight flag combinations");
  grad->add_option("--batch", grad_batch, "samples in the probe batch");
  grad->add_option("--eps", grad_eps, "finite-difference step");
  grad->add_option("--tolerance", grad_tol, "largest accepted relative error");
  add_network_flags(grad, grad_ov, true);
  grad_ov.option<std::uint64_t>(grad, "--seed", "network and data seed",
                                [](RunConfig& c, std::uint64_t v) { c.training.seed = v; });
  grad->callback([&] {
    action = [&] {
      load_config(ctx, grad_ov);
      return cmd_gradcheck(ctx, all_flags, grad_batch, grad_eps, grad_tol);
    };
  });

  // predict
  Overrides pred_ov;
  auto* pred = app.add_subcommand("predict", "lift a file of 2D poses to 3D");
  std::string pred_ckpt, pred_in, pred_out;
  add_common_flags(pred, pred_ov, ctx.config_path);
  pred->add_option("--checkpoint", pred_ckpt, "checkpoint file")->required();
  pred->add_option("--input", pred_in, "2D pose file")->required();
  pred->add_option("--out", pred_out, "3D pose file to write")->required();
  pred->callback([&] {
    action = [&] {
      load_config(ctx, pred_ov);
      return cmd_predict(ctx, pred_ckpt, pred_in, pred_out);
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    return action();
  } catch (const NumericalFailure& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DegenerateGeometry& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "unexpected error: " << e.what() << "\n";
    return kExitUnexpected;
  }
}

}  // namespace poselift::cli

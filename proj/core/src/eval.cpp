#include "poselift/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

#include "poselift/errors.hpp"

namespace poselift {
namespace {

// Runs fn(0..n-1) on up to `workers` threads. Each index owns its output
// slot, so scheduling order never shows up in the results.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  const auto threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

struct RunOutcome {
  double val_mpjpe;
  bool diverged;
  int epochs_run;
};

RunOutcome train_and_score(const TrainingData& data, const NetworkConfig& cfg,
                           const TrainingConfig& config) {
  LiftingNetwork net = init_network(cfg, config.seed);
  const TrainingLog log = train(net, data, config);
  if (log.diverged()) {
    return {std::numeric_limits<double>::quiet_NaN(), true, static_cast<int>(log.epochs.size())};
  }
  const double score = score_split(net, data.val, data, config.averaging).mpjpe;
  return {score, !std::isfinite(score), static_cast<int>(log.epochs.size())};
}

void check_training_data(const TrainingData& data, const char* what) {
  if (data.train.size() == 0 || data.val.size() == 0) {
    throw InvalidInput(std::string(what) + ": dataset needs non-empty train and val splits");
  }
}

}  // namespace

AblationReport run_ablation(const TrainingData& data, const NetworkConfig& base_net,
                            const TrainingConfig& config, int workers) {
  check_training_data(data, "run_ablation");
  AblationReport report;
  report.averaging = config.averaging;
  report.blocks = base_net.blocks;
  report.width = base_net.width;
  report.seed = config.seed;
  report.rows.resize(8);
  for (std::size_t i = 0; i < 8; ++i) {
    report.rows[i].maxnorm = (i & 4u) != 0;
    report.rows[i].batchnorm = (i & 2u) != 0;
    report.rows[i].residual = (i & 1u) != 0;
  }
  parallel_for(8, workers, [&](std::size_t i) {
    AblationRow& row = report.rows[i];
    NetworkConfig cfg = base_net;
    cfg.use_maxnorm = row.maxnorm;
    cfg.use_batchnorm = row.batchnorm;
    cfg.use_residual = row.residual;
    const RunOutcome out = train_and_score(data, cfg, config);
    row.val_mpjpe = out.val_mpjpe;
    row.diverged = out.diverged;
    row.epochs_run = out.epochs_run;
  });
  return report;
}

SweepReport capacity_sweep(const TrainingData& data, const NetworkConfig& base_net,
                           const TrainingConfig& config, const std::vector<int>& blocks,
                           const std::vector<int>& widths, int workers) {
  if (blocks.empty() || widths.empty()) throw InvalidInput("capacity_sweep: empty grid");
  check_training_data(data, "capacity_sweep");
  SweepReport report;
  report.averaging = config.averaging;
  report.seed = config.seed;
  for (int b : blocks) {
    for (int w : widths) report.cells.push_back({b, w, 0.0, false});
  }
  parallel_for(report.cells.size(), workers, [&](std::size_t i) {
    SweepCell& cell = report.cells[i];
    NetworkConfig cfg = base_net;
    cfg.blocks = cell.blocks;
    cfg.width = cell.width;
    const RunOutcome out = train_and_score(data, cfg, config);
    cell.val_mpjpe = out.val_mpjpe;
    cell.diverged = out.diverged;
  });
  return report;
}

PoseStage2D identity_stage() {
  return [](const Pose2D& p, std::size_t) { return p; };
}

PoseStage2D heatmap_detector_stage(double input_size, int grid_size, double noise_px,
                                   double blob_sigma_cells, std::uint64_t seed) {
  if (!(input_size > 0.0) || grid_size < 1 || !(noise_px >= 0.0) || !(blob_sigma_cells > 0.0)) {
    throw InvalidInput("heatmap_detector_stage: bad parameters");
  }
  return [=](const Pose2D& p, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    Rng rng(seq);
    std::normal_distribution<double> jitter(0.0, noise_px);
    const double cell = input_size / grid_size;
    const auto joints = static_cast<int>(p.joint_count());
    Heatmap hm(joints, grid_size, grid_size);
    const double inv_two_var = 1.0 / (2.0 * blob_sigma_cells * blob_sigma_cells);
    for (int j = 0; j < joints; ++j) {
      // Cell centers sit at (k + 0.5) * cell in input pixels.
      const double gx = (p.joints(j, 0) + (noise_px > 0.0 ? jitter(rng) : 0.0)) / cell - 0.5;
      const double gy = (p.joints(j, 1) + (noise_px > 0.0 ? jitter(rng) : 0.0)) / cell - 0.5;
      for (int row = 0; row < grid_size; ++row) {
        for (int col = 0; col < grid_size; ++col) {
          const double d2 = (col - gx) * (col - gx) + (row - gy) * (row - gy);
          hm.at(j, col, row) = std::exp(-d2 * inv_two_var);
        }
      }
    }
    Pose2D out = decode_heatmap(hm);
    out.joints = ((out.joints.array() + 0.5) * cell).matrix();
    return out;
  };
}

std::vector<Pose3D> lift_poses(const Checkpoint& model, const std::vector<Pose2D>& poses) {
  const SkeletonSpec& spec = model.skeleton;
  Matrix x(static_cast<Eigen::Index>(poses.size()), spec.input_dim());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) =
        to_input_vector(root_center(poses[i], spec), spec).transpose();
  }
  std::vector<Pose3D> out;
  if (poses.empty()) return out;
  const Matrix y =
      denormalize_rows(predict(model.network, normalize_rows(x, model.input_stats)),
                       model.output_stats);
  out.reserve(poses.size());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    out.push_back(from_output_vector(y.row(i).transpose(), spec));
  }
  return out;
}

CrToggleResult evaluate_with_cr_toggle(const std::vector<Sample>& samples,
                                       const Checkpoint& model, double image_width,
                                       double image_height, const PoseStage2D& stage,
                                       const CropOptions& crop, JointAveraging averaging) {
  if (samples.empty()) throw InvalidInput("evaluate_with_cr_toggle: no samples");
  if (!(image_width > 0.0) || !(image_height > 0.0)) {
    throw InvalidInput("evaluate_with_cr_toggle: image size must be positive");
  }
  std::vector<Pose2D> direct, with_cr, without_cr;
  std::vector<Pose3D> gts;
  // The naive path resizes the whole image to out_size x out_size.
  const double sx = crop.out_size / image_width;
  const double sy = crop.out_size / image_height;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (!(s.box.w > 0.0) || !(s.box.h > 0.0)) {
      throw InvalidInput("evaluate_with_cr_toggle: sample " + s.id + " has no detector box");
    }
    const CropTransform t =
        make_square_crop(s.box, crop.margin, image_width, image_height, crop.out_size);
    with_cr.push_back(invert_crop(t, stage(apply_crop(t, s.pose2d), i)));

    Pose2D scaled = s.pose2d;
    scaled.joints.col(0) *= sx;
    scaled.joints.col(1) *= sy;
    Pose2D estimate = stage(scaled, i);
    estimate.joints.col(0) /= sx;
    estimate.joints.col(1) /= sy;
    without_cr.push_back(std::move(estimate));

    direct.push_back(s.pose2d);
    gts.push_back(s.pose3d);
  }
  const SkeletonSpec& spec = model.skeleton;
  return {mpjpe(lift_poses(model, with_cr), gts, spec, averaging),
          mpjpe(lift_poses(model, without_cr), gts, spec, averaging),
          mpjpe(lift_poses(model, direct), gts, spec, averaging)};
}

}  // namespace poselift

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "poselift/checkpoint.hpp"
#include "poselift/geometry.hpp"
#include "poselift/metrics.hpp"
#include "poselift/nn.hpp"
#include "poselift/synth.hpp"
#include "poselift/train.hpp"

namespace poselift {

struct AblationRow {
  bool maxnorm = false;
  bool batchnorm = false;
  bool residual = false;
  double val_mpjpe = 0.0;  // last finite validation score; NaN when diverged
  bool diverged = false;
  int epochs_run = 0;
};

/// Eight rows, ordered (maxnorm, batchnorm, residual) = 000, 001, ..., 111.
struct AblationReport {
  std::vector<AblationRow> rows;
  JointAveraging averaging = JointAveraging::all_joints;
  int blocks = 0;
  int width = 0;
  std::uint64_t seed = 0;
};

/// Trains one network per flag combination. Every row starts from the same
/// seed and sees the same data order; only the three flags differ. A diverged
/// row is flagged and the grid carries on. `workers` > 1 trains rows on
/// separate threads; the report does not depend on it.
AblationReport run_ablation(const TrainingData& data, const NetworkConfig& base_net,
                            const TrainingConfig& config, int workers = 1);

struct SweepCell {
  int blocks = 0;
  int width = 0;
  double val_mpjpe = 0.0;
  bool diverged = false;
};

/// Cells ordered row-major by (blocks, width) as given.
struct SweepReport {
  std::vector<SweepCell> cells;
  JointAveraging averaging = JointAveraging::all_joints;
  std::uint64_t seed = 0;
};

/// Throws InvalidInput on an empty grid.
SweepReport capacity_sweep(const TrainingData& data, const NetworkConfig& base_net,
                           const TrainingConfig& config, const std::vector<int>& blocks,
                           const std::vector<int>& widths, int workers = 1);

/// Stand-in for the 2D estimator: takes a pose in network-input pixels and
/// returns its estimate in the same frame. The index identifies the sample.
using PoseStage2D = std::function<Pose2D(const Pose2D& input_pixels, std::size_t index)>;

PoseStage2D identity_stage();

/// Renders a Gaussian heatmap per joint around a jittered target at
/// `grid_size` x `grid_size` cells over the input square, then decodes it by
/// argmax. Jitter is N(0, noise_px^2) in input pixels, seeded per sample.
PoseStage2D heatmap_detector_stage(double input_size, int grid_size, double noise_px,
                                   double blob_sigma_cells, std::uint64_t seed);

struct CropOptions {
  double margin = kDefaultCropMargin;
  double out_size = kDefaultCropSize;
};

struct CrToggleResult {
  double mpjpe_with_cr = 0.0;     // square crop around the box, stage, inverse crop
  double mpjpe_without_cr = 0.0;  // whole image scaled to out_size, stage, scaled back
  double mpjpe_direct = 0.0;      // raw joints, no 2D stage
};

/// Scores `model` on the samples with both preprocessing paths. Throws
/// InvalidInput if a sample lacks a positive-size detector box.
CrToggleResult evaluate_with_cr_toggle(const std::vector<Sample>& samples,
                                       const Checkpoint& model, double image_width,
                                       double image_height, const PoseStage2D& stage,
                                       const CropOptions& crop = {},
                                       JointAveraging averaging = JointAveraging::all_joints);

/// Lifts image-space 2D poses to root-relative 3D poses in millimeters.
std::vector<Pose3D> lift_poses(const Checkpoint& model, const std::vector<Pose2D>& poses);

}  // namespace poselift

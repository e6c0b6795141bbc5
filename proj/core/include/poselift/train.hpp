#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "poselift/metrics.hpp"
#include "poselift/nn.hpp"
#include "poselift/preprocess.hpp"

namespace poselift {

enum class OptimizerKind { sgd, adam };

const char* to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

struct TrainingConfig {
  int batch_size = 64;
  int epochs = 200;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lr_decay = 0.96;  // multiplied into the learning rate after every epoch
  std::uint64_t seed = 1;
  bool shuffle = true;
  JointAveraging averaging = JointAveraging::all_joints;

  /// Throws InvalidInput on bad values, including batch_size < 2 with batch norm.
  void validate(const NetworkConfig& net) const;

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

enum class Split { train, val, test };

const char* to_string(Split s);
Split split_from_string(const std::string& s);

/// Root-centered, flattened, not yet standardized pairs of one split.
struct PairedDataset {
  Split split = Split::train;
  std::vector<std::string> ids;
  Matrix inputs;   // N x input_dim, pixels
  Matrix targets;  // N x output_dim, millimeters

  Eigen::Index size() const { return inputs.rows(); }
};

/// What train() consumes: the splits plus statistics fitted on the train split.
struct TrainingData {
  SkeletonSpec skeleton;
  NormStats input_stats;
  NormStats output_stats;
  PairedDataset train;
  PairedDataset val;
};

/// Fits both NormStats on `train` only.
TrainingData make_training_data(const SkeletonSpec& spec, PairedDataset train, PairedDataset val);

struct LossResult {
  double loss = 0.0;
  Matrix grad;
};

/// loss = (1/N) sum_i ||pred_i - target_i||^2, grad = 2 (pred - target) / N.
LossResult mse_loss(const Matrix& pred, const Matrix& target);

struct OptimizerState {
  double learning_rate = 0.0;
  long step = 0;
  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;
};

OptimizerState make_optimizer_state(const LiftingNetwork& net, const TrainingConfig& config);

/// One SGD or Adam update at state.learning_rate, followed by the max-norm
/// projection when the network has it enabled. Throws ContractViolation if
/// the gradient layout does not match the network.
void optimizer_step(LiftingNetwork& net, NetworkGrads& grads, OptimizerState& state,
                    const TrainingConfig& config);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // eval-mode MSE over the standardized train split
  double val_mpjpe = 0.0;   // millimeters; NaN without a validation split
  double train_mpjpe = 0.0;
  double learning_rate = 0.0;
  bool diverged = false;
};

struct TrainingLog {
  std::optional<EpochRecord> initial;  // scores before the first update
  std::vector<EpochRecord> epochs;

  bool diverged() const { return !epochs.empty() && epochs.back().diverged; }
};

/// Scores of a network on one split, in the form the training log records.
struct SplitScore {
  double loss = 0.0;
  double mpjpe = 0.0;
};

SplitScore score_split(const LiftingNetwork& net, const PairedDataset& split,
                       const TrainingData& data, JointAveraging averaging);

/// Runs config.epochs passes of minibatch training on data.train, updating
/// `net` in place. Shuffling and dropout draw from one generator seeded with
/// config.seed, so the result is a deterministic function of its inputs.
/// With batch norm on, a trailing batch of one sample is skipped. A
/// non-finite loss ends training with a record flagged `diverged`.
TrainingLog train(LiftingNetwork& net, const TrainingData& data, const TrainingConfig& config);

/// Relative errors are taken against max(|numeric|, |analytic|, kGradCheckFloor),
/// so gradients below the floor are effectively compared in absolute terms.
inline constexpr double kGradCheckFloor = 1e-4;

/// Worst relative error between backward() and central finite differences of
/// mse_loss over every parameter. Dropout masks are drawn once from `seed`
/// and then frozen. Throws InvalidInput unless eps > 0.
double grad_check(const LiftingNetwork& net, const Matrix& inputs, const Matrix& targets,
                  double eps, std::uint64_t seed = 0);

/// A freshly initialized network whose biases and betas are drawn from
/// U(-0.1, 0.1) and gammas from U(0.5, 1.5). Zero biases can put whole
/// columns exactly on the ReLU kink, where finite differences say nothing.
LiftingNetwork make_grad_check_network(const NetworkConfig& config, std::uint64_t seed);

}  // namespace poselift

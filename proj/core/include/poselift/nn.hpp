#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "poselift/types.hpp"

namespace poselift {

struct SkeletonSpec;

using Rng = std::mt19937_64;

/// Architecture of the 2D-to-3D lifting regressor.
///
/// Layout: Dense(input_dim -> width) -> [BN] -> ReLU -> [Dropout], then
/// `blocks` residual blocks of two such stages at `width`, then
/// Dense(width -> output_dim). The flags toggle the three ablation axes.
struct NetworkConfig {
  int input_dim = 32;
  int output_dim = 48;
  int width = 1024;
  int blocks = 1;
  bool use_batchnorm = true;
  bool use_residual = true;
  bool use_maxnorm = true;
  double dropout_rate = 0.5;
  double maxnorm_c = 1.0;
  double bn_momentum = 0.1;
  double bn_epsilon = 1e-5;

  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct DenseLayer {
  Matrix weight;  // d_out x d_in; row i is the incoming weight vector of unit i
  Vector bias;
};

struct BatchNormLayer {
  Vector gamma;
  Vector beta;
  Vector running_mean;
  Vector running_var;
};

/// Dense -> [BatchNorm] -> ReLU -> [Dropout]. The batch-norm vectors are
/// empty when the network runs without batch normalization.
struct Stage {
  DenseLayer dense;
  BatchNormLayer bn;
};

struct ResidualBlock {
  std::array<Stage, 2> stages;
};

struct LiftingNetwork {
  NetworkConfig config;
  Stage input;
  std::vector<ResidualBlock> blocks;
  DenseLayer output;
};

enum class Mode { train, eval };

/// Weights uniform in +-sqrt(6 / d_in), zero biases, gamma = 1, beta = 0,
/// running mean 0 and running variance 1. Deterministic in `seed`.
LiftingNetwork init_network(const NetworkConfig& config, std::uint64_t seed);
/// Convenience overload that sizes the input and output layers from the skeleton.
LiftingNetwork init_network(const SkeletonSpec& spec, NetworkConfig config, std::uint64_t seed);

struct StageCache {
  Matrix input;
  Matrix xhat;       // batch-normalized activations before gamma/beta
  Vector inv_std;    // 1 / sqrt(batch_var + eps)
  Matrix pre_relu;
  Matrix mask;       // 0 or 1/keep per element; empty when dropout is off
};

/// Everything backward() needs from one train-mode forward pass.
struct ForwardCache {
  Mode mode = Mode::eval;
  Eigen::Index batch_rows = 0;
  StageCache input;
  std::vector<std::array<StageCache, 2>> blocks;
  Matrix output_input;
};

/// Scaled dropout masks in stage order: input stage, then both stages of each block.
using DropoutMasks = std::vector<Matrix>;

DropoutMasks masks_of(const ForwardCache& cache);

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

/// Runs the network on an N x input_dim batch.
///
/// Train mode uses batch statistics (and folds them into the running
/// averages) and draws dropout masks from `rng`. Eval mode uses the running
/// statistics, ignores dropout and leaves both `net` and `rng` untouched.
/// Throws InvalidInput on a width mismatch, an empty batch, or N == 1 in train
/// mode with batch normalization.
ForwardResult forward(LiftingNetwork& net, const Matrix& batch, Mode mode, Rng& rng);

/// Train-mode forward with fixed dropout masks, e.g. for finite differences.
ForwardResult forward(LiftingNetwork& net, const Matrix& batch, const DropoutMasks& masks);

/// Eval-mode forward on a const network.
Matrix predict(const LiftingNetwork& net, const Matrix& batch);

struct DenseGrads {
  Matrix weight;
  Vector bias;
};

struct StageGrads {
  DenseGrads dense;
  Vector gamma;
  Vector beta;
};

struct NetworkGrads {
  StageGrads input;
  std::vector<std::array<StageGrads, 2>> blocks;
  DenseGrads output;
};

struct BackwardResult {
  NetworkGrads grads;
  Matrix grad_input;
};

/// Exact gradients of sum(grad_output .* output) with respect to every
/// parameter and to the input batch. `cache` must come from a train-mode
/// forward on a batch with grad_output.rows() samples, else ContractViolation.
BackwardResult backward(const LiftingNetwork& net, const ForwardCache& cache,
                        const Matrix& grad_output);

/// Trainable tensors in a fixed order: per dense layer weight then bias, with
/// gamma and beta after each stage's dense layer when batch norm is on.
std::vector<std::span<double>> parameter_spans(LiftingNetwork& net);
std::vector<std::span<const double>> parameter_spans(const LiftingNetwork& net);
/// Same order and sizes as parameter_spans().
std::vector<std::span<double>> gradient_spans(NetworkGrads& grads);

std::size_t parameter_count(const LiftingNetwork& net);

std::vector<DenseLayer*> dense_layers(LiftingNetwork& net);
std::vector<const DenseLayer*> dense_layers(const LiftingNetwork& net);

/// Projects every dense-layer row with norm above c back onto the ball of
/// radius c. Does nothing unless net.config.use_maxnorm is set.
void apply_max_norm(LiftingNetwork& net, double c);

/// Largest row norm over all dense layers.
double max_row_norm(const LiftingNetwork& net);

}  // namespace poselift

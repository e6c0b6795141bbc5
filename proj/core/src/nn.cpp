#include "poselift/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "poselift/errors.hpp"
#include "poselift/preprocess.hpp"

namespace poselift {

void NetworkConfig::validate() const {
  if (input_dim < 1 || output_dim < 1) throw InvalidInput("network: input/output dims must be >= 1");
  if (width < 1) throw InvalidInput("network: width must be >= 1");
  if (blocks < 0) throw InvalidInput("network: block count must be >= 0");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw InvalidInput("network: dropout_rate must be in [0, 1)");
  }
  if (!(maxnorm_c > 0.0)) throw InvalidInput("network: maxnorm_c must be > 0");
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) {
    throw InvalidInput("network: batch-norm momentum must be in (0, 1]");
  }
  if (!(bn_epsilon > 0.0)) throw InvalidInput("network: batch-norm epsilon must be > 0");
}

namespace {

DenseLayer make_dense(int d_in, int d_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / d_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseLayer layer{Matrix(d_out, d_in), Vector::Zero(d_out)};
  for (int r = 0; r < d_out; ++r) {
    for (int c = 0; c < d_in; ++c) layer.weight(r, c) = dist(rng);
  }
  return layer;
}

Stage make_stage(int d_in, int d_out, bool batchnorm, Rng& rng) {
  Stage s{make_dense(d_in, d_out, rng), {}};
  if (batchnorm) {
    s.bn.gamma = Vector::Ones(d_out);
    s.bn.beta = Vector::Zero(d_out);
    s.bn.running_mean = Vector::Zero(d_out);
    s.bn.running_var = Vector::Ones(d_out);
  }
  return s;
}

Matrix affine(const DenseLayer& layer, const Matrix& x) {
  Matrix z = x * layer.weight.transpose();
  z.rowwise() += layer.bias.transpose();
  return z;
}

struct StageContext {
  const NetworkConfig& config;
  Mode mode;
  Rng* rng;                       // draws fresh masks when set
  const DropoutMasks* masks;      // frozen masks when set
  std::size_t stage_index;
};

// `running` receives the batch statistics in train mode; null in eval mode.
Matrix stage_forward(const Stage& stage, BatchNormLayer* running, const Matrix& x,
                     StageContext& ctx, StageCache& cache) {
  const bool train = ctx.mode == Mode::train;
  Matrix y = affine(stage.dense, x);
  if (ctx.config.use_batchnorm) {
    const auto& bn = stage.bn;
    if (train) {
      const double n = static_cast<double>(y.rows());
      const Eigen::RowVectorXd mu = y.colwise().mean();
      y.rowwise() -= mu;
      const Eigen::RowVectorXd var = y.array().square().colwise().sum() / n;
      cache.inv_std = (var.array() + ctx.config.bn_epsilon).rsqrt().transpose();
      y.array().rowwise() *= cache.inv_std.transpose().array();
      cache.xhat = y;
      const double m = ctx.config.bn_momentum;
      running->running_mean = (1.0 - m) * bn.running_mean + m * mu.transpose();
      running->running_var = (1.0 - m) * bn.running_var + (m * n / (n - 1.0)) * var.transpose();
    } else {
      y.rowwise() -= bn.running_mean.transpose();
      const Eigen::RowVectorXd inv =
          (bn.running_var.array() + ctx.config.bn_epsilon).rsqrt().transpose();
      y.array().rowwise() *= inv.array();
    }
    y.array().rowwise() *= bn.gamma.transpose().array();
    y.rowwise() += bn.beta.transpose();
  }
  if (train) {
    cache.input = x;
    cache.pre_relu = y;
  }
  Matrix a = y.cwiseMax(0.0);
  const double rate = ctx.config.dropout_rate;
  if (train && rate > 0.0) {
    if (ctx.masks != nullptr) {
      const Matrix& m = (*ctx.masks).at(ctx.stage_index);
      if (m.rows() != a.rows() || m.cols() != a.cols()) {
        throw ContractViolation("forward: frozen dropout mask has the wrong shape");
      }
      cache.mask = m;
    } else {
      const double keep = 1.0 - rate;
      std::bernoulli_distribution draw(keep);
      cache.mask.resize(a.rows(), a.cols());
      // Row-major draw order so masks depend only on the batch layout.
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
          cache.mask(r, c) = draw(*ctx.rng) ? 1.0 / keep : 0.0;
        }
      }
    }
    a.array() *= cache.mask.array();
  }
  ++ctx.stage_index;
  return a;
}

// `update` is the network whose running statistics absorb train-mode batches.
ForwardResult run_forward(const LiftingNetwork& net, LiftingNetwork* update, const Matrix& batch,
                          StageContext ctx) {
  const auto& cfg = net.config;
  if (batch.cols() != cfg.input_dim) {
    throw InvalidInput("forward: batch width " + std::to_string(batch.cols()) +
                       " does not match input_dim " + std::to_string(cfg.input_dim));
  }
  if (batch.rows() < 1) throw InvalidInput("forward: batch is empty");
  if (ctx.mode == Mode::train && cfg.use_batchnorm && batch.rows() < 2) {
    throw InvalidInput("forward: train-mode batch normalization needs at least 2 samples");
  }
  ForwardResult res;
  res.cache.mode = ctx.mode;
  res.cache.batch_rows = batch.rows();
  res.cache.blocks.resize(net.blocks.size());

  Matrix h = stage_forward(net.input, update ? &update->input.bn : nullptr, batch, ctx,
                           res.cache.input);
  for (std::size_t b = 0; b < net.blocks.size(); ++b) {
    const auto& block = net.blocks[b];
    auto* target = update != nullptr ? &update->blocks[b] : nullptr;
    Matrix mid = stage_forward(block.stages[0], target ? &target->stages[0].bn : nullptr, h, ctx,
                               res.cache.blocks[b][0]);
    Matrix out = stage_forward(block.stages[1], target ? &target->stages[1].bn : nullptr, mid,
                               ctx, res.cache.blocks[b][1]);
    if (cfg.use_residual) out += h;
    h = std::move(out);
  }
  res.output = affine(net.output, h);
  if (ctx.mode == Mode::train) res.cache.output_input = std::move(h);
  return res;
}

Matrix stage_backward(const Stage& stage, const StageCache& cache, const Matrix& grad_out,
                      const NetworkConfig& cfg, StageGrads& grads) {
  Matrix dy = grad_out;
  if (cache.mask.size() > 0) dy.array() *= cache.mask.array();
  dy = (cache.pre_relu.array() > 0.0).select(dy, 0.0);

  Matrix dz;
  if (cfg.use_batchnorm) {
    const double n = static_cast<double>(dy.rows());
    grads.gamma = (dy.array() * cache.xhat.array()).colwise().sum().transpose();
    grads.beta = dy.colwise().sum().transpose();
    Matrix dxhat = dy.array().rowwise() * stage.bn.gamma.transpose().array();
    const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
    const Eigen::RowVectorXd sum_dxhat_xhat =
        (dxhat.array() * cache.xhat.array()).colwise().sum();
    dz = n * dxhat;
    dz.rowwise() -= sum_dxhat;
    dz -= (cache.xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
    dz.array().rowwise() *= (cache.inv_std.transpose().array() / n);
  } else {
    dz = std::move(dy);
  }
  grads.dense.weight = dz.transpose() * cache.input;
  grads.dense.bias = dz.colwise().sum().transpose();
  return dz * stage.dense.weight;
}

template <typename Net, typename Span>
std::vector<Span> collect_spans(Net& net) {
  std::vector<Span> spans;
  auto add_dense = [&](auto& layer) {
    spans.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    spans.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  };
  auto add_stage = [&](auto& stage) {
    add_dense(stage.dense);
    if (net.config.use_batchnorm) {
      spans.emplace_back(stage.bn.gamma.data(), static_cast<std::size_t>(stage.bn.gamma.size()));
      spans.emplace_back(stage.bn.beta.data(), static_cast<std::size_t>(stage.bn.beta.size()));
    }
  };
  add_stage(net.input);
  for (auto& block : net.blocks) {
    for (auto& stage : block.stages) add_stage(stage);
  }
  add_dense(net.output);
  return spans;
}

}  // namespace

LiftingNetwork init_network(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  LiftingNetwork net;
  net.config = config;
  net.input = make_stage(config.input_dim, config.width, config.use_batchnorm, rng);
  net.blocks.reserve(static_cast<std::size_t>(config.blocks));
  for (int b = 0; b < config.blocks; ++b) {
    ResidualBlock block;
    for (auto& stage : block.stages) {
      stage = make_stage(config.width, config.width, config.use_batchnorm, rng);
    }
    net.blocks.push_back(std::move(block));
  }
  net.output = make_dense(config.width, config.output_dim, rng);
  return net;
}

LiftingNetwork init_network(const SkeletonSpec& spec, NetworkConfig config, std::uint64_t seed) {
  spec.validate();
  config.input_dim = spec.input_dim();
  config.output_dim = spec.output_dim();
  return init_network(config, seed);
}

DropoutMasks masks_of(const ForwardCache& cache) {
  DropoutMasks masks;
  masks.push_back(cache.input.mask);
  for (const auto& block : cache.blocks) {
    for (const auto& stage : block) masks.push_back(stage.mask);
  }
  return masks;
}

ForwardResult forward(LiftingNetwork& net, const Matrix& batch, Mode mode, Rng& rng) {
  return run_forward(net, mode == Mode::train ? &net : nullptr, batch,
                     StageContext{net.config, mode, &rng, nullptr, 0});
}

ForwardResult forward(LiftingNetwork& net, const Matrix& batch, const DropoutMasks& masks) {
  if (net.config.dropout_rate > 0.0 && masks.size() != 1 + 2 * net.blocks.size()) {
    throw ContractViolation("forward: expected one dropout mask per stage");
  }
  return run_forward(net, &net, batch,
                     StageContext{net.config, Mode::train, nullptr, &masks, 0});
}

Matrix predict(const LiftingNetwork& net, const Matrix& batch) {
  return run_forward(net, nullptr, batch, StageContext{net.config, Mode::eval, nullptr, nullptr, 0})
      .output;
}

BackwardResult backward(const LiftingNetwork& net, const ForwardCache& cache,
                        const Matrix& grad_output) {
  if (cache.mode != Mode::train) {
    throw ContractViolation("backward: cache was not produced by a train-mode forward");
  }
  if (grad_output.rows() != cache.batch_rows || cache.output_input.rows() != cache.batch_rows ||
      cache.blocks.size() != net.blocks.size()) {
    throw ContractViolation("backward: cache does not match the gradient batch or network");
  }
  if (grad_output.cols() != net.config.output_dim) {
    throw ContractViolation("backward: grad_output width does not match output_dim");
  }
  const auto& cfg = net.config;
  BackwardResult res;
  res.grads.output.weight = grad_output.transpose() * cache.output_input;
  res.grads.output.bias = grad_output.colwise().sum().transpose();
  Matrix g = grad_output * net.output.weight;

  res.grads.blocks.resize(net.blocks.size());
  for (std::size_t b = net.blocks.size(); b-- > 0;) {
    const auto& block = net.blocks[b];
    Matrix g_mid =
        stage_backward(block.stages[1], cache.blocks[b][1], g, cfg, res.grads.blocks[b][1]);
    Matrix g_in =
        stage_backward(block.stages[0], cache.blocks[b][0], g_mid, cfg, res.grads.blocks[b][0]);
    if (cfg.use_residual) g_in += g;
    g = std::move(g_in);
  }
  res.grad_input = stage_backward(net.input, cache.input, g, cfg, res.grads.input);
  return res;
}

std::vector<std::span<double>> parameter_spans(LiftingNetwork& net) {
  return collect_spans<LiftingNetwork, std::span<double>>(net);
}

std::vector<std::span<const double>> parameter_spans(const LiftingNetwork& net) {
  return collect_spans<const LiftingNetwork, std::span<const double>>(net);
}

std::vector<std::span<double>> gradient_spans(NetworkGrads& grads) {
  // Gradients have no config; infer batch-norm presence from the input stage.
  std::vector<std::span<double>> spans;
  const bool bn = grads.input.gamma.size() > 0;
  auto add_dense = [&](DenseGrads& g) {
    spans.emplace_back(g.weight.data(), static_cast<std::size_t>(g.weight.size()));
    spans.emplace_back(g.bias.data(), static_cast<std::size_t>(g.bias.size()));
  };
  auto add_stage = [&](StageGrads& g) {
    add_dense(g.dense);
    if (bn) {
      spans.emplace_back(g.gamma.data(), static_cast<std::size_t>(g.gamma.size()));
      spans.emplace_back(g.beta.data(), static_cast<std::size_t>(g.beta.size()));
    }
  };
  add_stage(grads.input);
  for (auto& block : grads.blocks) {
    for (auto& stage : block) add_stage(stage);
  }
  add_dense(grads.output);
  return spans;
}

std::size_t parameter_count(const LiftingNetwork& net) {
  std::size_t n = 0;
  for (const auto& s : parameter_spans(net)) n += s.size();
  return n;
}

std::vector<DenseLayer*> dense_layers(LiftingNetwork& net) {
  std::vector<DenseLayer*> layers{&net.input.dense};
  for (auto& block : net.blocks) {
    for (auto& stage : block.stages) layers.push_back(&stage.dense);
  }
  layers.push_back(&net.output);
  return layers;
}

std::vector<const DenseLayer*> dense_layers(const LiftingNetwork& net) {
  std::vector<const DenseLayer*> layers{&net.input.dense};
  for (const auto& block : net.blocks) {
    for (const auto& stage : block.stages) layers.push_back(&stage.dense);
  }
  layers.push_back(&net.output);
  return layers;
}

void apply_max_norm(LiftingNetwork& net, double c) {
  if (!net.config.use_maxnorm) return;
  if (!(c > 0.0)) throw InvalidInput("apply_max_norm: c must be > 0");
  // A rescaled row can land a few ulps above c; leaving those alone keeps the
  // projection idempotent.
  const double limit = c * (1.0 + 8.0 * std::numeric_limits<double>::epsilon());
  for (DenseLayer* layer : dense_layers(net)) {
    for (Eigen::Index r = 0; r < layer->weight.rows(); ++r) {
      const double norm = layer->weight.row(r).norm();
      if (norm > limit) layer->weight.row(r) *= c / norm;
    }
  }
}

double max_row_norm(const LiftingNetwork& net) {
  double worst = 0.0;
  for (const DenseLayer* layer : dense_layers(net)) {
    if (layer->weight.rows() > 0) {
      worst = std::max(worst, layer->weight.rowwise().norm().maxCoeff());
    }
  }
  return worst;
}

}  // namespace poselift

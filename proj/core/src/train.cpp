#include "poselift/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "poselift/errors.hpp"

namespace poselift {

const char* to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw InvalidInput("unknown optimizer '" + s + "' (expected sgd or adam)");
}

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw InvalidInput("unknown split '" + s + "' (expected train, val or test)");
}

void TrainingConfig::validate(const NetworkConfig& net) const {
  if (batch_size < 1) throw InvalidInput("training: batch_size must be >= 1");
  if (net.use_batchnorm && batch_size < 2) {
    throw InvalidInput("training: batch_size must be >= 2 with batch normalization");
  }
  if (epochs < 0) throw InvalidInput("training: epochs must be >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidInput("training: learning_rate must be > 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidInput("training: Adam betas must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw InvalidInput("training: adam_eps must be > 0");
  if (!(lr_decay > 0.0)) throw InvalidInput("training: lr_decay must be > 0");
}

TrainingData make_training_data(const SkeletonSpec& spec, PairedDataset train,
                                PairedDataset val) {
  spec.validate();
  if (train.size() == 0) throw InvalidInput("training data: train split is empty");
  if (train.inputs.cols() != spec.input_dim() || train.targets.cols() != spec.output_dim() ||
      train.targets.rows() != train.size()) {
    throw InvalidInput("training data: train split does not match the skeleton");
  }
  if (val.size() > 0 &&
      (val.inputs.cols() != spec.input_dim() || val.targets.cols() != spec.output_dim() ||
       val.targets.rows() != val.size())) {
    throw InvalidInput("training data: val split does not match the skeleton");
  }
  TrainingData data;
  data.skeleton = spec;
  data.input_stats = fit_stats(train.inputs);
  data.output_stats = fit_stats(train.targets);
  data.train = std::move(train);
  data.val = std::move(val);
  return data;
}

LossResult mse_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw InvalidInput("mse_loss: prediction and target shapes differ");
  }
  if (pred.rows() == 0) throw InvalidInput("mse_loss: empty batch");
  const double n = static_cast<double>(pred.rows());
  LossResult r;
  r.grad = pred - target;
  r.loss = r.grad.squaredNorm() / n;
  r.grad *= 2.0 / n;
  return r;
}

OptimizerState make_optimizer_state(const LiftingNetwork& net, const TrainingConfig& config) {
  OptimizerState state;
  state.learning_rate = config.learning_rate;
  if (config.optimizer == OptimizerKind::adam) {
    for (const auto& span : parameter_spans(net)) {
      state.first_moment.push_back(Vector::Zero(static_cast<Eigen::Index>(span.size())));
      state.second_moment.push_back(Vector::Zero(static_cast<Eigen::Index>(span.size())));
    }
  }
  return state;
}

void optimizer_step(LiftingNetwork& net, NetworkGrads& grads, OptimizerState& state,
                    const TrainingConfig& config) {
  auto params = parameter_spans(net);
  auto gs = gradient_spans(grads);
  if (params.size() != gs.size()) {
    throw ContractViolation("optimizer_step: gradient layout does not match the network");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != gs[i].size()) {
      throw ContractViolation("optimizer_step: gradient tensor " + std::to_string(i) +
                              " has the wrong size");
    }
  }
  const double lr = state.learning_rate;
  ++state.step;
  if (config.optimizer == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t k = 0; k < params[i].size(); ++k) params[i][k] -= lr * gs[i][k];
    }
  } else {
    if (state.first_moment.size() != params.size()) {
      throw ContractViolation("optimizer_step: Adam state does not match the network");
    }
    const double b1 = config.beta1;
    const double b2 = config.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& m = state.first_moment[i];
      auto& v = state.second_moment[i];
      for (std::size_t k = 0; k < params[i].size(); ++k) {
        const auto e = static_cast<Eigen::Index>(k);
        const double g = gs[i][k];
        m[e] = b1 * m[e] + (1.0 - b1) * g;
        v[e] = b2 * v[e] + (1.0 - b2) * g * g;
        params[i][k] -= lr * (m[e] / c1) / (std::sqrt(v[e] / c2) + config.adam_eps);
      }
    }
  }
  apply_max_norm(net, net.config.maxnorm_c);
}

SplitScore score_split(const LiftingNetwork& net, const PairedDataset& split,
                       const TrainingData& data, JointAveraging averaging) {
  if (split.size() == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan};
  }
  const Matrix x = normalize_rows(split.inputs, data.input_stats);
  const Matrix y = normalize_rows(split.targets, data.output_stats);
  const Matrix pred = predict(net, x);
  SplitScore s;
  s.loss = mse_loss(pred, y).loss;
  const Matrix pred_mm = denormalize_rows(pred, data.output_stats);
  s.mpjpe = pred_mm.allFinite() ? mpjpe_rows(pred_mm, split.targets, data.skeleton, averaging)
                                : std::numeric_limits<double>::quiet_NaN();
  return s;
}

namespace {

EpochRecord score_epoch(const LiftingNetwork& net, const TrainingData& data,
                        const TrainingConfig& config, int epoch, double lr) {
  const SplitScore tr = score_split(net, data.train, data, config.averaging);
  const SplitScore va = score_split(net, data.val, data, config.averaging);
  EpochRecord rec{epoch, tr.loss, va.mpjpe, tr.mpjpe, lr, false};
  rec.diverged = !std::isfinite(tr.loss);
  return rec;
}

}  // namespace

TrainingLog train(LiftingNetwork& net, const TrainingData& data, const TrainingConfig& config) {
  config.validate(net.config);
  if (data.train.size() == 0) throw InvalidInput("train: training split is empty");
  if (data.train.inputs.cols() != net.config.input_dim ||
      data.train.targets.cols() != net.config.output_dim) {
    throw InvalidInput("train: dataset dimensions do not match the network");
  }
  TrainingLog log;
  if (config.epochs == 0) return log;

  const Matrix x = normalize_rows(data.train.inputs, data.input_stats);
  const Matrix y = normalize_rows(data.train.targets, data.output_stats);
  const Eigen::Index n = x.rows();
  const Eigen::Index min_batch = net.config.use_batchnorm ? 2 : 1;

  Rng rng(config.seed);
  OptimizerState state = make_optimizer_state(net, config);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  log.initial = score_epoch(net, data, config, 0, state.learning_rate);

  Matrix xb;
  Matrix yb;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) std::shuffle(order.begin(), order.end(), rng);
    const double epoch_lr = state.learning_rate;
    bool blew_up = false;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index rows = std::min<Eigen::Index>(config.batch_size, n - start);
      if (rows < min_batch) break;
      xb.resize(rows, x.cols());
      yb.resize(rows, y.cols());
      for (Eigen::Index r = 0; r < rows; ++r) {
        xb.row(r) = x.row(order[static_cast<std::size_t>(start + r)]);
        yb.row(r) = y.row(order[static_cast<std::size_t>(start + r)]);
      }
      auto fwd = forward(net, xb, Mode::train, rng);
      LossResult loss = mse_loss(fwd.output, yb);
      if (!std::isfinite(loss.loss)) {
        blew_up = true;
        break;
      }
      auto back = backward(net, fwd.cache, loss.grad);
      optimizer_step(net, back.grads, state, config);
    }
    EpochRecord rec = score_epoch(net, data, config, epoch, epoch_lr);
    rec.diverged = rec.diverged || blew_up;
    log.epochs.push_back(rec);
    if (rec.diverged) break;
    state.learning_rate *= config.lr_decay;
  }
  return log;
}

double grad_check(const LiftingNetwork& net, const Matrix& inputs, const Matrix& targets,
                  double eps, std::uint64_t seed) {
  if (!(eps > 0.0)) throw InvalidInput("grad_check: eps must be > 0");
  LiftingNetwork work = net;
  Rng rng(seed);
  auto base = forward(work, inputs, Mode::train, rng);
  const DropoutMasks masks = masks_of(base.cache);
  auto back = backward(work, base.cache, mse_loss(base.output, targets).grad);

  auto loss_at = [&](LiftingNetwork& probe) {
    return mse_loss(forward(probe, inputs, masks).output, targets).loss;
  };

  // Batch statistics in train mode do not depend on the running averages, so
  // probing one copy repeatedly is exact.
  LiftingNetwork probe = net;
  auto params = parameter_spans(probe);
  auto grads = gradient_spans(back.grads);
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t k = 0; k < params[i].size(); ++k) {
      const double saved = params[i][k];
      params[i][k] = saved + eps;
      const double up = loss_at(probe);
      params[i][k] = saved - eps;
      const double down = loss_at(probe);
      params[i][k] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = grads[i][k];
      const double scale = std::max({std::abs(numeric), std::abs(analytic), kGradCheckFloor});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
    }
  }
  return worst;
}

LiftingNetwork make_grad_check_network(const NetworkConfig& config, std::uint64_t seed) {
  LiftingNetwork net = init_network(config, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> offset(-0.1, 0.1);
  std::uniform_real_distribution<double> scale(0.5, 1.5);
  auto fill = [&](Vector& v, auto& dist) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = dist(rng);
  };
  auto perturb = [&](Stage& s) {
    fill(s.dense.bias, offset);
    if (config.use_batchnorm) {
      fill(s.bn.gamma, scale);
      fill(s.bn.beta, offset);
    }
  };
  perturb(net.input);
  for (auto& block : net.blocks) {
    for (auto& stage : block.stages) perturb(stage);
  }
  fill(net.output.bias, offset);
  return net;
}

}  // namespace poselift

#include "refinecsp/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "refinecsp/error.hpp"

namespace refinecsp {

void TrainConfig::validate() const {
  if (batch_size < 1) fail(ErrorKind::invalid_argument, "batch size must be positive");
  if (epochs < 0) fail(ErrorKind::invalid_argument, "epoch count must be non-negative");
  if (!(learning_rate > 0.0)) fail(ErrorKind::invalid_argument, "learning rate must be positive");
  if (!(weight_decay >= 0.0)) fail(ErrorKind::invalid_argument, "weight decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    fail(ErrorKind::invalid_argument, "Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) fail(ErrorKind::invalid_argument, "Adam epsilon must be positive");
  if (lambda_cardinality < 0.0 || lambda_all_different < 0.0 || lambda_not_equal < 0.0)
    fail(ErrorKind::invalid_argument, "penalty weights must be non-negative");
  if (grad_clip && !(*grad_clip > 0.0))
    fail(ErrorKind::invalid_argument, "gradient clip must be positive");
}

LossConfig TrainConfig::loss_for(const CspInstance& inst) const {
  LossConfig loss = default_loss_config(inst);
  if (transform) loss.transform = *transform;
  loss.lambda_cardinality = lambda_cardinality;
  loss.lambda_all_different = lambda_all_different;
  loss.lambda_not_equal = lambda_not_equal;
  return loss;
}

OptimizerState init_optimizer(const ModelWeights& w) {
  OptimizerState s;
  for (const auto& p : w.parameters()) {
    s.first_moment.emplace_back(p.tensor.size(), 0.0);
    s.second_moment.emplace_back(p.tensor.size(), 0.0);
  }
  return s;
}

void adamw_step(ModelWeights& w, OptimizerState& state, const TrainConfig& cfg) {
  auto params = w.parameters();
  if (state.empty()) state = init_optimizer(w);
  if (state.first_moment.size() != params.size())
    fail(ErrorKind::incompatible, "optimizer state does not match the model parameters");

  double norm_sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g))
        fail(ErrorKind::numeric_failure, "non-finite gradient in parameter " + p.name);
      norm_sq += g * g;
    }
  }
  double clip_scale = 1.0;
  if (cfg.grad_clip) {
    const double norm = std::sqrt(norm_sq);
    if (norm > *cfg.grad_clip) clip_scale = *cfg.grad_clip / norm;
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    auto values = p.tensor.mutable_values();
    auto grad = p.tensor.grad();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    if (m.size() != values.size())
      fail(ErrorKind::incompatible, "optimizer moment shape differs for " + p.name);
    const double decay = p.decay ? 1.0 - cfg.learning_rate * cfg.weight_decay : 1.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i] * clip_scale;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      values[i] = values[i] * decay - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

Assignment random_assignment(const CspInstance& inst, Rng& rng) {
  Assignment a(inst.variable_count());
  std::uniform_int_distribution<int> dist(0, inst.domain_size() - 1);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = inst.fixed(i) ? *inst.fixed(i) : dist(rng);
  return a;
}

nd::Tensor assemble_relaxed(const Assignment& a, std::span<const std::size_t> selected,
                            const nd::Tensor& probs, int domain_size) {
  const std::size_t n = a.size();
  const auto m = static_cast<std::size_t>(domain_size);
  std::vector<double> base(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] < 0 || a[i] >= domain_size)
      fail(ErrorKind::out_of_range, "assemble_relaxed: value outside the domain");
    base[i * m + static_cast<std::size_t>(a[i])] = 1.0;
  }
  if (selected.empty()) return nd::Tensor::from({n, m}, std::move(base));
  if (!probs.defined() || probs.rows() != selected.size() || probs.cols() != m)
    fail(ErrorKind::shape_mismatch, "assemble_relaxed: probs must be |S| x m");
  std::vector<double> placement(n * selected.size(), 0.0);
  for (std::size_t k = 0; k < selected.size(); ++k) {
    const std::size_t v = selected[k];
    if (v >= n) fail(ErrorKind::out_of_range, "assemble_relaxed: selected variable out of range");
    std::fill_n(base.begin() + static_cast<std::ptrdiff_t>(v * m), m, 0.0);
    placement[v * selected.size() + k] = 1.0;
  }
  const nd::Tensor scatter = nd::matmul(
      nd::Tensor::from({n, selected.size()}, std::move(placement)), probs);
  return nd::add(nd::Tensor::from({n, m}, std::move(base)), scatter);
}

nd::Tensor step_loss(const ModelWeights& w, const InstanceContext& ctx, const Assignment& a,
                     std::span<const std::size_t> selected, Rng& rng, Phase phase,
                     const LossConfig& loss) {
  const ForwardResult out = forward(w, ctx, a, selected, rng, phase);
  const nd::Tensor rel =
      assemble_relaxed(a, out.selected, out.probs, ctx.instance().domain_size());
  return total_loss(ctx.instance(), rel, loss);
}

Trainer::Trainer(ModelWeights& weights, OptimizerState& state,
                 std::span<const CspInstance> instances, TrainConfig cfg)
    : weights_(&weights), state_(&state), instances_(instances), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (instances_.empty()) fail(ErrorKind::invalid_argument, "training needs at least one instance");
  contexts_.reserve(instances_.size());
  for (const auto& inst : instances_) {
    contexts_.emplace_back(weights.config, inst);
    losses_.push_back(cfg_.loss_for(inst));
  }
  if (state_->empty()) *state_ = init_optimizer(weights);
}

double Trainer::train_epoch(int epoch) {
  const std::uint64_t epoch_seed = derive_seed(cfg_.seed, static_cast<std::uint64_t>(epoch));
  std::vector<std::size_t> order(instances_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(epoch_seed, 0));
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  const auto batch = static_cast<std::size_t>(cfg_.batch_size);
  double epoch_total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += batch) {
    const std::size_t end = std::min(order.size(), start + batch);
    const double inv_batch = 1.0 / static_cast<double>(end - start);
    for (auto& p : weights_->parameters()) p.tensor.zero_grad();
    for (std::size_t pos = start; pos < end; ++pos) {
      const std::size_t idx = order[pos];
      Rng rng(derive_seed(epoch_seed, pos + 1));
      const CspInstance& inst = instances_[idx];
      const Assignment a = random_assignment(inst, rng);
      const SubsetDraw draw = select_subset(inst, weights_->config.selection_p, rng);
      nd::Tape tape;
      nd::TapeScope scope(tape);
      const nd::Tensor loss =
          step_loss(*weights_, contexts_[idx], a, draw.selected, rng, Phase::train, losses_[idx]);
      const double value = loss.item();
      if (!std::isfinite(value))
        fail(ErrorKind::numeric_failure, "non-finite training loss at epoch " +
                                             std::to_string(epoch));
      epoch_total += value;
      tape.backward(nd::scale(loss, inv_batch));
    }
    adamw_step(*weights_, *state_, cfg_);
  }
  return epoch_total / static_cast<double>(order.size());
}

TrainResult train(std::span<const CspInstance> instances, const ModelConfig& model_cfg,
                  const TrainConfig& cfg, const EpochCallback& on_epoch,
                  std::optional<ModelWeights> initial, std::optional<OptimizerState> state,
                  int first_epoch) {
  cfg.validate();
  TrainResult result;
  if (initial) {
    if (!(initial->config == model_cfg))
      fail(ErrorKind::incompatible, "initial weights were built for a different configuration");
    result.weights = std::move(*initial);
  } else {
    Rng init_rng(derive_seed(cfg.seed, 0xfeedULL));
    result.weights = init_weights(model_cfg, init_rng);
  }
  result.optimizer = state ? std::move(*state) : init_optimizer(result.weights);
  result.best_weights = result.weights.clone();
  if (cfg.epochs == 0) return result;

  Trainer trainer(result.weights, result.optimizer, instances, cfg);
  for (int e = 0; e < cfg.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const double loss = trainer.train_epoch(first_epoch + e);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.loss_history.push_back(loss);
    if (result.best_epoch < 0 || loss < result.best_loss) {
      result.best_loss = loss;
      result.best_epoch = first_epoch + e;
      result.best_weights = result.weights.clone();
    }
    if (on_epoch) on_epoch(first_epoch + e, loss, ms);
  }
  return result;
}

}  // namespace refinecsp

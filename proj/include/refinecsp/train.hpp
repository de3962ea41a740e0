#pragma once

// Self-supervised single-step training with AdamW.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "refinecsp/csp.hpp"
#include "refinecsp/model.hpp"
#include "refinecsp/penalty.hpp"

namespace refinecsp {

struct TrainConfig {
  int batch_size = 512;
  int epochs = 5000;
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double lambda_cardinality = 1.0;
  double lambda_all_different = 1.0;
  double lambda_not_equal = 1.0;
  /// Unset: quadratic for satisfaction instances, identity for maximization.
  std::optional<PenaltyTransform> transform;
  std::uint64_t seed = 0;
  /// Global gradient-norm clip; disabled when unset.
  std::optional<double> grad_clip;

  void validate() const;
  LossConfig loss_for(const CspInstance& inst) const;
};

struct OptimizerState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::int64_t step = 0;

  bool empty() const { return first_moment.empty(); }
};

OptimizerState init_optimizer(const ModelWeights& w);

/// One decoupled-weight-decay Adam update using the gradients currently
/// stored on the parameters. Throws on a non-finite gradient.
void adamw_step(ModelWeights& w, OptimizerState& state, const TrainConfig& cfg);

/// Uniform value for every free variable; fixed variables keep theirs.
Assignment random_assignment(const CspInstance& inst, Rng& rng);

/// Selected rows take `probs`, every other row is the one-hot of `a`.
nd::Tensor assemble_relaxed(const Assignment& a, std::span<const std::size_t> selected,
                            const nd::Tensor& probs, int domain_size);

/// Loss of one refinement step from `a` with subset `selected`.
nd::Tensor step_loss(const ModelWeights& w, const InstanceContext& ctx, const Assignment& a,
                     std::span<const std::size_t> selected, Rng& rng, Phase phase,
                     const LossConfig& loss);

using EpochCallback = std::function<void(int epoch, double mean_loss, double elapsed_ms)>;

class Trainer {
 public:
  /// `instances` must outlive the trainer.
  Trainer(ModelWeights& weights, OptimizerState& state, std::span<const CspInstance> instances,
          TrainConfig cfg);

  /// Runs one shuffled pass; returns the mean per-instance loss.
  double train_epoch(int epoch);

 private:
  ModelWeights* weights_;
  OptimizerState* state_;
  std::span<const CspInstance> instances_;
  std::vector<InstanceContext> contexts_;
  std::vector<LossConfig> losses_;
  TrainConfig cfg_;
};

struct TrainResult {
  ModelWeights weights;
  ModelWeights best_weights;
  int best_epoch = -1;
  double best_loss = 0.0;
  std::vector<double> loss_history;
  OptimizerState optimizer;
};

/// Trains from `initial` (fresh init when unset) for cfg.epochs epochs,
/// starting the epoch counter at state.step's epoch when resuming.
TrainResult train(std::span<const CspInstance> instances, const ModelConfig& model_cfg,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {},
                  std::optional<ModelWeights> initial = std::nullopt,
                  std::optional<OptimizerState> state = std::nullopt, int first_epoch = 0);

}  // namespace refinecsp

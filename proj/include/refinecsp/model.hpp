#pragma once

// Single-step refinement transformer over CSP variables.
//
// Each variable is one token: a value embedding, an absolute positional
// encoding of its index tuple and a marker for selected variables. Attention
// logits are biased by the constraint graph; the output head produces a
// distribution over the domain for every selected variable.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "refinecsp/csp.hpp"
#include "refinecsp/rng.hpp"
#include "refinecsp/tensor.hpp"

namespace refinecsp {

enum class RpeMode { masked, learned, none };
enum class ApeMode { none, one_dim, multi_dim };
enum class Sampler { gumbel, plain_softmax };
enum class Phase { train, eval };

struct ModelConfig {
  int layers = 7;
  int heads = 3;
  int d_model = 128;
  /// FFN hidden width; 0 means 4 * d_model.
  int ffn_hidden = 0;
  /// Largest domain the value embedding and output head support.
  int domain_size = 10;
  double selection_p = 0.5;
  RpeMode rpe = RpeMode::masked;
  ApeMode ape = ApeMode::multi_dim;
  Sampler sampler = Sampler::gumbel;
  double temperature = 0.1;
  double dropout = 0.1;

  int ffn_width() const { return ffn_hidden > 0 ? ffn_hidden : 4 * d_model; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

std::string to_string(RpeMode m);
std::string to_string(ApeMode m);
std::string to_string(Sampler s);
RpeMode parse_rpe_mode(const std::string& s);
ApeMode parse_ape_mode(const std::string& s);
Sampler parse_sampler(const std::string& s);

/// FNV-1a over a canonical text rendering of the config.
std::uint64_t config_hash(const ModelConfig& cfg);
std::string describe(const ModelConfig& cfg);

struct LayerWeights {
  nd::Tensor attn_norm_gain, attn_norm_shift;
  nd::Tensor wq, wk, wv, wo;  // d x d, row-vector convention (x * W)
  nd::Tensor ffn_norm_gain, ffn_norm_shift;
  nd::Tensor w1, b1, w2, b2;
};

struct NamedParameter {
  std::string name;
  nd::Tensor tensor;
  bool decay = true;
};

struct ModelWeights {
  ModelConfig config;
  nd::Tensor value_embedding;  // domain_size x d
  nd::Tensor selected_marker;  // 1 x d
  nd::Tensor alpha, beta, gamma;
  /// Learned RPE constant is c = -softplus(rpe_theta) <= 0.
  nd::Tensor rpe_theta;
  std::vector<LayerWeights> layers;
  nd::Tensor final_norm_gain, final_norm_shift;
  nd::Tensor out_weight;  // d x domain_size
  nd::Tensor out_bias;    // domain_size

  /// Fixed order used by the optimizer and the checkpoint format.
  std::vector<NamedParameter> parameters() const;
  std::size_t parameter_count() const;
  /// Deep copy with fresh leaf tensors (independent gradient buffers).
  ModelWeights clone() const;
  double rpe_constant() const;
};

/// Xavier-uniform projections, zero biases, unit alpha/beta/gamma and
/// N(0, 0.02) embeddings.
ModelWeights init_weights(const ModelConfig& cfg, Rng& rng);

/// Sinusoidal encoding of `pos` with `width` channels (sin/cos interleaved).
std::vector<double> positional_encoding(int pos, std::size_t width);
/// Concatenation of one sinusoidal block of width d/k per index dimension.
std::vector<double> ape(std::span<const int> index_tuple, std::size_t d_model);

/// n x n additive attention bias; diagonal entries count as edges.
nd::Tensor rpe_bias(const ConstraintGraph& graph, RpeMode mode, double c);

/// Per-instance tensors reused across forward passes.
class InstanceContext {
 public:
  InstanceContext(const ModelConfig& cfg, const CspInstance& inst);

  const CspInstance& instance() const { return *inst_; }
  const ConstraintGraph& graph() const { return graph_; }
  const nd::Tensor& ape_matrix() const { return ape_; }
  const nd::Tensor& masked_bias() const { return masked_bias_; }
  const nd::Tensor& non_edge_indicator() const { return non_edge_; }

 private:
  const CspInstance* inst_;
  ConstraintGraph graph_;
  nd::Tensor ape_;
  nd::Tensor masked_bias_;
  nd::Tensor non_edge_;
};

struct SubsetDraw {
  std::vector<std::size_t> selected;  // ascending
  int resamples = 0;
};

/// Bernoulli(p) per non-fixed variable; redraws an empty draw while some
/// variable is free.
SubsetDraw select_subset(const CspInstance& inst, double p, Rng& rng);

struct ForwardResult {
  std::vector<std::size_t> selected;
  nd::Tensor logits;  // |S| x m, undefined when S is empty
  nd::Tensor probs;   // |S| x m, undefined when S is empty
};

ForwardResult forward(const ModelWeights& w, const InstanceContext& ctx, const Assignment& a,
                      std::span<const std::size_t> selected, Rng& rng, Phase phase);

/// Index of the largest entry; ties go to the lowest index.
int argmax_row(std::span<const double> row);

/// Selected variables take argmax of their row of `probs`.
Assignment apply_update(const Assignment& a, std::span<const std::size_t> selected,
                        const nd::Tensor& probs);

/// Row-wise softmax attention weights of every head, layer-major (index
/// layer * heads + head), for inspection. Computed without gradients in eval mode.
std::vector<nd::Tensor> attention_maps(const ModelWeights& w, const InstanceContext& ctx,
                                       const Assignment& a,
                                       std::span<const std::size_t> selected);

}  // namespace refinecsp

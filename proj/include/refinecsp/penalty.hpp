#pragma once

// Differentiable penalties for the discrete constraints and the
// self-supervised loss built from them. A relaxed assignment is an n x m
// tensor whose rows are probability vectors over the domain.

#include <cstddef>
#include <span>
#include <vector>

#include "refinecsp/csp.hpp"
#include "refinecsp/tensor.hpp"

namespace refinecsp {

enum class PenaltyTransform { quadratic, identity };

struct LossConfig {
  PenaltyTransform transform = PenaltyTransform::quadratic;
  double lambda_cardinality = 1.0;
  double lambda_all_different = 1.0;
  double lambda_not_equal = 1.0;
  /// Optional per-constraint weights; overrides the per-kind values when
  /// its length matches the instance's constraint count.
  std::vector<double> lambdas;
};

/// Quadratic for satisfaction instances, identity for maximization so that
/// signed edge weights keep their sign.
LossConfig default_loss_config(const CspInstance& inst);

nd::Tensor one_hot(const Assignment& a, int domain_size);

nd::Tensor pen_cardinality(const nd::Tensor& rel, std::span<const std::size_t> scope, int value,
                           int count);
nd::Tensor pen_alldiff_exact(const nd::Tensor& rel, std::span<const std::size_t> scope);
nd::Tensor pen_alldiff_atmost(const nd::Tensor& rel, std::span<const std::size_t> scope);
nd::Tensor pen_not_equal(const nd::Tensor& rel, std::size_t i, std::size_t k, double weight = 1.0);

nd::Tensor penalty(const Constraint& c, const nd::Tensor& rel);

/// Sum over constraints of lambda_i * f(p_i).
nd::Tensor total_loss(const CspInstance& inst, const nd::Tensor& rel, const LossConfig& cfg);

/// Throws unless rel is n x m with non-negative rows summing to 1.
void validate_relaxed(const CspInstance& inst, const nd::Tensor& rel, double tol = 1e-9);

}  // namespace refinecsp

#include "refinecsp/penalty.hpp"

#include <cmath>
#include <string>
#include <variant>

#include "refinecsp/error.hpp"

namespace refinecsp {

namespace {

void require_relaxed_matrix(const nd::Tensor& rel, const char* op) {
  if (!rel.defined() || rel.rank() != 2)
    fail(ErrorKind::shape_mismatch, std::string(op) + ": relaxed assignment must be n x m");
}

void require_scope(const nd::Tensor& rel, std::span<const std::size_t> scope, const char* op) {
  require_relaxed_matrix(rel, op);
  if (scope.empty()) fail(ErrorKind::invalid_argument, std::string(op) + ": empty scope");
  for (auto v : scope)
    if (v >= rel.rows())
      fail(ErrorKind::out_of_range, std::string(op) + ": variable " + std::to_string(v) +
                                        " outside " + std::to_string(rel.rows()) + " rows");
}

// 1 x m column sums of the scope's rows.
nd::Tensor column_sums(const nd::Tensor& rel, std::span<const std::size_t> scope) {
  const nd::Tensor rows = nd::gather_rows(rel, scope);
  const nd::Tensor ones = nd::Tensor::full({1, scope.size()}, 1.0);
  return nd::matmul(ones, rows);
}

double kind_lambda(const Constraint& c, const LossConfig& cfg) {
  if (std::holds_alternative<Cardinality>(c)) return cfg.lambda_cardinality;
  if (std::holds_alternative<NotEqual>(c)) return cfg.lambda_not_equal;
  return cfg.lambda_all_different;
}

}  // namespace

LossConfig default_loss_config(const CspInstance& inst) {
  LossConfig cfg;
  if (inst.mode() == Mode::maximization) cfg.transform = PenaltyTransform::identity;
  return cfg;
}

nd::Tensor one_hot(const Assignment& a, int domain_size) {
  if (a.empty()) fail(ErrorKind::invalid_argument, "one_hot: empty assignment");
  const auto m = static_cast<std::size_t>(domain_size);
  std::vector<double> v(a.size() * m, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0 || a[i] >= domain_size)
      fail(ErrorKind::out_of_range, "one_hot: value outside the domain");
    v[i * m + static_cast<std::size_t>(a[i])] = 1.0;
  }
  return nd::Tensor::from({a.size(), m}, std::move(v));
}

nd::Tensor pen_cardinality(const nd::Tensor& rel, std::span<const std::size_t> scope, int value,
                           int count) {
  require_scope(rel, scope, "pen_cardinality");
  if (value < 0 || static_cast<std::size_t>(value) >= rel.cols())
    fail(ErrorKind::out_of_range, "pen_cardinality: value outside the domain");
  const nd::Tensor hits =
      nd::slice_cols(column_sums(rel, scope), static_cast<std::size_t>(value), 1);
  return nd::sum_all(nd::abs(nd::sub(nd::Tensor::scalar(static_cast<double>(count)), hits)));
}

nd::Tensor pen_alldiff_exact(const nd::Tensor& rel, std::span<const std::size_t> scope) {
  require_scope(rel, scope, "pen_alldiff_exact");
  if (scope.size() != rel.cols())
    fail(ErrorKind::invalid_argument, "pen_alldiff_exact: scope size " +
                                          std::to_string(scope.size()) + " differs from domain " +
                                          std::to_string(rel.cols()));
  const nd::Tensor sums = column_sums(rel, scope);
  return nd::sum_all(nd::abs(nd::sub(nd::Tensor::scalar(1.0), sums)));
}

nd::Tensor pen_alldiff_atmost(const nd::Tensor& rel, std::span<const std::size_t> scope) {
  require_scope(rel, scope, "pen_alldiff_atmost");
  if (scope.size() >= rel.cols())
    fail(ErrorKind::invalid_argument,
         "pen_alldiff_atmost: scope must be smaller than the domain");
  const nd::Tensor sums = column_sums(rel, scope);
  const nd::Tensor excess = nd::relu(nd::add_scalar(sums, -1.0));
  const nd::Tensor binary = nd::mul(sums, nd::abs(nd::sub(nd::Tensor::scalar(1.0), sums)));
  return nd::sum_all(nd::add(excess, binary));
}

nd::Tensor pen_not_equal(const nd::Tensor& rel, std::size_t i, std::size_t k, double weight) {
  if (i == k) fail(ErrorKind::invalid_argument, "pen_not_equal: i and k must differ");
  const std::size_t pair[2] = {i, k};
  require_scope(rel, pair, "pen_not_equal");
  const std::size_t first[1] = {i};
  const std::size_t second[1] = {k};
  const nd::Tensor dot =
      nd::sum_all(nd::mul(nd::gather_rows(rel, first), nd::gather_rows(rel, second)));
  return weight == 1.0 ? dot : nd::scale(dot, weight);
}

nd::Tensor penalty(const Constraint& c, const nd::Tensor& rel) {
  if (const auto* card = std::get_if<Cardinality>(&c))
    return pen_cardinality(rel, card->scope, card->value, card->count);
  if (const auto* ad = std::get_if<AllDifferentExact>(&c)) return pen_alldiff_exact(rel, ad->scope);
  if (const auto* ad = std::get_if<AllDifferentAtMostOnce>(&c))
    return pen_alldiff_atmost(rel, ad->scope);
  const auto& ne = std::get<NotEqual>(c);
  return pen_not_equal(rel, ne.i, ne.k, ne.weight);
}

nd::Tensor total_loss(const CspInstance& inst, const nd::Tensor& rel, const LossConfig& cfg) {
  require_relaxed_matrix(rel, "total_loss");
  if (rel.rows() != inst.variable_count() ||
      rel.cols() != static_cast<std::size_t>(inst.domain_size()))
    fail(ErrorKind::shape_mismatch, "total_loss: relaxed assignment " +
                                        nd::shape_string(rel.shape()) +
                                        " does not match the instance");
  const auto& cons = inst.constraints();
  const bool per_constraint = cfg.lambdas.size() == cons.size() && !cons.empty();
  const auto lambda_of = [&](std::size_t idx) {
    const double l = per_constraint ? cfg.lambdas[idx] : kind_lambda(cons[idx], cfg);
    if (l < 0.0) fail(ErrorKind::invalid_argument, "total_loss: lambda must be non-negative");
    return l;
  };

  // NotEqual constraints are evaluated as one batched row-wise dot product;
  // everything else contributes one scalar penalty each.
  std::vector<std::size_t> ne_i, ne_k;
  std::vector<double> ne_weight, ne_lambda;
  std::vector<nd::Tensor> others;
  std::vector<double> other_lambda;
  for (std::size_t idx = 0; idx < cons.size(); ++idx) {
    if (const auto* ne = std::get_if<NotEqual>(&cons[idx])) {
      ne_i.push_back(ne->i);
      ne_k.push_back(ne->k);
      ne_weight.push_back(ne->weight);
      ne_lambda.push_back(lambda_of(idx));
    } else {
      others.push_back(penalty(cons[idx], rel));
      other_lambda.push_back(lambda_of(idx));
    }
  }

  const auto transformed = [&](const nd::Tensor& p) {
    return cfg.transform == PenaltyTransform::quadratic ? nd::mul(p, p) : p;
  };

  std::vector<nd::Tensor> terms;
  if (!ne_i.empty()) {
    const nd::Tensor dots = nd::reduce_sum(
        nd::mul(nd::gather_rows(rel, ne_i), nd::gather_rows(rel, ne_k)), 1);
    const nd::Tensor p = nd::mul(dots, nd::Tensor::from({ne_weight.size()}, ne_weight));
    terms.push_back(nd::sum_all(
        nd::mul(transformed(p), nd::Tensor::from({ne_lambda.size()}, ne_lambda))));
  }
  if (!others.empty()) {
    const nd::Tensor p = others.size() == 1 ? others.front() : nd::concat(others, 0);
    terms.push_back(nd::sum_all(
        nd::mul(transformed(p), nd::Tensor::from({other_lambda.size()}, other_lambda))));
  }
  if (terms.empty()) return nd::Tensor::scalar(0.0);
  return terms.size() == 1 ? terms.front() : nd::add(terms[0], terms[1]);
}

void validate_relaxed(const CspInstance& inst, const nd::Tensor& rel, double tol) {
  require_relaxed_matrix(rel, "validate_relaxed");
  if (rel.rows() != inst.variable_count() ||
      rel.cols() != static_cast<std::size_t>(inst.domain_size()))
    fail(ErrorKind::shape_mismatch, "relaxed assignment does not match the instance");
  const auto v = rel.values();
  for (std::size_t i = 0; i < rel.rows(); ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < rel.cols(); ++j) {
      const double x = v[i * rel.cols() + j];
      if (!(x >= -tol && x <= 1.0 + tol))
        fail(ErrorKind::numeric_failure, "relaxed entry outside [0, 1]");
      total += x;
    }
    if (std::fabs(total - 1.0) > tol)
      fail(ErrorKind::numeric_failure, "relaxed row " + std::to_string(i) + " sums to " +
                                           std::to_string(total));
  }
}

}  // namespace refinecsp

#include "refinecsp/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "refinecsp/error.hpp"

namespace refinecsp::nd {

namespace {

thread_local Tape* g_active_tape = nullptr;
std::atomic<std::uint64_t> g_next_id{1};

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

std::shared_ptr<Node> new_node(Shape shape, std::vector<double> values) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return n;
}

// Records `fn` when a tape is active and some input needs a gradient.
template <typename Fn>
Tensor finish(std::initializer_list<const Tensor*> inputs, Tensor out, Fn&& fn) {
  Tape* tape = g_active_tape;
  if (tape == nullptr) return out;
  bool needs = false;
  for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  if (!needs) return out;
  out.node()->requires_grad = true;
  std::vector<std::shared_ptr<Node>> ins;
  ins.reserve(inputs.size());
  for (const Tensor* t : inputs) ins.push_back(t->node());
  tape->record(std::move(ins), out.node(), std::forward<Fn>(fn));
  return out;
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) fail(ErrorKind::invalid_argument, std::string(op) + ": undefined tensor");
}

void require_rank2(const Tensor& t, const char* op) {
  require_defined(t, op);
  if (t.rank() != 2)
    fail(ErrorKind::shape_mismatch,
         std::string(op) + ": expected a matrix, got shape " + shape_string(t.shape()));
}

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size())
    fail(ErrorKind::out_of_range, std::string(op) + ": axis " + std::to_string(axis) +
                                      " invalid for shape " + shape_string(s));
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

enum class BinKind { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinKind kind, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  const bool same = a.shape() == b.shape();
  const bool a_scalar = a.is_scalar() && !same;
  const bool b_scalar = b.is_scalar() && !same;
  if (!same && !a_scalar && !b_scalar)
    fail(ErrorKind::shape_mismatch, std::string(op) + ": shapes " + shape_string(a.shape()) +
                                        " and " + shape_string(b.shape()) + " do not match");
  const Shape out_shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = shape_size(out_shape);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[a_scalar ? 0 : i];
    const double y = bv[b_scalar ? 0 : i];
    switch (kind) {
      case BinKind::add: out[i] = x + y; break;
      case BinKind::sub: out[i] = x - y; break;
      case BinKind::mul: out[i] = x * y; break;
    }
  }
  Tensor result = make_result(out_shape, std::move(out));
  auto an = a.node();
  auto bn = b.node();
  auto on = result.node();
  return finish({&a, &b}, result, [an, bn, on, a_scalar, b_scalar, kind, n]() {
    const auto& g = on->grad;
    if (an->requires_grad) {
      auto& ga = an->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        double d = g[i];
        if (kind == BinKind::mul) d *= bn->value[b_scalar ? 0 : i];
        ga[a_scalar ? 0 : i] += d;
      }
    }
    if (bn->requires_grad) {
      auto& gb = bn->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        double d = g[i];
        if (kind == BinKind::sub) d = -d;
        if (kind == BinKind::mul) d *= an->value[a_scalar ? 0 : i];
        gb[b_scalar ? 0 : i] += d;
      }
    }
  });
}

// Elementwise unary op with derivative expressed through input/output values.
template <typename F, typename D>
Tensor unary(const Tensor& a, const char* op, F f, D df) {
  require_defined(a, op);
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  Tensor result = make_result(a.shape(), std::move(out));
  auto an = a.node();
  auto on = result.node();
  return finish({&a}, result, [an, on, df]() {
    auto& ga = an->ensure_grad();
    for (std::size_t i = 0; i < ga.size(); ++i)
      ga[i] += on->grad[i] * df(an->value[i], on->value[i]);
  });
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::vector<double>& Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor make_result(Shape shape, std::vector<double> values) {
  return Tensor(new_node(std::move(shape), std::move(values)));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double v) {
  const std::size_t n = shape_size(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(n, v)));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  for (auto d : shape)
    if (d == 0) fail(ErrorKind::shape_mismatch, "tensor dimensions must be positive");
  if (shape_size(shape) != values.size())
    fail(ErrorKind::shape_mismatch, "shape " + shape_string(shape) + " holds " +
                                        std::to_string(shape_size(shape)) + " values, got " +
                                        std::to_string(values.size()));
  return Tensor(new_node(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

std::size_t Tensor::rows() const { return rank() == 2 ? shape()[0] : 1; }
std::size_t Tensor::cols() const { return rank() == 2 ? shape()[1] : size(); }

double Tensor::item() const {
  if (!is_scalar())
    fail(ErrorKind::shape_mismatch, "item() on non-scalar shape " + shape_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(new_node(node_->shape, node_->value)); }

void Tape::record(std::vector<std::shared_ptr<Node>> inputs, std::shared_ptr<Node> output,
                  BackwardFn backward) {
  ops_.push_back(Op{std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  require_defined(loss, "backward");
  if (!loss.is_scalar())
    fail(ErrorKind::shape_mismatch,
         "backward: loss must be a scalar, got shape " + shape_string(loss.shape()));
  if (!loss.requires_grad()) return;
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not reachable from loss
    it->backward();
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

void backward(const Tensor& loss) {
  if (g_active_tape == nullptr)
    fail(ErrorKind::invalid_argument, "backward: no active tape on this thread");
  g_active_tape->backward(loss);
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinKind::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinKind::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinKind::mul, "mul"); }

Tensor scale(const Tensor& a, double s) {
  return unary(
      a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(
      a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, "abs", [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
  return unary(
      a, "gelu", [](double x) { return x * normal_cdf(x); },
      [](double x, double) { return normal_cdf(x) + x * normal_pdf(x); });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a, "softplus",
      [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k)
    fail(ErrorKind::shape_mismatch, "matmul: inner dimensions differ, " +
                                        shape_string(a.shape()) + " x " + shape_string(b.shape()));
  std::vector<double> out(m * n);
  const auto ei = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
  MutMap(out.data(), ei(m), ei(n)).noalias() =
      ConstMap(a.values().data(), ei(m), ei(k)) * ConstMap(b.values().data(), ei(k), ei(n));
  Tensor result = make_result({m, n}, std::move(out));
  auto an = a.node();
  auto bn = b.node();
  auto on = result.node();
  return finish({&a, &b}, result, [an, bn, on, m, k, n, ei]() {
    ConstMap g(on->grad.data(), ei(m), ei(n));
    if (an->requires_grad)
      MutMap(an->ensure_grad().data(), ei(m), ei(k)).noalias() +=
          g * ConstMap(bn->value.data(), ei(k), ei(n)).transpose();
    if (bn->requires_grad)
      MutMap(bn->ensure_grad().data(), ei(k), ei(n)).noalias() +=
          ConstMap(an->value.data(), ei(m), ei(k)).transpose() * g;
  });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  const auto av = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  Tensor result = make_result({n, m}, std::move(out));
  auto an = a.node();
  auto on = result.node();
  return finish({&a}, result, [an, on, m, n]() {
    auto& ga = an->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += on->grad[j * m + i];
  });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  require_defined(a, "softmax");
  const AxisSplit s = split_axis(a.shape(), axis, "softmax");
  const auto av = a.values();
  std::vector<double> out(av.size(), 0.0);
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const auto idx = [&](std::size_t l) { return (o * s.len + l) * s.inner + i; };
      double mx = neg_inf;
      for (std::size_t l = 0; l < s.len; ++l) {
        const double v = av[idx(l)];
        if (std::isnan(v)) fail(ErrorKind::numeric_failure, "softmax: NaN input");
        mx = std::max(mx, v);
      }
      if (mx == neg_inf)
        fail(ErrorKind::numeric_failure, "softmax: every entry of a slice is -inf");
      double total = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const double v = av[idx(l)];
        const double e = v == neg_inf ? 0.0 : std::exp(v - mx);
        out[idx(l)] = e;
        total += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) out[idx(l)] /= total;
    }
  }
  Tensor result = make_result(a.shape(), std::move(out));
  auto an = a.node();
  auto on = result.node();
  return finish({&a}, result, [an, on, s]() {
    auto& ga = an->ensure_grad();
    const auto& y = on->value;
    const auto& g = on->grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const auto idx = [&](std::size_t l) { return (o * s.len + l) * s.inner + i; };
        double dot = 0.0;
        for (std::size_t l = 0; l < s.len; ++l) dot += g[idx(l)] * y[idx(l)];
        for (std::size_t l = 0; l < s.len; ++l) ga[idx(l)] += y[idx(l)] * (g[idx(l)] - dot);
      }
    }
  });
}

Tensor reduce_sum(const Tensor& a, std::size_t axis) {
  require_defined(a, "reduce_sum");
  const AxisSplit s = split_axis(a.shape(), axis, "reduce_sum");
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape = {1};
  const auto av = a.values();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t l = 0; l < s.len; ++l)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += av[(o * s.len + l) * s.inner + i];
  Tensor result = make_result(std::move(out_shape), std::move(out));
  auto an = a.node();
  auto on = result.node();
  return finish({&a}, result, [an, on, s]() {
    auto& ga = an->ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t l = 0; l < s.len; ++l)
        for (std::size_t i = 0; i < s.inner; ++i)
          ga[(o * s.len + l) * s.inner + i] += on->grad[o * s.inner + i];
  });
}

Tensor sum_all(const Tensor& a) {
  require_defined(a, "sum_all");
  double total = 0.0;
  for (double v : a.values()) total += v;
  Tensor result = make_result({1}, {total});
  auto an = a.node();
  auto on = result.node();
  return finish({&a}, result, [an, on]() {
    auto& ga = an->ensure_grad();
    for (double& g : ga) g += on->grad[0];
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) fail(ErrorKind::invalid_argument, "concat: no inputs");
  for (const auto& p : parts) require_defined(p, "concat");
  const Shape& first = parts.front().shape();
  split_axis(first, axis, "concat");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& ps = p.shape();
    bool ok = ps.size() == first.size();
    for (std::size_t d = 0; ok && d < ps.size(); ++d)
      if (d != axis && ps[d] != first[d]) ok = false;
    if (!ok)
      fail(ErrorKind::shape_mismatch, "concat: shapes " + shape_string(first) + " and " +
                                          shape_string(ps) + " differ off the concat axis");
    out_shape[axis] += ps[axis];
  }
  const AxisSplit so = split_axis(out_shape, axis, "concat");
  std::vector<double> out(shape_size(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t len = p.shape()[axis];
    const auto pv = p.values();
    for (std::size_t o = 0; o < so.outer; ++o)
      for (std::size_t l = 0; l < len; ++l)
        for (std::size_t i = 0; i < so.inner; ++i)
          out[(o * so.len + offset + l) * so.inner + i] = pv[(o * len + l) * so.inner + i];
    offset += len;
  }
  Tensor result = make_result(out_shape, std::move(out));
  Tape* tape = active_tape();
  bool needs = false;
  for (const auto& p : parts) needs = needs || p.requires_grad();
  if (tape == nullptr || !needs) return result;
  result.node()->requires_grad = true;
  std::vector<std::shared_ptr<Node>> ins;
  for (const auto& p : parts) ins.push_back(p.node());
  auto on = result.node();
  tape->record(ins, on, [ins, on, offsets, so, axis]() {
    for (std::size_t k = 0; k < ins.size(); ++k) {
      if (!ins[k]->requires_grad) continue;
      auto& gp = ins[k]->ensure_grad();
      const std::size_t len = ins[k]->shape[axis];
      for (std::size_t o = 0; o < so.outer; ++o)
        for (std::size_t l = 0; l < len; ++l)
          for (std::size_t i = 0; i < so.inner; ++i)
            gp[(o * len + l) * so.inner + i] +=
                on->grad[(o * so.len + offsets[k] + l) * so.inner + i];
    }
  });
  return result;
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  require_rank2(table, "gather_rows");
  if (indices.empty()) fail(ErrorKind::invalid_argument, "gather_rows: empty index list");
  const std::size_t r = table.shape()[0], c = table.shape()[1];
  const auto tv = table.values();
  std::vector<double> out(indices.size() * c);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= r)
      fail(ErrorKind::out_of_range, "gather_rows: index " + std::to_string(indices[k]) +
                                        " out of range for " + std::to_string(r) + " rows");
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(indices[k] * c), c,
                out.begin() + static_cast<std::ptrdiff_t>(k * c));
  }
  Tensor result = make_result({indices.size(), c}, std::move(out));
  auto tn = table.node();
  auto on = result.node();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return finish({&table}, result, [tn, on, idx = std::move(idx), c]() {
    auto& gt = tn->ensure_grad();
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t j = 0; j < c; ++j) gt[idx[k] * c + j] += on->grad[k * c + j];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  require_rank2(a, "slice_cols");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  if (count == 0 || start + count > n)
    fail(ErrorKind::out_of_range, "slice_cols: columns [" + std::to_string(start) + ", " +
                                      std::to_string(start + count) + ") outside width " +
                                      std::to_string(n));
  const auto av = a.values();
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = av[i * n + start + j];
  Tensor result = make_result({m, count}, std::move(out));
  auto an = a.node();
  auto on = result.node();
  return finish({&a}, result, [an, on, m, n, start, count]() {
    auto& ga = an->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) ga[i * n + start + j] += on->grad[i * count + j];
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank2(x, "add_bias");
  require_defined(bias, "add_bias");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (bias.size() != n)
    fail(ErrorKind::shape_mismatch, "add_bias: bias " + shape_string(bias.shape()) +
                                        " does not fit rows of " + shape_string(x.shape()));
  const auto xv = x.values();
  const auto bv = bias.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
  Tensor result = make_result(x.shape(), std::move(out));
  auto xn = x.node();
  auto bn = bias.node();
  auto on = result.node();
  return finish({&x, &bias}, result, [xn, bn, on, m, n]() {
    if (xn->requires_grad) {
      auto& gx = xn->ensure_grad();
      for (std::size_t i = 0; i < m * n; ++i) gx[i] += on->grad[i];
    }
    if (bn->requires_grad) {
      auto& gb = bn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += on->grad[i * n + j];
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps) {
  require_rank2(x, "layer_norm");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (gain.size() != n || shift.size() != n)
    fail(ErrorKind::shape_mismatch, "layer_norm: affine parameters must have width " +
                                        std::to_string(n));
  const auto xv = x.values();
  const auto gv = gain.values();
  const auto sv = shift.values();
  std::vector<double> out(m * n), xhat(m * n), inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += xv[i * n + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = xv[i * n + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (xv[i * n + j] - mean) * inv_std[i];
      out[i * n + j] = xhat[i * n + j] * gv[j] + sv[j];
    }
  }
  Tensor result = make_result(x.shape(), std::move(out));
  auto xn = x.node();
  auto gn = gain.node();
  auto sn = shift.node();
  auto on = result.node();
  return finish({&x, &gain, &shift}, result,
                [xn, gn, sn, on, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)]() {
                  const auto& g = on->grad;
                  if (gn->requires_grad) {
                    auto& gg = gn->ensure_grad();
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xhat[i * n + j];
                  }
                  if (sn->requires_grad) {
                    auto& gs = sn->ensure_grad();
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t j = 0; j < n; ++j) gs[j] += g[i * n + j];
                  }
                  if (xn->requires_grad) {
                    auto& gx = xn->ensure_grad();
                    const double inv_n = 1.0 / static_cast<double>(n);
                    for (std::size_t i = 0; i < m; ++i) {
                      double mean_dy = 0.0, mean_dy_xhat = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        const double dy = g[i * n + j] * gn->value[j];
                        mean_dy += dy;
                        mean_dy_xhat += dy * xhat[i * n + j];
                      }
                      mean_dy *= inv_n;
                      mean_dy_xhat *= inv_n;
                      for (std::size_t j = 0; j < n; ++j) {
                        const double dy = g[i * n + j] * gn->value[j];
                        gx[i * n + j] +=
                            inv_std[i] * (dy - mean_dy - xhat[i * n + j] * mean_dy_xhat);
                      }
                    }
                  }
                });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training) {
  require_defined(x, "dropout");
  if (rate < 0.0 || rate >= 1.0)
    fail(ErrorKind::invalid_argument, "dropout: rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (double& v : mask) v = uniform01(rng) < rate ? 0.0 : keep_scale;
  return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double eps, double tol, double floor) {
  GradCheckReport report;
  const std::vector<double> x0(x.values().begin(), x.values().end());
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor xp = Tensor::parameter(x.shape(), x0);
    Tensor y = f(xp);
    tape.backward(y);
    report.analytic.assign(x0.size(), 0.0);
    if (xp.has_grad()) std::copy(xp.grad().begin(), xp.grad().end(), report.analytic.begin());
  }
  NoGradScope no_grad;
  report.numeric.resize(x0.size());
  report.relative_error.resize(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    std::vector<double> plus = x0, minus = x0;
    plus[i] += eps;
    minus[i] -= eps;
    const double fp = f(Tensor::from(x.shape(), std::move(plus))).item();
    const double fm = f(Tensor::from(x.shape(), std::move(minus))).item();
    const double num = (fp - fm) / (2.0 * eps);
    const double ana = report.analytic[i];
    const double denom = std::max({std::fabs(ana), std::fabs(num), floor});
    const double rel = std::fabs(ana - num) / denom;
    report.numeric[i] = num;
    report.relative_error[i] = rel;
    report.max_relative_error = std::max(report.max_relative_error, rel);
    if (!(rel <= tol)) report.failures.push_back(i);
  }
  report.passed = report.failures.empty();
  return report;
}

}  // namespace refinecsp::nd

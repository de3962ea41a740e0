#include "refinecsp/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "refinecsp/csp.hpp"
#include "refinecsp/model.hpp"
#include "refinecsp/penalty.hpp"
#include "refinecsp/rng.hpp"
#include "refinecsp/tensor.hpp"
#include "refinecsp/train.hpp"

namespace refinecsp {

namespace {

using nd::Tensor;
using Fn = std::function<Tensor(const Tensor&)>;

std::vector<double> normal_values(std::size_t count, double scale, Rng& rng) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(count);
  for (auto& x : v) x = dist(rng);
  return v;
}

// Values bounded away from zero so abs/relu stay off their kinks.
std::vector<double> off_kink_values(std::size_t count, Rng& rng) {
  std::vector<double> v(count);
  for (auto& x : v) {
    const double mag = 0.1 + uniform01(rng);
    x = uniform01(rng) < 0.5 ? -mag : mag;
  }
  return v;
}

// Weighted scalar reduction so every output entry gets a distinct cotangent.
Tensor project(const Tensor& y, std::uint64_t salt) {
  Rng rng(salt);
  return nd::sum_all(nd::mul(y, Tensor::from(y.shape(), normal_values(y.size(), 1.0, rng))));
}

GradCheckCase check(const std::string& name, const Fn& f, const Tensor& x, double tol) {
  const auto report = nd::grad_check(f, x, 1e-5, tol);
  return {name, report.analytic.size(), report.max_relative_error, report.passed};
}

ModelConfig toy_config(RpeMode rpe) {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.d_model = 8;
  cfg.domain_size = 4;
  cfg.selection_p = 0.5;
  cfg.rpe = rpe;
  cfg.ape = ApeMode::one_dim;
  cfg.sampler = Sampler::plain_softmax;
  cfg.temperature = 1.0;
  cfg.dropout = 0.0;
  return cfg;
}

CspInstance toy_instance() {
  std::vector<Constraint> cs;
  cs.push_back(AllDifferentExact{{0, 1, 2, 3}});
  cs.push_back(NotEqual{0, 4, 1.0});
  cs.push_back(Cardinality{2, 1, {3, 4}});
  return CspInstance(4, {{0}, {1}, {2}, {3}, {4}}, std::vector<std::optional<int>>(5), cs,
                     Mode::satisfaction);
}

// Loss of one refinement step with a single parameter tensor replaced.
Fn model_loss(const ModelWeights& base, const CspInstance& inst,
              const std::function<void(ModelWeights&, const Tensor&)>& replace) {
  return [&base, &inst, replace](const Tensor& x) {
    ModelWeights w = base.clone();
    replace(w, x);
    const InstanceContext ctx(w.config, inst);
    const Assignment a{0, 0, 1, 3, 2};
    const std::vector<std::size_t> selected{0, 1, 4};
    Rng rng(1);
    return step_loss(w, ctx, a, selected, rng, Phase::eval, default_loss_config(inst));
  };
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed, double tol) {
  Rng rng(seed);
  std::vector<GradCheckCase> out;
  const auto mat = [&](std::size_t r, std::size_t c) {
    return Tensor::from({r, c}, normal_values(r * c, 1.0, rng));
  };

  const Tensor b = mat(3, 4), w = mat(4, 5), g = mat(1, 4), sh = mat(1, 4);
  out.push_back(check("add", [&](const Tensor& x) { return project(nd::add(x, b), 1); }, mat(3, 4), tol));
  out.push_back(check("mul", [&](const Tensor& x) { return project(nd::mul(x, b), 2); }, mat(3, 4), tol));
  out.push_back(check("matmul", [&](const Tensor& x) { return project(nd::matmul(x, w), 3); }, mat(3, 4), tol));
  out.push_back(check("transpose", [&](const Tensor& x) { return project(nd::transpose(x), 4); }, mat(3, 4), tol));
  out.push_back(check("softmax", [&](const Tensor& x) { return project(nd::softmax(x, 1), 5); }, mat(3, 4), tol));
  out.push_back(check("gelu", [&](const Tensor& x) { return project(nd::gelu(x), 6); }, mat(3, 4), tol));
  out.push_back(check("softplus", [&](const Tensor& x) { return project(nd::softplus(x), 7); }, mat(3, 4), tol));
  out.push_back(check("abs", [&](const Tensor& x) { return project(nd::abs(x), 8); },
                      Tensor::from({3, 4}, off_kink_values(12, rng)), tol));
  out.push_back(check("relu", [&](const Tensor& x) { return project(nd::relu(x), 9); },
                      Tensor::from({3, 4}, off_kink_values(12, rng)), tol));
  out.push_back(check("layer_norm",
                      [&](const Tensor& x) {
                        return project(nd::layer_norm(x, g.detach(), sh.detach()), 10);
                      },
                      mat(3, 4), tol));
  const std::vector<std::size_t> rows{2, 0, 2};
  out.push_back(check("gather_rows", [&](const Tensor& x) { return project(nd::gather_rows(x, rows), 11); }, mat(3, 4), tol));
  out.push_back(check("slice_cols", [&](const Tensor& x) { return project(nd::slice_cols(x, 1, 2), 12); }, mat(3, 4), tol));
  out.push_back(check("concat", [&](const Tensor& x) { return project(nd::concat({x, b, x}, 1), 13); }, mat(3, 4), tol));
  out.push_back(check("reduce_sum", [&](const Tensor& x) { return project(nd::reduce_sum(x, 0), 14); }, mat(3, 4), tol));

  // Penalties on softmax-relaxed rows.
  const auto relaxed = [](const Tensor& x) { return nd::softmax(x, 1); };
  const std::vector<std::size_t> s4{0, 1, 2, 3}, s3{0, 2, 3};
  out.push_back(check("pen_cardinality",
                      [&](const Tensor& x) { return pen_cardinality(relaxed(x), s4, 1, 1); },
                      mat(4, 4), tol));
  out.push_back(check("pen_alldiff_exact",
                      [&](const Tensor& x) { return pen_alldiff_exact(relaxed(x), s4); },
                      mat(4, 4), tol));
  out.push_back(check("pen_alldiff_atmost",
                      [&](const Tensor& x) { return pen_alldiff_atmost(relaxed(x), s3); },
                      mat(4, 5), tol));
  out.push_back(check("pen_not_equal",
                      [&](const Tensor& x) { return pen_not_equal(relaxed(x), 1, 3, 0.7); },
                      mat(4, 4), tol));
  const CspInstance inst = toy_instance();
  out.push_back(check("total_loss",
                      [&](const Tensor& x) {
                        return total_loss(inst, relaxed(x), default_loss_config(inst));
                      },
                      mat(5, 4), tol));

  // Loss through a 2-layer model, one parameter tensor at a time.
  for (const RpeMode rpe : {RpeMode::masked, RpeMode::learned}) {
    Rng init(derive_seed(seed, static_cast<std::uint64_t>(rpe) + 100));
    const ModelWeights base = init_weights(toy_config(rpe), init);
    const std::string tag = "model[" + to_string(rpe) + "].";
    const auto param = [&](const std::string& name, const Tensor& start,
                           const std::function<void(ModelWeights&, const Tensor&)>& set) {
      out.push_back(check(tag + name, model_loss(base, inst, set), start.detach(), tol));
    };
    param("value_embedding", base.value_embedding,
          [](ModelWeights& m, const Tensor& x) { m.value_embedding = x; });
    param("layers.0.wq", base.layers[0].wq, [](ModelWeights& m, const Tensor& x) { m.layers[0].wq = x; });
    param("layers.1.w1", base.layers[1].w1, [](ModelWeights& m, const Tensor& x) { m.layers[1].w1 = x; });
    param("out_weight", base.out_weight, [](ModelWeights& m, const Tensor& x) { m.out_weight = x; });
    param("alpha", base.alpha, [](ModelWeights& m, const Tensor& x) { m.alpha = x; });
    if (rpe == RpeMode::learned)
      param("rpe_theta", base.rpe_theta, [](ModelWeights& m, const Tensor& x) { m.rpe_theta = x; });
  }
  return out;
}

}  // namespace refinecsp

#include "refinecsp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "refinecsp/error.hpp"

namespace refinecsp {

namespace {

nd::Tensor xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(fan_in * fan_out);
  for (double& x : v) x = dist(rng);
  return nd::Tensor::parameter({fan_in, fan_out}, std::move(v));
}

nd::Tensor small_normal(nd::Shape shape, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 0.02);
  std::vector<double> v(nd::shape_size(shape));
  for (double& x : v) x = dist(rng);
  return nd::Tensor::parameter(std::move(shape), std::move(v));
}

nd::Tensor constant_param(nd::Shape shape, double value) {
  const std::size_t n = nd::shape_size(shape);
  return nd::Tensor::parameter(std::move(shape), std::vector<double>(n, value));
}

nd::Tensor copy_param(const nd::Tensor& t) {
  return nd::Tensor::parameter(t.shape(), std::vector<double>(t.values().begin(), t.values().end()));
}

void check_selected(const CspInstance& inst, std::span<const std::size_t> selected) {
  for (std::size_t k = 0; k < selected.size(); ++k) {
    const std::size_t v = selected[k];
    if (v >= inst.variable_count())
      fail(ErrorKind::out_of_range, "selected variable " + std::to_string(v) + " out of range");
    if (inst.fixed(v))
      fail(ErrorKind::invalid_argument,
           "selected variable " + std::to_string(v) + " is fixed and must be bypassed");
    if (k > 0 && selected[k - 1] >= v)
      fail(ErrorKind::invalid_argument, "selected variables must be strictly ascending");
  }
}

struct ForwardTrace {
  std::vector<nd::Tensor>* attention = nullptr;
};

nd::Tensor encode(const ModelWeights& w, const InstanceContext& ctx, const Assignment& a,
                  std::span<const std::size_t> selected, Rng& rng, Phase phase,
                  ForwardTrace trace) {
  const ModelConfig& cfg = w.config;
  const CspInstance& inst = ctx.instance();
  const std::size_t n = inst.variable_count();
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto heads = static_cast<std::size_t>(cfg.heads);
  const std::size_t dh = d / heads;
  const bool training = phase == Phase::train;

  std::vector<std::size_t> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<std::size_t>(a[i]);
  std::vector<double> indicator(n, 0.0);
  for (auto v : selected) indicator[v] = 1.0;

  nd::Tensor h = nd::mul(w.alpha, nd::gather_rows(w.value_embedding, values));
  if (cfg.ape != ApeMode::none) h = nd::add(h, nd::mul(w.beta, ctx.ape_matrix()));
  const nd::Tensor marker =
      nd::matmul(nd::Tensor::from({n, 1}, std::move(indicator)), w.selected_marker);
  h = nd::add(h, nd::mul(w.gamma, marker));

  nd::Tensor bias;
  switch (cfg.rpe) {
    case RpeMode::masked: bias = ctx.masked_bias(); break;
    case RpeMode::learned:
      bias = nd::mul(nd::scale(nd::softplus(w.rpe_theta), -1.0), ctx.non_edge_indicator());
      break;
    case RpeMode::none: break;
  }

  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const LayerWeights& layer : w.layers) {
    const nd::Tensor xn = nd::layer_norm(h, layer.attn_norm_gain, layer.attn_norm_shift);
    const nd::Tensor q = nd::matmul(xn, layer.wq);
    const nd::Tensor k = nd::matmul(xn, layer.wk);
    const nd::Tensor v = nd::matmul(xn, layer.wv);
    std::vector<nd::Tensor> head_out;
    head_out.reserve(heads);
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const nd::Tensor qh = heads == 1 ? q : nd::slice_cols(q, hd * dh, dh);
      const nd::Tensor kh = heads == 1 ? k : nd::slice_cols(k, hd * dh, dh);
      const nd::Tensor vh = heads == 1 ? v : nd::slice_cols(v, hd * dh, dh);
      nd::Tensor scores = nd::scale(nd::matmul(qh, nd::transpose(kh)), inv_sqrt_dh);
      if (bias.defined()) scores = nd::add(scores, bias);
      const nd::Tensor attn = nd::softmax(scores, 1);
      if (trace.attention != nullptr) trace.attention->push_back(attn);
      head_out.push_back(nd::matmul(attn, vh));
    }
    const nd::Tensor z = heads == 1 ? head_out.front() : nd::concat(head_out, 1);
    h = nd::add(h, nd::dropout(nd::matmul(z, layer.wo), cfg.dropout, rng, training));

    const nd::Tensor fn = nd::layer_norm(h, layer.ffn_norm_gain, layer.ffn_norm_shift);
    const nd::Tensor hidden = nd::gelu(nd::add_bias(nd::matmul(fn, layer.w1), layer.b1));
    const nd::Tensor ffn = nd::add_bias(nd::matmul(hidden, layer.w2), layer.b2);
    h = nd::add(h, nd::dropout(ffn, cfg.dropout, rng, training));
  }
  return nd::layer_norm(h, w.final_norm_gain, w.final_norm_shift);
}

}  // namespace

void ModelConfig::validate() const {
  if (layers < 0) fail(ErrorKind::invalid_argument, "layer count must be non-negative");
  if (heads < 1) fail(ErrorKind::invalid_argument, "head count must be positive");
  if (d_model < 1 || d_model % heads != 0)
    fail(ErrorKind::invalid_argument, "d_model must be a positive multiple of the head count");
  if (ffn_hidden < 0) fail(ErrorKind::invalid_argument, "ffn width must be non-negative");
  if (domain_size < 1) fail(ErrorKind::invalid_argument, "domain size must be positive");
  if (!(selection_p > 0.0 && selection_p <= 1.0))
    fail(ErrorKind::invalid_argument, "selection probability must lie in (0, 1]");
  if (!(temperature > 0.0)) fail(ErrorKind::invalid_argument, "temperature must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0))
    fail(ErrorKind::invalid_argument, "dropout must lie in [0, 1)");
}

std::string to_string(RpeMode m) {
  switch (m) {
    case RpeMode::masked: return "masked";
    case RpeMode::learned: return "learned";
    case RpeMode::none: return "none";
  }
  return "?";
}

std::string to_string(ApeMode m) {
  switch (m) {
    case ApeMode::none: return "none";
    case ApeMode::one_dim: return "1d";
    case ApeMode::multi_dim: return "multi";
  }
  return "?";
}

std::string to_string(Sampler s) {
  return s == Sampler::gumbel ? "gumbel" : "softmax";
}

RpeMode parse_rpe_mode(const std::string& s) {
  if (s == "masked") return RpeMode::masked;
  if (s == "learned") return RpeMode::learned;
  if (s == "none") return RpeMode::none;
  fail(ErrorKind::invalid_argument, "unknown rpe mode '" + s + "'");
}

ApeMode parse_ape_mode(const std::string& s) {
  if (s == "none") return ApeMode::none;
  if (s == "1d") return ApeMode::one_dim;
  if (s == "multi") return ApeMode::multi_dim;
  fail(ErrorKind::invalid_argument, "unknown ape mode '" + s + "'");
}

Sampler parse_sampler(const std::string& s) {
  if (s == "gumbel") return Sampler::gumbel;
  if (s == "softmax") return Sampler::plain_softmax;
  fail(ErrorKind::invalid_argument, "unknown sampler '" + s + "'");
}

std::string describe(const ModelConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "layers=" << cfg.layers << " heads=" << cfg.heads << " d_model=" << cfg.d_model
     << " ffn=" << cfg.ffn_width() << " domain=" << cfg.domain_size << " p=" << cfg.selection_p
     << " rpe=" << to_string(cfg.rpe) << " ape=" << to_string(cfg.ape)
     << " sampler=" << to_string(cfg.sampler) << " tau=" << cfg.temperature
     << " dropout=" << cfg.dropout;
  return os.str();
}

std::uint64_t config_hash(const ModelConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : describe(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<NamedParameter> ModelWeights::parameters() const {
  std::vector<NamedParameter> out = {
      {"value_embedding", value_embedding, true},
      {"selected_marker", selected_marker, true},
      {"alpha", alpha, false},
      {"beta", beta, false},
      {"gamma", gamma, false},
      {"rpe_theta", rpe_theta, false},
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto p = "layer" + std::to_string(l) + ".";
    const LayerWeights& lw = layers[l];
    out.push_back({p + "attn_norm_gain", lw.attn_norm_gain, false});
    out.push_back({p + "attn_norm_shift", lw.attn_norm_shift, false});
    out.push_back({p + "wq", lw.wq, true});
    out.push_back({p + "wk", lw.wk, true});
    out.push_back({p + "wv", lw.wv, true});
    out.push_back({p + "wo", lw.wo, true});
    out.push_back({p + "ffn_norm_gain", lw.ffn_norm_gain, false});
    out.push_back({p + "ffn_norm_shift", lw.ffn_norm_shift, false});
    out.push_back({p + "w1", lw.w1, true});
    out.push_back({p + "b1", lw.b1, true});
    out.push_back({p + "w2", lw.w2, true});
    out.push_back({p + "b2", lw.b2, true});
  }
  out.push_back({"final_norm_gain", final_norm_gain, false});
  out.push_back({"final_norm_shift", final_norm_shift, false});
  out.push_back({"out_weight", out_weight, true});
  out.push_back({"out_bias", out_bias, true});
  return out;
}

std::size_t ModelWeights::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.tensor.size();
  return total;
}

ModelWeights ModelWeights::clone() const {
  ModelWeights c;
  c.config = config;
  c.value_embedding = copy_param(value_embedding);
  c.selected_marker = copy_param(selected_marker);
  c.alpha = copy_param(alpha);
  c.beta = copy_param(beta);
  c.gamma = copy_param(gamma);
  c.rpe_theta = copy_param(rpe_theta);
  for (const auto& lw : layers) {
    c.layers.push_back({copy_param(lw.attn_norm_gain), copy_param(lw.attn_norm_shift),
                        copy_param(lw.wq), copy_param(lw.wk), copy_param(lw.wv),
                        copy_param(lw.wo), copy_param(lw.ffn_norm_gain),
                        copy_param(lw.ffn_norm_shift), copy_param(lw.w1), copy_param(lw.b1),
                        copy_param(lw.w2), copy_param(lw.b2)});
  }
  c.final_norm_gain = copy_param(final_norm_gain);
  c.final_norm_shift = copy_param(final_norm_shift);
  c.out_weight = copy_param(out_weight);
  c.out_bias = copy_param(out_bias);
  return c;
}

double ModelWeights::rpe_constant() const {
  const double t = rpe_theta.item();
  const double sp = t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
  return -sp;
}

ModelWeights init_weights(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto f = static_cast<std::size_t>(cfg.ffn_width());
  const auto m = static_cast<std::size_t>(cfg.domain_size);
  ModelWeights w;
  w.config = cfg;
  w.value_embedding = small_normal({m, d}, rng);
  w.selected_marker = small_normal({1, d}, rng);
  w.alpha = constant_param({1}, 1.0);
  w.beta = constant_param({1}, 1.0);
  w.gamma = constant_param({1}, 1.0);
  // softplus(0.5413) ~= 1, so a learned bias starts at c ~= -1.
  w.rpe_theta = constant_param({1}, 0.5413248546129181);
  for (int l = 0; l < cfg.layers; ++l) {
    LayerWeights lw;
    lw.attn_norm_gain = constant_param({d}, 1.0);
    lw.attn_norm_shift = constant_param({d}, 0.0);
    lw.wq = xavier(d, d, rng);
    lw.wk = xavier(d, d, rng);
    lw.wv = xavier(d, d, rng);
    lw.wo = xavier(d, d, rng);
    lw.ffn_norm_gain = constant_param({d}, 1.0);
    lw.ffn_norm_shift = constant_param({d}, 0.0);
    lw.w1 = xavier(d, f, rng);
    lw.b1 = constant_param({f}, 0.0);
    lw.w2 = xavier(f, d, rng);
    lw.b2 = constant_param({d}, 0.0);
    w.layers.push_back(std::move(lw));
  }
  w.final_norm_gain = constant_param({d}, 1.0);
  w.final_norm_shift = constant_param({d}, 0.0);
  w.out_weight = xavier(d, m, rng);
  w.out_bias = constant_param({m}, 0.0);
  return w;
}

std::vector<double> positional_encoding(int pos, std::size_t width) {
  std::vector<double> pe(width);
  for (std::size_t c = 0; c < width; ++c) {
    const auto pair = static_cast<double>(c / 2 * 2);
    const double freq = std::pow(10000.0, -pair / static_cast<double>(width));
    const double angle = static_cast<double>(pos) * freq;
    pe[c] = c % 2 == 0 ? std::sin(angle) : std::cos(angle);
  }
  return pe;
}

std::vector<double> ape(std::span<const int> index_tuple, std::size_t d_model) {
  const std::size_t k = index_tuple.size();
  if (k == 0 || d_model % k != 0)
    fail(ErrorKind::invalid_argument, "ape: d_model " + std::to_string(d_model) +
                                          " is not divisible by index dimensionality " +
                                          std::to_string(k));
  const std::size_t width = d_model / k;
  std::vector<double> out;
  out.reserve(d_model);
  for (int idx : index_tuple) {
    const auto block = positional_encoding(idx, width);
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

nd::Tensor rpe_bias(const ConstraintGraph& graph, RpeMode mode, double c) {
  const std::size_t n = graph.vertex_count();
  std::vector<double> b(n * n, 0.0);
  if (mode != RpeMode::none) {
    const double off = mode == RpeMode::masked ? -std::numeric_limits<double>::infinity() : c;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && !graph.has_edge(i, j)) b[i * n + j] = off;
  }
  return nd::Tensor::from({n, n}, std::move(b));
}

InstanceContext::InstanceContext(const ModelConfig& cfg, const CspInstance& inst)
    : inst_(&inst), graph_(constraint_graph(inst)) {
  cfg.validate();
  const std::size_t n = inst.variable_count();
  if (n == 0) fail(ErrorKind::invalid_argument, "instance has no variables");
  if (inst.domain_size() > cfg.domain_size)
    fail(ErrorKind::incompatible, "instance domain " + std::to_string(inst.domain_size()) +
                                      " exceeds the model's domain size " +
                                      std::to_string(cfg.domain_size));
  const auto d = static_cast<std::size_t>(cfg.d_model);
  std::vector<double> enc;
  enc.reserve(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row;
    switch (cfg.ape) {
      case ApeMode::multi_dim: row = ape(inst.index_tuple(i), d); break;
      case ApeMode::one_dim: row = positional_encoding(static_cast<int>(i), d); break;
      case ApeMode::none: row.assign(d, 0.0); break;
    }
    enc.insert(enc.end(), row.begin(), row.end());
  }
  ape_ = nd::Tensor::from({n, d}, std::move(enc));
  masked_bias_ = rpe_bias(graph_, RpeMode::masked, 0.0);
  non_edge_ = rpe_bias(graph_, RpeMode::learned, 1.0);
}

SubsetDraw select_subset(const CspInstance& inst, double p, Rng& rng) {
  if (!(p > 0.0 && p <= 1.0))
    fail(ErrorKind::invalid_argument, "selection probability must lie in (0, 1]");
  SubsetDraw draw;
  const std::size_t n = inst.variable_count();
  const bool any_free = inst.fixed_count() < n;
  std::bernoulli_distribution coin(p);
  while (true) {
    draw.selected.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (!inst.fixed(i) && coin(rng)) draw.selected.push_back(i);
    if (!draw.selected.empty() || !any_free) return draw;
    ++draw.resamples;
  }
}

ForwardResult forward(const ModelWeights& w, const InstanceContext& ctx, const Assignment& a,
                      std::span<const std::size_t> selected, Rng& rng, Phase phase) {
  const CspInstance& inst = ctx.instance();
  validate_assignment(inst, a);
  check_selected(inst, selected);
  ForwardResult result;
  result.selected.assign(selected.begin(), selected.end());
  if (selected.empty()) return result;

  const nd::Tensor h = encode(w, ctx, a, selected, rng, phase, {});
  const nd::Tensor picked = nd::gather_rows(h, selected);
  nd::Tensor logits = nd::add_bias(nd::matmul(picked, w.out_weight), w.out_bias);
  const auto m = static_cast<std::size_t>(inst.domain_size());
  if (m < logits.cols()) logits = nd::slice_cols(logits, 0, m);
  for (double v : logits.values())
    if (std::isnan(v)) fail(ErrorKind::numeric_failure, "forward: NaN in output logits");

  nd::Tensor z = logits;
  if (w.config.sampler == Sampler::gumbel) {
    std::vector<double> noise(z.size());
    for (double& g : noise) {
      double u = uniform01(rng);
      while (u <= 0.0) u = uniform01(rng);
      g = -std::log(-std::log(u));
    }
    z = nd::add(z, nd::Tensor::from(z.shape(), std::move(noise)));
  }
  result.logits = logits;
  result.probs = nd::softmax(nd::scale(z, 1.0 / w.config.temperature), 1);
  return result;
}

int argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return static_cast<int>(best);
}

Assignment apply_update(const Assignment& a, std::span<const std::size_t> selected,
                        const nd::Tensor& probs) {
  Assignment next = a;
  if (selected.empty()) return next;
  if (!probs.defined() || probs.rows() != selected.size())
    fail(ErrorKind::shape_mismatch, "apply_update: one output row per selected variable");
  const std::size_t m = probs.cols();
  const auto v = probs.values();
  for (std::size_t k = 0; k < selected.size(); ++k) {
    if (selected[k] >= next.size())
      fail(ErrorKind::out_of_range, "apply_update: selected variable out of range");
    next[selected[k]] = argmax_row(v.subspan(k * m, m));
  }
  return next;
}

std::vector<nd::Tensor> attention_maps(const ModelWeights& w, const InstanceContext& ctx,
                                       const Assignment& a,
                                       std::span<const std::size_t> selected) {
  validate_assignment(ctx.instance(), a);
  check_selected(ctx.instance(), selected);
  nd::NoGradScope no_grad;
  std::vector<nd::Tensor> maps;
  Rng rng(0);
  encode(w, ctx, a, selected, rng, Phase::eval, {&maps});
  return maps;
}

}  // namespace refinecsp

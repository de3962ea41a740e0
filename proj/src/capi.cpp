#include "refinecsp.h"

#include <cstring>
#include <exception>
#include <string>

#include "refinecsp/csp.hpp"
#include "refinecsp/data.hpp"
#include "refinecsp/error.hpp"
#include "refinecsp/gradcheck.hpp"
#include "refinecsp/graph.hpp"
#include "refinecsp/model.hpp"
#include "refinecsp/solve.hpp"
#include "refinecsp/train.hpp"

using namespace refinecsp;

struct rcsp_graph {
  WeightedGraph g;
};
struct rcsp_instance {
  CspInstance inst;
};
struct rcsp_dataset {
  Dataset ds;
};
struct rcsp_model {
  Checkpoint ckpt;
};

namespace {

thread_local std::string g_last_error;

rcsp_status status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument: return RCSP_ERR_INVALID_ARGUMENT;
    case ErrorKind::shape_mismatch: return RCSP_ERR_SHAPE;
    case ErrorKind::out_of_range: return RCSP_ERR_OUT_OF_RANGE;
    case ErrorKind::numeric_failure: return RCSP_ERR_NUMERIC;
    case ErrorKind::io: return RCSP_ERR_IO;
    case ErrorKind::format: return RCSP_ERR_FORMAT;
    case ErrorKind::incompatible: return RCSP_ERR_INCOMPATIBLE;
  }
  return RCSP_ERR_INTERNAL;
}

template <typename F>
rcsp_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return RCSP_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RCSP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RCSP_ERR_INTERNAL;
  }
}

template <typename T>
void require(const T* p, const char* what) {
  if (p == nullptr) fail(ErrorKind::invalid_argument, std::string(what) + " is NULL");
}

Assignment assignment_of(const CspInstance& inst, const int* a, std::size_t n) {
  if (n != inst.variable_count())
    fail(ErrorKind::shape_mismatch, "assignment holds " + std::to_string(n) + " values, instance has " +
                                        std::to_string(inst.variable_count()) + " variables");
  if (n > 0) require(a, "assignment");
  Assignment out(a, a + n);
  validate_assignment(inst, out);
  return out;
}

ModelConfig to_cpp(const rcsp_model_config& c) {
  ModelConfig m;
  m.layers = c.layers;
  m.heads = c.heads;
  m.d_model = c.d_model;
  m.ffn_hidden = c.ffn_hidden;
  m.domain_size = c.domain_size;
  m.selection_p = c.selection_p;
  if (c.rpe < RCSP_RPE_MASKED || c.rpe > RCSP_RPE_NONE)
    fail(ErrorKind::invalid_argument, "unknown RPE mode");
  if (c.ape < RCSP_APE_NONE || c.ape > RCSP_APE_MULTI)
    fail(ErrorKind::invalid_argument, "unknown APE mode");
  if (c.sampler < RCSP_SAMPLER_GUMBEL || c.sampler > RCSP_SAMPLER_SOFTMAX)
    fail(ErrorKind::invalid_argument, "unknown sampler");
  m.rpe = static_cast<RpeMode>(c.rpe);
  m.ape = static_cast<ApeMode>(c.ape);
  m.sampler = static_cast<Sampler>(c.sampler);
  m.temperature = c.temperature;
  m.dropout = c.dropout;
  return m;
}

rcsp_model_config to_c(const ModelConfig& m) {
  rcsp_model_config c;
  c.layers = m.layers;
  c.heads = m.heads;
  c.d_model = m.d_model;
  c.ffn_hidden = m.ffn_hidden;
  c.domain_size = m.domain_size;
  c.selection_p = m.selection_p;
  c.rpe = static_cast<rcsp_rpe>(m.rpe);
  c.ape = static_cast<rcsp_ape>(m.ape);
  c.sampler = static_cast<rcsp_sampler>(m.sampler);
  c.temperature = m.temperature;
  c.dropout = m.dropout;
  return c;
}

TrainConfig to_cpp(const rcsp_train_config& c) {
  TrainConfig t;
  t.batch_size = c.batch_size;
  t.epochs = c.epochs;
  t.learning_rate = c.learning_rate;
  t.weight_decay = c.weight_decay;
  t.beta1 = c.beta1;
  t.beta2 = c.beta2;
  t.epsilon = c.epsilon;
  t.lambda_cardinality = c.lambda_cardinality;
  t.lambda_all_different = c.lambda_all_different;
  t.lambda_not_equal = c.lambda_not_equal;
  switch (c.transform) {
    case RCSP_TRANSFORM_DEFAULT: break;
    case RCSP_TRANSFORM_QUADRATIC: t.transform = PenaltyTransform::quadratic; break;
    case RCSP_TRANSFORM_IDENTITY: t.transform = PenaltyTransform::identity; break;
    default: fail(ErrorKind::invalid_argument, "unknown penalty transform");
  }
  t.seed = c.seed;
  if (c.grad_clip > 0.0) t.grad_clip = c.grad_clip;
  return t;
}

Budget budget_of(const rcsp_solve_options& o) {
  Budget b;
  if (o.max_iterations >= 0) b.max_iterations = o.max_iterations;
  if (o.time_limit_ms > 0.0) b.time_limit_ms = o.time_limit_ms;
  b.validate();
  return b;
}

void fill_report(const SolveReport& r, rcsp_solve_report* out, int* best, std::size_t n) {
  out->feasible = r.feasible ? 1 : 0;
  out->iterations = r.iterations;
  out->elapsed_ms = r.elapsed_ms;
  out->best_violation = r.best_violation;
  out->objective = r.objective;
  out->winner = r.winner;
  out->resamples = r.resamples;
  if (best) std::copy_n(r.best_assignment.begin(), std::min(n, r.best_assignment.size()), best);
}

const InstanceRecord& record_at(const rcsp_dataset* ds, std::size_t index) {
  require(ds, "dataset");
  if (index >= ds->ds.records.size())
    fail(ErrorKind::out_of_range, "record " + std::to_string(index) + " outside dataset of " +
                                      std::to_string(ds->ds.records.size()));
  return ds->ds.records[index];
}

}  // namespace

extern "C" {

const char* rcsp_version(void) { return "0.1.0"; }

const char* rcsp_last_error(void) { return g_last_error.c_str(); }

const char* rcsp_status_name(rcsp_status status) {
  switch (status) {
    case RCSP_OK: return "ok";
    case RCSP_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case RCSP_ERR_SHAPE: return "shape_mismatch";
    case RCSP_ERR_OUT_OF_RANGE: return "out_of_range";
    case RCSP_ERR_NUMERIC: return "numeric_failure";
    case RCSP_ERR_IO: return "io";
    case RCSP_ERR_FORMAT: return "format";
    case RCSP_ERR_INCOMPATIBLE: return "incompatible";
    case RCSP_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

uint64_t rcsp_derive_seed(uint64_t base, uint64_t stream) { return derive_seed(base, stream); }

rcsp_status rcsp_graph_create(size_t vertices, rcsp_graph** out) {
  return guarded([&] {
    require(out, "out");
    *out = new rcsp_graph{WeightedGraph(vertices)};
  });
}

void rcsp_graph_free(rcsp_graph* graph) { delete graph; }

rcsp_status rcsp_graph_add_edge(rcsp_graph* graph, size_t u, size_t v, double weight) {
  return guarded([&] {
    require(graph, "graph");
    graph->g.add_edge(u, v, weight);
  });
}

size_t rcsp_graph_vertex_count(const rcsp_graph* graph) { return graph ? graph->g.vertex_count() : 0; }

size_t rcsp_graph_edge_count(const rcsp_graph* graph) { return graph ? graph->g.edge_count() : 0; }

rcsp_status rcsp_graph_edge(const rcsp_graph* graph, size_t index, size_t* u, size_t* v,
                            double* weight) {
  return guarded([&] {
    require(graph, "graph");
    if (index >= graph->g.edge_count()) fail(ErrorKind::out_of_range, "edge index out of range");
    const auto& e = graph->g.edges()[index];
    if (u) *u = e.u;
    if (v) *v = e.v;
    if (weight) *weight = e.weight;
  });
}

rcsp_status rcsp_graph_erdos_renyi(size_t n, double p, uint64_t seed, rcsp_graph** out) {
  return guarded([&] {
    require(out, "out");
    Rng rng(seed);
    *out = new rcsp_graph{gen_erdos_renyi(n, p, rng)};
  });
}

rcsp_status rcsp_graph_barabasi_albert(size_t n, size_t m_attach, uint64_t seed, rcsp_graph** out) {
  return guarded([&] {
    require(out, "out");
    Rng rng(seed);
    *out = new rcsp_graph{gen_barabasi_albert(n, m_attach, rng)};
  });
}

rcsp_status rcsp_graph_geometric(size_t n, double radius, uint64_t seed, rcsp_graph** out) {
  return guarded([&] {
    require(out, "out");
    Rng rng(seed);
    *out = new rcsp_graph{gen_geometric(n, radius, rng)};
  });
}

rcsp_status rcsp_graph_load_gset(const char* path, rcsp_graph** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new rcsp_graph{load_gset(path)};
  });
}

rcsp_status rcsp_graph_save_gset(const rcsp_graph* graph, const char* path) {
  return guarded([&] {
    require(graph, "graph");
    require(path, "path");
    save_gset(graph->g, path);
  });
}

rcsp_status rcsp_graph_greedy_coloring(const rcsp_graph* graph, int* colors, int* colors_used) {
  return guarded([&] {
    require(graph, "graph");
    const GreedyColoring gc = greedy_coloring(graph->g);
    if (colors) std::copy(gc.colors.begin(), gc.colors.end(), colors);
    if (colors_used) *colors_used = gc.colors_used;
  });
}

rcsp_status rcsp_graph_cut_value(const rcsp_graph* graph, const int* sides, size_t n, double* cut) {
  return guarded([&] {
    require(graph, "graph");
    require(cut, "cut");
    if (n > 0) require(sides, "sides");
    *cut = cut_value(graph->g, Assignment(sides, sides + n));
  });
}

rcsp_status rcsp_instance_sudoku(const int* givens, rcsp_instance** out) {
  return guarded([&] {
    require(givens, "givens");
    require(out, "out");
    std::vector<std::optional<int>> cells(81);
    for (std::size_t i = 0; i < 81; ++i)
      if (givens[i] >= 0) cells[i] = givens[i];
    *out = new rcsp_instance{build_sudoku(cells)};
  });
}

rcsp_status rcsp_instance_coloring(const rcsp_graph* graph, int colors, rcsp_instance** out) {
  return guarded([&] {
    require(graph, "graph");
    require(out, "out");
    *out = new rcsp_instance{build_graph_coloring(graph->g, colors)};
  });
}

rcsp_status rcsp_instance_nurse(int days, int shifts, int per_shift, int nurses,
                                rcsp_instance** out) {
  return guarded([&] {
    require(out, "out");
    *out = new rcsp_instance{build_nurse_rostering(days, shifts, per_shift, nurses)};
  });
}

rcsp_status rcsp_instance_maxcut(const rcsp_graph* graph, rcsp_instance** out) {
  return guarded([&] {
    require(graph, "graph");
    require(out, "out");
    *out = new rcsp_instance{build_maxcut(graph->g)};
  });
}

void rcsp_instance_free(rcsp_instance* inst) { delete inst; }

size_t rcsp_instance_variable_count(const rcsp_instance* inst) {
  return inst ? inst->inst.variable_count() : 0;
}

int rcsp_instance_domain_size(const rcsp_instance* inst) { return inst ? inst->inst.domain_size() : 0; }

size_t rcsp_instance_constraint_count(const rcsp_instance* inst) {
  return inst ? inst->inst.constraints().size() : 0;
}

size_t rcsp_instance_fixed_count(const rcsp_instance* inst) { return inst ? inst->inst.fixed_count() : 0; }

int rcsp_instance_is_maximization(const rcsp_instance* inst) {
  return inst && inst->inst.mode() == Mode::maximization ? 1 : 0;
}

rcsp_status rcsp_instance_evaluate(const rcsp_instance* inst, const int* assignment, size_t n,
                                   rcsp_evaluation* out) {
  return guarded([&] {
    require(inst, "instance");
    require(out, "out");
    const Assignment a = assignment_of(inst->inst, assignment, n);
    out->feasible = is_feasible(inst->inst, a) ? 1 : 0;
    out->total_violation = total_violation(inst->inst, a);
    out->satisfied = satisfied_count(inst->inst, a);
    out->constraints = inst->inst.constraints().size();
  });
}

void rcsp_coloring_params_default(rcsp_coloring_params* params) {
  if (!params) return;
  const ColoringGenParams d;
  params->vertices = d.vertices;
  params->families = RCSP_FAMILY_ERDOS_RENYI | RCSP_FAMILY_BARABASI_ALBERT | RCSP_FAMILY_GEOMETRIC;
  params->er_p_min = d.er_p_min;
  params->er_p_max = d.er_p_max;
  params->ba_m_min = d.ba_m_min;
  params->ba_m_max = d.ba_m_max;
  params->geo_r_min = d.geo_r_min;
  params->geo_r_max = d.geo_r_max;
  params->colors_equal_greedy = 0;
  params->target_colors = 0;
}

rcsp_status rcsp_dataset_generate_coloring(size_t count, const rcsp_coloring_params* params,
                                           uint64_t seed, rcsp_dataset** out) {
  return guarded([&] {
    require(params, "params");
    require(out, "out");
    ColoringGenParams p;
    p.vertices = params->vertices;
    p.families.clear();
    if (params->families & RCSP_FAMILY_ERDOS_RENYI) p.families.push_back(GraphFamily::erdos_renyi);
    if (params->families & RCSP_FAMILY_BARABASI_ALBERT)
      p.families.push_back(GraphFamily::barabasi_albert);
    if (params->families & RCSP_FAMILY_GEOMETRIC) p.families.push_back(GraphFamily::geometric);
    p.er_p_min = params->er_p_min;
    p.er_p_max = params->er_p_max;
    p.ba_m_min = params->ba_m_min;
    p.ba_m_max = params->ba_m_max;
    p.geo_r_min = params->geo_r_min;
    p.geo_r_max = params->geo_r_max;
    p.colors_equal_greedy = params->colors_equal_greedy != 0;
    if (params->target_colors > 0) p.target_colors = params->target_colors;
    *out = new rcsp_dataset{gen_coloring_dataset(count, p, seed)};
  });
}

rcsp_status rcsp_dataset_generate_nurse(size_t count, int days, int shifts, int per_shift,
                                        int nurses, uint64_t seed, rcsp_dataset** out) {
  return guarded([&] {
    require(out, "out");
    *out = new rcsp_dataset{gen_nurse_dataset(count, days, shifts, per_shift, nurses, seed)};
  });
}

rcsp_status rcsp_dataset_generate_maxcut(size_t count, size_t vertices, double edge_p,
                                         uint64_t seed, rcsp_dataset** out) {
  return guarded([&] {
    require(out, "out");
    *out = new rcsp_dataset{gen_maxcut_dataset(count, vertices, edge_p, seed)};
  });
}

rcsp_status rcsp_dataset_generate_sudoku(size_t count, int missing, uint64_t seed,
                                         rcsp_dataset** out) {
  return guarded([&] {
    require(out, "out");
    *out = new rcsp_dataset{gen_sudoku_dataset(count, missing, seed)};
  });
}

rcsp_status rcsp_dataset_load(const char* dir, rcsp_dataset** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    *out = new rcsp_dataset{load_dataset(dir)};
  });
}

rcsp_status rcsp_dataset_load_sudoku(const char* path, rcsp_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new rcsp_dataset{load_sudoku(path)};
  });
}

rcsp_status rcsp_dataset_load_gset(const char* path, rcsp_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    WeightedGraph g = load_gset(path);
    Dataset ds;
    ds.problem = ProblemKind::maxcut;
    ds.records.push_back({build_maxcut(g), g, std::nullopt, 0, 0, {}, std::nullopt});
    ds.manifest.problem = ProblemKind::maxcut;
    ds.manifest.count = 1;
    ds.manifest.params = {{"source", std::filesystem::path(path).filename().string()}};
    *out = new rcsp_dataset{std::move(ds)};
  });
}

rcsp_status rcsp_dataset_save(const rcsp_dataset* ds, const char* dir) {
  return guarded([&] {
    require(ds, "dataset");
    require(dir, "dir");
    save_dataset(ds->ds, dir);
  });
}

rcsp_status rcsp_dataset_slice(const rcsp_dataset* ds, size_t begin, size_t end,
                               rcsp_dataset** out) {
  return guarded([&] {
    require(ds, "dataset");
    require(out, "out");
    if (begin > end || end > ds->ds.records.size())
      fail(ErrorKind::out_of_range, "slice bounds outside the dataset");
    Dataset part;
    part.problem = ds->ds.problem;
    part.records.assign(ds->ds.records.begin() + static_cast<std::ptrdiff_t>(begin),
                        ds->ds.records.begin() + static_cast<std::ptrdiff_t>(end));
    part.manifest = ds->ds.manifest;
    part.manifest.count = part.records.size();
    part.manifest.params.emplace_back("slice", std::to_string(begin) + ":" + std::to_string(end));
    const auto cut = [&](std::vector<int>& v) {
      if (v.size() == ds->ds.records.size())
        v = std::vector<int>(v.begin() + static_cast<std::ptrdiff_t>(begin),
                             v.begin() + static_cast<std::ptrdiff_t>(end));
    };
    cut(part.manifest.colors);
    cut(part.manifest.greedy_colors);
    *out = new rcsp_dataset{std::move(part)};
  });
}

void rcsp_dataset_free(rcsp_dataset* ds) { delete ds; }

size_t rcsp_dataset_size(const rcsp_dataset* ds) { return ds ? ds->ds.records.size() : 0; }

rcsp_problem rcsp_dataset_problem(const rcsp_dataset* ds) {
  return ds ? static_cast<rcsp_problem>(ds->ds.problem) : RCSP_PROBLEM_SUDOKU;
}

uint64_t rcsp_dataset_seed(const rcsp_dataset* ds) { return ds ? ds->ds.manifest.seed : 0; }

rcsp_status rcsp_dataset_record(const rcsp_dataset* ds, size_t index, rcsp_record_info* info) {
  return guarded([&] {
    require(info, "info");
    const InstanceRecord& r = record_at(ds, index);
    info->colors = r.colors;
    info->greedy_colors = r.greedy_colors;
    info->has_graph = r.graph ? 1 : 0;
    info->has_initial = r.initial ? 1 : 0;
  });
}

rcsp_status rcsp_dataset_instance(const rcsp_dataset* ds, size_t index, rcsp_instance** out) {
  return guarded([&] {
    require(out, "out");
    *out = new rcsp_instance{record_at(ds, index).instance};
  });
}

rcsp_status rcsp_dataset_graph(const rcsp_dataset* ds, size_t index, rcsp_graph** out) {
  return guarded([&] {
    require(out, "out");
    const InstanceRecord& r = record_at(ds, index);
    if (!r.graph) fail(ErrorKind::invalid_argument, "record carries no graph");
    *out = new rcsp_graph{*r.graph};
  });
}

void rcsp_model_config_default(rcsp_model_config* cfg) {
  if (cfg) *cfg = to_c(ModelConfig{});
}

rcsp_status rcsp_model_config_hash(const rcsp_model_config* cfg, uint64_t* hash) {
  return guarded([&] {
    require(cfg, "config");
    require(hash, "hash");
    *hash = config_hash(to_cpp(*cfg));
  });
}

rcsp_status rcsp_model_create(const rcsp_model_config* cfg, uint64_t seed, rcsp_model** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    const ModelConfig mc = to_cpp(*cfg);
    mc.validate();
    Rng rng(derive_seed(seed, 0xfeedULL));
    *out = new rcsp_model{Checkpoint{init_weights(mc, rng), std::nullopt, 0}};
  });
}

rcsp_status rcsp_model_load(const char* path, const rcsp_model_config* expected, rcsp_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    std::optional<ModelConfig> exp;
    if (expected) exp = to_cpp(*expected);
    *out = new rcsp_model{load_weights(path, exp)};
  });
}

rcsp_status rcsp_model_save(const rcsp_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    save_weights(model->ckpt, path);
  });
}

void rcsp_model_free(rcsp_model* model) { delete model; }

void rcsp_model_get_config(const rcsp_model* model, rcsp_model_config* cfg) {
  if (model && cfg) *cfg = to_c(model->ckpt.weights.config);
}

size_t rcsp_model_parameter_count(const rcsp_model* model) {
  return model ? model->ckpt.weights.parameter_count() : 0;
}

int64_t rcsp_model_epochs_done(const rcsp_model* model) { return model ? model->ckpt.epochs_done : 0; }

int64_t rcsp_model_optimizer_steps(const rcsp_model* model) {
  return model && model->ckpt.optimizer ? model->ckpt.optimizer->step : 0;
}

void rcsp_train_config_default(rcsp_train_config* cfg) {
  if (!cfg) return;
  const TrainConfig d;
  cfg->batch_size = d.batch_size;
  cfg->epochs = d.epochs;
  cfg->learning_rate = d.learning_rate;
  cfg->weight_decay = d.weight_decay;
  cfg->beta1 = d.beta1;
  cfg->beta2 = d.beta2;
  cfg->epsilon = d.epsilon;
  cfg->lambda_cardinality = d.lambda_cardinality;
  cfg->lambda_all_different = d.lambda_all_different;
  cfg->lambda_not_equal = d.lambda_not_equal;
  cfg->transform = RCSP_TRANSFORM_DEFAULT;
  cfg->seed = d.seed;
  cfg->grad_clip = 0.0;
}

rcsp_status rcsp_model_train(rcsp_model* model, const rcsp_dataset* ds,
                             const rcsp_train_config* cfg, rcsp_epoch_callback on_epoch,
                             void* user, rcsp_model** best_out) {
  return guarded([&] {
    require(model, "model");
    require(ds, "dataset");
    require(cfg, "config");
    const TrainConfig tc = to_cpp(*cfg);
    const auto instances = ds->ds.instances();
    EpochCallback cb;
    if (on_epoch) cb = [&](int e, double loss, double ms) { on_epoch(e, loss, ms, user); };
    Checkpoint& ck = model->ckpt;
    TrainResult r = train(instances, ck.weights.config, tc, cb, ck.weights.clone(), ck.optimizer,
                          static_cast<int>(ck.epochs_done));
    ck.weights = std::move(r.weights);
    ck.optimizer = std::move(r.optimizer);
    ck.epochs_done += tc.epochs;
    if (best_out) *best_out = new rcsp_model{Checkpoint{std::move(r.best_weights), std::nullopt, ck.epochs_done}};
  });
}

void rcsp_solve_options_default(rcsp_solve_options* opts) {
  if (!opts) return;
  opts->max_iterations = 1000;
  opts->time_limit_ms = 0.0;
  opts->pool = 1;
  opts->workers = 1;
  opts->seed = 0;
}

rcsp_status rcsp_solve(const rcsp_model* model, const rcsp_instance* inst,
                       const rcsp_solve_options* opts, rcsp_solve_report* report,
                       int* best_assignment, size_t n) {
  return guarded([&] {
    require(model, "model");
    require(inst, "instance");
    require(opts, "options");
    require(report, "report");
    if (best_assignment && n != inst->inst.variable_count())
      fail(ErrorKind::shape_mismatch, "best_assignment buffer size differs from variable count");
    const Budget b = budget_of(*opts);
    const SolveReport r =
        opts->pool == 1
            ? solve_from_random(model->ckpt.weights, inst->inst, b, opts->seed)
            : multi_start(model->ckpt.weights, inst->inst, opts->pool, b, opts->seed, false,
                          std::max(1, opts->workers));
    fill_report(r, report, best_assignment, n);
  });
}

rcsp_status rcsp_solve_from(const rcsp_model* model, const rcsp_instance* inst, const int* initial,
                            size_t n, const rcsp_solve_options* opts, rcsp_solve_report* report,
                            int* best_assignment) {
  return guarded([&] {
    require(model, "model");
    require(inst, "instance");
    require(opts, "options");
    require(report, "report");
    const Assignment a = assignment_of(inst->inst, initial, n);
    Rng rng(candidate_seed(opts->seed, 0));
    const SolveReport r = iterate(model->ckpt.weights, inst->inst, a, budget_of(*opts), rng);
    fill_report(r, report, best_assignment, n);
  });
}

rcsp_status rcsp_direct_sgd(const rcsp_instance* inst, int steps, double learning_rate,
                            uint64_t seed, rcsp_sgd_result* out) {
  return guarded([&] {
    require(inst, "instance");
    require(out, "out");
    Rng rng(seed);
    const DirectSgdResult r = direct_sgd_baseline(inst->inst, steps, learning_rate, rng);
    out->satisfied = r.satisfied;
    out->constraints = inst->inst.constraints().size();
    out->final_loss = r.final_loss;
  });
}

rcsp_status rcsp_gradcheck(uint64_t seed, double tolerance, rcsp_gradcheck_callback on_case,
                           void* user, int* failures) {
  return guarded([&] {
    if (!(tolerance > 0.0)) fail(ErrorKind::invalid_argument, "tolerance must be positive");
    int failed = 0;
    for (const auto& c : run_gradcheck_suite(seed, tolerance)) {
      if (!c.passed) ++failed;
      if (on_case) on_case(c.name.c_str(), c.points, c.max_relative_error, c.passed ? 1 : 0, user);
    }
    if (failures) *failures = failed;
  });
}

}  // extern "C"

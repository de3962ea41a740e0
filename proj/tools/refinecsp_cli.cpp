// refinecsp command-line tool. Links only against the C API.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "refinecsp.h"

namespace {

using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct Failure {
  int code;
  std::string message;
};

int exit_code_for(rcsp_status s) {
  switch (s) {
    case RCSP_OK: return kExitOk;
    case RCSP_ERR_INVALID_ARGUMENT:
    case RCSP_ERR_SHAPE:
    case RCSP_ERR_OUT_OF_RANGE: return kExitUsage;
    case RCSP_ERR_NUMERIC: return kExitNumeric;
    case RCSP_ERR_IO:
    case RCSP_ERR_FORMAT:
    case RCSP_ERR_INCOMPATIBLE: return kExitIo;
    case RCSP_ERR_INTERNAL: break;
  }
  return 1;
}

void check(rcsp_status s, const std::string& what) {
  if (s != RCSP_OK)
    throw Failure{exit_code_for(s), what + ": " + rcsp_status_name(s) + ": " + rcsp_last_error()};
}

[[noreturn]] void usage(const std::string& msg) { throw Failure{kExitUsage, msg}; }

struct GraphDel {
  void operator()(rcsp_graph* g) const { rcsp_graph_free(g); }
};
struct InstDel {
  void operator()(rcsp_instance* i) const { rcsp_instance_free(i); }
};
struct DataDel {
  void operator()(rcsp_dataset* d) const { rcsp_dataset_free(d); }
};
struct ModelDel {
  void operator()(rcsp_model* m) const { rcsp_model_free(m); }
};
using GraphPtr = std::unique_ptr<rcsp_graph, GraphDel>;
using InstPtr = std::unique_ptr<rcsp_instance, InstDel>;
using DataPtr = std::unique_ptr<rcsp_dataset, DataDel>;
using ModelPtr = std::unique_ptr<rcsp_model, ModelDel>;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

const char* problem_name(rcsp_problem p) {
  switch (p) {
    case RCSP_PROBLEM_SUDOKU: return "sudoku";
    case RCSP_PROBLEM_COLORING: return "coloring";
    case RCSP_PROBLEM_NURSE: return "nurse";
    case RCSP_PROBLEM_MAXCUT: return "maxcut";
  }
  return "?";
}

std::string default_data_dir() {
  const char* env = std::getenv("REFINECSP_DATA_DIR");
  return env && *env ? env : "data";
}

// Report sink: JSON lines by default, CSV with a header taken from the
// first record of each kind.
class Reporter {
 public:
  Reporter(const std::string& format, const std::string& path) : csv_(format == "csv") {
    if (format != "json" && format != "csv") usage("--format must be json or csv");
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw Failure{kExitIo, "cannot write report file " + path};
      out_ = &file_;
    }
  }

  void emit(const json& rec) {
    if (!csv_) {
      *out_ << rec.dump() << '\n';
      out_->flush();
      return;
    }
    const std::string kind = rec.value("record", "");
    std::string keys;
    for (const auto& [k, _] : rec.items()) keys += k + ",";
    if (headers_[kind] != keys) {
      headers_[kind] = keys;
      bool first = true;
      for (const auto& [k, _] : rec.items()) {
        *out_ << (first ? "" : ",") << k;
        first = false;
      }
      *out_ << '\n';
    }
    bool first = true;
    for (const auto& [_, v] : rec.items()) {
      *out_ << (first ? "" : ",") << (v.is_string() ? v.get<std::string>() : v.dump());
      first = false;
    }
    *out_ << '\n';
    out_->flush();
  }

 private:
  bool csv_;
  std::ofstream file_;
  std::ostream* out_ = &std::cout;
  std::map<std::string, std::string> headers_;
};

struct ReportOpts {
  std::string format = "json";
  std::string report;
};

void add_report_opts(CLI::App* cmd, ReportOpts& r) {
  cmd->add_option("--format", r.format, "Report format: json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  cmd->add_option("--report", r.report, "Report file (default stdout)");
}

struct DataSource {
  std::string dir;
  std::string sudoku;
  std::string gset;
};

void add_source_opts(CLI::App* cmd, DataSource& src) {
  cmd->add_option("--data", src.dir, "Dataset directory written by 'generate'");
  cmd->add_option("--sudoku-file", src.sudoku, "Text file with one 81-cell puzzle per line");
  cmd->add_option("--gset", src.gset, "GSET graph file (one MAXCUT instance)");
}

DataPtr load_source(const DataSource& src) {
  const int given = !src.dir.empty() + !src.sudoku.empty() + !src.gset.empty();
  if (given != 1) usage("exactly one of --data, --sudoku-file, --gset is required");
  rcsp_dataset* ds = nullptr;
  if (!src.dir.empty()) check(rcsp_dataset_load(src.dir.c_str(), &ds), "loading " + src.dir);
  if (!src.sudoku.empty())
    check(rcsp_dataset_load_sudoku(src.sudoku.c_str(), &ds), "loading " + src.sudoku);
  if (!src.gset.empty()) check(rcsp_dataset_load_gset(src.gset.c_str(), &ds), "loading " + src.gset);
  return DataPtr(ds);
}

InstPtr instance_at(const rcsp_dataset* ds, std::size_t i) {
  rcsp_instance* inst = nullptr;
  check(rcsp_dataset_instance(ds, i, &inst), "reading instance " + std::to_string(i));
  return InstPtr(inst);
}

// ---- generate ----

struct GenerateOpts {
  std::string problem;
  std::size_t count = 100;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t vertices = 50;
  std::vector<std::string> families{"er", "ba", "geo"};
  std::string k_rule = "clamped";
  int target_k = 0;
  int days = 10, shifts = 3, per_shift = 3, nurses = 10;
  double edge_p = 0.1;
  int missing = 40;
  ReportOpts rep;
};

int cmd_generate(const GenerateOpts& o) {
  if (o.problem.empty()) usage("--problem is required");
  const std::string out = o.out.empty() ? default_data_dir() + "/" + o.problem : o.out;
  rcsp_dataset* raw = nullptr;
  std::ostringstream canon;
  canon << "generate;" << o.problem << ';' << o.count;
  if (o.problem == "coloring") {
    rcsp_coloring_params p;
    rcsp_coloring_params_default(&p);
    p.vertices = o.vertices;
    p.families = 0;
    for (const auto& f : o.families) {
      if (f == "er") p.families |= RCSP_FAMILY_ERDOS_RENYI;
      else if (f == "ba") p.families |= RCSP_FAMILY_BARABASI_ALBERT;
      else if (f == "geo") p.families |= RCSP_FAMILY_GEOMETRIC;
      else usage("unknown graph family '" + f + "' (er, ba, geo)");
    }
    p.colors_equal_greedy = o.k_rule == "greedy";
    p.target_colors = o.target_k;
    canon << ';' << o.vertices << ';' << p.families << ';' << o.k_rule << ';' << o.target_k;
    check(rcsp_dataset_generate_coloring(o.count, &p, o.seed, &raw), "generating coloring");
  } else if (o.problem == "nurse") {
    canon << ';' << o.days << ';' << o.shifts << ';' << o.per_shift << ';' << o.nurses;
    check(rcsp_dataset_generate_nurse(o.count, o.days, o.shifts, o.per_shift, o.nurses, o.seed, &raw),
          "generating nurse rostering");
  } else if (o.problem == "maxcut") {
    canon << ';' << o.vertices << ';' << o.edge_p;
    check(rcsp_dataset_generate_maxcut(o.count, o.vertices, o.edge_p, o.seed, &raw),
          "generating maxcut");
  } else if (o.problem == "sudoku") {
    canon << ';' << o.missing;
    check(rcsp_dataset_generate_sudoku(o.count, o.missing, o.seed, &raw), "generating sudoku");
  } else {
    usage("unknown problem '" + o.problem + "' (sudoku, coloring, nurse, maxcut)");
  }
  DataPtr ds(raw);
  check(rcsp_dataset_save(ds.get(), out.c_str()), "writing " + out);

  Reporter rep(o.rep.format, o.rep.report);
  json summary;
  summary["record"] = "generate";
  summary["problem"] = o.problem;
  summary["count"] = rcsp_dataset_size(ds.get());
  summary["dir"] = out;
  if (o.problem == "coloring") {
    std::map<int, int> per_k;
    for (std::size_t i = 0; i < rcsp_dataset_size(ds.get()); ++i) {
      rcsp_record_info info;
      check(rcsp_dataset_record(ds.get(), i, &info), "reading record");
      ++per_k[info.colors];
    }
    json hist = json::object();
    for (const auto& [k, n] : per_k) hist[std::to_string(k)] = n;
    summary["k_histogram"] = hist;
  }
  summary["seed"] = o.seed;
  summary["config_hash"] = hex(fnv1a(canon.str()));
  rep.emit(summary);
  return kExitOk;
}

// ---- train ----

struct ModelOpts {
  int layers = 7, heads = 3, d_model = 128, ffn = 0, domain = 10;
  double p = 0.5, tau = 0.1, dropout = 0.1;
  std::string rpe = "masked", ape = "multi", sampler = "gumbel";
};

void add_model_opts(CLI::App* cmd, ModelOpts& m) {
  cmd->add_option("--layers", m.layers, "Transformer layers")->capture_default_str();
  cmd->add_option("--heads", m.heads, "Attention heads")->capture_default_str();
  cmd->add_option("--d-model", m.d_model, "Model width")->capture_default_str();
  cmd->add_option("--ffn", m.ffn, "FFN hidden width (0 = 4 * d-model)")->capture_default_str();
  cmd->add_option("--domain", m.domain, "Largest supported domain size")->capture_default_str();
  cmd->add_option("--p", m.p, "Subset selection probability")->capture_default_str();
  cmd->add_option("--tau", m.tau, "Sampling temperature")->capture_default_str();
  cmd->add_option("--dropout", m.dropout, "Dropout rate")->capture_default_str();
  cmd->add_option("--rpe", m.rpe, "Attention bias: masked, learned, none")
      ->check(CLI::IsMember({"masked", "learned", "none"}));
  cmd->add_option("--ape", m.ape, "Positional encoding: none, 1d, multi")
      ->check(CLI::IsMember({"none", "1d", "multi"}));
  cmd->add_option("--sampler", m.sampler, "Output sampler: gumbel, softmax")
      ->check(CLI::IsMember({"gumbel", "softmax"}));
}

rcsp_model_config to_config(const ModelOpts& m) {
  rcsp_model_config c;
  rcsp_model_config_default(&c);
  c.layers = m.layers;
  c.heads = m.heads;
  c.d_model = m.d_model;
  c.ffn_hidden = m.ffn;
  c.domain_size = m.domain;
  c.selection_p = m.p;
  c.temperature = m.tau;
  c.dropout = m.dropout;
  c.rpe = m.rpe == "learned" ? RCSP_RPE_LEARNED : m.rpe == "none" ? RCSP_RPE_NONE : RCSP_RPE_MASKED;
  c.ape = m.ape == "none" ? RCSP_APE_NONE : m.ape == "1d" ? RCSP_APE_1D : RCSP_APE_MULTI;
  c.sampler = m.sampler == "softmax" ? RCSP_SAMPLER_SOFTMAX : RCSP_SAMPLER_GUMBEL;
  return c;
}

std::string model_hash(const rcsp_model* m) {
  rcsp_model_config c;
  rcsp_model_get_config(m, &c);
  std::uint64_t h = 0;
  check(rcsp_model_config_hash(&c, &h), "hashing config");
  return hex(h);
}

struct TrainOpts {
  DataSource src;
  std::string out;
  std::string best_out;
  std::string resume;
  std::uint64_t seed = 0;
  int epochs = 5000;
  int batch = 512;
  double lr = 1e-4, wd = 0.01, clip = 0.0;
  double lambda_card = 1.0, lambda_ad = 1.0, lambda_ne = 1.0;
  ModelOpts model;
  ReportOpts rep;
};

struct EpochSink {
  Reporter* rep;
  std::uint64_t seed;
  std::string hash;
};

void on_epoch(int epoch, double loss, double ms, void* user) {
  auto* sink = static_cast<EpochSink*>(user);
  std::ostringstream line;
  line.precision(10);
  line << "epoch=" << epoch + 1 << " loss=" << loss << " time_ms=" << static_cast<long long>(ms)
       << " seed=" << sink->seed << " config_hash=" << sink->hash;
  std::cerr << line.str() << '\n';
  json rec;
  rec["record"] = "epoch";
  rec["epoch"] = epoch + 1;
  rec["loss"] = loss;
  rec["time_ms"] = ms;
  rec["seed"] = sink->seed;
  rec["config_hash"] = sink->hash;
  sink->rep->emit(rec);
}

int cmd_train(const TrainOpts& o) {
  if (o.out.empty()) usage("--out is required");
  DataPtr ds = load_source(o.src);
  ModelPtr model;
  rcsp_model* raw = nullptr;
  if (!o.resume.empty()) {
    check(rcsp_model_load(o.resume.c_str(), nullptr, &raw), "loading " + o.resume);
  } else {
    const rcsp_model_config cfg = to_config(o.model);
    check(rcsp_model_create(&cfg, o.seed, &raw), "creating model");
  }
  model.reset(raw);

  rcsp_train_config tc;
  rcsp_train_config_default(&tc);
  tc.epochs = o.epochs;
  tc.batch_size = o.batch;
  tc.learning_rate = o.lr;
  tc.weight_decay = o.wd;
  tc.grad_clip = o.clip;
  tc.lambda_cardinality = o.lambda_card;
  tc.lambda_all_different = o.lambda_ad;
  tc.lambda_not_equal = o.lambda_ne;
  tc.seed = o.seed;

  Reporter rep(o.rep.format, o.rep.report);
  EpochSink sink{&rep, o.seed, model_hash(model.get())};
  rcsp_model* best = nullptr;
  const auto t0 = std::chrono::steady_clock::now();
  check(rcsp_model_train(model.get(), ds.get(), &tc, on_epoch, &sink,
                         o.best_out.empty() ? nullptr : &best),
        "training");
  ModelPtr best_ptr(best);
  check(rcsp_model_save(model.get(), o.out.c_str()), "writing " + o.out);
  if (best_ptr) check(rcsp_model_save(best_ptr.get(), o.best_out.c_str()), "writing " + o.best_out);

  json rec;
  rec["record"] = "train";
  rec["instances"] = rcsp_dataset_size(ds.get());
  rec["epochs_done"] = rcsp_model_epochs_done(model.get());
  rec["optimizer_steps"] = rcsp_model_optimizer_steps(model.get());
  rec["parameters"] = rcsp_model_parameter_count(model.get());
  rec["weights"] = o.out;
  rec["time_ms"] =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  rec["seed"] = o.seed;
  rec["config_hash"] = sink.hash;
  rep.emit(rec);
  return kExitOk;
}

// ---- solve ----

struct SolveOpts {
  DataSource src;
  std::string weights;
  std::int64_t iters = 2000;
  double time_ms = 0.0;
  int pool = 1;
  int workers = 1;
  std::uint64_t seed = 0;
  std::size_t limit = 0;
  std::vector<double> best_known;
  ReportOpts rep;
};

int cmd_solve(const SolveOpts& o) {
  if (o.weights.empty()) usage("--weights is required");
  if (o.pool < 1) usage("--pool must be at least 1");
  if (o.workers < 1) usage("--workers must be at least 1");
  if (o.iters < 0 && o.time_ms <= 0.0) usage("a budget (--iters or --time-ms) is required");
  DataPtr ds = load_source(o.src);
  rcsp_model* raw = nullptr;
  check(rcsp_model_load(o.weights.c_str(), nullptr, &raw), "loading " + o.weights);
  ModelPtr model(raw);
  const std::string hash = model_hash(model.get());
  Reporter rep(o.rep.format, o.rep.report);

  const std::size_t total =
      o.limit > 0 ? std::min(o.limit, rcsp_dataset_size(ds.get())) : rcsp_dataset_size(ds.get());
  const bool maxcut = rcsp_dataset_problem(ds.get()) == RCSP_PROBLEM_MAXCUT;
  if (!o.best_known.empty() && o.best_known.size() != total)
    usage("--best-known needs one value per solved instance");
  std::size_t solved = 0;
  double iter_sum = 0.0, gap_sum = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    InstPtr inst = instance_at(ds.get(), i);
    rcsp_solve_options so;
    rcsp_solve_options_default(&so);
    so.max_iterations = o.iters;
    so.time_limit_ms = o.time_ms;
    so.pool = o.pool;
    so.workers = o.workers;
    so.seed = rcsp_derive_seed(o.seed, i);
    rcsp_solve_report r;
    check(rcsp_solve(model.get(), inst.get(), &so, &r, nullptr, 0),
          "solving instance " + std::to_string(i));
    solved += r.feasible ? 1 : 0;
    iter_sum += static_cast<double>(r.iterations);
    json rec;
    rec["record"] = "instance";
    rec["index"] = i;
    rec["feasible"] = r.feasible != 0;
    rec["iters"] = r.iterations;
    rec["ms"] = r.elapsed_ms;
    rec["violation"] = r.best_violation;
    rec["objective"] = r.objective;
    if (maxcut && !o.best_known.empty()) {
      const double gap = 100.0 * (o.best_known[i] - r.objective) / o.best_known[i];
      gap_sum += gap;
      rec["gap_pct"] = gap;
    }
    rec["winner"] = r.winner;
    rec["seed"] = so.seed;
    rec["base_seed"] = o.seed;
    rec["config_hash"] = hash;
    rep.emit(rec);
  }
  json sum;
  sum["record"] = "summary";
  sum["problem"] = problem_name(rcsp_dataset_problem(ds.get()));
  sum["instances"] = total;
  sum["solved"] = solved;
  const double pct = total ? 100.0 * static_cast<double>(solved) / static_cast<double>(total) : 0.0;
  sum["solved_pct"] = std::round(pct * 100.0) / 100.0;
  sum["mean_iters"] = total ? iter_sum / static_cast<double>(total) : 0.0;
  if (maxcut && !o.best_known.empty()) sum["mean_gap_pct"] = total ? gap_sum / static_cast<double>(total) : 0.0;
  sum["pool"] = o.pool;
  sum["seed"] = o.seed;
  sum["config_hash"] = hash;
  rep.emit(sum);
  return kExitOk;
}

// ---- baseline ----

struct BaselineOpts {
  DataSource src;
  std::string method = "greedy";
  int steps = 1000;
  double lr = 1.0;
  int runs = 1;
  std::uint64_t seed = 0;
  ReportOpts rep;
};

int cmd_baseline(const BaselineOpts& o) {
  DataPtr ds = load_source(o.src);
  Reporter rep(o.rep.format, o.rep.report);
  std::ostringstream canon;
  canon << "baseline;" << o.method << ';' << o.steps << ';' << o.lr << ';' << o.runs;
  const std::string hash = hex(fnv1a(canon.str()));
  const std::size_t n = rcsp_dataset_size(ds.get());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    json rec;
    rec["record"] = "instance";
    rec["index"] = i;
    if (o.method == "greedy") {
      rcsp_graph* g = nullptr;
      check(rcsp_dataset_graph(ds.get(), i, &g), "greedy baseline needs graph instances");
      GraphPtr graph(g);
      int used = 0;
      check(rcsp_graph_greedy_coloring(graph.get(), nullptr, &used), "greedy coloring");
      rcsp_record_info info;
      check(rcsp_dataset_record(ds.get(), i, &info), "reading record");
      rec["kprime"] = used;
      rec["k"] = info.colors;
      total += used;
    } else if (o.method == "sgd") {
      InstPtr inst = instance_at(ds.get(), i);
      double sat = 0.0;
      std::size_t constraints = 0;
      for (int run = 0; run < o.runs; ++run) {
        rcsp_sgd_result r;
        check(rcsp_direct_sgd(inst.get(), o.steps, o.lr, rcsp_derive_seed(rcsp_derive_seed(o.seed, i), run), &r),
              "direct SGD");
        sat += static_cast<double>(r.satisfied);
        constraints = r.constraints;
      }
      rec["satisfied"] = sat / o.runs;
      rec["constraints"] = constraints;
      total += sat / o.runs;
    } else {
      usage("unknown baseline '" + o.method + "' (greedy, sgd)");
    }
    rec["seed"] = o.seed;
    rec["config_hash"] = hash;
    rep.emit(rec);
  }
  json sum;
  sum["record"] = "summary";
  sum["method"] = o.method;
  sum["instances"] = n;
  sum[o.method == "greedy" ? "mean_kprime" : "mean_satisfied"] = n ? total / static_cast<double>(n) : 0.0;
  sum["seed"] = o.seed;
  sum["config_hash"] = hash;
  rep.emit(sum);
  return kExitOk;
}

// ---- gradcheck ----

struct GradcheckOpts {
  std::uint64_t seed = 0;
  double tol = 1e-4;
  ReportOpts rep;
};

struct CaseSink {
  Reporter* rep;
  std::uint64_t seed;
  std::string hash;
};

void on_case(const char* name, size_t points, double err, int passed, void* user) {
  auto* sink = static_cast<CaseSink*>(user);
  json rec;
  rec["record"] = "gradcheck";
  rec["case"] = name;
  rec["points"] = points;
  rec["max_relative_error"] = err;
  rec["passed"] = passed != 0;
  rec["seed"] = sink->seed;
  rec["config_hash"] = sink->hash;
  sink->rep->emit(rec);
}

int cmd_gradcheck(const GradcheckOpts& o) {
  Reporter rep(o.rep.format, o.rep.report);
  std::ostringstream canon;
  canon << "gradcheck;" << o.tol;
  CaseSink sink{&rep, o.seed, hex(fnv1a(canon.str()))};
  int failures = 0;
  check(rcsp_gradcheck(o.seed, o.tol, on_case, &sink, &failures), "gradient check");
  json sum;
  sum["record"] = "summary";
  sum["failures"] = failures;
  sum["seed"] = o.seed;
  sum["config_hash"] = sink.hash;
  rep.emit(sum);
  return failures == 0 ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative CSP refinement: generate, train, solve, baselines"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rcsp_version()));

  GenerateOpts gen;
  auto* g = app.add_subcommand("generate", "Generate a dataset directory");
  g->add_option("--problem", gen.problem, "sudoku, coloring, nurse or maxcut");
  g->add_option("--count", gen.count, "Number of instances")->capture_default_str();
  g->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory (default $REFINECSP_DATA_DIR/<problem>)");
  g->add_option("--n", gen.vertices, "Vertices per graph (coloring, maxcut)")->capture_default_str();
  g->add_option("--families", gen.families, "Graph families for coloring: er ba geo")
      ->delimiter(',');
  g->add_option("--k-rule", gen.k_rule, "clamped: k = max(3, min(10, k'-1)); greedy: k = k'")
      ->check(CLI::IsMember({"clamped", "greedy"}));
  g->add_option("--target-k", gen.target_k, "Keep only instances with this k");
  g->add_option("--days", gen.days)->capture_default_str();
  g->add_option("--shifts", gen.shifts)->capture_default_str();
  g->add_option("--per-shift", gen.per_shift)->capture_default_str();
  g->add_option("--nurses", gen.nurses)->capture_default_str();
  g->add_option("--edge-p", gen.edge_p, "MAXCUT edge probability")->capture_default_str();
  g->add_option("--missing", gen.missing, "Blank cells per Sudoku")->capture_default_str();
  add_report_opts(g, gen.rep);

  TrainOpts tr;
  auto* t = app.add_subcommand("train", "Train a refinement model");
  add_source_opts(t, tr.src);
  t->add_option("--out", tr.out, "Checkpoint written after the last epoch");
  t->add_option("--best-out", tr.best_out, "Weights of the lowest-loss epoch");
  t->add_option("--resume", tr.resume, "Continue from this checkpoint");
  t->add_option("--seed", tr.seed, "Training seed")->capture_default_str();
  t->add_option("--epochs", tr.epochs)->capture_default_str();
  t->add_option("--batch", tr.batch)->capture_default_str();
  t->add_option("--lr", tr.lr)->capture_default_str();
  t->add_option("--weight-decay", tr.wd)->capture_default_str();
  t->add_option("--grad-clip", tr.clip, "Global norm clip (0 disables)")->capture_default_str();
  t->add_option("--lambda-cardinality", tr.lambda_card)->capture_default_str();
  t->add_option("--lambda-alldiff", tr.lambda_ad)->capture_default_str();
  t->add_option("--lambda-notequal", tr.lambda_ne)->capture_default_str();
  add_model_opts(t, tr.model);
  add_report_opts(t, tr.rep);

  SolveOpts so;
  auto* s = app.add_subcommand("solve", "Solve instances with a trained model");
  add_source_opts(s, so.src);
  s->add_option("--weights", so.weights, "Checkpoint to load");
  s->add_option("--iters", so.iters, "Iteration budget per instance (-1: none)")
      ->capture_default_str();
  s->add_option("--time-ms", so.time_ms, "Wall-clock budget per instance (0: none)");
  s->add_option("--pool", so.pool, "Multi-start pool size")->capture_default_str();
  s->add_option("--workers", so.workers, "Threads stepping pool candidates")->capture_default_str();
  s->add_option("--seed", so.seed)->capture_default_str();
  s->add_option("--limit", so.limit, "Solve only the first N instances");
  s->add_option("--best-known", so.best_known, "MAXCUT reference cuts for gap reporting")
      ->delimiter(',');
  add_report_opts(s, so.rep);

  BaselineOpts bo;
  auto* b = app.add_subcommand("baseline", "Run a non-neural baseline");
  add_source_opts(b, bo.src);
  b->add_option("--method", bo.method, "greedy or sgd")->check(CLI::IsMember({"greedy", "sgd"}));
  b->add_option("--steps", bo.steps, "Direct SGD steps")->capture_default_str();
  b->add_option("--lr", bo.lr, "Direct SGD learning rate")->capture_default_str();
  b->add_option("--runs", bo.runs, "Direct SGD restarts averaged per instance")
      ->capture_default_str();
  b->add_option("--seed", bo.seed)->capture_default_str();
  add_report_opts(b, bo.rep);

  GradcheckOpts gc;
  auto* c = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  c->add_option("--seed", gc.seed)->capture_default_str();
  c->add_option("--tol", gc.tol, "Relative error tolerance")->capture_default_str();
  add_report_opts(c, gc.rep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*t) return cmd_train(tr);
    if (*s) return cmd_solve(so);
    if (*b) return cmd_baseline(bo);
    if (*c) return cmd_gradcheck(gc);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.code;
  }
  return kExitUsage;
}

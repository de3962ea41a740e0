#include "refinecsp/solve.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <limits>
#include <thread>
#include <variant>

#include "refinecsp/error.hpp"
#include "refinecsp/penalty.hpp"
#include "refinecsp/train.hpp"

namespace refinecsp {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

bool budget_left(const Budget& b, std::int64_t iters, Clock::time_point t0) {
  if (b.max_iterations && iters >= *b.max_iterations) return false;
  if (b.time_limit_ms && ms_since(t0) >= *b.time_limit_ms) return false;
  return true;
}

// Per-candidate search state shared by iterate and multi_start.
struct Candidate {
  Rng rng;
  Assignment current;
  Assignment best;
  int best_violation = 0;
  double best_cut = 0.0;
  int resamples = 0;
  std::vector<int> violation_trace;
  std::vector<double> objective_trace;
};

class Stepper {
 public:
  Stepper(const ModelWeights& w, const CspInstance& inst, bool trace)
      : w_(w), inst_(inst), ctx_(w.config, inst), trace_(trace) {}

  void start(Candidate& c) const {
    validate_assignment(inst_, c.current);
    c.best = c.current;
    c.best_violation = total_violation(inst_, c.current);
    if (maximize()) c.best_cut = cut_value(inst_, c.current);
    record(c, c.best_violation);
  }

  void step(Candidate& c) const {
    const SubsetDraw draw = select_subset(inst_, w_.config.selection_p, c.rng);
    c.resamples += draw.resamples;
    const ForwardResult out = forward(w_, ctx_, c.current, draw.selected, c.rng, Phase::eval);
    c.current = apply_update(c.current, out.selected, out.probs);
    const int violation = total_violation(inst_, c.current);
    if (maximize()) {
      const double cut = cut_value(inst_, c.current);
      if (cut > c.best_cut) {
        c.best_cut = cut;
        c.best = c.current;
        c.best_violation = violation;
      }
    } else if (violation < c.best_violation) {
      c.best_violation = violation;
      c.best = c.current;
    }
    record(c, violation);
  }

  bool maximize() const { return inst_.mode() == Mode::maximization; }
  bool solved(const Candidate& c) const { return !maximize() && c.best_violation == 0; }
  bool frozen() const { return inst_.fixed_count() == inst_.variable_count(); }

 private:
  void record(Candidate& c, int violation) const {
    if (!trace_) return;
    c.violation_trace.push_back(violation);
    if (maximize()) c.objective_trace.push_back(c.best_cut);
  }

  const ModelWeights& w_;
  const CspInstance& inst_;
  InstanceContext ctx_;
  bool trace_;
};

void step_round(const Stepper& stepper, std::vector<Candidate>& cands, int workers) {
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(workers), cands.size());
  if (threads <= 1) {
    for (auto& cand : cands) stepper.step(cand);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        nd::NoGradScope no_grad;
        for (std::size_t c = t; c < cands.size(); c += threads) stepper.step(cands[c]);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

SolveReport make_report(const Candidate& c, const CspInstance& inst, std::int64_t iters,
                        Clock::time_point t0, int winner) {
  SolveReport r;
  r.iterations = iters;
  r.final_assignment = c.current;
  r.best_assignment = c.best;
  r.best_violation = c.best_violation;
  r.feasible = is_feasible(inst, c.best);
  r.objective = inst.mode() == Mode::maximization ? c.best_cut : 0.0;
  r.winner = winner;
  r.resamples = c.resamples;
  r.violation_trace = c.violation_trace;
  r.objective_trace = c.objective_trace;
  r.elapsed_ms = ms_since(t0);
  return r;
}

}  // namespace

void Budget::validate() const {
  if (!max_iterations && !time_limit_ms)
    fail(ErrorKind::invalid_argument, "budget needs an iteration limit or a time limit");
  if (max_iterations && *max_iterations < 0)
    fail(ErrorKind::invalid_argument, "iteration limit must be non-negative");
  if (time_limit_ms && !(*time_limit_ms > 0.0))
    fail(ErrorKind::invalid_argument, "time limit must be positive");
}

double cut_value(const WeightedGraph& graph, const Assignment& a) {
  if (a.size() != graph.vertex_count())
    fail(ErrorKind::invalid_argument, "cut_value: one side per vertex required");
  double cut = 0.0;
  for (const auto& e : graph.edges())
    if (a[e.u] != a[e.v]) cut += e.weight;
  return cut;
}

double cut_value(const CspInstance& inst, const Assignment& a) {
  double cut = 0.0;
  for (const auto& c : inst.constraints())
    if (const auto* ne = std::get_if<NotEqual>(&c))
      if (a[ne->i] != a[ne->k]) cut += ne->weight;
  return cut;
}

std::uint64_t candidate_seed(std::uint64_t base, int index) {
  return derive_seed(base, static_cast<std::uint64_t>(index));
}

SolveReport iterate(const ModelWeights& w, const CspInstance& inst, const Assignment& init,
                    const Budget& budget, Rng& rng, bool trace) {
  budget.validate();
  const auto t0 = Clock::now();
  nd::NoGradScope no_grad;
  Stepper stepper(w, inst, trace);
  Candidate c{rng, init, {}, 0, 0.0, 0, {}, {}};
  stepper.start(c);
  std::int64_t iters = 0;
  if (!stepper.frozen()) {
    while (!stepper.solved(c) && budget_left(budget, iters, t0)) {
      stepper.step(c);
      ++iters;
    }
  }
  rng = c.rng;
  return make_report(c, inst, iters, t0, 0);
}

SolveReport multi_start(const ModelWeights& w, const CspInstance& inst, int pool,
                        const Budget& budget, std::uint64_t seed, bool trace, int workers) {
  if (pool < 1) fail(ErrorKind::invalid_argument, "pool size must be at least 1");
  if (workers < 1) fail(ErrorKind::invalid_argument, "worker count must be at least 1");
  budget.validate();
  const auto t0 = Clock::now();
  nd::NoGradScope no_grad;
  Stepper stepper(w, inst, trace);
  std::vector<Candidate> cands;
  cands.reserve(static_cast<std::size_t>(pool));
  for (int c = 0; c < pool; ++c) {
    Candidate cand{Rng(candidate_seed(seed, c)), {}, {}, 0, 0.0, 0, {}, {}};
    cand.current = random_assignment(inst, cand.rng);
    stepper.start(cand);
    cands.push_back(std::move(cand));
  }

  const auto first_solved = [&]() -> int {
    for (std::size_t c = 0; c < cands.size(); ++c)
      if (stepper.solved(cands[c])) return static_cast<int>(c);
    return -1;
  };
  const auto best_cut_index = [&]() {
    int best = 0;
    for (std::size_t c = 1; c < cands.size(); ++c)
      if (cands[c].best_cut > cands[static_cast<std::size_t>(best)].best_cut)
        best = static_cast<int>(c);
    return best;
  };

  std::int64_t rounds = 0;
  int winner = first_solved();
  if (!stepper.frozen()) {
    while (winner < 0 && budget_left(budget, rounds, t0)) {
      step_round(stepper, cands, workers);
      ++rounds;
      winner = first_solved();
    }
  }
  if (winner < 0) {
    if (stepper.maximize()) {
      winner = best_cut_index();
    } else {
      winner = 0;
      for (std::size_t c = 1; c < cands.size(); ++c)
        if (cands[c].best_violation < cands[static_cast<std::size_t>(winner)].best_violation)
          winner = static_cast<int>(c);
    }
  }
  return make_report(cands[static_cast<std::size_t>(winner)], inst, rounds, t0, winner);
}

SolveReport solve_from_random(const ModelWeights& w, const CspInstance& inst,
                              const Budget& budget, std::uint64_t seed, bool trace) {
  Rng rng(candidate_seed(seed, 0));
  const Assignment init = random_assignment(inst, rng);
  return iterate(w, inst, init, budget, rng, trace);
}

GreedyColoring greedy_coloring(const WeightedGraph& graph) {
  const auto adj = graph.adjacency();
  const std::size_t n = graph.vertex_count();
  GreedyColoring out;
  out.colors.assign(n, -1);
  std::vector<char> taken;
  for (std::size_t v = 0; v < n; ++v) {
    taken.assign(adj[v].size() + 1, 0);
    for (auto u : adj[v]) {
      const int c = out.colors[u];
      if (c >= 0 && static_cast<std::size_t>(c) < taken.size()) taken[static_cast<std::size_t>(c)] = 1;
    }
    int color = 0;
    while (taken[static_cast<std::size_t>(color)]) ++color;
    out.colors[v] = color;
    out.colors_used = std::max(out.colors_used, color + 1);
  }
  return out;
}

Assignment random_update_step(const CspInstance& inst, const Assignment& a, double p, Rng& rng) {
  const SubsetDraw draw = select_subset(inst, p, rng);
  Assignment next = a;
  std::uniform_int_distribution<int> dist(0, inst.domain_size() - 1);
  for (auto v : draw.selected) next[v] = dist(rng);
  return next;
}

DirectSgdResult direct_sgd_baseline(const CspInstance& inst, int steps, double lr, Rng& rng) {
  if (inst.mode() != Mode::satisfaction)
    fail(ErrorKind::invalid_argument, "direct SGD baseline needs a satisfaction instance");
  if (steps < 0 || !(lr > 0.0))
    fail(ErrorKind::invalid_argument, "direct SGD needs steps >= 0 and lr > 0");
  const std::size_t n = inst.variable_count();
  const auto m = static_cast<std::size_t>(inst.domain_size());
  std::vector<std::size_t> free_vars;
  for (std::size_t i = 0; i < n; ++i)
    if (!inst.fixed(i)) free_vars.push_back(i);

  // Start from a random assignment of the free cells, encoded as logits.
  const Assignment start = random_assignment(inst, rng);
  DirectSgdResult result;
  result.assignment = start;
  if (free_vars.empty() || inst.constraints().empty()) {
    result.satisfied = satisfied_count(inst, start);
    return result;
  }
  std::normal_distribution<double> jitter(0.0, 0.01);
  std::vector<double> init(free_vars.size() * m);
  for (std::size_t k = 0; k < free_vars.size(); ++k)
    for (std::size_t j = 0; j < m; ++j)
      init[k * m + j] = (static_cast<int>(j) == start[free_vars[k]] ? 1.0 : 0.0) + jitter(rng);
  nd::Tensor logits = nd::Tensor::parameter({free_vars.size(), m}, std::move(init));
  const LossConfig loss_cfg = default_loss_config(inst);

  const auto relaxed = [&](const nd::Tensor& z) {
    return assemble_relaxed(start, free_vars, nd::softmax(z, 1), inst.domain_size());
  };
  for (int s = 0; s < steps; ++s) {
    logits.zero_grad();
    nd::Tape tape;
    nd::TapeScope scope(tape);
    const nd::Tensor loss = total_loss(inst, relaxed(logits), loss_cfg);
    result.final_loss = loss.item();
    tape.backward(loss);
    auto values = logits.mutable_values();
    const auto grad = logits.grad();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr * grad[i];
  }
  Assignment rounded = start;
  const auto z = logits.values();
  for (std::size_t k = 0; k < free_vars.size(); ++k)
    rounded[free_vars[k]] = argmax_row(z.subspan(k * m, m));
  result.assignment = rounded;
  result.satisfied = satisfied_count(inst, rounded);
  return result;
}

}  // namespace refinecsp

#pragma once

// Stage 1: single-agent stochastic subgradient steps, then one full step.

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sepopt/dual_subgradient.hpp"
#include "sepopt/ledger.hpp"
#include "sepopt/problem.hpp"
#include "sepopt/rng.hpp"
#include "sepopt/trace.hpp"

namespace sepopt {

struct SsgOptions {
  /// Every stride sampled steps, d(lambda_t) is evaluated for the trace. These
  /// calls are counted in eval_calls, never in oracle_calls. 0 disables them.
  std::size_t trace_stride = 0;
  IterateObserver observer;
  /// Replaces the sampled agent sequence (length T - 1); for replay tests.
  std::optional<std::vector<std::size_t>> scripted_indices;
  /// Evaluate d(lambda_bar) at the end (N handoff calls).
  bool evaluate_d_bar = true;
};

struct SsgRunResult {
  Vec lambda_bar;   ///< (1/T) sum_{t<T} lambda_t
  Vec lambda_last;  ///< lambda_T
  /// Per agent the atoms seen at its sampled steps plus the final-step atom,
  /// each occurrence weighted 1/(I_i + 1); identical points merged.
  AtomLedger ledger;
  std::vector<std::size_t> counts;  ///< I_i, sampled occurrences excluding the final step
  std::vector<OracleAtom> final_atoms;  ///< x_i*(lambda_{T-1}) from the full step
  std::optional<double> d_bar_value;
  std::optional<std::vector<Vec>> x_bar;
  RunTrace trace;
  std::uint64_t seed = 0;
  std::uint64_t oracle_calls = 0;   ///< (T - 1) + N
  std::uint64_t handoff_calls = 0;  ///< N when d(lambda_bar) was evaluated
  std::uint64_t eval_calls = 0;     ///< trace-only evaluations
  double best_dual = -std::numeric_limits<double>::infinity();
  double primal_cost = 0.0;
  Vec residual;
};

inline SsgRunResult run_stochastic_dual_subgradient(const Instance& inst, std::size_t T, const StepSchedule& schedule,
                                                    const Vec& lambda0, std::uint64_t seed,
                                                    const SsgOptions& opts = {}) {
  if (T < 2) throw std::invalid_argument("stochastic dual subgradient needs T >= 2");
  check_lambda0(inst, lambda0);
  if (opts.scripted_indices && opts.scripted_indices->size() != T - 1)
    throw std::invalid_argument("scripted indices must have length T - 1");
  const std::size_t n = inst.num_agents();
  const std::size_t m = inst.num_rows();

  SsgRunResult out;
  out.seed = seed;
  out.ledger.resize(n);
  out.counts.assign(n, 0);
  Rng rng(seed);
  OracleCounter counter, eval_counter;
  Vec lambda = lambda0;
  Vec lambda_sum(m, 0.0);
  const Vec& b = inst.b();

  for (std::size_t t = 0; t + 1 < T; ++t) {
    if (opts.observer) opts.observer(t, lambda);
    axpy(1.0, lambda, lambda_sum);
    std::size_t i = 0;
    if (opts.scripted_indices) {
      i = (*opts.scripted_indices)[t];
      if (i >= n) throw std::out_of_range("scripted agent index out of range");
    } else {
      i = static_cast<std::size_t>(rng.uniform_index(n));
    }
    OracleAtom atom = inst.call(i, OracleQuery{1.0, lambda}, counter);
    const double alpha = schedule.alpha(t, T);
    for (std::size_t j = 0; j < m; ++j) lambda[j] += alpha * (atom.coupling[j] - b[j]);
    project_nonneg_inplace(lambda);
    ++out.counts[i];
    out.ledger[i].add(1.0, std::move(atom));

    if (opts.trace_stride > 0 && (t + 1) % opts.trace_stride == 0) {
      const DualEvaluation ev = dual_value(inst, lambda, eval_counter);
      out.best_dual = std::max(out.best_dual, ev.value);
      TraceRecord r;
      r.oracle_calls = counter.calls;
      r.phase = Phase::ssg;
      r.dual_value = ev.value;
      out.trace.push(std::move(r));
    }
  }

  // Final deterministic step at lambda_{T-1}: every agent gets at least one atom.
  const std::size_t t_last = T - 1;
  if (opts.observer) opts.observer(t_last, lambda);
  axpy(1.0, lambda, lambda_sum);
  DualEvaluation full = dual_value(inst, lambda, counter);
  out.best_dual = std::max(out.best_dual, full.value);
  const double alpha = schedule.alpha(t_last, T);
  for (std::size_t j = 0; j < m; ++j) lambda[j] += alpha * full.subgradient[j];
  project_nonneg_inplace(lambda);
  if (opts.observer) opts.observer(T, lambda);
  out.final_atoms = full.minimizers;
  for (std::size_t i = 0; i < n; ++i) out.ledger[i].add(1.0, std::move(full.minimizers[i]));
  for (std::size_t i = 0; i < n; ++i) out.ledger[i].scale_weights(1.0 / static_cast<double>(out.counts[i] + 1));

  out.lambda_bar = lambda_sum;
  scale(1.0 / static_cast<double>(T), out.lambda_bar);
  out.lambda_last = std::move(lambda);
  out.oracle_calls = counter.calls;

  const LiftedPoint lp = ledger_sum(out.ledger, m);
  out.primal_cost = lp.beta;
  out.residual = subtract(lp.z, b);
  {
    TraceRecord r;
    r.oracle_calls = counter.calls;
    r.phase = Phase::ssg;
    r.dual_value = full.value;
    r.infeasibility = plus_norm(out.residual);
    r.primal_cost = lp.beta;
    out.trace.push(std::move(r));
  }

  if (opts.evaluate_d_bar) {
    OracleCounter handoff;
    const DualEvaluation ev = dual_value(inst, out.lambda_bar, handoff);
    out.d_bar_value = ev.value;
    out.best_dual = std::max(out.best_dual, ev.value);
    out.handoff_calls = handoff.calls;
    TraceRecord r;
    r.oracle_calls = counter.calls + handoff.calls;
    r.phase = Phase::handoff;
    r.dual_value = ev.value;
    r.infeasibility = plus_norm(out.residual);
    r.primal_cost = lp.beta;
    out.trace.push(std::move(r));
  }
  out.eval_calls = eval_counter.calls;

  if (inst.all_domains_convex()) {
    std::vector<Vec> xs;
    xs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) xs.push_back(inst.agent(i).snap_to_domain(out.ledger[i].mean_point()));
    out.x_bar = std::move(xs);
  }
  return out;
}

}  // namespace sepopt

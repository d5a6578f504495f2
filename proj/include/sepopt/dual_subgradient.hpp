#pragma once

// Deterministic projected subgradient ascent on the dual, with averaged dual
// and primal outputs.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sepopt/ledger.hpp"
#include "sepopt/problem.hpp"
#include "sepopt/trace.hpp"

namespace sepopt {

struct StepSchedule {
  enum class Kind { constant, diminishing };

  Kind kind = Kind::constant;
  double Lambda = 1.0;
  double G_hat = 1.0;

  /// alpha = Lambda / (G_hat sqrt(T)) at every step.
  static StepSchedule constant(double Lambda, double G_hat) {
    if (!(Lambda > 0.0) || !(G_hat > 0.0)) throw std::invalid_argument("constant schedule needs Lambda > 0 and G_hat > 0");
    return {Kind::constant, Lambda, G_hat};
  }
  /// alpha_t = Lambda / sqrt(t + 1), t counted from zero.
  static StepSchedule diminishing(double Lambda) {
    if (!(Lambda > 0.0)) throw std::invalid_argument("diminishing schedule needs Lambda > 0");
    return {Kind::diminishing, Lambda, 1.0};
  }

  double alpha(std::size_t t, std::size_t T) const {
    if (kind == Kind::constant) return Lambda / (G_hat * std::sqrt(static_cast<double>(T)));
    return Lambda / std::sqrt(static_cast<double>(t + 1));
  }

  std::string name() const { return kind == Kind::constant ? "constant" : "diminishing"; }
};

/// Called with (t, lambda_t) for t = 0..T.
using IterateObserver = std::function<void(std::size_t, const Vec&)>;

struct SubgradOptions {
  std::size_t trace_stride = 1;  ///< record every stride iterations (the last one always)
  IterateObserver observer;
};

struct SubgradRunResult {
  Vec lambda_bar;   ///< (1/T) sum_{t<T} lambda_t
  Vec lambda_last;  ///< lambda_T
  AtomLedger ledger;  ///< per-agent atoms with weight 1/T per occurrence
  std::optional<std::vector<Vec>> x_bar;  ///< averaged points, convex domains only
  RunTrace trace;
  std::uint64_t oracle_calls = 0;
  double best_dual = -std::numeric_limits<double>::infinity();  ///< max_t d(lambda_t)
  double primal_cost = 0.0;  ///< (1/N) sum_i of ledger mean costs
  Vec residual;              ///< (1/N) sum_i ledger mean couplings - b
};

inline void check_lambda0(const Instance& inst, const Vec& lambda0) {
  if (lambda0.size() != inst.num_rows()) throw std::invalid_argument("lambda0 has wrong size");
  if (!all_nonneg(lambda0)) throw std::invalid_argument("lambda0 must be nonnegative");
}

/// T full-subgradient steps lambda_{t+1} = [lambda_t + alpha_t g_t]_+; exactly N T oracle calls.
/// d(lambda_t) is a by-product of each step, so the trace costs no extra calls.
inline SubgradRunResult run_dual_subgradient(const Instance& inst, std::size_t T, const StepSchedule& schedule,
                                             const Vec& lambda0, const SubgradOptions& opts = {}) {
  if (T < 1) throw std::invalid_argument("dual subgradient needs T >= 1");
  check_lambda0(inst, lambda0);
  const std::size_t n = inst.num_agents();
  const std::size_t m = inst.num_rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  SubgradRunResult out;
  out.ledger.resize(n);
  OracleCounter counter;
  Vec lambda = lambda0;
  Vec lambda_sum(m, 0.0);
  Vec coupling_sum(m, 0.0);  // sum over t of (1/N) sum_i A_i x_i(lambda_t)
  double cost_sum = 0.0;

  for (std::size_t t = 0; t < T; ++t) {
    if (opts.observer) opts.observer(t, lambda);
    axpy(1.0, lambda, lambda_sum);
    DualEvaluation ev = dual_value(inst, lambda, counter);
    out.best_dual = std::max(out.best_dual, ev.value);

    double step_cost = 0.0;
    Vec step_coupling(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      step_cost += ev.minimizers[i].cost;
      axpy(1.0, ev.minimizers[i].coupling, step_coupling);
      out.ledger[i].add(1.0, std::move(ev.minimizers[i]));
    }
    cost_sum += inv_n * step_cost;
    axpy(inv_n, step_coupling, coupling_sum);

    const std::size_t done = t + 1;
    if ((opts.trace_stride > 0 && done % opts.trace_stride == 0) || done == T) {
      const double inv_done = 1.0 / static_cast<double>(done);
      Vec res(m);
      for (std::size_t j = 0; j < m; ++j) res[j] = inv_done * coupling_sum[j] - inst.b()[j];
      TraceRecord r;
      r.oracle_calls = counter.calls;
      r.phase = Phase::dsg;
      r.dual_value = ev.value;
      r.infeasibility = plus_norm(res);
      r.primal_cost = inv_done * cost_sum;
      out.trace.push(std::move(r));
    }

    const double alpha = schedule.alpha(t, T);
    for (std::size_t j = 0; j < m; ++j) lambda[j] += alpha * ev.subgradient[j];
    project_nonneg_inplace(lambda);
  }
  if (opts.observer) opts.observer(T, lambda);

  const double inv_t = 1.0 / static_cast<double>(T);
  out.lambda_bar = lambda_sum;
  scale(inv_t, out.lambda_bar);
  out.lambda_last = std::move(lambda);
  for (AgentLedger& al : out.ledger) al.scale_weights(inv_t);
  out.oracle_calls = counter.calls;

  const LiftedPoint lp = ledger_sum(out.ledger, m);
  out.primal_cost = lp.beta;
  out.residual = subtract(lp.z, inst.b());
  if (inst.all_domains_convex()) {
    std::vector<Vec> xs;
    xs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) xs.push_back(inst.agent(i).snap_to_domain(out.ledger[i].mean_point()));
    out.x_bar = std::move(xs);
  }
  return out;
}

}  // namespace sepopt

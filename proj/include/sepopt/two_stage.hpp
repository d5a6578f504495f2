#pragma once

// Stage 1 (stochastic dual subgradient) -> d(lambda_bar) -> stage 2 (BCFW),
// then in nonconvex mode Caratheodory reduction and sampled reconstruction.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sepopt/bcfw.hpp"
#include "sepopt/caratheodory.hpp"
#include "sepopt/dual_subgradient.hpp"
#include "sepopt/ledger.hpp"
#include "sepopt/stochastic_subgradient.hpp"

namespace sepopt {

enum class TwoStageMode { convex, nonconvex };

/// How the stage-2 ledger is seeded from stage 1.
enum class BcfwInit {
  automatic,       ///< averaged points in convex mode, the stage-1 ledger in nonconvex mode
  averaged_point,  ///< one atom per agent at the stage-1 primal average (convex domains)
  stage1_ledger,   ///< the stage-1 atoms with their weights, unchanged
  last_atom,       ///< the final-step oracle output of each agent
};

struct TwoStageConfig {
  std::size_t T = 2;
  std::optional<std::size_t> K;  ///< defaults to T
  StepSchedule schedule = StepSchedule::diminishing(1.0);
  Vec lambda0;  ///< empty means zero
  TwoStageMode mode = TwoStageMode::nonconvex;
  BcfwInit init = BcfwInit::automatic;
  std::uint64_t seed_stage1 = 1;
  std::uint64_t seed_stage2 = 2;
  std::uint64_t seed_sampling = 3;
  std::size_t stage1_trace_stride = 0;
  std::size_t stage2_trace_stride = 0;
  std::optional<double> d_ref;
  ReduceOptions reduce;
};

struct OracleCallBreakdown {
  std::uint64_t stage1 = 0;
  std::uint64_t handoff = 0;
  std::uint64_t stage2 = 0;
  std::uint64_t total = 0;
};

struct TwoStageResult {
  SsgRunResult stage1;
  BcfwState stage2;
  std::optional<ReducedLedger> reduced;
  std::vector<Vec> points;
  double d_bar_value = 0.0;
  double d_ref = 0.0;
  double beta_K = 0.0;
  Vec z_K;
  double cost = 0.0;           ///< primal_cost(points)
  double gap = 0.0;            ///< cost - d_ref
  double infeasibility = 0.0;  ///< plus_norm of the points' coupling residual
  double bidual_gap = 0.0;     ///< beta_K - d_ref
  double bidual_infeasibility = 0.0;  ///< ||z_K - b||_+
  OracleCallBreakdown calls;
  RunTrace trace;
};

namespace detail {

inline TwoStageResult run_two_stage(const Instance& inst, const TwoStageConfig& cfg, TwoStageMode mode) {
  if (cfg.T < 2) throw std::invalid_argument("two-stage needs T >= 2");
  const std::size_t K = cfg.K.value_or(cfg.T);
  const std::size_t n = inst.num_agents();
  const std::size_t m = inst.num_rows();
  const Vec lambda0 = cfg.lambda0.empty() ? Vec(m, 0.0) : cfg.lambda0;

  TwoStageResult out;
  SsgOptions sopts;
  sopts.trace_stride = cfg.stage1_trace_stride;
  out.stage1 = run_stochastic_dual_subgradient(inst, cfg.T, cfg.schedule, lambda0, cfg.seed_stage1, sopts);
  out.d_bar_value = *out.stage1.d_bar_value;

  BcfwInit init = cfg.init;
  if (init == BcfwInit::automatic) init = mode == TwoStageMode::convex ? BcfwInit::averaged_point : BcfwInit::stage1_ledger;
  AtomLedger start;
  switch (init) {
    case BcfwInit::averaged_point: start = collapse_to_points(inst, out.stage1.ledger); break;
    case BcfwInit::stage1_ledger: start = out.stage1.ledger; break;
    case BcfwInit::last_atom:
      start.resize(n);
      for (std::size_t i = 0; i < n; ++i) start[i].atoms.push_back(WeightedAtom{1.0, out.stage1.final_atoms[i]});
      break;
    case BcfwInit::automatic: break;
  }

  BcfwOptions bopts;
  bopts.trace_stride = cfg.stage2_trace_stride;
  bopts.call_offset = out.stage1.oracle_calls + out.stage1.handoff_calls;
  const FTarget target{out.d_bar_value, inst.b()};
  out.stage2 = run_bcfw(inst, target, std::move(start), K, cfg.seed_stage2, bopts);
  out.beta_K = out.stage2.beta;
  out.z_K = out.stage2.z;

  if (mode == TwoStageMode::convex) {
    out.points = *out.stage2.x_hat;
  } else {
    out.reduced = reduce_conic_ledger(out.stage2.ledger, m, cfg.reduce);
    out.points = inst.all_domains_convex() ? reconstruct_convex(inst, *out.reduced)
                                           : reconstruct_sampled(*out.reduced, cfg.seed_sampling);
  }

  out.calls.stage1 = out.stage1.oracle_calls;
  out.calls.handoff = out.stage1.handoff_calls;
  out.calls.stage2 = out.stage2.oracle_calls;
  out.calls.total = out.calls.stage1 + out.calls.handoff + out.calls.stage2;

  out.d_ref = cfg.d_ref.value_or(out.stage1.best_dual);
  out.cost = primal_cost(inst, out.points);
  out.gap = out.cost - out.d_ref;
  out.infeasibility = plus_norm(coupling_residual(inst, out.points));
  out.bidual_gap = out.beta_K - out.d_ref;
  out.bidual_infeasibility = plus_norm(subtract(out.z_K, inst.b()));

  out.trace = out.stage1.trace;
  out.trace.append(out.stage2.trace);
  out.trace.seed = cfg.seed_stage1;
  out.trace.apply_reference(out.d_ref);
  return out;
}

}  // namespace detail

inline TwoStageResult run_two_stage_convex(const Instance& inst, const TwoStageConfig& cfg) {
  if (!inst.all_domains_convex()) throw std::invalid_argument("two-stage convex: nonconvex agent domain present");
  return detail::run_two_stage(inst, cfg, TwoStageMode::convex);
}

inline TwoStageResult run_two_stage_nonconvex(const Instance& inst, const TwoStageConfig& cfg) {
  return detail::run_two_stage(inst, cfg, TwoStageMode::nonconvex);
}

inline TwoStageResult run_two_stage(const Instance& inst, const TwoStageConfig& cfg) {
  return cfg.mode == TwoStageMode::convex ? run_two_stage_convex(inst, cfg) : run_two_stage_nonconvex(inst, cfg);
}

}  // namespace sepopt

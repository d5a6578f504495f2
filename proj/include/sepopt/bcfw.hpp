#pragma once

// Stage 2: block-coordinate Frank-Wolfe on
//   F(beta, z) = 1/2 max(beta - d_hat, 0)^2 + 1/2 ||z - b||_+^2
// over the average of the agents' lifted sets {(cost(x), A x)}.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sepopt/ledger.hpp"
#include "sepopt/problem.hpp"
#include "sepopt/rng.hpp"
#include "sepopt/trace.hpp"

namespace sepopt {

struct FTarget {
  double d_hat = 0.0;
  Vec b;
};

inline double eval_F(double beta, std::span<const double> z, const FTarget& target) {
  if (z.size() != target.b.size()) throw std::invalid_argument("eval_F: z has wrong size");
  const double gap = std::max(beta - target.d_hat, 0.0);
  const Vec r = subtract(z, target.b);
  const double inf = plus_norm(r);
  return 0.5 * gap * gap + 0.5 * inf * inf;
}

struct BcfwState {
  Vec beta_i;              ///< per-agent cost share, sum_l w cost / N
  std::vector<Vec> z_i;    ///< per-agent coupling share, sum_l w coupling / N
  double beta = 0.0;       ///< sum_i beta_i
  Vec z;                   ///< sum_i z_i
  AtomLedger ledger;
  std::optional<std::vector<Vec>> x_hat;  ///< maintained only when every domain is convex
  std::size_t k = 0;
  double F0 = 0.0;             ///< F at the initialization
  std::uint64_t oracle_calls = 0;
  std::uint64_t seed = 0;
  std::size_t renormalizations = 0;
  RunTrace trace;
};

struct BcfwOptions {
  std::size_t trace_stride = 0;  ///< 0 disables per-step records (the final one is always written)
  std::uint64_t call_offset = 0; ///< added to oracle_calls in trace records
  std::optional<std::vector<std::size_t>> scripted_indices;  ///< length K, replaces sampling
  double renormalize_tol = 1e-12;
};

/// Stepsize 2N / (k + 2N).
inline double bcfw_step(std::size_t k, std::size_t n) {
  const double two_n = 2.0 * static_cast<double>(n);
  return two_n / (static_cast<double>(k) + two_n);
}

inline BcfwState init_bcfw(const Instance& inst, const FTarget& target, AtomLedger ledger) {
  const std::size_t n = inst.num_agents();
  const std::size_t m = inst.num_rows();
  if (ledger.size() != n) throw std::invalid_argument("bcfw: ledger must have one entry per agent");
  validate_ledger(ledger);
  const double inv_n = 1.0 / static_cast<double>(n);
  BcfwState s;
  s.beta_i.assign(n, 0.0);
  s.z_i.assign(n, Vec(m, 0.0));
  s.z.assign(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    s.beta_i[i] = inv_n * ledger[i].mean_cost();
    s.z_i[i] = ledger[i].mean_coupling(m);
    scale(inv_n, s.z_i[i]);
    s.beta += s.beta_i[i];
    axpy(1.0, s.z_i[i], s.z);
  }
  if (inst.all_domains_convex()) {
    std::vector<Vec> xs;
    xs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) xs.push_back(ledger[i].mean_point());
    s.x_hat = std::move(xs);
  }
  s.ledger = std::move(ledger);
  s.F0 = eval_F(s.beta, s.z, target);
  return s;
}

namespace detail {
inline TraceRecord bcfw_record(const BcfwState& s, const FTarget& target, std::uint64_t offset) {
  TraceRecord r;
  r.oracle_calls = offset + s.oracle_calls;
  r.phase = Phase::bcfw;
  r.f_value = eval_F(s.beta, s.z, target);
  r.infeasibility = plus_norm(subtract(s.z, target.b));
  r.primal_cost = s.beta;
  return r;
}
}  // namespace detail

/// K iterations from the given ledger: sample agent i, query its oracle at
/// (max(beta - d_hat, 0), [z - b]_+), and mix the answer in with weight rho_k.
inline BcfwState run_bcfw(const Instance& inst, const FTarget& target, AtomLedger init_ledger, std::size_t K,
                          std::uint64_t seed, const BcfwOptions& opts = {}) {
  if (target.b.size() != inst.num_rows()) throw std::invalid_argument("bcfw: target b has wrong size");
  if (opts.scripted_indices && opts.scripted_indices->size() != K)
    throw std::invalid_argument("bcfw: scripted indices must have length K");
  BcfwState s = init_bcfw(inst, target, std::move(init_ledger));
  s.seed = seed;
  const std::size_t n = inst.num_agents();
  const std::size_t m = inst.num_rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  Rng rng(seed);
  OracleCounter counter;
  OracleQuery q;
  q.lambda.assign(m, 0.0);
  Vec new_z(m);
  if (opts.trace_stride > 0 && K > 0) s.trace.push(detail::bcfw_record(s, target, opts.call_offset));

  for (std::size_t k = 0; k < K; ++k) {
    q.gamma = std::max(s.beta - target.d_hat, 0.0);
    for (std::size_t j = 0; j < m; ++j) q.lambda[j] = std::max(s.z[j] - target.b[j], 0.0);
    std::size_t i = 0;
    if (opts.scripted_indices) {
      i = (*opts.scripted_indices)[k];
      if (i >= n) throw std::out_of_range("bcfw: scripted agent index out of range");
    } else {
      i = static_cast<std::size_t>(rng.uniform_index(n));
    }
    OracleAtom atom = inst.call(i, q, counter);
    const double rho = bcfw_step(k, n);
    const double keep = 1.0 - rho;

    const double new_beta = keep * s.beta_i[i] + rho * inv_n * atom.cost;
    for (std::size_t j = 0; j < m; ++j) new_z[j] = keep * s.z_i[i][j] + rho * inv_n * atom.coupling[j];
    s.beta += new_beta - s.beta_i[i];
    for (std::size_t j = 0; j < m; ++j) s.z[j] += new_z[j] - s.z_i[i][j];
    s.beta_i[i] = new_beta;
    s.z_i[i] = new_z;

    if (s.x_hat) {
      Vec& x = (*s.x_hat)[i];
      for (std::size_t c = 0; c < x.size(); ++c) x[c] = keep * x[c] + rho * atom.point[c];
    }
    AgentLedger& al = s.ledger[i];
    al.scale_weights(keep);
    al.add(rho, std::move(atom));
    al.drop_zero_weights();
    if (al.renormalize(opts.renormalize_tol)) ++s.renormalizations;
    s.k = k + 1;
    s.oracle_calls = counter.calls;
    // Resum once per N steps so the running totals cannot drift.
    if (s.k % n == 0) {
      s.beta = 0.0;
      std::fill(s.z.begin(), s.z.end(), 0.0);
      for (std::size_t a = 0; a < n; ++a) {
        s.beta += s.beta_i[a];
        axpy(1.0, s.z_i[a], s.z);
      }
    }

    if (opts.trace_stride > 0 && (k + 1) % opts.trace_stride == 0 && k + 1 < K)
      s.trace.push(detail::bcfw_record(s, target, opts.call_offset));
  }
  s.trace.push(detail::bcfw_record(s, target, opts.call_offset));
  if (s.x_hat)
    for (std::size_t i = 0; i < n; ++i) (*s.x_hat)[i] = inst.agent(i).snap_to_domain(std::move((*s.x_hat)[i]));
  return s;
}

/// Largest mismatch between (beta_i, z_i) and the ledger they summarize,
/// relative to the largest per-agent share.
inline double bcfw_consistency_error(const BcfwState& s) {
  const std::size_t n = s.ledger.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  double worst = 0.0, size = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = inv_n * s.ledger[i].mean_cost();
    Vec z = s.ledger[i].mean_coupling(s.z.size());
    scale(inv_n, z);
    size = std::max({size, std::abs(s.beta_i[i]), norm2(s.z_i[i])});
    worst = std::max({worst, std::abs(c - s.beta_i[i]), distance(z, s.z_i[i])});
  }
  return size > 0.0 ? worst / size : worst;
}

}  // namespace sepopt

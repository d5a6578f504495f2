#pragma once

// Exhaustive reference oracles for small domains.

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sepopt/agents.hpp"
#include "sepopt/ev.hpp"
#include "sepopt/problem.hpp"

namespace sepopt {

inline constexpr std::size_t kBruteForceMaxBits = 20;

/// Candidate points sufficient for exact linear minimization: all binary
/// schedules of an EV agent, the vertices of a box, or a finite point set.
inline std::vector<Vec> enumerate_candidates(const AgentOracle& agent) {
  std::vector<Vec> out;
  if (const auto* e = dynamic_cast<const ev::EvAgent*>(&agent)) {
    const std::size_t m = e->dimension();
    if (m > kBruteForceMaxBits) throw std::invalid_argument("brute force: domain too large (m = " + std::to_string(m) + ")");
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
      Vec x(m, 0.0);
      for (std::size_t j = 0; j < m; ++j) x[j] = (mask >> j) & 1U ? 1.0 : 0.0;
      if (e->domain_contains(x)) out.push_back(std::move(x));
    }
    return out;
  }
  if (const auto* b = dynamic_cast<const BoxLinearAgent*>(&agent)) {
    const std::size_t d = b->dimension();
    if (d > kBruteForceMaxBits) throw std::invalid_argument("brute force: domain too large (d = " + std::to_string(d) + ")");
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << d); ++mask) {
      Vec x(d);
      for (std::size_t k = 0; k < d; ++k) x[k] = (mask >> k) & 1U ? b->upper()[k] : b->lower()[k];
      out.push_back(std::move(x));
    }
    return out;
  }
  if (const auto* f = dynamic_cast<const FiniteSetAgent*>(&agent)) {
    if (f->points().size() > (std::size_t{1} << kBruteForceMaxBits)) throw std::invalid_argument("brute force: domain too large");
    return f->points();
  }
  throw std::invalid_argument("brute force: cannot enumerate agent kind '" + agent.kind() + "'");
}

/// Exact argmin of gamma * cost + lambda^T coupling by enumeration; ties go to
/// the lexicographically smallest point. Costs and couplings are recomputed
/// from the agent's own cost() and coupling(), never from its oracle.
inline OracleAtom brute_force_oracle(const AgentOracle& agent, const OracleQuery& q) {
  const std::vector<Vec> cands = enumerate_candidates(agent);
  if (cands.empty()) throw InfeasibleAgent("brute force: empty domain");
  std::size_t best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < cands.size(); ++c) {
    const double v = q.gamma * agent.cost(cands[c]) + dot(q.lambda, agent.coupling(cands[c]));
    if (v < best_val || (v == best_val && cands[c] < cands[best])) {
      best = c;
      best_val = v;
    }
  }
  return agent.make_atom(cands[best]);
}

/// d(lambda) with every agent minimized by enumeration.
inline double brute_force_dual_value(const Instance& inst, std::span<const double> lambda) {
  OracleQuery q{1.0, Vec(lambda.begin(), lambda.end())};
  double inner = 0.0;
  for (std::size_t i = 0; i < inst.num_agents(); ++i) inner += query_objective(brute_force_oracle(inst.agent(i), q), q);
  return -dot(lambda, inst.b()) + inner / static_cast<double>(inst.num_agents());
}

}  // namespace sepopt

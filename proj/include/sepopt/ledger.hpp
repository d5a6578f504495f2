#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sepopt/problem.hpp"

namespace sepopt {

struct WeightedAtom {
  double weight = 0.0;
  OracleAtom atom;
};

/// Convex combination of atoms for one agent.
struct AgentLedger {
  std::vector<WeightedAtom> atoms;

  double weight_sum() const {
    double s = 0.0;
    for (const auto& wa : atoms) s += wa.weight;
    return s;
  }

  /// Adds weight to an atom, merging with an existing atom at the same point.
  void add(double weight, OracleAtom atom) {
    for (auto& wa : atoms) {
      if (wa.atom.point == atom.point) {
        wa.weight += weight;
        return;
      }
    }
    atoms.push_back(WeightedAtom{weight, std::move(atom)});
  }

  void scale_weights(double s) {
    for (auto& wa : atoms) wa.weight *= s;
  }

  void drop_zero_weights() {
    std::erase_if(atoms, [](const WeightedAtom& wa) { return wa.weight <= 0.0; });
  }

  /// Rescales to unit mass when the drift exceeds tol. Returns true if rescaled.
  bool renormalize(double tol = 1e-12) {
    const double s = weight_sum();
    if (std::abs(s - 1.0) <= tol) return false;
    if (!(s > 0.0)) throw std::runtime_error("ledger: agent has no positive weight");
    scale_weights(1.0 / s);
    return true;
  }

  double mean_cost() const {
    double c = 0.0;
    for (const auto& wa : atoms) c += wa.weight * wa.atom.cost;
    return c;
  }

  Vec mean_coupling(std::size_t m) const {
    Vec z(m, 0.0);
    for (const auto& wa : atoms) axpy(wa.weight, wa.atom.coupling, z);
    return z;
  }

  Vec mean_point() const {
    if (atoms.empty()) throw std::runtime_error("ledger: empty agent");
    Vec x(atoms.front().atom.point.size(), 0.0);
    for (const auto& wa : atoms) axpy(wa.weight, wa.atom.point, x);
    return x;
  }
};

using AtomLedger = std::vector<AgentLedger>;

/// The lifted pair (beta, z) = sum_i sum_l w_i^l (cost/N, coupling/N).
struct LiftedPoint {
  double beta = 0.0;
  Vec z;
};

inline LiftedPoint ledger_sum(const AtomLedger& ledger, std::size_t m) {
  LiftedPoint out{0.0, Vec(m, 0.0)};
  const double inv_n = 1.0 / static_cast<double>(ledger.size());
  for (const AgentLedger& al : ledger) {
    out.beta += inv_n * al.mean_cost();
    axpy(inv_n, al.mean_coupling(m), out.z);
  }
  return out;
}

/// Sum over agents of (|Q_i| - 1).
inline std::size_t ledger_excess(const AtomLedger& ledger) {
  std::size_t e = 0;
  for (const AgentLedger& al : ledger)
    if (!al.atoms.empty()) e += al.atoms.size() - 1;
  return e;
}

/// Checks nonnegative weights summing to one within tol, and that every agent is nonempty.
inline void validate_ledger(const AtomLedger& ledger, double tol = 1e-9) {
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    if (ledger[i].atoms.empty()) throw DomainViolation(i, "ledger has no atoms");
    for (const auto& wa : ledger[i].atoms)
      if (!(wa.weight >= 0.0)) throw DomainViolation(i, "ledger has a negative weight");
    const double s = ledger[i].weight_sum();
    if (std::abs(s - 1.0) > tol) throw DomainViolation(i, "ledger weights sum to " + std::to_string(s));
  }
}

/// Replaces each agent's combination by a single atom at the averaged point.
/// Only meaningful when every domain is convex.
inline AtomLedger collapse_to_points(const Instance& inst, const AtomLedger& ledger) {
  if (!inst.all_domains_convex()) throw std::invalid_argument("collapse_to_points: nonconvex domain present");
  AtomLedger out(ledger.size());
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    Vec x = inst.agent(i).snap_to_domain(ledger[i].mean_point());
    if (!inst.agent(i).domain_contains(x)) throw DomainViolation(i, "averaged point left the domain");
    out[i].atoms.push_back(WeightedAtom{1.0, inst.agent(i).make_atom(std::move(x))});
  }
  return out;
}

}  // namespace sepopt

#pragma once

// Conic Caratheodory reduction of a per-agent ledger, and the two primal
// reconstructions from the reduced ledger.
//
// Each atom l of agent i lifts to v = (cost / N, coupling / N) in R^{m+1}. A
// round takes m + 2 non-reference atoms, whose difference columns
// v_l - v_ref(i) must be linearly dependent, and moves weight along a kernel
// direction until some atom reaches zero. The lifted sum and every agent's
// weight total are unchanged by the move.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sepopt/ledger.hpp"
#include "sepopt/problem.hpp"
#include "sepopt/rng.hpp"

namespace sepopt {

class CaratheodoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReducedLedger {
  AtomLedger ledger;
  std::vector<std::size_t> nontrivial;  ///< agents keeping two or more atoms, ascending
  std::size_t rounds = 0;
  double worst_kernel_residual = 0.0;  ///< max ||M mu|| / (scale ||mu||) over rounds
};

struct ReduceOptions {
  double pivot_tol = 1e-12;      ///< relative to the largest column norm
  double residual_tol = 1e-8;    ///< accepted relative kernel residual
  bool check_each_round = false; ///< verify per-agent weight sums after every round
};

namespace detail {

// Kernel vector of a rows x cols matrix (cols > rows) by Gauss-Jordan with
// partial pivoting. Returns mu with one free entry set to 1.
inline Vec kernel_vector(std::vector<Vec> a, std::size_t rows, std::size_t cols, double tol) {
  std::vector<std::size_t> pivot_cols;
  std::size_t rank = 0;
  std::size_t free_col = cols;
  for (std::size_t c = 0; c < cols && rank < rows; ++c) {
    std::size_t best = rank;
    for (std::size_t r = rank + 1; r < rows; ++r)
      if (std::abs(a[r][c]) > std::abs(a[best][c])) best = r;
    if (std::abs(a[best][c]) <= tol) {
      if (free_col == cols) free_col = c;
      continue;
    }
    std::swap(a[best], a[rank]);
    const double inv = 1.0 / a[rank][c];
    for (std::size_t k = c; k < cols; ++k) a[rank][k] *= inv;
    for (std::size_t r = 0; r < rows; ++r) {
      if (r == rank || a[r][c] == 0.0) continue;
      const double f = a[r][c];
      for (std::size_t k = c; k < cols; ++k) a[r][k] -= f * a[rank][k];
    }
    pivot_cols.push_back(c);
    ++rank;
  }
  if (free_col == cols) {
    // All rows pivoted before running out of columns: the next column is free.
    free_col = pivot_cols.empty() ? 0 : pivot_cols.back() + 1;
    while (std::find(pivot_cols.begin(), pivot_cols.end(), free_col) != pivot_cols.end()) ++free_col;
  }
  Vec mu(cols, 0.0);
  mu[free_col] = 1.0;
  for (std::size_t r = 0; r < rank; ++r) mu[pivot_cols[r]] = -a[r][free_col];
  return mu;
}

}  // namespace detail

inline ReducedLedger reduce_conic_ledger(AtomLedger ledger, std::size_t m, const ReduceOptions& opts = {}) {
  const std::size_t n = ledger.size();
  if (n == 0) throw std::invalid_argument("reduce: empty ledger");
  for (AgentLedger& al : ledger) al.drop_zero_weights();
  validate_ledger(ledger);
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::size_t dim = m + 1;
  const std::size_t width = m + 2;

  // Zero weights are kept in place until the end so atom indices stay stable.
  std::vector<std::size_t> ref(n);
  auto pick_ref = [&](std::size_t i) {
    const auto& atoms = ledger[i].atoms;
    std::size_t best = 0;
    for (std::size_t l = 1; l < atoms.size(); ++l)
      if (atoms[l].weight > atoms[best].weight) best = l;
    return best;
  };
  std::size_t excess = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ref[i] = pick_ref(i);
    excess += ledger[i].atoms.size() - 1;
  }

  ReducedLedger out;
  std::vector<std::pair<std::size_t, std::size_t>> active;
  active.reserve(width);
  auto lifted = [&](std::size_t i, std::size_t l, std::size_t row) {
    const OracleAtom& a = ledger[i].atoms[l].atom;
    return inv_n * (row == 0 ? a.cost : a.coupling[row - 1]);
  };

  auto run_round = [&]() {
    std::vector<Vec> mat(dim, Vec(width, 0.0));
    double max_norm = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      const auto [i, l] = active[c];
      double sq = 0.0;
      for (std::size_t r = 0; r < dim; ++r) {
        mat[r][c] = lifted(i, l, r) - lifted(i, ref[i], r);
        sq += mat[r][c] * mat[r][c];
      }
      max_norm = std::max(max_norm, std::sqrt(sq));
    }
    const Vec mu = detail::kernel_vector(mat, dim, width, opts.pivot_tol * max_norm);

    double res_sq = 0.0;
    for (std::size_t r = 0; r < dim; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < width; ++c) acc += mat[r][c] * mu[c];
      res_sq += acc * acc;
    }
    const double rel = max_norm > 0.0 ? std::sqrt(res_sq) / (max_norm * norm2(mu)) : 0.0;
    out.worst_kernel_residual = std::max(out.worst_kernel_residual, rel);
    if (!(rel <= opts.residual_tol)) {
      std::ostringstream msg;
      msg << "caratheodory: no kernel vector within tolerance in round " << out.rounds << " (relative residual "
          << rel << ", max column norm " << max_norm << ", excess " << excess << ", m " << m << ")";
      throw CaratheodoryError(msg.str());
    }

    // Direction on atoms: mu on the active columns, minus their sum on each reference.
    std::vector<std::pair<std::pair<std::size_t, std::size_t>, double>> dir;
    for (std::size_t c = 0; c < width; ++c) {
      if (mu[c] == 0.0) continue;
      const auto [i, l] = active[c];
      dir.push_back({{i, l}, mu[c]});
      auto it = std::find_if(dir.begin(), dir.end(), [&](const auto& d) { return d.first == std::pair{i, ref[i]}; });
      if (it == dir.end()) dir.push_back({{i, ref[i]}, -mu[c]});
      else it->second -= mu[c];
    }
    // Largest step in either sign that keeps all weights nonnegative; take the shorter.
    double theta_pos = INFINITY, theta_neg = INFINITY;
    std::size_t hit_pos = 0, hit_neg = 0;
    for (std::size_t d = 0; d < dir.size(); ++d) {
      const double w = ledger[dir[d].first.first].atoms[dir[d].first.second].weight;
      const double s = dir[d].second;
      if (s < 0.0 && w / -s < theta_pos) {
        theta_pos = w / -s;
        hit_pos = d;
      }
      if (s > 0.0 && w / s < theta_neg) {
        theta_neg = w / s;
        hit_neg = d;
      }
    }
    const bool use_pos = theta_pos <= theta_neg;
    const double theta = use_pos ? theta_pos : -theta_neg;
    const std::size_t hit = use_pos ? hit_pos : hit_neg;
    if (!std::isfinite(theta)) throw CaratheodoryError("caratheodory: kernel direction has no blocking atom");

    std::vector<std::pair<std::size_t, std::size_t>> dead;
    for (std::size_t d = 0; d < dir.size(); ++d) {
      auto& w = ledger[dir[d].first.first].atoms[dir[d].first.second].weight;
      w += theta * dir[d].second;
      if (d == hit || w <= 0.0) {
        w = 0.0;
        dead.push_back(dir[d].first);
      }
    }
    for (const auto& [i, l] : dead) {
      --excess;
      if (l == ref[i]) {
        ref[i] = pick_ref(i);
        std::erase(active, std::pair{i, ref[i]});
      } else {
        std::erase(active, std::pair{i, l});
      }
    }
    ++out.rounds;

    if (opts.check_each_round) {
      for (std::size_t i = 0; i < n; ++i) {
        const double s = ledger[i].weight_sum();
        if (std::abs(s - 1.0) > 1e-9)
          throw CaratheodoryError("caratheodory: agent " + std::to_string(i) + " weight sum drifted to " +
                                  std::to_string(s) + " in round " + std::to_string(out.rounds));
      }
    }
  };

  for (std::size_t i = 0; i < n && excess > dim; ++i) {
    for (std::size_t l = 0; l < ledger[i].atoms.size() && excess > dim; ++l) {
      if (l == ref[i] || ledger[i].atoms[l].weight <= 0.0) continue;
      active.emplace_back(i, l);
      while (active.size() == width && excess > dim) run_round();
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    ledger[i].drop_zero_weights();
    ledger[i].renormalize();
    if (ledger[i].atoms.size() > 1) out.nontrivial.push_back(i);
  }
  out.ledger = std::move(ledger);
  return out;
}

/// x_i = sum_l w_i^l x_i^l. Requires every domain to be convex.
inline std::vector<Vec> reconstruct_convex(const Instance& inst, const ReducedLedger& reduced) {
  if (!inst.all_domains_convex()) throw std::invalid_argument("reconstruct_convex: nonconvex domain present");
  if (reduced.ledger.size() != inst.num_agents()) throw std::invalid_argument("reconstruct_convex: ledger size mismatch");
  std::vector<Vec> xs;
  xs.reserve(reduced.ledger.size());
  for (std::size_t i = 0; i < reduced.ledger.size(); ++i) {
    const AgentLedger& al = reduced.ledger[i];
    xs.push_back(al.atoms.size() == 1 ? al.atoms.front().atom.point : inst.agent(i).snap_to_domain(al.mean_point()));
  }
  return xs;
}

/// One atom index per agent, drawn with probability equal to its weight for
/// agents with several atoms, in ascending agent order.
inline std::vector<std::size_t> sample_atom_indices(const ReducedLedger& reduced, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> pick(reduced.ledger.size(), 0);
  std::vector<double> w;
  for (std::size_t i = 0; i < reduced.ledger.size(); ++i) {
    const auto& atoms = reduced.ledger[i].atoms;
    if (atoms.size() < 2) continue;
    w.resize(atoms.size());
    for (std::size_t l = 0; l < atoms.size(); ++l) w[l] = atoms[l].weight;
    pick[i] = rng.categorical(w);
  }
  return pick;
}

inline std::vector<Vec> reconstruct_sampled(const ReducedLedger& reduced, std::uint64_t seed) {
  const std::vector<std::size_t> pick = sample_atom_indices(reduced, seed);
  std::vector<Vec> xs;
  xs.reserve(pick.size());
  for (std::size_t i = 0; i < pick.size(); ++i) xs.push_back(reduced.ledger[i].atoms[pick[i]].atom.point);
  return xs;
}

}  // namespace sepopt

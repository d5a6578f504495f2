#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sepopt/vector_ops.hpp"

namespace sepopt {

/// Weights of one oracle call: minimize gamma * cost(x) + lambda^T coupling(x).
struct OracleQuery {
  double gamma = 1.0;
  Vec lambda;
};

/// One oracle output: a domain point together with its cost and coupling vector.
struct OracleAtom {
  Vec point;
  double cost = 0.0;
  Vec coupling;

  friend bool operator==(const OracleAtom&, const OracleAtom&) = default;
};

/// Objective value gamma * cost + lambda^T coupling of an atom.
inline double query_objective(const OracleAtom& atom, const OracleQuery& q) {
  return q.gamma * atom.cost + dot(q.lambda, atom.coupling);
}

/// Conservative per-agent constants used by the convergence bounds.
struct AgentBounds {
  double coupling_row_bound = 0.0;  // >= sup ||A_i x - b||
  double cost_bound = 0.0;          // >= sup |cost_i(x)|
  double diameter_bound = 0.0;      // >= diam conv{(cost_i(x), A_i x)}
  double nonconvexity_gamma = 0.0;  // sup cost - inf cost over the domain
  std::optional<double> nonconvexity_rho;
};

class DomainViolation : public std::invalid_argument {
 public:
  DomainViolation(std::size_t agent, const std::string& what)
      : std::invalid_argument("agent " + std::to_string(agent) + ": " + what), agent_(agent) {}
  std::size_t agent() const { return agent_; }

 private:
  std::size_t agent_;
};

class InfeasibleAgent : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-agent minimization oracle.
///
/// `minimize` must return a global minimizer of the query objective over the
/// agent's domain. When gamma == 0 the returned point must be an extreme point
/// of the convex hull of the domain, which is what lets the nonconvex pipeline
/// treat cost and its convex envelope as equal on every atom it stores.
class AgentOracle {
 public:
  virtual ~AgentOracle() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::size_t coupling_rows() const = 0;

  virtual OracleAtom minimize(const OracleQuery& query) const = 0;
  virtual bool domain_contains(std::span<const double> point) const = 0;
  virtual double cost(std::span<const double> point) const = 0;
  virtual Vec coupling(std::span<const double> point) const = 0;

  /// True when the domain itself is convex (points may be averaged).
  virtual bool domain_is_convex() const = 0;

  virtual AgentBounds bounds(std::span<const double> b) const = 0;

  /// Removes rounding excursions from an averaged point (convex domains only).
  virtual Vec snap_to_domain(Vec x) const { return x; }

  OracleAtom make_atom(Vec point) const {
    OracleAtom atom;
    atom.cost = cost(point);
    atom.coupling = coupling(point);
    atom.point = std::move(point);
    return atom;
  }
};

using AgentPtr = std::shared_ptr<const AgentOracle>;

/// Counts oracle invocations; the x-axis of every trace.
struct OracleCounter {
  std::uint64_t calls = 0;
};

/// A separable instance: N agents sharing a coupling right-hand side b.
class Instance {
 public:
  Instance(std::vector<AgentPtr> agents, Vec b) : agents_(std::move(agents)), b_(std::move(b)) {
    if (agents_.empty()) throw std::invalid_argument("instance needs at least one agent");
    if (b_.empty()) throw std::invalid_argument("instance needs at least one coupling row");
    double g_tilde = 0.0, h = 0.0, d2 = 0.0, gmax = 0.0;
    all_convex_ = true;
    bounds_.reserve(agents_.size());
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      if (!agents_[i]) throw std::invalid_argument("agent " + std::to_string(i) + " is null");
      if (agents_[i]->coupling_rows() != b_.size())
        throw DomainViolation(i, "coupling rows " + std::to_string(agents_[i]->coupling_rows()) +
                                     " != m = " + std::to_string(b_.size()));
      AgentBounds ab = agents_[i]->bounds(b_);
      g_tilde = std::max(g_tilde, ab.coupling_row_bound);
      h = std::max(h, ab.cost_bound);
      d2 += ab.diameter_bound * ab.diameter_bound;
      gmax = std::max(gmax, ab.nonconvexity_gamma);
      all_convex_ = all_convex_ && agents_[i]->domain_is_convex();
      bounds_.push_back(std::move(ab));
    }
    g_tilde_ = g_tilde;
    h_ = h;
    d_ = std::sqrt(d2 / static_cast<double>(agents_.size()));
    max_gamma_ = gmax;
  }

  std::size_t num_agents() const { return agents_.size(); }
  std::size_t num_rows() const { return b_.size(); }
  const Vec& b() const { return b_; }
  const AgentOracle& agent(std::size_t i) const { return *agents_.at(i); }
  const std::vector<AgentPtr>& agents() const { return agents_; }
  const AgentBounds& agent_bounds(std::size_t i) const { return bounds_.at(i); }

  double G_tilde() const { return g_tilde_; }
  double H() const { return h_; }
  double D() const { return d_; }
  double max_nonconvexity_gamma() const { return max_gamma_; }
  bool all_domains_convex() const { return all_convex_; }

  /// One counted oracle call for agent i.
  OracleAtom call(std::size_t i, const OracleQuery& q, OracleCounter& counter) const {
    ++counter.calls;
    return agents_[i]->minimize(q);
  }

 private:
  std::vector<AgentPtr> agents_;
  Vec b_;
  std::vector<AgentBounds> bounds_;
  double g_tilde_ = 0.0;
  double h_ = 0.0;
  double d_ = 0.0;
  double max_gamma_ = 0.0;
  bool all_convex_ = true;
};

struct DualEvaluation {
  double value = 0.0;
  Vec subgradient;
  std::vector<OracleAtom> minimizers;
};

/// d(lambda) = -lambda^T b + (1/N) sum_i min_x {cost_i(x) + lambda^T A_i x},
/// together with the subgradient (1/N) sum_i A_i x_i*(lambda) - b. N oracle calls.
inline DualEvaluation dual_value(const Instance& inst, std::span<const double> lambda,
                                 OracleCounter& counter) {
  if (lambda.size() != inst.num_rows()) throw std::invalid_argument("dual_value: lambda has wrong size");
  if (!all_nonneg(lambda)) throw std::invalid_argument("dual_value: lambda must be nonnegative");
  const std::size_t n = inst.num_agents();
  const double inv_n = 1.0 / static_cast<double>(n);
  OracleQuery q{1.0, Vec(lambda.begin(), lambda.end())};
  DualEvaluation out;
  out.minimizers.reserve(n);
  Vec coupling_sum(inst.num_rows(), 0.0);
  double inner = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    OracleAtom atom = inst.call(i, q, counter);
    inner += query_objective(atom, q);
    axpy(1.0, atom.coupling, coupling_sum);
    out.minimizers.push_back(std::move(atom));
  }
  out.value = -dot(lambda, inst.b()) + inv_n * inner;
  out.subgradient = Vec(inst.num_rows());
  for (std::size_t j = 0; j < inst.num_rows(); ++j) out.subgradient[j] = inv_n * coupling_sum[j] - inst.b()[j];
  return out;
}

inline void check_points(const Instance& inst, std::span<const Vec> points) {
  if (points.size() != inst.num_agents())
    throw std::invalid_argument("expected " + std::to_string(inst.num_agents()) + " points, got " +
                                std::to_string(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!inst.agent(i).domain_contains(points[i])) throw DomainViolation(i, "point outside the agent domain");
  }
}

/// (1/N) sum_i A_i x_i - b.
inline Vec coupling_residual(const Instance& inst, std::span<const Vec> points) {
  check_points(inst, points);
  const double inv_n = 1.0 / static_cast<double>(inst.num_agents());
  Vec sum(inst.num_rows(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) axpy(1.0, inst.agent(i).coupling(points[i]), sum);
  for (std::size_t j = 0; j < sum.size(); ++j) sum[j] = inv_n * sum[j] - inst.b()[j];
  return sum;
}

/// (1/N) sum_i cost_i(x_i).
inline double primal_cost(const Instance& inst, std::span<const Vec> points) {
  check_points(inst, points);
  double acc = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) acc += inst.agent(i).cost(points[i]);
  return acc / static_cast<double>(inst.num_agents());
}

}  // namespace sepopt

#pragma once

// General-purpose agent models: linear cost over a box, and an explicit finite
// point set with arbitrary costs. Both use a dense linear coupling map.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sepopt/problem.hpp"

namespace sepopt {

/// Dense row-major m x d matrix.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  static DenseMatrix from_rows(const std::vector<Vec>& rs) {
    if (rs.empty()) throw std::invalid_argument("matrix needs at least one row");
    DenseMatrix m(rs.size(), rs.front().size());
    for (std::size_t r = 0; r < rs.size(); ++r) {
      if (rs[r].size() != m.cols) throw std::invalid_argument("ragged matrix rows");
      std::copy(rs[r].begin(), rs[r].end(), m.data.begin() + static_cast<std::ptrdiff_t>(r * m.cols));
    }
    return m;
  }

  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }

  Vec apply(std::span<const double> x) const {
    Vec y(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) y[r] += (*this)(r, c) * x[c];
    return y;
  }
  /// A^T y
  Vec apply_transpose(std::span<const double> y) const {
    Vec x(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) x[c] += (*this)(r, c) * y[r];
    return x;
  }
  std::vector<Vec> to_rows() const {
    std::vector<Vec> out(rows);
    for (std::size_t r = 0; r < rows; ++r)
      out[r] = Vec(data.begin() + static_cast<std::ptrdiff_t>(r * cols),
                   data.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
    return out;
  }
};

/// cost(x) = c^T x over the box lower <= x <= upper; coupling A x.
class BoxLinearAgent final : public AgentOracle {
 public:
  BoxLinearAgent(Vec lower, Vec upper, Vec cost, DenseMatrix coupling)
      : lower_(std::move(lower)), upper_(std::move(upper)), cost_(std::move(cost)), a_(std::move(coupling)) {
    const std::size_t d = lower_.size();
    if (d == 0 || upper_.size() != d || cost_.size() != d || a_.cols != d)
      throw std::invalid_argument("box agent: inconsistent dimensions");
    for (std::size_t k = 0; k < d; ++k)
      if (!(lower_[k] <= upper_[k])) throw InfeasibleAgent("box agent: empty box in coordinate " + std::to_string(k));
  }

  std::string kind() const override { return "box"; }
  std::size_t dimension() const override { return lower_.size(); }
  std::size_t coupling_rows() const override { return a_.rows; }
  bool domain_is_convex() const override { return true; }

  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  const Vec& cost_vector() const { return cost_; }
  const DenseMatrix& coupling_matrix() const { return a_; }

  OracleAtom minimize(const OracleQuery& q) const override {
    Vec w = a_.apply_transpose(q.lambda);
    Vec x(dimension());
    // Ties go to the lower bound, so the output is always a vertex of the box.
    for (std::size_t k = 0; k < x.size(); ++k) {
      w[k] += q.gamma * cost_[k];
      x[k] = w[k] < 0.0 ? upper_[k] : lower_[k];
    }
    return make_atom(std::move(x));
  }

  bool domain_contains(std::span<const double> x) const override {
    if (x.size() != dimension()) return false;
    for (std::size_t k = 0; k < x.size(); ++k)
      if (!(x[k] >= lower_[k] && x[k] <= upper_[k])) return false;
    return true;
  }

  Vec snap_to_domain(Vec x) const override {
    for (std::size_t k = 0; k < x.size() && k < lower_.size(); ++k) x[k] = std::clamp(x[k], lower_[k], upper_[k]);
    return x;
  }

  double cost(std::span<const double> x) const override { return dot(cost_, x); }
  Vec coupling(std::span<const double> x) const override { return a_.apply(x); }

  AgentBounds bounds(std::span<const double> b) const override {
    AgentBounds out;
    // Row-wise range of A x over the box, then the largest deviation from b per row.
    Vec dev(a_.rows);
    Vec widths(a_.rows + 1, 0.0);
    for (std::size_t r = 0; r < a_.rows; ++r) {
      double lo = 0.0, hi = 0.0;
      for (std::size_t k = 0; k < dimension(); ++k) {
        const double a = a_(r, k);
        lo += std::min(a * lower_[k], a * upper_[k]);
        hi += std::max(a * lower_[k], a * upper_[k]);
      }
      dev[r] = std::max(std::abs(hi - b[r]), std::abs(lo - b[r]));
      widths[r + 1] = hi - lo;
    }
    out.coupling_row_bound = norm2(dev);
    double range = 0.0;
    for (std::size_t k = 0; k < dimension(); ++k) {
      out.cost_bound += std::max(std::abs(cost_[k] * lower_[k]), std::abs(cost_[k] * upper_[k]));
      range += std::abs(cost_[k]) * (upper_[k] - lower_[k]);
    }
    widths[0] = range;
    out.diameter_bound = norm2(widths);
    out.nonconvexity_gamma = range;
    out.nonconvexity_rho = 0.0;
    return out;
  }

 private:
  Vec lower_, upper_, cost_;
  DenseMatrix a_;
};

/// Explicit finite domain {p_1, ..., p_n} with arbitrary costs; coupling A x.
class FiniteSetAgent final : public AgentOracle {
 public:
  FiniteSetAgent(std::vector<Vec> points, Vec costs, DenseMatrix coupling)
      : points_(std::move(points)), costs_(std::move(costs)), a_(std::move(coupling)) {
    if (points_.empty()) throw InfeasibleAgent("finite agent: empty domain");
    if (costs_.size() != points_.size()) throw std::invalid_argument("finite agent: one cost per point required");
    for (const Vec& p : points_)
      if (p.size() != a_.cols) throw std::invalid_argument("finite agent: point dimension mismatch");
    couplings_.reserve(points_.size());
    for (const Vec& p : points_) couplings_.push_back(a_.apply(p));
  }

  std::string kind() const override { return "finite"; }
  std::size_t dimension() const override { return a_.cols; }
  std::size_t coupling_rows() const override { return a_.rows; }
  bool domain_is_convex() const override { return points_.size() == 1; }

  const std::vector<Vec>& points() const { return points_; }
  const Vec& costs() const { return costs_; }
  const DenseMatrix& coupling_matrix() const { return a_; }

  /// Exhaustive scan; exact ties resolve to the lexicographically smallest
  /// point, which is a vertex of the minimizing face.
  OracleAtom minimize(const OracleQuery& q) const override {
    std::size_t best = 0;
    double best_val = q.gamma * costs_[0] + dot(q.lambda, couplings_[0]);
    for (std::size_t p = 1; p < points_.size(); ++p) {
      const double v = q.gamma * costs_[p] + dot(q.lambda, couplings_[p]);
      if (v < best_val || (v == best_val && points_[p] < points_[best])) {
        best = p;
        best_val = v;
      }
    }
    return OracleAtom{points_[best], costs_[best], couplings_[best]};
  }

  bool domain_contains(std::span<const double> x) const override { return find(x).has_value(); }

  double cost(std::span<const double> x) const override {
    auto p = find(x);
    if (!p) throw std::invalid_argument("finite agent: point not in domain");
    return costs_[*p];
  }
  Vec coupling(std::span<const double> x) const override { return a_.apply(x); }

  AgentBounds bounds(std::span<const double> b) const override {
    AgentBounds out;
    double fmin = costs_[0], fmax = costs_[0];
    for (std::size_t p = 0; p < points_.size(); ++p) {
      out.coupling_row_bound = std::max(out.coupling_row_bound, distance(couplings_[p], b));
      out.cost_bound = std::max(out.cost_bound, std::abs(costs_[p]));
      fmin = std::min(fmin, costs_[p]);
      fmax = std::max(fmax, costs_[p]);
      for (std::size_t r = p + 1; r < points_.size(); ++r) {
        double d2 = (costs_[p] - costs_[r]) * (costs_[p] - costs_[r]);
        for (std::size_t j = 0; j < a_.rows; ++j) {
          const double dz = couplings_[p][j] - couplings_[r][j];
          d2 += dz * dz;
        }
        out.diameter_bound = std::max(out.diameter_bound, std::sqrt(d2));
      }
    }
    out.nonconvexity_gamma = fmax - fmin;
    return out;
  }

 private:
  std::optional<std::size_t> find(std::span<const double> x) const {
    for (std::size_t p = 0; p < points_.size(); ++p)
      if (std::equal(points_[p].begin(), points_[p].end(), x.begin(), x.end())) return p;
    return std::nullopt;
  }

  std::vector<Vec> points_;
  Vec costs_;
  DenseMatrix a_;
  std::vector<Vec> couplings_;
};

}  // namespace sepopt

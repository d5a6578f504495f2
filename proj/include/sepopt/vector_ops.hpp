#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace sepopt {

using Vec = std::vector<double>;

/// Euclidean norm of the component-wise positive part, sqrt(sum max(v_j, 0)^2).
inline double plus_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) {
    if (x > 0.0) acc += x * x;
  }
  return std::sqrt(acc);
}

/// Component-wise max(v_j, 0). Negative zero comes back as +0.
inline Vec project_nonneg(std::span<const double> v) {
  Vec out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = v[j] > 0.0 ? v[j] : 0.0;
  return out;
}

inline void project_nonneg_inplace(Vec& v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
  return acc;
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline double distance(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    acc += d * d;
  }
  return std::sqrt(acc);
}

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t j = 0; j < x.size(); ++j) y[j] += alpha * x[j];
}

inline Vec subtract(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  Vec out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] - b[j];
  return out;
}

inline void scale(double s, std::span<double> v) {
  for (double& x : v) x *= s;
}

inline bool all_nonneg(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0; });
}

}  // namespace sepopt

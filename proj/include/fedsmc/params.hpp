#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fedsmc/errors.hpp"

namespace fedsmc {

// Flat vector of model parameters. The dimension is the length; every
// element must stay finite, and the dimension is constant across all
// vectors within one run.
using WeightVector = std::vector<double>;

inline void require_same_dim(const WeightVector& a, const WeightVector& b,
                             const char* op) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": dimension mismatch (" +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
}

inline void require_finite(const WeightVector& w, const char* op) {
  for (double x : w) {
    if (!std::isfinite(x)) {
      throw ArithmeticDomainError(std::string(op) +
                                  ": non-finite element in result");
    }
  }
}

inline WeightVector scale(const WeightVector& w, double a) {
  if (!std::isfinite(a)) {
    throw ArithmeticDomainError("scale: non-finite scalar");
  }
  WeightVector out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = a * w[i];
  require_finite(out, "scale");
  return out;
}

// Elementwise sum in ascending source index, so repeated runs are
// bit-reproducible.
inline WeightVector vec_sum(const std::vector<WeightVector>& vs) {
  if (vs.empty()) throw UsageError("vec_sum: empty list");
  WeightVector out(vs.front().size(), 0.0);
  for (const auto& v : vs) {
    require_same_dim(out, v, "vec_sum");
    for (std::size_t i = 0; i < v.size(); ++i) out[i] += v[i];
  }
  require_finite(out, "vec_sum");
  return out;
}

inline WeightVector vec_mean(const std::vector<WeightVector>& vs) {
  WeightVector out = vec_sum(vs);
  const double inv = 1.0 / static_cast<double>(vs.size());
  for (double& x : out) x *= inv;
  return out;
}

inline double linf_dist(const WeightVector& a, const WeightVector& b) {
  require_same_dim(a, b, "linf_dist");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::fabs(a[i] - b[i]));
  }
  return d;
}

inline double max_abs(const WeightVector& w) {
  double m = 0.0;
  for (double x : w) m = std::max(m, std::fabs(x));
  return m;
}

}  // namespace fedsmc

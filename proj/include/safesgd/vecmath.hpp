#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace safesgd {

// Model parameters and exchanged messages are flat real vectors.
using ParamVector = std::vector<double>;

namespace vec {

inline double dot(const ParamVector& a, const ParamVector& b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2_sq(const ParamVector& a) { return dot(a, a); }

inline double norm2(const ParamVector& a) { return std::sqrt(norm2_sq(a)); }

inline double dist_sq(const ParamVector& a, const ParamVector& b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double dist(const ParamVector& a, const ParamVector& b) { return std::sqrt(dist_sq(a, b)); }

// y += alpha * x
inline void axpy(double alpha, const ParamVector& x, ParamVector& y) {
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(ParamVector& x, double alpha) {
    for (double& v : x) v *= alpha;
}

inline ParamVector mean(const std::vector<ParamVector>& xs) {
    assert(!xs.empty());
    ParamVector m(xs[0].size(), 0.0);
    for (const auto& x : xs) axpy(1.0, x, m);
    scale(m, 1.0 / static_cast<double>(xs.size()));
    return m;
}

inline bool all_finite(const ParamVector& x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace vec
}  // namespace safesgd

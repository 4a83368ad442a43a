#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "safesgd/common.hpp"
#include "safesgd/lp.hpp"
#include "safesgd/vecmath.hpp"

namespace safesgd::rvc {

// Input to an aggregation kernel: equal-dimension vectors, up to `f` of which
// may be adversarial (identities unknown to the kernel).
struct PointSet {
    std::vector<ParamVector> points;
    int f = 0;

    std::size_t size() const { return points.size(); }
    std::size_t dim() const { return points.empty() ? 0 : points[0].size(); }
};

enum class Mode { kExact1d, kExact2d, kExactLp, kCoordinateWise };

inline const char* mode_name(Mode m) {
    switch (m) {
        case Mode::kExact1d: return "exact-1d";
        case Mode::kExact2d: return "exact-2d";
        case Mode::kExactLp: return "exact-lp";
        case Mode::kCoordinateWise: return "coordinate-wise";
    }
    return "?";
}

struct SafePointResult {
    ParamVector point;
    // Convex weights over a subset of the input points reproducing `point`.
    // Empty for coordinate-wise results, which carry no hull certificate.
    std::map<int, double> weights;
    Mode mode = Mode::kExactLp;
    int depth = -1;  // verified Tukey depth, set for exact-2d results
};

inline constexpr int kDefaultSubsetCap = 5000;
inline constexpr double kHullTol = 1e-8;

// ---------------------------------------------------------------------------
// Hull membership (verification oracle)

inline lp::FeasibilityResult hull_feasibility(const ParamVector& query,
                                              const std::vector<ParamVector>& points) {
    const std::size_t n = points.size();
    const std::size_t m = query.size();
    lp::FeasibilityProblem prob;
    prob.n_vars = n;
    prob.rows.assign(m + 1, std::vector<double>(n, 0.0));
    prob.rhs.assign(m + 1, 0.0);
    for (std::size_t j = 0; j < n; ++j) prob.rows[0][j] = 1.0;
    prob.rhs[0] = 1.0;
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t j = 0; j < n; ++j) prob.rows[c + 1][j] = points[j][c];
        prob.rhs[c + 1] = query[c];
    }
    return lp::solve_feasibility(prob, kHullTol);
}

// True iff convex weights over `points` reproduce `query` to tolerance 1e-8.
inline bool in_hull(const ParamVector& query, const std::vector<ParamVector>& points) {
    if (points.empty()) throw std::invalid_argument("in_hull: empty point list");
    return hull_feasibility(query, points).feasible;
}

// Convex weights expressing `query` over `points`, when they exist.
inline std::optional<std::map<int, double>> in_hull_weights(const ParamVector& query,
                                                            const std::vector<ParamVector>& points) {
    const auto res = hull_feasibility(query, points);
    if (!res.feasible) return std::nullopt;
    std::map<int, double> w;
    for (std::size_t j = 0; j < points.size(); ++j) {
        if (res.solution[j] > 1e-12) w[static_cast<int>(j)] = res.solution[j];
    }
    return w;
}

// ---------------------------------------------------------------------------
// Tukey depth (brute-force oracle, dimensions 1 and 2)

inline int tukey_depth_1d(double query, const std::vector<double>& values) {
    int le = 0;
    int ge = 0;
    for (double v : values) {
        if (v <= query) ++le;
        if (v >= query) ++ge;
    }
    return std::min(le, ge);
}

// Minimum, over all closed halfplanes containing `query`, of the number of
// points inside. The count as a function of the boundary direction is
// piecewise constant with breakpoints where some point hits the boundary, so
// it suffices to evaluate in the open arc between consecutive breakpoints.
inline int tukey_depth(const ParamVector& query, const PointSet& ps) {
    const std::size_t m = ps.dim();
    if (m == 1) {
        std::vector<double> vals;
        vals.reserve(ps.size());
        for (const auto& p : ps.points) vals.push_back(p[0]);
        return tukey_depth_1d(query[0], vals);
    }
    if (m != 2) throw unsupported_error("tukey_depth: only dimensions 1 and 2 are supported");

    constexpr double kCoincident = 1e-12;
    int base = 0;  // points coincident with the query lie in every halfplane
    std::vector<double> angles;
    std::vector<std::pair<double, double>> offsets;
    double scale = 1.0;
    angles.reserve(ps.size());
    for (const auto& p : ps.points) {
        const double dx = p[0] - query[0];
        const double dy = p[1] - query[1];
        if (std::abs(dx) <= kCoincident && std::abs(dy) <= kCoincident) {
            ++base;
        } else {
            angles.push_back(std::atan2(dy, dx));
            offsets.emplace_back(dx, dy);
            scale = std::max(scale, std::max(std::abs(dx), std::abs(dy)));
        }
    }
    if (angles.empty()) return base;

    constexpr double kPi = 3.14159265358979323846;
    auto wrap = [&](double a) {
        while (a <= -kPi) a += 2.0 * kPi;
        while (a > kPi) a -= 2.0 * kPi;
        return a;
    };
    std::vector<double> breaks;
    breaks.reserve(2 * angles.size());
    for (double a : angles) {
        breaks.push_back(wrap(a + kPi / 2.0));
        breaks.push_back(wrap(a - kPi / 2.0));
    }
    std::sort(breaks.begin(), breaks.end());

    // Points within 1e-9 * scale of the boundary count as inside: the query
    // positions handed to this oracle carry solver roundoff of that order.
    const double boundary_tol = 1e-9 * scale;
    auto count_at = [&](double phi) {
        const double ux = std::cos(phi);
        const double uy = std::sin(phi);
        int cnt = base;
        for (const auto& [dx, dy] : offsets) {
            if (ux * dx + uy * dy >= -boundary_tol) ++cnt;
        }
        return cnt;
    };

    int best = static_cast<int>(ps.size());
    for (std::size_t i = 0; i < breaks.size(); ++i) {
        const double a = breaks[i];
        const double b = (i + 1 < breaks.size()) ? breaks[i + 1] : breaks[0] + 2.0 * kPi;
        best = std::min(best, count_at(0.5 * (a + b)));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Exact kernels

// Lower median with a deterministic index certificate.
inline std::pair<double, int> lower_median(const std::vector<double>& values) {
    std::vector<std::pair<double, int>> v;
    v.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) v.emplace_back(values[i], static_cast<int>(i));
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
}

// d = 1 safe point: the lower median lies in [min, max] of every subset that
// keeps all but f of the values, provided f < n/2.
inline SafePointResult safe_point_1d(const std::vector<double>& values, int f) {
    const int n = static_cast<int>(values.size());
    if (n == 0) throw std::invalid_argument("safe_point_1d: empty input");
    if (f < 0 || 2 * f >= n) {
        throw resilience_error("safe_point_1d: requires f < n/2, got f=" + std::to_string(f) +
                               " n=" + std::to_string(n));
    }
    const auto [value, idx] = lower_median(values);
    SafePointResult out;
    out.point = {value};
    out.weights[idx] = 1.0;
    out.mode = Mode::kExact1d;
    return out;
}

// Per-coordinate lower median. Scales to any dimension under f < n/2 but the
// result carries no multi-dimensional hull guarantee.
inline SafePointResult coordinate_wise(const PointSet& ps) {
    const int n = static_cast<int>(ps.size());
    if (n == 0) throw std::invalid_argument("coordinate_wise: empty input");
    if (ps.f < 0 || 2 * ps.f >= n) {
        throw resilience_error("coordinate_wise: requires f < n/2, got f=" + std::to_string(ps.f) +
                               " n=" + std::to_string(n));
    }
    const std::size_t m = ps.dim();
    SafePointResult out;
    out.point.resize(m);
    std::vector<double> col(ps.size());
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t j = 0; j < ps.size(); ++j) col[j] = ps.points[j][c];
        out.point[c] = lower_median(col).first;
    }
    out.mode = Mode::kCoordinateWise;
    return out;
}

namespace detail {

inline std::size_t binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        const std::size_t next = r * (n - k + i) / i;
        if (next < r) return SIZE_MAX;  // overflow guard
        r = next;
    }
    return r;
}

// Visit all f-element index subsets of [0, n) in lexicographic order.
template <class Fn>
void for_each_combination(int n, int f, Fn&& fn) {
    std::vector<int> idx(f);
    std::iota(idx.begin(), idx.end(), 0);
    if (f == 0) {
        fn(idx);
        return;
    }
    while (true) {
        fn(idx);
        int i = f - 1;
        while (i >= 0 && idx[i] == n - f + i) --i;
        if (i < 0) break;
        ++idx[i];
        for (int j = i + 1; j < f; ++j) idx[j] = idx[j - 1] + 1;
    }
}

}  // namespace detail

// Point in the intersection of the convex hulls of all leave-f-out subsets,
// found by one joint feasibility program (x plus one weight vector per
// subset). Nonempty under f < n/(m+1) by Helly's theorem. Weights over the
// full set are reported from the first subset's solution.
inline SafePointResult safe_point_lp(const PointSet& ps, int subset_cap = kDefaultSubsetCap) {
    const int n = static_cast<int>(ps.size());
    const int m = static_cast<int>(ps.dim());
    if (n == 0) throw std::invalid_argument("safe_point_lp: empty input");
    if (ps.f < 0 || ps.f * (m + 1) >= n) {
        throw resilience_error("safe_point_lp: requires f < n/(d+1), got f=" + std::to_string(ps.f) +
                               " n=" + std::to_string(n) + " d=" + std::to_string(m));
    }

    SafePointResult out;
    out.mode = Mode::kExactLp;
    if (ps.f == 0) {
        // Single subset: the centroid is a convex combination of all points.
        out.point.assign(m, 0.0);
        for (const auto& p : ps.points) vec::axpy(1.0, p, out.point);
        vec::scale(out.point, 1.0 / n);
        for (int j = 0; j < n; ++j) out.weights[j] = 1.0 / n;
        return out;
    }

    const std::size_t n_subsets = detail::binomial(n, ps.f);
    if (n_subsets > static_cast<std::size_t>(subset_cap)) {
        throw cap_error("safe_point_lp: " + std::to_string(n_subsets) +
                        " leave-f-out subsets exceed cap " + std::to_string(subset_cap) +
                        "; use coordinate-wise mode");
    }

    const int keep = n - ps.f;
    lp::FeasibilityProblem prob;
    prob.n_vars = 2 * static_cast<std::size_t>(m) + n_subsets * static_cast<std::size_t>(keep);
    prob.rows.reserve(n_subsets * (m + 1));
    prob.rhs.reserve(n_subsets * (m + 1));

    std::vector<std::vector<int>> kept_sets;
    kept_sets.reserve(n_subsets);
    std::size_t s = 0;
    detail::for_each_combination(n, ps.f, [&](const std::vector<int>& removed) {
        std::vector<int> kept;
        kept.reserve(keep);
        std::vector<char> is_removed(n, 0);
        for (int r : removed) is_removed[r] = 1;
        for (int j = 0; j < n; ++j)
            if (!is_removed[j]) kept.push_back(j);

        const std::size_t w0 = 2 * static_cast<std::size_t>(m) + s * keep;
        std::vector<double> sum_row(prob.n_vars, 0.0);
        for (int j = 0; j < keep; ++j) sum_row[w0 + j] = 1.0;
        prob.rows.push_back(std::move(sum_row));
        prob.rhs.push_back(1.0);
        for (int c = 0; c < m; ++c) {
            std::vector<double> row(prob.n_vars, 0.0);
            row[2 * c] = -1.0;      // -x_c^+
            row[2 * c + 1] = 1.0;   // +x_c^-
            for (int j = 0; j < keep; ++j) row[w0 + j] = ps.points[kept[j]][c];
            prob.rows.push_back(std::move(row));
            prob.rhs.push_back(0.0);
        }
        kept_sets.push_back(std::move(kept));
        ++s;
    });

    const auto res = lp::solve_feasibility(prob, 1e-9);
    if (!res.feasible) {
        throw std::logic_error("safe_point_lp: joint program infeasible under a valid precondition");
    }
    const auto& kept0 = kept_sets[0];
    const std::size_t w0 = 2 * static_cast<std::size_t>(m);
    for (std::size_t j = 0; j < kept0.size(); ++j) {
        const double w = res.solution[w0 + j];
        if (w > 1e-12) out.weights[kept0[j]] = w;
    }
    // Recompute the point from the reported weights so the convex-combination
    // certificate reproduces it to machine precision.
    out.point.assign(m, 0.0);
    for (const auto& [j, w] : out.weights) vec::axpy(w, ps.points[j], out.point);
    return out;
}

// 2-D centerpoint: a point of Tukey depth at least ceil(n/3), found by
// scanning a finite candidate set (input points, pairwise segment
// intersections, centroids of triples) against the depth oracle. Falls back
// to the hull-intersection program, whose output has the required depth.
inline SafePointResult centerpoint_2d(const PointSet& ps, int subset_cap = kDefaultSubsetCap) {
    const int n = static_cast<int>(ps.size());
    if (n == 0) throw std::invalid_argument("centerpoint_2d: empty input");
    if (ps.dim() != 2) throw unsupported_error("centerpoint_2d: dimension must be 2");
    if (ps.f < 0 || 3 * ps.f >= n) {
        throw resilience_error("centerpoint_2d: requires f < n/3, got f=" + std::to_string(ps.f) +
                               " n=" + std::to_string(n));
    }
    const int need = (n + 2) / 3;  // ceil(n/3)

    auto try_candidate = [&](const ParamVector& c) -> std::optional<SafePointResult> {
        const int d = tukey_depth(c, ps);
        if (d < need) return std::nullopt;
        auto w = in_hull_weights(c, ps.points);
        if (!w) return std::nullopt;  // depth >= 1 implies membership; guard numerics
        SafePointResult out;
        out.point = c;
        out.weights = std::move(*w);
        out.mode = Mode::kExact2d;
        out.depth = d;
        return out;
    };

    for (const auto& p : ps.points) {
        if (auto r = try_candidate(p)) return *r;
    }
    // Intersections of segments between input points.
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            for (int c = a; c < n; ++c) {
                for (int d = c + 1; d < n; ++d) {
                    if (c == a && d <= b) continue;
                    const double x1 = ps.points[a][0], y1 = ps.points[a][1];
                    const double x2 = ps.points[b][0], y2 = ps.points[b][1];
                    const double x3 = ps.points[c][0], y3 = ps.points[c][1];
                    const double x4 = ps.points[d][0], y4 = ps.points[d][1];
                    const double den = (x1 - x2) * (y3 - y4) - (y1 - y2) * (x3 - x4);
                    if (std::abs(den) < 1e-14) continue;
                    const double t = ((x1 - x3) * (y3 - y4) - (y1 - y3) * (x3 - x4)) / den;
                    const double u = ((x1 - x3) * (y1 - y2) - (y1 - y3) * (x1 - x2)) / den;
                    if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) continue;
                    ParamVector cand{x1 + t * (x2 - x1), y1 + t * (y2 - y1)};
                    if (auto r = try_candidate(cand)) return *r;
                }
            }
        }
    }
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            for (int c = b + 1; c < n; ++c) {
                ParamVector cand{(ps.points[a][0] + ps.points[b][0] + ps.points[c][0]) / 3.0,
                                 (ps.points[a][1] + ps.points[b][1] + ps.points[c][1]) / 3.0};
                if (auto r = try_candidate(cand)) return *r;
            }
        }
    }

    PointSet fallback = ps;
    fallback.f = need - 1;  // largest f with f < n/3; gives depth >= need
    SafePointResult out = safe_point_lp(fallback, subset_cap);
    out.depth = tukey_depth(out.point, ps);
    return out;
}

}  // namespace safesgd::rvc

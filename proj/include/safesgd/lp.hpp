#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace safesgd::lp {

// Equality-constrained feasibility: find z >= 0 with A z = b.
// Free variables must be split into positive/negative parts by the caller.
struct FeasibilityProblem {
    std::size_t n_vars = 0;
    std::vector<std::vector<double>> rows;  // each of size n_vars
    std::vector<double> rhs;                // same length as rows
};

struct FeasibilityResult {
    bool feasible = false;
    double residual = std::numeric_limits<double>::infinity();  // phase-1 optimum
    std::vector<double> solution;                               // size n_vars when feasible
};

// Phase-1 simplex with Bland's rule. Deterministic: identical inputs yield the
// identical basic feasible solution. `tol` bounds the accepted residual on the
// (row-scaled) equality system.
inline FeasibilityResult solve_feasibility(const FeasibilityProblem& p, double tol = 1e-9) {
    const std::size_t m = p.rows.size();
    const std::size_t n = p.n_vars;
    FeasibilityResult out;
    if (m == 0) {
        out.feasible = true;
        out.residual = 0.0;
        out.solution.assign(n, 0.0);
        return out;
    }

    const std::size_t ncols = n + m + 1;  // structural + artificial + rhs
    std::vector<double> tab(m * ncols, 0.0);
    auto at = [&](std::size_t i, std::size_t j) -> double& { return tab[i * ncols + j]; };

    for (std::size_t i = 0; i < m; ++i) {
        double row_scale = 1.0;
        for (std::size_t j = 0; j < n; ++j) row_scale = std::max(row_scale, std::abs(p.rows[i][j]));
        const double inv = 1.0 / row_scale;
        double b = p.rhs[i] * inv;
        const double sign = (b < 0.0) ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n; ++j) at(i, j) = sign * p.rows[i][j] * inv;
        at(i, n + i) = 1.0;
        at(i, ncols - 1) = sign * b;
    }

    std::vector<std::size_t> basis(m);
    for (std::size_t i = 0; i < m; ++i) basis[i] = n + i;

    // Reduced costs for minimizing the sum of artificials.
    std::vector<double> red(ncols, 0.0);
    for (std::size_t j = 0; j < ncols; ++j) {
        double colsum = 0.0;
        for (std::size_t i = 0; i < m; ++i) colsum += at(i, j);
        red[j] = (j >= n && j < n + m ? 1.0 : 0.0) - colsum;
    }

    constexpr double kPivotEps = 1e-11;
    constexpr double kCostEps = 1e-10;
    const std::size_t max_iters = 200 * (m + n) + 10000;

    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        // Bland: smallest-index improving column.
        std::size_t enter = ncols;
        for (std::size_t j = 0; j + 1 < ncols; ++j) {
            if (red[j] < -kCostEps) {
                enter = j;
                break;
            }
        }
        if (enter == ncols) break;

        std::size_t leave = m;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            const double a = at(i, enter);
            if (a > kPivotEps) {
                const double ratio = at(i, ncols - 1) / a;
                if (ratio < best_ratio - 1e-15 ||
                    (ratio < best_ratio + 1e-15 && (leave == m || basis[i] < basis[leave]))) {
                    best_ratio = ratio;
                    leave = i;
                }
            }
        }
        if (leave == m) break;  // cannot happen in phase 1; defensive

        // Pivot on (leave, enter).
        const double piv = at(leave, enter);
        for (std::size_t j = 0; j < ncols; ++j) at(leave, j) /= piv;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == leave) continue;
            const double f = at(i, enter);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < ncols; ++j) at(i, j) -= f * at(leave, j);
            at(i, enter) = 0.0;
        }
        const double fr = red[enter];
        if (fr != 0.0) {
            for (std::size_t j = 0; j < ncols; ++j) red[j] -= fr * at(leave, j);
            red[enter] = 0.0;
        }
        basis[leave] = enter;
    }

    double residual = 0.0;
    std::vector<double> z(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double v = at(i, ncols - 1);
        if (basis[i] < n) {
            z[basis[i]] = std::max(0.0, v);
        } else {
            residual += std::abs(v);
        }
    }
    out.residual = residual;
    out.feasible = residual <= tol;
    if (out.feasible) out.solution = std::move(z);
    return out;
}

}  // namespace safesgd::lp

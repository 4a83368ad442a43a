#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "safesgd/common.hpp"
#include "safesgd/data.hpp"
#include "safesgd/net.hpp"
#include "safesgd/rng.hpp"

namespace safesgd::inversion {

// Gradient-inversion harness: reconstruct a training point from its shared
// single-sample gradient by matching gradients over the 2-D input space.

struct AttackResult {
    std::array<double, 2> estimated_sample{0.0, 0.0};
    int inferred_label = 0;
    std::vector<double> distance_trace;  // per attack iteration, best restart
    std::vector<double> j_trace;         // gradient-matching objective, best restart
    double best_j = std::numeric_limits<double>::infinity();
    bool diverged = false;  // line search stalled 100 consecutive iterations
};

// The output-bias gradient component of a single-sample gradient equals
// p - y with p in (0,1), so its sign reveals the label exactly.
inline int infer_label(const ParamVector& target_grad) {
    const double e = target_grad[net::kParamCount - 1];
    if (e == 0.0) throw std::domain_error("infer_label: output-bias component is exactly zero");
    return e < 0.0 ? 1 : 0;
}

namespace detail {

inline double objective(const ParamVector& params, double x1, double x2, int label,
                        const ParamVector& target_grad) {
    const data::Sample s{x1, x2, label};
    const ParamVector g = net::grad_params(params, std::span(&s, 1));
    double j = 0.0;
    for (int i = 0; i < net::kParamCount; ++i) {
        const double d = g[i] - target_grad[i];
        j += d * d;
    }
    return j;
}

}  // namespace detail

struct DescentTrace {
    std::array<double, 2> best_x{0.0, 0.0};
    double best_j = std::numeric_limits<double>::infinity();
    std::vector<std::array<double, 2>> iterates;  // one per attack iteration
    std::vector<double> j_values;
    bool diverged = false;
};

// Plain gradient descent on J(x) = ||grad(params; (x, label)) - target||^2
// with two-way backtracking line search: the accepted step carries over, is
// doubled before each search, and is halved until the objective decreases.
// The descent direction comes from central differences of the inner gradient
// with step 1e-5.
inline DescentTrace descend(const ParamVector& params, const ParamVector& target_grad, int label,
                            std::array<double, 2> x0, int attack_iters, double step) {
    constexpr double kFdStep = 1e-5;
    constexpr int kMaxHalvings = 60;
    DescentTrace tr;
    tr.iterates.reserve(static_cast<std::size_t>(attack_iters));
    tr.j_values.reserve(static_cast<std::size_t>(attack_iters));
    std::array<double, 2> x = x0;
    double j = detail::objective(params, x[0], x[1], label, target_grad);
    tr.best_x = x;
    tr.best_j = j;
    int stalled = 0;
    double t = step;
    for (int it = 0; it < attack_iters; ++it) {
        const double jpx = detail::objective(params, x[0] + kFdStep, x[1], label, target_grad);
        const double jmx = detail::objective(params, x[0] - kFdStep, x[1], label, target_grad);
        const double jpy = detail::objective(params, x[0], x[1] + kFdStep, label, target_grad);
        const double jmy = detail::objective(params, x[0], x[1] - kFdStep, label, target_grad);
        const std::array<double, 2> g{(jpx - jmx) / (2.0 * kFdStep), (jpy - jmy) / (2.0 * kFdStep)};

        t *= 2.0;
        bool moved = false;
        for (int h = 0; h < kMaxHalvings; ++h) {
            const std::array<double, 2> cand{x[0] - t * g[0], x[1] - t * g[1]};
            const double jc = detail::objective(params, cand[0], cand[1], label, target_grad);
            if (jc < j) {
                x = cand;
                j = jc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) t = step;  // full stall: reset the carried step
        stalled = moved ? 0 : stalled + 1;
        if (stalled >= 100) tr.diverged = true;
        if (j < tr.best_j) {
            tr.best_j = j;
            tr.best_x = x;
        }
        tr.iterates.push_back(x);
        tr.j_values.push_back(j);
    }
    return tr;
}

struct ReconstructOptions {
    int attack_iters = 2000;
    double step = 0.1;
    int restarts = 10;
    double init_half_width = 8.5;  // padded data range
};

// Infer the label analytically, then run multi-restart descent; the returned
// sample and traces come from the restart attaining the smallest objective.
// `true_input` is used only to fill the distance trace.
inline AttackResult reconstruct(const ParamVector& params, const ParamVector& target_grad,
                                std::array<double, 2> true_input, const ReconstructOptions& opt,
                                Rng& rng) {
    if (opt.attack_iters < 1) throw std::domain_error("reconstruct: attack_iters must be at least 1");
    AttackResult out;
    out.inferred_label = infer_label(target_grad);
    DescentTrace best;
    for (int restart = 0; restart < opt.restarts; ++restart) {
        const std::array<double, 2> x0{rng.uniform(-opt.init_half_width, opt.init_half_width),
                                       rng.uniform(-opt.init_half_width, opt.init_half_width)};
        DescentTrace tr = descend(params, target_grad, out.inferred_label, x0, opt.attack_iters,
                                  opt.step);
        if (tr.best_j < best.best_j) best = std::move(tr);
    }
    out.estimated_sample = best.best_x;
    out.best_j = best.best_j;
    out.diverged = best.diverged;
    out.j_trace = std::move(best.j_values);
    out.distance_trace.reserve(best.iterates.size());
    for (const auto& x : best.iterates) {
        out.distance_trace.push_back(std::hypot(x[0] - true_input[0], x[1] - true_input[1]));
    }
    return out;
}

}  // namespace safesgd::inversion

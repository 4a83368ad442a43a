#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "safesgd/common.hpp"
#include "safesgd/data.hpp"
#include "safesgd/rng.hpp"
#include "safesgd/vecmath.hpp"

namespace safesgd::net {

// Fixed 2-4-1 perceptron: tanh hidden layer, sigmoid output, binary cross
// entropy. Parameters are exchanged between agents as one flat vector with
// this layout (kept stable across implementations):
//
//   [0..7]   W1[j][c], hidden unit j in 0..3, input c in 0..1, index 2*j + c
//   [8..11]  b1[j]
//   [12..15] w2[j]
//   [16]     b2
inline constexpr int kParamCount = 17;

// Probabilities are clamped away from {0,1} before the logarithm so the loss
// stays finite; the clamp is far below any probability reachable at the
// parameter scales used here.
inline constexpr double kProbClamp = 1e-12;

inline double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

// Entries i.i.d. uniform in [-scale, scale].
inline ParamVector init_params(Rng& rng, double scale) {
    ParamVector p(kParamCount);
    for (double& v : p) v = rng.uniform(-scale, scale);
    return p;
}

struct ForwardTrace {
    std::array<double, 4> z;  // pre-activations
    std::array<double, 4> h;  // tanh(z)
    double u = 0.0;           // output pre-activation
    double p = 0.0;           // sigmoid(u)
};

inline ForwardTrace forward_trace(const ParamVector& params, const data::Sample& s) {
    ForwardTrace t;
    for (int j = 0; j < 4; ++j) {
        t.z[j] = params[2 * j] * s.x1 + params[2 * j + 1] * s.x2 + params[8 + j];
        t.h[j] = std::tanh(t.z[j]);
    }
    t.u = params[16];
    for (int j = 0; j < 4; ++j) t.u += params[12 + j] * t.h[j];
    t.p = sigmoid(t.u);
    return t;
}

inline double forward(const ParamVector& params, const data::Sample& s) {
    return forward_trace(params, s).p;
}

inline double sample_loss(const ParamVector& params, const data::Sample& s) {
    double p = forward(params, s);
    p = std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
    return s.label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

// Mean binary cross entropy over the batch.
inline double loss(const ParamVector& params, std::span<const data::Sample> batch) {
    if (batch.empty()) throw std::invalid_argument("loss: empty batch");
    double total = 0.0;
    for (const auto& s : batch) total += sample_loss(params, s);
    return total / static_cast<double>(batch.size());
}

inline void accumulate_sample_grad(const ParamVector& params, const data::Sample& s, ParamVector& acc) {
    const ForwardTrace t = forward_trace(params, s);
    const double e = t.p - static_cast<double>(s.label);  // dL/du for sigmoid + BCE
    for (int j = 0; j < 4; ++j) {
        const double dz = e * params[12 + j] * (1.0 - t.h[j] * t.h[j]);
        acc[2 * j] += dz * s.x1;
        acc[2 * j + 1] += dz * s.x2;
        acc[8 + j] += dz;
        acc[12 + j] += e * t.h[j];
    }
    acc[16] += e;
}

// Analytic gradient of the batch loss with respect to all 17 parameters.
inline ParamVector grad_params(const ParamVector& params, std::span<const data::Sample> batch) {
    if (batch.empty()) throw std::invalid_argument("grad_params: empty batch");
    ParamVector g(kParamCount, 0.0);
    for (const auto& s : batch) accumulate_sample_grad(params, s, g);
    vec::scale(g, 1.0 / static_cast<double>(batch.size()));
    return g;
}

// Gradient of the single-sample loss with respect to the input coordinates.
inline std::array<double, 2> grad_wrt_input(const ParamVector& params, const data::Sample& s) {
    const ForwardTrace t = forward_trace(params, s);
    const double e = t.p - static_cast<double>(s.label);
    std::array<double, 2> g{0.0, 0.0};
    for (int j = 0; j < 4; ++j) {
        const double dz = e * params[12 + j] * (1.0 - t.h[j] * t.h[j]);
        g[0] += dz * params[2 * j];
        g[1] += dz * params[2 * j + 1];
    }
    return g;
}

// Central-difference step for differentiating the parameter gradient with
// respect to the inputs; balances truncation against roundoff in doubles.
inline constexpr double kInputJacobianStep = 1e-5;

// 17x2 matrix d(grad_params)/d(x1,x2) for one sample, by central differences.
inline std::array<ParamVector, 2> input_jacobian_of_grad(const ParamVector& params,
                                                         const data::Sample& s,
                                                         double h = kInputJacobianStep) {
    std::array<ParamVector, 2> cols;
    for (int c = 0; c < 2; ++c) {
        data::Sample lo = s;
        data::Sample hi = s;
        (c == 0 ? hi.x1 : hi.x2) += h;
        (c == 0 ? lo.x1 : lo.x2) -= h;
        const ParamVector ghi = grad_params(params, std::span(&hi, 1));
        const ParamVector glo = grad_params(params, std::span(&lo, 1));
        ParamVector col(kParamCount);
        for (int i = 0; i < kParamCount; ++i) col[i] = (ghi[i] - glo[i]) / (2.0 * h);
        cols[c] = std::move(col);
    }
    return cols;
}

// Spectral norm of the 17x2 jacobian via the closed-form eigenvalues of the
// 2x2 Gram matrix.
inline double jacobian_spectral_norm(const std::array<ParamVector, 2>& cols) {
    const double a = vec::dot(cols[0], cols[0]);
    const double b = vec::dot(cols[0], cols[1]);
    const double d = vec::dot(cols[1], cols[1]);
    const double tr = a + d;
    const double det = a * d - b * b;
    const double disc = std::max(0.0, tr * tr - 4.0 * det);
    const double lam = 0.5 * (tr + std::sqrt(disc));
    return std::sqrt(std::max(0.0, lam));
}

// Rescale to the threshold when the 2-norm exceeds it. The comparison allows
// one part in 1e14 so an already-clipped vector is a fixed point despite
// rounding in the norm recomputation.
inline ParamVector clip(const ParamVector& grad, double threshold) {
    if (threshold <= 0.0) throw std::invalid_argument("clip: threshold must be positive");
    const double n = vec::norm2(grad);
    if (n <= threshold * (1.0 + 1e-14)) return grad;
    ParamVector out = grad;
    vec::scale(out, threshold / n);
    return out;
}

struct NoiseSpec {
    double sigma = 0.0;  // per-coordinate standard deviation; covariance sigma^2 * I
    int dim = kParamCount;
};

struct StepResult {
    ParamVector params;
    ParamVector noise;  // the drawn eta, kept for audit logging
};

// params - gamma * (grad_params(batch) + eta), eta ~ N(0, sigma^2 I).
inline StepResult noisy_step(const ParamVector& params, std::span<const data::Sample> batch,
                             double gamma, const NoiseSpec& noise, Rng& rng) {
    if (gamma < 0.0) throw std::invalid_argument("noisy_step: gamma must be nonnegative");
    ParamVector g = grad_params(params, batch);
    ParamVector eta(noise.dim, 0.0);
    if (noise.sigma > 0.0) {
        for (double& v : eta) v = noise.sigma * rng.gaussian();
    }
    StepResult out{params, std::move(eta)};
    for (int i = 0; i < noise.dim; ++i) out.params[i] -= gamma * (g[i] + out.noise[i]);
    return out;
}

// Flat comma-separated line, round-trip exact at 17 significant digits.
inline std::string serialize(const ParamVector& params) {
    std::string out;
    char buf[64];
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", params[i]);
        if (i) out += ',';
        out += buf;
    }
    return out;
}

inline ParamVector parse(const std::string& line) {
    ParamVector out;
    const char* p = line.c_str();
    char* end = nullptr;
    while (*p) {
        const double v = std::strtod(p, &end);
        if (end == p) throw config_error("param vector parse: bad token in '" + line + "'");
        out.push_back(v);
        p = end;
        while (*p == ',' || *p == ' ') ++p;
    }
    return out;
}

// Classification accuracy at threshold 0.5.
inline double accuracy(const ParamVector& params, std::span<const data::Sample> set) {
    if (set.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& s : set) {
        const int pred = forward(params, s) > 0.5 ? 1 : 0;
        if (pred == s.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(set.size());
}

// Model facade used by the generic protocol loop.
struct Mlp241Model {
    int dim() const { return kParamCount; }
    ParamVector init(Rng& rng, double scale) const { return init_params(rng, scale); }
    double loss(const ParamVector& p, std::span<const data::Sample> b) const { return net::loss(p, b); }
    ParamVector grad(const ParamVector& p, std::span<const data::Sample> b) const {
        return grad_params(p, b);
    }
    double accuracy(const ParamVector& p, std::span<const data::Sample> s) const {
        return net::accuracy(p, s);
    }
};

}  // namespace safesgd::net

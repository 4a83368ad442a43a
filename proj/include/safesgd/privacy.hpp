#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "safesgd/common.hpp"
#include "safesgd/data.hpp"
#include "safesgd/net.hpp"
#include "safesgd/rng.hpp"

namespace safesgd::privacy {

// Inputs to the closed-form accountant. `zeta` is the subsampling rate b/|D|,
// `L_prime` the input-Lipschitz constant of the gradient, `G` the gradient
// norm bound used by the classic accountant, `r` the input-distance radius of
// the geo guarantee. Natural logarithms throughout.
struct PrivacyParams {
    double K = 8000;
    double zeta = 16.0 / 1122.0;
    double sigma = 2.0;
    double L_prime = 0.84;
    double G = 9.2;
    double delta = 1e-5;
    double r = 0.0;
};

struct PrivacyReport {
    double rho = 0.0;
    double eps_geo = 0.0;
    double eps_dp = 0.0;
    double d_rho = 0.0;      // d rho / d(-sigma^2)
    double d_eps_geo = 0.0;  // d eps_geo / d(-sigma^2)
    double d_eps_dp = 0.0;   // d eps_dp / d(-sigma^2)
    std::vector<std::string> validity_flags;
};

namespace detail {

inline void require_positive(double v, const char* name) {
    if (!(v > 0.0)) throw std::domain_error(std::string(name) + " must be positive");
}

inline void require_delta(double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::domain_error("delta must lie in (0, 1)");
}

}  // namespace detail

// Renyi bound for the subsampled Gaussian mechanism (uniform sampling without
// replacement): alpha * 5 zeta^2 S^2 / sigma^2. The stated validity region is
// sigma^2/S^2 >= 1.5 and alpha <= log(S^2 / (zeta (S^2 + sigma^2))); outside
// it the value is still computed and a flag is recorded.
inline double rdp_subsampled_gaussian(double alpha, double zeta, double sensitivity, double sigma,
                                      std::vector<std::string>* flags = nullptr) {
    if (!(alpha > 1.0)) throw std::domain_error("alpha must exceed 1");
    if (zeta < 0.0 || zeta > 1.0) throw std::domain_error("zeta must lie in [0, 1]");
    detail::require_positive(sensitivity, "sensitivity");
    detail::require_positive(sigma, "sigma");
    const double s2 = sensitivity * sensitivity;
    if (flags) {
        if (sigma * sigma / s2 < 1.5) {
            flags->push_back("sigma^2/S^2 < 1.5: outside the subsampled-Gaussian validity region");
        }
        if (zeta > 0.0 && alpha > std::log(s2 / (zeta * (s2 + sigma * sigma)))) {
            flags->push_back("alpha exceeds log(S^2/(zeta(S^2+sigma^2)))");
        }
    }
    return alpha * 5.0 * zeta * zeta * s2 / (sigma * sigma);
}

// Composed concentrated geo-privacy budget over K iterations: 5 K zeta^2 L'^2 / sigma^2.
inline double cgp_budget(double K, double zeta, double L_prime, double sigma) {
    if (!(K >= 1.0)) throw std::domain_error("K must be at least 1");
    detail::require_positive(sigma, "sigma");
    if (zeta < 0.0) throw std::domain_error("zeta must be nonnegative");
    if (L_prime < 0.0) throw std::domain_error("L_prime must be nonnegative");
    // Grouped so that composition over K iterations is exactly linear.
    return K * (5.0 * zeta * zeta * L_prime * L_prime / (sigma * sigma));
}

// Geo-privacy parameter for a given CGP budget: rho * r + 2 sqrt(rho log(1/delta)).
inline double gp_from_cgp(double rho, double delta, double r) {
    detail::require_delta(delta);
    if (rho < 0.0) throw std::domain_error("rho must be nonnegative");
    if (r < 0.0) throw std::domain_error("r must be nonnegative");
    return rho * r + 2.0 * std::sqrt(rho * std::log(1.0 / delta));
}

// Classic accountant: 20 G^2 zeta^2 K / sigma^2 + (2 G zeta / sigma) sqrt(20 K log(1/delta)).
inline double dp_epsilon(double K, double zeta, double G, double sigma, double delta) {
    if (!(K >= 1.0)) throw std::domain_error("K must be at least 1");
    detail::require_positive(sigma, "sigma");
    detail::require_delta(delta);
    if (zeta < 0.0) throw std::domain_error("zeta must be nonnegative");
    if (G < 0.0) throw std::domain_error("G must be nonnegative");
    return 20.0 * G * G * zeta * zeta * K / (sigma * sigma) +
           (2.0 * G * zeta / sigma) * std::sqrt(20.0 * K * std::log(1.0 / delta));
}

struct TradeoffDerivatives {
    double d_rho = 0.0;
    double d_eps_geo = 0.0;
    double d_eps_dp = 0.0;
};

// Derivatives of each budget with respect to -sigma^2: the rate at which the
// privacy parameter degrades as accuracy is bought back by lowering the noise.
inline TradeoffDerivatives tradeoff_derivatives(const PrivacyParams& p) {
    detail::require_positive(p.sigma, "sigma");
    detail::require_delta(p.delta);
    const double s2 = p.sigma * p.sigma;
    const double s3 = s2 * p.sigma;
    const double s4 = s2 * s2;
    const double root = std::sqrt(20.0 * p.K * std::log(1.0 / p.delta));
    TradeoffDerivatives d;
    d.d_rho = 5.0 * p.K * p.zeta * p.zeta * p.L_prime * p.L_prime / s4;
    d.d_eps_geo = d.d_rho * p.r + (p.zeta * p.L_prime / (2.0 * s3)) * root;
    d.d_eps_dp = 20.0 * p.G * p.G * p.zeta * p.zeta * p.K / s4 + (p.G * p.zeta / s3) * root;
    return d;
}

// Full report: budgets, trade-off derivatives, and validity flags for the CGP
// preconditions (no admissible Renyi order means the composed bound's stated
// validity region is empty at these parameters).
inline PrivacyReport evaluate(const PrivacyParams& p) {
    PrivacyReport rep;
    rep.rho = cgp_budget(p.K, p.zeta, p.L_prime, p.sigma);
    rep.eps_geo = gp_from_cgp(rep.rho, p.delta, p.r);
    rep.eps_dp = dp_epsilon(p.K, p.zeta, p.G, p.sigma, p.delta);
    const TradeoffDerivatives d = tradeoff_derivatives(p);
    rep.d_rho = d.d_rho;
    rep.d_eps_geo = d.d_eps_geo;
    rep.d_eps_dp = d.d_eps_dp;
    const double l2 = p.L_prime * p.L_prime;
    if (p.sigma * p.sigma / l2 < 1.5) {
        rep.validity_flags.push_back("sigma^2/L'^2 < 1.5: outside the CGP validity region");
    }
    if (p.zeta > 0.0 && std::log(l2 / (p.zeta * (l2 + p.sigma * p.sigma))) <= 1.0) {
        rep.validity_flags.push_back("no admissible Renyi order alpha > 1 at these parameters");
    }
    return rep;
}

// Back-solve the input radius from a target geo budget at a reference rho.
inline double backsolve_radius(double rho, double delta, double eps_geo_target) {
    detail::require_delta(delta);
    detail::require_positive(rho, "rho");
    return (eps_geo_target - 2.0 * std::sqrt(rho * std::log(1.0 / delta))) / rho;
}

// ---------------------------------------------------------------------------
// Empirical sensitivity estimation on the 2-4-1 network

struct EstimateResult {
    double value = 0.0;
    std::vector<double> trace;  // running maximum after each iteration
};

struct EstimateOptions {
    int iterations = 3000;
    int batch = 16;
    double gamma = 0.01;
    double init_scale = 0.5;
};

// Running maximum of per-sample gradient norms over the full shard, evaluated
// before each local SGD step. Estimates the gradient-norm bound G.
inline EstimateResult estimate_G(const data::DatasetShard& shard, const EstimateOptions& opt,
                                 Rng& rng) {
    if (opt.iterations < 1) throw std::domain_error("estimate_G: iterations must be at least 1");
    if (shard.train.empty()) throw estimation_error("estimate_G: empty shard");
    EstimateResult out;
    out.trace.reserve(static_cast<std::size_t>(opt.iterations));
    ParamVector params = net::init_params(rng, opt.init_scale);
    const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(opt.batch),
                                                shard.train.size());
    for (int it = 0; it < opt.iterations; ++it) {
        for (const auto& s : shard.train) {
            const ParamVector g = net::grad_params(params, std::span(&s, 1));
            out.value = std::max(out.value, vec::norm2(g));
        }
        out.trace.push_back(out.value);
        const auto idx = rng.sample_without_replacement(shard.train.size(), b);
        std::vector<data::Sample> batch;
        batch.reserve(b);
        for (std::size_t j : idx) batch.push_back(shard.train[j]);
        const ParamVector g = net::grad_params(params, std::span(batch));
        vec::axpy(-opt.gamma, g, params);
    }
    return out;
}

// Running maximum of the spectral norm of d(grad)/d(input) over the full
// shard. Estimates the input-Lipschitz constant L'.
inline EstimateResult estimate_L_prime(const data::DatasetShard& shard, const EstimateOptions& opt,
                                       Rng& rng) {
    if (opt.iterations < 1) throw std::domain_error("estimate_L_prime: iterations must be at least 1");
    if (shard.train.empty()) throw estimation_error("estimate_L_prime: empty shard");
    EstimateResult out;
    out.trace.reserve(static_cast<std::size_t>(opt.iterations));
    ParamVector params = net::init_params(rng, opt.init_scale);
    const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(opt.batch),
                                                shard.train.size());
    for (int it = 0; it < opt.iterations; ++it) {
        for (const auto& s : shard.train) {
            const auto jac = net::input_jacobian_of_grad(params, s);
            out.value = std::max(out.value, net::jacobian_spectral_norm(jac));
        }
        out.trace.push_back(out.value);
        const auto idx = rng.sample_without_replacement(shard.train.size(), b);
        std::vector<data::Sample> batch;
        batch.reserve(b);
        for (std::size_t j : idx) batch.push_back(shard.train[j]);
        const ParamVector g = net::grad_params(params, std::span(batch));
        vec::axpy(-opt.gamma, g, params);
    }
    return out;
}

}  // namespace safesgd::privacy

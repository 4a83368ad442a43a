#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "safesgd/common.hpp"
#include "safesgd/config.hpp"
#include "safesgd/inversion.hpp"
#include "safesgd/privacy.hpp"
#include "safesgd/protocol.hpp"

namespace safesgd::cli {

struct CliOptions {
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> rvc_mode;
};

namespace detail {

inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline RunConfig load(const CliOptions& opt) {
    RunConfig cfg = parse_config_file(opt.config_path);
    if (opt.out_dir) cfg.out_dir = *opt.out_dir;
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.rvc_mode) cfg.rvc_mode = *opt.rvc_mode;
    validate(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    return cfg;
}

inline void write_manifest(const RunConfig& cfg, const std::string& command) {
    std::ofstream os(std::filesystem::path(cfg.out_dir) / "run_manifest.txt");
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(cfg.config_hash));
    os << "command = " << command << "\n"
       << "version = " << kVersion << "\n"
       << "config_hash = " << hash << "\n"
       << "seed = " << cfg.seed << "\n";
}

inline void write_metrics_csv(const protocol::RunMetrics& m, const std::string& path) {
    std::ofstream os(path);
    os << "k,delta,grad_norm_sq,test_acc,lambda,chi_sq\n";
    for (std::size_t k = 0; k < m.iters.size(); ++k) {
        const auto& it = m.iters[k];
        os << k << ',' << fmt(it.delta) << ',' << fmt(it.grad_norm_sq) << ',' << fmt(it.test_acc)
           << ',' << fmt(it.lambda) << ',' << fmt(it.chi_sq) << '\n';
    }
}

template <class Model>
protocol::RunMetrics run_with_model(const Model& model, const RunConfig& cfg,
                                    protocol::RunHooks* hooks) {
    return protocol::run(model, cfg.make_topology(), cfg.make_shards(), cfg.make_run_options(),
                         hooks);
}

inline protocol::RunMetrics dispatch_run(const RunConfig& cfg, protocol::RunHooks* hooks = nullptr) {
    if (cfg.model == "logistic2") return run_with_model(protocol::LogisticPairModel{}, cfg, hooks);
    return run_with_model(net::Mlp241Model{}, cfg, hooks);
}

template <class Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const cap_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const resilience_error& e) {
        std::cerr << "resilience abort: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace detail

// Full decentralized training run: metrics CSV, summary, manifest, optional
// per-message audit log. Exit 0 on success, 2 on configuration errors, 3 when
// a resilience condition fails.
inline int cmd_run(const CliOptions& opt) {
    return detail::guarded([&] {
        const RunConfig cfg = detail::load(opt);
        const std::filesystem::path out(cfg.out_dir);

        std::ofstream audit;
        protocol::RunHooks hooks;
        protocol::RunHooks* hooks_ptr = nullptr;
        if (cfg.audit_log) {
            audit.open(out / "audit.csv");
            audit << "k,sender,receiver,values\n";
            hooks.on_iteration = [&](const protocol::IterationLog& log) {
                for (const auto& rec : log.records) {
                    for (std::size_t j = 0; j < rec.senders.size(); ++j) {
                        audit << log.k << ',' << rec.senders[j] << ',' << rec.agent;
                        for (double v : rec.messages[j]) audit << ',' << detail::fmt(v);
                        audit << '\n';
                    }
                }
            };
            hooks_ptr = &hooks;
        }

        const protocol::RunMetrics metrics = detail::dispatch_run(cfg, hooks_ptr);
        detail::write_metrics_csv(metrics, (out / "metrics.csv").string());

        double grad_tail = 0.0;
        std::size_t grad_cnt = 0;
        const std::size_t tail_start = metrics.iters.size() - metrics.iters.size() / 10;
        for (std::size_t k = tail_start; k < metrics.iters.size(); ++k) {
            if (std::isfinite(metrics.iters[k].grad_norm_sq)) {
                grad_tail += metrics.iters[k].grad_norm_sq;
                ++grad_cnt;
            }
        }
        std::ofstream sum(out / "summary.txt");
        sum << "final_test_acc = " << detail::fmt(metrics.final_test_acc) << "\n"
            << "final_delta = " << detail::fmt(metrics.final_delta) << "\n"
            << "mean_grad_norm_sq_last_10pct = "
            << detail::fmt(grad_cnt ? grad_tail / grad_cnt : protocol::kNaN) << "\n"
            << "rvc_mode = " << cfg.rvc_mode << "\n"
            << "aggregation_dim = " << metrics.info.d << "\n"
            << "iterations = " << metrics.iters.size() << "\n";
        detail::write_manifest(cfg, "run");
        return 0;
    });
}

// Privacy budgets and trade-off derivatives over a sigma grid.
inline int cmd_privacy_sweep(const CliOptions& opt, double sigma_min, double sigma_max, int steps) {
    return detail::guarded([&] {
        if (!(sigma_min > 0.0) || sigma_max < sigma_min || steps < 1) {
            throw config_error("privacy-sweep: need 0 < sigma_min <= sigma_max and steps >= 1");
        }
        const RunConfig cfg = detail::load(opt);
        const double zeta = cfg.zeta();

        double radius = 0.0;
        bool backsolved = false;
        if (cfg.r && cfg.eps_geo_target) {
            throw config_error("privacy-sweep: give either r or eps_geo_target, not both");
        } else if (cfg.eps_geo_target) {
            const double rho_ref =
                privacy::cgp_budget(static_cast<double>(cfg.K), zeta, cfg.L_prime,
                                    cfg.eps_geo_target_sigma);
            radius = privacy::backsolve_radius(rho_ref, cfg.delta, *cfg.eps_geo_target);
            if (radius < 0.0) {
                throw config_error("privacy-sweep: eps_geo_target below the r=0 floor");
            }
            backsolved = true;
        } else if (cfg.r) {
            radius = *cfg.r;
        } else {
            throw config_error("privacy-sweep: the radius r is required (set r or eps_geo_target)");
        }

        const std::filesystem::path out(cfg.out_dir);
        std::ofstream os(out / "privacy_sweep.csv");
        os << "sigma,rho,eps_geo,eps_dp,d_rho,d_eps_geo,d_eps_dp\n";
        for (int i = 0; i < steps; ++i) {
            const double t = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
            const double sigma = sigma_min + (sigma_max - sigma_min) * t;
            privacy::PrivacyParams p{static_cast<double>(cfg.K), zeta, sigma,
                                     cfg.L_prime,                cfg.G, cfg.delta, radius};
            const privacy::PrivacyReport rep = privacy::evaluate(p);
            os << detail::fmt(sigma) << ',' << detail::fmt(rep.rho) << ',' << detail::fmt(rep.eps_geo)
               << ',' << detail::fmt(rep.eps_dp) << ',' << detail::fmt(rep.d_rho) << ','
               << detail::fmt(rep.d_eps_geo) << ',' << detail::fmt(rep.d_eps_dp) << '\n';
        }

        privacy::PrivacyParams ref{static_cast<double>(cfg.K), zeta, cfg.eps_geo_target_sigma,
                                   cfg.L_prime,                cfg.G, cfg.delta, radius};
        const privacy::PrivacyReport rep = privacy::evaluate(ref);
        std::ofstream sum(out / "sweep_summary.txt");
        sum << "zeta = " << detail::fmt(zeta) << "\n"
            << "r = " << detail::fmt(radius) << (backsolved ? "  # back-solved" : "") << "\n"
            << "sigma_ref = " << detail::fmt(cfg.eps_geo_target_sigma) << "\n"
            << "rho = " << detail::fmt(rep.rho) << "\n"
            << "eps_geo = " << detail::fmt(rep.eps_geo) << "\n"
            << "eps_dp = " << detail::fmt(rep.eps_dp) << "\n";
        for (const auto& flag : rep.validity_flags) sum << "flag = " << flag << "\n";
        detail::write_manifest(cfg, "privacy-sweep");
        return 0;
    });
}

// Empirical estimation of the gradient-norm bound G and the input-Lipschitz
// constant L' by local training, with per-iteration running-max traces.
inline int cmd_estimate(const CliOptions& opt) {
    return detail::guarded([&] {
        const RunConfig cfg = detail::load(opt);
        const auto shards = cfg.make_shards();
        const auto& shard = shards[static_cast<std::size_t>(cfg.est_agent)];
        privacy::EstimateOptions eopt{cfg.est_iterations, cfg.est_batch, cfg.est_gamma,
                                      cfg.init_scale};

        Rng rng_g = Rng::stream(cfg.seed, StreamTag::kEstimator, 0);
        const privacy::EstimateResult g = privacy::estimate_G(shard, eopt, rng_g);
        Rng rng_l = Rng::stream(cfg.seed, StreamTag::kEstimator, 1);
        const privacy::EstimateResult lp = privacy::estimate_L_prime(shard, eopt, rng_l);

        const std::filesystem::path out(cfg.out_dir);
        {
            std::ofstream os(out / "estimate_g.csv");
            os << "iter,max_grad_norm\n";
            for (std::size_t i = 0; i < g.trace.size(); ++i) {
                os << i << ',' << detail::fmt(g.trace[i]) << '\n';
            }
        }
        {
            std::ofstream os(out / "estimate_lprime.csv");
            os << "iter,max_input_jacobian_norm\n";
            for (std::size_t i = 0; i < lp.trace.size(); ++i) {
                os << i << ',' << detail::fmt(lp.trace[i]) << '\n';
            }
        }
        std::ofstream sum(out / "estimate_summary.txt");
        sum << "G = " << detail::fmt(g.value) << "\n"
            << "L_prime = " << detail::fmt(lp.value) << "\n"
            << "iterations = " << cfg.est_iterations << "\n"
            << "batch = " << cfg.est_batch << "\n";
        detail::write_manifest(cfg, "estimate");
        return 0;
    });
}

// Paired gradient-inversion attacks (noise-free vs noisy target gradients).
inline int cmd_attack(const CliOptions& opt) {
    return detail::guarded([&] {
        const RunConfig cfg = detail::load(opt);
        const auto shards = cfg.make_shards();
        const auto& shard = shards[0];  // the attack targets the first normal agent
        if (shard.train.empty()) throw config_error("attack: first shard is empty");
        const std::filesystem::path out(cfg.out_dir);

        inversion::ReconstructOptions ropt;
        ropt.attack_iters = cfg.attack_iters;
        ropt.step = cfg.attack_step;
        ropt.restarts = cfg.attack_restarts;
        ropt.init_half_width = cfg.data_half_width + cfg.data_pad;

        std::ofstream sum(out / "attack_summary.csv");
        sum << "trial,final_distance_clean,final_distance_noisy,best_j_clean,best_j_noisy,"
               "label_ok_clean,label_ok_noisy\n";

        auto write_trace = [&](const inversion::AttackResult& res, const std::string& name) {
            std::ofstream os(out / name);
            os << "attack_iter,distance,J\n";
            for (std::size_t i = 0; i < res.distance_trace.size(); ++i) {
                os << i << ',' << detail::fmt(res.distance_trace[i]) << ','
                   << detail::fmt(res.j_trace[i]) << '\n';
            }
        };

        for (int trial = 0; trial < cfg.attack_trials; ++trial) {
            const std::uint64_t t = static_cast<std::uint64_t>(trial);
            Rng setup = Rng::stream(cfg.seed, StreamTag::kInversion, t, 0);
            const ParamVector params = net::init_params(setup, cfg.init_scale);
            const data::Sample target = shard.train[setup.index(shard.train.size())];
            const ParamVector clean_grad = net::grad_params(params, std::span(&target, 1));

            ParamVector noisy_grad = clean_grad;
            Rng noise = Rng::stream(cfg.seed, StreamTag::kInversion, t, 1);
            for (double& v : noisy_grad) v += cfg.attack_sigma * noise.gaussian();

            Rng rng_clean = Rng::stream(cfg.seed, StreamTag::kInversion, t, 2);
            Rng rng_noisy = Rng::stream(cfg.seed, StreamTag::kInversion, t, 3);
            const std::array<double, 2> truth{target.x1, target.x2};
            const auto res_clean = inversion::reconstruct(params, clean_grad, truth, ropt, rng_clean);
            const auto res_noisy = inversion::reconstruct(params, noisy_grad, truth, ropt, rng_noisy);

            write_trace(res_clean, "attack_" + std::to_string(trial) + "_clean.csv");
            write_trace(res_noisy, "attack_" + std::to_string(trial) + "_noisy.csv");

            const double dc = std::hypot(res_clean.estimated_sample[0] - target.x1,
                                         res_clean.estimated_sample[1] - target.x2);
            const double dn = std::hypot(res_noisy.estimated_sample[0] - target.x1,
                                         res_noisy.estimated_sample[1] - target.x2);
            sum << trial << ',' << detail::fmt(dc) << ',' << detail::fmt(dn) << ','
                << detail::fmt(res_clean.best_j) << ',' << detail::fmt(res_noisy.best_j) << ','
                << (res_clean.inferred_label == target.label ? 1 : 0) << ','
                << (res_noisy.inferred_label == target.label ? 1 : 0) << '\n';
        }
        detail::write_manifest(cfg, "attack");
        return 0;
    });
}

// Tukey-depth landscape over a grid, for plotting aggregation geometry.
inline int cmd_rvc_debug(const CliOptions& opt) {
    return detail::guarded([&] {
        const RunConfig cfg = detail::load(opt);
        if (cfg.debug_points.empty()) {
            throw config_error("rvc-debug: debug_points is required (\"x:y;x:y;...\")");
        }
        std::vector<ParamVector> pts;
        std::stringstream ss(cfg.debug_points);
        std::string tok;
        while (std::getline(ss, tok, ';')) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos) {
                throw config_error("rvc-debug: malformed point '" + tok + "'");
            }
            pts.push_back({std::stod(tok.substr(0, colon)), std::stod(tok.substr(colon + 1))});
        }
        double lo_x = pts[0][0], hi_x = pts[0][0], lo_y = pts[0][1], hi_y = pts[0][1];
        for (const auto& p : pts) {
            lo_x = std::min(lo_x, p[0]);
            hi_x = std::max(hi_x, p[0]);
            lo_y = std::min(lo_y, p[1]);
            hi_y = std::max(hi_y, p[1]);
        }
        const double mx = 0.2 * std::max(1e-9, hi_x - lo_x);
        const double my = 0.2 * std::max(1e-9, hi_y - lo_y);
        lo_x -= mx;
        hi_x += mx;
        lo_y -= my;
        hi_y += my;

        const rvc::PointSet ps{pts, 0};
        std::ofstream os(std::filesystem::path(cfg.out_dir) / "depth_grid.csv");
        os << "x,y,depth\n";
        for (int i = 0; i < cfg.debug_grid; ++i) {
            for (int j = 0; j < cfg.debug_grid; ++j) {
                const double x = lo_x + (hi_x - lo_x) * i / (cfg.debug_grid - 1);
                const double y = lo_y + (hi_y - lo_y) * j / (cfg.debug_grid - 1);
                os << detail::fmt(x) << ',' << detail::fmt(y) << ','
                   << rvc::tukey_depth({x, y}, ps) << '\n';
            }
        }
        detail::write_manifest(cfg, "rvc-debug");
        return 0;
    });
}

}  // namespace safesgd::cli

#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "safesgd/common.hpp"
#include "safesgd/data.hpp"
#include "safesgd/protocol.hpp"
#include "safesgd/topology.hpp"

namespace safesgd::cli {

// Flat key=value experiment configuration. Defaults mirror the reference
// 14-robot setup: n=14 with one Byzantine agent, beta=0.8, gamma=0.01, b=16,
// K=8000, sigma=2.0, delta=1e-5.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "out";

    // network / data
    int n = 14;
    std::set<int> byzantine{13};
    std::string topology = "complete";  // "complete" or an edge-schedule file path
    std::vector<int> sizes_train{1122, 1315, 1521, 1400, 1369, 1255, 1239,
                                 1160, 1138, 1588, 1550, 1384, 1238};
    std::vector<int> sizes_test{312, 309, 300, 286, 283, 313, 312,
                                294, 291, 283, 292, 204, 299};
    double data_half_width = 8.0;
    double data_pad = 0.5;
    double label_noise = 0.0;

    // training
    std::string model = "mlp241";  // or "logistic2"
    long K = 8000;
    double gamma = 0.01;
    double beta = 0.8;
    int batch = 16;
    double sigma = 2.0;
    double init_scale = 0.5;
    bool common_init = false;
    double clip_threshold = 0.0;

    // aggregation / attack
    std::string rvc_mode = "coordinate-wise";
    int subset_cap = 5000;
    std::string attack_kind = "none";
    double attack_magnitude = 0.0;
    bool attack_per_receiver = true;

    // metrics
    long grad_metric_every = 1;
    long snapshot_every = 0;
    bool audit_log = false;

    // privacy accountant
    double delta = 1e-5;
    double G = 9.2;
    double L_prime = 0.84;
    int zeta_agent = 0;
    std::optional<double> zeta_override;
    std::optional<double> r;  // input-distance radius; required, never defaulted
    std::optional<double> eps_geo_target;
    double eps_geo_target_sigma = 2.0;

    // sensitivity estimators
    int est_iterations = 3000;
    int est_batch = 16;
    double est_gamma = 0.01;
    int est_agent = 0;

    // inversion harness
    int attack_iters = 2000;
    double attack_step = 0.1;
    int attack_restarts = 10;
    int attack_trials = 1;
    double attack_sigma = 2.0;

    // depth-landscape debug dump
    std::string debug_points;  // "x:y;x:y;..."
    int debug_grid = 41;

    std::uint64_t config_hash = 0;  // FNV-1a of the raw config text

    int n_normal() const { return n - static_cast<int>(byzantine.size()); }

    double zeta() const {
        if (zeta_override) return *zeta_override;
        if (zeta_agent < 0 || zeta_agent >= static_cast<int>(sizes_train.size())) {
            throw config_error("zeta_agent out of range");
        }
        const int size = sizes_train[static_cast<std::size_t>(zeta_agent)];
        if (size <= 0) throw config_error("zeta: empty reference shard");
        return static_cast<double>(batch) / static_cast<double>(size);
    }

    protocol::Topology make_topology() const {
        if (topology == "complete") return protocol::Topology::complete(n, byzantine);
        return protocol::Topology::from_file(topology, n);
    }

    std::vector<data::DatasetShard> make_shards() const {
        data::SynthesisConfig sc{data_half_width, data_pad, label_noise};
        return data::partition(sizes_train, sizes_test, sc, seed);
    }

    protocol::RunOptions make_run_options() const {
        protocol::RunOptions opt;
        opt.K = K;
        opt.gamma = gamma;
        opt.beta = beta;
        opt.batch = batch;
        opt.sigma = sigma;
        opt.init_scale = init_scale;
        opt.common_init = common_init;
        opt.clip_threshold = clip_threshold;
        opt.mode = protocol::aggregation_mode_from_string(rvc_mode);
        opt.subset_cap = subset_cap;
        opt.attack.kind = protocol::attack_kind_from_string(attack_kind);
        opt.attack.magnitude = attack_magnitude;
        opt.attack.per_receiver = attack_per_receiver;
        opt.seed = seed;
        opt.grad_metric_every = grad_metric_every;
        opt.snapshot_every = snapshot_every;
        return opt;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        out.push_back(std::stoi(tok));
    }
    return out;
}

inline bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw config_error("config: boolean expected for '" + key + "', got '" + s + "'");
}

inline double parse_double(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw config_error("config: number expected for '" + key + "', got '" + s + "'");
    }
}

inline long parse_long(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw config_error("config: integer expected for '" + key + "', got '" + s + "'");
    }
}

inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace detail

inline RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    cfg.config_hash = detail::fnv1a(text);
    std::stringstream is(text);
    std::string line;
    long lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw config_error("config: expected key=value at line " + std::to_string(lineno));
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));

        if (key == "seed") cfg.seed = static_cast<std::uint64_t>(detail::parse_long(val, key));
        else if (key == "out_dir") cfg.out_dir = val;
        else if (key == "n") cfg.n = static_cast<int>(detail::parse_long(val, key));
        else if (key == "byzantine") {
            cfg.byzantine.clear();
            for (int b : detail::parse_int_list(val)) cfg.byzantine.insert(b);
        }
        else if (key == "topology") cfg.topology = val;
        else if (key == "sizes_train") cfg.sizes_train = detail::parse_int_list(val);
        else if (key == "sizes_test") cfg.sizes_test = detail::parse_int_list(val);
        else if (key == "data_half_width") cfg.data_half_width = detail::parse_double(val, key);
        else if (key == "data_pad") cfg.data_pad = detail::parse_double(val, key);
        else if (key == "label_noise") cfg.label_noise = detail::parse_double(val, key);
        else if (key == "model") cfg.model = val;
        else if (key == "K") cfg.K = detail::parse_long(val, key);
        else if (key == "gamma") cfg.gamma = detail::parse_double(val, key);
        else if (key == "beta") cfg.beta = detail::parse_double(val, key);
        else if (key == "batch") cfg.batch = static_cast<int>(detail::parse_long(val, key));
        else if (key == "sigma") cfg.sigma = detail::parse_double(val, key);
        else if (key == "init_scale") cfg.init_scale = detail::parse_double(val, key);
        else if (key == "common_init") cfg.common_init = detail::parse_bool(val, key);
        else if (key == "clip_threshold") cfg.clip_threshold = detail::parse_double(val, key);
        else if (key == "rvc_mode") cfg.rvc_mode = val;
        else if (key == "subset_cap") cfg.subset_cap = static_cast<int>(detail::parse_long(val, key));
        else if (key == "attack_kind") cfg.attack_kind = val;
        else if (key == "attack_magnitude") cfg.attack_magnitude = detail::parse_double(val, key);
        else if (key == "attack_per_receiver") cfg.attack_per_receiver = detail::parse_bool(val, key);
        else if (key == "grad_metric_every") cfg.grad_metric_every = detail::parse_long(val, key);
        else if (key == "snapshot_every") cfg.snapshot_every = detail::parse_long(val, key);
        else if (key == "audit_log") cfg.audit_log = detail::parse_bool(val, key);
        else if (key == "delta") cfg.delta = detail::parse_double(val, key);
        else if (key == "G") cfg.G = detail::parse_double(val, key);
        else if (key == "L_prime") cfg.L_prime = detail::parse_double(val, key);
        else if (key == "zeta_agent") cfg.zeta_agent = static_cast<int>(detail::parse_long(val, key));
        else if (key == "zeta") cfg.zeta_override = detail::parse_double(val, key);
        else if (key == "r") cfg.r = detail::parse_double(val, key);
        else if (key == "eps_geo_target") cfg.eps_geo_target = detail::parse_double(val, key);
        else if (key == "eps_geo_target_sigma") cfg.eps_geo_target_sigma = detail::parse_double(val, key);
        else if (key == "est_iterations") cfg.est_iterations = static_cast<int>(detail::parse_long(val, key));
        else if (key == "est_batch") cfg.est_batch = static_cast<int>(detail::parse_long(val, key));
        else if (key == "est_gamma") cfg.est_gamma = detail::parse_double(val, key);
        else if (key == "est_agent") cfg.est_agent = static_cast<int>(detail::parse_long(val, key));
        else if (key == "attack_iters") cfg.attack_iters = static_cast<int>(detail::parse_long(val, key));
        else if (key == "attack_step") cfg.attack_step = detail::parse_double(val, key);
        else if (key == "attack_restarts") cfg.attack_restarts = static_cast<int>(detail::parse_long(val, key));
        else if (key == "attack_trials") cfg.attack_trials = static_cast<int>(detail::parse_long(val, key));
        else if (key == "attack_sigma") cfg.attack_sigma = detail::parse_double(val, key);
        else if (key == "debug_points") cfg.debug_points = val;
        else if (key == "debug_grid") cfg.debug_grid = static_cast<int>(detail::parse_long(val, key));
        else throw config_error("config: unknown key '" + key + "' at line " + std::to_string(lineno));
    }
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw config_error("config: cannot open '" + path + "'");
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str());
}

// Range validation shared by all subcommands; numeric errors surface before
// any computation starts.
inline void validate(const RunConfig& cfg) {
    if (cfg.n < 1) throw config_error("config: n must be at least 1");
    for (int b : cfg.byzantine) {
        if (b < 0 || b >= cfg.n) throw config_error("config: byzantine id out of range");
    }
    const int nn = cfg.n_normal();
    if (nn < 1) throw config_error("config: need at least one normal agent");
    if (static_cast<int>(cfg.sizes_train.size()) != nn ||
        static_cast<int>(cfg.sizes_test.size()) != nn) {
        throw config_error("config: sizes_train/sizes_test must list exactly one entry per normal agent (" +
                           std::to_string(nn) + ")");
    }
    for (int s : cfg.sizes_train)
        if (s < 0) throw config_error("config: negative train size");
    for (int s : cfg.sizes_test)
        if (s < 0) throw config_error("config: negative test size");
    if (cfg.data_half_width <= 0.0) throw config_error("config: data_half_width must be positive");
    if (cfg.data_pad < 0.0) throw config_error("config: data_pad must be nonnegative");
    if (cfg.label_noise < 0.0 || cfg.label_noise > 1.0) {
        throw config_error("config: label_noise must lie in [0, 1]");
    }
    if (cfg.model != "mlp241" && cfg.model != "logistic2") {
        throw config_error("config: unknown model '" + cfg.model + "'");
    }
    if (cfg.K < 1) throw config_error("config: K must be at least 1");
    if (cfg.gamma <= 0.0) throw config_error("config: gamma must be positive");
    if (cfg.beta < 0.0 || cfg.beta >= 1.0) throw config_error("config: beta must lie in [0, 1)");
    if (cfg.batch < 1) throw config_error("config: batch must be at least 1");
    if (cfg.sigma < 0.0) throw config_error("config: sigma must be nonnegative");
    if (cfg.init_scale < 0.0) throw config_error("config: init_scale must be nonnegative");
    if (cfg.clip_threshold < 0.0) throw config_error("config: clip_threshold must be nonnegative");
    protocol::aggregation_mode_from_string(cfg.rvc_mode);
    protocol::attack_kind_from_string(cfg.attack_kind);
    if (cfg.subset_cap < 1) throw config_error("config: subset_cap must be at least 1");
    if (cfg.delta <= 0.0 || cfg.delta >= 1.0) throw config_error("config: delta must lie in (0, 1)");
    if (cfg.G < 0.0) throw config_error("config: G must be nonnegative");
    if (cfg.L_prime < 0.0) throw config_error("config: L_prime must be nonnegative");
    if (cfg.r && *cfg.r < 0.0) throw config_error("config: r must be nonnegative");
    if (cfg.est_iterations < 1) throw config_error("config: est_iterations must be at least 1");
    if (cfg.est_batch < 1) throw config_error("config: est_batch must be at least 1");
    if (cfg.est_gamma <= 0.0) throw config_error("config: est_gamma must be positive");
    if (cfg.est_agent < 0 || cfg.est_agent >= nn) throw config_error("config: est_agent out of range");
    if (cfg.attack_iters < 1) throw config_error("config: attack_iters must be at least 1");
    if (cfg.attack_step <= 0.0) throw config_error("config: attack_step must be positive");
    if (cfg.attack_restarts < 1) throw config_error("config: attack_restarts must be at least 1");
    if (cfg.attack_trials < 1) throw config_error("config: attack_trials must be at least 1");
    if (cfg.attack_sigma < 0.0) throw config_error("config: attack_sigma must be nonnegative");
    if (cfg.debug_grid < 2) throw config_error("config: debug_grid must be at least 2");
}

}  // namespace safesgd::cli

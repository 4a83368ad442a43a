#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "safesgd/common.hpp"
#include "safesgd/data.hpp"
#include "safesgd/net.hpp"
#include "safesgd/rng.hpp"
#include "safesgd/rvc.hpp"
#include "safesgd/topology.hpp"
#include "safesgd/vecmath.hpp"

namespace safesgd::protocol {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Attacks

struct AttackSpec {
    enum class Kind { kNone, kConstant, kSignFlip, kGaussian, kHiddenPerturbation };
    Kind kind = Kind::kNone;
    double magnitude = 0.0;
    bool per_receiver = true;  // emit a distinct vector to each out-neighbor
};

inline AttackSpec::Kind attack_kind_from_string(const std::string& s) {
    if (s == "none") return AttackSpec::Kind::kNone;
    if (s == "constant") return AttackSpec::Kind::kConstant;
    if (s == "sign-flip") return AttackSpec::Kind::kSignFlip;
    if (s == "gaussian") return AttackSpec::Kind::kGaussian;
    if (s == "hidden-perturbation") return AttackSpec::Kind::kHiddenPerturbation;
    throw config_error("unknown attack kind '" + s + "'");
}

struct AttackContext {
    int receiver = 0;
    const ParamVector* honest_xt = nullptr;          // what the sender would honestly send
    const std::vector<ParamVector>* neighbor_views;  // normal agents' messages this iteration
};

// Craft the vector a Byzantine sender emits toward one receiver.
inline ParamVector byzantine_message(const AttackSpec& attack, const AttackContext& ctx, Rng& rng) {
    const ParamVector& honest = *ctx.honest_xt;
    const std::size_t d = honest.size();
    switch (attack.kind) {
        case AttackSpec::Kind::kNone:
            return honest;
        case AttackSpec::Kind::kConstant:
            return ParamVector(d, attack.magnitude);
        case AttackSpec::Kind::kSignFlip: {
            ParamVector out = honest;
            vec::scale(out, -attack.magnitude);
            return out;
        }
        case AttackSpec::Kind::kGaussian: {
            ParamVector out = honest;
            for (double& v : out) v += attack.magnitude * rng.gaussian();
            return out;
        }
        case AttackSpec::Kind::kHiddenPerturbation: {
            // Blend into the crowd: sit at the empirical mean of the observed
            // vectors, displaced by `magnitude` coordinate-wise standard
            // deviations so the bias survives distance-based filters.
            const auto& views = *ctx.neighbor_views;
            if (views.empty()) return honest;
            ParamVector mean = vec::mean(views);
            ParamVector out = mean;
            for (std::size_t c = 0; c < d; ++c) {
                double var = 0.0;
                for (const auto& v : views) {
                    const double dv = v[c] - mean[c];
                    var += dv * dv;
                }
                var /= static_cast<double>(views.size());
                out[c] += attack.magnitude * std::sqrt(var);
            }
            return out;
        }
    }
    return honest;
}

// ---------------------------------------------------------------------------
// Aggregation policies

enum class AggregationMode { kExact, kCoordinateWise, kMean, kTrimmedMean };

inline AggregationMode aggregation_mode_from_string(const std::string& s) {
    if (s == "exact") return AggregationMode::kExact;
    if (s == "coordinate-wise") return AggregationMode::kCoordinateWise;
    if (s == "mean") return AggregationMode::kMean;
    if (s == "trimmed-mean") return AggregationMode::kTrimmedMean;
    throw config_error("unknown rvc mode '" + s + "'");
}

inline const char* aggregation_mode_name(AggregationMode m) {
    switch (m) {
        case AggregationMode::kExact: return "exact";
        case AggregationMode::kCoordinateWise: return "coordinate-wise";
        case AggregationMode::kMean: return "mean";
        case AggregationMode::kTrimmedMean: return "trimmed-mean";
    }
    return "?";
}

struct AggregationOutput {
    ParamVector point;
    std::map<int, double> weights;  // index into the message list; empty if uncertified
};

// Dispatch one aggregation. `f` is the Byzantine count assumed among the
// messages; preconditions are the kernel-specific resilience conditions.
inline AggregationOutput aggregate(AggregationMode mode, const std::vector<ParamVector>& messages,
                                   int f, int subset_cap = rvc::kDefaultSubsetCap) {
    AggregationOutput out;
    const int n = static_cast<int>(messages.size());
    if (n == 0) throw std::invalid_argument("aggregate: no messages");
    const std::size_t d = messages[0].size();
    switch (mode) {
        case AggregationMode::kExact: {
            rvc::SafePointResult r;
            if (d == 1) {
                std::vector<double> vals(messages.size());
                for (int j = 0; j < n; ++j) vals[j] = messages[j][0];
                r = rvc::safe_point_1d(vals, f);
            } else if (d == 2) {
                r = rvc::centerpoint_2d({messages, f}, subset_cap);
            } else {
                r = rvc::safe_point_lp({messages, f}, subset_cap);
            }
            out.point = std::move(r.point);
            out.weights = std::move(r.weights);
            return out;
        }
        case AggregationMode::kCoordinateWise: {
            rvc::SafePointResult r = rvc::coordinate_wise({messages, f});
            out.point = std::move(r.point);
            return out;
        }
        case AggregationMode::kMean: {
            out.point = vec::mean(messages);
            for (int j = 0; j < n; ++j) out.weights[j] = 1.0 / n;
            return out;
        }
        case AggregationMode::kTrimmedMean: {
            if (2 * f >= n) {
                throw resilience_error("trimmed-mean: requires f < n/2, got f=" + std::to_string(f) +
                                       " n=" + std::to_string(n));
            }
            out.point.assign(d, 0.0);
            std::vector<double> col(messages.size());
            for (std::size_t c = 0; c < d; ++c) {
                for (int j = 0; j < n; ++j) col[j] = messages[j][c];
                std::sort(col.begin(), col.end());
                double s = 0.0;
                for (int j = f; j < n - f; ++j) s += col[j];
                out.point[c] = s / static_cast<double>(n - 2 * f);
            }
            return out;
        }
    }
    throw std::logic_error("aggregate: unreachable");
}

// ---------------------------------------------------------------------------
// Per-iteration log and mixing-matrix diagnostics

struct AgentAggRecord {
    int agent = 0;  // global id of the (normal) receiver
    double beta = 0.0;
    std::vector<int> senders;  // ascending global ids
    std::vector<char> sender_byz;
    std::vector<ParamVector> messages;  // as received, aligned with senders
    ParamVector pre_update;             // x_tilde_i(k)
    ParamVector updated;                // x_i(k+1)
    AggregationOutput agg;
};

struct IterationLog {
    long k = 0;
    std::vector<int> normal_ids;          // ascending global ids
    std::vector<AgentAggRecord> records;  // one per normal agent, same order
};

struct MixingMatrix {
    std::vector<std::vector<double>> entries;  // n_normal x n_normal, rows sum to 1
    std::size_t size() const { return entries.size(); }
};

// Reconstruct the row-stochastic update matrix over the normal agents: the
// diagonal carries 1 - beta_i and off-diagonal entries beta_i * a_ij for the
// convex weights over normal in-neighbors. If a kernel certificate assigns
// weight to a Byzantine position (possible when its vector sits inside the
// normal hull), the point is re-expressed over the normal messages alone by a
// second feasibility solve.
inline MixingMatrix extract_mixing_matrix(const IterationLog& log) {
    const std::size_t nn = log.normal_ids.size();
    std::map<int, std::size_t> col;
    for (std::size_t i = 0; i < nn; ++i) col[log.normal_ids[i]] = i;

    MixingMatrix M;
    M.entries.assign(nn, std::vector<double>(nn, 0.0));
    for (std::size_t i = 0; i < nn; ++i) {
        const auto& rec = log.records[i];
        M.entries[i][i] += 1.0 - rec.beta;
        if (rec.senders.empty()) {
            M.entries[i][i] += rec.beta;  // isolated agent keeps its own value
            continue;
        }
        if (rec.agg.weights.empty()) {
            throw unsupported_error("extract_mixing_matrix: aggregation mode reports no weights");
        }
        bool byz_mass = false;
        for (const auto& [idx, w] : rec.agg.weights) {
            if (rec.sender_byz[static_cast<std::size_t>(idx)] && w > 1e-12) byz_mass = true;
        }
        std::map<int, double> weights_by_sender;
        if (!byz_mass) {
            for (const auto& [idx, w] : rec.agg.weights) {
                weights_by_sender[rec.senders[static_cast<std::size_t>(idx)]] += w;
            }
        } else {
            std::vector<ParamVector> normal_msgs;
            std::vector<int> normal_senders;
            for (std::size_t j = 0; j < rec.senders.size(); ++j) {
                if (!rec.sender_byz[j]) {
                    normal_msgs.push_back(rec.messages[j]);
                    normal_senders.push_back(rec.senders[j]);
                }
            }
            const auto reproj = rvc::in_hull_weights(rec.agg.point, normal_msgs);
            if (!reproj) {
                throw unsupported_error(
                    "extract_mixing_matrix: aggregation point is not a convex combination of "
                    "normal in-neighbor messages");
            }
            for (const auto& [idx, w] : *reproj) {
                weights_by_sender[normal_senders[static_cast<std::size_t>(idx)]] += w;
            }
        }
        for (const auto& [sender, w] : weights_by_sender) {
            const auto it = col.find(sender);
            if (it == col.end()) {
                throw std::logic_error("extract_mixing_matrix: weight on byzantine sender survived");
            }
            M.entries[i][it->second] += rec.beta * w;
        }
    }
    return M;
}

struct MixingDiagnostics {
    double lambda = kNaN;  // 1 - ||(I - 11^T/n) M||_S^2
    double chi_sq = kNaN;  // (1/n) ||M^T 1 - 1||^2
};

// Spectral norm by power iteration on A^T A, tolerance 1e-10.
inline double spectral_norm(const std::vector<std::vector<double>>& A) {
    const std::size_t n = A.size();
    if (n == 0) return 0.0;
    const std::size_t m = A[0].size();
    Rng rng(0x5eedULL);
    std::vector<double> v(m);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    double nv = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (double& x : v) x /= nv;

    std::vector<double> av(n), w(m);
    double lam = 0.0;
    for (int it = 0; it < 100000; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += A[i][j] * v[j];
            av[i] = s;
        }
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += A[i][j] * av[i];
            w[j] = s;
        }
        const double lam_new = std::inner_product(w.begin(), w.end(), v.begin(), 0.0);
        double nw = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
        if (nw == 0.0) return 0.0;
        for (std::size_t j = 0; j < m; ++j) v[j] = w[j] / nw;
        if (std::abs(lam_new - lam) <= 1e-10 * std::max(1.0, std::abs(lam_new))) {
            lam = lam_new;
            break;
        }
        lam = lam_new;
    }
    return std::sqrt(std::max(0.0, lam));
}

inline MixingDiagnostics mixing_diagnostics(const MixingMatrix& M) {
    const std::size_t n = M.size();
    MixingDiagnostics out;
    if (n == 0) return out;
    double chi = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double colsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) colsum += M.entries[i][j];
        chi += (colsum - 1.0) * (colsum - 1.0);
    }
    out.chi_sq = chi / static_cast<double>(n);

    // A = (I - 11^T/n) M  (subtract the column means).
    std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += M.entries[i][j];
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) A[i][j] = M.entries[i][j] - mean;
    }
    const double s = spectral_norm(A);
    out.lambda = 1.0 - s * s;
    return out;
}

// ---------------------------------------------------------------------------
// Run metrics

struct IterationStats {
    double delta = kNaN;         // consensus error of x(k)
    double grad_norm_sq = kNaN;  // ||grad f(xbar(k))||^2, full-shard
    double test_acc = kNaN;      // mean over normal agents, own test split
    double lambda = kNaN;        // from this iteration's mixing matrix
    double chi_sq = kNaN;
    double avg_loss = kNaN;  // f(xbar(k)), full-shard
};

struct RunInfo {
    int n = 0;
    int n_normal = 0;
    int d = 0;
    long K = 0;
    double gamma = 0.0;
    double beta = 0.0;
    double sigma = 0.0;
    AggregationMode mode = AggregationMode::kExact;
};

struct RunMetrics {
    RunInfo info;
    std::vector<IterationStats> iters;  // exactly K records
    std::vector<std::pair<long, ParamVector>> snapshots;
    double final_delta = kNaN;     // consensus error of x(K)
    double final_test_acc = kNaN;  // accuracy of x(K)
};

// Mean squared distance from the average: (1/n) sum_i ||x_i - xbar||^2.
inline double consensus_error(const std::vector<ParamVector>& states) {
    if (states.empty()) throw std::invalid_argument("consensus_error: empty input");
    const ParamVector mean = vec::mean(states);
    double s = 0.0;
    for (const auto& x : states) s += vec::dist_sq(x, mean);
    return s / static_cast<double>(states.size());
}

// ||(1/n) sum_i grad f_i(x)||^2 with full-shard (non-stochastic) gradients.
template <class Model>
double global_grad_norm(const Model& model, const ParamVector& avg_params,
                        const std::vector<data::DatasetShard>& shards) {
    if (shards.empty()) throw std::invalid_argument("global_grad_norm: no shards");
    ParamVector g(avg_params.size(), 0.0);
    for (const auto& shard : shards) {
        const ParamVector gi = model.grad(avg_params, std::span(shard.train));
        vec::axpy(1.0, gi, g);
    }
    vec::scale(g, 1.0 / static_cast<double>(shards.size()));
    return vec::norm2_sq(g);
}

template <class Model>
double global_loss(const Model& model, const ParamVector& avg_params,
                   const std::vector<data::DatasetShard>& shards) {
    double s = 0.0;
    for (const auto& shard : shards) s += model.loss(avg_params, std::span(shard.train));
    return s / static_cast<double>(shards.size());
}

// ---------------------------------------------------------------------------
// The decentralized training loop

struct RunOptions {
    long K = 8000;
    double gamma = 0.01;
    double beta = 0.8;
    int batch = 16;
    double sigma = 2.0;
    double init_scale = 0.5;
    bool common_init = false;
    double clip_threshold = 0.0;  // 0 disables clipping
    AggregationMode mode = AggregationMode::kExact;
    int subset_cap = rvc::kDefaultSubsetCap;
    AttackSpec attack;
    std::uint64_t seed = 1;
    long grad_metric_every = 1;  // cadence for grad_norm_sq / avg_loss; 0 disables
    long snapshot_every = 0;     // 0 disables parameter snapshots
    bool mixing_diagnostics = true;
};

struct RunHooks {
    // Invoked after each iteration's aggregation phase with the full message
    // log. Used by tests and by the audit-log writer.
    std::function<void(const IterationLog&)> on_iteration;
};

namespace detail {

inline void check_resilience(AggregationMode mode, int n_in, int n_byz, std::size_t d, int agent,
                             long k) {
    bool ok = true;
    std::string cond;
    switch (mode) {
        case AggregationMode::kExact:
            ok = static_cast<std::size_t>(n_byz) * (d + 1) < static_cast<std::size_t>(n_in);
            cond = "n_f < |N|/(d+1)";
            break;
        case AggregationMode::kCoordinateWise:
        case AggregationMode::kTrimmedMean:
            ok = 2 * n_byz < n_in;
            cond = "n_f < |N|/2";
            break;
        case AggregationMode::kMean:
            return;  // no-defense arm has no precondition
    }
    if (!ok) {
        throw resilience_error("resilience condition " + cond + " violated at agent " +
                               std::to_string(agent) + ", iteration " + std::to_string(k) +
                               " (n_f=" + std::to_string(n_byz) + ", |N|=" + std::to_string(n_in) +
                               ", d=" + std::to_string(d) + ")");
    }
}

}  // namespace detail

template <class Model>
RunMetrics run(const Model& model, const Topology& topo,
               const std::vector<data::DatasetShard>& shards, const RunOptions& opt,
               RunHooks* hooks = nullptr) {
    const int n = topo.n();
    const auto normal = topo.normal_agents();
    const int nn = static_cast<int>(normal.size());
    const int d = model.dim();

    if (opt.K < 1) throw config_error("run: K must be at least 1");
    if (opt.gamma <= 0.0) throw config_error("run: gamma must be positive");
    if (opt.beta < 0.0 || opt.beta >= 1.0) throw config_error("run: beta must lie in [0, 1)");
    if (opt.sigma < 0.0) throw config_error("run: sigma must be nonnegative");
    if (static_cast<int>(shards.size()) != nn) {
        throw config_error("run: need one shard per normal agent (" + std::to_string(nn) +
                           "), got " + std::to_string(shards.size()));
    }
    for (int i = 0; i < nn; ++i) {
        if (opt.batch < 1 || static_cast<std::size_t>(opt.batch) > shards[i].train.size()) {
            throw config_error("run: batch size out of range for agent " + std::to_string(normal[i]));
        }
    }
    topo.validate_connectivity(opt.K);

    std::map<int, int> normal_index;  // global id -> shard index
    for (int i = 0; i < nn; ++i) normal_index[normal[i]] = i;

    // Per-agent substreams keyed by global id.
    std::vector<Rng> batch_rng, noise_rng, attack_rng;
    for (int a = 0; a < n; ++a) {
        batch_rng.push_back(Rng::stream(opt.seed, StreamTag::kMinibatch, static_cast<std::uint64_t>(a)));
        noise_rng.push_back(Rng::stream(opt.seed, StreamTag::kGradNoise, static_cast<std::uint64_t>(a)));
        attack_rng.push_back(Rng::stream(opt.seed, StreamTag::kAttack, static_cast<std::uint64_t>(a)));
    }

    std::vector<ParamVector> x(n);
    if (opt.common_init) {
        Rng init = Rng::stream(opt.seed, StreamTag::kInit, 0);
        const ParamVector shared = model.init(init, opt.init_scale);
        for (int a = 0; a < n; ++a) x[a] = shared;
    } else {
        for (int a = 0; a < n; ++a) {
            Rng init = Rng::stream(opt.seed, StreamTag::kInit, static_cast<std::uint64_t>(a));
            x[a] = model.init(init, opt.init_scale);
        }
    }

    RunMetrics metrics;
    metrics.info = {n, nn, d, opt.K, opt.gamma, opt.beta, opt.sigma, opt.mode};
    metrics.iters.resize(static_cast<std::size_t>(opt.K));

    std::vector<ParamVector> xt(n);  // post-SGD, pre-aggregation parameters
    for (long k = 0; k < opt.K; ++k) {
        IterationStats& st = metrics.iters[static_cast<std::size_t>(k)];

        std::vector<ParamVector> normal_states(nn);
        for (int i = 0; i < nn; ++i) normal_states[i] = x[normal[i]];
        st.delta = consensus_error(normal_states);
        {
            double acc = 0.0;
            for (int i = 0; i < nn; ++i) {
                acc += model.accuracy(x[normal[i]], std::span(shards[i].test));
            }
            st.test_acc = acc / nn;
        }
        const bool want_grad = opt.grad_metric_every > 0 && k % opt.grad_metric_every == 0;
        const bool want_snap = opt.snapshot_every > 0 && k % opt.snapshot_every == 0;
        if (want_grad || want_snap) {
            const ParamVector avg = vec::mean(normal_states);
            if (want_grad) {
                st.grad_norm_sq = global_grad_norm(model, avg, shards);
                st.avg_loss = global_loss(model, avg, shards);
            }
            if (want_snap) metrics.snapshots.emplace_back(k, avg);
        }

        // Local SGD phase.
        for (int i = 0; i < nn; ++i) {
            const int a = normal[i];
            const auto idx =
                batch_rng[a].sample_without_replacement(shards[i].train.size(),
                                                        static_cast<std::size_t>(opt.batch));
            std::vector<data::Sample> batch;
            batch.reserve(idx.size());
            for (std::size_t j : idx) batch.push_back(shards[i].train[j]);
            ParamVector g = model.grad(x[a], std::span(batch));
            if (opt.clip_threshold > 0.0) g = net::clip(g, opt.clip_threshold);
            if (opt.sigma > 0.0) {
                for (double& gv : g) gv += opt.sigma * noise_rng[a].gaussian();
            }
            xt[a] = x[a];
            vec::axpy(-opt.gamma, g, xt[a]);
        }
        // Byzantine agents mimic the protocol without local data.
        for (int b : topo.byzantine()) xt[b] = x[b];

        std::vector<ParamVector> views(nn);  // all normal messages, observable by attackers
        for (int i = 0; i < nn; ++i) views[i] = xt[normal[i]];

        // Transmission phase: Byzantine senders craft per-receiver messages.
        std::map<std::pair<int, int>, ParamVector> byz_out;  // (sender, receiver) -> message
        for (int b : topo.byzantine()) {
            const auto receivers = topo.out_neighbors(k, b);
            AttackContext ctx{0, &xt[b], &views};
            if (!opt.attack.per_receiver) {
                ctx.receiver = receivers.empty() ? -1 : receivers.front();
                const ParamVector msg = byzantine_message(opt.attack, ctx, attack_rng[b]);
                for (int r : receivers) byz_out[{b, r}] = msg;
            } else {
                for (int r : receivers) {
                    ctx.receiver = r;
                    byz_out[{b, r}] = byzantine_message(opt.attack, ctx, attack_rng[b]);
                }
            }
        }

        // Aggregation phase.
        IterationLog log;
        log.k = k;
        log.normal_ids = normal;
        log.records.resize(static_cast<std::size_t>(nn));
        std::vector<ParamVector> s(n);
        for (int i = 0; i < nn; ++i) {
            const int a = normal[i];
            AgentAggRecord& rec = log.records[static_cast<std::size_t>(i)];
            rec.agent = a;
            rec.beta = opt.beta;
            rec.pre_update = xt[a];
            rec.senders = topo.in_neighbors(k, a);
            int n_byz = 0;
            for (int sender : rec.senders) {
                const bool byz = topo.is_byzantine(sender);
                rec.sender_byz.push_back(byz ? 1 : 0);
                if (byz) {
                    rec.messages.push_back(byz_out.at({sender, a}));
                    ++n_byz;
                } else {
                    rec.messages.push_back(xt[sender]);
                }
            }
            if (rec.senders.empty()) {
                s[a] = xt[a];
                rec.agg.point = xt[a];
                continue;
            }
            detail::check_resilience(opt.mode, static_cast<int>(rec.senders.size()), n_byz,
                                     static_cast<std::size_t>(d), a, k);
            rec.agg = aggregate(opt.mode, rec.messages, n_byz, opt.subset_cap);
            s[a] = rec.agg.point;
        }
        // Byzantine internal state follows an honest mean so attack templates
        // that reference "the honest message" stay near the crowd.
        for (int b : topo.byzantine()) {
            const auto senders = topo.in_neighbors(k, b);
            if (senders.empty()) {
                s[b] = xt[b];
                continue;
            }
            std::vector<ParamVector> received;
            received.reserve(senders.size());
            for (int sender : senders) {
                if (topo.is_byzantine(sender)) {
                    received.push_back(byz_out.at({sender, b}));
                } else {
                    received.push_back(xt[sender]);
                }
            }
            s[b] = vec::mean(received);
        }

        if (opt.mixing_diagnostics) {
            bool have_weights = true;
            for (const auto& rec : log.records) {
                if (!rec.senders.empty() && rec.agg.weights.empty()) have_weights = false;
            }
            if (have_weights) {
                try {
                    const MixingDiagnostics diag = mixing_diagnostics(extract_mixing_matrix(log));
                    st.lambda = diag.lambda;
                    st.chi_sq = diag.chi_sq;
                } catch (const unsupported_error&) {
                    // Point not expressible over normal neighbors (no-defense
                    // modes under attack); diagnostics stay NaN.
                }
            }
        }
        // Update phase.
        for (int a = 0; a < n; ++a) {
            ParamVector next = s[a];
            vec::scale(next, opt.beta);
            vec::axpy(1.0 - opt.beta, xt[a], next);
            x[a] = std::move(next);
        }
        if (hooks && hooks->on_iteration) {
            for (int i = 0; i < nn; ++i) {
                log.records[static_cast<std::size_t>(i)].updated = x[normal[i]];
            }
            hooks->on_iteration(log);
        }
    }

    std::vector<ParamVector> final_states(nn);
    double final_acc = 0.0;
    for (int i = 0; i < nn; ++i) {
        final_states[i] = x[normal[i]];
        final_acc += model.accuracy(x[normal[i]], std::span(shards[i].test));
    }
    metrics.final_delta = consensus_error(final_states);
    metrics.final_test_acc = final_acc / nn;
    return metrics;
}

// ---------------------------------------------------------------------------
// Two-parameter logistic model: a minimal learner whose parameter dimension
// admits the exact 2-D aggregation kernels, used for mixing diagnostics runs.

struct LogisticPairModel {
    int dim() const { return 2; }
    ParamVector init(Rng& rng, double scale) const {
        return {rng.uniform(-scale, scale), rng.uniform(-scale, scale)};
    }
    double predict(const ParamVector& p, const data::Sample& s) const {
        return net::sigmoid(p[0] * s.x1 + p[1] * s.x2);
    }
    double loss(const ParamVector& p, std::span<const data::Sample> batch) const {
        if (batch.empty()) throw std::invalid_argument("loss: empty batch");
        double total = 0.0;
        for (const auto& s : batch) {
            double q = predict(p, s);
            q = std::min(std::max(q, net::kProbClamp), 1.0 - net::kProbClamp);
            total += s.label == 1 ? -std::log(q) : -std::log(1.0 - q);
        }
        return total / static_cast<double>(batch.size());
    }
    ParamVector grad(const ParamVector& p, std::span<const data::Sample> batch) const {
        if (batch.empty()) throw std::invalid_argument("grad: empty batch");
        ParamVector g(2, 0.0);
        for (const auto& s : batch) {
            const double e = predict(p, s) - static_cast<double>(s.label);
            g[0] += e * s.x1;
            g[1] += e * s.x2;
        }
        vec::scale(g, 1.0 / static_cast<double>(batch.size()));
        return g;
    }
    double accuracy(const ParamVector& p, std::span<const data::Sample> set) const {
        if (set.empty()) return 0.0;
        std::size_t hits = 0;
        for (const auto& s : set) {
            if ((predict(p, s) > 0.5 ? 1 : 0) == s.label) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(set.size());
    }
};

// ---------------------------------------------------------------------------
// Empirical constants and bound evaluation

struct GradientConstants {
    double L = 0.0;         // gradient Lipschitz constant w.r.t. parameters
    double theta_sq = 0.0;  // minibatch-gradient variance bound
    double tau_sq = 0.0;    // cross-agent gradient heterogeneity bound
};

template <class Model>
GradientConstants estimate_constants(const Model& model,
                                     const std::vector<data::DatasetShard>& shards,
                                     const std::vector<ParamVector>& params_samples, int batch,
                                     Rng& rng, int variance_draws = 32) {
    if (params_samples.size() < 2) {
        throw estimation_error("estimate_constants: need at least 2 parameter samples");
    }
    const std::size_t ns = params_samples.size();
    const std::size_t na = shards.size();

    std::vector<std::vector<ParamVector>> full(na, std::vector<ParamVector>(ns));
    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t s = 0; s < ns; ++s) {
            full[i][s] = model.grad(params_samples[s], std::span(shards[i].train));
        }
    }

    GradientConstants out;
    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t s = 0; s < ns; ++s) {
            for (std::size_t t = s + 1; t < ns; ++t) {
                const double dx = vec::dist(params_samples[s], params_samples[t]);
                if (dx < 1e-12) continue;
                out.L = std::max(out.L, vec::dist(full[i][s], full[i][t]) / dx);
            }
        }
    }
    for (std::size_t i = 0; i < na; ++i) {
        const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(batch),
                                                    shards[i].train.size());
        for (std::size_t s = 0; s < ns; ++s) {
            double var = 0.0;
            for (int dr = 0; dr < variance_draws; ++dr) {
                const auto idx = rng.sample_without_replacement(shards[i].train.size(), b);
                std::vector<data::Sample> mb;
                mb.reserve(b);
                for (std::size_t j : idx) mb.push_back(shards[i].train[j]);
                var += vec::dist_sq(model.grad(params_samples[s], std::span(mb)), full[i][s]);
            }
            out.theta_sq = std::max(out.theta_sq, var / variance_draws);
        }
    }
    for (std::size_t s = 0; s < ns; ++s) {
        ParamVector avg(params_samples[0].size(), 0.0);
        for (std::size_t i = 0; i < na; ++i) vec::axpy(1.0, full[i][s], avg);
        vec::scale(avg, 1.0 / static_cast<double>(na));
        double het = 0.0;
        for (std::size_t i = 0; i < na; ++i) het += vec::dist_sq(full[i][s], avg);
        out.tau_sq = std::max(out.tau_sq, het / static_cast<double>(na));
    }
    return out;
}

struct BoundConstants {
    double L = 0.0;
    double theta_sq = 0.0;
    double tau_sq = 0.0;
    double sigma = 0.0;
    double gamma = 0.0;
    double lambda_min = 0.0;
    double delta0 = 0.0;
    double chi_sq = 0.0;
    double f0 = 0.0;      // f(xbar(0))
    double f_star = 0.0;  // lower bound on f; 0 for cross entropy
    int d = 0;
    int n_normal = 0;
    long K = 0;
};

struct BoundReport {
    double Lambda = kNaN;
    bool th1_applicable = false;  // step-size condition for the consensus bound
    double th1_steady = kNaN;
    double th1_fraction = kNaN;  // fraction of iterations with delta <= bound
    double th2_lhs = kNaN;
    double th2_rhs = kNaN;
    bool th2_satisfied = false;
    double C1 = kNaN, C2 = kNaN, C3 = kNaN, C4 = kNaN, C5 = kNaN;
    double c = kNaN;  // gamma * sqrt(K)
};

inline BoundReport evaluate_bounds(const RunMetrics& metrics, const BoundConstants& bc) {
    BoundReport rep;
    const double lam = bc.lambda_min;
    const double g = bc.gamma;
    const double noise_term = 8.0 * bc.theta_sq + 6.0 * bc.tau_sq + 2.0 * bc.d * bc.sigma * bc.sigma;

    rep.Lambda = (1.0 - lam) * (2.0 * lam + 24.0 * g * g * bc.L * bc.L * (2.0 - lam)) /
                 ((2.0 - lam) * lam);
    const double gamma_cap =
        (bc.L > 0.0 && lam < 1.0)
            ? 0.5 / bc.L * std::sqrt(lam / (6.0 * (1.0 - lam) * (2.0 - lam)))
            : std::numeric_limits<double>::infinity();
    rep.th1_applicable = g < gamma_cap && rep.Lambda < 1.0 && rep.Lambda >= 0.0;
    rep.th1_steady = 2.0 * g * g * noise_term / (lam * (1.0 - rep.Lambda));

    std::size_t ok = 0;
    std::size_t total = 0;
    double pw = 1.0;  // Lambda^k
    for (const auto& it : metrics.iters) {
        const double rhs = pw * bc.delta0 + rep.th1_steady;
        if (std::isfinite(it.delta)) {
            ++total;
            if (it.delta <= rhs) ++ok;
        }
        pw *= rep.Lambda;
    }
    rep.th1_fraction = total ? static_cast<double>(ok) / static_cast<double>(total) : kNaN;

    double sum = 0.0;
    std::size_t cnt = 0;
    for (const auto& it : metrics.iters) {
        if (std::isfinite(it.grad_norm_sq)) {
            sum += it.grad_norm_sq;
            ++cnt;
        }
    }
    rep.th2_lhs = cnt ? sum / static_cast<double>(cnt) : kNaN;

    const double K = static_cast<double>(bc.K);
    const double c = g * std::sqrt(K);
    const double nn = static_cast<double>(bc.n_normal);
    const double chi = bc.chi_sq;
    const double one_minus_L = 1.0 - rep.Lambda;
    rep.c = c;
    rep.C1 = 2.0 * (bc.f0 - bc.f_star) / c + 2.0 * c * bc.theta_sq * bc.L / nn;
    rep.C2 = 3.0 * bc.L * bc.L * (1.0 + 24.0 * chi * nn * nn) / (nn * nn) *
             (lam * bc.delta0 + 2.0 * c * noise_term) / (lam * one_minus_L);
    rep.C3 = 96.0 / (c * lam * one_minus_L) + 48.0 / nn;
    rep.C4 = 8.0 * chi / (c * lam * one_minus_L) + (3.0 + 12.0 * chi) / nn;
    rep.C5 = 2.0 * chi * bc.delta0 / (c * c * one_minus_L);
    rep.th2_rhs = rep.C1 / std::sqrt(K) + rep.C2 / K +
                  rep.C3 * chi * (bc.theta_sq + bc.tau_sq) + rep.C4 * bc.d * bc.sigma * bc.sigma +
                  rep.C5;
    rep.th2_satisfied = std::isfinite(rep.th2_lhs) && rep.th2_lhs <= rep.th2_rhs;
    return rep;
}

}  // namespace safesgd::protocol

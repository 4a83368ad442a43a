#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "safesgd/common.hpp"

namespace safesgd::protocol {

// Directed communication graph over n agents, optionally varying with the
// iteration counter. Edges are (src, dst) meaning src's message reaches dst,
// i.e. src is an in-neighbor of dst. Self-loops are rejected; an agent always
// retains its own pre-aggregation parameter through the update rule instead.
class Topology {
  public:
    struct TimedEdge {
        long k_start = 0;
        long k_end = 0;  // inclusive
        int src = 0;
        int dst = 0;
    };

    static Topology complete(int n, std::set<int> byzantine) {
        Topology t;
        t.n_ = n;
        t.byzantine_ = std::move(byzantine);
        t.complete_ = true;
        t.check_agents();
        return t;
    }

    // Edge-schedule format: optional "byzantine: i,j,..." header, then lines
    // "k_start k_end src dst" (iteration range inclusive). '#' starts a
    // comment.
    static Topology from_file(const std::string& path, int n) {
        std::ifstream is(path);
        if (!is) throw config_error("topology: cannot open '" + path + "'");
        Topology t;
        t.n_ = n;
        std::string line;
        long lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            auto is_blank = [](const std::string& s) {
                return s.find_first_not_of(" \t\r\n") == std::string::npos;
            };
            if (is_blank(line)) continue;
            if (line.find("byzantine:") != std::string::npos) {
                std::string rest = line.substr(line.find(':') + 1);
                std::stringstream ss(rest);
                std::string tok;
                while (std::getline(ss, tok, ',')) {
                    if (is_blank(tok)) continue;
                    t.byzantine_.insert(std::stoi(tok));
                }
                continue;
            }
            std::stringstream ss(line);
            TimedEdge e;
            if (!(ss >> e.k_start >> e.k_end >> e.src >> e.dst)) {
                throw config_error("topology: malformed line " + std::to_string(lineno) + " in '" +
                                   path + "'");
            }
            if (e.src == e.dst) throw config_error("topology: self-loop at line " + std::to_string(lineno));
            if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n) {
                throw config_error("topology: agent id out of range at line " + std::to_string(lineno));
            }
            if (e.k_end < e.k_start) {
                throw config_error("topology: empty iteration range at line " + std::to_string(lineno));
            }
            t.edges_.push_back(e);
        }
        t.check_agents();
        return t;
    }

    int n() const { return n_; }
    const std::set<int>& byzantine() const { return byzantine_; }
    bool is_byzantine(int i) const { return byzantine_.count(i) > 0; }
    int f() const { return static_cast<int>(byzantine_.size()); }
    int n_normal() const { return n_ - f(); }

    std::vector<int> normal_agents() const {
        std::vector<int> out;
        for (int i = 0; i < n_; ++i)
            if (!is_byzantine(i)) out.push_back(i);
        return out;
    }

    std::vector<int> in_neighbors(long k, int agent) const {
        std::vector<int> out;
        if (complete_) {
            for (int j = 0; j < n_; ++j)
                if (j != agent) out.push_back(j);
            return out;
        }
        std::set<int> seen;
        for (const auto& e : edges_) {
            if (e.dst == agent && e.k_start <= k && k <= e.k_end) seen.insert(e.src);
        }
        out.assign(seen.begin(), seen.end());
        return out;
    }

    std::vector<int> out_neighbors(long k, int agent) const {
        std::vector<int> out;
        if (complete_) {
            for (int j = 0; j < n_; ++j)
                if (j != agent) out.push_back(j);
            return out;
        }
        std::set<int> seen;
        for (const auto& e : edges_) {
            if (e.src == agent && e.k_start <= k && k <= e.k_end) seen.insert(e.dst);
        }
        out.assign(seen.begin(), seen.end());
        return out;
    }

    // Iterations at which the edge set can change, within [0, K).
    std::vector<long> epochs(long K) const {
        std::set<long> ks{0};
        for (const auto& e : edges_) {
            if (e.k_start > 0 && e.k_start < K) ks.insert(e.k_start);
            if (e.k_end + 1 > 0 && e.k_end + 1 < K) ks.insert(e.k_end + 1);
        }
        return {ks.begin(), ks.end()};
    }

    // The subgraph induced by the normal agents must be strongly connected at
    // every iteration; checked once per epoch.
    void validate_connectivity(long K) const {
        const auto normals = normal_agents();
        if (normals.empty()) throw config_error("topology: no normal agents");
        for (long k : epochs(K)) {
            if (!strongly_connected(k, normals)) {
                throw config_error("topology: normal-agent subgraph not strongly connected at iteration " +
                                   std::to_string(k));
            }
        }
    }

  private:
    void check_agents() const {
        if (n_ <= 0) throw config_error("topology: need at least one agent");
        for (int b : byzantine_) {
            if (b < 0 || b >= n_) throw config_error("topology: byzantine id out of range");
        }
    }

    bool strongly_connected(long k, const std::vector<int>& normals) const {
        if (normals.size() == 1) return true;
        std::map<int, int> pos;
        for (std::size_t i = 0; i < normals.size(); ++i) pos[normals[i]] = static_cast<int>(i);
        const int nn = static_cast<int>(normals.size());
        std::vector<std::vector<int>> fwd(nn), rev(nn);
        for (int i = 0; i < nn; ++i) {
            for (int src : in_neighbors(k, normals[i])) {
                auto it = pos.find(src);
                if (it == pos.end()) continue;
                fwd[it->second].push_back(i);  // src -> i
                rev[i].push_back(it->second);
            }
        }
        auto reaches_all = [&](const std::vector<std::vector<int>>& adj) {
            std::vector<char> seen(nn, 0);
            std::vector<int> stack{0};
            seen[0] = 1;
            int count = 1;
            while (!stack.empty()) {
                const int u = stack.back();
                stack.pop_back();
                for (int v : adj[u]) {
                    if (!seen[v]) {
                        seen[v] = 1;
                        ++count;
                        stack.push_back(v);
                    }
                }
            }
            return count == nn;
        };
        return reaches_all(fwd) && reaches_all(rev);
    }

    int n_ = 0;
    std::set<int> byzantine_;
    bool complete_ = false;
    std::vector<TimedEdge> edges_;
};

}  // namespace safesgd::protocol

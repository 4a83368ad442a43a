#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "safesgd/common.hpp"
#include "safesgd/rng.hpp"

namespace safesgd::data {

// One labeled 2-D point. Class 1 means the coordinate signs differ.
struct Sample {
    double x1 = 0.0;
    double x2 = 0.0;
    int label = 0;
};

struct DatasetShard {
    int agent_id = 0;
    std::vector<Sample> train;
    std::vector<Sample> test;
};

struct SynthesisConfig {
    double range_half_width = 8.0;
    double pad = 0.5;
    double label_noise_rate = 0.0;
};

inline int xor_label(double x1, double x2) { return ((x1 > 0.0) != (x2 > 0.0)) ? 1 : 0; }

// Draw `count` points uniformly from [-w, w]^2, push each coordinate away from
// the axes by `pad` in the direction of its sign, label by XOR of the signs,
// then flip each label independently with probability `label_noise_rate`.
// Coordinates that come out exactly 0 are redrawn (sign would be undefined).
inline std::vector<Sample> synthesize(std::size_t count, const SynthesisConfig& cfg, Rng& rng) {
    std::vector<Sample> out;
    out.reserve(count);
    const double w = cfg.range_half_width;
    for (std::size_t i = 0; i < count; ++i) {
        double x1 = 0.0;
        double x2 = 0.0;
        do {
            x1 = rng.uniform(-w, w);
            x2 = rng.uniform(-w, w);
        } while (x1 == 0.0 || x2 == 0.0);
        x1 += (x1 > 0.0 ? cfg.pad : -cfg.pad);
        x2 += (x2 > 0.0 ? cfg.pad : -cfg.pad);
        int label = xor_label(x1, x2);
        if (cfg.label_noise_rate > 0.0 && rng.uniform01() < cfg.label_noise_rate) label = 1 - label;
        out.push_back({x1, x2, label});
    }
    return out;
}

// One shard per normal agent, each drawn from its own pair of substreams.
inline std::vector<DatasetShard> partition(const std::vector<int>& sizes_train,
                                           const std::vector<int>& sizes_test,
                                           const SynthesisConfig& cfg, std::uint64_t seed) {
    if (sizes_train.size() != sizes_test.size()) {
        throw config_error("partition: sizes_train and sizes_test have different lengths");
    }
    std::vector<DatasetShard> shards;
    shards.reserve(sizes_train.size());
    for (std::size_t a = 0; a < sizes_train.size(); ++a) {
        if (sizes_train[a] < 0 || sizes_test[a] < 0) {
            throw config_error("partition: negative shard size");
        }
        DatasetShard shard;
        shard.agent_id = static_cast<int>(a);
        Rng train_rng = Rng::stream(seed, StreamTag::kTrainData, a);
        Rng test_rng = Rng::stream(seed, StreamTag::kTestData, a);
        shard.train = synthesize(static_cast<std::size_t>(sizes_train[a]), cfg, train_rng);
        shard.test = synthesize(static_cast<std::size_t>(sizes_test[a]), cfg, test_rng);
        shards.push_back(std::move(shard));
    }
    return shards;
}

// CSV exchange format: agent_id,split,x1,x2,label with split in {train,test}.
inline void export_csv(const std::vector<DatasetShard>& shards, std::ostream& os) {
    os << "agent_id,split,x1,x2,label\n";
    char buf[128];
    auto put = [&](int agent, const char* split, const Sample& s) {
        std::snprintf(buf, sizeof(buf), "%d,%s,%.17g,%.17g,%d\n", agent, split, s.x1, s.x2, s.label);
        os << buf;
    };
    for (const auto& shard : shards) {
        for (const auto& s : shard.train) put(shard.agent_id, "train", s);
        for (const auto& s : shard.test) put(shard.agent_id, "test", s);
    }
}

inline std::vector<DatasetShard> import_csv(std::istream& is) {
    std::vector<DatasetShard> shards;
    std::string line;
    if (!std::getline(is, line)) throw config_error("shard csv: empty file");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string agent_s, split, x1_s, x2_s, label_s;
        if (!std::getline(ss, agent_s, ',') || !std::getline(ss, split, ',') ||
            !std::getline(ss, x1_s, ',') || !std::getline(ss, x2_s, ',') ||
            !std::getline(ss, label_s)) {
            throw config_error("shard csv: malformed line: " + line);
        }
        const int agent = std::stoi(agent_s);
        if (agent < 0) throw config_error("shard csv: negative agent id");
        if (static_cast<std::size_t>(agent) >= shards.size()) {
            shards.resize(static_cast<std::size_t>(agent) + 1);
            for (std::size_t i = 0; i < shards.size(); ++i) shards[i].agent_id = static_cast<int>(i);
        }
        Sample s{std::stod(x1_s), std::stod(x2_s), std::stoi(label_s)};
        if (split == "train") {
            shards[static_cast<std::size_t>(agent)].train.push_back(s);
        } else if (split == "test") {
            shards[static_cast<std::size_t>(agent)].test.push_back(s);
        } else {
            throw config_error("shard csv: unknown split '" + split + "'");
        }
    }
    return shards;
}

}  // namespace safesgd::data

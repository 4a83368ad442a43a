#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "safesgd/data.hpp"

using namespace safesgd;
using data::Sample;
using data::SynthesisConfig;

TEST_CASE("xor label convention: class 1 iff signs differ") {
    CHECK(data::xor_label(1.0, 1.0) == 0);
    CHECK(data::xor_label(1.0, -1.0) == 1);
    CHECK(data::xor_label(-1.0, 1.0) == 1);
    CHECK(data::xor_label(-1.0, -1.0) == 0);
    CHECK(data::xor_label(3.5, -4.5) == 1);
}

TEST_CASE("padding shifts coordinates away from the axes") {
    // A point drawn at (3.0, -4.0) with pad 0.5 lands at (3.5, -4.5).
    SynthesisConfig cfg{8.0, 0.5, 0.0};
    Rng rng(7);
    const auto samples = data::synthesize(2000, cfg, rng);
    REQUIRE(samples.size() == 2000);
    for (const auto& s : samples) {
        CHECK(std::abs(s.x1) >= cfg.pad);
        CHECK(std::abs(s.x2) >= cfg.pad);
        CHECK(std::abs(s.x1) <= cfg.range_half_width + cfg.pad);
        CHECK(std::abs(s.x2) <= cfg.range_half_width + cfg.pad);
        CHECK(s.label == data::xor_label(s.x1, s.x2));
    }
}

TEST_CASE("synthesis is deterministic in the seed") {
    SynthesisConfig cfg{8.0, 0.5, 0.1};
    Rng a(42), b(42);
    const auto sa = data::synthesize(500, cfg, a);
    const auto sb = data::synthesize(500, cfg, b);
    REQUIRE(sa.size() == sb.size());
    for (std::size_t i = 0; i < sa.size(); ++i) {
        CHECK(sa[i].x1 == sb[i].x1);
        CHECK(sa[i].x2 == sb[i].x2);
        CHECK(sa[i].label == sb[i].label);
    }
}

TEST_CASE("label flips track the configured noise rate") {
    const double rate = 0.15;
    const std::size_t n = 200000;
    SynthesisConfig cfg{8.0, 0.5, rate};
    Rng rng(11);
    const auto samples = data::synthesize(n, cfg, rng);
    std::size_t flipped = 0;
    for (const auto& s : samples) {
        if (s.label != data::xor_label(s.x1, s.x2)) ++flipped;
    }
    const double observed = static_cast<double>(flipped) / static_cast<double>(n);
    const double dev = 3.0 * std::sqrt(rate * (1.0 - rate) / static_cast<double>(n));
    CHECK(std::abs(observed - rate) < dev);
}

TEST_CASE("partition produces the requested shard sizes") {
    const std::vector<int> train{1122, 1315, 1521, 1400, 1369, 1255, 1239,
                                 1160, 1138, 1588, 1550, 1384, 1238};
    const std::vector<int> test{312, 309, 300, 286, 283, 313, 312, 294, 291, 283, 292, 204, 299};
    const auto shards = data::partition(train, test, SynthesisConfig{}, 1);
    REQUIRE(shards.size() == 13);
    CHECK(shards[0].train.size() == 1122);
    CHECK(shards[0].test.size() == 312);
    for (std::size_t i = 0; i < shards.size(); ++i) {
        CHECK(shards[i].agent_id == static_cast<int>(i));
        CHECK(shards[i].train.size() == static_cast<std::size_t>(train[i]));
        CHECK(shards[i].test.size() == static_cast<std::size_t>(test[i]));
    }
}

TEST_CASE("partition edge cases") {
    SECTION("empty shard") {
        const auto shards = data::partition({0}, {0}, SynthesisConfig{}, 3);
        REQUIRE(shards.size() == 1);
        CHECK(shards[0].train.empty());
        CHECK(shards[0].test.empty());
    }
    SECTION("identical shards across invocations with a fixed seed") {
        const auto a = data::partition({4, 4}, {2, 2}, SynthesisConfig{}, 99);
        const auto b = data::partition({4, 4}, {2, 2}, SynthesisConfig{}, 99);
        for (int i = 0; i < 2; ++i) {
            for (std::size_t j = 0; j < a[i].train.size(); ++j) {
                CHECK(a[i].train[j].x1 == b[i].train[j].x1);
                CHECK(a[i].train[j].x2 == b[i].train[j].x2);
            }
        }
    }
    SECTION("length mismatch is a configuration error") {
        CHECK_THROWS_AS(data::partition({4, 4}, {2}, SynthesisConfig{}, 1), config_error);
    }
    SECTION("distinct agents draw distinct shards") {
        const auto shards = data::partition({64, 64}, {0, 0}, SynthesisConfig{}, 5);
        bool any_diff = false;
        for (std::size_t j = 0; j < 64; ++j) {
            if (shards[0].train[j].x1 != shards[1].train[j].x1) any_diff = true;
        }
        CHECK(any_diff);
    }
}

TEST_CASE("shard csv round-trips") {
    const auto shards = data::partition({5, 3}, {2, 1}, SynthesisConfig{}, 17);
    std::stringstream ss;
    data::export_csv(shards, ss);
    const auto back = data::import_csv(ss);
    REQUIRE(back.size() == shards.size());
    for (std::size_t i = 0; i < shards.size(); ++i) {
        REQUIRE(back[i].train.size() == shards[i].train.size());
        REQUIRE(back[i].test.size() == shards[i].test.size());
        for (std::size_t j = 0; j < shards[i].train.size(); ++j) {
            CHECK(back[i].train[j].x1 == shards[i].train[j].x1);
            CHECK(back[i].train[j].x2 == shards[i].train[j].x2);
            CHECK(back[i].train[j].label == shards[i].train[j].label);
        }
    }
}

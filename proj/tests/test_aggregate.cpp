#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <set>
#include <vector>

#include <statesim/statesim.hpp>

#include "oracles.hpp"

using namespace statesim;
using Catch::Matchers::WithinAbs;

namespace {

DistanceMatrix matrix_from_lower(int n, const std::vector<double>& lower) {
    DistanceMatrix dm(n);
    std::size_t k = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) dm.set(i, j, lower[k++]);
    return dm;
}

bool same_blocks(const Partition& a, const Partition& b) {
    std::set<std::vector<int>> sa(a.blocks.begin(), a.blocks.end());
    std::set<std::vector<int>> sb(b.blocks.begin(), b.blocks.end());
    return sa == sb;
}

// Components of the graph with an edge wherever distance < epsilon; the
// epsilon aggregation must land exactly here regardless of accretion order.
Partition connected_components(const DistanceMatrix& dist, double epsilon) {
    const int n = dist.n;
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int v) {
        while (parent[v] != v) v = parent[v] = parent[parent[v]];
        return v;
    };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (dist.at(i, j) < epsilon) parent[find(i)] = find(j);
    std::vector<int> block_of(n);
    std::vector<int> next_id;  // root -> dense id by first appearance
    for (int s = 0; s < n; ++s) {
        const int r = find(s);
        int id = -1;
        for (std::size_t k = 0; k < next_id.size(); ++k)
            if (next_id[k] == r) id = static_cast<int>(k);
        if (id < 0) {
            id = static_cast<int>(next_id.size());
            next_id.push_back(r);
        }
        block_of[s] = id;
    }
    return partition_from_block_of(block_of);
}

Mdp two_state_split() {
    Mdp mdp(2, 1);
    mdp.reward(1, 0) = 1.0;
    mdp.transition(0, 0, 0) = 1.0;
    mdp.transition(1, 0, 1) = 1.0;
    return mdp;
}

}  // namespace

TEST_CASE("aggregate_to_k boundary cases") {
    RngStream rng(21);
    const auto dm = matrix_from_lower(4, {0.5, 0.9, 0.8, 0.2, 0.7, 0.4});

    SECTION("k = n keeps singletons") {
        const auto res = aggregate_to_k(dm, 4);
        REQUIRE(res.partition.n_blocks() == 4);
        REQUIRE(res.trace.empty());
        REQUIRE(res.method == "to_k");
        REQUIRE(res.parameter == 4.0);
    }
    SECTION("k = 1 merges everything") {
        const auto res = aggregate_to_k(dm, 1);
        REQUIRE(res.partition.n_blocks() == 1);
        REQUIRE(res.trace.size() == 3);
        REQUIRE(res.partition.blocks[0] == std::vector<int>{0, 1, 2, 3});
    }
    SECTION("k out of range") {
        REQUIRE_THROWS_AS(aggregate_to_k(dm, 0), std::invalid_argument);
        REQUIRE_THROWS_AS(aggregate_to_k(dm, 5), std::invalid_argument);
        REQUIRE_THROWS_AS(aggregate_to_k(DistanceMatrix{}, 1), std::invalid_argument);
    }
}

TEST_CASE("aggregate_to_k merges the unique zero pair first") {
    DistanceMatrix dm = matrix_from_lower(4, {0.5, 0.9, 0.8, 0.2, 0.7, 0.4});
    dm.set(3, 1, 0.0);
    const auto res = aggregate_to_k(dm, 3);
    REQUIRE(res.trace.size() == 1);
    REQUIRE(res.trace[0].i == 1);
    REQUIRE(res.trace[0].j == 3);
    REQUIRE(res.trace[0].distance == 0.0);
    REQUIRE(res.partition.block_of[1] == res.partition.block_of[3]);
}

TEST_CASE("aggregate_to_k breaks ties lexicographically") {
    DistanceMatrix dm(4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < i; ++j) dm.set(i, j, 1.0);
    dm.set(1, 0, 0.5);
    dm.set(3, 2, 0.5);
    const auto res = aggregate_to_k(dm, 2);
    REQUIRE(res.trace[0].i == 0);
    REQUIRE(res.trace[0].j == 1);
    REQUIRE(res.trace[1].i == 2);
    REQUIRE(res.trace[1].j == 3);
    REQUIRE(res.partition.blocks[0] == std::vector<int>{0, 1});
    REQUIRE(res.partition.blocks[1] == std::vector<int>{2, 3});
}

TEST_CASE("aggregate_to_k trace distances never decrease") {
    RngStream rng(3111);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 4 + static_cast<int>(rng.uniform_int(5));
        std::vector<double> lower(static_cast<std::size_t>(n) * (n - 1) / 2);
        for (double& x : lower) x = rng.uniform(0.0, 2.0);
        const auto res = aggregate_to_k(matrix_from_lower(n, lower), 1);
        for (std::size_t t = 1; t < res.trace.size(); ++t)
            REQUIRE(res.trace[t].distance >= res.trace[t - 1].distance);
    }
}

TEST_CASE("aggregate_to_k partitions are nested across k") {
    RngStream rng(7321);
    const int n = 8;
    std::vector<double> lower(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (double& x : lower) x = rng.uniform(0.0, 2.0);
    const auto dm = matrix_from_lower(n, lower);
    for (int k = 1; k < n; ++k) {
        const auto coarse = aggregate_to_k(dm, k);
        const auto fine = aggregate_to_k(dm, k + 1);
        // every fine block stays inside one coarse block
        for (const auto& blk : fine.partition.blocks) {
            const int target = coarse.partition.block_of[blk[0]];
            for (int s : blk) REQUIRE(coarse.partition.block_of[s] == target);
        }
    }
}

TEST_CASE("aggregate_epsilon boundary cases") {
    const auto dm = matrix_from_lower(4, {0.5, 0.9, 0.8, 0.2, 0.7, 0.4});
    SECTION("epsilon 0 keeps singletons") {
        const auto res = aggregate_epsilon(dm, 0.0);
        REQUIRE(res.partition.n_blocks() == 4);
        REQUIRE(res.method == "epsilon");
    }
    SECTION("epsilon above the largest entry merges everything") {
        REQUIRE(aggregate_epsilon(dm, 0.95).partition.n_blocks() == 1);
    }
    SECTION("negative epsilon rejected") {
        REQUIRE_THROWS_AS(aggregate_epsilon(dm, -0.1), std::invalid_argument);
    }
}

TEST_CASE("aggregate_epsilon equals the threshold-graph components") {
    RngStream rng(99001);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 3 + static_cast<int>(rng.uniform_int(6));
        std::vector<double> lower(static_cast<std::size_t>(n) * (n - 1) / 2);
        for (double& x : lower) x = rng.uniform(0.0, 1.0);
        const auto dm = matrix_from_lower(n, lower);
        for (double eps : {0.1, 0.3, 0.5, 0.9}) {
            const auto res = aggregate_epsilon(dm, eps);
            REQUIRE(same_blocks(res.partition, connected_components(dm, eps)));
        }
    }
}

TEST_CASE("aggregate_epsilon block count is monotone in epsilon") {
    RngStream rng(427);
    const int n = 10;
    std::vector<double> lower(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (double& x : lower) x = rng.uniform(0.0, 1.0);
    const auto dm = matrix_from_lower(n, lower);
    int prev = n + 1;
    for (double eps : {0.0, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.01}) {
        const int blocks = aggregate_epsilon(dm, eps).partition.n_blocks();
        REQUIRE(blocks <= prev);
        prev = blocks;
    }
    REQUIRE(prev == 1);
}

TEST_CASE("epsilon at twice tol recovers bisimulation on duplicated states") {
    RngStream rng(11821);
    MetricRunConfig cfg;
    cfg.c = 0.9;
    cfg.tol = 1e-6;
    for (int trial = 0; trial < 5; ++trial) {
        const Mdp mdp = oracle::make_duplicated_mdp(oracle::random_mdp(rng, 3, 2));
        const auto dm = fixed_point_metric(mdp, cfg);
        const auto res = aggregate_epsilon(dm, 2.0 * cfg.tol);
        REQUIRE(same_blocks(res.partition, bisimulation_partition(mdp)));
    }
}

TEST_CASE("build_aggregate_mdp with singletons is the identity") {
    RngStream rng(5009);
    const Mdp mdp = oracle::random_mdp(rng, 5, 2);
    const Mdp agg = build_aggregate_mdp(mdp, singleton_partition(5));
    REQUIRE(agg.n_states == 5);
    REQUIRE(agg.n_actions == 2);
    REQUIRE(agg.rewards == mdp.rewards);
    REQUIRE(agg.transitions == mdp.transitions);
}

TEST_CASE("build_aggregate_mdp on the bisimulation partition keeps member rewards") {
    RngStream rng(6001);
    const Mdp base = oracle::random_mdp(rng, 4, 2);
    const Mdp mdp = oracle::make_duplicated_mdp(base);
    const auto part = bisimulation_partition(mdp);
    const Mdp agg = build_aggregate_mdp(mdp, part);
    REQUIRE(agg.n_states == part.n_blocks());
    REQUIRE_NOTHROW(validate_mdp(agg));
    for (int b = 0; b < agg.n_states; ++b)
        for (int a = 0; a < agg.n_actions; ++a)
            REQUIRE_THAT(agg.reward(b, a),
                         WithinAbs(mdp.reward(part.blocks[b][0], a), 1e-15));
}

TEST_CASE("build_aggregate_mdp averages rewards across a block") {
    const Mdp mdp = two_state_split();
    const Mdp agg = build_aggregate_mdp(mdp, partition_from_blocks({{0, 1}}));
    REQUIRE(agg.n_states == 1);
    REQUIRE_THAT(agg.reward(0, 0), WithinAbs(0.5, 1e-15));
    REQUIRE(agg.transition(0, 0, 0) == 1.0);
    REQUIRE(agg.labels.size() == 1);
    REQUIRE(agg.labels[0] == "B0(2 states)");
}

TEST_CASE("build_aggregate_mdp rows stay stochastic for every partition") {
    RngStream rng(808808);
    const Mdp mdp = oracle::random_mdp(rng, 4, 2);
    for (const auto& part : oracle::all_partitions(4))
        REQUIRE_NOTHROW(validate_mdp(build_aggregate_mdp(mdp, part)));
}

TEST_CASE("linf_error vanishes for singleton and bisimulation partitions") {
    const double gamma = 0.9, tol = 1e-6;
    SECTION("singletons on the benchmarks") {
        for (const Mdp& mdp : {make_gridworld(3), make_coffee_robot()}) {
            const double err = linf_error(mdp, singleton_partition(mdp.n_states), gamma, tol);
            REQUIRE(err <= 2.0 * tol);
        }
    }
    SECTION("bisimulation partition on the gridworld") {
        const Mdp mdp = make_gridworld(3);
        const auto part = bisimulation_partition(mdp);
        REQUIRE(part.n_blocks() < mdp.n_states);  // center orientations merge
        REQUIRE(linf_error(mdp, part, gamma, tol) <= 2.0 * tol);
    }
    SECTION("bisimulation partition on duplicated random MDPs") {
        RngStream rng(62);
        const Mdp mdp = oracle::make_duplicated_mdp(oracle::random_mdp(rng, 4, 2));
        const auto part = bisimulation_partition(mdp);
        REQUIRE(linf_error(mdp, part, gamma, tol) <= 2.0 * tol);
    }
}

TEST_CASE("linf_error hand example: merging the absorbing pair costs 1") {
    const double err = linf_error(two_state_split(), partition_from_blocks({{0, 1}}), 0.5, 1e-9);
    // original values (0, 2); merged chain has reward 0.5 and value 1 everywhere
    REQUIRE_THAT(err, WithinAbs(1.0, 1e-6));
}

TEST_CASE("linf_error accepts a precomputed original value function") {
    const Mdp mdp = make_gridworld(3);
    const auto vf = value_iteration(mdp, 0.9, 1e-6);
    const auto part = bisimulation_partition(mdp);
    const double a = linf_error(mdp, vf, part, 1e-6);
    const double b = linf_error(mdp, part, 0.9, 1e-6);
    REQUIRE_THAT(a, WithinAbs(b, 1e-12));
}

TEST_CASE("aggregation json round-trips") {
    const auto dm = matrix_from_lower(4, {0.5, 0.9, 0.8, 0.2, 0.7, 0.4});
    SECTION("to_k serializes the parameter as an integer") {
        const auto res = aggregate_to_k(dm, 2);
        const std::string text = aggregation_to_json(res);
        REQUIRE(text.find("\"parameter\": 2,") != std::string::npos);
        const auto back = aggregation_from_json_text(text);
        REQUIRE(back.method == "to_k");
        REQUIRE(back.parameter == 2.0);
        REQUIRE(back.partition.blocks == res.partition.blocks);
        REQUIRE(back.trace.size() == res.trace.size());
        for (std::size_t t = 0; t < back.trace.size(); ++t) {
            REQUIRE(back.trace[t].i == res.trace[t].i);
            REQUIRE(back.trace[t].j == res.trace[t].j);
            REQUIRE(back.trace[t].distance == res.trace[t].distance);
        }
    }
    SECTION("epsilon serializes the parameter as a real") {
        const auto res = aggregate_epsilon(dm, 0.25);
        const auto back = aggregation_from_json_text(aggregation_to_json(res));
        REQUIRE(back.method == "epsilon");
        REQUIRE(back.parameter == 0.25);
        REQUIRE(back.partition.blocks == res.partition.blocks);
    }
    SECTION("malformed input is rejected") {
        REQUIRE_THROWS_AS(aggregation_from_json_text("oops"), IoError);
        REQUIRE_THROWS_AS(aggregation_from_json_text(R"({"method": "to_k"})"), IoError);
        REQUIRE_THROWS_AS(aggregation_from_json_text(R"({"method": "x", "blocks": [[0],[0]]})"),
                          std::invalid_argument);
    }
}

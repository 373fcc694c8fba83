#pragma once

// Greedy state aggregation driven by a distance matrix (single-linkage down
// to k blocks, or epsilon-threshold accretion), aggregate-MDP construction,
// and the sup-norm value error of aggregating.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "statesim/bisim.hpp"
#include "statesim/io_util.hpp"
#include "statesim/mdp.hpp"
#include "statesim/metrics.hpp"

namespace statesim {

struct AggregationResult {
    Partition partition;
    struct Merge {
        int i, j;  // slot indices at merge time, i < j
        double distance;
    };
    std::vector<Merge> trace;
    std::string method;  // "to_k" or "epsilon"
    double parameter = 0.0;
};

// Single-linkage agglomeration from singletons down to exactly k blocks.
// Block slots keep the index of their smallest member; ties pick the
// lexicographically smallest (i, j) slot pair, so runs are reproducible.
inline AggregationResult aggregate_to_k(const DistanceMatrix& dist, int k) {
    const int n = dist.n;
    if (n <= 0) throw std::invalid_argument("aggregate_to_k: empty distance matrix");
    if (k < 1 || k > n) throw std::invalid_argument("aggregate_to_k: k out of range [1, n_states]");

    std::vector<char> active(n, 1);
    std::vector<std::vector<int>> members(n);
    for (int s = 0; s < n; ++s) members[s] = {s};
    std::vector<double> d(dist.d);  // slot-to-slot single-linkage distances
    auto dd = [&](int a, int b) -> double& { return d[static_cast<std::size_t>(a) * n + b]; };

    AggregationResult res;
    res.method = "to_k";
    res.parameter = static_cast<double>(k);

    int n_active = n;
    while (n_active > k) {
        int bi = -1, bj = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int a = 0; a < n; ++a) {
            if (!active[a]) continue;
            for (int b = a + 1; b < n; ++b) {
                if (!active[b]) continue;
                if (dd(a, b) < best) {
                    best = dd(a, b);
                    bi = a;
                    bj = b;
                }
            }
        }
        res.trace.push_back({bi, bj, best});
        members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
        members[bj].clear();
        active[bj] = 0;
        for (int x = 0; x < n; ++x) {
            if (!active[x] || x == bi) continue;
            const double m = std::min(dd(bi, x), dd(bj, x));
            dd(bi, x) = m;
            dd(x, bi) = m;
        }
        --n_active;
    }

    std::vector<std::vector<int>> blocks;
    blocks.reserve(k);
    for (int s = 0; s < n; ++s) {
        if (!active[s]) continue;
        std::sort(members[s].begin(), members[s].end());
        blocks.push_back(std::move(members[s]));
    }
    res.partition = partition_from_blocks(std::move(blocks));
    return res;
}

// Threshold aggregation: states are processed in ascending index order and
// join the first block containing a state strictly closer than epsilon
// (else found a new block); block-merge passes then combine blocks whose
// minimum cross distance is < epsilon until nothing changes.
inline AggregationResult aggregate_epsilon(const DistanceMatrix& dist, double epsilon) {
    const int n = dist.n;
    if (n <= 0) throw std::invalid_argument("aggregate_epsilon: empty distance matrix");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("aggregate_epsilon: epsilon must be >= 0");

    AggregationResult res;
    res.method = "epsilon";
    res.parameter = epsilon;

    std::vector<std::vector<int>> blocks;
    for (int s = 0; s < n; ++s) {
        bool placed = false;
        for (auto& blk : blocks) {
            double min_d = std::numeric_limits<double>::infinity();
            for (int t : blk) min_d = std::min(min_d, dist.at(s, t));
            if (min_d < epsilon) {
                blk.push_back(s);
                placed = true;
                break;
            }
        }
        if (!placed) blocks.push_back({s});
    }

    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t a = 0; a < blocks.size() && !changed; ++a) {
            for (std::size_t b = a + 1; b < blocks.size() && !changed; ++b) {
                double min_d = std::numeric_limits<double>::infinity();
                for (int s : blocks[a])
                    for (int t : blocks[b]) min_d = std::min(min_d, dist.at(s, t));
                if (min_d < epsilon) {
                    res.trace.push_back({static_cast<int>(a), static_cast<int>(b), min_d});
                    blocks[a].insert(blocks[a].end(), blocks[b].begin(), blocks[b].end());
                    blocks.erase(blocks.begin() + b);
                    changed = true;
                }
            }
        }
    }
    res.partition = partition_from_blocks(std::move(blocks));
    return res;
}

// Block-level MDP: unweighted member means for both rewards and block-to-
// block transition mass. Rows stay stochastic by construction.
inline Mdp build_aggregate_mdp(const Mdp& mdp, const Partition& part) {
    validate_mdp(mdp);
    validate_partition(part, mdp.n_states);

    const int nb = part.n_blocks();
    Mdp agg(nb, mdp.n_actions);
    agg.labels.reserve(nb);
    for (int b = 0; b < nb; ++b)
        agg.labels.push_back("B" + std::to_string(b) + "(" +
                             std::to_string(part.blocks[b].size()) + " states)");

    for (int b = 0; b < nb; ++b) {
        const auto& blk = part.blocks[b];
        const double inv = 1.0 / static_cast<double>(blk.size());
        for (int a = 0; a < mdp.n_actions; ++a) {
            double r = 0.0;
            for (int s : blk) r += mdp.reward(s, a);
            agg.reward(b, a) = r * inv;
            for (int s : blk) {
                auto row = mdp.transition_row(s, a);
                for (int t = 0; t < mdp.n_states; ++t)
                    agg.transition(b, a, part.block_of[t]) += row[t] * inv;
            }
        }
    }
    return agg;
}

// Sup-norm value error of aggregation: both MDPs solved by value iteration
// at tolerance tol, then max_s |V*(s) - V*(block of s)|.
inline double linf_error(const Mdp& mdp, const ValueFunction& original, const Partition& part,
                         double tol) {
    const Mdp agg = build_aggregate_mdp(mdp, part);
    const ValueFunction va = value_iteration(agg, original.gamma, tol);
    double err = 0.0;
    for (int s = 0; s < mdp.n_states; ++s)
        err = std::max(err, std::abs(original.values[s] - va.values[part.block_of[s]]));
    return err;
}

inline double linf_error(const Mdp& mdp, const Partition& part, double gamma, double tol) {
    return linf_error(mdp, value_iteration(mdp, gamma, tol), part, tol);
}

inline std::string aggregation_to_json(const AggregationResult& res) {
    std::string out = "{\n";
    out += "  \"method\": \"" + res.method + "\",\n";
    out += "  \"parameter\": " +
           (res.method == "to_k" ? std::to_string(static_cast<int>(res.parameter))
                                 : format_real(res.parameter)) +
           ",\n";
    out += "  \"blocks\": [\n";
    for (int b = 0; b < res.partition.n_blocks(); ++b) {
        out += "    [";
        for (std::size_t i = 0; i < res.partition.blocks[b].size(); ++i) {
            if (i) out += ", ";
            out += std::to_string(res.partition.blocks[b][i]);
        }
        out += b + 1 < res.partition.n_blocks() ? "],\n" : "]\n";
    }
    out += "  ],\n";
    out += "  \"merge_trace\": [";
    for (std::size_t t = 0; t < res.trace.size(); ++t) {
        if (t) out += ",";
        out += "\n    {\"i\": " + std::to_string(res.trace[t].i) +
               ", \"j\": " + std::to_string(res.trace[t].j) +
               ", \"distance\": " + format_real(res.trace[t].distance) + "}";
    }
    out += res.trace.empty() ? "]\n" : "\n  ]\n";
    out += "}\n";
    return out;
}

inline AggregationResult aggregation_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("aggregation file is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("method") || !j.contains("blocks"))
        throw IoError("aggregation file: missing \"method\" or \"blocks\"");
    AggregationResult res;
    res.method = j["method"].get<std::string>();
    res.parameter = j.value("parameter", 0.0);
    std::vector<std::vector<int>> blocks;
    for (const auto& blk : j["blocks"]) {
        std::vector<int> members;
        for (const auto& v : blk) members.push_back(v.get<int>());
        blocks.push_back(std::move(members));
    }
    res.partition = partition_from_blocks(std::move(blocks));
    if (j.contains("merge_trace")) {
        for (const auto& m : j["merge_trace"])
            res.trace.push_back({m.value("i", -1), m.value("j", -1), m.value("distance", 0.0)});
    }
    return res;
}

}  // namespace statesim

#pragma once

// Exact bisimulation partitioning by signature refinement, and total
// variation measured over bisimulation classes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "statesim/io_util.hpp"
#include "statesim/mdp.hpp"

namespace statesim {

// Canonical form: blocks ordered by smallest member, members ascending.
struct Partition {
    std::vector<std::vector<int>> blocks;
    std::vector<int> block_of;

    int n_states() const { return static_cast<int>(block_of.size()); }
    int n_blocks() const { return static_cast<int>(blocks.size()); }
};

inline void validate_partition(const Partition& part, int n_states) {
    if (part.n_states() != n_states)
        throw std::invalid_argument("partition: covers " + std::to_string(part.n_states()) +
                                    " states, expected " + std::to_string(n_states));
    std::vector<char> seen(n_states, 0);
    for (int b = 0; b < part.n_blocks(); ++b) {
        if (part.blocks[b].empty()) throw std::invalid_argument("partition: empty block");
        for (int s : part.blocks[b]) {
            if (s < 0 || s >= n_states)
                throw std::invalid_argument("partition: state index out of range: " + std::to_string(s));
            if (seen[s])
                throw std::invalid_argument("partition: state appears twice: " + std::to_string(s));
            seen[s] = 1;
            if (part.block_of[s] != b)
                throw std::invalid_argument("partition: block_of inconsistent at state " +
                                            std::to_string(s));
        }
    }
}

inline Partition partition_from_block_of(std::vector<int> block_of) {
    if (block_of.empty()) throw std::invalid_argument("partition: must cover at least one state");
    int max_b = -1;
    for (int b : block_of) {
        if (b < 0) throw std::invalid_argument("partition: negative block id");
        if (b > max_b) max_b = b;
    }
    Partition part;
    part.blocks.resize(max_b + 1);
    for (int s = 0; s < static_cast<int>(block_of.size()); ++s)
        part.blocks[block_of[s]].push_back(s);
    for (const auto& blk : part.blocks)
        if (blk.empty()) throw std::invalid_argument("partition: block ids not contiguous");

    // Canonicalize: renumber blocks by smallest member.
    std::vector<int> order(part.blocks.size());
    for (std::size_t b = 0; b < part.blocks.size(); ++b) order[b] = static_cast<int>(b);
    std::sort(order.begin(), order.end(),
              [&](int x, int y) { return part.blocks[x][0] < part.blocks[y][0]; });
    Partition out;
    out.block_of.assign(block_of.size(), -1);
    out.blocks.reserve(part.blocks.size());
    for (int b : order) {
        for (int s : part.blocks[b]) out.block_of[s] = static_cast<int>(out.blocks.size());
        out.blocks.push_back(std::move(part.blocks[b]));
    }
    return out;
}

inline Partition partition_from_blocks(std::vector<std::vector<int>> blocks) {
    int n = 0;
    for (const auto& blk : blocks) n += static_cast<int>(blk.size());
    std::vector<int> block_of(n, -1);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (blocks[b].empty()) throw std::invalid_argument("partition: empty block");
        for (int s : blocks[b]) {
            if (s < 0 || s >= n)
                throw std::invalid_argument("partition: blocks do not cover a 0..n-1 range");
            if (block_of[s] >= 0)
                throw std::invalid_argument("partition: state appears twice: " + std::to_string(s));
            block_of[s] = static_cast<int>(b);
        }
    }
    return partition_from_block_of(std::move(block_of));
}

inline Partition singleton_partition(int n) {
    std::vector<int> block_of(n);
    for (int s = 0; s < n; ++s) block_of[s] = s;
    return partition_from_block_of(std::move(block_of));
}

namespace detail {
// Values agreeing within the 1e-9 design tolerance land in the same bucket.
inline std::int64_t quantize(double x) { return std::llround(x * 1e9); }
}  // namespace detail

// Largest equivalence relation in which related states have equal rewards for
// every action and equal probability mass into every equivalence class.
// Computed by splitting on (reward vector, class-mass vector) signatures
// until stable; signatures compare through 1e-9-wide quantization buckets.
inline Partition bisimulation_partition(const Mdp& mdp) {
    const int n = mdp.n_states;
    std::vector<int> block_of(n, 0);
    int n_blocks = 1;

    while (true) {
        std::map<std::vector<std::int64_t>, int> ids;
        std::vector<int> next(n);
        std::vector<std::vector<std::int64_t>> keys(n);

        for (int s = 0; s < n; ++s) {
            auto& key = keys[s];
            key.reserve(1 + mdp.n_actions * (1 + n_blocks));
            key.push_back(block_of[s]);
            for (int a = 0; a < mdp.n_actions; ++a)
                key.push_back(detail::quantize(mdp.reward(s, a)));
            std::vector<double> mass(n_blocks);
            for (int a = 0; a < mdp.n_actions; ++a) {
                std::fill(mass.begin(), mass.end(), 0.0);
                auto row = mdp.transition_row(s, a);
                for (int t = 0; t < n; ++t) mass[block_of[t]] += row[t];
                for (int b = 0; b < n_blocks; ++b) key.push_back(detail::quantize(mass[b]));
            }
        }
        int next_count = 0;
        for (int s = 0; s < n; ++s) {
            auto [it, inserted] = ids.try_emplace(std::move(keys[s]), next_count);
            if (inserted) ++next_count;
            next[s] = it->second;
        }
        if (next_count == n_blocks) break;  // splitting only, so equal count means stable
        block_of.swap(next);
        n_blocks = next_count;
    }
    return partition_from_block_of(std::move(block_of));
}

// Total variation after projecting both distributions onto the partition's
// blocks: ½ Σ_B |p(B) − q(B)|.
inline double class_tv(std::span<const double> p, std::span<const double> q,
                       const Partition& part) {
    if (p.size() != q.size()) throw std::invalid_argument("class_tv: support-size mismatch");
    if (static_cast<int>(p.size()) != part.n_states())
        throw std::invalid_argument("class_tv: distribution support does not match partition");
    std::vector<double> diff(part.n_blocks(), 0.0);
    for (std::size_t s = 0; s < p.size(); ++s) diff[part.block_of[s]] += p[s] - q[s];
    double acc = 0.0;
    for (double d : diff) acc += std::abs(d);
    return 0.5 * acc;
}

inline std::string partition_to_json(const Partition& part) {
    std::string out = "{\n  \"blocks\": [\n";
    for (int b = 0; b < part.n_blocks(); ++b) {
        out += "    [";
        for (std::size_t k = 0; k < part.blocks[b].size(); ++k) {
            if (k) out += ", ";
            out += std::to_string(part.blocks[b][k]);
        }
        out += b + 1 < part.n_blocks() ? "],\n" : "]\n";
    }
    out += "  ]\n}\n";
    return out;
}

inline Partition partition_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("partition file is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("blocks") || !j["blocks"].is_array())
        throw IoError("partition file: missing \"blocks\" array");
    std::vector<std::vector<int>> blocks;
    for (const auto& blk : j["blocks"]) {
        if (!blk.is_array()) throw IoError("partition file: each block must be an array");
        std::vector<int> members;
        for (const auto& v : blk) {
            if (!v.is_number_integer()) throw IoError("partition file: non-integer state index");
            members.push_back(v.get<int>());
        }
        blocks.push_back(std::move(members));
    }
    // coverage/duplicate violations surface as invalid_argument from here
    return partition_from_blocks(std::move(blocks));
}

}  // namespace statesim

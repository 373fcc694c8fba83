#pragma once

// Brute-force reference implementations and shared fixtures for the test
// suite. Everything here is deliberately independent of the library's
// algorithms: transport optima come from enumerating basic solutions,
// assignments from permutation search, bisimulation from scanning the whole
// partition lattice.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <statesim/statesim.hpp>

#ifndef _WIN32
#include <sys/wait.h>
#include <unistd.h>
#endif

namespace oracle {

// ---------------------------------------------------------------- generators

inline std::vector<double> random_distribution(statesim::RngStream& rng, int n) {
    std::vector<double> p(n);
    double sum = 0.0;
    for (double& x : p) {
        x = rng.uniform(0.01, 1.0);
        sum += x;
    }
    for (double& x : p) x /= sum;
    return p;
}

inline statesim::Mdp random_mdp(statesim::RngStream& rng, int n_states, int n_actions) {
    statesim::Mdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.rewards.resize(static_cast<std::size_t>(n_states) * n_actions);
    mdp.transitions.resize(static_cast<std::size_t>(n_states) * n_actions * n_states);
    for (double& r : mdp.rewards) r = rng.uniform(0.0, 1.0);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            auto row = random_distribution(rng, n_states);
            std::copy(row.begin(), row.end(),
                      mdp.transitions.begin() +
                          (static_cast<std::size_t>(s) * n_actions + a) * n_states);
        }
    return mdp;
}

// Ground metric from a random embedding on the line: d(i,j) = |x_i - x_j|.
// Satisfies the triangle inequality by construction.
inline std::vector<double> random_line_metric(statesim::RngStream& rng, int m) {
    std::vector<double> x(m);
    for (double& v : x) v = rng.uniform(0.0, 1.0);
    std::vector<double> d(static_cast<std::size_t>(m) * m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            d[static_cast<std::size_t>(i) * m + j] = std::abs(x[i] - x[j]);
    return d;
}

// Splits every state of `base` into two identical copies. Transition mass is
// divided exactly in half (0.5*p is exact in binary floating point), so the
// two copies are bisimilar with bitwise-equal block masses.
inline statesim::Mdp make_duplicated_mdp(const statesim::Mdp& base) {
    statesim::Mdp out;
    out.n_states = 2 * base.n_states;
    out.n_actions = base.n_actions;
    out.rewards.resize(static_cast<std::size_t>(out.n_states) * out.n_actions);
    out.transitions.resize(static_cast<std::size_t>(out.n_states) * out.n_actions * out.n_states);
    for (int s = 0; s < base.n_states; ++s)
        for (int copy = 0; copy < 2; ++copy) {
            const int s2 = 2 * s + copy;
            for (int a = 0; a < base.n_actions; ++a) {
                out.rewards[static_cast<std::size_t>(s2) * out.n_actions + a] = base.reward(s, a);
                for (int t = 0; t < base.n_states; ++t) {
                    const double half = 0.5 * base.transition(s, a, t);
                    const std::size_t row =
                        (static_cast<std::size_t>(s2) * out.n_actions + a) * out.n_states;
                    out.transitions[row + 2 * t] = half;
                    out.transitions[row + 2 * t + 1] = half;
                }
            }
        }
    if (!base.labels.empty()) {
        out.labels.reserve(out.n_states);
        for (int s = 0; s < base.n_states; ++s) {
            out.labels.push_back(base.labels[s] + "#0");
            out.labels.push_back(base.labels[s] + "#1");
        }
    }
    return out;
}

// ------------------------------------------------- transport polytope oracle

// Spanning trees of the complete bipartite graph K_{nI,nJ}, each as a sorted
// list of edge ids (i*nJ + j). Enumerated once per shape by filtering all
// (nI*nJ choose nI+nJ-1) edge subsets with a union-find acyclicity check.
inline const std::vector<std::vector<int>>& spanning_trees(int nI, int nJ) {
    static std::map<std::pair<int, int>, std::vector<std::vector<int>>> cache;
    auto it = cache.find({nI, nJ});
    if (it != cache.end()) return it->second;

    const int edges = nI * nJ;
    const int need = nI + nJ - 1;
    std::vector<std::vector<int>> trees;
    std::vector<int> pick(edges, 0);
    std::fill(pick.begin(), pick.begin() + need, 1);
    std::sort(pick.begin(), pick.end());  // lowest lexicographic mask first
    do {
        std::vector<int> parent(nI + nJ);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int v) {
            while (parent[v] != v) v = parent[v] = parent[parent[v]];
            return v;
        };
        bool acyclic = true;
        std::vector<int> chosen;
        for (int e = 0; e < edges && acyclic; ++e) {
            if (!pick[e]) continue;
            const int u = e / nJ;
            const int v = nI + e % nJ;
            const int ru = find(u), rv = find(v);
            if (ru == rv)
                acyclic = false;
            else {
                parent[ru] = rv;
                chosen.push_back(e);
            }
        }
        if (acyclic) trees.push_back(std::move(chosen));  // n-1 acyclic edges span
    } while (std::next_permutation(pick.begin(), pick.end()));
    return cache.emplace(std::make_pair(nI, nJ), std::move(trees)).first->second;
}

// Sparse flow vector: (edge id, amount) pairs.
using BasicFlow = std::vector<std::pair<int, double>>;

// All basic feasible flows of the balanced transportation problem with
// supplies `a` and demands `b`: for each spanning tree, the unique flow from
// leaf elimination, kept when every arc carries >= -1e-12.
inline std::vector<BasicFlow> basic_feasible_flows(const std::vector<double>& a,
                                                   const std::vector<double>& b) {
    const int nI = static_cast<int>(a.size());
    const int nJ = static_cast<int>(b.size());
    std::vector<BasicFlow> feasible;
    for (const auto& tree : spanning_trees(nI, nJ)) {
        std::vector<double> residual(nI + nJ);
        for (int i = 0; i < nI; ++i) residual[i] = a[i];
        for (int j = 0; j < nJ; ++j) residual[nI + j] = b[j];
        std::vector<int> degree(nI + nJ, 0);
        std::vector<bool> used(tree.size(), false);
        for (int e : tree) {
            ++degree[e / nJ];
            ++degree[nI + e % nJ];
        }
        BasicFlow flow;
        bool ok = true;
        for (std::size_t step = 0; step < tree.size() && ok; ++step) {
            // peel any leaf; a tree always has one until a single node is left
            int leaf = -1;
            std::size_t edge_pos = 0;
            for (std::size_t k = 0; k < tree.size() && leaf < 0; ++k) {
                if (used[k]) continue;
                const int u = tree[k] / nJ;
                const int v = nI + tree[k] % nJ;
                if (degree[u] == 1) {
                    leaf = u;
                    edge_pos = k;
                } else if (degree[v] == 1) {
                    leaf = v;
                    edge_pos = k;
                }
            }
            if (leaf < 0) break;  // all edges consumed
            const int e = tree[edge_pos];
            const int u = e / nJ;
            const int v = nI + e % nJ;
            const double f = residual[leaf];
            if (f < -1e-12) {
                ok = false;
                break;
            }
            flow.emplace_back(e, f);
            const int other = (leaf == u) ? v : u;
            residual[other] -= f;
            residual[leaf] = 0.0;
            used[edge_pos] = true;
            --degree[u];
            --degree[v];
        }
        if (ok) feasible.push_back(std::move(flow));
    }
    return feasible;
}

inline double evaluate_flow_cost(const BasicFlow& flow, const std::vector<double>& cost) {
    double total = 0.0;
    for (const auto& [e, f] : flow) total += f * cost[e];
    return total;
}

// Exact Kantorovich distance by scanning every basic feasible solution.
// `h` is the full m*m ground cost; p and q are length-m distributions.
inline double kantorovich_bruteforce(const std::vector<double>& h, std::span<const double> p,
                                     std::span<const double> q) {
    const int m = static_cast<int>(p.size());
    std::vector<int> is, js;
    for (int i = 0; i < m; ++i)
        if (p[i] > 0.0) is.push_back(i);
    for (int j = 0; j < m; ++j)
        if (q[j] > 0.0) js.push_back(j);
    std::vector<double> a, b;
    for (int i : is) a.push_back(p[i]);
    for (int j : js) b.push_back(q[j]);
    // balance exactly like a fresh reading of the problem would: absorb the
    // (tiny) defect into the largest supply
    double sa = std::accumulate(a.begin(), a.end(), 0.0);
    double sb = std::accumulate(b.begin(), b.end(), 0.0);
    *std::max_element(a.begin(), a.end()) += sb - sa;

    std::vector<double> cost(is.size() * js.size());
    for (std::size_t i = 0; i < is.size(); ++i)
        for (std::size_t j = 0; j < js.size(); ++j)
            cost[i * js.size() + j] = h[static_cast<std::size_t>(is[i]) * m + js[j]];

    double best = std::numeric_limits<double>::infinity();
    for (const auto& flow : basic_feasible_flows(a, b))
        best = std::min(best, evaluate_flow_cost(flow, cost));
    if (!std::isfinite(best)) throw std::logic_error("no feasible basic flow found");
    return best;
}

// Iterates h <- max_a(|dr| + c * T_K(h)) with the brute-force transport solve
// per cell until the sup-norm change drops below `stop`. Per (pair, action)
// the feasible basic flows depend only on the two rows, so they are computed
// once up front and each iteration only re-prices them.
inline std::vector<double> fixed_point_bruteforce(const statesim::Mdp& mdp, double c,
                                                  double stop = 1e-10) {
    const int n = mdp.n_states;
    const int A = mdp.n_actions;

    struct Cell {
        std::vector<int> is, js;          // original state indices of the supports
        std::vector<BasicFlow> flows;     // over compressed edge ids
    };
    std::vector<Cell> cells(static_cast<std::size_t>(n) * n * A);
    for (int s = 0; s < n; ++s)
        for (int s2 = 0; s2 < s; ++s2)
            for (int a = 0; a < A; ++a) {
                Cell& cell = cells[(static_cast<std::size_t>(s) * n + s2) * A + a];
                auto p = mdp.transition_row(s, a);
                auto q = mdp.transition_row(s2, a);
                std::vector<double> sup, dem;
                for (int t = 0; t < n; ++t) {
                    if (p[t] > 0.0) {
                        cell.is.push_back(t);
                        sup.push_back(p[t]);
                    }
                    if (q[t] > 0.0) {
                        cell.js.push_back(t);
                        dem.push_back(q[t]);
                    }
                }
                double sa = std::accumulate(sup.begin(), sup.end(), 0.0);
                double sb = std::accumulate(dem.begin(), dem.end(), 0.0);
                *std::max_element(sup.begin(), sup.end()) += sb - sa;
                cell.flows = basic_feasible_flows(sup, dem);
            }

    std::vector<double> h(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> next(h.size(), 0.0);
    for (int iter = 0; iter < 200; ++iter) {
        double change = 0.0;
        for (int s = 0; s < n; ++s)
            for (int s2 = 0; s2 < s; ++s2) {
                double best = 0.0;
                for (int a = 0; a < A; ++a) {
                    const Cell& cell = cells[(static_cast<std::size_t>(s) * n + s2) * A + a];
                    const int nJ = static_cast<int>(cell.js.size());
                    double transport = std::numeric_limits<double>::infinity();
                    for (const auto& flow : cell.flows) {
                        double tc = 0.0;
                        for (const auto& [e, f] : flow)
                            tc += f * h[static_cast<std::size_t>(cell.is[e / nJ]) * n +
                                        cell.js[e % nJ]];
                        transport = std::min(transport, tc);
                    }
                    const double dr = std::abs(mdp.reward(s, a) - mdp.reward(s2, a));
                    best = std::max(best, dr + c * transport);
                }
                next[static_cast<std::size_t>(s) * n + s2] = best;
                next[static_cast<std::size_t>(s2) * n + s] = best;
                change = std::max(change, std::abs(best - h[static_cast<std::size_t>(s) * n + s2]));
            }
        h.swap(next);
        if (change <= stop) break;
    }
    return h;
}

// ------------------------------------------------------------ other oracles

inline double hungarian_bruteforce(const std::vector<double>& cost, int n) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (int k = 0; k < n; ++k) total += cost[static_cast<std::size_t>(k) * n + perm[k]];
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// Every partition of {0..n-1} via restricted growth strings.
inline std::vector<statesim::Partition> all_partitions(int n) {
    std::vector<statesim::Partition> out;
    std::vector<int> rgs(n, 0);
    while (true) {
        out.push_back(statesim::partition_from_block_of(rgs));
        int i = n - 1;
        for (; i > 0; --i) {
            const int cap = 1 + *std::max_element(rgs.begin(), rgs.begin() + i);
            if (rgs[i] < cap) break;
        }
        if (i == 0) break;
        ++rgs[i];
        std::fill(rgs.begin() + i + 1, rgs.end(), 0);
    }
    return out;
}

// Stability in the bisimulation sense, checked pairwise with a plain
// tolerance: equal rewards and equal per-block transition mass for every
// action, for every pair inside a block.
inline bool is_stable_partition(const statesim::Mdp& mdp, const statesim::Partition& part,
                                double tol = 1e-9) {
    for (const auto& block : part.blocks)
        for (std::size_t x = 0; x < block.size(); ++x)
            for (std::size_t y = x + 1; y < block.size(); ++y) {
                const int s = block[x], s2 = block[y];
                for (int a = 0; a < mdp.n_actions; ++a) {
                    if (std::abs(mdp.reward(s, a) - mdp.reward(s2, a)) > tol) return false;
                    for (std::size_t b = 0; b < part.blocks.size(); ++b) {
                        double ms = 0.0, ms2 = 0.0;
                        for (int t : part.blocks[b]) {
                            ms += mdp.transition(s, a, t);
                            ms2 += mdp.transition(s2, a, t);
                        }
                        if (std::abs(ms - ms2) > tol) return false;
                    }
                }
            }
    return true;
}

// Coarsest stable partition by lattice scan. Any stable partition refines the
// coarsest one, so the stable partition with the fewest blocks is unique.
inline statesim::Partition coarsest_stable_partition(const statesim::Mdp& mdp) {
    statesim::Partition best = statesim::singleton_partition(mdp.n_states);
    for (const auto& part : all_partitions(mdp.n_states))
        if (part.n_blocks() < best.n_blocks() && is_stable_partition(mdp, part)) best = part;
    return best;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// ------------------------------------------------------------- test plumbing

struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("statesim_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

struct CliResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr combined
};

// Runs the installed CLI binary with `args`, capturing combined output.
inline CliResult run_cli(const std::string& args, const TempDir& dir) {
    static int counter = 0;
    const auto capture = dir.path / ("cli_out_" + std::to_string(counter++) + ".txt");
    const std::string cmd =
        "\"" STATESIM_CLI_PATH "\" " + args + " > \"" + capture.string() + "\" 2>&1";
    const int raw = std::system(cmd.c_str());
    CliResult res;
#ifndef _WIN32
    if (WIFEXITED(raw)) res.exit_code = WEXITSTATUS(raw);
#else
    res.exit_code = raw;
#endif
    if (std::filesystem::exists(capture)) res.output = statesim::read_text_file(capture);
    return res;
}

}  // namespace oracle

#pragma once

// Distances between finite distributions: total variation, exact Kantorovich
// via a transportation network simplex (cold and warm-started from a saved
// basis), and the empirical matching approximation via the Hungarian
// algorithm.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "statesim/rng.hpp"

namespace statesim {

inline constexpr std::uint32_t kBasisHintVersion = 1;

// Opaque warm-start state: the basic arcs of an optimal transportation
// basis, stored as k*m + j over the original support indexing. A hint from
// a different solver version or support size is rejected, never reused.
struct BasisHint {
    std::uint32_t version = 0;
    int support_size = 0;
    std::vector<std::int32_t> arcs;

    bool empty() const { return arcs.empty(); }
};

struct TransportPlan {
    int m = 0;
    std::vector<double> flow;  // m*m, row-major (source, target)
    double cost = 0.0;
    BasisHint basis_hint;
    bool warm_start_used = false;

    double flow_at(int k, int j) const { return flow[static_cast<std::size_t>(k) * m + j]; }
};

inline void check_distribution(std::span<const double> p) {
    if (p.empty()) throw std::invalid_argument("distribution: empty support");
    double sum = 0.0;
    for (double x : p) {
        if (!std::isfinite(x)) throw std::invalid_argument("distribution: non-finite entry");
        if (x < 0.0) throw std::invalid_argument("distribution: negative entry");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("distribution: entries sum to " + std::to_string(sum) +
                                    ", expected 1 within 1e-9");
}

inline double total_variation(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size())
        throw std::invalid_argument("total_variation: support-size mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) acc += std::abs(p[k] - q[k]);
    return 0.5 * acc;
}

namespace detail {

// Supports compressed to strictly positive entries, totals balanced by
// adjusting the largest supply (floating-point slack is at most ~2e-9 for
// valid distributions, far below the 1e-8 plan tolerance).
struct CompressedTransport {
    int m = 0;
    std::vector<int> supply_ids, demand_ids;
    std::vector<double> supply, demand;
};

inline CompressedTransport compress_and_balance(std::span<const double> p,
                                                std::span<const double> q) {
    CompressedTransport ct;
    ct.m = static_cast<int>(p.size());
    for (int k = 0; k < ct.m; ++k) {
        if (p[k] > 0.0) {
            ct.supply_ids.push_back(k);
            ct.supply.push_back(p[k]);
        }
        if (q[k] > 0.0) {
            ct.demand_ids.push_back(k);
            ct.demand.push_back(q[k]);
        }
    }
    const double sa = std::accumulate(ct.supply.begin(), ct.supply.end(), 0.0);
    const double sb = std::accumulate(ct.demand.begin(), ct.demand.end(), 0.0);
    auto it = std::max_element(ct.supply.begin(), ct.supply.end());
    *it += sb - sa;
    return ct;
}

// Primal network simplex on the bipartite transportation graph. Nodes
// 0..nI-1 are supplies, nI..nI+nJ-1 demands; arc a = i*nJ + j. The basis is
// a spanning tree; entering arcs are picked by most negative reduced cost
// (ties and near-stalls fall back to Bland's rule, so the walk terminates),
// and all ties break toward the lowest arc index for determinism.
class TransportSimplex {
public:
    TransportSimplex(const CompressedTransport& ct, const std::vector<double>& full_cost)
        : ct_(ct),
          nI_(static_cast<int>(ct.supply_ids.size())),
          nJ_(static_cast<int>(ct.demand_ids.size())),
          nN_(nI_ + nJ_) {
        cost_.resize(static_cast<std::size_t>(nI_) * nJ_);
        for (int i = 0; i < nI_; ++i)
            for (int j = 0; j < nJ_; ++j)
                cost_[arc(i, j)] =
                    full_cost[static_cast<std::size_t>(ct_.supply_ids[i]) * ct_.m +
                              ct_.demand_ids[j]];
        in_basis_.assign(cost_.size(), 0);
        flow_.assign(cost_.size(), 0.0);
        adj_.assign(nN_, {});
    }

    void init_northwest() {
        std::vector<double> a = ct_.supply, b = ct_.demand;
        int i = 0, j = 0;
        while (true) {
            const double t = std::min(a[i], b[j]);
            add_basic(arc(i, j), t);
            a[i] -= t;
            b[j] -= t;
            if (i == nI_ - 1 && j == nJ_ - 1) break;
            if (i == nI_ - 1) ++j;
            else if (j == nJ_ - 1) ++i;
            else if (a[i] <= b[j]) ++i;
            else ++j;
        }
    }

    // Rebuilds the tree from arcs in original indexing. Returns false when
    // the arcs do not name a spanning tree over the current supports or the
    // implied flows are infeasible; caller then cold-starts.
    bool load_basis(const std::vector<std::int32_t>& arcs_original) {
        if (static_cast<int>(arcs_original.size()) != nN_ - 1) return false;
        std::vector<int> supply_pos(ct_.m, -1), demand_pos(ct_.m, -1);
        for (int i = 0; i < nI_; ++i) supply_pos[ct_.supply_ids[i]] = i;
        for (int j = 0; j < nJ_; ++j) demand_pos[ct_.demand_ids[j]] = j;

        std::vector<int> uf(nN_);
        std::iota(uf.begin(), uf.end(), 0);
        auto find = [&](int x) {
            while (uf[x] != x) x = uf[x] = uf[uf[x]];
            return x;
        };

        std::vector<int> arcs;
        arcs.reserve(nN_ - 1);
        for (std::int32_t orig : arcs_original) {
            if (orig < 0 || orig >= static_cast<std::int32_t>(ct_.m) * ct_.m) return false;
            const int i = supply_pos[orig / ct_.m];
            const int j = demand_pos[orig % ct_.m];
            if (i < 0 || j < 0) return false;
            const int ru = find(i), rv = find(nI_ + j);
            if (ru == rv) return false;  // cycle
            uf[ru] = rv;
            arcs.push_back(arc(i, j));
        }

        for (int a : arcs) add_basic(a, 0.0);
        if (!recompute_tree_flows()) {
            for (int a : arcs) drop_basic(a);
            return false;
        }
        return true;
    }

    void solve() {
        const long dantzig_limit = 50L * nI_ * nJ_ + 200;
        const long pivot_cap = 500L * nI_ * nJ_ + 20000;
        std::vector<double> pot(nN_);
        for (long pivots = 0;; ++pivots) {
            if (pivots > pivot_cap)
                throw std::runtime_error("transport simplex: pivot limit exceeded");
            compute_potentials(pot);

            const bool bland = pivots >= dantzig_limit;
            int enter = -1;
            double best = -kOptTol;
            for (int a = 0; a < static_cast<int>(cost_.size()); ++a) {
                if (in_basis_[a]) continue;
                const double red = cost_[a] - pot[a / nJ_] - pot[nI_ + a % nJ_];
                if (red < best) {
                    best = red;
                    enter = a;
                    if (bland) break;
                }
            }
            if (enter < 0) break;
            pivot(enter);
        }
        recompute_tree_flows();  // clears accumulated pivot drift
    }

    double objective() const {
        double acc = 0.0;
        for (int a = 0; a < static_cast<int>(cost_.size()); ++a)
            if (in_basis_[a]) acc += flow_[a] * cost_[a];
        return acc;
    }

    void export_plan(TransportPlan& plan) const {
        plan.m = ct_.m;
        plan.flow.assign(static_cast<std::size_t>(ct_.m) * ct_.m, 0.0);
        std::vector<std::int32_t> arcs;
        arcs.reserve(nN_ - 1);
        for (int a = 0; a < static_cast<int>(cost_.size()); ++a) {
            if (!in_basis_[a]) continue;
            const int k = ct_.supply_ids[a / nJ_];
            const int j = ct_.demand_ids[a % nJ_];
            plan.flow[static_cast<std::size_t>(k) * ct_.m + j] = flow_[a];
            arcs.push_back(static_cast<std::int32_t>(k) * ct_.m + j);
        }
        std::sort(arcs.begin(), arcs.end());
        plan.cost = objective();
        plan.basis_hint = BasisHint{kBasisHintVersion, ct_.m, std::move(arcs)};
    }

private:
    static constexpr double kOptTol = 1e-11;

    int arc(int i, int j) const { return i * nJ_ + j; }

    void add_basic(int a, double f) {
        in_basis_[a] = 1;
        flow_[a] = f;
        adj_[a / nJ_].push_back(a);
        adj_[nI_ + a % nJ_].push_back(a);
    }

    void drop_basic(int a) {
        in_basis_[a] = 0;
        flow_[a] = 0.0;
        auto& si = adj_[a / nJ_];
        si.erase(std::find(si.begin(), si.end(), a));
        auto& dj = adj_[nI_ + a % nJ_];
        dj.erase(std::find(dj.begin(), dj.end(), a));
    }

    int other_end(int a, int node) const {
        const int s = a / nJ_, d = nI_ + a % nJ_;
        return node == s ? d : s;
    }

    void compute_potentials(std::vector<double>& pot) const {
        pot.assign(nN_, 0.0);
        std::vector<char> seen(nN_, 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int a : adj_[v]) {
                const int w = other_end(a, v);
                if (seen[w]) continue;
                seen[w] = 1;
                pot[w] = cost_[a] - pot[v];  // bipartite: c = pot(supply) + pot(demand)
                stack.push_back(w);
            }
        }
    }

    void pivot(int enter) {
        // Tree path from the entering arc's supply end to its demand end.
        const int src = enter / nJ_, dst = nI_ + enter % nJ_;
        std::vector<int> parent(nN_, -1), parent_arc(nN_, -1);
        std::vector<int> stack{src};
        parent[src] = src;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            if (v == dst) break;
            for (int a : adj_[v]) {
                const int w = other_end(a, v);
                if (parent[w] >= 0) continue;
                parent[w] = v;
                parent_arc[w] = a;
                stack.push_back(w);
            }
        }

        // Walking back from the demand end, cycle arcs alternate -theta,
        // +theta (the entering arc itself gets +theta).
        double theta = std::numeric_limits<double>::infinity();
        int leave = -1;
        {
            int v = dst, sign = -1;
            while (v != src) {
                const int a = parent_arc[v];
                if (sign < 0 && (flow_[a] < theta || (flow_[a] == theta && a < leave))) {
                    theta = flow_[a];
                    leave = a;
                }
                sign = -sign;
                v = parent[v];
            }
        }

        {
            int v = dst, sign = -1;
            while (v != src) {
                const int a = parent_arc[v];
                flow_[a] += sign * theta;
                if (flow_[a] < 0.0) flow_[a] = 0.0;
                sign = -sign;
                v = parent[v];
            }
        }
        add_basic(enter, theta);
        drop_basic(leave);
    }

    // Leaf elimination: flows on a spanning tree are uniquely determined by
    // the marginals. Returns false if any flow comes out below -1e-9.
    bool recompute_tree_flows() {
        std::vector<double> excess(nN_);
        for (int i = 0; i < nI_; ++i) excess[i] = ct_.supply[i];
        for (int j = 0; j < nJ_; ++j) excess[nI_ + j] = -ct_.demand[j];

        std::vector<int> degree(nN_);
        for (int v = 0; v < nN_; ++v) degree[v] = static_cast<int>(adj_[v].size());
        std::vector<char> done_arc(cost_.size(), 0), done_node(nN_, 0);
        std::vector<int> leaves;
        for (int v = 0; v < nN_; ++v)
            if (degree[v] == 1) leaves.push_back(v);

        bool feasible = true;
        while (!leaves.empty()) {
            const int v = leaves.back();
            leaves.pop_back();
            if (done_node[v] || degree[v] == 0) continue;
            done_node[v] = 1;
            int a = -1;
            for (int cand : adj_[v])
                if (!done_arc[cand]) a = cand;
            if (a < 0) continue;
            done_arc[a] = 1;
            double f = v < nI_ ? excess[v] : -excess[v];
            if (f < -1e-9) feasible = false;
            if (f < 0.0) f = 0.0;
            flow_[a] = f;
            const int w = other_end(a, v);
            excess[w] += excess[v];
            excess[v] = 0.0;
            if (--degree[w] == 1 && !done_node[w]) leaves.push_back(w);
            --degree[v];
        }
        return feasible;
    }

    const CompressedTransport& ct_;
    int nI_, nJ_, nN_;
    std::vector<double> cost_;
    std::vector<char> in_basis_;
    std::vector<double> flow_;
    std::vector<std::vector<int>> adj_;
};

inline void check_cost_matrix(const std::vector<double>& cost, int m) {
    if (cost.size() != static_cast<std::size_t>(m) * m)
        throw std::invalid_argument("kantorovich: cost matrix must be m*m");
    for (double x : cost) {
        if (!std::isfinite(x)) throw std::invalid_argument("kantorovich: non-finite cost entry");
        if (x < 0.0) throw std::invalid_argument("kantorovich: negative cost entry");
    }
}

}  // namespace detail

// Minimum-cost coupling of p and q under cost h (m*m row-major). Optimal
// within 1e-8 absolute; the returned basis_hint can warm-start a later solve
// on the same (p, q) pair.
inline TransportPlan kantorovich(const std::vector<double>& h, std::span<const double> p,
                                 std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("kantorovich: support-size mismatch");
    check_distribution(p);
    check_distribution(q);
    detail::check_cost_matrix(h, static_cast<int>(p.size()));

    const auto ct = detail::compress_and_balance(p, q);
    detail::TransportSimplex spx(ct, h);
    spx.init_northwest();
    spx.solve();
    TransportPlan plan;
    spx.export_plan(plan);
    return plan;
}

// Same contract as kantorovich; additionally tries to start from `hint`.
// A stale or corrupted hint falls back to a cold solve, reported through
// warm_start_used = false.
inline TransportPlan kantorovich_warm(const std::vector<double>& h, std::span<const double> p,
                                      std::span<const double> q, const BasisHint& hint) {
    if (p.size() != q.size()) throw std::invalid_argument("kantorovich: support-size mismatch");
    check_distribution(p);
    check_distribution(q);
    detail::check_cost_matrix(h, static_cast<int>(p.size()));

    const auto ct = detail::compress_and_balance(p, q);
    detail::TransportSimplex spx(ct, h);
    bool warm = hint.version == kBasisHintVersion &&
                hint.support_size == static_cast<int>(p.size()) && spx.load_basis(hint.arcs);
    if (!warm) spx.init_northwest();
    spx.solve();
    TransportPlan plan;
    spx.export_plan(plan);
    plan.warm_start_used = warm;
    return plan;
}

struct AssignmentResult {
    std::vector<int> assignment;  // row k matched to column assignment[k]
    double cost = 0.0;
};

// Exact minimum-cost perfect matching on an n*n matrix (shortest augmenting
// paths with potentials, O(n^3)).
inline AssignmentResult hungarian(const std::vector<double>& cost, int n) {
    if (n <= 0) throw std::invalid_argument("hungarian: matrix must be nonempty");
    if (cost.size() != static_cast<std::size_t>(n) * n)
        throw std::invalid_argument("hungarian: cost matrix must be square (n*n entries)");
    for (double x : cost)
        if (!std::isfinite(x)) throw std::invalid_argument("hungarian: non-finite cost entry");

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);  // 1-based; match[j] = row in column j

    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0);
    }

    AssignmentResult res;
    res.assignment.assign(n, -1);
    for (int j = 1; j <= n; ++j) res.assignment[match[j] - 1] = j - 1;
    for (int k = 0; k < n; ++k)
        res.cost += cost[static_cast<std::size_t>(k) * n + res.assignment[k]];
    return res;
}

struct SampleSet {
    std::vector<int> draws;
    std::uint64_t stream_seed = 0;  // seed of the stream that produced the draws
};

inline SampleSet sample_empirical(std::span<const double> p, int count, RngStream& rng) {
    if (count < 1) throw std::invalid_argument("sample_empirical: sample count must be >= 1");
    check_distribution(p);
    SampleSet out;
    out.stream_seed = rng.seed();
    out.draws.reserve(count);
    for (int k = 0; k < count; ++k) out.draws.push_back(rng.sample_index(p));
    return out;
}

inline std::vector<double> empirical_distribution(const SampleSet& s, int support) {
    std::vector<double> freq(support, 0.0);
    for (int d : s.draws) freq[d] += 1.0;
    const double inv = 1.0 / static_cast<double>(s.draws.size());
    for (double& f : freq) f *= inv;
    return freq;
}

// min over permutations of (1/i) sum_k h(X_k, Y_sigma(k)), with h given as an
// m*m matrix over state indices.
inline double empirical_kantorovich(const std::vector<double>& h, int m, const SampleSet& xs,
                                    const SampleSet& ys) {
    const int i = static_cast<int>(xs.draws.size());
    if (i == 0 || ys.draws.size() != xs.draws.size())
        throw std::invalid_argument("empirical_kantorovich: sample sets must have equal length >= 1");
    for (int d : xs.draws)
        if (d < 0 || d >= m) throw std::invalid_argument("empirical_kantorovich: draw outside support");
    for (int d : ys.draws)
        if (d < 0 || d >= m) throw std::invalid_argument("empirical_kantorovich: draw outside support");

    std::vector<double> c(static_cast<std::size_t>(i) * i);
    for (int k = 0; k < i; ++k)
        for (int l = 0; l < i; ++l)
            c[static_cast<std::size_t>(k) * i + l] =
                h[static_cast<std::size_t>(xs.draws[k]) * m + ys.draws[l]];
    return hungarian(c, i).cost / static_cast<double>(i);
}

}  // namespace statesim

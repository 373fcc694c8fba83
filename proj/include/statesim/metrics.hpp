#pragma once

// The five state-similarity metrics: exact Kantorovich fixed point (cold or
// warm-started transport solves), the sampled approximation, and the two
// one-shot total-variation upper bounds.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "statesim/bisim.hpp"
#include "statesim/io_util.hpp"
#include "statesim/mdp.hpp"
#include "statesim/rng.hpp"
#include "statesim/transport.hpp"

namespace statesim {

struct DistanceMatrix {
    int n = 0;
    std::vector<double> d;  // n*n, kept symmetric with zero diagonal
    double c = 0.0;
    std::string method;  // "fix", "fix-reopt", "sample", "tv", "bisim", or "" if unknown
    int iterations = 0;
    double certified_bound = 0.0;

    DistanceMatrix() = default;
    explicit DistanceMatrix(int states) : n(states), d(static_cast<std::size_t>(states) * states, 0.0) {}

    double at(int i, int j) const { return d[static_cast<std::size_t>(i) * n + j]; }
    void set(int i, int j, double v) {
        d[static_cast<std::size_t>(i) * n + j] = v;
        d[static_cast<std::size_t>(j) * n + i] = v;
    }
    double max_entry() const {
        double m = 0.0;
        for (double x : d)
            if (x > m) m = x;
        return m;
    }
};

enum class TransportBackend { cold, warm };

struct MetricRunConfig {
    double c = 0.9;
    double tol = 1e-4;
    TransportBackend backend = TransportBackend::cold;
    int samples_per_state_action = 10;
    int n_runs = 30;
    std::uint64_t seed = 0;
};

inline void validate_metric_config(const MetricRunConfig& cfg) {
    if (!(cfg.c > 0.0 && cfg.c < 1.0))
        throw std::invalid_argument("metric config: c must lie in (0, 1)");
    if (!(cfg.tol > 0.0)) throw std::invalid_argument("metric config: tol must be positive");
    if (cfg.samples_per_state_action < 1)
        throw std::invalid_argument("metric config: samples_per_state_action must be >= 1");
    if (cfg.n_runs < 1) throw std::invalid_argument("metric config: n_runs must be >= 1");
}

// Optional wall-clock cutoff for the iterative methods.
using Deadline = std::optional<std::chrono::steady_clock::time_point>;

struct BudgetExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
inline void check_deadline(const Deadline& deadline) {
    if (deadline && std::chrono::steady_clock::now() > *deadline)
        throw BudgetExceeded("time budget exceeded during metric iteration");
}
}  // namespace detail

// Dense per-(pair, action) basis store for warm-started transport solves.
// Rebuilt lazily; trades |S|^2*|A| hint slots for pivot savings.
struct MetricHintTable {
    int n_states = 0;
    int n_actions = 0;
    std::vector<BasisHint> hints;

    MetricHintTable() = default;
    MetricHintTable(int states, int actions)
        : n_states(states),
          n_actions(actions),
          hints(static_cast<std::size_t>(states) * states * actions) {}

    // s < s2 assumed; one slot per unordered pair and action.
    BasisHint& cell(int s, int s2, int a) {
        return hints[(static_cast<std::size_t>(s) * n_states + s2) * n_actions + a];
    }
};

// Smallest n with c^n * R/(1-c) <= tol, and the bound that n certifies.
struct IterationPlan {
    int iterations = 0;
    double bound = 0.0;
};

inline IterationPlan plan_iterations(double reward_gap, double c, double tol) {
    IterationPlan plan;
    plan.bound = reward_gap / (1.0 - c);
    while (plan.bound > tol) {
        plan.bound *= c;
        ++plan.iterations;
    }
    return plan;
}

namespace detail {

// Transition-row support summaries; point-mass rows get their transport cell
// read directly off h (the unique coupling), skipping the solver.
struct RowSupport {
    bool point_mass = false;
    int target = -1;
};

inline std::vector<RowSupport> summarize_rows(const Mdp& mdp) {
    std::vector<RowSupport> info(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            auto row = mdp.transition_row(s, a);
            int support = 0, target = -1;
            for (int t = 0; t < mdp.n_states; ++t) {
                if (row[t] > 0.0) {
                    ++support;
                    target = t;
                }
            }
            auto& ri = info[static_cast<std::size_t>(s) * mdp.n_actions + a];
            ri.point_mass = support == 1;
            ri.target = target;
        }
    }
    return info;
}

inline DistanceMatrix apply_bellman(const DistanceMatrix& h, const Mdp& mdp, double c,
                                    TransportBackend backend, MetricHintTable* hints,
                                    const std::vector<RowSupport>& rows) {
    const int n = mdp.n_states;
    DistanceMatrix out(n);
    out.c = c;
    for (int s = 0; s < n; ++s) {
        for (int s2 = s + 1; s2 < n; ++s2) {
            double best = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                const auto& ra = rows[static_cast<std::size_t>(s) * mdp.n_actions + a];
                const auto& rb = rows[static_cast<std::size_t>(s2) * mdp.n_actions + a];
                double tk;
                if (ra.point_mass && rb.point_mass) {
                    tk = h.at(ra.target, rb.target);
                } else if (backend == TransportBackend::warm && hints != nullptr) {
                    BasisHint& slot = hints->cell(s, s2, a);
                    TransportPlan plan =
                        slot.empty()
                            ? kantorovich(h.d, mdp.transition_row(s, a), mdp.transition_row(s2, a))
                            : kantorovich_warm(h.d, mdp.transition_row(s, a),
                                               mdp.transition_row(s2, a), slot);
                    slot = std::move(plan.basis_hint);
                    tk = plan.cost;
                } else {
                    tk = kantorovich(h.d, mdp.transition_row(s, a), mdp.transition_row(s2, a)).cost;
                }
                const double v = std::abs(mdp.reward(s, a) - mdp.reward(s2, a)) + c * tk;
                if (v > best) best = v;
            }
            out.set(s, s2, best);
        }
    }
    return out;
}

}  // namespace detail

// One application of the metric Bellman operator
//   F(h)(s,s') = max_a ( |r(s,a) - r(s',a)| + c * K_h(P(s,a), P(s',a)) ).
// With the warm backend and a hint table, each (s,s',a) transport cell
// restarts from its previous basis.
inline DistanceMatrix apply_F(const DistanceMatrix& h, const Mdp& mdp, double c,
                              TransportBackend backend = TransportBackend::cold,
                              MetricHintTable* hints = nullptr) {
    validate_mdp(mdp);
    if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("apply_F: c must lie in (0, 1)");
    if (h.n != mdp.n_states)
        throw std::invalid_argument("apply_F: distance matrix size does not match mdp");
    const double cap = reward_span(mdp) / (1.0 - c) + 1e-9;
    for (double x : h.d) {
        if (!(x >= 0.0) || x > cap)
            throw std::invalid_argument("apply_F: h out of V (entries must lie in [0, R/(1-c)])");
    }
    auto rows = detail::summarize_rows(mdp);
    DistanceMatrix out = detail::apply_bellman(h, mdp, c, backend, hints, rows);
    out.method = backend == TransportBackend::warm ? "fix-reopt" : "fix";
    return out;
}

// Iterates F from h0 = 0 until the a-priori bound c^n/(1-c)*R certifies that
// the iterate is within cfg.tol of the unique fixed point. Method "fix"
// (cold transport solves) or "fix-reopt" (per-cell warm starts).
inline DistanceMatrix fixed_point_metric(const Mdp& mdp, const MetricRunConfig& cfg,
                                         const Deadline& deadline = {}) {
    validate_mdp(mdp);
    validate_metric_config(cfg);

    const IterationPlan plan = plan_iterations(reward_span(mdp), cfg.c, cfg.tol);
    const bool warm = cfg.backend == TransportBackend::warm;

    DistanceMatrix h(mdp.n_states);
    h.c = cfg.c;
    auto rows = detail::summarize_rows(mdp);
    MetricHintTable hints;
    if (warm) hints = MetricHintTable(mdp.n_states, mdp.n_actions);

    for (int it = 0; it < plan.iterations; ++it) {
        detail::check_deadline(deadline);
        h = detail::apply_bellman(h, mdp, cfg.c, cfg.backend, warm ? &hints : nullptr, rows);
    }
    h.method = warm ? "fix-reopt" : "fix";
    h.iterations = plan.iterations;
    h.certified_bound = plan.bound;
    return h;
}

// Sampled approximation: per run, one SampleSet of size i per (state, action)
// held fixed through the whole fixed-point iteration; empirical transport
// cells solved by assignment; result is the entrywise mean over runs.
// Deterministic given cfg.seed. When per_run is non-null, each run's final
// matrix is appended to it.
inline DistanceMatrix sampled_metric_with_runs(const Mdp& mdp, const MetricRunConfig& cfg,
                                               std::vector<DistanceMatrix>* per_run,
                                               const Deadline& deadline = {}) {
    validate_mdp(mdp);
    validate_metric_config(cfg);

    const int n = mdp.n_states;
    const int count = cfg.samples_per_state_action;
    const IterationPlan plan = plan_iterations(reward_span(mdp), cfg.c, cfg.tol);

    DistanceMatrix mean(n);
    mean.c = cfg.c;

    for (int run = 0; run < cfg.n_runs; ++run) {
        detail::check_deadline(deadline);

        std::vector<SampleSet> samples(static_cast<std::size_t>(n) * mdp.n_actions);
        std::vector<char> constant(samples.size(), 0);
        for (int s = 0; s < n; ++s) {
            for (int a = 0; a < mdp.n_actions; ++a) {
                RngStream stream(derive_stream_seed(
                    cfg.seed, {static_cast<std::uint64_t>(run), static_cast<std::uint64_t>(s),
                               static_cast<std::uint64_t>(a)}));
                auto& set = samples[static_cast<std::size_t>(s) * mdp.n_actions + a];
                set = sample_empirical(mdp.transition_row(s, a), count, stream);
                bool all_same = true;
                for (int d : set.draws) all_same = all_same && d == set.draws[0];
                constant[static_cast<std::size_t>(s) * mdp.n_actions + a] = all_same;
            }
        }

        DistanceMatrix h(n);
        h.c = cfg.c;
        for (int it = 0; it < plan.iterations; ++it) {
            detail::check_deadline(deadline);
            DistanceMatrix next(n);
            next.c = cfg.c;
            for (int s = 0; s < n; ++s) {
                for (int s2 = s + 1; s2 < n; ++s2) {
                    double best = 0.0;
                    for (int a = 0; a < mdp.n_actions; ++a) {
                        const auto& xs = samples[static_cast<std::size_t>(s) * mdp.n_actions + a];
                        const auto& ys = samples[static_cast<std::size_t>(s2) * mdp.n_actions + a];
                        double tk;
                        if (constant[static_cast<std::size_t>(s) * mdp.n_actions + a] &&
                            constant[static_cast<std::size_t>(s2) * mdp.n_actions + a]) {
                            tk = h.at(xs.draws[0], ys.draws[0]);  // all matchings cost the same
                        } else {
                            tk = empirical_kantorovich(h.d, n, xs, ys);
                        }
                        const double v =
                            std::abs(mdp.reward(s, a) - mdp.reward(s2, a)) + cfg.c * tk;
                        if (v > best) best = v;
                    }
                    next.set(s, s2, best);
                }
            }
            h = std::move(next);
        }

        h.method = "sample";
        h.iterations = plan.iterations;
        h.certified_bound = plan.bound;
        for (std::size_t k = 0; k < mean.d.size(); ++k) mean.d[k] += h.d[k];
        if (per_run) per_run->push_back(h);
    }

    const double inv = 1.0 / static_cast<double>(cfg.n_runs);
    for (double& x : mean.d) x *= inv;
    mean.method = "sample";
    mean.iterations = plan.iterations;
    mean.certified_bound = plan.bound;  // per-run truncation bound, not a bound on the mean
    return mean;
}

inline DistanceMatrix sampled_metric(const Mdp& mdp, const MetricRunConfig& cfg,
                                     const Deadline& deadline = {}) {
    return sampled_metric_with_runs(mdp, cfg, nullptr, deadline);
}

// One-shot total-variation bound:
//   d(s,s') = max_a ( |r(s,a) - r(s',a)| + c*R/(1-c) * TV(P(s,a), P(s',a)) ).
inline DistanceMatrix tv_metric(const Mdp& mdp, double c) {
    validate_mdp(mdp);
    if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("tv_metric: c must lie in (0, 1)");
    const double R = reward_span(mdp);
    const double scale = R == 0.0 ? 0.0 : c * R / (1.0 - c);

    DistanceMatrix out(mdp.n_states);
    out.c = c;
    out.method = "tv";
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int s2 = s + 1; s2 < mdp.n_states; ++s2) {
            double best = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                const double v = std::abs(mdp.reward(s, a) - mdp.reward(s2, a)) +
                                 scale * total_variation(mdp.transition_row(s, a),
                                                         mdp.transition_row(s2, a));
                if (v > best) best = v;
            }
            out.set(s, s2, best);
        }
    }
    return out;
}

// Like tv_metric, but total variation is measured over bisimulation classes,
// giving a bound between the fixed-point metric and the plain TV bound.
inline DistanceMatrix bisim_tv_metric(const Mdp& mdp, double c) {
    validate_mdp(mdp);
    if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("bisim_tv_metric: c must lie in (0, 1)");
    const double R = reward_span(mdp);
    const double scale = R == 0.0 ? 0.0 : c * R / (1.0 - c);
    const Partition part = bisimulation_partition(mdp);

    // Per-(state, action) block-mass vectors, so each pair costs O(blocks).
    const int nb = part.n_blocks();
    std::vector<double> mass(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions * nb, 0.0);
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            auto row = mdp.transition_row(s, a);
            double* cell = &mass[(static_cast<std::size_t>(s) * mdp.n_actions + a) * nb];
            for (int t = 0; t < mdp.n_states; ++t) cell[part.block_of[t]] += row[t];
        }
    }

    DistanceMatrix out(mdp.n_states);
    out.c = c;
    out.method = "bisim";
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int s2 = s + 1; s2 < mdp.n_states; ++s2) {
            double best = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                const double* ma = &mass[(static_cast<std::size_t>(s) * mdp.n_actions + a) * nb];
                const double* mb = &mass[(static_cast<std::size_t>(s2) * mdp.n_actions + a) * nb];
                double tv = 0.0;
                for (int b = 0; b < nb; ++b) tv += std::abs(ma[b] - mb[b]);
                tv *= 0.5;
                const double v = std::abs(mdp.reward(s, a) - mdp.reward(s2, a)) + scale * tv;
                if (v > best) best = v;
            }
            out.set(s, s2, best);
        }
    }
    return out;
}

// CSV serialization: header "state_i,state_j,distance" and one row per
// lower-triangle entry (i >= j, diagonal included), reals at 17 significant
// digits. A sidecar JSON carries the run metadata.
inline std::string distance_matrix_to_csv(const DistanceMatrix& dm) {
    std::string out = "state_i,state_j,distance\n";
    for (int i = 0; i < dm.n; ++i)
        for (int j = 0; j <= i; ++j)
            out += std::to_string(i) + "," + std::to_string(j) + "," + format_real(dm.at(i, j)) + "\n";
    return out;
}

inline void write_distance_csv(const std::filesystem::path& path, const DistanceMatrix& dm) {
    write_text_file(path, distance_matrix_to_csv(dm));
}

inline std::string distance_meta_to_json(const DistanceMatrix& dm, double tol, std::uint64_t seed) {
    std::string out = "{\n";
    out += "  \"method\": \"" + dm.method + "\",\n";
    out += "  \"c\": " + format_real(dm.c) + ",\n";
    out += "  \"tol\": " + format_real(tol) + ",\n";
    out += "  \"iterations\": " + std::to_string(dm.iterations) + ",\n";
    out += "  \"certified_bound\": " + format_real(dm.certified_bound) + ",\n";
    out += "  \"seed\": " + std::to_string(seed) + "\n";
    out += "}\n";
    return out;
}

inline void write_distance_meta(const std::filesystem::path& path, const DistanceMatrix& dm,
                                double tol, std::uint64_t seed) {
    write_text_file(path, distance_meta_to_json(dm, tol, seed));
}

inline DistanceMatrix distance_matrix_from_csv(const std::string& text) {
    std::size_t pos = text.find('\n');
    if (pos == std::string::npos || text.substr(0, pos) != "state_i,state_j,distance")
        throw IoError("distance csv: expected header \"state_i,state_j,distance\"");

    struct Entry {
        int i, j;
        double v;
    };
    std::vector<Entry> entries;
    int max_index = -1;
    std::size_t line_no = 1;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos + 1);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos + 1, end - pos - 1);
        pos = end;
        ++line_no;
        if (line.empty()) continue;
        const char* s = line.c_str();
        char* rest = nullptr;
        long i = std::strtol(s, &rest, 10);
        if (rest == s || *rest != ',')
            throw IoError("distance csv: malformed line " + std::to_string(line_no));
        const char* s2 = rest + 1;
        long j = std::strtol(s2, &rest, 10);
        if (rest == s2 || *rest != ',')
            throw IoError("distance csv: malformed line " + std::to_string(line_no));
        const char* s3 = rest + 1;
        double v = std::strtod(s3, &rest);
        if (rest == s3) throw IoError("distance csv: malformed line " + std::to_string(line_no));
        if (i < 0 || j < 0 || j > i)
            throw IoError("distance csv: line " + std::to_string(line_no) +
                          " must satisfy state_i >= state_j >= 0");
        if (!std::isfinite(v) || v < 0.0)
            throw IoError("distance csv: distance must be finite and nonnegative (line " +
                          std::to_string(line_no) + ")");
        if (i == j && v != 0.0)
            throw IoError("distance csv: diagonal entries must be zero (line " +
                          std::to_string(line_no) + ")");
        entries.push_back({static_cast<int>(i), static_cast<int>(j), v});
        if (i > max_index) max_index = static_cast<int>(i);
    }
    if (max_index < 0) throw IoError("distance csv: no data rows");

    const int n = max_index + 1;
    DistanceMatrix dm(n);
    std::vector<char> have(static_cast<std::size_t>(n) * n, 0);
    for (const auto& e : entries) {
        dm.set(e.i, e.j, e.v);
        have[static_cast<std::size_t>(e.i) * n + e.j] = 1;
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j)
            if (!have[static_cast<std::size_t>(i) * n + j])
                throw IoError("distance csv: missing entry for pair (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
    return dm;  // method/c unknown from CSV alone; sidecar carries them
}

inline DistanceMatrix read_distance_csv(const std::filesystem::path& path) {
    return distance_matrix_from_csv(read_text_file(path));
}

}  // namespace statesim

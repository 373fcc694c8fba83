#pragma once

// Experiment runner: sweep methods x c values on one MDP, time each metric
// under a budget, run both aggregation sweeps with value-error evaluation,
// and serialize a report plus plot-ready CSV data.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "statesim/aggregate.hpp"
#include "statesim/generators.hpp"
#include "statesim/io_util.hpp"
#include "statesim/mdp.hpp"
#include "statesim/mdp_io.hpp"
#include "statesim/metrics.hpp"

namespace statesim {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    // Exactly one of builtin / mdp_path names the input MDP.
    std::string builtin;  // "gridworld" or "coffee"
    int builtin_n = 3;    // gridworld size
    std::string mdp_path;

    std::vector<std::string> methods;
    std::vector<double> c_values;
    double tol = 1e-4;
    int samples = 10;
    int runs = 30;
    std::uint64_t seed = 0;

    std::vector<int> k_values;
    std::vector<double> epsilon_values;
    double gamma = 0.9;
    double vi_tol = 1e-6;
    double time_budget_seconds = 600.0;
};

inline bool is_known_method(const std::string& m) {
    return m == "fix" || m == "fix-reopt" || m == "sample" || m == "tv" || m == "bisim";
}

inline void validate_experiment_config(const ExperimentConfig& cfg) {
    const bool has_builtin = !cfg.builtin.empty();
    const bool has_path = !cfg.mdp_path.empty();
    if (has_builtin == has_path)
        throw ConfigError("config: exactly one of mdp.builtin and mdp.path must be given");
    if (has_builtin && cfg.builtin != "gridworld" && cfg.builtin != "coffee")
        throw ConfigError("config: unknown builtin mdp \"" + cfg.builtin + "\"");
    if (cfg.builtin == "gridworld" && (cfg.builtin_n < 1 || cfg.builtin_n % 2 == 0))
        throw ConfigError("config: gridworld n must be a positive odd integer");
    if (cfg.methods.empty()) throw ConfigError("config: methods list must be nonempty");
    for (const auto& m : cfg.methods)
        if (!is_known_method(m)) throw ConfigError("config: unknown method \"" + m + "\"");
    if (cfg.c_values.empty()) throw ConfigError("config: c_values list must be nonempty");
    for (double c : cfg.c_values)
        if (!(c > 0.0 && c < 1.0)) throw ConfigError("config: c values must lie in (0, 1)");
    if (!(cfg.tol > 0.0)) throw ConfigError("config: tol must be positive");
    if (cfg.samples < 1) throw ConfigError("config: samples must be >= 1");
    if (cfg.runs < 1) throw ConfigError("config: runs must be >= 1");
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw ConfigError("config: gamma must lie in (0, 1)");
    if (!(cfg.vi_tol > 0.0)) throw ConfigError("config: vi_tol must be positive");
    if (!(cfg.time_budget_seconds >= 0.0) || !std::isfinite(cfg.time_budget_seconds))
        throw ConfigError("config: time_budget_seconds must be finite and >= 0");
    for (double e : cfg.epsilon_values)
        if (!(e >= 0.0)) throw ConfigError("config: epsilon values must be >= 0");
    for (int k : cfg.k_values)
        if (k < 1) throw ConfigError("config: k values must be >= 1");
}

inline ExperimentConfig experiment_config_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");

    for (auto it = j.begin(); it != j.end(); ++it) {
        static const char* known[] = {"mdp",      "methods", "c_values", "tol",
                                      "samples",  "runs",    "seed",     "k_values",
                                      "epsilon_values", "gamma", "vi_tol", "time_budget_seconds"};
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw ConfigError("config: unknown key \"" + it.key() + "\"");
    }

    ExperimentConfig cfg;
    try {
        if (!j.contains("mdp") || !j["mdp"].is_object())
            throw ConfigError("config: missing \"mdp\" object");
        const auto& m = j["mdp"];
        if (m.contains("builtin")) cfg.builtin = m["builtin"].get<std::string>();
        if (m.contains("n")) cfg.builtin_n = m["n"].get<int>();
        if (m.contains("path")) cfg.mdp_path = m["path"].get<std::string>();

        if (!j.contains("methods")) throw ConfigError("config: missing \"methods\"");
        cfg.methods = j["methods"].get<std::vector<std::string>>();
        if (!j.contains("c_values")) throw ConfigError("config: missing \"c_values\"");
        cfg.c_values = j["c_values"].get<std::vector<double>>();

        cfg.tol = j.value("tol", cfg.tol);
        cfg.samples = j.value("samples", cfg.samples);
        cfg.runs = j.value("runs", cfg.runs);
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("k_values")) cfg.k_values = j["k_values"].get<std::vector<int>>();
        if (j.contains("epsilon_values"))
            cfg.epsilon_values = j["epsilon_values"].get<std::vector<double>>();
        cfg.gamma = j.value("gamma", cfg.gamma);
        cfg.vi_tol = j.value("vi_tol", cfg.vi_tol);
        cfg.time_budget_seconds = j.value("time_budget_seconds", cfg.time_budget_seconds);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    validate_experiment_config(cfg);
    return cfg;
}

inline Mdp load_experiment_mdp(const ExperimentConfig& cfg, std::string* source_name) {
    if (!cfg.builtin.empty()) {
        if (cfg.builtin == "gridworld") {
            if (source_name) *source_name = "gridworld(n=" + std::to_string(cfg.builtin_n) + ")";
            return make_gridworld(cfg.builtin_n);
        }
        if (source_name) *source_name = "coffee";
        return make_coffee_robot();
    }
    if (source_name) *source_name = cfg.mdp_path;
    return load_mdp(cfg.mdp_path);
}

struct KSweepPoint {
    int k = 0;
    int n_blocks = 0;
    double linf = 0.0;
};

struct EpsilonSweepPoint {
    double epsilon = 0.0;
    int n_blocks = 0;
    double linf = 0.0;
};

struct MetricCell {
    std::string method;
    double c = 0.0;
    bool ok = false;
    std::string failure_reason;
    double seconds = 0.0;
    int iterations = 0;
    double certified_bound = 0.0;
    std::vector<KSweepPoint> k_sweep;
    std::vector<EpsilonSweepPoint> epsilon_sweep;
};

struct ExperimentReport {
    std::string mdp_source;
    int n_states = 0;
    int n_actions = 0;
    ExperimentConfig config;
    std::vector<MetricCell> cells;
    // Parallel to cells; a failed cell keeps an empty matrix. Not serialized.
    std::vector<DistanceMatrix> matrices;
    std::vector<std::pair<std::string, bool>> ordering_checks;
};

namespace detail {

inline DistanceMatrix compute_method(const Mdp& mdp, const std::string& method, double c,
                                     const ExperimentConfig& cfg, const Deadline& deadline) {
    MetricRunConfig mc;
    mc.c = c;
    mc.tol = cfg.tol;
    mc.samples_per_state_action = cfg.samples;
    mc.n_runs = cfg.runs;
    mc.seed = cfg.seed;
    if (method == "fix") {
        mc.backend = TransportBackend::cold;
        return fixed_point_metric(mdp, mc, deadline);
    }
    if (method == "fix-reopt") {
        mc.backend = TransportBackend::warm;
        return fixed_point_metric(mdp, mc, deadline);
    }
    if (method == "sample") return sampled_metric(mdp, mc, deadline);
    if (method == "tv") return tv_metric(mdp, c);
    if (method == "bisim") return bisim_tv_metric(mdp, c);
    throw ConfigError("unknown method \"" + method + "\"");
}

inline std::string format_c_short(double c) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", c);
    return std::string(buf);
}

}  // namespace detail

// Runs every (method, c) cell under the per-metric time budget, then both
// aggregation sweeps on each successful matrix. Deterministic given the root
// seed, except the wall-clock seconds fields.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    validate_experiment_config(cfg);

    ExperimentReport report;
    report.config = cfg;
    const Mdp mdp = load_experiment_mdp(cfg, &report.mdp_source);
    validate_mdp(mdp);
    report.n_states = mdp.n_states;
    report.n_actions = mdp.n_actions;

    for (int k : cfg.k_values)
        if (k > mdp.n_states)
            throw ConfigError("config: k value " + std::to_string(k) + " exceeds n_states = " +
                              std::to_string(mdp.n_states));

    const ValueFunction original = value_iteration(mdp, cfg.gamma, cfg.vi_tol);

    for (const auto& method : cfg.methods) {
        for (double c : cfg.c_values) {
            MetricCell cell;
            cell.method = method;
            cell.c = c;
            DistanceMatrix dm;

            const auto start = std::chrono::steady_clock::now();
            const auto deadline =
                start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(cfg.time_budget_seconds));
            if (cfg.time_budget_seconds <= 0.0) {
                cell.failure_reason = "time budget exhausted before start";
            } else {
                try {
                    dm = detail::compute_method(mdp, method, c, cfg, Deadline(deadline));
                    cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                                 start)
                                       .count();
                    if (cell.seconds > cfg.time_budget_seconds) {
                        cell.failure_reason = "time budget exceeded (" +
                                              detail::format_c_short(cell.seconds) + " s)";
                        dm = DistanceMatrix();
                    } else {
                        cell.ok = true;
                        cell.iterations = dm.iterations;
                        cell.certified_bound = dm.certified_bound;
                    }
                } catch (const BudgetExceeded& e) {
                    cell.failure_reason = e.what();
                    dm = DistanceMatrix();
                } catch (const std::exception& e) {
                    cell.failure_reason = std::string("metric computation failed: ") + e.what();
                    dm = DistanceMatrix();
                }
            }

            if (cell.ok) {
                for (int k : cfg.k_values) {
                    const AggregationResult agg = aggregate_to_k(dm, k);
                    cell.k_sweep.push_back(
                        {k, agg.partition.n_blocks(),
                         linf_error(mdp, original, agg.partition, cfg.vi_tol)});
                }
                for (double eps : cfg.epsilon_values) {
                    const AggregationResult agg = aggregate_epsilon(dm, eps);
                    cell.epsilon_sweep.push_back(
                        {eps, agg.partition.n_blocks(),
                         linf_error(mdp, original, agg.partition, cfg.vi_tol)});
                }
            }
            report.cells.push_back(std::move(cell));
            report.matrices.push_back(std::move(dm));
        }
    }

    // Entrywise ordering flags between the exact fixed point and the two TV
    // bounds, for every c where both sides completed.
    auto find_matrix = [&](const std::string& method, double c) -> const DistanceMatrix* {
        for (std::size_t i = 0; i < report.cells.size(); ++i)
            if (report.cells[i].ok && report.cells[i].method == method && report.cells[i].c == c)
                return &report.matrices[i];
        return nullptr;
    };
    auto entrywise_le = [](const DistanceMatrix& a, const DistanceMatrix& b, double slack) {
        for (std::size_t i = 0; i < a.d.size(); ++i)
            if (a.d[i] > b.d[i] + slack) return false;
        return true;
    };
    for (double c : cfg.c_values) {
        const DistanceMatrix* tv = find_matrix("tv", c);
        const DistanceMatrix* bis = find_matrix("bisim", c);
        for (const char* fixm : {"fix", "fix-reopt"}) {
            const DistanceMatrix* fix = find_matrix(fixm, c);
            if (!fix) continue;
            const std::string suffix = std::string("@c=") + detail::format_c_short(c);
            if (bis)
                report.ordering_checks.emplace_back(std::string(fixm) + "<=bisim" + suffix,
                                                    entrywise_le(*fix, *bis, 1e-8));
            if (tv)
                report.ordering_checks.emplace_back(std::string(fixm) + "<=tv" + suffix,
                                                    entrywise_le(*fix, *tv, 2e-8));
        }
        if (bis && tv)
            report.ordering_checks.emplace_back("bisim<=tv@c=" + detail::format_c_short(c),
                                                entrywise_le(*bis, *tv, 1e-8));
    }
    return report;
}

inline std::string experiment_report_to_json(const ExperimentReport& report) {
    std::string out = "{\n";
    out += "  \"schema\": \"experiment-report-v1\",\n";
    out += "  \"mdp\": {\"source\": " + nlohmann::json(report.mdp_source).dump() +
           ", \"n_states\": " + std::to_string(report.n_states) +
           ", \"n_actions\": " + std::to_string(report.n_actions) + "},\n";
    out += "  \"gamma\": " + format_real(report.config.gamma) + ",\n";
    out += "  \"vi_tol\": " + format_real(report.config.vi_tol) + ",\n";
    out += "  \"metric_tol\": " + format_real(report.config.tol) + ",\n";
    out += "  \"samples\": " + std::to_string(report.config.samples) + ",\n";
    out += "  \"runs\": " + std::to_string(report.config.runs) + ",\n";
    out += "  \"seed\": " + std::to_string(report.config.seed) + ",\n";
    out += "  \"time_budget_seconds\": " + format_real(report.config.time_budget_seconds) + ",\n";
    out += "  \"cells\": [";
    for (std::size_t i = 0; i < report.cells.size(); ++i) {
        const auto& cell = report.cells[i];
        if (i) out += ",";
        out += "\n    {\"method\": \"" + cell.method + "\", \"c\": " + format_real(cell.c);
        if (cell.ok) {
            out += ", \"status\": \"ok\"";
            out += ", \"seconds\": " + format_real(cell.seconds);
            out += ", \"iterations\": " + std::to_string(cell.iterations);
            out += ", \"certified_bound\": " + format_real(cell.certified_bound);
            out += ", \"k_sweep\": [";
            for (std::size_t p = 0; p < cell.k_sweep.size(); ++p) {
                const auto& pt = cell.k_sweep[p];
                if (p) out += ", ";
                out += "{\"k\": " + std::to_string(pt.k) +
                       ", \"n_blocks\": " + std::to_string(pt.n_blocks) +
                       ", \"linf\": " + format_real(pt.linf) + "}";
            }
            out += "], \"epsilon_sweep\": [";
            for (std::size_t p = 0; p < cell.epsilon_sweep.size(); ++p) {
                const auto& pt = cell.epsilon_sweep[p];
                if (p) out += ", ";
                out += "{\"epsilon\": " + format_real(pt.epsilon) +
                       ", \"n_blocks\": " + std::to_string(pt.n_blocks) +
                       ", \"linf\": " + format_real(pt.linf) + "}";
            }
            out += "]}";
        } else {
            out += ", \"status\": \"failed\", \"reason\": " +
                   nlohmann::json(cell.failure_reason).dump() + "}";
        }
    }
    out += report.cells.empty() ? "],\n" : "\n  ],\n";
    out += "  \"ordering_checks\": {";
    for (std::size_t i = 0; i < report.ordering_checks.size(); ++i) {
        if (i) out += ", ";
        out += nlohmann::json(report.ordering_checks[i].first).dump();
        out += report.ordering_checks[i].second ? ": true" : ": false";
    }
    out += "}\n";
    out += "}\n";
    return out;
}

// Writes k_sweep.csv and epsilon_sweep.csv under outdir (created if absent),
// one row per successful (method, c, parameter) combination.
inline std::vector<std::filesystem::path> emit_plot_data(const ExperimentReport& report,
                                                         const std::filesystem::path& outdir) {
    std::error_code ec;
    std::filesystem::create_directories(outdir, ec);
    if (ec && !std::filesystem::is_directory(outdir))
        throw IoError("cannot create output directory: " + outdir.string());

    std::string ks = "method,c,k,linf\n";
    std::string es = "method,c,epsilon,linf,n_blocks\n";
    for (const auto& cell : report.cells) {
        if (!cell.ok) continue;
        for (const auto& pt : cell.k_sweep)
            ks += cell.method + "," + format_real(cell.c) + "," + std::to_string(pt.k) + "," +
                  format_real(pt.linf) + "\n";
        for (const auto& pt : cell.epsilon_sweep)
            es += cell.method + "," + format_real(cell.c) + "," + format_real(pt.epsilon) + "," +
                  format_real(pt.linf) + "," + std::to_string(pt.n_blocks) + "\n";
    }
    const auto k_path = outdir / "k_sweep.csv";
    const auto e_path = outdir / "epsilon_sweep.csv";
    write_text_file(k_path, ks);
    write_text_file(e_path, es);
    return {k_path, e_path};
}

}  // namespace statesim

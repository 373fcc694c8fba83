// statesim command-line tool: generate benchmark MDPs, compute similarity
// metrics, aggregate states, evaluate value error, and run full experiments.
//
// Exit codes: 0 success, 1 configuration/input error, 2 computation failure.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "statesim/statesim.hpp"

namespace ss = statesim;

namespace {

int run_gen(const std::string& family, int n, bool n_given, const std::string& out) {
    ss::Mdp mdp;
    if (family == "gridworld") {
        mdp = ss::make_gridworld(n);
    } else {
        if (n_given) std::fprintf(stderr, "note: --n is ignored for the coffee domain\n");
        mdp = ss::make_coffee_robot();
    }
    ss::save_mdp(mdp, out);
    std::printf("wrote %s (%d states, %d actions)\n", out.c_str(), mdp.n_states, mdp.n_actions);
    return 0;
}

int run_compute(const std::string& mdp_path, const std::string& method, double c, double tol,
                int samples, int runs, std::uint64_t seed, const std::string& out_prefix) {
    const ss::Mdp mdp = ss::load_mdp(mdp_path);

    ss::MetricRunConfig cfg;
    cfg.c = c;
    cfg.tol = tol;
    cfg.samples_per_state_action = samples;
    cfg.n_runs = runs;
    cfg.seed = seed;

    ss::DistanceMatrix dm;
    if (method == "fix") {
        cfg.backend = ss::TransportBackend::cold;
        dm = ss::fixed_point_metric(mdp, cfg);
    } else if (method == "fix-reopt") {
        cfg.backend = ss::TransportBackend::warm;
        dm = ss::fixed_point_metric(mdp, cfg);
    } else if (method == "sample") {
        dm = ss::sampled_metric(mdp, cfg);
    } else if (method == "tv") {
        dm = ss::tv_metric(mdp, c);
    } else {
        dm = ss::bisim_tv_metric(mdp, c);
    }

    ss::write_distance_csv(out_prefix + ".csv", dm);
    ss::write_distance_meta(out_prefix + ".meta.json", dm, tol, seed);
    std::printf("wrote %s.csv and %s.meta.json (%d states, method %s)\n", out_prefix.c_str(),
                out_prefix.c_str(), dm.n, dm.method.c_str());
    return 0;
}

int run_aggregate(const std::string& dist_path, bool has_k, int k, bool has_eps, double eps,
                  const std::string& out) {
    if (has_k == has_eps)
        throw ss::ConfigError("aggregate: exactly one of --k and --epsilon is required");
    const ss::DistanceMatrix dist = ss::read_distance_csv(dist_path);
    const ss::AggregationResult res =
        has_k ? ss::aggregate_to_k(dist, k) : ss::aggregate_epsilon(dist, eps);
    ss::write_text_file(out, ss::aggregation_to_json(res));
    std::printf("wrote %s (%d blocks)\n", out.c_str(), res.partition.n_blocks());
    return 0;
}

int run_eval(const std::string& mdp_path, const std::string& partition_path, double gamma,
             double vi_tol, const std::string& out) {
    const ss::Mdp mdp = ss::load_mdp(mdp_path);
    const ss::Partition part = ss::partition_from_json_text(ss::read_text_file(partition_path));
    ss::validate_partition(part, mdp.n_states);
    const double err = ss::linf_error(mdp, part, gamma, vi_tol);

    std::string json = "{\n";
    json += "  \"linf_error\": " + ss::format_real(err) + ",\n";
    json += "  \"n_blocks\": " + std::to_string(part.n_blocks()) + ",\n";
    json += "  \"gamma\": " + ss::format_real(gamma) + ",\n";
    json += "  \"vi_tol\": " + ss::format_real(vi_tol) + "\n";
    json += "}\n";
    ss::write_text_file(out, json);
    std::printf("wrote %s (linf_error %s)\n", out.c_str(), ss::format_real(err).c_str());
    return 0;
}

int run_experiment_cmd(const std::string& config_path, const std::string& outdir) {
    const ss::ExperimentConfig cfg =
        ss::experiment_config_from_json_text(ss::read_text_file(config_path));
    const ss::ExperimentReport report = ss::run_experiment(cfg);

    std::error_code ec;
    std::filesystem::create_directories(outdir, ec);
    if (ec && !std::filesystem::is_directory(outdir))
        throw ss::IoError("cannot create output directory: " + outdir);

    ss::write_text_file(std::filesystem::path(outdir) / "report.json",
                        ss::experiment_report_to_json(report));
    for (std::size_t i = 0; i < report.cells.size(); ++i) {
        const auto& cell = report.cells[i];
        if (!cell.ok) continue;
        const std::string stem =
            cell.method + "_c" + ss::detail::format_c_short(cell.c);
        ss::write_distance_csv(std::filesystem::path(outdir) / (stem + ".csv"),
                               report.matrices[i]);
        ss::write_distance_meta(std::filesystem::path(outdir) / (stem + ".meta.json"),
                                report.matrices[i], cfg.tol, cfg.seed);
    }
    ss::emit_plot_data(report, outdir);

    int failed = 0;
    for (const auto& cell : report.cells) failed += cell.ok ? 0 : 1;
    std::printf("wrote %s/report.json (%zu cells, %d failed)\n", outdir.c_str(),
                report.cells.size(), failed);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"State-similarity metrics and aggregation for finite MDPs"};
    app.require_subcommand(1);

    std::string gen_family, gen_out;
    int gen_n = 3;
    auto* gen = app.add_subcommand("gen", "Generate a builtin benchmark MDP");
    gen->add_option("family", gen_family, "MDP family: gridworld or coffee")
        ->required()
        ->check(CLI::IsMember({"gridworld", "coffee"}));
    auto* gen_n_opt = gen->add_option("--n", gen_n, "Gridworld side length (positive odd)");
    gen->add_option("--out", gen_out, "Output MDP JSON file")->required();

    std::string cmp_mdp, cmp_method, cmp_out;
    double cmp_c = 0.0, cmp_tol = 1e-4;
    int cmp_samples = 10, cmp_runs = 30;
    std::uint64_t cmp_seed = 0;
    auto* cmp = app.add_subcommand("compute", "Compute a state-similarity metric");
    cmp->add_option("--mdp", cmp_mdp, "Input MDP JSON file")->required();
    cmp->add_option("--method", cmp_method, "fix | fix-reopt | sample | tv | bisim")
        ->required()
        ->check(CLI::IsMember({"fix", "fix-reopt", "sample", "tv", "bisim"}));
    cmp->add_option("--c", cmp_c, "Metric discount in (0,1)")->required();
    cmp->add_option("--tol", cmp_tol, "Certified fixed-point tolerance");
    cmp->add_option("--samples", cmp_samples, "Samples per (state, action) for method sample");
    cmp->add_option("--runs", cmp_runs, "Independent runs for method sample");
    cmp->add_option("--seed", cmp_seed, "Root RNG seed for method sample");
    cmp->add_option("--out", cmp_out, "Output prefix (.csv and .meta.json)")->required();

    std::string agg_dist, agg_out;
    int agg_k = 0;
    double agg_eps = 0.0;
    auto* agg = app.add_subcommand("aggregate", "Aggregate states from a distance matrix");
    agg->add_option("--dist", agg_dist, "Distance CSV file")->required();
    auto* agg_k_opt = agg->add_option("--k", agg_k, "Target block count");
    auto* agg_e_opt = agg->add_option("--epsilon", agg_eps, "Distance threshold");
    agg->add_option("--out", agg_out, "Output aggregation JSON file")->required();

    std::string ev_mdp, ev_part, ev_out;
    double ev_gamma = 0.0, ev_tol = 1e-6;
    auto* ev = app.add_subcommand("eval", "Value error of an aggregation");
    ev->add_option("--mdp", ev_mdp, "Input MDP JSON file")->required();
    ev->add_option("--partition", ev_part, "Partition or aggregation JSON file")->required();
    ev->add_option("--gamma", ev_gamma, "Discount factor in (0,1)")->required();
    ev->add_option("--tol", ev_tol, "Value-iteration tolerance");
    ev->add_option("--out", ev_out, "Output JSON file")->required();

    std::string exp_config, exp_out;
    auto* exp = app.add_subcommand("experiment", "Run a full metric/aggregation sweep");
    exp->add_option("--config", exp_config, "Experiment config JSON file")->required();
    exp->add_option("--out", exp_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return run_gen(gen_family, gen_n, gen_n_opt->count() > 0, gen_out);
        if (cmp->parsed())
            return run_compute(cmp_mdp, cmp_method, cmp_c, cmp_tol, cmp_samples, cmp_runs,
                               cmp_seed, cmp_out);
        if (agg->parsed())
            return run_aggregate(agg_dist, agg_k_opt->count() > 0, agg_k,
                                 agg_e_opt->count() > 0, agg_eps, agg_out);
        if (ev->parsed()) return run_eval(ev_mdp, ev_part, ev_gamma, ev_tol, ev_out);
        if (exp->parsed()) return run_experiment_cmd(exp_config, exp_out);
    } catch (const ss::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const ss::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const ss::BudgetExceeded& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}

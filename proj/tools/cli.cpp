#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "rct/config.hpp"
#include "rct/csv.hpp"
#include "rct/design.hpp"
#include "rct/error.hpp"
#include "rct/estimators.hpp"
#include "rct/harness.hpp"
#include "rct/policy.hpp"
#include "rct/population.hpp"
#include "rct/rng.hpp"

#ifndef RCT_VERSION
#define RCT_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace rct::cli {

namespace {

constexpr const char* kArtifact = "rctsim";

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(fmt::format("cannot read '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(fmt::format("cannot read '{}'", path.string()));
    return in;
}

void write_file(const fs::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
    out << contents;
    if (!out) throw Error(fmt::format("failed writing '{}'", path.string()));
}

template <class F>
std::string render(F&& writer) {
    std::ostringstream ss;
    writer(ss);
    return ss.str();
}

// --- simulate --------------------------------------------------------------

struct SimulateArgs {
    std::string config_path;
    std::string manifest_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> threads;
    std::string grid;
};

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
    std::string text;
    if (!args.manifest_path.empty()) {
        nlohmann::json manifest;
        try {
            manifest = nlohmann::json::parse(slurp(args.manifest_path));
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(fmt::format("manifest: {}", e.what()));
        }
        if (!manifest.contains("config")) throw ParseError("manifest has no 'config' entry");
        text = manifest["config"].dump();
    } else if (!args.config_path.empty()) {
        text = slurp(args.config_path);
    }

    RunConfig cfg = parse_run_config(text, args.grid);
    if (args.seed) cfg.grid.master_seed = *args.seed;
    if (args.out) cfg.output_dir = *args.out;
    if (args.threads) {
        if (*args.threads < 0) throw ParseError("--threads must be >= 0");
        cfg.threads = *args.threads;
    }

    const std::string hash = grid_hash(cfg.grid);
    const fs::path dir = fs::path(cfg.output_dir) / fmt::format("run-{}-{}", cfg.grid.master_seed, hash);
    fs::create_directories(dir);

    err << fmt::format("{}: {} scenarios x {} replicates -> {}\n", kArtifact,
                       cfg.grid.n_scenarios(), cfg.grid.n_replicates, dir.string());
    const GridResult result = run_grid(cfg.grid, RunOptions{cfg.threads});

    std::vector<std::pair<std::string, std::string>> files;
    files.emplace_back("metrics.csv", render([&](std::ostream& s) { write_metrics_csv(s, result.metrics); }));
    files.emplace_back("pate_summary.csv", render([&](std::ostream& s) {
                           write_summary_csv(s, summarize_by_n(result.metrics, {"dim", "did", "ols"}));
                       }));
    files.emplace_back("moderator_summary.csv", render([&](std::ostream& s) {
                           write_summary_csv(s, summarize_by_n(result.metrics, {"ols_mod", "naive_mod"}));
                       }));
    files.emplace_back("power.csv", render([&](std::ostream& s) {
                           write_power_csv(s, power_table(result, cfg.grid.base_params.mu_b));
                       }));
    files.emplace_back("attenuation.csv", render([&](std::ostream& s) {
                           write_attenuation_csv(s, attenuation_table(result));
                       }));
    files.emplace_back("policy_summary.json", policy_summary_json(result) + "\n");

    nlohmann::ordered_json manifest;
    manifest["artifact"] = kArtifact;
    manifest["version"] = RCT_VERSION;
    manifest["seed"] = cfg.grid.master_seed;
    manifest["grid_hash"] = hash;
    manifest["config"] = nlohmann::ordered_json::parse(run_config_json(cfg));
    manifest["total_failures"] = result.total_failures;
    auto& listing = manifest["files"] = nlohmann::ordered_json::object();
    for (const auto& [name, contents] : files) {
        write_file(dir / name, contents);
        listing[name] = fmt::format("fnv1a64:{:016x}", fnv1a64(contents));
    }
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    out << dir.string() << "\n";
    return kOk;
}

// --- estimate --------------------------------------------------------------

int cmd_estimate(const std::string& study_path, const std::string& estimator, double alpha,
                 std::ostream& out) {
    auto in = open_input(study_path);
    const ObservedStudy study = read_study_csv(in);
    std::ostringstream buf;
    write_estimate_header(buf);
    const bool all = estimator == "all";
    if (all || estimator == "dim") write_estimate_row(buf, "dim", diff_in_means(study, alpha));
    if (all || estimator == "did") write_estimate_row(buf, "did", diff_in_diffs(study, alpha));
    if (all || estimator == "ols") {
        const auto r = ols_interaction(study, alpha);
        write_estimate_row(buf, "ols", r.tau);
        write_estimate_row(buf, "ols_mod", r.moderators.at(0));
    }
    if (all || estimator == "naive-mod")
        write_estimate_row(buf, "naive_mod", naive_moderator(study, alpha));
    out << buf.str();
    return kOk;
}

// --- policy ----------------------------------------------------------------

struct PolicyArgs {
    std::string study_path;
    std::string covariates_path;
    std::string costs_path;
    std::string population_path;
    std::optional<double> budget;
    double treatment_cost = 1.0;
    std::string solver = "lp";
    std::string out_dir = ".";
};

int cmd_policy(const PolicyArgs& args, std::ostream& out) {
    auto study_in = open_input(args.study_path);
    const ObservedStudy study = read_study_csv(study_in);
    auto cov_in = open_input(args.covariates_path);
    const Matrix covariates = read_covariates_csv(cov_in);
    const double budget = args.budget.value_or(std::numeric_limits<double>::infinity());

    CostModel costs;
    if (!args.costs_path.empty()) {
        auto cost_in = open_input(args.costs_path);
        costs.cost = read_costs_csv(cost_in);
        costs.budget = budget;
    } else {
        costs = CostModel::uniform(static_cast<int>(covariates.rows()), study.n_arms(),
                                   args.treatment_cost, budget);
    }

    const auto coeffs = fit_per_arm(study);
    const Matrix imputed = impute_population(coeffs, covariates);
    const auto solver = args.solver == "dp" ? BudgetSolver::ExactDp : BudgetSolver::LpRounding;
    PolicyRegime regime = optimal_budgeted(imputed, costs, solver);
    if (!args.population_path.empty()) {
        auto pop_in = open_input(args.population_path);
        const Population pop = read_population_csv(pop_in);
        regime.realized_mean = realized_value(pop, regime);
    }

    const fs::path dir(args.out_dir);
    fs::create_directories(dir);
    write_file(dir / "regime.csv", render([&](std::ostream& s) { write_regime_csv(s, regime); }));
    write_file(dir / "policy_summary.json", regime_summary_json(regime) + "\n");
    out << (dir / "regime.csv").string() << "\n" << (dir / "policy_summary.json").string() << "\n";
    return kOk;
}

// --- generate --------------------------------------------------------------

struct GenerateArgs {
    PopulationParams params;
    std::uint64_t seed = 20230917;
    std::optional<int> study_n;
    std::string samples_per_plot = "inf";
    double sd_within_plot = 1.02;
    std::string out_dir = ".";
};

int cmd_generate(const GenerateArgs& args, std::ostream& out) {
    const Population pop = generate_population(args.params, args.seed);
    const fs::path dir(args.out_dir);
    fs::create_directories(dir);
    write_file(dir / "population.csv", render([&](std::ostream& s) { write_population_csv(s, pop); }));
    write_file(dir / "covariates.csv", render([&](std::ostream& s) {
                   s << "plot_id,baseline\n";
                   for (int i = 0; i < pop.n_plots(); ++i)
                       s << (i + 1) << "," << csv::format_double(pop.baseline()[i]) << "\n";
               }));
    out << (dir / "population.csv").string() << "\n" << (dir / "covariates.csv").string() << "\n";
    if (args.study_n) {
        std::optional<int> m;
        if (args.samples_per_plot != "inf") m = static_cast<int>(csv::parse_integer(args.samples_per_plot, 0, "samples-per-plot"));
        const auto spec = DesignSpec::balanced(*args.study_n, m, args.sd_within_plot);
        const auto study = enroll_and_assign(pop, spec, split_seed(args.seed, {0x7374756479}));
        write_file(dir / "study.csv", render([&](std::ostream& s) { write_study_csv(s, study); }));
        out << (dir / "study.csv").string() << "\n";
    }
    return kOk;
}

template <class F>
int guarded(F&& body, std::ostream& err) {
    try {
        return body();
    } catch (const ParseError& e) {
        if (e.line() > 0)
            err << fmt::format("error: line {}, column {}: {}\n", e.line(), e.column(), e.what());
        else
            err << fmt::format("error: {}\n", e.what());
        return kParse;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << "\n";
        return kParse;
    } catch (const ScenarioAbort& e) {
        err << "error: scenario aborted: " << e.what() << "\n";
        return kScenarioAbort;
    } catch (const InfeasibleError& e) {
        err << "error: infeasible budget: " << e.what() << "\n";
        return kInfeasible;
    } catch (const InsufficientDataError& e) {
        err << "error: estimator failed: " << e.what() << "\n";
        return kEstimatorFailure;
    } catch (const SingularityError& e) {
        err << "error: estimator failed: " << e.what() << "\n";
        return kEstimatorFailure;
    } catch (const FitError& e) {
        err << "error: estimator failed: " << e.what() << "\n";
        return kEstimatorFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kOther;
    }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Monte Carlo and estimation tools for randomized field trials"};
    app.set_version_flag("--version", RCT_VERSION);
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run a scenario grid and write metric tables");
    simulate->add_option("--config", sim.config_path, "YAML configuration file")->check(CLI::ExistingFile);
    simulate->add_option("--manifest", sim.manifest_path, "Re-run the configuration recorded in a manifest.json")
        ->check(CLI::ExistingFile);
    simulate->add_option("--seed", sim.seed, "Master seed (overrides the config)");
    simulate->add_option("--out", sim.out, "Output directory (overrides the config)");
    simulate->add_option("--threads", sim.threads, "Worker threads, 0 = all cores");
    simulate->add_option("--grid", sim.grid, "Scenario grid preset")
        ->check(CLI::IsMember({"full", "power_curve", "custom"}));

    std::string study_path, estimator = "all";
    double alpha = 0.05;
    auto* estimate = app.add_subcommand("estimate", "Estimate effects from a study CSV");
    estimate->add_option("study", study_path, "Study CSV")->required();
    estimate->add_option("--estimator", estimator, "Estimator")
        ->check(CLI::IsMember({"all", "dim", "did", "ols", "naive-mod"}));
    estimate->add_option("--alpha", alpha, "Confidence level is 1 - alpha")->check(CLI::Range(0.0, 1.0));

    PolicyArgs pol;
    auto* policy = app.add_subcommand("policy", "Estimate the optimal treatment regime");
    policy->add_option("study", pol.study_path, "Study CSV")->required();
    policy->add_option("covariates", pol.covariates_path, "Population covariates CSV")->required();
    policy->add_option("--costs", pol.costs_path, "Per-plot cost CSV (plot_id,cost0,cost1,...)");
    policy->add_option("--budget", pol.budget, "Total budget");
    policy->add_option("--treatment-cost", pol.treatment_cost,
                       "Per-plot cost of every non-control arm when --costs is absent");
    policy->add_option("--solver", pol.solver, "Budget solver")->check(CLI::IsMember({"lp", "dp"}));
    policy->add_option("--population", pol.population_path,
                       "Population CSV with potential outcomes, to report the realized value");
    policy->add_option("--out", pol.out_dir, "Output directory");

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Write a synthetic population (and optionally a study)");
    generate->add_option("--seed", gen.seed, "Population seed");
    generate->add_option("--tau", gen.params.tau, "Average treatment effect");
    generate->add_option("--beta-mod", gen.params.beta_mod, "Moderator effect per baseline SD");
    generate->add_option("--sd-eps1", gen.params.sd_eps1, "SD of treated idiosyncratic noise");
    generate->add_option("--n-plots", gen.params.n_plots, "Population size");
    generate->add_option("--study-n", gen.study_n, "Also draw a balanced study of this size");
    generate->add_option("--samples-per-plot", gen.samples_per_plot, "Soil samples per plot, or inf");
    generate->add_option("--sd-within-plot", gen.sd_within_plot, "Within-plot sampling SD");
    generate->add_option("--out", gen.out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kParse;
    }

    if (simulate->parsed()) {
        if (!sim.config_path.empty() && !sim.manifest_path.empty()) {
            err << "error: give --config or --manifest, not both\n";
            return kParse;
        }
        return guarded([&] { return cmd_simulate(sim, out, err); }, err);
    }
    if (estimate->parsed())
        return guarded([&] { return cmd_estimate(study_path, estimator, alpha, out); }, err);
    if (policy->parsed()) return guarded([&] { return cmd_policy(pol, out); }, err);
    if (generate->parsed()) return guarded([&] { return cmd_generate(gen, out); }, err);
    return kOther;
}

}  // namespace rct::cli

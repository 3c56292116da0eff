#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rct/population.hpp"

namespace rct {

/// Full factorial Monte Carlo design. Each (tau, beta_mod, sd_eps1) triple
/// defines one population; each population is studied at every (n, m).
struct ScenarioGrid {
    std::vector<double> tau_values;
    std::vector<double> beta_mod_values;
    std::vector<double> sd_eps1_values;
    std::vector<int> n_values;
    /// nullopt = infinitely many samples per plot (no measurement error).
    std::vector<std::optional<int>> samples_per_plot_values;
    int n_replicates = 500;
    PopulationParams base_params;
    std::uint64_t master_seed = 20230917;

    double sd_within_plot = 1.02;
    double alpha = 0.05;
    /// Cost of treating one plot (control is free) and overall budget for
    /// the policy comparison. Infinite budget = unconstrained.
    double treatment_cost = 0.0;
    double budget = std::numeric_limits<double>::infinity();
    /// Fraction of failed replicates tolerated per scenario.
    double max_failure_rate = 0.01;

    /// tau in {0, .05, .1, .3}/0.66, beta_mod in {0, -.1, -.5},
    /// sigma^2_eps1 in {0, .1}, n in {10, 100, 1000}, m in {5, 30, 100, inf},
    /// 500 replicates, N = 5000.
    static ScenarioGrid full();
    /// Power-curve grid: n in {14, 140}, m in {5, 100}, beta_mod = -0.5,
    /// tau expressed relative to the baseline mean.
    static ScenarioGrid power_curve();
    static std::vector<double> power_curve_relative_taus();

    std::size_t n_scenarios() const;
    void validate() const;
};

/// One cell of the grid.
struct Scenario {
    double tau = 0.0;
    double beta_mod = 0.0;
    double sd_eps1 = 0.0;
    int n = 0;
    std::optional<int> samples_per_plot;

    /// Human-readable id, e.g. "tau=0.0757_beta=-0.5_sdeps1=0_n=100_m=inf".
    std::string id() const;
};

/// Per-scenario, per-estimator Monte Carlo summary.
struct MetricsRow {
    Scenario scenario;
    std::string estimator;
    /// Estimand the estimator is scored against (population PATE or
    /// per-SD moderator effect).
    double target = 0.0;
    int n_ok = 0;
    int n_failed = 0;
    double bias = 0.0;
    double rmse = 0.0;
    double ci_width = 0.0;
    double coverage = 0.0;
    /// Fraction of replicates whose lower CI limit exceeds 0 (PATE estimators only).
    std::optional<double> power;
    /// Monte Carlo SD of the estimates (n_ok - 1 denominator).
    double estimate_sd = 0.0;
    std::string warnings;

    double bias_se() const;
    double coverage_se() const;
    std::optional<double> power_se() const;
};

/// Replicate-averaged realized policy values for one scenario.
struct PolicyRow {
    Scenario scenario;
    int n_ok = 0;
    double oracle_value = 0.0;
    double estimated_value = 0.0;
    double estimated_se = 0.0;
    double restricted_value = 0.0;
    double restricted_se = 0.0;
    /// Paired difference estimated - restricted.
    double gap = 0.0;
    double gap_se = 0.0;
};

struct GridResult {
    std::vector<MetricsRow> metrics;
    std::vector<PolicyRow> policy;
    int total_failures = 0;
};

struct RunOptions {
    /// Worker threads; 0 = hardware concurrency.
    int threads = 0;
};

/// Names of the estimators scored in every replicate, in output order.
const std::vector<std::string>& estimator_names();
/// PATE estimators (scored against the PATE).
bool is_pate_estimator(const std::string& name);

/// Runs every scenario of the grid. Output is bit-identical for a given grid
/// regardless of thread count. Throws ScenarioAbort when a scenario loses
/// more than max_failure_rate of its replicates.
GridResult run_grid(const ScenarioGrid& grid, const RunOptions& options = {});

/// Seed of the population for (tau, beta_mod, sd_eps1) under a grid.
std::uint64_t population_seed(const ScenarioGrid& grid, double tau, double beta_mod,
                              double sd_eps1);

/// Uniform average over scenarios per (n, estimator), as in the PATE table.
struct SummaryRow {
    int n = 0;
    std::string estimator;
    double bias = 0.0;
    double bias_se = 0.0;
    double ci_width = 0.0;
    double coverage = 0.0;
    double coverage_se = 0.0;
    double rmse = 0.0;
    int scenarios = 0;
};
std::vector<SummaryRow> summarize_by_n(const std::vector<MetricsRow>& rows,
                                       const std::vector<std::string>& estimators);

struct PolicySummary {
    double oracle = 0.0;
    double estimated = 0.0;
    double restricted = 0.0;
    int scenarios = 0;
};
PolicySummary summarize_policy(const std::vector<PolicyRow>& rows);

struct PowerRow {
    std::string estimator;
    int n = 0;
    std::optional<int> samples_per_plot;
    double tau = 0.0;
    double relative_tau = 0.0;
    double power = 0.0;
    double power_se = 0.0;
    double ci_width = 0.0;
};

/// Power per (estimator, n, m, tau), averaged over the remaining grid axes.
std::vector<PowerRow> power_table(const GridResult& result, double baseline_mean);

/// Runs the power-curve grid and tabulates power.
std::vector<PowerRow> power_curves(const std::vector<int>& n_values,
                                   const std::vector<std::optional<int>>& m_values,
                                   const std::vector<double>& relative_taus,
                                   const ScenarioGrid& base, const RunOptions& options = {});

struct AttenuationRow {
    std::string estimator;
    int n = 0;
    std::optional<int> samples_per_plot;
    double beta_mod = 0.0;
    double bias = 0.0;
    double bias_se = 0.0;
    double coverage = 0.0;
    double coverage_se = 0.0;
};

/// Moderator bias and coverage per (estimator, n, m, beta_mod) over the
/// remaining axes. Only nonzero beta_mod scenarios are included.
std::vector<AttenuationRow> attenuation_table(const GridResult& result);

/// Runs the grid restricted to the given n and m values and tabulates attenuation.
std::vector<AttenuationRow> attenuation_curves(const std::vector<int>& n_values,
                                               const std::vector<std::optional<int>>& m_values,
                                               const ScenarioGrid& base,
                                               const RunOptions& options = {});

/// Stable-column CSV writers.
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_power_csv(std::ostream& out, const std::vector<PowerRow>& rows);
void write_attenuation_csv(std::ostream& out, const std::vector<AttenuationRow>& rows);
std::string policy_summary_json(const GridResult& result);

std::string format_samples_per_plot(const std::optional<int>& m);

}  // namespace rct

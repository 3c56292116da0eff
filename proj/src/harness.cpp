#include "rct/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>
#include <tuple>

#include <fmt/format.h>
#include <json.hpp>

#include "rct/csv.hpp"
#include "rct/design.hpp"
#include "rct/error.hpp"
#include "rct/estimators.hpp"
#include "rct/policy.hpp"
#include "rct/rng.hpp"

namespace rct {

// ---------------------------------------------------------------------------
// Grid presets

ScenarioGrid ScenarioGrid::full() {
    ScenarioGrid g;
    // Effect sizes are divided by 0.66 verbatim.
    for (double t : {0.0, 0.05, 0.1, 0.3}) g.tau_values.push_back(t / 0.66);
    g.beta_mod_values = {0.0, -0.1, -0.5};
    g.sd_eps1_values = {0.0, std::sqrt(0.1)};
    g.n_values = {10, 100, 1000};
    g.samples_per_plot_values = {5, 30, 100, std::nullopt};
    return g;
}

std::vector<double> ScenarioGrid::power_curve_relative_taus() {
    return {0.0, 0.01, 0.02, 0.03, 0.05, 0.075, 0.1, 0.15, 0.2, 0.3};
}

ScenarioGrid ScenarioGrid::power_curve() {
    ScenarioGrid g = full();
    g.tau_values.clear();
    for (double r : power_curve_relative_taus()) g.tau_values.push_back(r * g.base_params.mu_b);
    g.beta_mod_values = {-0.5};
    g.n_values = {14, 140};
    g.samples_per_plot_values = {5, 100};
    return g;
}

std::size_t ScenarioGrid::n_scenarios() const {
    return tau_values.size() * beta_mod_values.size() * sd_eps1_values.size() * n_values.size() *
           samples_per_plot_values.size();
}

void ScenarioGrid::validate() const {
    if (tau_values.empty() || beta_mod_values.empty() || sd_eps1_values.empty() ||
        n_values.empty() || samples_per_plot_values.empty())
        throw ParameterError("every grid axis needs at least one value");
    if (n_replicates < 1) throw ParameterError("n_replicates must be positive");
    for (double v : tau_values)
        if (!std::isfinite(v)) throw ParameterError("tau values must be finite");
    for (double v : beta_mod_values)
        if (!std::isfinite(v)) throw ParameterError("beta_mod values must be finite");
    for (double v : sd_eps1_values)
        if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError("sd_eps1 values must be >= 0");
    for (int n : n_values) {
        if (n < 4) throw ParameterError("study size n must be at least 4");
        if (n > base_params.n_plots) throw EnrollmentError("study size exceeds population size");
    }
    for (const auto& m : samples_per_plot_values)
        if (m && *m < 1) throw ParameterError("samples per plot must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
    if (!(treatment_cost >= 0.0)) throw ParameterError("treatment_cost must be >= 0");
    if (!(budget >= 0.0)) throw ParameterError("budget must be >= 0");
    if (!(max_failure_rate >= 0.0 && max_failure_rate <= 1.0))
        throw ParameterError("max_failure_rate must lie in [0, 1]");
    PopulationParams p = base_params;
    p.validate();
}

std::string format_samples_per_plot(const std::optional<int>& m) {
    return m ? std::to_string(*m) : "inf";
}

std::string Scenario::id() const {
    return fmt::format("tau={:.6g}_beta={:.6g}_sdeps1={:.6g}_n={}_m={}", tau, beta_mod, sd_eps1, n,
                       format_samples_per_plot(samples_per_plot));
}

double MetricsRow::bias_se() const {
    return n_ok > 1 ? estimate_sd / std::sqrt(static_cast<double>(n_ok)) : std::nan("");
}

double MetricsRow::coverage_se() const {
    return n_ok > 0 ? std::sqrt(coverage * (1.0 - coverage) / n_ok) : std::nan("");
}

std::optional<double> MetricsRow::power_se() const {
    if (!power) return std::nullopt;
    return n_ok > 0 ? std::sqrt(*power * (1.0 - *power) / n_ok) : std::nan("");
}

const std::vector<std::string>& estimator_names() {
    static const std::vector<std::string> names{"dim", "did", "ols", "ols_mod", "naive_mod"};
    return names;
}

bool is_pate_estimator(const std::string& name) {
    return name == "dim" || name == "did" || name == "ols";
}

// ---------------------------------------------------------------------------
// Replicates

namespace {

constexpr std::uint64_t kPopulationStream = 0x706F70;   // "pop"
constexpr std::uint64_t kReplicateStream = 0x726570;    // "rep"
constexpr std::size_t kEstimators = 5;

/// Neumaier-compensated sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            c_ += (sum_ - t) + x;
        else
            c_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + c_; }

private:
    double sum_ = 0.0;
    double c_ = 0.0;
};

struct ReplicateOutcome {
    bool ok = false;
    std::array<EstimateWithCI, kEstimators> estimates{};
    double estimated_value = 0.0;
    double restricted_value = 0.0;
};

struct PopulationContext {
    const Population* pop;
    double pate;
    double moderator;
    double oracle_value;
    const CostModel* costs;  // null when unconstrained
};

ReplicateOutcome run_replicate(const PopulationContext& ctx, const DesignSpec& design,
                               double alpha, std::uint64_t seed) {
    ReplicateOutcome out;
    try {
        const auto study = enroll_and_assign(*ctx.pop, design, seed);
        out.estimates[0] = diff_in_means(study, alpha);
        out.estimates[1] = diff_in_diffs(study, alpha);
        const auto ols = ols_interaction(study, alpha);
        out.estimates[2] = ols.tau;
        out.estimates[3] = ols.moderators.at(0);
        out.estimates[4] = naive_moderator(study, alpha);

        const auto coeffs = fit_per_arm(study);
        const Matrix imputed = impute_population(coeffs, ctx.pop->covariates());
        PolicyRegime estimated, restricted;
        if (ctx.costs) {
            estimated = optimal_budgeted(imputed, *ctx.costs);
            restricted = optimal_restricted(study, *ctx.costs);
        } else {
            estimated = optimal_unconstrained(imputed);
            restricted = optimal_restricted(study, ctx.pop->n_plots());
        }
        out.estimated_value = realized_value(*ctx.pop, estimated);
        out.restricted_value = realized_value(*ctx.pop, restricted);
        out.ok = true;
    } catch (const Error&) {
        out.ok = false;
    }
    return out;
}

void run_parallel(std::size_t count, int threads, const auto& body) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, count); ++w)
        pool.emplace_back([&] {
            try {
                for (std::size_t i = next++; i < count; i = next++) body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

MetricsRow summarize_estimator(const Scenario& sc, const std::string& name, double target,
                               const std::vector<ReplicateOutcome>& reps, std::size_t index) {
    MetricsRow row;
    row.scenario = sc;
    row.estimator = name;
    row.target = target;
    CompensatedSum err, err2, width, est;
    int covered = 0, rejected = 0;
    for (const auto& r : reps) {
        if (!r.ok) {
            ++row.n_failed;
            continue;
        }
        const auto& e = r.estimates[index];
        ++row.n_ok;
        est.add(e.estimate);
        err.add(e.estimate - target);
        err2.add((e.estimate - target) * (e.estimate - target));
        width.add(e.width());
        covered += e.covers(target) ? 1 : 0;
        rejected += e.ci_lower > 0.0 ? 1 : 0;
    }
    const double n = row.n_ok;
    if (row.n_ok == 0) {
        row.bias = row.rmse = row.ci_width = row.coverage = row.estimate_sd = std::nan("");
        row.warnings = "no_successful_replicates";
        return row;
    }
    row.bias = err.value() / n;
    row.rmse = std::sqrt(err2.value() / n);
    row.ci_width = width.value() / n;
    row.coverage = covered / n;
    if (is_pate_estimator(name)) row.power = rejected / n;
    if (row.n_ok > 1) {
        const double mean = est.value() / n;
        CompensatedSum ss;
        for (const auto& r : reps)
            if (r.ok) {
                const double d = r.estimates[index].estimate - mean;
                ss.add(d * d);
            }
        row.estimate_sd = std::sqrt(ss.value() / (n - 1.0));
    } else {
        row.estimate_sd = std::nan("");
        row.warnings = "single_replicate";
    }
    if (row.n_failed > 0) {
        if (!row.warnings.empty()) row.warnings += ";";
        row.warnings += fmt::format("failed_replicates={}", row.n_failed);
    }
    return row;
}

PolicyRow summarize_policy_row(const Scenario& sc, double oracle,
                               const std::vector<ReplicateOutcome>& reps) {
    PolicyRow row;
    row.scenario = sc;
    row.oracle_value = oracle;
    CompensatedSum est, res, gap;
    for (const auto& r : reps)
        if (r.ok) {
            ++row.n_ok;
            est.add(r.estimated_value);
            res.add(r.restricted_value);
            gap.add(r.estimated_value - r.restricted_value);
        }
    const double n = row.n_ok;
    if (row.n_ok == 0) {
        row.estimated_value = row.restricted_value = row.gap = std::nan("");
        row.estimated_se = row.restricted_se = row.gap_se = std::nan("");
        return row;
    }
    row.estimated_value = est.value() / n;
    row.restricted_value = res.value() / n;
    row.gap = gap.value() / n;
    CompensatedSum se, sr, sg;
    for (const auto& r : reps)
        if (r.ok) {
            se.add((r.estimated_value - row.estimated_value) * (r.estimated_value - row.estimated_value));
            sr.add((r.restricted_value - row.restricted_value) *
                   (r.restricted_value - row.restricted_value));
            const double g = r.estimated_value - r.restricted_value - row.gap;
            sg.add(g * g);
        }
    auto to_se = [n](double ss) { return n > 1 ? std::sqrt(ss / (n - 1.0) / n) : std::nan(""); };
    row.estimated_se = to_se(se.value());
    row.restricted_se = to_se(sr.value());
    row.gap_se = to_se(sg.value());
    return row;
}

}  // namespace

std::uint64_t population_seed(const ScenarioGrid& grid, double tau, double beta_mod,
                              double sd_eps1) {
    const auto& p = grid.base_params;
    return split_seed(grid.master_seed,
                      {kPopulationStream, key_of(tau), key_of(beta_mod), key_of(sd_eps1),
                       key_of(p.mu_b), key_of(p.sd_b_across), key_of(p.mean_control_change),
                       key_of(p.sd_control_change), static_cast<std::uint64_t>(p.n_plots)});
}

GridResult run_grid(const ScenarioGrid& grid, const RunOptions& options) {
    grid.validate();
    int threads = options.threads;
    if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    GridResult result;
    for (double tau : grid.tau_values)
        for (double beta : grid.beta_mod_values)
            for (double sd_eps1 : grid.sd_eps1_values) {
                PopulationParams params = grid.base_params;
                params.tau = tau;
                params.beta_mod = beta;
                params.sd_eps1 = sd_eps1;
                const std::uint64_t pop_seed = population_seed(grid, tau, beta, sd_eps1);
                const Population pop = generate_population(params, pop_seed);

                std::optional<CostModel> costs;
                if (std::isfinite(grid.budget))
                    costs = CostModel::uniform(pop.n_plots(), pop.n_arms(), grid.treatment_cost,
                                               grid.budget);
                double oracle_value;
                if (costs) {
                    oracle_value = realized_value(
                        pop, optimal_budgeted(pop.potential_outcomes(), *costs));
                } else {
                    oracle_value = papo(pop, oracle_regime(pop));
                }
                const PopulationContext ctx{&pop, pate(pop, 1), population_moderator_effect(pop),
                                            oracle_value, costs ? &*costs : nullptr};

                for (int n : grid.n_values)
                    for (const auto& m : grid.samples_per_plot_values) {
                        const Scenario sc{tau, beta, sd_eps1, n, m};
                        const auto design = DesignSpec::balanced(n, m, grid.sd_within_plot);
                        std::vector<ReplicateOutcome> reps(grid.n_replicates);
                        run_parallel(reps.size(), threads, [&](std::size_t r) {
                            const auto seed = split_seed(
                                pop_seed, {kReplicateStream, static_cast<std::uint64_t>(n),
                                           static_cast<std::uint64_t>(m.value_or(0)),
                                           static_cast<std::uint64_t>(r)});
                            reps[r] = run_replicate(ctx, design, grid.alpha, seed);
                        });

                        const auto failed = static_cast<int>(
                            std::count_if(reps.begin(), reps.end(), [](const auto& r) { return !r.ok; }));
                        if (failed > grid.max_failure_rate * grid.n_replicates)
                            throw ScenarioAbort(fmt::format(
                                "scenario {}: {} of {} replicates failed", sc.id(), failed,
                                grid.n_replicates));
                        result.total_failures += failed;

                        const auto& names = estimator_names();
                        for (std::size_t e = 0; e < names.size(); ++e) {
                            const double target = is_pate_estimator(names[e]) ? ctx.pate : ctx.moderator;
                            result.metrics.push_back(summarize_estimator(sc, names[e], target, reps, e));
                        }
                        result.policy.push_back(summarize_policy_row(sc, ctx.oracle_value, reps));
                    }
            }
    return result;
}

// ---------------------------------------------------------------------------
// Aggregation

std::vector<SummaryRow> summarize_by_n(const std::vector<MetricsRow>& rows,
                                       const std::vector<std::string>& estimators) {
    std::vector<int> ns;
    for (const auto& r : rows)
        if (std::find(ns.begin(), ns.end(), r.scenario.n) == ns.end()) ns.push_back(r.scenario.n);
    std::sort(ns.begin(), ns.end());
    std::vector<SummaryRow> out;
    for (int n : ns)
        for (const auto& name : estimators) {
            SummaryRow s;
            s.n = n;
            s.estimator = name;
            double bias_var = 0.0, cov_var = 0.0;
            for (const auto& r : rows) {
                if (r.scenario.n != n || r.estimator != name) continue;
                ++s.scenarios;
                s.bias += r.bias;
                s.ci_width += r.ci_width;
                s.coverage += r.coverage;
                s.rmse += r.rmse;
                bias_var += r.bias_se() * r.bias_se();
                cov_var += r.coverage_se() * r.coverage_se();
            }
            if (s.scenarios == 0) continue;
            const double k = s.scenarios;
            s.bias /= k;
            s.ci_width /= k;
            s.coverage /= k;
            s.rmse /= k;
            s.bias_se = std::sqrt(bias_var) / k;
            s.coverage_se = std::sqrt(cov_var) / k;
            out.push_back(s);
        }
    return out;
}

PolicySummary summarize_policy(const std::vector<PolicyRow>& rows) {
    PolicySummary s;
    for (const auto& r : rows) {
        ++s.scenarios;
        s.oracle += r.oracle_value;
        s.estimated += r.estimated_value;
        s.restricted += r.restricted_value;
    }
    if (s.scenarios > 0) {
        s.oracle /= s.scenarios;
        s.estimated /= s.scenarios;
        s.restricted /= s.scenarios;
    }
    return s;
}

std::vector<PowerRow> power_table(const GridResult& result, double baseline_mean) {
    using Key = std::tuple<std::string, int, int, double>;
    struct Acc {
        double power = 0.0, var = 0.0, width = 0.0;
        int count = 0;
        std::optional<int> m;
    };
    std::map<Key, Acc> acc;
    std::vector<Key> order;
    for (const auto& r : result.metrics) {
        if (!r.power) continue;
        const Key k{r.estimator, r.scenario.n, r.scenario.samples_per_plot.value_or(-1),
                    r.scenario.tau};
        auto [it, inserted] = acc.try_emplace(k);
        if (inserted) order.push_back(k);
        auto& a = it->second;
        a.power += *r.power;
        a.var += r.power_se().value_or(0.0) * r.power_se().value_or(0.0);
        a.width += r.ci_width;
        a.m = r.scenario.samples_per_plot;
        ++a.count;
    }
    std::vector<PowerRow> out;
    for (const auto& k : order) {
        const auto& a = acc.at(k);
        PowerRow p;
        p.estimator = std::get<0>(k);
        p.n = std::get<1>(k);
        p.samples_per_plot = a.m;
        p.tau = std::get<3>(k);
        p.relative_tau = p.tau / baseline_mean;
        p.power = a.power / a.count;
        p.power_se = std::sqrt(a.var) / a.count;
        p.ci_width = a.width / a.count;
        out.push_back(p);
    }
    return out;
}

std::vector<PowerRow> power_curves(const std::vector<int>& n_values,
                                   const std::vector<std::optional<int>>& m_values,
                                   const std::vector<double>& relative_taus,
                                   const ScenarioGrid& base, const RunOptions& options) {
    ScenarioGrid g = base;
    g.n_values = n_values;
    g.samples_per_plot_values = m_values;
    g.tau_values.clear();
    for (double r : relative_taus) g.tau_values.push_back(r * g.base_params.mu_b);
    return power_table(run_grid(g, options), g.base_params.mu_b);
}

std::vector<AttenuationRow> attenuation_table(const GridResult& result) {
    using Key = std::tuple<std::string, int, int, double>;
    struct Acc {
        double bias = 0.0, bias_var = 0.0, cov = 0.0, cov_var = 0.0;
        int count = 0;
        std::optional<int> m;
    };
    std::map<Key, Acc> acc;
    std::vector<Key> order;
    for (const auto& r : result.metrics) {
        if (is_pate_estimator(r.estimator) || r.scenario.beta_mod == 0.0) continue;
        const Key k{r.estimator, r.scenario.n, r.scenario.samples_per_plot.value_or(-1),
                    r.scenario.beta_mod};
        auto [it, inserted] = acc.try_emplace(k);
        if (inserted) order.push_back(k);
        auto& a = it->second;
        a.bias += r.bias;
        a.bias_var += r.bias_se() * r.bias_se();
        a.cov += r.coverage;
        a.cov_var += r.coverage_se() * r.coverage_se();
        a.m = r.scenario.samples_per_plot;
        ++a.count;
    }
    std::vector<AttenuationRow> out;
    for (const auto& k : order) {
        const auto& a = acc.at(k);
        AttenuationRow row;
        row.estimator = std::get<0>(k);
        row.n = std::get<1>(k);
        row.samples_per_plot = a.m;
        row.beta_mod = std::get<3>(k);
        row.bias = a.bias / a.count;
        row.bias_se = std::sqrt(a.bias_var) / a.count;
        row.coverage = a.cov / a.count;
        row.coverage_se = std::sqrt(a.cov_var) / a.count;
        out.push_back(row);
    }
    return out;
}

std::vector<AttenuationRow> attenuation_curves(const std::vector<int>& n_values,
                                               const std::vector<std::optional<int>>& m_values,
                                               const ScenarioGrid& base,
                                               const RunOptions& options) {
    ScenarioGrid g = base;
    g.n_values = n_values;
    g.samples_per_plot_values = m_values;
    std::erase(g.beta_mod_values, 0.0);
    if (g.beta_mod_values.empty()) throw ParameterError("attenuation needs a nonzero beta_mod");
    return attenuation_table(run_grid(g, options));
}

// ---------------------------------------------------------------------------
// Output

namespace {

std::vector<std::string> scenario_fields(const Scenario& s) {
    return {s.id(), csv::format_double(s.tau), csv::format_double(s.beta_mod),
            csv::format_double(s.sd_eps1), std::to_string(s.n),
            format_samples_per_plot(s.samples_per_plot)};
}

}  // namespace

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
    csv::write_row(out, {"scenario", "tau", "beta_mod", "sd_eps1", "n", "samples_per_plot",
                         "estimator", "target", "n_ok", "n_failed", "bias", "rmse", "ci_width",
                         "coverage", "power", "estimate_sd", "warnings"});
    for (const auto& r : rows) {
        auto f = scenario_fields(r.scenario);
        f.insert(f.end(), {r.estimator, csv::format_double(r.target), std::to_string(r.n_ok),
                           std::to_string(r.n_failed), csv::format_double(r.bias),
                           csv::format_double(r.rmse), csv::format_double(r.ci_width),
                           csv::format_double(r.coverage),
                           r.power ? csv::format_double(*r.power) : "",
                           csv::format_double(r.estimate_sd), r.warnings});
        csv::write_row(out, f);
    }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
    csv::write_row(out, {"n", "estimator", "bias", "ci_width", "coverage", "rmse", "scenarios"});
    for (const auto& r : rows)
        csv::write_row(out, {std::to_string(r.n), r.estimator, csv::format_double(r.bias),
                             csv::format_double(r.ci_width), csv::format_double(r.coverage),
                             csv::format_double(r.rmse), std::to_string(r.scenarios)});
}

void write_power_csv(std::ostream& out, const std::vector<PowerRow>& rows) {
    csv::write_row(out, {"estimator", "n", "samples_per_plot", "tau", "relative_tau", "power",
                         "power_se", "ci_width"});
    for (const auto& r : rows)
        csv::write_row(out, {r.estimator, std::to_string(r.n), format_samples_per_plot(r.samples_per_plot),
                             csv::format_double(r.tau), csv::format_double(r.relative_tau),
                             csv::format_double(r.power), csv::format_double(r.power_se),
                             csv::format_double(r.ci_width)});
}

void write_attenuation_csv(std::ostream& out, const std::vector<AttenuationRow>& rows) {
    csv::write_row(out, {"estimator", "n", "samples_per_plot", "beta_mod", "bias", "bias_se",
                         "coverage", "coverage_se"});
    for (const auto& r : rows)
        csv::write_row(out, {r.estimator, std::to_string(r.n), format_samples_per_plot(r.samples_per_plot),
                             csv::format_double(r.beta_mod), csv::format_double(r.bias),
                             csv::format_double(r.bias_se), csv::format_double(r.coverage),
                             csv::format_double(r.coverage_se)});
}

std::string policy_summary_json(const GridResult& result) {
    auto num = [](double v) -> nlohmann::ordered_json {
        if (std::isfinite(v)) return v;
        return nullptr;
    };
    nlohmann::ordered_json j;
    const auto s = summarize_policy(result.policy);
    j["grid_average"] = {{"oracle", num(s.oracle)},
                         {"estimated_optimal", num(s.estimated)},
                         {"restricted", num(s.restricted)},
                         {"scenarios", s.scenarios}};
    auto& arr = j["scenarios"] = nlohmann::ordered_json::array();
    for (const auto& r : result.policy) {
        arr.push_back({{"scenario", r.scenario.id()},
                       {"tau", r.scenario.tau},
                       {"beta_mod", r.scenario.beta_mod},
                       {"sd_eps1", r.scenario.sd_eps1},
                       {"n", r.scenario.n},
                       {"samples_per_plot", format_samples_per_plot(r.scenario.samples_per_plot)},
                       {"n_ok", r.n_ok},
                       {"oracle", num(r.oracle_value)},
                       {"estimated_optimal", num(r.estimated_value)},
                       {"estimated_optimal_se", num(r.estimated_se)},
                       {"restricted", num(r.restricted_value)},
                       {"restricted_se", num(r.restricted_se)},
                       {"gap", num(r.gap)},
                       {"gap_se", num(r.gap_se)}});
    }
    j["total_failures"] = result.total_failures;
    return j.dump(2);
}

}  // namespace rct

#pragma once

#include <cmath>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rct/design.hpp"
#include "rct/population.hpp"

namespace rct {

/// Plot-specific additive treatment costs and an overall budget.
struct CostModel {
    Matrix cost;  ///< N x K, cost(i, k) of giving plot i arm k
    double budget = std::numeric_limits<double>::infinity();

    /// Zero cost for control, `per_plot_cost` for every other arm.
    static CostModel uniform(int n_plots, int n_arms, double per_plot_cost, double budget);

    bool has_budget() const noexcept { return std::isfinite(budget); }
    double total_cost(const Regime& regime) const;
    void validate(Eigen::Index n_plots, Eigen::Index n_arms) const;
};

struct PolicyRegime {
    Regime regime;
    /// Mean imputed (or observed) value of the regime.
    double predicted_mean = 0.0;
    /// PAPO under the true potential outcomes, when known.
    std::optional<double> realized_mean;
    double total_cost = 0.0;
    double budget = std::numeric_limits<double>::infinity();
    /// LP relaxation optimum minus the returned value, per plot. 0 when exact.
    double optimality_gap = 0.0;
};

enum class BudgetSolver {
    /// Multiple-choice knapsack LP relaxation, fractional plot rounded down.
    LpRounding,
    /// Exact dynamic program over integer costs.
    ExactDp,
};

/// Least-squares coefficients of Y on X within each arm.
std::vector<Vector> fit_per_arm(const ObservedStudy& study);

/// yhat(i, k) = x_i . beta(k).
Matrix impute_population(const std::vector<Vector>& coeffs, const Matrix& target_covariates);

/// Per-plot argmax, ties to the lower arm.
PolicyRegime optimal_unconstrained(const Matrix& imputed);

/// Uniform regime at the arm with the largest observed mean (ties to the lower arm).
PolicyRegime optimal_restricted(const ObservedStudy& study, int n_plots);

/// As above, restricted to uniform regimes that fit within the budget.
PolicyRegime optimal_restricted(const ObservedStudy& study, const CostModel& costs);

/// Best regime under an additive budget. Infinite budgets reduce to
/// optimal_unconstrained. Throws InfeasibleError when even the cheapest
/// regime exceeds the budget.
PolicyRegime optimal_budgeted(const Matrix& imputed, const CostModel& costs,
                              BudgetSolver solver = BudgetSolver::LpRounding);

/// Value of the multiple-choice knapsack LP relaxation (mean per plot).
double budgeted_lp_bound(const Matrix& imputed, const CostModel& costs);

/// PAPO of the regime under the population's true potential outcomes.
double realized_value(const Population& pop, const PolicyRegime& regime);

/// `plot_id,arm`
void write_regime_csv(std::ostream& out, const PolicyRegime& regime);
/// `{predicted_mean, realized_mean, total_cost, budget, optimality_gap}`
std::string regime_summary_json(const PolicyRegime& regime);

/// CSV with a `plot_id` column followed by one column per non-intercept
/// covariate; the intercept is prepended.
Matrix read_covariates_csv(std::istream& in);
/// CSV `plot_id,cost0,cost1,...`
Matrix read_costs_csv(std::istream& in);

}  // namespace rct

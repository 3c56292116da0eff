#include "rct/policy.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "rct/csv.hpp"
#include "rct/error.hpp"

namespace rct {

CostModel CostModel::uniform(int n_plots, int n_arms, double per_plot_cost, double budget) {
    CostModel c;
    c.cost = Matrix::Constant(n_plots, n_arms, per_plot_cost);
    c.cost.col(0).setZero();
    c.budget = budget;
    return c;
}

double CostModel::total_cost(const Regime& regime) const {
    if (static_cast<Eigen::Index>(regime.size()) != cost.rows())
        throw DimensionError("regime length does not match cost matrix");
    double total = 0.0;
    for (std::size_t i = 0; i < regime.size(); ++i) total += cost(static_cast<Eigen::Index>(i), regime[i]);
    return total;
}

void CostModel::validate(Eigen::Index n_plots, Eigen::Index n_arms) const {
    if (cost.rows() != n_plots || cost.cols() != n_arms)
        throw DimensionError(fmt::format("cost matrix is {}x{}, expected {}x{}", cost.rows(),
                                         cost.cols(), n_plots, n_arms));
    if (!cost.allFinite() || (cost.array() < 0.0).any())
        throw ParameterError("costs must be finite and non-negative");
    if (std::isnan(budget) || budget < 0.0) throw ParameterError("budget must be non-negative");
}

std::vector<Vector> fit_per_arm(const ObservedStudy& study) {
    study.validate();
    const int k_arms = std::max(study.n_arms(), 2);
    const auto p = study.covariates_obs.cols();
    std::vector<Vector> coeffs;
    for (Arm k = 0; k < k_arms; ++k) {
        std::vector<Eigen::Index> rows;
        for (int i = 0; i < study.n(); ++i)
            if (study.arm[i] == k) rows.push_back(i);
        const auto nk = static_cast<Eigen::Index>(rows.size());
        if (nk <= p)
            throw FitError(fmt::format("arm {} has {} plots; need more than {}", k, nk, p), k);
        Matrix x(nk, p);
        Vector y(nk);
        for (Eigen::Index r = 0; r < nk; ++r) {
            x.row(r) = study.covariates_obs.row(rows[r]);
            y[r] = study.outcome_obs[rows[r]];
        }
        try {
            coeffs.push_back(least_squares(x, y));
        } catch (const SingularityError& e) {
            throw FitError(fmt::format("arm {}: {}", k, e.what()), k);
        }
    }
    return coeffs;
}

Matrix impute_population(const std::vector<Vector>& coeffs, const Matrix& target_covariates) {
    Matrix out(target_covariates.rows(), static_cast<Eigen::Index>(coeffs.size()));
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
        if (coeffs[k].size() != target_covariates.cols())
            throw DimensionError(fmt::format("arm {} has {} coefficients for {} covariates", k,
                                             coeffs[k].size(), target_covariates.cols()));
        out.col(static_cast<Eigen::Index>(k)) = target_covariates * coeffs[k];
    }
    return out;
}

PolicyRegime optimal_unconstrained(const Matrix& imputed) {
    if (!imputed.allFinite()) throw ParameterError("imputed outcomes must be finite");
    PolicyRegime r;
    r.regime.assign(static_cast<std::size_t>(imputed.rows()), 0);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < imputed.rows(); ++i) {
        Arm best = 0;
        for (Eigen::Index k = 1; k < imputed.cols(); ++k)
            if (imputed(i, k) > imputed(i, best)) best = static_cast<Arm>(k);
        r.regime[i] = best;
        sum += imputed(i, best);
    }
    r.predicted_mean = sum / static_cast<double>(imputed.rows());
    return r;
}

namespace {

std::vector<double> arm_means(const ObservedStudy& study) {
    study.validate();
    const auto counts = study.arm_counts();
    std::vector<double> sums(counts.size(), 0.0);
    for (int i = 0; i < study.n(); ++i) sums[study.arm[i]] += study.outcome_obs[i];
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) throw InsufficientDataError(fmt::format("arm {} is empty", k));
        sums[k] /= counts[k];
    }
    return sums;
}

}  // namespace

PolicyRegime optimal_restricted(const ObservedStudy& study, int n_plots) {
    const auto means = arm_means(study);
    const auto best = std::max_element(means.begin(), means.end());  // first max: lower arm
    PolicyRegime r;
    r.regime.assign(static_cast<std::size_t>(n_plots), static_cast<Arm>(best - means.begin()));
    r.predicted_mean = *best;
    return r;
}

PolicyRegime optimal_restricted(const ObservedStudy& study, const CostModel& costs) {
    const auto means = arm_means(study);
    costs.validate(costs.cost.rows(), static_cast<Eigen::Index>(means.size()));
    const auto n = static_cast<std::size_t>(costs.cost.rows());
    std::optional<Arm> best;
    for (Arm k = 0; k < static_cast<Arm>(means.size()); ++k) {
        if (costs.cost.col(k).sum() > costs.budget) continue;
        if (!best || means[k] > means[*best]) best = k;
    }
    if (!best) throw InfeasibleError("no uniform regime fits within the budget");
    PolicyRegime r;
    r.regime.assign(n, *best);
    r.predicted_mean = means[*best];
    r.total_cost = costs.cost.col(*best).sum();
    r.budget = costs.budget;
    return r;
}

namespace {

struct Increment {
    double efficiency;
    double d_cost;
    double d_value;
    Eigen::Index plot;
    Arm to;
};

struct LpSolution {
    Regime rounded;
    double rounded_value = 0.0;
    double lp_value = 0.0;
};

// Greedy solution of the multiple-choice knapsack LP relaxation: each plot
// starts at its cheapest arm, then moves along the upper concave hull of its
// (cost, value) points in order of decreasing marginal value per unit cost.
// At most one plot ends up fractional; it is rounded down to the cheaper arm.
LpSolution solve_mckp_lp(const Matrix& value, const Matrix& cost, double budget) {
    const auto n = value.rows();
    const auto k_arms = value.cols();
    LpSolution sol;
    sol.rounded.assign(static_cast<std::size_t>(n), 0);
    double spent = 0.0;
    std::vector<Increment> steps;
    std::vector<Arm> order(static_cast<std::size_t>(k_arms));
    std::vector<Arm> hull;

    for (Eigen::Index i = 0; i < n; ++i) {
        for (Arm k = 0; k < k_arms; ++k) order[k] = k;
        std::sort(order.begin(), order.end(), [&](Arm a, Arm b) {
            if (cost(i, a) != cost(i, b)) return cost(i, a) < cost(i, b);
            if (value(i, a) != value(i, b)) return value(i, a) > value(i, b);
            return a < b;
        });
        hull.clear();
        for (Arm k : order) {
            if (!hull.empty() && value(i, k) <= value(i, hull.back())) continue;  // dominated
            while (hull.size() >= 2) {
                const Arm a = hull[hull.size() - 2];
                const Arm b = hull.back();
                // Drop b if it lies on or below the segment a -> k.
                const double lhs = (value(i, b) - value(i, a)) * (cost(i, k) - cost(i, a));
                const double rhs = (value(i, k) - value(i, a)) * (cost(i, b) - cost(i, a));
                if (lhs <= rhs)
                    hull.pop_back();
                else
                    break;
            }
            hull.push_back(k);
        }
        sol.rounded[i] = hull.front();
        spent += cost(i, hull.front());
        sol.rounded_value += value(i, hull.front());
        for (std::size_t h = 1; h < hull.size(); ++h) {
            const double dc = cost(i, hull[h]) - cost(i, hull[h - 1]);
            const double dv = value(i, hull[h]) - value(i, hull[h - 1]);
            steps.push_back({dv / dc, dc, dv, i, hull[h]});
        }
    }
    if (spent > budget)
        throw InfeasibleError(fmt::format(
            "cheapest regime costs {} which exceeds the budget {}", spent, budget));

    std::stable_sort(steps.begin(), steps.end(), [](const Increment& a, const Increment& b) {
        if (a.efficiency != b.efficiency) return a.efficiency > b.efficiency;
        return a.plot < b.plot;
    });
    double remaining = budget - spent;
    sol.lp_value = sol.rounded_value;
    for (const auto& s : steps) {
        if (s.d_cost <= remaining) {
            remaining -= s.d_cost;
            sol.rounded[s.plot] = s.to;
            sol.rounded_value += s.d_value;
            sol.lp_value += s.d_value;
        } else {
            sol.lp_value += s.d_value * (remaining / s.d_cost);
            break;
        }
    }
    return sol;
}

PolicyRegime solve_exact_dp(const Matrix& value, const Matrix& cost, double budget) {
    const auto n = value.rows();
    const auto k_arms = value.cols();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < k_arms; ++k)
            if (cost(i, k) != std::floor(cost(i, k)))
                throw ParameterError("exact budget solver needs integer costs");
    const double cap_d = std::floor(budget);
    if (cap_d * static_cast<double>(n + 1) > 2e8)
        throw SizeLimitError("budget too large for the exact solver");
    const auto cap = static_cast<std::size_t>(cap_d);
    constexpr double kNone = -std::numeric_limits<double>::infinity();

    // best[c] = max total value over processed plots with total cost <= c.
    std::vector<double> best(cap + 1, 0.0), next(cap + 1);
    std::vector<std::int16_t> choice(static_cast<std::size_t>(n) * (cap + 1), -1);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t c = 0; c <= cap; ++c) {
            double v = kNone;
            std::int16_t arg = -1;
            for (Eigen::Index k = 0; k < k_arms; ++k) {
                const auto ck = static_cast<std::size_t>(cost(i, k));
                if (ck > c || best[c - ck] == kNone) continue;
                const double cand = best[c - ck] + value(i, k);
                if (cand > v) {
                    v = cand;
                    arg = static_cast<std::int16_t>(k);
                }
            }
            next[c] = v;
            choice[static_cast<std::size_t>(i) * (cap + 1) + c] = arg;
        }
        std::swap(best, next);
    }
    if (best[cap] == kNone) throw InfeasibleError("no regime fits within the budget");

    PolicyRegime r;
    r.regime.assign(static_cast<std::size_t>(n), 0);
    std::size_t c = cap;
    for (Eigen::Index i = n - 1; i >= 0; --i) {
        const auto k = choice[static_cast<std::size_t>(i) * (cap + 1) + c];
        r.regime[i] = k;
        c -= static_cast<std::size_t>(cost(i, k));
    }
    r.predicted_mean = best[cap] / static_cast<double>(n);
    return r;
}

}  // namespace

PolicyRegime optimal_budgeted(const Matrix& imputed, const CostModel& costs, BudgetSolver solver) {
    if (!imputed.allFinite()) throw ParameterError("imputed outcomes must be finite");
    costs.validate(imputed.rows(), imputed.cols());
    PolicyRegime r;
    if (!costs.has_budget()) {
        r = optimal_unconstrained(imputed);
    } else if (solver == BudgetSolver::ExactDp) {
        r = solve_exact_dp(imputed, costs.cost, costs.budget);
        const auto lp = solve_mckp_lp(imputed, costs.cost, costs.budget);
        r.optimality_gap = lp.lp_value / static_cast<double>(imputed.rows()) - r.predicted_mean;
    } else {
        const auto lp = solve_mckp_lp(imputed, costs.cost, costs.budget);
        r.regime = lp.rounded;
        r.predicted_mean = lp.rounded_value / static_cast<double>(imputed.rows());
        r.optimality_gap = (lp.lp_value - lp.rounded_value) / static_cast<double>(imputed.rows());
    }
    r.total_cost = costs.total_cost(r.regime);
    r.budget = costs.budget;
    return r;
}

double budgeted_lp_bound(const Matrix& imputed, const CostModel& costs) {
    costs.validate(imputed.rows(), imputed.cols());
    if (!costs.has_budget()) return optimal_unconstrained(imputed).predicted_mean;
    return solve_mckp_lp(imputed, costs.cost, costs.budget).lp_value /
           static_cast<double>(imputed.rows());
}

double realized_value(const Population& pop, const PolicyRegime& regime) {
    return papo(pop, regime.regime);
}

void write_regime_csv(std::ostream& out, const PolicyRegime& regime) {
    csv::write_row(out, {"plot_id", "arm"});
    for (std::size_t i = 0; i < regime.regime.size(); ++i)
        csv::write_row(out, {std::to_string(i + 1), std::to_string(regime.regime[i])});
}

std::string regime_summary_json(const PolicyRegime& regime) {
    auto num = [](double v) -> nlohmann::json {
        if (std::isfinite(v)) return v;
        return nullptr;
    };
    nlohmann::ordered_json j;
    j["predicted_mean"] = regime.predicted_mean;
    j["realized_mean"] = regime.realized_mean ? num(*regime.realized_mean) : nullptr;
    j["total_cost"] = regime.total_cost;
    j["budget"] = num(regime.budget);
    j["optimality_gap"] = regime.optimality_gap;
    return j.dump(2);
}

Matrix read_covariates_csv(std::istream& in) {
    const auto table = csv::read(in);
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (table.header[c] != "plot_id") cols.push_back(c);
    if (cols.empty()) throw ParseError("covariate CSV has no covariate columns", 1);
    const auto n = static_cast<Eigen::Index>(table.rows.size());
    Matrix x(n, static_cast<Eigen::Index>(cols.size()) + 1);
    x.col(0).setOnes();
    for (Eigen::Index i = 0; i < n; ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const double v = csv::parse_double(table.rows[i][cols[j]], static_cast<std::size_t>(i) + 2,
                                               table.header[cols[j]]);
            if (!std::isfinite(v))
                throw ParseError("covariates must be finite", static_cast<int>(i) + 2);
            x(i, static_cast<Eigen::Index>(j) + 1) = v;
        }
    return x;
}

Matrix read_costs_csv(std::istream& in) {
    const auto table = csv::read(in);
    std::vector<std::size_t> cols;
    for (int k = 0;; ++k) {
        auto c = table.column(fmt::format("cost{}", k));
        if (!c) break;
        cols.push_back(*c);
    }
    if (cols.size() < 2) throw ParseError("cost CSV needs columns cost0 and cost1", 1);
    const auto n = static_cast<Eigen::Index>(table.rows.size());
    Matrix c(n, static_cast<Eigen::Index>(cols.size()));
    for (Eigen::Index i = 0; i < n; ++i)
        for (std::size_t k = 0; k < cols.size(); ++k)
            c(i, static_cast<Eigen::Index>(k)) = csv::parse_double(
                table.rows[i][cols[k]], static_cast<std::size_t>(i) + 2, table.header[cols[k]]);
    return c;
}

}  // namespace rct

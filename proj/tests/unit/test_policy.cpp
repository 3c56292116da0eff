#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

#include "rct/design.hpp"
#include "rct/error.hpp"
#include "rct/estimators.hpp"
#include "rct/policy.hpp"
#include "rct/population.hpp"

using namespace rct;

namespace {

struct Brute {
    double value = -1e300;
    Regime regime;
    bool feasible = false;
};

// Enumerates all K^N regimes.
Brute exhaustive(const Matrix& value, const Matrix& cost, double budget) {
    const auto n = static_cast<int>(value.rows());
    const auto k = static_cast<int>(value.cols());
    Brute best;
    Regime z(n, 0);
    while (true) {
        double v = 0, c = 0;
        for (int i = 0; i < n; ++i) {
            v += value(i, z[i]);
            c += cost(i, z[i]);
        }
        if (c <= budget + 1e-9 && v > best.value) {
            best.value = v;
            best.regime = z;
            best.feasible = true;
        }
        int pos = 0;
        while (pos < n && ++z[pos] == k) z[pos++] = 0;
        if (pos == n) break;
    }
    best.value /= n;
    return best;
}

Population policy_population(double beta, std::uint64_t seed) {
    PopulationParams p;
    p.tau = 0.3 / 0.66;
    p.beta_mod = beta;
    p.sd_eps1 = std::sqrt(0.1);
    return generate_population(p, seed);
}

}  // namespace

TEST_CASE("fit_per_arm") {
    SUBCASE("intercept-only constant arms") {
        ObservedStudy s;
        s.outcome_obs = Vector(6);
        s.outcome_obs << 2, 2, 2, 5, 5, 5;
        s.baseline_obs = Vector::Zero(6);
        s.arm = {0, 0, 0, 1, 1, 1};
        s.covariates_obs = Matrix::Ones(6, 1);
        s.source_index.assign(6, -1);
        const auto c = fit_per_arm(s);
        REQUIRE(c.size() == 2);
        CHECK(c[0][0] == doctest::Approx(2.0));
        CHECK(c[1][0] == doctest::Approx(5.0));
    }
    SUBCASE("noise-free linear outcomes are recovered") {
        Vector b(8);
        b << 1, 2, 3, 4, 5, 6, 7, 8;
        std::vector<Arm> z{0, 1, 0, 1, 0, 1, 0, 1};
        Vector y(8);
        for (int i = 0; i < 8; ++i) y[i] = z[i] ? 1.0 - 0.5 * b[i] : 0.2 + 2.0 * b[i];
        const auto c = fit_per_arm(ObservedStudy::from_columns(b, y, z));
        CHECK(c[0][0] == doctest::Approx(0.2));
        CHECK(c[0][1] == doctest::Approx(2.0));
        CHECK(c[1][0] == doctest::Approx(1.0));
        CHECK(c[1][1] == doctest::Approx(-0.5));
    }
    SUBCASE("slope difference equals the interaction coefficient") {
        const auto pop = policy_population(-0.5, 3);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto s = enroll_and_assign(pop, DesignSpec::balanced(30, 5), seed);
            const auto c = fit_per_arm(s);
            const auto r = ols_interaction(s, 0.05, {.standardize_covariates = false});
            CHECK(std::abs((c[1][1] - c[0][1]) - r.fit.coeffs[3]) < 1e-8);
        }
    }
    SUBCASE("undersized or singular arm names the arm") {
        auto s = ObservedStudy::from_columns(Vector::LinSpaced(5, 1, 5), Vector::LinSpaced(5, 1, 5),
                                             {0, 0, 0, 1, 1});
        try {
            (void)fit_per_arm(s);
            FAIL("expected FitError");
        } catch (const FitError& e) {
            CHECK(e.arm() == 1);
        }
        Vector b(6);
        b << 1, 2, 3, 4, 4, 4;
        s = ObservedStudy::from_columns(b, Vector::LinSpaced(6, 1, 6), {0, 0, 0, 1, 1, 1});
        try {
            (void)fit_per_arm(s);
            FAIL("expected FitError");
        } catch (const FitError& e) {
            CHECK(e.arm() == 1);
        }
    }
}

TEST_CASE("impute_population") {
    Matrix x(3, 2);
    x << 1, 2, 1, 0, 1, 1;
    Vector b0(2), b1(2);
    b0 << 0, 0;
    b1 << 1, 1;
    const Matrix m = impute_population({b0, b1}, x);
    CHECK(m.col(0).isZero());
    CHECK(m(0, 1) == 3.0);
    CHECK(m(1, 1) == 1.0);
    CHECK(m(2, 1) == 2.0);

    Vector a(1), c(1);
    a << 1.5;
    c << -2.0;
    const Matrix k = impute_population({a, c}, Matrix::Ones(4, 1));
    CHECK((k.col(0).array() == 1.5).all());
    CHECK((k.col(1).array() == -2.0).all());
    CHECK_THROWS_AS(impute_population({a, c}, x), DimensionError);
}

TEST_CASE("optimal_unconstrained") {
    Matrix m(2, 2);
    m << 1, 2, 3, 0;
    const auto r = optimal_unconstrained(m);
    CHECK(r.regime == Regime{1, 0});
    CHECK(r.predicted_mean == 2.5);

    const Matrix same = Matrix::Constant(5, 2, 1.0);
    CHECK(optimal_unconstrained(same).regime == Regime(5, 0));

    Matrix dom(4, 2);
    dom.col(0) << 1, 2, 3, 4;
    dom.col(1) = dom.col(0).array() + 0.1;
    CHECK(optimal_unconstrained(dom).regime == Regime(4, 1));
}

TEST_CASE("unconstrained optimum dominates every uniform regime") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int t = 0; t < 100; ++t) {
        Matrix m(20, 3);
        for (int i = 0; i < 20; ++i)
            for (int k = 0; k < 3; ++k) m(i, k) = g(rng);
        const double best = optimal_unconstrained(m).predicted_mean;
        for (int k = 0; k < 3; ++k) CHECK(best >= m.col(k).mean() - 1e-15);
    }
}

TEST_CASE("optimal_restricted") {
    auto s = ObservedStudy::from_columns(Vector::Zero(4), Vector::Zero(4), {0, 0, 1, 1});
    s.outcome_obs << 2.0, 2.0, 2.4, 2.4;
    CHECK(optimal_restricted(s, 7).regime == Regime(7, 1));
    s.outcome_obs << 2.0, 2.0, 2.0, 2.0;
    CHECK(optimal_restricted(s, 7).regime == Regime(7, 0));

    ObservedStudy empty = ObservedStudy::from_columns(Vector::Zero(3), Vector::Zero(3), {0, 0, 0});
    empty.arm = {0, 0, 2};
    CHECK_THROWS(optimal_restricted(empty, 3));
}

TEST_CASE("restricted regime treats everyone with large n and positive effect") {
    const auto pop = policy_population(0.0, 9);
    int treat = 0;
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
        const auto s = enroll_and_assign(pop, DesignSpec::balanced(1000, 5), r);
        treat += optimal_restricted(s, pop.n_plots()).regime[0] == 1 ? 1 : 0;
    }
    CHECK(treat / double(reps) >= 0.99);
}

TEST_CASE("budgeted regime hand cases") {
    SUBCASE("infinite budget reduces to unconstrained") {
        Matrix m(3, 2);
        m << 1, 2, 3, 0, 1, 1.5;
        const auto costs = CostModel::uniform(3, 2, 1.0, std::numeric_limits<double>::infinity());
        const auto a = optimal_budgeted(m, costs);
        CHECK(a.regime == optimal_unconstrained(m).regime);
        CHECK(a.predicted_mean == optimal_unconstrained(m).predicted_mean);
    }
    SUBCASE("equal effects with unit costs treat floor(budget) plots") {
        const int n = 10;
        Matrix m(n, 2);
        m.col(0) = Vector::LinSpaced(n, 0, 1);
        m.col(1) = m.col(0).array() + 0.4;
        for (double budget : {0.0, 2.5, 7.0, 20.0}) {
            const auto r = optimal_budgeted(m, CostModel::uniform(n, 2, 1.0, budget));
            const double expected = m.col(0).mean() + std::min<double>(std::floor(budget), n) * 0.4 / n;
            CHECK(r.predicted_mean == doctest::Approx(expected).epsilon(1e-12));
            CHECK(r.total_cost <= budget);
        }
    }
    SUBCASE("N=3 exhaustive hand instance") {
        Matrix m(3, 2);
        m << 0, 3, 0, 2, 0, 1;
        const auto costs = CostModel::uniform(3, 2, 1.0, 2.0);
        for (auto solver : {BudgetSolver::LpRounding, BudgetSolver::ExactDp}) {
            const auto r = optimal_budgeted(m, costs, solver);
            CHECK(r.regime == Regime{1, 1, 0});
            CHECK(r.predicted_mean == doctest::Approx(5.0 / 3.0));
            CHECK(r.total_cost == 2.0);
        }
    }
    SUBCASE("zero budget with free control is all control") {
        Matrix m(4, 2);
        m << 0, 1, 0, 2, 0, 3, 0, 4;
        const auto r = optimal_budgeted(m, CostModel::uniform(4, 2, 1.0, 0.0));
        CHECK(r.regime == Regime(4, 0));
    }
    SUBCASE("infeasible budget") {
        Matrix m = Matrix::Zero(3, 2);
        CostModel c;
        c.cost = Matrix::Ones(3, 2);
        c.budget = 2.0;
        CHECK_THROWS_AS(optimal_budgeted(m, c), InfeasibleError);
        CHECK_THROWS_AS(optimal_budgeted(m, c, BudgetSolver::ExactDp), InfeasibleError);
    }
    SUBCASE("exact solver needs integer costs") {
        Matrix m = Matrix::Zero(2, 2);
        CHECK_THROWS_AS(optimal_budgeted(m, CostModel::uniform(2, 2, 0.5, 1.0), BudgetSolver::ExactDp),
                        ParameterError);
    }
}

TEST_CASE("budgeted solvers against exhaustive search on random instances") {
    std::mt19937_64 rng(20230917);
    std::uniform_int_distribution<int> n_dist(1, 12), k_dist(2, 3), cost_dist(0, 5);
    std::normal_distribution<double> g;
    int instances = 0, dp_matches = 0, lp_feasible = 0, lp_bounded = 0;
    while (instances < 1000) {
        const int n = n_dist(rng);
        const int k = k_dist(rng);
        if (std::pow(k, n) > 600000) continue;
        Matrix value(n, k), cost(n, k);
        for (int i = 0; i < n; ++i)
            for (int a = 0; a < k; ++a) {
                value(i, a) = g(rng);
                cost(i, a) = a == 0 ? 0.0 : cost_dist(rng);
            }
        const double total_max = cost.rowwise().maxCoeff().sum();
        const double budget = std::floor(std::uniform_real_distribution<double>(0, total_max + 1)(rng));
        CostModel costs{cost, budget};
        const auto brute = exhaustive(value, cost, budget);
        ++instances;

        const auto dp = optimal_budgeted(value, costs, BudgetSolver::ExactDp);
        if (std::abs(dp.predicted_mean - brute.value) < 1e-12 && dp.total_cost <= budget) ++dp_matches;

        const auto lp = optimal_budgeted(value, costs, BudgetSolver::LpRounding);
        const double bound = budgeted_lp_bound(value, costs);
        if (lp.total_cost <= budget && lp.predicted_mean <= brute.value + 1e-12) ++lp_feasible;
        double max_gap = 0;
        for (int i = 0; i < n; ++i) max_gap = std::max(max_gap, value.row(i).maxCoeff() - value.row(i).minCoeff());
        if (bound >= brute.value - 1e-12 && bound - lp.predicted_mean <= k * max_gap / n + 1e-12 &&
            std::abs(lp.optimality_gap - (bound - lp.predicted_mean)) < 1e-12)
            ++lp_bounded;
    }
    CHECK(dp_matches == 1000);
    CHECK(lp_feasible == 1000);
    CHECK(lp_bounded == 1000);
}

TEST_CASE("oracle regime upper-bounds estimated regimes") {
    const auto pop = policy_population(-0.5, 4);
    const double oracle = papo(pop, oracle_regime(pop));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = enroll_and_assign(pop, DesignSpec::balanced(100, 30), seed);
        const auto est = optimal_unconstrained(impute_population(fit_per_arm(s), pop.covariates()));
        CHECK(realized_value(pop, est) <= oracle);
        CHECK(realized_value(pop, optimal_restricted(s, pop.n_plots())) <= oracle);
    }
}

TEST_CASE("regime outputs") {
    PolicyRegime r;
    r.regime = {0, 1, 1};
    r.predicted_mean = 2.5;
    r.total_cost = 2;
    r.budget = 2;
    std::ostringstream csv;
    write_regime_csv(csv, r);
    CHECK(csv.str() == "plot_id,arm\n1,0\n2,1\n3,1\n");

    const auto j = nlohmann::json::parse(regime_summary_json(r));
    CHECK(j["predicted_mean"] == 2.5);
    CHECK(j["realized_mean"].is_null());
    CHECK(j["budget"] == 2.0);
    r.budget = std::numeric_limits<double>::infinity();
    CHECK(nlohmann::json::parse(regime_summary_json(r))["budget"].is_null());
}

TEST_CASE("covariate and cost CSV readers") {
    std::istringstream cov("plot_id,baseline\n1,2.5\n2,3\n");
    const Matrix x = read_covariates_csv(cov);
    CHECK(x.rows() == 2);
    CHECK(x.cols() == 2);
    CHECK(x(0, 0) == 1.0);
    CHECK(x(1, 1) == 3.0);
    std::istringstream cost("plot_id,cost0,cost1\n1,0,1.5\n2,0,2\n");
    const Matrix c = read_costs_csv(cost);
    CHECK(c(0, 1) == 1.5);
    CHECK(c(1, 1) == 2.0);
}

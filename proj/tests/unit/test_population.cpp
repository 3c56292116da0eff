#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rct/error.hpp"
#include "rct/population.hpp"

using namespace rct;

namespace {

Population two_by_two(double a, double b, double c, double d) {
    Vector base(2);
    base << 0.0, 1.0;
    Matrix po(2, 2);
    po << a, b, c, d;
    return Population(base, po);
}

PopulationParams table1() {
    PopulationParams p;
    p.mu_b = 2.34;
    p.sd_b_across = 0.47;
    p.mean_control_change = 0.16;
    p.sd_control_change = 0.14;
    return p;
}

}  // namespace

TEST_CASE("generated baseline mean is near mu_b") {
    const auto pop = generate_population(table1(), 1);
    CHECK(pop.n_plots() == 5000);
    CHECK(pop.n_arms() == 2);
    CHECK(std::abs(pop.baseline().mean() - 2.34) < 3 * 0.47 / std::sqrt(5000.0));
    CHECK((pop.covariates().col(0).array() == 1.0).all());
    CHECK((pop.covariates().col(1) - pop.baseline()).norm() == 0.0);
}

TEST_CASE("null effect gives identical potential outcome columns") {
    const auto pop = generate_population(table1(), 2);
    CHECK((pop.potential_outcomes().col(1).array() == pop.potential_outcomes().col(0).array()).all());
}

TEST_CASE("degenerate control noise shifts baseline by the mean change") {
    auto p = table1();
    p.sd_control_change = 0.0;
    const auto pop = generate_population(p, 3);
    const Vector diff = pop.potential_outcomes().col(0) - pop.baseline();
    CHECK((diff.array() - 0.16).abs().maxCoeff() < 1e-14);
}

TEST_CASE("generator is reproducible and seed sensitive") {
    auto p = table1();
    p.tau = 0.2;
    p.beta_mod = -0.5;
    p.sd_eps1 = std::sqrt(0.1);
    const auto a = generate_population(p, 99);
    const auto b = generate_population(p, 99);
    const auto c = generate_population(p, 100);
    CHECK(a.potential_outcomes() == b.potential_outcomes());
    CHECK(a.baseline() == b.baseline());
    CHECK(a.baseline() != c.baseline());
}

TEST_CASE("moderator slope follows the standardized baseline") {
    auto p = table1();
    p.beta_mod = -0.5;
    const auto pop = generate_population(p, 5);
    const Vector ite = pop.potential_outcomes().col(1) - pop.potential_outcomes().col(0);
    const Vector z = standardize_population(pop.baseline());
    CHECK((ite + 0.5 * z).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(z.mean() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::sqrt(z.squaredNorm() / z.size()) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(population_moderator_effect(pop) == doctest::Approx(-0.5).epsilon(1e-10));
}

TEST_CASE("invalid parameters are rejected") {
    auto p = table1();
    p.sd_b_across = 0.0;
    CHECK_THROWS_AS(generate_population(p, 1), ParameterError);
    p = table1();
    p.sd_eps1 = -1.0;
    CHECK_THROWS_AS(generate_population(p, 1), ParameterError);
    p = table1();
    p.sd_control_change = -0.1;
    CHECK_THROWS_AS(generate_population(p, 1), ParameterError);
}

TEST_CASE("papo hand cases") {
    const auto pop = two_by_two(1, 3, 2, 4);
    const Regime r10{1, 0}, r01{0, 1};
    CHECK(papo(pop, r10) == 2.5);
    CHECK(papo(pop, r01) == 2.5);
    const Regime wrong{0};
    CHECK_THROWS_AS(papo(pop, wrong), DimensionError);

    Vector base = Vector::Zero(4);
    Matrix po = Matrix::Constant(4, 2, 2.0);
    const Population flat(base, po);
    const Regime zeros(4, 0);
    CHECK(papo(flat, zeros) == 2.0);
}

TEST_CASE("papo of any regime lies between per-plot extremes") {
    auto p = table1();
    p.tau = 0.3;
    p.beta_mod = -0.5;
    p.sd_eps1 = 0.3;
    p.n_plots = 200;
    const auto pop = generate_population(p, 8);
    const Matrix& po = pop.potential_outcomes();
    const double lo = po.rowwise().minCoeff().mean();
    const double hi = po.rowwise().maxCoeff().mean();
    Regime r(200);
    for (int i = 0; i < 200; ++i) r[i] = (i * 7) % 2;
    const double v = papo(pop, r);
    CHECK(v >= lo);
    CHECK(v <= hi);
    CHECK(papo(pop, oracle_regime(pop)) == doctest::Approx(hi).epsilon(1e-14));
}

TEST_CASE("pate hand cases") {
    CHECK(pate(two_by_two(1, 3, 2, 2), 1) == 1.0);
    CHECK(pate(two_by_two(1, 3, 2, 2), 0) == 0.0);

    Vector base = Vector::LinSpaced(5, 1, 2);
    Matrix po(5, 2);
    po.col(0) = base;
    po.col(1) = base.array() + 0.3;
    CHECK(pate(Population(base, po), 1) == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("pate of a constant-shift generated population equals tau") {
    auto p = table1();
    p.tau = 0.1 / 0.66;
    const auto pop = generate_population(p, 4);
    CHECK(std::abs(pate(pop, 1) - 0.1 / 0.66) < 1e-12);
    CHECK(pate(pop, 0) == 0.0);
}

TEST_CASE("population OLS coefficients") {
    SUBCASE("intercept only gives the column mean") {
        Vector base(3);
        base << 1, 2, 3;
        Matrix po(3, 2);
        po << 1, 4, 2, 5, 6, 9;
        const Population pop(base, po, Matrix::Ones(3, 1));
        CHECK(population_ols_coeffs(pop, 0)[0] == doctest::Approx(3.0));
        CHECK(population_ols_coeffs(pop, 1)[0] == doctest::Approx(6.0));
    }
    SUBCASE("hand case: slope 1, intercept 0") {
        Vector base(3);
        base << 1, 2, 3;
        Matrix po(3, 2);
        po << 1, 0, 2, 0, 3, 0;
        const auto beta = population_ols_coeffs(Population(base, po), 0);
        CHECK(beta[0] == doctest::Approx(0.0).epsilon(1e-12).scale(1));
        CHECK(beta[1] == doctest::Approx(1.0));
    }
    SUBCASE("residuals sum to zero") {
        auto p = table1();
        p.tau = 0.2;
        p.beta_mod = -0.1;
        p.sd_eps1 = 0.3;
        const auto pop = generate_population(p, 12);
        for (Arm k : {0, 1}) {
            const Vector beta = population_ols_coeffs(pop, k);
            const Vector e = pop.potential_outcomes().col(k) - pop.covariates() * beta;
            CHECK(std::abs(e.sum()) < 1e-10 * pop.potential_outcomes().col(k).cwiseAbs().sum());
        }
    }
    SUBCASE("rank deficient covariates") {
        Vector base = Vector::Ones(4);
        Matrix po = Matrix::Ones(4, 2);
        CHECK_THROWS_AS(population_ols_coeffs(Population(base, po), 0), SingularityError);
    }
}

TEST_CASE("population validation") {
    Vector base(2);
    base << 1, 2;
    CHECK_THROWS_AS(Population(base, Matrix::Ones(3, 2)), DimensionError);
    CHECK_THROWS_AS(Population(base, Matrix::Ones(2, 1)), DimensionError);
    Matrix bad = Matrix::Ones(2, 2);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(Population(base, bad), ParameterError);
    Matrix cov = Matrix::Ones(2, 2);
    cov(0, 0) = 0.0;
    CHECK_THROWS_AS(Population(base, Matrix::Ones(2, 2), cov), ParameterError);
}

TEST_CASE("population CSV round trip is exact") {
    auto p = table1();
    p.tau = 0.1;
    p.beta_mod = -0.5;
    p.sd_eps1 = 0.2;
    p.n_plots = 50;
    const auto pop = generate_population(p, 21);
    std::stringstream ss;
    write_population_csv(ss, pop);
    CHECK(ss.str().rfind("plot_id,baseline,y0,y1\n", 0) == 0);
    const auto back = read_population_csv(ss);
    CHECK(back.baseline() == pop.baseline());
    CHECK(back.potential_outcomes() == pop.potential_outcomes());
}

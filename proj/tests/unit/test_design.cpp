#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "rct/design.hpp"
#include "rct/error.hpp"
#include "rct/population.hpp"

using namespace rct;

namespace {

Population small_population(int n, std::uint64_t seed = 1) {
    PopulationParams p;
    p.tau = 0.2;
    p.beta_mod = -0.3;
    p.sd_eps1 = 0.1;
    p.n_plots = n;
    return generate_population(p, seed);
}

}  // namespace

TEST_CASE("measurement sd") {
    CHECK(DesignSpec::balanced(10, 5).measurement_sd() == doctest::Approx(1.02 / std::sqrt(5.0)));
    CHECK(DesignSpec::balanced(10, std::nullopt).measurement_sd() == 0.0);
}

TEST_CASE("census without noise returns a permutation of the baseline") {
    const auto pop = small_population(40);
    const auto study = enroll_and_assign(pop, DesignSpec::balanced(40, std::nullopt), 5);
    std::vector<double> a(study.baseline_obs.begin(), study.baseline_obs.end());
    std::vector<double> b(pop.baseline().begin(), pop.baseline().end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
    for (int i = 0; i < study.n(); ++i) {
        const int s = study.source_index[i];
        CHECK(study.baseline_obs[i] == pop.baseline()[s]);
        CHECK(study.outcome_obs[i] == pop.outcome(s, study.arm[i]));
    }
}

TEST_CASE("arm sizes are fixed in every draw") {
    const auto pop = small_population(100);
    DesignSpec spec{10, {5, 5}, 30, 1.02};
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto study = enroll_and_assign(pop, spec, seed);
        CHECK(study.arm_counts() == std::vector<int>{5, 5});
        std::set<int> distinct(study.source_index.begin(), study.source_index.end());
        CHECK(distinct.size() == 10);
    }
}

TEST_CASE("balanced design puts floor(n/2) in treatment") {
    const auto spec = DesignSpec::balanced(11, 5);
    CHECK(spec.arm_sizes == std::vector<int>{6, 5});
}

TEST_CASE("inclusion and treatment probabilities") {
    const auto pop = small_population(4);
    DesignSpec spec{2, {1, 1}, std::nullopt, 1.02};
    std::vector<int> included(4, 0), treated(4, 0);
    const int draws = 10000;
    for (int s = 0; s < draws; ++s) {
        const auto study = enroll_and_assign(pop, spec, static_cast<std::uint64_t>(s) * 7919 + 1);
        for (int i = 0; i < study.n(); ++i) {
            ++included[study.source_index[i]];
            if (study.arm[i] == 1) ++treated[study.source_index[i]];
        }
    }
    for (int i = 0; i < 4; ++i) {
        CHECK(std::abs(included[i] / double(draws) - 0.5) < 0.02);
        CHECK(std::abs(treated[i] / double(included[i]) - 0.5) < 0.03);
    }
}

TEST_CASE("measurement noise has the configured sd") {
    const auto pop = small_population(2000);
    const auto study = enroll_and_assign(pop, DesignSpec::balanced(2000, 5), 17);
    double ss = 0.0;
    for (int i = 0; i < study.n(); ++i) {
        const double d = study.baseline_obs[i] - pop.baseline()[study.source_index[i]];
        ss += d * d;
    }
    const double sd = std::sqrt(ss / study.n());
    CHECK(sd == doctest::Approx(1.02 / std::sqrt(5.0)).epsilon(0.05));
}

TEST_CASE("enrollment and design errors") {
    const auto pop = small_population(5);
    CHECK_THROWS_AS(enroll_and_assign(pop, DesignSpec::balanced(6, 5), 1), EnrollmentError);
    DesignSpec bad{4, {1, 2}, 5, 1.02};
    CHECK_THROWS_AS(enroll_and_assign(pop, bad, 1), DesignError);
    DesignSpec empty_arm{4, {4, 0}, 5, 1.02};
    CHECK_THROWS_AS(enroll_and_assign(pop, empty_arm, 1), DesignError);
}

TEST_CASE("assignment enumeration") {
    using V = std::vector<Arm>;
    SUBCASE("n=2, n1=1") {
        const auto all = AssignmentEnumeration::all(2, 1);
        CHECK(all.size() == 2);
        CHECK(std::set<V>(all.begin(), all.end()) == std::set<V>{{1, 0}, {0, 1}});
    }
    SUBCASE("n=4, n1=2") {
        const auto all = AssignmentEnumeration::all(4, 2);
        CHECK(all.size() == 6);
        CHECK(std::set<V>(all.begin(), all.end()).size() == 6);
        for (const auto& a : all) CHECK(std::count(a.begin(), a.end(), 1) == 2);
    }
    SUBCASE("n=3, n1=3") {
        const auto all = AssignmentEnumeration::all(3, 3);
        CHECK(all == std::vector<V>{{1, 1, 1}});
    }
    SUBCASE("counts are binomial coefficients") {
        CHECK(AssignmentEnumeration::all(12, 6).size() == 924);
        CHECK(AssignmentEnumeration::all(8, 3).size() == 56);
    }
    SUBCASE("size limit") {
        CHECK_THROWS_AS(AssignmentEnumeration(13, 6), SizeLimitError);
    }
}

TEST_CASE("exhaustive enumeration makes DiM-style contrasts unbiased for the SATE") {
    const auto pop = small_population(50, 3);
    const auto study = enroll_and_assign(pop, DesignSpec::balanced(8, std::nullopt), 9);
    const double sate = sample_ate(pop, study);
    double total = 0.0;
    int count = 0;
    for (const auto& z : AssignmentEnumeration::all(8, 4)) {
        double m1 = 0, m0 = 0;
        for (int i = 0; i < 8; ++i) {
            const double y = pop.outcome(study.source_index[i], z[i]);
            (z[i] ? m1 : m0) += y / 4.0;
        }
        total += m1 - m0;
        ++count;
    }
    CHECK(total / count == doctest::Approx(sate).epsilon(1e-12));
}

TEST_CASE("study CSV round trip") {
    const auto pop = small_population(60);
    const auto study = enroll_and_assign(pop, DesignSpec::balanced(12, 5), 2);
    std::stringstream ss;
    write_study_csv(ss, study);
    CHECK(ss.str().rfind("plot_id,source_index,arm,baseline_obs,outcome_obs\n", 0) == 0);
    const auto back = read_study_csv(ss);
    CHECK(back.baseline_obs == study.baseline_obs);
    CHECK(back.outcome_obs == study.outcome_obs);
    CHECK(back.arm == study.arm);
    CHECK(back.source_index == study.source_index);
    CHECK(back.covariates_obs == study.covariates_obs);
}

TEST_CASE("study CSV schema errors carry a line") {
    std::stringstream dup("plot_id,source_index,arm,baseline_obs,outcome_obs\n1,3,0,1,1\n2,3,1,1,1\n");
    try {
        (void)read_study_csv(dup);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    std::stringstream missing("plot_id,arm,baseline_obs\n1,0,1\n");
    CHECK_THROWS_AS(read_study_csv(missing), ParseError);
    std::stringstream bad("plot_id,source_index,arm,baseline_obs,outcome_obs\n1,1,0,abc,1\n");
    CHECK_THROWS_AS(read_study_csv(bad), ParseError);
}

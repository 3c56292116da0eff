#include "rct/population.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "rct/csv.hpp"
#include "rct/error.hpp"
#include "rct/rng.hpp"

namespace rct {

void PopulationParams::validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(mu_b) || !finite(mean_control_change) || !finite(tau) || !finite(beta_mod))
        throw ParameterError("population parameters must be finite");
    if (!(sd_b_across > 0.0) || !finite(sd_b_across))
        throw ParameterError("sd_b_across must be positive");
    if (!(sd_control_change >= 0.0) || !finite(sd_control_change))
        throw ParameterError("sd_control_change must be non-negative");
    if (!(sd_eps1 >= 0.0) || !finite(sd_eps1)) throw ParameterError("sd_eps1 must be non-negative");
    if (n_plots < 2) throw ParameterError("n_plots must be at least 2");
}

namespace {

Matrix default_covariates(const Vector& baseline) {
    Matrix x(baseline.size(), 2);
    x.col(0).setOnes();
    x.col(1) = baseline;
    return x;
}

}  // namespace

Population::Population(Vector baseline, Matrix potential_outcomes)
    : Population(baseline, std::move(potential_outcomes), default_covariates(baseline)) {}

Population::Population(Vector baseline, Matrix potential_outcomes, Matrix covariates)
    : baseline_(std::move(baseline)), po_(std::move(potential_outcomes)),
      covariates_(std::move(covariates)) {
    const auto n = baseline_.size();
    if (n < 2) throw ParameterError("population needs at least 2 plots");
    if (po_.rows() != n)
        throw DimensionError(fmt::format("potential outcomes have {} rows for {} plots",
                                         po_.rows(), n));
    if (po_.cols() < 2) throw DimensionError("population needs at least 2 arms");
    if (covariates_.rows() != n || covariates_.cols() < 1)
        throw DimensionError("covariate matrix must be N x p with p >= 1");
    if (!po_.allFinite() || !baseline_.allFinite() || !covariates_.allFinite())
        throw ParameterError("population values must be finite");
    if (!(covariates_.col(0).array() == 1.0).all())
        throw ParameterError("first covariate column must be identically 1");
}

Vector standardize_population(const Vector& values) {
    const double mean = values.mean();
    const Vector centered = values.array() - mean;
    const double sd = std::sqrt(centered.squaredNorm() / static_cast<double>(values.size()));
    if (!(sd > 0.0)) throw ParameterError("cannot standardize a constant vector");
    return centered / sd;
}

Population generate_population(const PopulationParams& params, std::uint64_t seed) {
    params.validate();
    const int n = params.n_plots;
    Rng rng(seed);

    auto draw = [&rng](double mean, double sd) {
        if (sd == 0.0) return mean;
        std::normal_distribution<double> dist(mean, sd);
        return dist(rng);
    };

    Vector b(n);
    for (int i = 0; i < n; ++i) b[i] = draw(params.mu_b, params.sd_b_across);
    Matrix po(n, 2);
    for (int i = 0; i < n; ++i)
        po(i, 0) = b[i] + draw(params.mean_control_change, params.sd_control_change);

    const Vector b_std = standardize_population(b);
    for (int i = 0; i < n; ++i)
        po(i, 1) = po(i, 0) + params.tau + params.beta_mod * b_std[i] + draw(0.0, params.sd_eps1);

    return Population(std::move(b), std::move(po));
}

double papo(const Population& pop, std::span<const Arm> regime) {
    if (static_cast<int>(regime.size()) != pop.n_plots())
        throw DimensionError(fmt::format("regime has length {} for {} plots", regime.size(),
                                         pop.n_plots()));
    double sum = 0.0;
    for (int i = 0; i < pop.n_plots(); ++i) {
        const Arm a = regime[i];
        if (a < 0 || a >= pop.n_arms())
            throw ParameterError(fmt::format("regime entry {} is not a valid arm", a));
        sum += pop.outcome(i, a);
    }
    return sum / pop.n_plots();
}

double pate(const Population& pop, Arm arm) {
    if (arm < 0 || arm >= pop.n_arms())
        throw ParameterError(fmt::format("arm {} out of range", arm));
    if (arm == 0) return 0.0;
    const auto& po = pop.potential_outcomes();
    return (po.col(arm) - po.col(0)).mean();
}

Vector population_ols_coeffs(const Population& pop, Arm arm) {
    if (arm < 0 || arm >= pop.n_arms())
        throw ParameterError(fmt::format("arm {} out of range", arm));
    return least_squares(pop.covariates(), pop.potential_outcomes().col(arm));
}

double population_moderator_effect(const Population& pop, Arm arm, int covariate) {
    if (covariate < 1 || covariate >= pop.n_covariates())
        throw ParameterError("moderator covariate must be a non-intercept column");
    const Vector slope_gap = population_ols_coeffs(pop, arm) - population_ols_coeffs(pop, 0);
    const Vector x = pop.covariates().col(covariate);
    const double sd = std::sqrt((x.array() - x.mean()).square().mean());
    return slope_gap[covariate] * sd;
}

Regime oracle_regime(const Population& pop) {
    Regime z(pop.n_plots(), 0);
    const auto& po = pop.potential_outcomes();
    for (int i = 0; i < pop.n_plots(); ++i) {
        Arm best = 0;
        for (Arm k = 1; k < pop.n_arms(); ++k)
            if (po(i, k) > po(i, best)) best = k;
        z[i] = best;
    }
    return z;
}

void write_population_csv(std::ostream& out, const Population& pop) {
    std::vector<std::string> header{"plot_id", "baseline"};
    for (int k = 0; k < pop.n_arms(); ++k) header.push_back(fmt::format("y{}", k));
    csv::write_row(out, header);
    std::vector<std::string> row;
    for (int i = 0; i < pop.n_plots(); ++i) {
        row.clear();
        row.push_back(std::to_string(i + 1));
        row.push_back(csv::format_double(pop.baseline()[i]));
        for (int k = 0; k < pop.n_arms(); ++k) row.push_back(csv::format_double(pop.outcome(i, k)));
        csv::write_row(out, row);
    }
}

Population read_population_csv(std::istream& in) {
    const auto table = csv::read(in);
    const auto base_col = table.require_column("baseline");
    std::vector<std::size_t> arm_cols;
    for (int k = 0;; ++k) {
        auto c = table.column(fmt::format("y{}", k));
        if (!c) break;
        arm_cols.push_back(*c);
    }
    if (arm_cols.size() < 2) throw ParseError("population CSV needs columns y0 and y1", 1);
    const auto n = static_cast<Eigen::Index>(table.rows.size());
    Vector b(n);
    Matrix po(n, static_cast<Eigen::Index>(arm_cols.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = table.rows[i];
        const std::size_t line = static_cast<std::size_t>(i) + 2;
        b[i] = csv::parse_double(row[base_col], line, "baseline");
        for (std::size_t k = 0; k < arm_cols.size(); ++k)
            po(i, static_cast<Eigen::Index>(k)) =
                csv::parse_double(row[arm_cols[k]], line, table.header[arm_cols[k]]);
    }
    return Population(std::move(b), std::move(po));
}

}  // namespace rct

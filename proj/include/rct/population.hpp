#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rct/linalg.hpp"

namespace rct {

/// Treatment arm index; 0 is control.
using Arm = int;
using Regime = std::vector<Arm>;

/// Generative parameters for a synthetic binary-treatment population.
/// All values are %SOC except `beta_mod` (per SD of baseline) and `n_plots`.
struct PopulationParams {
    double mu_b = 2.34;
    double sd_b_across = 0.47;
    double mean_control_change = 0.16;
    double sd_control_change = 0.14;
    double tau = 0.0;
    double beta_mod = 0.0;
    double sd_eps1 = 0.0;
    int n_plots = 5000;

    /// Throws ParameterError when a field is outside its domain.
    void validate() const;
};

/// Finite population of plots: baseline values, an N x K matrix of potential
/// outcomes (column k = outcome under arm k) and an N x p covariate matrix
/// whose first column is all ones. Immutable after construction.
class Population {
public:
    /// Covariates default to [1, baseline].
    Population(Vector baseline, Matrix potential_outcomes);
    Population(Vector baseline, Matrix potential_outcomes, Matrix covariates);

    int n_plots() const noexcept { return static_cast<int>(baseline_.size()); }
    int n_arms() const noexcept { return static_cast<int>(po_.cols()); }
    int n_covariates() const noexcept { return static_cast<int>(covariates_.cols()); }

    const Vector& baseline() const noexcept { return baseline_; }
    const Matrix& potential_outcomes() const noexcept { return po_; }
    const Matrix& covariates() const noexcept { return covariates_; }
    double outcome(int plot, Arm arm) const { return po_(plot, arm); }

private:
    Vector baseline_;
    Matrix po_;
    Matrix covariates_;
};

/// Baseline centered and scaled to unit population SD (N denominator).
Vector standardize_population(const Vector& values);

/// Draws a binary population from the simulation model. Bit-reproducible
/// for a given seed.
Population generate_population(const PopulationParams& params, std::uint64_t seed);

/// Population average potential outcome under `regime`.
double papo(const Population& pop, std::span<const Arm> regime);

/// PATE of `arm` against control. Exactly 0 for arm 0.
double pate(const Population& pop, Arm arm);

/// Finite-population least-squares coefficients of column `arm` of the
/// potential outcomes on the covariates.
Vector population_ols_coeffs(const Population& pop, Arm arm);

/// Finite-population moderator effect: difference between the slopes of arm
/// `arm` and control on covariate column `covariate`, scaled per population
/// SD of that covariate.
double population_moderator_effect(const Population& pop, Arm arm = 1, int covariate = 1);

/// Regime assigning every plot its best true potential outcome (ties to the
/// lower arm).
Regime oracle_regime(const Population& pop);

/// CSV with header `plot_id,baseline,y0,y1[,y2...]`, 17 significant digits.
void write_population_csv(std::ostream& out, const Population& pop);
Population read_population_csv(std::istream& in);

}  // namespace rct

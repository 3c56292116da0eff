#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "rct/population.hpp"

namespace rct {

/// Completely randomized design with plot-level measurement error.
struct DesignSpec {
    int n_enrolled = 0;
    /// n_k per arm, arm 0 first.
    std::vector<int> arm_sizes;
    /// Soil samples composited per plot measurement; nullopt means infinitely
    /// many (no measurement error).
    std::optional<int> samples_per_plot;
    double sd_within_plot = 1.02;

    /// Balanced binary design: floor(n/2) treated, the rest control.
    static DesignSpec balanced(int n, std::optional<int> samples_per_plot,
                               double sd_within_plot = 1.02);

    /// sigma_delta = sd_within_plot / sqrt(m), or 0 for m = infinity.
    double measurement_sd() const;
    int n_arms() const noexcept { return static_cast<int>(arm_sizes.size()); }

    /// Throws DesignError / ParameterError on inconsistent fields.
    void validate() const;
};

/// Data observed in an enrolled study.
struct ObservedStudy {
    Vector baseline_obs;      ///< B_i
    Vector outcome_obs;       ///< Y_i
    std::vector<Arm> arm;     ///< Z_i
    std::vector<int> source_index;  ///< S_i (0-based population index; -1 if unknown)
    Matrix covariates_obs;    ///< X_i, first column ones, then B_i

    int n() const noexcept { return static_cast<int>(outcome_obs.size()); }
    int n_arms() const;
    /// Number of plots assigned to each arm 0..n_arms()-1.
    std::vector<int> arm_counts() const;
    /// D_i = Y_i - B_i
    Vector differences() const;

    /// Builds a study with covariates [1, B] and checks shapes.
    static ObservedStudy from_columns(Vector baseline, Vector outcome, std::vector<Arm> arm,
                                      std::vector<int> source_index = {});
    void validate() const;
};

/// Simple random sample of plots, uniform partition into arms of fixed sizes,
/// then noisy baseline and follow-up measurements.
ObservedStudy enroll_and_assign(const Population& pop, const DesignSpec& spec,
                                std::uint64_t seed);

/// Study-sample average treatment effect y(1) - y(0) over the enrolled plots.
double sample_ate(const Population& pop, const ObservedStudy& study, Arm arm = 1);

/// Visits every binary assignment vector of length n with exactly n1 ones,
/// in lexicographic order of the index sets of treated units.
class AssignmentEnumeration {
public:
    static constexpr int kMaxUnits = 12;

    /// Throws SizeLimitError for n > 12, ParameterError for n1 outside [0, n].
    AssignmentEnumeration(int n, int n1);

    /// Current assignment; valid until the next call to advance().
    const std::vector<Arm>& current() const noexcept { return assignment_; }
    /// Moves to the next assignment; false when exhausted.
    bool advance();

    /// All assignments collected into a vector.
    static std::vector<std::vector<Arm>> all(int n, int n1);

private:
    int n_;
    std::vector<int> chosen_;
    std::vector<Arm> assignment_;
};

/// CSV `plot_id,source_index,arm,baseline_obs,outcome_obs` (1-based ids).
void write_study_csv(std::ostream& out, const ObservedStudy& study);
ObservedStudy read_study_csv(std::istream& in);

}  // namespace rct

#include "rct/design.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "rct/csv.hpp"
#include "rct/error.hpp"
#include "rct/rng.hpp"

namespace rct {

DesignSpec DesignSpec::balanced(int n, std::optional<int> samples_per_plot,
                                double sd_within_plot) {
    DesignSpec s;
    s.n_enrolled = n;
    s.arm_sizes = {n - n / 2, n / 2};
    s.samples_per_plot = samples_per_plot;
    s.sd_within_plot = sd_within_plot;
    return s;
}

double DesignSpec::measurement_sd() const {
    if (!samples_per_plot) return 0.0;
    return sd_within_plot / std::sqrt(static_cast<double>(*samples_per_plot));
}

void DesignSpec::validate() const {
    if (n_enrolled < 1) throw DesignError("n_enrolled must be positive");
    if (arm_sizes.size() < 2) throw DesignError("design needs at least two arms");
    for (int nk : arm_sizes)
        if (nk < 1) throw DesignError("every arm needs at least one plot");
    if (std::accumulate(arm_sizes.begin(), arm_sizes.end(), 0) != n_enrolled)
        throw DesignError(fmt::format("arm sizes do not sum to n_enrolled = {}", n_enrolled));
    if (samples_per_plot && *samples_per_plot < 1)
        throw ParameterError("samples_per_plot must be positive");
    if (!(sd_within_plot >= 0.0) || !std::isfinite(sd_within_plot))
        throw ParameterError("sd_within_plot must be non-negative");
}

int ObservedStudy::n_arms() const {
    if (arm.empty()) return 0;
    return *std::max_element(arm.begin(), arm.end()) + 1;
}

std::vector<int> ObservedStudy::arm_counts() const {
    std::vector<int> counts(std::max(n_arms(), 2), 0);
    for (Arm a : arm) ++counts[a];
    return counts;
}

Vector ObservedStudy::differences() const { return outcome_obs - baseline_obs; }

ObservedStudy ObservedStudy::from_columns(Vector baseline, Vector outcome, std::vector<Arm> arm,
                                          std::vector<int> source_index) {
    ObservedStudy s;
    const auto n = outcome.size();
    s.covariates_obs.resize(n, 2);
    s.covariates_obs.col(0).setOnes();
    if (baseline.size() == n) s.covariates_obs.col(1) = baseline;
    s.baseline_obs = std::move(baseline);
    s.outcome_obs = std::move(outcome);
    s.arm = std::move(arm);
    if (source_index.empty()) source_index.assign(static_cast<std::size_t>(n), -1);
    s.source_index = std::move(source_index);
    s.validate();
    return s;
}

void ObservedStudy::validate() const {
    const auto n = outcome_obs.size();
    if (baseline_obs.size() != n || static_cast<Eigen::Index>(arm.size()) != n ||
        static_cast<Eigen::Index>(source_index.size()) != n || covariates_obs.rows() != n)
        throw DimensionError("observed study columns have different lengths");
    if (covariates_obs.cols() < 1 || !(covariates_obs.col(0).array() == 1.0).all())
        throw ParameterError("first observed covariate column must be identically 1");
    for (Arm a : arm)
        if (a < 0) throw ParameterError("arm indices must be non-negative");
}

ObservedStudy enroll_and_assign(const Population& pop, const DesignSpec& spec,
                                std::uint64_t seed) {
    spec.validate();
    const int big_n = pop.n_plots();
    const int n = spec.n_enrolled;
    if (n > big_n)
        throw EnrollmentError(fmt::format("cannot enroll {} plots from {}", n, big_n));
    if (spec.n_arms() > pop.n_arms())
        throw DesignError(fmt::format("design has {} arms, population has {}", spec.n_arms(),
                                      pop.n_arms()));

    Rng rng(seed);

    // Partial Fisher-Yates: the first n entries are a uniform sample without replacement.
    std::vector<int> idx(big_n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < n; ++i) {
        std::uniform_int_distribution<int> pick(i, big_n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(n);

    std::vector<Arm> labels;
    labels.reserve(n);
    for (int k = 0; k < spec.n_arms(); ++k) labels.insert(labels.end(), spec.arm_sizes[k], k);
    std::shuffle(labels.begin(), labels.end(), rng);

    const double sd = spec.measurement_sd();
    std::normal_distribution<double> noise(0.0, sd > 0.0 ? sd : 1.0);

    Vector b(n), y(n);
    for (int i = 0; i < n; ++i) {
        b[i] = pop.baseline()[idx[i]];
        y[i] = pop.outcome(idx[i], labels[i]);
        if (sd > 0.0) {
            b[i] += noise(rng);
            y[i] += noise(rng);
        }
    }
    return ObservedStudy::from_columns(std::move(b), std::move(y), std::move(labels),
                                       std::move(idx));
}

double sample_ate(const Population& pop, const ObservedStudy& study, Arm arm) {
    double sum = 0.0;
    for (int s : study.source_index) {
        if (s < 0 || s >= pop.n_plots())
            throw ParameterError("study has no population source indices");
        sum += pop.outcome(s, arm) - pop.outcome(s, 0);
    }
    return sum / study.n();
}

AssignmentEnumeration::AssignmentEnumeration(int n, int n1) : n_(n) {
    if (n > kMaxUnits)
        throw SizeLimitError(fmt::format("assignment enumeration limited to n <= {}", kMaxUnits));
    if (n < 0 || n1 < 0 || n1 > n) throw ParameterError("need 0 <= n1 <= n");
    chosen_.resize(n1);
    std::iota(chosen_.begin(), chosen_.end(), 0);
    assignment_.assign(n, 0);
    for (int c : chosen_) assignment_[c] = 1;
}

bool AssignmentEnumeration::advance() {
    const int k = static_cast<int>(chosen_.size());
    int i = k - 1;
    while (i >= 0 && chosen_[i] == n_ - k + i) --i;
    if (i < 0) return false;
    ++chosen_[i];
    for (int j = i + 1; j < k; ++j) chosen_[j] = chosen_[j - 1] + 1;
    std::fill(assignment_.begin(), assignment_.end(), 0);
    for (int c : chosen_) assignment_[c] = 1;
    return true;
}

std::vector<std::vector<Arm>> AssignmentEnumeration::all(int n, int n1) {
    AssignmentEnumeration e(n, n1);
    std::vector<std::vector<Arm>> out{e.current()};
    while (e.advance()) out.push_back(e.current());
    return out;
}

void write_study_csv(std::ostream& out, const ObservedStudy& study) {
    csv::write_row(out, {"plot_id", "source_index", "arm", "baseline_obs", "outcome_obs"});
    for (int i = 0; i < study.n(); ++i) {
        const int s = study.source_index[i];
        csv::write_row(out, {std::to_string(i + 1), s >= 0 ? std::to_string(s + 1) : "NA",
                             std::to_string(study.arm[i]),
                             csv::format_double(study.baseline_obs[i]),
                             csv::format_double(study.outcome_obs[i])});
    }
}

ObservedStudy read_study_csv(std::istream& in) {
    const auto table = csv::read(in);
    const auto c_arm = table.require_column("arm");
    const auto c_b = table.require_column("baseline_obs");
    const auto c_y = table.require_column("outcome_obs");
    const auto c_src = table.column("source_index");
    const auto n = static_cast<Eigen::Index>(table.rows.size());
    Vector b(n), y(n);
    std::vector<Arm> arm(n);
    std::vector<int> src(n, -1);
    std::set<int> seen;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = table.rows[i];
        const std::size_t line = static_cast<std::size_t>(i) + 2;
        const auto a = csv::parse_integer(row[c_arm], line, "arm");
        if (a < 0 || a > 1000) throw ParseError(fmt::format("invalid arm {}", a), static_cast<int>(line));
        arm[i] = static_cast<Arm>(a);
        b[i] = csv::parse_double(row[c_b], line, "baseline_obs");
        y[i] = csv::parse_double(row[c_y], line, "outcome_obs");
        if (!std::isfinite(b[i]) || !std::isfinite(y[i]))
            throw ParseError("study measurements must be finite", static_cast<int>(line));
        if (c_src && row[*c_src] != "NA" && !row[*c_src].empty()) {
            const auto s = csv::parse_integer(row[*c_src], line, "source_index");
            if (s < 1) throw ParseError("source_index must be >= 1", static_cast<int>(line));
            if (!seen.insert(static_cast<int>(s)).second)
                throw ParseError("duplicate source_index", static_cast<int>(line));
            src[i] = static_cast<int>(s - 1);
        }
    }
    return ObservedStudy::from_columns(std::move(b), std::move(y), std::move(arm), std::move(src));
}

}  // namespace rct

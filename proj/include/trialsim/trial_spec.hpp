#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace trialsim {

/// Outcome-generating and analysis model family.
enum class OutcomeKind {
    binomial,               // binary outcome, conjugate beta-binomial analysis
    normal,                 // continuous outcome, normal approximation analysis
    hurdle_beta_days,       // zero-inflated bounded day count, normal approximation analysis
    binomial_pooled_prior,  // binary outcome, beta priors derived from a pooled log-odds prior
};

enum class RescaleProbs { none, limits };
enum class ControlProbRule { none, sqrt_based, match };

/// Scenario truth for one arm. Which fields are read depends on the OutcomeKind.
struct ArmTruth {
    double value = 0.0;      // event probability (binomial kinds) or mean (normal)
    double sd = 0.0;         // normal only
    double prop_zero = 0.0;  // hurdle only: probability of a zero outcome
    double mean_prop = 0.0;  // hurdle only: mean of the beta part, proportion scale

    bool operator==(const ArmTruth&) const = default;
};

struct OutcomeModel {
    OutcomeKind kind = OutcomeKind::binomial;
    std::vector<ArmTruth> truth;  // one entry per arm, canonical order

    // binomial: Beta(prior_alpha, prior_beta) prior per arm
    double prior_alpha = 1.0;
    double prior_beta = 1.0;
    // hurdle_beta_days
    double beta_variance = 0.05;
    int max_days = 29;
    // binomial_pooled_prior: prior SD of the log odds ratio
    double prior_sd = 0.5;

    bool operator==(const OutcomeModel&) const = default;
};

/// Declarative trial design. Per-look vectors of length 1 are broadcast by validate_spec.
struct TrialSpec {
    std::vector<std::string> arms;
    std::optional<std::string> control;
    bool highest_is_best = false;
    OutcomeModel outcome;

    std::optional<std::vector<double>> start_probs;  // nullopt = auto
    std::vector<std::optional<double>> fixed_probs;  // empty = none for all arms
    std::vector<std::optional<double>> min_probs;
    std::vector<std::optional<double>> max_probs;
    RescaleProbs rescale_probs = RescaleProbs::none;
    std::vector<double> soften_power{1.0};
    ControlProbRule control_prob_fixed = ControlProbRule::none;

    std::vector<int> data_looks;
    std::vector<int> randomised_at_looks;  // empty = same as data_looks

    std::vector<double> superiority{0.99};
    std::vector<double> inferiority{0.01};
    std::optional<std::vector<double>> equivalence_prob;
    std::optional<double> equivalence_diff;
    bool equivalence_only_first = false;
    std::optional<std::vector<double>> futility_prob;
    std::optional<double> futility_diff;
    bool futility_only_first = false;

    int n_draws = 5000;

    bool operator==(const TrialSpec&) const = default;
};

struct LookSchedule {
    int look_index = 0;
    int n_data = 0;
    int n_randomised = 0;
};

struct ThresholdSet {
    double superiority = 1.0;
    double inferiority = 0.0;
    std::optional<double> equivalence_prob;
    std::optional<double> futility_prob;
};

/// Named validation failures. Each invariant maps to exactly one code.
enum class SpecIssue {
    too_few_arms,
    duplicate_arm,
    unknown_control,
    truth_length,
    truth_out_of_range,
    hurdle_infeasible_variance,
    nonpositive_prior,
    vector_length,
    prob_out_of_range,
    start_probs_sum,
    fixed_and_limits,
    min_probs_too_large,
    max_probs_too_small,
    limits_infeasible_after_drop,
    control_rule_without_control,
    look_schedule,
    threshold_out_of_range,
    thresholds_overlap,
    futility_without_control,
    nonpositive_diff,
    missing_diff,
    n_draws,
};

std::string_view to_string(SpecIssue issue);

class ValidationError : public std::runtime_error {
public:
    struct Item {
        SpecIssue issue;
        std::string message;
    };

    explicit ValidationError(std::vector<Item> items);

    const std::vector<Item>& items() const noexcept { return items_; }
    bool has(SpecIssue issue) const noexcept;

private:
    std::vector<Item> items_;
};

/// Immutable, normalised design. Only validate_spec constructs one.
class ValidatedSpec {
public:
    const TrialSpec& spec() const noexcept { return spec_; }

    std::size_t n_arms() const noexcept { return spec_.arms.size(); }
    std::size_t n_looks() const noexcept { return spec_.data_looks.size(); }
    /// Index of the initial control arm, if any.
    std::optional<std::size_t> control_index() const noexcept { return control_; }
    /// Expected outcome per arm on the natural scale (used by metrics).
    const std::vector<double>& true_ys() const noexcept { return true_ys_; }
    std::size_t arm_index(std::string_view name) const;

    LookSchedule look(std::size_t look_index) const;

    bool operator==(const ValidatedSpec& other) const { return spec_ == other.spec_; }

private:
    friend ValidatedSpec validate_spec(const TrialSpec& spec);
    ValidatedSpec() = default;

    TrialSpec spec_;
    std::optional<std::size_t> control_;
    std::vector<double> true_ys_;
};

/// Checks every design invariant and returns the normalised spec: auto start_probs resolved,
/// scalar per-look settings broadcast, empty per-arm vectors expanded, and the sqrt-based
/// control probability written into fixed_probs. Throws ValidationError listing all failures.
ValidatedSpec validate_spec(const TrialSpec& spec);
ValidatedSpec validate_spec(const ValidatedSpec& spec);

ThresholdSet thresholds_at_look(const ValidatedSpec& spec, std::size_t look_index);

/// Control allocation under the square-root rule: sqrt(k) / (sqrt(k) + k).
double sqrt_control_prob(int n_noncontrol_active);

/// Copy of the spec with new truth values (scenario override); revalidated.
ValidatedSpec with_truth(const ValidatedSpec& spec, std::vector<ArmTruth> truth);
/// Copy with constant superiority x and inferiority 1 - x at every look.
ValidatedSpec with_symmetric_thresholds(const ValidatedSpec& spec, double superiority);

}  // namespace trialsim

#pragma once

#include "trialsim/outcome_models.hpp"
#include "trialsim/stochastic.hpp"
#include "trialsim/trial_spec.hpp"

#include <cstddef>
#include <limits>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace trialsim {

enum class ArmStatus { active, superior, inferior, equivalence, futility };
enum class TrialStatus { superiority, equivalence, futility, max };

std::string_view to_string(ArmStatus status);
std::string_view to_string(TrialStatus status);

struct ArmState {
    bool active = true;
    int n_randomised = 0;
    double sum_outcomes = 0.0;
    double alloc_prob = 0.0;
    std::optional<double> min_prob;
    std::optional<double> max_prob;
    std::optional<double> fixed_prob;
    ArmStatus status = ArmStatus::active;
    int status_look = 0;  // 1-based look of the last status change; 0 = never
};

/// Mutable per-trial state; arms are indexed canonically.
struct TrialState {
    std::vector<ArmState> arms;
    std::optional<std::size_t> control;  // current control (may have been promoted)
    bool control_promoted = false;
    std::size_t initial_arm_count = 0;

    static TrialState initial(const ValidatedSpec& spec);
    std::vector<std::size_t> active_arms() const;
    std::size_t active_count() const;
    void drop(std::size_t arm, ArmStatus why, int look);
};

/// Decision-relevant settings that do not vary by look.
struct DecisionRules {
    bool highest_is_best = false;
    std::optional<double> equivalence_diff;
    std::optional<double> futility_diff;
    bool equivalence_only_first = false;
    bool futility_only_first = false;

    static DecisionRules from(const ValidatedSpec& spec);
};

struct LookDecisions {
    bool stop = false;
    TrialStatus status = TrialStatus::max;
    std::optional<std::size_t> superior_arm;
    std::vector<std::size_t> dropped;
    std::vector<std::size_t> promoted;  // successive new controls within this look
    bool single_arm_remainder = false;  // no-control trial ended with one arm left
    // Every probability compared against the superiority / inferiority threshold at this look,
    // with the comparison's answer.
    std::vector<std::pair<double, bool>> superiority_probes;
    std::vector<std::pair<double, bool>> inferiority_probes;
};

struct PairwiseProbs {
    std::size_t arm = 0;
    double p_superior = 0.0;
    std::optional<double> p_equivalent;
    std::optional<double> p_futile;
};

/// Fraction of draws in which each column is best. Ties go to the lowest column.
std::vector<double> prob_best(const PosteriorDraws& draws, bool highest_is_best);

/// Comparisons of every other column against the control column.
std::vector<PairwiseProbs> pairwise_vs_control(const PosteriorDraws& draws, std::size_t control_arm,
                                               std::optional<double> equivalence_diff,
                                               std::optional<double> futility_diff, bool highest_is_best);

/// Fraction of draws whose largest absolute between-column difference is below `equivalence_diff`.
double prob_all_equivalent(const PosteriorDraws& draws, double equivalence_diff);

/// Applies no-control rules to the active arms (the draw columns). `look` is 1-based.
LookDecisions evaluate_look_no_control(TrialState& state, const PosteriorDraws& draws,
                                       const ThresholdSet& thresholds, const DecisionRules& rules, int look);

/// Applies pairwise rules against the current control, including promotion. `look` is 1-based.
LookDecisions evaluate_look_with_control(TrialState& state, const PosteriorDraws& draws,
                                         const ThresholdSet& thresholds, const DecisionRules& rules, int look);

/// New allocation probabilities for all arms (0 for inactive) from prob_best over the active arms.
/// `look_index` is 0-based and selects the softening power.
std::vector<double> update_allocation(const TrialState& state, const std::vector<double>& prob_best_active,
                                      const ValidatedSpec& spec, std::size_t look_index);

/// Rescales min/max limits of the active arms after drops (rescale_probs = limits only).
void rescale_limits(TrialState& state, const ValidatedSpec& spec);

struct ArmResult {
    int n = 0;
    double sum_ys = 0.0;
    double raw_estimate = 0.0;  // NaN when the arm has no participants
    double posterior_estimate = 0.0;
    double posterior_mad_sd = 0.0;
    ArmStatus status = ArmStatus::active;
    int status_look = 0;
    bool active_at_end = true;
    double last_prob_best = 0.0;  // from the last adaptive analysis; 0 for inactive arms

    bool operator==(const ArmResult&) const = default;
};

struct LookTrace {
    int look = 0;
    int n_analysed = 0;
    int n_randomised = 0;
    std::vector<bool> active;
    std::vector<double> alloc_probs;  // in effect after this look's decisions
    std::vector<std::optional<double>> min_probs;
    std::vector<std::optional<double>> max_probs;
};

struct TrialResult {
    TrialStatus final_status = TrialStatus::max;
    std::optional<std::size_t> superior_arm;
    int final_look = 0;  // 1-based
    int n_total = 0;
    std::optional<std::size_t> final_control;
    bool single_arm_remainder = false;
    std::vector<ArmResult> arms;
    std::vector<LookTrace> trace;  // empty unless requested
    // Half-open range [lo, hi) of x for which superiority = x and inferiority = 1 - x at every
    // look reproduce every threshold comparison of this trial, and hence the whole result.
    double symmetric_lo = -std::numeric_limits<double>::infinity();
    double symmetric_hi = std::numeric_limits<double>::infinity();

    bool operator==(const TrialResult& other) const;
};

struct RunOptions {
    bool record_trace = false;
};

/// Simulates one trial from start to final analysis. Pure in (spec, rng).
TrialResult run_trial(const ValidatedSpec& spec, RngStream& rng, RunOptions options = {});

/// Fills out[i] with the trial simulated on stream (base_seed, first_stream + i), skipping entries
/// whose `done` flag is set. Work is spread over `workers` threads (<= 0: hardware concurrency);
/// the output does not depend on the worker count. The first exception thrown is rethrown.
void run_trials(const ValidatedSpec& spec, std::uint64_t base_seed, std::uint64_t first_stream,
                std::span<TrialResult> out, int workers, const std::vector<bool>& done = {});

}  // namespace trialsim

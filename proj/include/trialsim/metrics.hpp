#pragma once

#include "trialsim/decision_engine.hpp"
#include "trialsim/stochastic.hpp"
#include "trialsim/trial_spec.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace trialsim {

/// How an arm is chosen for simulations that did not stop for superiority.
struct SelectionStrategy {
    enum class Kind { none, best, control_if_available, first_of_list };
    Kind kind = Kind::none;
    std::vector<std::string> arms;  // first_of_list only

    static SelectionStrategy parse(std::string_view text);  // "none", "best", "control", "list:A,B"
    std::string to_string() const;
};

/// Canonical index of the selected arm, if any. Throws std::invalid_argument for unknown list arms.
std::optional<std::size_t> select_arm(const TrialResult& result, const SelectionStrategy& strategy,
                                      const ValidatedSpec& spec);

struct MetricValue {
    std::optional<double> estimate;
    std::optional<double> err_sd;
    std::optional<double> err_mad;
    std::optional<double> lo;
    std::optional<double> hi;
};

/// Named metrics in a fixed order (see metric_names).
struct PerformanceSummary {
    std::vector<std::string> names;
    std::vector<MetricValue> values;
    bool bootstrapped = false;
    double ci_width = 0.95;

    const MetricValue& at(std::string_view name) const;
    /// Estimate of a metric; throws if the name is unknown or the value is absent.
    double operator[](std::string_view name) const;
};

std::vector<std::string> metric_names(const ValidatedSpec& spec);

struct SummaryOptions {
    SelectionStrategy select;
    std::optional<std::string> reference_arm;  // defaults to the initial control
    bool use_raw_estimates = false;            // diagnostic: raw means instead of posterior medians
    int n_boot = 0;                            // 0 = no bootstrap
    double ci_width = 0.95;
    std::uint64_t boot_seed = 0;
};

/// Performance metrics over a batch of results of one spec. Throws on an empty batch.
PerformanceSummary summarize_batch(std::span<const TrialResult> results, const ValidatedSpec& spec,
                                   const SummaryOptions& options = {});

/// Ideal design percentage from selection counts; absent when no selections or equal truths.
std::optional<double> idp(std::span<const double> selection_counts, std::span<const double> true_ys,
                          bool highest_is_best);

struct BootstrapResult {
    std::optional<double> estimate;
    std::optional<double> err_sd;
    std::optional<double> err_mad;
    std::optional<double> lo;
    std::optional<double> hi;
    int n_defined = 0;  // resamples where the metric was defined
};

using IndexMetric = std::function<std::optional<double>(std::span<const std::size_t>)>;

/// Nonparametric percentile bootstrap of `metric` over items 0..n_items-1. Resamples where the
/// metric is undefined are excluded.
BootstrapResult bootstrap_ci(std::size_t n_items, const IndexMetric& metric, int n_boot, double width,
                             RngStream& rng);

struct ArmCombo {
    std::vector<std::size_t> arms;  // canonical indices of arms active at the final look
    std::size_t count = 0;
    double frequency = 0.0;
};

/// Frequencies of the sets of arms still active at the end, most frequent first.
std::vector<ArmCombo> remaining_arm_combos(std::span<const TrialResult> results);

/// Percentile with linear interpolation between order statistics (inclusive convention).
double quantile(std::vector<double> values, double prob);
double median(std::vector<double> values);
/// Median absolute deviation scaled to be consistent for the normal SD.
double mad_sd(std::vector<double> values);
double sample_sd(std::span<const double> values);

}  // namespace trialsim

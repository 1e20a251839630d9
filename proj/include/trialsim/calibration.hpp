#pragma once

#include "trialsim/decision_engine.hpp"
#include "trialsim/trial_spec.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace trialsim {

struct GPControls {
    int resolution = 5000;
    double kappa = 0.5;
    double pow = 1.95;
    double lengthscale = 1.0;
    bool x_scaled = true;
    bool narrowing = true;

    void validate() const;
};

/// Noiseless Gaussian process with power-exponential covariance on standardised ys.
class GPModel {
public:
    struct Prediction {
        double mean = 0.0;
        double sd = 0.0;
    };

    Prediction predict(double x) const;

private:
    friend GPModel gp_fit(std::span<const double> xs, std::span<const double> ys, const GPControls& controls);

    double kernel(double a, double b) const;
    double scale(double x) const { return x_scaled_ ? (x - x_min_) / (x_max_ - x_min_) : x; }

    std::vector<double> xs_;  // on the kernel scale
    Eigen::VectorXd alpha_;   // K^-1 (y - mean) / sd
    Eigen::MatrixXd k_inv_;
    double y_mean_ = 0.0;
    double y_sd_ = 1.0;
    double x_min_ = 0.0;
    double x_max_ = 1.0;
    bool x_scaled_ = true;
    double pow_ = 1.95;
    double lengthscale_ = 1.0;
};

/// Fits the GP. Needs at least two distinct xs; repeated xs must carry identical ys.
GPModel gp_fit(std::span<const double> xs, std::span<const double> ys, const GPControls& controls);

/// Grid point in [lo, hi] (resolution points) minimising |mean - target| - kappa * sd among points
/// not in `visited`; ties go to the smallest x. Throws std::runtime_error if every point is visited.
double propose_next(const GPModel& model, double lo, double hi, double target, const GPControls& controls,
                    std::span<const double> visited);

struct CalibrationSettings {
    double target = 0.05;
    double range_lo = 0.9;
    double range_hi = 1.0;
    double tol = 0.001;
    int dir = -1;  // -1: only values at or below target count, +1: at or above, 0: either side
    int iter_max = 25;
    GPControls gp;

    void validate() const;
    bool within_tolerance(double y) const;
    bool respects_direction(double y) const;
};

struct Evaluation {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Evaluation&) const = default;
};

struct CalibrationOutcome {
    std::vector<Evaluation> evaluations;  // previous ones first, then in evaluation order
    std::size_t n_previous = 0;
    double best_x = 0.0;
    double best_y = 0.0;
    bool success = false;
};

/// Level-finding search for f(x) = target inside the settings' range. Previously computed
/// evaluations are reused and count towards iter_max.
CalibrationOutcome calibrate(const std::function<double(double)>& f, const CalibrationSettings& settings,
                             std::span<const Evaluation> previous = {});

/// Simulates batches at symmetric thresholds (superiority x, inferiority 1 - x) on streams
/// 0..n_rep-1 of one base seed. Trials whose every threshold comparison would come out the same
/// at a new x are reused instead of re-simulated, which leaves results unchanged.
class ThresholdEvaluator {
public:
    ThresholdEvaluator(ValidatedSpec spec, int n_rep, std::uint64_t base_seed, int workers);

    /// Batch at threshold x (reusing earlier trials where exact).
    const std::vector<TrialResult>& batch(double x);
    /// Fraction of the batch at x that stopped for superiority.
    double prob_superior(double x);

    std::size_t n_simulated() const noexcept { return n_simulated_; }
    std::size_t n_reused() const noexcept { return n_reused_; }
    const ValidatedSpec& spec() const noexcept { return spec_; }

private:
    ValidatedSpec spec_;
    int n_rep_;
    std::uint64_t base_seed_;
    int workers_;
    std::vector<std::vector<TrialResult>> pool_;  // per simulation, results at earlier thresholds
    std::optional<double> current_x_;
    std::vector<TrialResult> current_;
    std::size_t n_simulated_ = 0;
    std::size_t n_reused_ = 0;
};

/// prob_superior of a fresh batch at threshold x.
double evaluate_threshold(const ValidatedSpec& spec, double x, int n_rep, std::uint64_t base_seed, int workers);

struct TrialCalibration {
    CalibrationOutcome outcome;
    CalibrationSettings settings;
    int n_rep = 0;
    std::uint64_t base_seed = 0;
    std::optional<ValidatedSpec> best_spec;
    std::vector<TrialResult> best_batch;
};

TrialCalibration calibrate_trial(const ValidatedSpec& spec, const CalibrationSettings& settings, int n_rep,
                                 std::uint64_t base_seed, int workers, std::span<const Evaluation> previous = {});

}  // namespace trialsim

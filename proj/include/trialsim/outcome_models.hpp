#pragma once

#include "trialsim/stochastic.hpp"
#include "trialsim/trial_spec.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace trialsim {

/// n_draws x n_columns posterior samples on the natural outcome scale. Column c belongs to
/// arm `arms[c]` (canonical index); columns are kept in canonical arm order.
struct PosteriorDraws {
    std::vector<std::size_t> arms;
    Eigen::MatrixXd values;

    std::size_t n_draws() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t n_columns() const noexcept { return static_cast<std::size_t>(values.cols()); }
    /// Column position of a canonical arm index, if present.
    std::optional<std::size_t> column_of(std::size_t arm) const noexcept;
    /// Sub-matrix holding only the listed columns (positions into this matrix).
    PosteriorDraws select_columns(std::span<const std::size_t> columns) const;
};

/// Per-arm sufficient statistics of the outcomes analysed so far.
struct ArmData {
    int n = 0;
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double y) noexcept {
        ++n;
        sum += y;
        sum_sq += y * y;
    }
    double mean() const noexcept { return n > 0 ? sum / n : 0.0; }
    /// Sample SD with n - 1 denominator; 0 for n < 2.
    double sd() const noexcept;
};

/// Pooled statistics over every analysed participant (all arms, dropped ones included).
struct PooledData {
    int n = 0;
    double sum = 0.0;
    double min = 0.0;
    double max = 0.0;

    void add(double y) noexcept;
    double mean() const noexcept { return n > 0 ? sum / n : 0.0; }
};

/// Outcomes for a sequence of allocations (canonical arm indices), positionally aligned.
std::vector<double> generate_outcomes(const OutcomeModel& model, std::span<const std::size_t> allocs,
                                      RngStream& rng);

/// Beta shape parameters from mean and variance (absolute-value moment inversion).
std::pair<double, double> beta_params_from_mean_var(double mean, double var);

/// Beta(a0 + events_i, b0 + n_i - events_i) draws per arm.
PosteriorDraws posterior_beta_binomial(std::span<const std::size_t> arms, std::span<const int> events,
                                       std::span<const int> n, double prior_alpha, double prior_beta,
                                       int n_draws, RngStream& rng);

/// Normal approximation: Normal(mean, sd / sqrt(n - 1)) for arms with n > 1; arms with fewer
/// observations get Normal(pooled mean, 1000 * pooled range).
PosteriorDraws posterior_normal_approx(std::span<const std::size_t> arms,
                                       std::span<const std::vector<double>> ys, int n_draws,
                                       RngStream& rng);
/// Same model from sufficient statistics.
PosteriorDraws posterior_normal_approx(std::span<const std::size_t> arms, std::span<const ArmData> data,
                                       const PooledData& pooled, int n_draws, RngStream& rng);

/// Prior information in participants: (1 / prior_sd^2) * (4 / r + 4 / (1 - r)); 1 when not finite.
double pooled_prior_effective_n(double prior_sd, double pooled_rate);

/// Beta(N r / 2 + events, N (1 - r) / 2 + n - events) with r the pooled event rate. The pool
/// defaults to the listed arms; pass `pooled` to include other analysed participants.
PosteriorDraws posterior_beta_pooled_prior(std::span<const std::size_t> arms, std::span<const int> events,
                                           std::span<const int> n, double prior_sd, int n_draws,
                                           RngStream& rng,
                                           std::optional<std::pair<double, int>> pooled = std::nullopt);

/// Posterior draws for the listed arms under the spec's analysis model.
PosteriorDraws draw_posterior(const OutcomeModel& model, std::span<const std::size_t> arms,
                              std::span<const ArmData> per_arm, const PooledData& pooled, int n_draws,
                              RngStream& rng);

/// Empirical mean of the hurdle-beta day count (10^6 draws on a reserved oracle stream).
double hurdle_empirical_mean(const ArmTruth& truth, double beta_variance, int max_days);

}  // namespace trialsim

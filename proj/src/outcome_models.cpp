#include "trialsim/outcome_models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <tuple>

namespace trialsim {

std::optional<std::size_t> PosteriorDraws::column_of(std::size_t arm) const noexcept {
    for (std::size_t c = 0; c < arms.size(); ++c) {
        if (arms[c] == arm) return c;
    }
    return std::nullopt;
}

PosteriorDraws PosteriorDraws::select_columns(std::span<const std::size_t> columns) const {
    PosteriorDraws out;
    out.values.resize(values.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t i = 0; i < columns.size(); ++i) {
        out.arms.push_back(arms.at(columns[i]));
        out.values.col(static_cast<Eigen::Index>(i)) = values.col(static_cast<Eigen::Index>(columns[i]));
    }
    return out;
}

double ArmData::sd() const noexcept {
    if (n < 2) return 0.0;
    const double m = sum / n;
    const double ss = std::max(0.0, sum_sq - n * m * m);
    return std::sqrt(ss / (n - 1));
}

void PooledData::add(double y) noexcept {
    if (n == 0) {
        min = max = y;
    } else {
        min = std::min(min, y);
        max = std::max(max, y);
    }
    ++n;
    sum += y;
}

namespace {

double hurdle_draw(RngStream& rng, double prop_zero, double alpha, double beta, int max_days) {
    const bool zero = rng.uniform() < prop_zero;
    const double b = sample_beta(rng, alpha, beta);
    if (zero) return 0.0;
    return std::clamp(std::ceil(b * max_days), 1.0, static_cast<double>(max_days));
}

void check_counts(std::span<const std::size_t> arms, std::span<const int> events, std::span<const int> n) {
    if (arms.size() != events.size() || arms.size() != n.size()) {
        throw std::invalid_argument("posterior: arms, events and n must have equal lengths");
    }
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (n[i] < 0 || events[i] < 0 || events[i] > n[i]) {
            throw std::invalid_argument("posterior: counts must satisfy 0 <= events <= n");
        }
    }
}

PosteriorDraws make_draws(std::span<const std::size_t> arms, int n_draws) {
    if (n_draws < 1) throw std::invalid_argument("posterior: n_draws must be positive");
    PosteriorDraws draws;
    draws.arms.assign(arms.begin(), arms.end());
    draws.values.resize(n_draws, static_cast<Eigen::Index>(arms.size()));
    return draws;
}

// Beta draws that tolerate a zero shape (point mass at 0 or 1), as the pooled prior produces
// when every analysed outcome is identical.
void fill_beta_column(Eigen::Ref<Eigen::VectorXd> column, double a, double b, RngStream& rng) {
    if (a <= 0.0 && b <= 0.0) {
        throw std::invalid_argument("posterior: both beta shapes are zero");
    }
    if (a <= 0.0) {
        column.setZero();
        return;
    }
    if (b <= 0.0) {
        column.setOnes();
        return;
    }
    for (Eigen::Index r = 0; r < column.size(); ++r) column[r] = sample_beta(rng, a, b);
}

}  // namespace

std::vector<double> generate_outcomes(const OutcomeModel& model, std::span<const std::size_t> allocs,
                                      RngStream& rng) {
    std::vector<double> ys(allocs.size());
    std::vector<std::pair<double, double>> beta_shapes;
    if (model.kind == OutcomeKind::hurdle_beta_days) {
        for (const auto& t : model.truth) beta_shapes.push_back(beta_params_from_mean_var(t.mean_prop, model.beta_variance));
    }
    for (std::size_t i = 0; i < allocs.size(); ++i) {
        const std::size_t arm = allocs[i];
        if (arm >= model.truth.size()) {
            throw std::out_of_range("generate_outcomes: unknown arm index " + std::to_string(arm));
        }
        const ArmTruth& t = model.truth[arm];
        switch (model.kind) {
            case OutcomeKind::binomial:
            case OutcomeKind::binomial_pooled_prior:
                ys[i] = rng.uniform() < t.value ? 1.0 : 0.0;
                break;
            case OutcomeKind::normal:
                ys[i] = sample_normal(rng, t.value, t.sd);
                break;
            case OutcomeKind::hurdle_beta_days:
                ys[i] = hurdle_draw(rng, t.prop_zero, beta_shapes[arm].first, beta_shapes[arm].second,
                                    model.max_days);
                break;
        }
    }
    return ys;
}

std::pair<double, double> beta_params_from_mean_var(double mean, double var) {
    if (!(mean > 0.0 && mean < 1.0) || !(var > 0.0) || !(var < mean * (1.0 - mean))) {
        throw std::invalid_argument("beta_params_from_mean_var: need 0 < mean < 1 and 0 < var < mean(1 - mean)");
    }
    const double common = var + mean * mean - mean;
    return {std::abs(mean * common / var), std::abs(common * (mean - 1.0) / var)};
}

PosteriorDraws posterior_beta_binomial(std::span<const std::size_t> arms, std::span<const int> events,
                                       std::span<const int> n, double prior_alpha, double prior_beta,
                                       int n_draws, RngStream& rng) {
    check_counts(arms, events, n);
    if (!(prior_alpha > 0.0) || !(prior_beta > 0.0)) {
        throw std::invalid_argument("posterior_beta_binomial: prior shapes must be positive");
    }
    PosteriorDraws draws = make_draws(arms, n_draws);
    for (std::size_t c = 0; c < arms.size(); ++c) {
        const double a = prior_alpha + events[c];
        const double b = prior_beta + (n[c] - events[c]);
        auto column = draws.values.col(static_cast<Eigen::Index>(c));
        for (Eigen::Index r = 0; r < column.size(); ++r) column[r] = sample_beta(rng, a, b);
    }
    return draws;
}

PosteriorDraws posterior_normal_approx(std::span<const std::size_t> arms, std::span<const ArmData> data,
                                       const PooledData& pooled, int n_draws, RngStream& rng) {
    if (arms.size() != data.size()) throw std::invalid_argument("posterior_normal_approx: length mismatch");
    if (pooled.n < 1) throw std::invalid_argument("posterior_normal_approx: no outcome data");
    PosteriorDraws draws = make_draws(arms, n_draws);
    for (std::size_t c = 0; c < arms.size(); ++c) {
        double mean, sd;
        if (data[c].n > 1) {
            mean = data[c].mean();
            sd = data[c].sd() / std::sqrt(data[c].n - 1.0);
        } else {
            mean = pooled.mean();
            sd = 1000.0 * (pooled.max - pooled.min);
        }
        auto column = draws.values.col(static_cast<Eigen::Index>(c));
        for (Eigen::Index r = 0; r < column.size(); ++r) column[r] = sample_normal(rng, mean, sd);
    }
    return draws;
}

PosteriorDraws posterior_normal_approx(std::span<const std::size_t> arms,
                                       std::span<const std::vector<double>> ys, int n_draws,
                                       RngStream& rng) {
    if (arms.size() != ys.size()) throw std::invalid_argument("posterior_normal_approx: length mismatch");
    std::vector<ArmData> data(ys.size());
    PooledData pooled;
    for (std::size_t c = 0; c < ys.size(); ++c) {
        for (double y : ys[c]) {
            data[c].add(y);
            pooled.add(y);
        }
    }
    return posterior_normal_approx(arms, data, pooled, n_draws, rng);
}

double pooled_prior_effective_n(double prior_sd, double pooled_rate) {
    if (!(prior_sd > 0.0)) throw std::invalid_argument("pooled_prior_effective_n: prior_sd must be positive");
    const double n = (1.0 / (prior_sd * prior_sd)) * (4.0 / pooled_rate + 4.0 / (1.0 - pooled_rate));
    return std::isfinite(n) ? n : 1.0;
}

PosteriorDraws posterior_beta_pooled_prior(std::span<const std::size_t> arms, std::span<const int> events,
                                           std::span<const int> n, double prior_sd, int n_draws,
                                           RngStream& rng, std::optional<std::pair<double, int>> pooled) {
    check_counts(arms, events, n);
    if (!(prior_sd > 0.0)) throw std::invalid_argument("posterior_beta_pooled_prior: prior_sd must be positive");
    double pooled_events = 0.0;
    int pooled_n = 0;
    if (pooled) {
        std::tie(pooled_events, pooled_n) = *pooled;
    } else {
        for (std::size_t c = 0; c < n.size(); ++c) {
            pooled_events += events[c];
            pooled_n += n[c];
        }
    }
    // With no data the rate is undefined; the 1-participant fallback with r = 0.5 keeps draws proper.
    const double r = pooled_n > 0 ? pooled_events / pooled_n : 0.5;
    const double prior_n = pooled_prior_effective_n(prior_sd, r);
    PosteriorDraws draws = make_draws(arms, n_draws);
    for (std::size_t c = 0; c < arms.size(); ++c) {
        const double a = prior_n * r / 2.0 + events[c];
        const double b = prior_n * (1.0 - r) / 2.0 + (n[c] - events[c]);
        fill_beta_column(draws.values.col(static_cast<Eigen::Index>(c)), a, b, rng);
    }
    return draws;
}

PosteriorDraws draw_posterior(const OutcomeModel& model, std::span<const std::size_t> arms,
                              std::span<const ArmData> per_arm, const PooledData& pooled, int n_draws,
                              RngStream& rng) {
    switch (model.kind) {
        case OutcomeKind::binomial:
        case OutcomeKind::binomial_pooled_prior: {
            std::vector<int> events, n;
            for (std::size_t arm : arms) {
                events.push_back(static_cast<int>(std::lround(per_arm[arm].sum)));
                n.push_back(per_arm[arm].n);
            }
            if (model.kind == OutcomeKind::binomial) {
                return posterior_beta_binomial(arms, events, n, model.prior_alpha, model.prior_beta, n_draws, rng);
            }
            return posterior_beta_pooled_prior(arms, events, n, model.prior_sd, n_draws, rng,
                                               std::pair<double, int>{pooled.sum, pooled.n});
        }
        case OutcomeKind::normal:
        case OutcomeKind::hurdle_beta_days: {
            std::vector<ArmData> data;
            for (std::size_t arm : arms) data.push_back(per_arm[arm]);
            return posterior_normal_approx(arms, data, pooled, n_draws, rng);
        }
    }
    throw std::logic_error("draw_posterior: unknown outcome kind");
}

double hurdle_empirical_mean(const ArmTruth& truth, double beta_variance, int max_days) {
    using Key = std::tuple<double, double, double, int>;
    static std::mutex mutex;
    static std::map<Key, double> cache;
    const Key key{truth.prop_zero, truth.mean_prop, beta_variance, max_days};
    {
        std::lock_guard lock(mutex);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }
    const auto [alpha, beta] = beta_params_from_mean_var(truth.mean_prop, beta_variance);
    RngStream rng(0, streams::kOracle);
    constexpr int kDraws = 1'000'000;
    double total = 0.0;
    for (int i = 0; i < kDraws; ++i) total += hurdle_draw(rng, truth.prop_zero, alpha, beta, max_days);
    const double mean = total / kDraws;
    std::lock_guard lock(mutex);
    cache.emplace(key, mean);
    return mean;
}

}  // namespace trialsim

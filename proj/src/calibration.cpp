#include "trialsim/calibration.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace trialsim {

void GPControls::validate() const {
    if (resolution < 2) throw std::invalid_argument("GP resolution must be at least 2");
    if (!(kappa >= 0.0)) throw std::invalid_argument("GP kappa must be non-negative");
    if (!(pow > 0.0 && pow <= 2.0)) throw std::invalid_argument("GP pow must be in (0, 2]");
    if (!(lengthscale > 0.0)) throw std::invalid_argument("GP lengthscale must be positive");
}

double GPModel::kernel(double a, double b) const {
    return std::exp(-std::pow(std::abs(a - b) / lengthscale_, pow_));
}

GPModel::Prediction GPModel::predict(double x) const {
    const double s = scale(x);
    const auto n = static_cast<Eigen::Index>(xs_.size());
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) k[i] = kernel(s, xs_[static_cast<std::size_t>(i)]);
    const double mean = k.dot(alpha_);
    const double var = std::max(0.0, 1.0 - k.dot(k_inv_ * k));
    return {y_mean_ + y_sd_ * mean, y_sd_ * std::sqrt(var)};
}

GPModel gp_fit(std::span<const double> xs, std::span<const double> ys, const GPControls& controls) {
    controls.validate();
    if (xs.size() != ys.size()) throw std::invalid_argument("gp_fit: xs and ys differ in length");

    // Collapse exact repeats; a repeat with a different y cannot be interpolated.
    std::vector<double> ux, uy;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto it = std::find(ux.begin(), ux.end(), xs[i]);
        if (it == ux.end()) {
            ux.push_back(xs[i]);
            uy.push_back(ys[i]);
        } else if (uy[static_cast<std::size_t>(it - ux.begin())] != ys[i]) {
            throw std::invalid_argument("gp_fit: x = " + std::to_string(xs[i]) +
                                        " has conflicting ys; a noiseless GP cannot fit repeated evaluations");
        }
    }
    if (ux.size() < 2) throw std::invalid_argument("gp_fit: need at least two distinct xs");

    GPModel m;
    m.x_scaled_ = controls.x_scaled;
    m.pow_ = controls.pow;
    m.lengthscale_ = controls.lengthscale;
    const auto [lo, hi] = std::minmax_element(ux.begin(), ux.end());
    m.x_min_ = *lo;
    m.x_max_ = *hi;

    const double n = static_cast<double>(uy.size());
    double mean = 0.0;
    for (double y : uy) mean += y / n;
    double ss = 0.0;
    for (double y : uy) ss += (y - mean) * (y - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    m.y_mean_ = mean;
    m.y_sd_ = sd > 0.0 ? sd : 1.0;

    const auto size = static_cast<Eigen::Index>(ux.size());
    for (double x : ux) m.xs_.push_back(m.scale(x));
    Eigen::MatrixXd kmat(size, size);
    for (Eigen::Index i = 0; i < size; ++i) {
        for (Eigen::Index j = 0; j < size; ++j) {
            kmat(i, j) = m.kernel(m.xs_[static_cast<std::size_t>(i)], m.xs_[static_cast<std::size_t>(j)]);
        }
        kmat(i, i) += 1e-8;
    }
    Eigen::VectorXd y(size);
    for (Eigen::Index i = 0; i < size; ++i) y[i] = (uy[static_cast<std::size_t>(i)] - m.y_mean_) / m.y_sd_;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(kmat);
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("gp_fit: covariance factorisation failed");
    m.alpha_ = ldlt.solve(y);
    m.k_inv_ = ldlt.solve(Eigen::MatrixXd::Identity(size, size));
    return m;
}

double propose_next(const GPModel& model, double lo, double hi, double target, const GPControls& controls,
                    std::span<const double> visited) {
    controls.validate();
    if (!(lo < hi)) throw std::invalid_argument("propose_next: empty search interval");
    const double eps = (hi - lo) * 1e-9;
    double best_x = std::numeric_limits<double>::quiet_NaN();
    double best_score = std::numeric_limits<double>::infinity();
    for (int i = 0; i < controls.resolution; ++i) {
        const double x = i + 1 == controls.resolution ? hi : lo + (hi - lo) * i / (controls.resolution - 1);
        const bool seen = std::any_of(visited.begin(), visited.end(), [&](double v) { return std::abs(v - x) <= eps; });
        if (seen) continue;
        const auto p = model.predict(x);
        const double score = std::abs(p.mean - target) - controls.kappa * p.sd;
        if (score < best_score) {
            best_score = score;
            best_x = x;
        }
    }
    if (std::isnan(best_x)) throw std::runtime_error("propose_next: every grid point has been evaluated");
    return best_x;
}

// ---------------------------------------------------------------------------------------------

namespace {
constexpr double kBandEps = 1e-12;
}

void CalibrationSettings::validate() const {
    if (!(target > 0.0 && target < 1.0)) throw std::invalid_argument("calibration target must be in (0, 1)");
    if (!(range_lo < range_hi)) throw std::invalid_argument("calibration range must have lo < hi");
    if (!(tol > 0.0)) throw std::invalid_argument("calibration tolerance must be positive");
    if (dir < -1 || dir > 1) throw std::invalid_argument("calibration dir must be -1, 0 or 1");
    if (iter_max < 2) throw std::invalid_argument("calibration iter_max must be at least 2");
    gp.validate();
}

bool CalibrationSettings::respects_direction(double y) const {
    if (dir < 0) return y <= target + kBandEps;
    if (dir > 0) return y >= target - kBandEps;
    return true;
}

bool CalibrationSettings::within_tolerance(double y) const {
    const double lo = dir > 0 ? target : target - tol;
    const double hi = dir < 0 ? target : target + tol;
    return y >= lo - kBandEps && y <= hi + kBandEps;
}

namespace {

void choose_best(CalibrationOutcome& out, const CalibrationSettings& s) {
    const Evaluation* best = nullptr;
    auto closer = [&](const Evaluation& e) {
        return !best || std::abs(e.y - s.target) < std::abs(best->y - s.target);
    };
    for (const auto& e : out.evaluations) {
        if (s.respects_direction(e.y) && closer(e)) best = &e;
    }
    if (!best) {
        for (const auto& e : out.evaluations) {
            if (closer(e)) best = &e;
        }
    }
    out.best_x = best->x;
    out.best_y = best->y;
    out.success = s.within_tolerance(best->y);
}

// Neighbouring evaluations (by x) on opposite sides of the target; the pair nearest the
// best evaluation wins when there are several.
std::optional<std::pair<double, double>> straddle(std::vector<Evaluation> evals, double target, double best_x) {
    std::sort(evals.begin(), evals.end(), [](const Evaluation& a, const Evaluation& b) { return a.x < b.x; });
    std::optional<std::pair<double, double>> found;
    double found_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < evals.size(); ++i) {
        const double a = evals[i].y - target;
        const double b = evals[i + 1].y - target;
        if (a * b < 0.0) {
            const double lo = evals[i].x, hi = evals[i + 1].x;
            const double dist = best_x < lo ? lo - best_x : best_x > hi ? best_x - hi : 0.0;
            if (dist < found_dist) {
                found = std::pair{lo, hi};
                found_dist = dist;
            }
        }
    }
    return found;
}

}  // namespace

CalibrationOutcome calibrate(const std::function<double(double)>& f, const CalibrationSettings& settings,
                             std::span<const Evaluation> previous) {
    settings.validate();
    CalibrationOutcome out;
    out.evaluations.assign(previous.begin(), previous.end());
    out.n_previous = previous.size();
    auto evaluated = [&](double x) {
        return std::any_of(out.evaluations.begin(), out.evaluations.end(), [&](const Evaluation& e) { return e.x == x; });
    };
    auto full = [&] { return static_cast<int>(out.evaluations.size()) >= settings.iter_max; };

    if (!out.evaluations.empty()) choose_best(out, settings);
    for (double x : {settings.range_lo, settings.range_hi}) {
        if (out.success || full()) break;
        if (evaluated(x)) continue;
        out.evaluations.push_back({x, f(x)});
        choose_best(out, settings);
    }

    double lo = settings.range_lo, hi = settings.range_hi;
    while (!out.success && !full()) {
        std::vector<double> xs, ys;
        for (const auto& e : out.evaluations) {
            xs.push_back(e.x);
            ys.push_back(e.y);
        }
        if (settings.gp.narrowing) {
            const auto s = straddle(out.evaluations, settings.target, out.best_x);
            lo = s ? std::max(s->first, settings.range_lo) : settings.range_lo;
            hi = s ? std::min(s->second, settings.range_hi) : settings.range_hi;
            if (!(lo < hi)) {
                lo = settings.range_lo;
                hi = settings.range_hi;
            }
        }
        const GPModel model = gp_fit(xs, ys, settings.gp);
        const double x = propose_next(model, lo, hi, settings.target, settings.gp, xs);
        out.evaluations.push_back({x, f(x)});
        choose_best(out, settings);
    }
    return out;
}

// ---------------------------------------------------------------------------------------------

ThresholdEvaluator::ThresholdEvaluator(ValidatedSpec spec, int n_rep, std::uint64_t base_seed, int workers)
    : spec_(std::move(spec)), n_rep_(n_rep), base_seed_(base_seed), workers_(workers) {
    if (n_rep < 1) throw std::invalid_argument("n_rep must be positive");
    pool_.resize(static_cast<std::size_t>(n_rep));
}

const std::vector<TrialResult>& ThresholdEvaluator::batch(double x) {
    if (!(x > 0.5 && x <= 1.0)) throw std::invalid_argument("superiority threshold must be in (0.5, 1]");
    if (current_x_ && *current_x_ == x) return current_;
    const ValidatedSpec spec = with_symmetric_thresholds(spec_, x);
    constexpr double margin = 1e-12;  // guards the rounding in 1 - x

    std::vector<TrialResult> out(static_cast<std::size_t>(n_rep_));
    std::vector<bool> flags(out.size(), false);
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (const TrialResult& r : pool_[i]) {
            if (x >= r.symmetric_lo + margin && x < r.symmetric_hi - margin) {
                out[i] = r;
                flags[i] = true;
                ++n_reused_;
                break;
            }
        }
    }
    run_trials(spec, base_seed_, 0, out, workers_, flags);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!flags[i]) {
            pool_[i].push_back(out[i]);
            ++n_simulated_;
        }
    }
    current_x_ = x;
    current_ = std::move(out);
    return current_;
}

double ThresholdEvaluator::prob_superior(double x) {
    const auto& results = batch(x);
    std::size_t sup = 0;
    for (const auto& r : results) sup += r.final_status == TrialStatus::superiority;
    return static_cast<double>(sup) / static_cast<double>(results.size());
}

double evaluate_threshold(const ValidatedSpec& spec, double x, int n_rep, std::uint64_t base_seed, int workers) {
    ThresholdEvaluator evaluator(spec, n_rep, base_seed, workers);
    return evaluator.prob_superior(x);
}

TrialCalibration calibrate_trial(const ValidatedSpec& spec, const CalibrationSettings& settings, int n_rep,
                                 std::uint64_t base_seed, int workers, std::span<const Evaluation> previous) {
    ThresholdEvaluator evaluator(spec, n_rep, base_seed, workers);
    TrialCalibration out;
    out.settings = settings;
    out.n_rep = n_rep;
    out.base_seed = base_seed;
    out.outcome = calibrate([&](double x) { return evaluator.prob_superior(x); }, settings, previous);
    out.best_spec = with_symmetric_thresholds(spec, out.outcome.best_x);
    out.best_batch = evaluator.batch(out.outcome.best_x);
    return out;
}

}  // namespace trialsim

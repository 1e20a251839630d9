#include "trialsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace trialsim {

namespace {

constexpr double kMadScale = 1.482602218505602;

// Type-7 quantile of already sorted values.
double sorted_quantile(const std::vector<double>& sorted, double prob) {
    if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

double quantile(std::vector<double> values, double prob) {
    if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("quantile: prob must be in [0, 1]");
    std::sort(values.begin(), values.end());
    return sorted_quantile(values, prob);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

double mad_sd(std::vector<double> values) {
    const double m = median(values);
    for (double& v : values) v = std::abs(v - m);
    return kMadScale * median(std::move(values));
}

double sample_sd(std::span<const double> values) {
    if (values.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

// ---------------------------------------------------------------------------------------------

SelectionStrategy SelectionStrategy::parse(std::string_view text) {
    SelectionStrategy s;
    if (text == "none") return s;
    if (text == "best") {
        s.kind = Kind::best;
        return s;
    }
    if (text == "control" || text == "control_if_available") {
        s.kind = Kind::control_if_available;
        return s;
    }
    if (text.starts_with("list:")) {
        s.kind = Kind::first_of_list;
        std::string_view rest = text.substr(5);
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            s.arms.emplace_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (s.arms.empty()) throw std::invalid_argument("selection strategy list is empty");
        return s;
    }
    throw std::invalid_argument("unknown selection strategy '" + std::string(text) +
                                "' (expected none, best, control or list:ARM,...)");
}

std::string SelectionStrategy::to_string() const {
    switch (kind) {
        case Kind::none: return "none";
        case Kind::best: return "best";
        case Kind::control_if_available: return "control";
        case Kind::first_of_list: {
            std::string out = "list:";
            for (std::size_t i = 0; i < arms.size(); ++i) out += (i ? "," : "") + arms[i];
            return out;
        }
    }
    return "none";
}

std::optional<std::size_t> select_arm(const TrialResult& result, const SelectionStrategy& strategy,
                                      const ValidatedSpec& spec) {
    if (result.final_status == TrialStatus::superiority && result.superior_arm) return result.superior_arm;
    switch (strategy.kind) {
        case SelectionStrategy::Kind::none:
            return std::nullopt;
        case SelectionStrategy::Kind::best: {
            std::optional<std::size_t> best;
            for (std::size_t a = 0; a < result.arms.size(); ++a) {
                if (!result.arms[a].active_at_end) continue;
                if (!best || result.arms[a].last_prob_best > result.arms[*best].last_prob_best) best = a;
            }
            return best;
        }
        case SelectionStrategy::Kind::control_if_available: {
            const auto control = spec.control_index();
            if (control && result.arms[*control].active_at_end) return control;
            return std::nullopt;
        }
        case SelectionStrategy::Kind::first_of_list:
            for (const std::string& name : strategy.arms) {
                const std::size_t a = spec.arm_index(name);
                if (result.arms[a].active_at_end) return a;
            }
            return std::nullopt;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------------------------

const MetricValue& PerformanceSummary::at(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return values[i];
    }
    throw std::out_of_range("unknown metric '" + std::string(name) + "'");
}

double PerformanceSummary::operator[](std::string_view name) const {
    const MetricValue& v = at(name);
    if (!v.estimate) throw std::out_of_range("metric '" + std::string(name) + "' is not available");
    return *v.estimate;
}

std::vector<std::string> metric_names(const ValidatedSpec& spec) {
    std::vector<std::string> names{"n_summarised"};
    for (const char* base : {"size", "sum_ys", "ratio_ys"}) {
        for (const char* stat : {"mean", "sd", "median", "p25", "p75", "p0", "p100"}) {
            names.push_back(std::string(base) + "_" + stat);
        }
    }
    for (const char* p : {"prob_conclusive", "prob_superior", "prob_equivalence", "prob_futility", "prob_max"}) {
        names.emplace_back(p);
    }
    for (const std::string& arm : spec.spec().arms) names.push_back("prob_select_arm_" + arm);
    for (const char* m : {"prob_select_none", "rmse", "rmse_te", "mae", "mae_te", "idp"}) names.emplace_back(m);
    return names;
}

std::optional<double> idp(std::span<const double> selection_counts, std::span<const double> true_ys,
                          bool highest_is_best) {
    if (selection_counts.size() != true_ys.size()) throw std::invalid_argument("idp: length mismatch");
    const double total = std::accumulate(selection_counts.begin(), selection_counts.end(), 0.0);
    if (!(total > 0.0)) return std::nullopt;
    const auto [lo, hi] = std::minmax_element(true_ys.begin(), true_ys.end());
    if (*lo == *hi) return std::nullopt;
    const double best = highest_is_best ? *hi : *lo;
    const double worst = highest_is_best ? *lo : *hi;
    double expected = 0.0;
    for (std::size_t a = 0; a < true_ys.size(); ++a) expected += selection_counts[a] / total * true_ys[a];
    return 100.0 * (worst - expected) / (worst - best);
}

namespace {

// Per-simulation quantities needed by the metrics.
struct SimRow {
    double size = 0.0;
    double sum_ys = 0.0;
    TrialStatus status = TrialStatus::max;
    std::optional<std::size_t> selected;
    std::optional<double> error;     // selected estimate - truth
    std::optional<double> te_error;  // (selected - reference) estimate - truth
};

class BatchMetrics {
public:
    BatchMetrics(std::span<const TrialResult> results, const ValidatedSpec& spec, const SummaryOptions& options)
        : n_arms_(spec.n_arms()), truth_(spec.true_ys()), hib_(spec.spec().highest_is_best) {
        std::optional<std::size_t> reference = spec.control_index();
        if (options.reference_arm) reference = spec.arm_index(*options.reference_arm);
        has_reference_ = reference.has_value();
        rows_.reserve(results.size());
        for (const TrialResult& r : results) {
            if (r.arms.size() != n_arms_) throw std::invalid_argument("summarize_batch: result does not match spec");
            SimRow row;
            row.size = r.n_total;
            for (const ArmResult& a : r.arms) row.sum_ys += a.sum_ys;
            row.status = r.final_status;
            row.selected = select_arm(r, options.select, spec);
            auto estimate = [&](std::size_t a) {
                return options.use_raw_estimates ? r.arms[a].raw_estimate : r.arms[a].posterior_estimate;
            };
            if (row.selected) {
                const std::size_t s = *row.selected;
                if (std::isfinite(estimate(s))) row.error = estimate(s) - truth_[s];
                if (reference && s != *reference && std::isfinite(estimate(*reference)) && row.error) {
                    row.te_error = (estimate(s) - estimate(*reference)) - (truth_[s] - truth_[*reference]);
                }
            }
            rows_.push_back(row);
        }
    }

    std::vector<std::optional<double>> compute(std::span<const std::size_t> idx) const {
        std::vector<std::optional<double>> out;
        const double n = static_cast<double>(idx.size());
        out.emplace_back(n);

        std::vector<double> size, sum_ys, ratio;
        size.reserve(idx.size());
        sum_ys.reserve(idx.size());
        ratio.reserve(idx.size());
        std::vector<double> statuses(4, 0.0);
        std::vector<double> selections(n_arms_, 0.0);
        double none = 0.0;
        std::vector<double> sq, abs_err, sq_te, abs_te;
        for (std::size_t i : idx) {
            const SimRow& row = rows_[i];
            size.push_back(row.size);
            sum_ys.push_back(row.sum_ys);
            ratio.push_back(row.sum_ys / row.size);
            statuses[static_cast<std::size_t>(row.status)] += 1.0;
            if (row.selected) {
                selections[*row.selected] += 1.0;
            } else {
                none += 1.0;
            }
            if (row.error) {
                sq.push_back(*row.error * *row.error);
                abs_err.push_back(std::abs(*row.error));
            }
            if (row.te_error) {
                sq_te.push_back(*row.te_error * *row.te_error);
                abs_te.push_back(std::abs(*row.te_error));
            }
        }
        for (std::vector<double>* v : {&size, &sum_ys, &ratio}) append_summary(out, *v);

        const double sup = statuses[static_cast<std::size_t>(TrialStatus::superiority)] / n;
        const double eq = statuses[static_cast<std::size_t>(TrialStatus::equivalence)] / n;
        const double fut = statuses[static_cast<std::size_t>(TrialStatus::futility)] / n;
        out.emplace_back(sup + eq + fut);
        out.emplace_back(sup);
        out.emplace_back(eq);
        out.emplace_back(fut);
        out.emplace_back(statuses[static_cast<std::size_t>(TrialStatus::max)] / n);
        for (double c : selections) out.emplace_back(c / n);
        out.emplace_back(none / n);

        auto rms = [](const std::vector<double>& v) -> std::optional<double> {
            if (v.empty()) return std::nullopt;
            return std::sqrt(std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()));
        };
        auto med = [](const std::vector<double>& v) -> std::optional<double> {
            if (v.empty()) return std::nullopt;
            return median(v);
        };
        out.push_back(rms(sq));
        out.push_back(has_reference_ ? rms(sq_te) : std::nullopt);
        out.push_back(med(abs_err));
        out.push_back(has_reference_ ? med(abs_te) : std::nullopt);
        out.push_back(idp(selections, truth_, hib_));
        return out;
    }

    std::size_t size() const noexcept { return rows_.size(); }

private:
    static void append_summary(std::vector<std::optional<double>>& out, std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        out.emplace_back(mean);
        if (v.size() > 1) {
            out.emplace_back(sample_sd(v));
        } else {
            out.emplace_back(std::nullopt);
        }
        out.emplace_back(sorted_quantile(v, 0.5));
        out.emplace_back(sorted_quantile(v, 0.25));
        out.emplace_back(sorted_quantile(v, 0.75));
        out.emplace_back(v.front());
        out.emplace_back(v.back());
    }

    std::size_t n_arms_;
    std::vector<double> truth_;
    bool hib_;
    bool has_reference_ = false;
    std::vector<SimRow> rows_;
};

void fill_uncertainty(MetricValue& value, std::vector<double>& boot, double width) {
    if (boot.empty()) return;
    value.err_sd = boot.size() > 1 ? sample_sd(boot) : 0.0;
    value.err_mad = mad_sd(boot);
    std::sort(boot.begin(), boot.end());
    value.lo = sorted_quantile(boot, (1.0 - width) / 2.0);
    value.hi = sorted_quantile(boot, (1.0 + width) / 2.0);
}

void check_width(double width) {
    if (!(width > 0.0 && width < 1.0)) throw std::invalid_argument("bootstrap: CI width must be in (0, 1)");
}

}  // namespace

PerformanceSummary summarize_batch(std::span<const TrialResult> results, const ValidatedSpec& spec,
                                   const SummaryOptions& options) {
    if (results.empty()) throw std::invalid_argument("summarize_batch: empty batch");
    const BatchMetrics metrics(results, spec, options);

    PerformanceSummary summary;
    summary.names = metric_names(spec);
    std::vector<std::size_t> all(results.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto estimates = metrics.compute(all);
    summary.values.resize(estimates.size());
    for (std::size_t m = 0; m < estimates.size(); ++m) summary.values[m].estimate = estimates[m];

    if (options.n_boot > 0) {
        check_width(options.ci_width);
        if (results.size() < 2) throw std::invalid_argument("bootstrap: need at least 2 results");
        RngStream rng(options.boot_seed, streams::kBootstrap);
        std::vector<std::vector<double>> boot(estimates.size());
        std::vector<std::size_t> idx(results.size());
        for (int b = 0; b < options.n_boot; ++b) {
            for (auto& i : idx) i = static_cast<std::size_t>(rng() % results.size());
            const auto values = metrics.compute(idx);
            for (std::size_t m = 0; m < values.size(); ++m) {
                if (values[m]) boot[m].push_back(*values[m]);
            }
        }
        for (std::size_t m = 0; m < estimates.size(); ++m) {
            if (summary.values[m].estimate) fill_uncertainty(summary.values[m], boot[m], options.ci_width);
        }
        summary.bootstrapped = true;
        summary.ci_width = options.ci_width;
    }
    return summary;
}

BootstrapResult bootstrap_ci(std::size_t n_items, const IndexMetric& metric, int n_boot, double width,
                             RngStream& rng) {
    if (n_items < 2) throw std::invalid_argument("bootstrap_ci: need at least 2 items");
    if (n_boot < 1) throw std::invalid_argument("bootstrap_ci: n_boot must be positive");
    check_width(width);
    std::vector<std::size_t> idx(n_items);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    BootstrapResult out;
    out.estimate = metric(idx);
    std::vector<double> boot;
    boot.reserve(static_cast<std::size_t>(n_boot));
    for (int b = 0; b < n_boot; ++b) {
        for (auto& i : idx) i = static_cast<std::size_t>(rng() % n_items);
        if (const auto v = metric(idx)) boot.push_back(*v);
    }
    out.n_defined = static_cast<int>(boot.size());
    MetricValue mv;
    fill_uncertainty(mv, boot, width);
    out.err_sd = mv.err_sd;
    out.err_mad = mv.err_mad;
    out.lo = mv.lo;
    out.hi = mv.hi;
    return out;
}

std::vector<ArmCombo> remaining_arm_combos(std::span<const TrialResult> results) {
    std::map<std::vector<std::size_t>, std::size_t> counts;
    for (const TrialResult& r : results) {
        std::vector<std::size_t> active;
        for (std::size_t a = 0; a < r.arms.size(); ++a) {
            if (r.arms[a].active_at_end) active.push_back(a);
        }
        ++counts[active];
    }
    std::vector<ArmCombo> out;
    for (const auto& [arms, count] : counts) {
        out.push_back({arms, count, static_cast<double>(count) / static_cast<double>(results.size())});
    }
    std::stable_sort(out.begin(), out.end(), [](const ArmCombo& a, const ArmCombo& b) { return a.count > b.count; });
    return out;
}

}  // namespace trialsim

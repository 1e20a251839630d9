#include "trialsim/io/scenarios.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace trialsim::io {

namespace {

double shown_value(const ValidatedSpec& spec, std::size_t arm) {
    const auto& t = spec.spec().outcome.truth[arm];
    switch (spec.spec().outcome.kind) {
        case OutcomeKind::binomial:
        case OutcomeKind::binomial_pooled_prior: return 100.0 * t.value;
        case OutcomeKind::normal: return t.value;
        case OutcomeKind::hurdle_beta_days: return spec.true_ys()[arm];
    }
    return t.value;
}

// The value a grid effect is added to.
double& varied_value(ArmTruth& t, OutcomeKind kind) {
    return kind == OutcomeKind::hurdle_beta_days ? t.mean_prop : t.value;
}

}  // namespace

std::string scenario_label(const ValidatedSpec& spec) {
    std::string out;
    for (std::size_t a = 0; a < spec.n_arms(); ++a) {
        std::string name = spec.spec().arms[a];
        if (name.starts_with("Arm ")) name.erase(0, 4);
        char value[64];
        std::snprintf(value, sizeof value, "%.1f", shown_value(spec, a));
        if (a > 0) out += " - ";
        out += name + " " + value;
    }
    return out;
}

std::vector<Scenario> scenario_grid(const ValidatedSpec& base, const std::vector<double>& effects,
                                    const std::vector<std::string>& fixed_arms) {
    if (effects.empty()) throw std::invalid_argument("scenario grid needs at least one effect");
    const TrialSpec& s = base.spec();
    std::vector<std::size_t> free;
    for (std::size_t a = 0; a < base.n_arms(); ++a) {
        if (std::find(fixed_arms.begin(), fixed_arms.end(), s.arms[a]) == fixed_arms.end()) free.push_back(a);
    }
    for (const auto& name : fixed_arms) base.arm_index(name);  // throws for unknown names
    if (free.empty()) throw std::invalid_argument("scenario grid: every arm is fixed");

    const bool dedup = !s.control;
    std::set<std::vector<double>> seen;
    std::vector<Scenario> out;
    std::vector<std::size_t> pick(free.size(), 0);
    for (;;) {
        std::vector<ArmTruth> truth = s.outcome.truth;
        std::vector<double> free_values;
        for (std::size_t i = 0; i < free.size(); ++i) {
            double& v = varied_value(truth[free[i]], s.outcome.kind);
            v += effects[pick[i]];
            free_values.push_back(v);
        }
        std::sort(free_values.begin(), free_values.end());
        if (!dedup || seen.insert(free_values).second) {
            ValidatedSpec spec = with_truth(base, std::move(truth));
            std::string label = scenario_label(spec);
            out.push_back({std::move(label), std::move(spec)});
        }
        std::size_t i = 0;
        while (i < pick.size() && ++pick[i] == effects.size()) pick[i++] = 0;
        if (i == pick.size()) break;
    }
    return out;
}

}  // namespace trialsim::io

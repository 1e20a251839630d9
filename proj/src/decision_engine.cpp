#include "trialsim/decision_engine.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace trialsim {

std::string_view to_string(ArmStatus status) {
    switch (status) {
        case ArmStatus::active: return "active";
        case ArmStatus::superior: return "superior";
        case ArmStatus::inferior: return "inferior";
        case ArmStatus::equivalence: return "equivalence";
        case ArmStatus::futility: return "futility";
    }
    return "unknown";
}

std::string_view to_string(TrialStatus status) {
    switch (status) {
        case TrialStatus::superiority: return "superiority";
        case TrialStatus::equivalence: return "equivalence";
        case TrialStatus::futility: return "futility";
        case TrialStatus::max: return "max";
    }
    return "unknown";
}

TrialState TrialState::initial(const ValidatedSpec& spec) {
    const TrialSpec& s = spec.spec();
    TrialState st;
    st.arms.resize(spec.n_arms());
    for (std::size_t a = 0; a < spec.n_arms(); ++a) {
        st.arms[a].alloc_prob = (*s.start_probs)[a];
        st.arms[a].min_prob = s.min_probs[a];
        st.arms[a].max_prob = s.max_probs[a];
        st.arms[a].fixed_prob = s.fixed_probs[a];
    }
    st.control = spec.control_index();
    st.initial_arm_count = spec.n_arms();
    return st;
}

std::vector<std::size_t> TrialState::active_arms() const {
    std::vector<std::size_t> out;
    for (std::size_t a = 0; a < arms.size(); ++a) {
        if (arms[a].active) out.push_back(a);
    }
    return out;
}

std::size_t TrialState::active_count() const {
    return static_cast<std::size_t>(std::count_if(arms.begin(), arms.end(), [](const ArmState& a) { return a.active; }));
}

void TrialState::drop(std::size_t arm, ArmStatus why, int look) {
    ArmState& a = arms.at(arm);
    a.active = false;
    a.alloc_prob = 0.0;
    a.status = why;
    a.status_look = look;
}

DecisionRules DecisionRules::from(const ValidatedSpec& spec) {
    const TrialSpec& s = spec.spec();
    DecisionRules r;
    r.highest_is_best = s.highest_is_best;
    r.equivalence_diff = s.equivalence_diff;
    r.futility_diff = s.futility_diff;
    r.equivalence_only_first = s.equivalence_only_first;
    r.futility_only_first = s.futility_only_first;
    return r;
}

// ---------------------------------------------------------------------------------------------
// Probabilities from posterior draws

std::vector<double> prob_best(const PosteriorDraws& draws, bool highest_is_best) {
    const Eigen::Index rows = draws.values.rows();
    const Eigen::Index cols = draws.values.cols();
    std::vector<double> out(static_cast<std::size_t>(cols), 0.0);
    if (cols == 0 || rows == 0) return out;
    std::vector<long> counts(static_cast<std::size_t>(cols), 0);
    for (Eigen::Index r = 0; r < rows; ++r) {
        Eigen::Index best = 0;
        double best_value = draws.values(r, 0);
        for (Eigen::Index c = 1; c < cols; ++c) {
            const double v = draws.values(r, c);
            if (highest_is_best ? v > best_value : v < best_value) {
                best = c;
                best_value = v;
            }
        }
        ++counts[static_cast<std::size_t>(best)];
    }
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = static_cast<double>(counts[c]) / static_cast<double>(rows);
    return out;
}

std::vector<PairwiseProbs> pairwise_vs_control(const PosteriorDraws& draws, std::size_t control_arm,
                                               std::optional<double> equivalence_diff,
                                               std::optional<double> futility_diff, bool highest_is_best) {
    const auto ccol = draws.column_of(control_arm);
    if (!ccol) throw std::invalid_argument("pairwise_vs_control: control arm has no posterior column");
    const auto control = draws.values.col(static_cast<Eigen::Index>(*ccol));
    const double rows = static_cast<double>(draws.values.rows());
    std::vector<PairwiseProbs> out;
    for (std::size_t c = 0; c < draws.n_columns(); ++c) {
        if (c == *ccol) continue;
        const auto arm = draws.values.col(static_cast<Eigen::Index>(c));
        long superior = 0, equivalent = 0, futile = 0;
        for (Eigen::Index r = 0; r < arm.size(); ++r) {
            const double benefit = highest_is_best ? arm[r] - control[r] : control[r] - arm[r];
            if (benefit > 0.0) ++superior;
            if (equivalence_diff && std::abs(arm[r] - control[r]) < *equivalence_diff) ++equivalent;
            if (futility_diff && benefit < *futility_diff) ++futile;
        }
        PairwiseProbs p;
        p.arm = draws.arms[c];
        p.p_superior = superior / rows;
        if (equivalence_diff) p.p_equivalent = equivalent / rows;
        if (futility_diff) p.p_futile = futile / rows;
        out.push_back(p);
    }
    return out;
}

double prob_all_equivalent(const PosteriorDraws& draws, double equivalence_diff) {
    const Eigen::Index cols = draws.values.cols();
    if (cols < 2) throw std::invalid_argument("prob_all_equivalent: need at least two arms");
    long hits = 0;
    for (Eigen::Index r = 0; r < draws.values.rows(); ++r) {
        double lo = draws.values(r, 0), hi = lo;
        for (Eigen::Index c = 1; c < cols; ++c) {
            lo = std::min(lo, draws.values(r, c));
            hi = std::max(hi, draws.values(r, c));
        }
        if (hi - lo < equivalence_diff) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(draws.values.rows());
}

// ---------------------------------------------------------------------------------------------
// Stopping and arm-dropping rules

namespace {

PosteriorDraws restrict_to(const PosteriorDraws& draws, const std::vector<std::size_t>& arms) {
    std::vector<std::size_t> columns;
    for (std::size_t arm : arms) {
        const auto c = draws.column_of(arm);
        if (!c) throw std::logic_error("active arm missing from posterior draws");
        columns.push_back(*c);
    }
    return draws.select_columns(columns);
}

}  // namespace

LookDecisions evaluate_look_no_control(TrialState& state, const PosteriorDraws& draws,
                                       const ThresholdSet& thresholds, const DecisionRules& rules, int look) {
    LookDecisions dec;
    const std::vector<double> pb = prob_best(draws, rules.highest_is_best);

    std::size_t best_col = 0;
    for (std::size_t c = 1; c < pb.size(); ++c) {
        if (pb[c] > pb[best_col]) best_col = c;
    }
    const bool stop_superior = pb[best_col] > thresholds.superiority;
    dec.superiority_probes.emplace_back(pb[best_col], stop_superior);
    if (stop_superior) {
        const std::size_t winner = draws.arms[best_col];
        state.arms[winner].status = ArmStatus::superior;
        state.arms[winner].status_look = look;
        dec.stop = true;
        dec.status = TrialStatus::superiority;
        dec.superior_arm = winner;
        return dec;
    }

    std::vector<std::size_t> to_drop;
    for (std::size_t c = 0; c < pb.size(); ++c) {
        const bool inferior = pb[c] < thresholds.inferiority;
        dec.inferiority_probes.emplace_back(pb[c], inferior);
        if (inferior) to_drop.push_back(draws.arms[c]);
    }
    if (to_drop.size() == pb.size()) {
        // Every arm fell below the inferiority threshold; the best one is kept.
        to_drop.erase(std::find(to_drop.begin(), to_drop.end(), draws.arms[best_col]));
    }
    for (std::size_t arm : to_drop) {
        state.drop(arm, ArmStatus::inferior, look);
        dec.dropped.push_back(arm);
    }

    const auto active = state.active_arms();
    if (active.size() == 1) {
        const std::size_t winner = active.front();
        state.arms[winner].status = ArmStatus::superior;
        state.arms[winner].status_look = look;
        dec.stop = true;
        dec.status = TrialStatus::superiority;
        dec.superior_arm = winner;
        dec.single_arm_remainder = true;
        return dec;
    }

    if (thresholds.equivalence_prob && rules.equivalence_diff && active.size() >= 2) {
        const double p_eq = prob_all_equivalent(restrict_to(draws, active), *rules.equivalence_diff);
        if (p_eq > *thresholds.equivalence_prob) {
            for (std::size_t arm : active) {
                state.arms[arm].status = ArmStatus::equivalence;
                state.arms[arm].status_look = look;
            }
            dec.stop = true;
            dec.status = TrialStatus::equivalence;
        }
    }
    return dec;
}

LookDecisions evaluate_look_with_control(TrialState& state, const PosteriorDraws& draws,
                                         const ThresholdSet& thresholds, const DecisionRules& rules, int look) {
    if (!state.control || !state.arms[*state.control].active) {
        throw std::logic_error("evaluate_look_with_control: no active control arm");
    }
    LookDecisions dec;
    const std::vector<double> pb = prob_best(draws, rules.highest_is_best);
    auto pb_of = [&](std::size_t arm) { return pb[*draws.column_of(arm)]; };

    auto noncontrol_active = [&] {
        std::vector<std::size_t> out;
        for (std::size_t a : state.active_arms()) {
            if (a != *state.control) out.push_back(a);
        }
        return out;
    };

    // Superiority/inferiority, re-run against each newly promoted control.
    for (;;) {
        const auto comps = noncontrol_active();
        if (comps.empty()) break;
        std::vector<std::size_t> columns{*state.control};
        columns.insert(columns.end(), comps.begin(), comps.end());
        std::sort(columns.begin(), columns.end());
        const auto pw = pairwise_vs_control(restrict_to(draws, columns), *state.control, std::nullopt,
                                            std::nullopt, rules.highest_is_best);
        std::vector<std::size_t> superior;
        for (const auto& p : pw) {
            const bool is_superior = p.p_superior > thresholds.superiority;
            dec.superiority_probes.emplace_back(p.p_superior, is_superior);
            if (is_superior) {
                superior.push_back(p.arm);
                continue;
            }
            const bool is_inferior = p.p_superior < thresholds.inferiority;
            dec.inferiority_probes.emplace_back(p.p_superior, is_inferior);
            if (is_inferior) {
                state.drop(p.arm, ArmStatus::inferior, look);
                dec.dropped.push_back(p.arm);
            }
        }
        if (superior.empty()) break;
        std::size_t winner = superior.front();
        for (std::size_t arm : superior) {
            if (pb_of(arm) > pb_of(winner)) winner = arm;
        }
        const std::size_t old_control = *state.control;
        state.drop(old_control, ArmStatus::inferior, look);
        dec.dropped.push_back(old_control);
        state.control = winner;
        state.control_promoted = true;
        dec.promoted.push_back(winner);
    }

    auto stop_with_control_superior = [&] {
        const std::size_t winner = *state.control;
        state.arms[winner].status = ArmStatus::superior;
        state.arms[winner].status_look = look;
        dec.stop = true;
        dec.status = TrialStatus::superiority;
        dec.superior_arm = winner;
    };
    if (noncontrol_active().empty()) {
        stop_with_control_superior();
        return dec;
    }
    if (!dec.promoted.empty()) return dec;

    const bool check_equivalence = thresholds.equivalence_prob && rules.equivalence_diff &&
                                   !(rules.equivalence_only_first && state.control_promoted);
    const bool check_futility = thresholds.futility_prob && rules.futility_diff &&
                                !(rules.futility_only_first && state.control_promoted);
    bool any_equivalence = false;
    bool any_futility = false;
    if (check_equivalence || check_futility) {
        auto comps = noncontrol_active();
        std::vector<std::size_t> columns{*state.control};
        columns.insert(columns.end(), comps.begin(), comps.end());
        std::sort(columns.begin(), columns.end());
        const auto pw = pairwise_vs_control(restrict_to(draws, columns), *state.control, rules.equivalence_diff,
                                            rules.futility_diff, rules.highest_is_best);
        if (check_equivalence) {
            for (const auto& p : pw) {
                if (*p.p_equivalent > *thresholds.equivalence_prob) {
                    state.drop(p.arm, ArmStatus::equivalence, look);
                    dec.dropped.push_back(p.arm);
                    any_equivalence = true;
                }
            }
        }
        if (check_futility) {
            for (const auto& p : pw) {
                if (state.arms[p.arm].active && *p.p_futile > *thresholds.futility_prob) {
                    state.drop(p.arm, ArmStatus::futility, look);
                    dec.dropped.push_back(p.arm);
                    any_futility = true;
                }
            }
        }
    }
    if (noncontrol_active().empty()) {
        dec.stop = true;
        dec.status = any_equivalence ? TrialStatus::equivalence
                     : any_futility  ? TrialStatus::futility
                                     : TrialStatus::superiority;
        if (dec.status == TrialStatus::superiority) {
            stop_with_control_superior();
        } else {
            const std::size_t c = *state.control;
            state.arms[c].status = dec.status == TrialStatus::equivalence ? ArmStatus::equivalence : ArmStatus::futility;
            state.arms[c].status_look = look;
        }
    }
    return dec;
}

// ---------------------------------------------------------------------------------------------
// Allocation

std::vector<double> update_allocation(const TrialState& state, const std::vector<double>& prob_best_active,
                                      const ValidatedSpec& spec, std::size_t look_index) {
    const TrialSpec& s = spec.spec();
    const auto active = state.active_arms();
    if (active.empty()) throw std::invalid_argument("update_allocation: no active arms");
    if (prob_best_active.size() != active.size()) {
        throw std::invalid_argument("update_allocation: prob_best must cover exactly the active arms");
    }
    std::vector<double> alloc(state.arms.size(), 0.0);
    if (active.size() == 1) {
        alloc[active.front()] = 1.0;
        return alloc;
    }

    // Soften and renormalise.
    const double power = s.soften_power.at(look_index);
    std::vector<double> weight(state.arms.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < active.size(); ++i) {
        weight[active[i]] = std::pow(prob_best_active[i], power);
        total += weight[active[i]];
    }
    for (std::size_t a : active) weight[a] = total > 0.0 ? weight[a] / total : 1.0 / active.size();

    // Fixed probabilities and control rules.
    const std::optional<std::size_t> control = state.control;
    const bool sqrt_rule = s.control_prob_fixed == ControlProbRule::sqrt_based && control;
    if (s.control_prob_fixed == ControlProbRule::match && control) {
        double highest = 0.0;
        for (std::size_t a : active) {
            if (a != *control) highest = std::max(highest, weight[a]);
        }
        weight[*control] = highest;
        double sum = 0.0;
        for (std::size_t a : active) sum += weight[a];
        for (std::size_t a : active) weight[a] /= sum;
    }
    std::vector<std::size_t> free;
    double fixed_total = 0.0;
    for (std::size_t a : active) {
        if (sqrt_rule && a == *control) {
            alloc[a] = sqrt_control_prob(static_cast<int>(active.size() - 1));
            fixed_total += alloc[a];
        } else if (state.arms[a].fixed_prob && !(sqrt_rule && a == *control)) {
            alloc[a] = *state.arms[a].fixed_prob;
            fixed_total += alloc[a];
        } else {
            free.push_back(a);
        }
    }
    if (free.empty()) {
        // Only fixed arms remain after drops: keep their ratios.
        for (std::size_t a : active) alloc[a] /= fixed_total;
        return alloc;
    }
    const double available = 1.0 - fixed_total;

    // Clamp to [min, max] by repeatedly fixing violators and redistributing the rest.
    std::vector<bool> clamped(state.arms.size(), false);
    for (std::size_t iter = 0; iter <= 2 * free.size() + 1; ++iter) {
        double mass = available;
        double w = 0.0;
        std::size_t n_unclamped = 0;
        for (std::size_t a : free) {
            if (clamped[a]) {
                mass -= alloc[a];
            } else {
                w += weight[a];
                ++n_unclamped;
            }
        }
        if (n_unclamped == 0) break;
        for (std::size_t a : free) {
            if (!clamped[a]) alloc[a] = w > 0.0 ? mass * weight[a] / w : mass / n_unclamped;
        }
        bool changed = false;
        for (std::size_t a : free) {
            const auto& lo = state.arms[a].min_prob;
            if (!clamped[a] && lo && alloc[a] < *lo) {
                alloc[a] = *lo;
                clamped[a] = true;
                changed = true;
            }
        }
        if (!changed) {
            for (std::size_t a : free) {
                const auto& hi = state.arms[a].max_prob;
                if (!clamped[a] && hi && alloc[a] > *hi) {
                    alloc[a] = *hi;
                    clamped[a] = true;
                    changed = true;
                }
            }
        }
        if (!changed) break;
    }
    double sum = 0.0;
    for (std::size_t a : active) sum += alloc[a];
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::runtime_error("update_allocation: allocation limits are infeasible for the active arms");
    }
    return alloc;
}

void rescale_limits(TrialState& state, const ValidatedSpec& spec) {
    const TrialSpec& s = spec.spec();
    if (s.rescale_probs != RescaleProbs::limits) return;
    const auto active = state.active_arms();
    if (active.empty()) return;
    const double factor = static_cast<double>(state.initial_arm_count) / static_cast<double>(active.size());

    const bool sqrt_rule = s.control_prob_fixed == ControlProbRule::sqrt_based && state.control;
    double fixed_total = 0.0;
    std::size_t n_free = 0;
    for (std::size_t a : active) {
        if (sqrt_rule && a == *state.control) {
            if (active.size() > 1) fixed_total += sqrt_control_prob(static_cast<int>(active.size() - 1));
        } else if (state.arms[a].fixed_prob) {
            fixed_total += *state.arms[a].fixed_prob;
        } else {
            ++n_free;
        }
    }
    const double min_cap = n_free > 0 ? (1.0 - fixed_total) / static_cast<double>(n_free) : 0.0;
    for (std::size_t a : active) {
        if (s.min_probs[a]) state.arms[a].min_prob = std::min(*s.min_probs[a] * factor, min_cap);
        if (s.max_probs[a]) state.arms[a].max_prob = std::min(*s.max_probs[a] * factor, 1.0);
    }
}

// ---------------------------------------------------------------------------------------------
// Whole-trial simulation

bool TrialResult::operator==(const TrialResult& o) const {
    auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    if (final_status != o.final_status || superior_arm != o.superior_arm || final_look != o.final_look ||
        n_total != o.n_total || final_control != o.final_control ||
        single_arm_remainder != o.single_arm_remainder || arms.size() != o.arms.size()) {
        return false;
    }
    for (std::size_t a = 0; a < arms.size(); ++a) {
        const ArmResult& x = arms[a];
        const ArmResult& y = o.arms[a];
        if (x.n != y.n || !same(x.sum_ys, y.sum_ys) || !same(x.raw_estimate, y.raw_estimate) ||
            !same(x.posterior_estimate, y.posterior_estimate) || !same(x.posterior_mad_sd, y.posterior_mad_sd) ||
            x.status != y.status || x.status_look != y.status_look || x.active_at_end != y.active_at_end ||
            !same(x.last_prob_best, y.last_prob_best)) {
            return false;
        }
    }
    return true;
}

namespace {

double median_in_place(std::vector<double>& v) {
    const std::size_t n = v.size();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    const double upper = *mid;
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

}  // namespace

TrialResult run_trial(const ValidatedSpec& spec, RngStream& rng, RunOptions options) {
    const TrialSpec& s = spec.spec();
    const std::size_t n_arms = spec.n_arms();
    const DecisionRules rules = DecisionRules::from(spec);
    TrialState state = TrialState::initial(spec);

    const int max_n = s.randomised_at_looks.back();
    std::vector<std::size_t> allocs;
    std::vector<double> ys;
    allocs.reserve(static_cast<std::size_t>(max_n));
    ys.reserve(static_cast<std::size_t>(max_n));

    std::vector<ArmData> analysed(n_arms);
    PooledData analysed_pool;
    std::size_t n_analysed = 0;
    std::vector<double> last_pb(n_arms, 0.0);
    std::vector<double> probs(n_arms);

    TrialResult result;
    int look = 0;
    for (std::size_t j = 0; j < spec.n_looks(); ++j) {
        look = static_cast<int>(j) + 1;

        // Randomise up to this look with the allocation in force since the previous look.
        const auto target = static_cast<std::size_t>(s.randomised_at_looks[j]);
        if (allocs.size() < target) {
            for (std::size_t a = 0; a < n_arms; ++a) probs[a] = state.arms[a].alloc_prob;
            std::vector<std::size_t> segment(target - allocs.size());
            for (auto& arm : segment) arm = sample_categorical(rng, probs);
            const std::vector<double> seg_ys = generate_outcomes(s.outcome, segment, rng);
            for (std::size_t i = 0; i < segment.size(); ++i) {
                state.arms[segment[i]].n_randomised += 1;
                state.arms[segment[i]].sum_outcomes += seg_ys[i];
            }
            allocs.insert(allocs.end(), segment.begin(), segment.end());
            ys.insert(ys.end(), seg_ys.begin(), seg_ys.end());
        }

        const auto data_n = std::min(static_cast<std::size_t>(s.data_looks[j]), allocs.size());
        for (; n_analysed < data_n; ++n_analysed) {
            analysed[allocs[n_analysed]].add(ys[n_analysed]);
            analysed_pool.add(ys[n_analysed]);
        }

        const auto active = state.active_arms();
        const PosteriorDraws draws = draw_posterior(s.outcome, active, analysed, analysed_pool, s.n_draws, rng);
        const ThresholdSet thresholds = thresholds_at_look(spec, j);
        const LookDecisions dec = state.control
                                      ? evaluate_look_with_control(state, draws, thresholds, rules, look)
                                      : evaluate_look_no_control(state, draws, thresholds, rules, look);
        // superiority p > x holds iff x < p; inferiority p < 1 - x holds iff x < 1 - p.
        auto narrow = [&](double q, bool held) {
            if (held) {
                result.symmetric_hi = std::min(result.symmetric_hi, q);
            } else {
                result.symmetric_lo = std::max(result.symmetric_lo, q);
            }
        };
        for (const auto& [p, held] : dec.superiority_probes) narrow(p, held);
        for (const auto& [p, held] : dec.inferiority_probes) narrow(1.0 - p, held);

        const auto remaining = state.active_arms();
        std::vector<std::size_t> cols;
        for (std::size_t a : remaining) cols.push_back(*draws.column_of(a));
        const std::vector<double> pb = prob_best(draws.select_columns(cols), rules.highest_is_best);
        std::fill(last_pb.begin(), last_pb.end(), 0.0);
        for (std::size_t i = 0; i < remaining.size(); ++i) last_pb[remaining[i]] = pb[i];

        if (dec.stop) {
            result.final_status = dec.status;
            result.superior_arm = dec.superior_arm;
            result.single_arm_remainder = dec.single_arm_remainder;
        } else {
            if (!dec.dropped.empty()) rescale_limits(state, spec);
            const auto alloc = update_allocation(state, pb, spec, j);
            for (std::size_t a = 0; a < n_arms; ++a) state.arms[a].alloc_prob = alloc[a];
        }
        if (options.record_trace) {
            LookTrace t;
            t.look = look;
            t.n_analysed = static_cast<int>(n_analysed);
            t.n_randomised = static_cast<int>(allocs.size());
            for (const ArmState& a : state.arms) {
                t.active.push_back(a.active);
                t.alloc_probs.push_back(a.alloc_prob);
                t.min_probs.push_back(a.min_prob);
                t.max_probs.push_back(a.max_prob);
            }
            result.trace.push_back(std::move(t));
        }
        if (dec.stop) break;
    }

    // Final analysis with every randomised participant.
    std::vector<ArmData> all(n_arms);
    PooledData all_pool;
    for (std::size_t i = 0; i < allocs.size(); ++i) {
        all[allocs[i]].add(ys[i]);
        all_pool.add(ys[i]);
    }
    std::vector<std::size_t> every_arm(n_arms);
    std::iota(every_arm.begin(), every_arm.end(), std::size_t{0});
    const PosteriorDraws final_draws = draw_posterior(s.outcome, every_arm, all, all_pool, s.n_draws, rng);

    result.final_look = look;
    result.n_total = static_cast<int>(allocs.size());
    result.final_control = state.control;
    result.arms.resize(n_arms);
    std::vector<double> column(static_cast<std::size_t>(s.n_draws));
    for (std::size_t a = 0; a < n_arms; ++a) {
        ArmResult& r = result.arms[a];
        r.n = all[a].n;
        r.sum_ys = all[a].sum;
        r.raw_estimate = all[a].n > 0 ? all[a].mean() : std::numeric_limits<double>::quiet_NaN();
        const auto col = final_draws.values.col(static_cast<Eigen::Index>(a));
        std::copy(col.begin(), col.end(), column.begin());
        const double med = median_in_place(column);
        for (double& v : column) v = std::abs(v - med);
        r.posterior_estimate = med;
        r.posterior_mad_sd = 1.482602218505602 * median_in_place(column);
        r.status = state.arms[a].status;
        r.status_look = state.arms[a].status_look;
        r.active_at_end = state.arms[a].active;
        r.last_prob_best = last_pb[a];
    }
    return result;
}

void run_trials(const ValidatedSpec& spec, std::uint64_t base_seed, std::uint64_t first_stream,
                std::span<TrialResult> out, int workers, const std::vector<bool>& done) {
    if (!done.empty() && done.size() != out.size()) throw std::invalid_argument("run_trials: done flags mismatch");
    if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), std::max<std::size_t>(out.size(), 1)));

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= out.size() || failed.load()) return;
            if (!done.empty() && done[i]) continue;
            try {
                RngStream rng(base_seed, first_stream + i);
                out[i] = run_trial(spec, rng);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
                return;
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace trialsim

#include "trialsim/metrics.hpp"

#include "doctest.h"
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace trialsim;
using trialsim::testing::probs;
using trialsim::testing::small_spec;

namespace {

ValidatedSpec three_arms(std::initializer_list<double> truth = {0.25, 0.25, 0.25}, bool with_control = false) {
    auto s = small_spec();
    s.arms = {"A", "B", "C"};
    s.outcome.truth = probs(truth);
    if (with_control) s.control = "A";
    return validate_spec(s);
}

TrialResult make_result(TrialStatus status, std::optional<std::size_t> superior, int n_total,
                        std::vector<double> estimates, std::vector<bool> active, std::vector<double> pb) {
    TrialResult r;
    r.final_status = status;
    r.superior_arm = superior;
    r.n_total = n_total;
    for (std::size_t a = 0; a < estimates.size(); ++a) {
        ArmResult arm;
        arm.n = n_total / static_cast<int>(estimates.size());
        arm.sum_ys = estimates[a] * arm.n;
        arm.raw_estimate = estimates[a];
        arm.posterior_estimate = estimates[a];
        arm.active_at_end = active[a];
        arm.last_prob_best = pb[a];
        r.arms.push_back(arm);
    }
    return r;
}

std::vector<TrialResult> random_batch(std::size_t n, std::uint64_t seed) {
    RngStream rng(seed, 0);
    std::vector<TrialResult> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto kind = rng() % 4;
        std::vector<bool> active{true, rng() % 3 != 0, rng() % 3 != 0};
        std::vector<double> est{0.2 + 0.1 * rng.uniform(), 0.2 + 0.1 * rng.uniform(), 0.2 + 0.1 * rng.uniform()};
        std::vector<double> pb{0.5, active[1] ? 0.3 : 0.0, active[2] ? 0.2 : 0.0};
        const double norm = pb[0] + pb[1] + pb[2];
        for (double& p : pb) p /= norm;
        const int size = 500 + 250 * static_cast<int>(rng() % 20);
        if (kind == 0) {
            out.push_back(make_result(TrialStatus::superiority, 0, size, est, active, pb));
        } else {
            out.push_back(make_result(kind == 1 ? TrialStatus::equivalence : TrialStatus::max, std::nullopt, size,
                                      est, active, pb));
        }
    }
    return out;
}

}  // namespace

TEST_CASE("type-7 quantiles") {
    const std::vector<double> v{4, 1, 3, 2};
    CHECK(quantile(v, 0.0) == 1.0);
    CHECK(quantile(v, 1.0) == 4.0);
    CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
    CHECK(quantile(v, 0.75) == doctest::Approx(3.25));
    CHECK(median(v) == doctest::Approx(2.5));
    CHECK(median({5}) == 5.0);
    CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(quantile(v, 1.5), std::invalid_argument);
    CHECK(mad_sd({1, 2, 3, 4, 100}) == doctest::Approx(1.482602218505602));
    CHECK(sample_sd(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9}) == doctest::Approx(std::sqrt(32.0 / 7)));
}

TEST_CASE("ideal design percentage") {
    const std::vector<double> sel1{0.026, 0.946, 0.028}, truth1{0.25, 0.225, 0.25};
    CHECK(*idp(sel1, truth1, false) == doctest::Approx(94.6));
    const std::vector<double> sel2{0.503, 0.006, 0.491}, truth2{0.25, 0.275, 0.25};
    CHECK(*idp(sel2, truth2, false) == doctest::Approx(99.4));
    const std::vector<double> all_best{0, 10, 0};
    CHECK(*idp(all_best, truth1, false) == doctest::Approx(100.0));
    const std::vector<double> none{0, 0, 0}, equal{0.2, 0.2, 0.2};
    CHECK(!idp(none, truth1, false));
    CHECK(!idp(sel1, equal, false));

    // Shift invariance and direction flip.
    std::vector<double> shifted(truth1), negated(truth1);
    for (double& t : shifted) t += 3.0;
    for (double& t : negated) t = -t;
    CHECK(*idp(sel1, shifted, false) == doctest::Approx(94.6));
    CHECK(*idp(sel1, negated, true) == doctest::Approx(94.6));
    CHECK_THROWS_AS(idp(sel1, std::vector<double>{0.1, 0.2}, false), std::invalid_argument);
}

TEST_CASE("selection strategies") {
    const auto spec = three_arms({0.25, 0.25, 0.25}, true);
    const auto sup = make_result(TrialStatus::superiority, 2, 1000, {0.2, 0.2, 0.2}, {false, false, true}, {0, 0, 1});
    const auto eq = make_result(TrialStatus::max, std::nullopt, 1000, {0.2, 0.2, 0.2}, {false, true, true}, {0, 0.3, 0.7});
    for (const char* text : {"none", "best", "control", "list:B,C"}) {
        CHECK(select_arm(sup, SelectionStrategy::parse(text), spec) == 2u);
    }
    CHECK(!select_arm(eq, SelectionStrategy::parse("none"), spec));
    CHECK(select_arm(eq, SelectionStrategy::parse("best"), spec) == 2u);
    CHECK(!select_arm(eq, SelectionStrategy::parse("control"), spec));
    CHECK(select_arm(eq, SelectionStrategy::parse("list:A,B,C"), spec) == 1u);
    CHECK(!select_arm(eq, SelectionStrategy::parse("list:A"), spec));
    CHECK_THROWS(select_arm(eq, SelectionStrategy::parse("list:Z"), spec));
    CHECK_THROWS_AS(SelectionStrategy::parse("worst"), std::invalid_argument);
    CHECK(SelectionStrategy::parse("list:B,C").to_string() == "list:B,C");
}

TEST_CASE("metric names and order") {
    const auto names = metric_names(three_arms());
    REQUIRE(names.size() == 36);
    CHECK(names.front() == "n_summarised");
    CHECK(names[1] == "size_mean");
    CHECK(names[7] == "size_p100");
    CHECK(names[8] == "sum_ys_mean");
    CHECK(names[22] == "prob_conclusive");
    CHECK(names[27] == "prob_select_arm_A");
    CHECK(names[30] == "prob_select_none");
    CHECK(names.back() == "idp");
}

TEST_CASE("hand-tallied batch") {
    const auto spec = three_arms({0.25, 0.2, 0.3});
    std::vector<TrialResult> batch{
        make_result(TrialStatus::superiority, 1, 1000, {0.26, 0.21, 0.3}, {false, true, false}, {0, 1, 0}),
        make_result(TrialStatus::superiority, 1, 2000, {0.25, 0.18, 0.3}, {false, true, false}, {0, 1, 0}),
        make_result(TrialStatus::equivalence, std::nullopt, 3000, {0.24, 0.22, 0.3}, {true, true, false}, {0.4, 0.6, 0}),
        make_result(TrialStatus::max, std::nullopt, 4000, {0.27, 0.2, 0.31}, {true, true, true}, {0.5, 0.3, 0.2}),
    };
    SummaryOptions opt;
    opt.select = SelectionStrategy::parse("best");
    const auto m = summarize_batch(batch, spec, opt);
    CHECK(m["n_summarised"] == 4);
    CHECK(m["size_mean"] == 2500);
    CHECK(m["size_sd"] == doctest::Approx(std::sqrt(5e6 / 3)));
    CHECK(m["size_median"] == 2500);
    CHECK(m["size_p25"] == 1750);
    CHECK(m["size_p0"] == 1000);
    CHECK(m["size_p100"] == 4000);
    CHECK(m["prob_superior"] == 0.5);
    CHECK(m["prob_equivalence"] == 0.25);
    CHECK(m["prob_futility"] == 0.0);
    CHECK(m["prob_max"] == 0.25);
    CHECK(m["prob_conclusive"] == 0.75);
    // Selections: B, B, B (best of A/B), A (best prob_best).
    CHECK(m["prob_select_arm_A"] == 0.25);
    CHECK(m["prob_select_arm_B"] == 0.75);
    CHECK(m["prob_select_none"] == 0.0);
    // Errors: 0.01, -0.02, 0.02, 0.02.
    CHECK(m["rmse"] == doctest::Approx(std::sqrt((1e-4 + 4e-4 + 4e-4 + 4e-4) / 4)));
    CHECK(m["mae"] == doctest::Approx(0.02));
    CHECK(!m.at("rmse_te").estimate);
    CHECK_THROWS_AS(m["rmse_te"], std::out_of_range);
    // E[y_selected] = 0.75 * 0.2 + 0.25 * 0.25 = 0.2125, worst 0.3, best 0.2.
    CHECK(m["idp"] == doctest::Approx(87.5));

    opt.reference_arm = "A";
    const auto te = summarize_batch(batch, spec, opt);
    // Treatment-effect errors for the three B selections: (0.21 - 0.26) + 0.05 = 0, -0.02, 0.03.
    CHECK(te["rmse_te"] == doctest::Approx(std::sqrt((0.0 + 4e-4 + 9e-4) / 3)));
    CHECK(te["mae_te"] == doctest::Approx(0.02));
    CHECK_THROWS(summarize_batch(std::span<const TrialResult>{}, spec, opt));
}

TEST_CASE("simplex invariants and permutation invariance") {
    const auto spec = three_arms({0.25, 0.25, 0.3});
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto batch = random_batch(57, seed);
        for (const char* strategy : {"none", "best", "list:C,B"}) {
            SummaryOptions opt;
            opt.select = SelectionStrategy::parse(strategy);
            const auto m = summarize_batch(batch, spec, opt);
            CHECK(m["prob_conclusive"] + m["prob_max"] == doctest::Approx(1.0));
            CHECK(m["prob_superior"] + m["prob_equivalence"] + m["prob_futility"] == doctest::Approx(m["prob_conclusive"]));
            CHECK(m["prob_select_arm_A"] + m["prob_select_arm_B"] + m["prob_select_arm_C"] + m["prob_select_none"] ==
                  doctest::Approx(1.0));

            auto shuffled = batch;
            std::reverse(shuffled.begin(), shuffled.end());
            std::rotate(shuffled.begin(), shuffled.begin() + 13, shuffled.end());
            const auto p = summarize_batch(shuffled, spec, opt);
            for (std::size_t i = 0; i < m.names.size(); ++i) {
                CAPTURE(m.names[i]);
                REQUIRE(m.values[i].estimate.has_value() == p.values[i].estimate.has_value());
                if (m.values[i].estimate) CHECK(*m.values[i].estimate == doctest::Approx(*p.values[i].estimate));
            }
        }
    }
}

TEST_CASE("bootstrap") {
    RngStream data_rng(1, 2);
    std::vector<double> xs(400);
    for (double& x : xs) x = sample_normal(data_rng, 5.0, 2.0);
    const IndexMetric mean = [&](std::span<const std::size_t> idx) -> std::optional<double> {
        double s = 0.0;
        for (std::size_t i : idx) s += xs[i];
        return s / idx.size();
    };
    RngStream rng(7, streams::kBootstrap);
    const auto b = bootstrap_ci(xs.size(), mean, 5000, 0.95, rng);
    const double se = sample_sd(xs) / std::sqrt(400.0);
    CHECK(*b.err_sd == doctest::Approx(se).epsilon(0.1));
    CHECK(*b.err_mad == doctest::Approx(se).epsilon(0.1));
    CHECK(*b.lo < *b.estimate);
    CHECK(*b.hi > *b.estimate);
    CHECK(b.n_defined == 5000);

    RngStream again(7, streams::kBootstrap);
    const auto b2 = bootstrap_ci(xs.size(), mean, 5000, 0.95, again);
    CHECK(*b2.lo == *b.lo);
    CHECK(*b2.err_sd == *b.err_sd);

    const IndexMetric constant = [](std::span<const std::size_t>) -> std::optional<double> { return 3.0; };
    const auto c = bootstrap_ci(10, constant, 200, 0.9, rng);
    CHECK(*c.lo == 3.0);
    CHECK(*c.hi == 3.0);
    CHECK(*c.err_sd == 0.0);

    // Undefined resamples are excluded.
    const IndexMetric partial = [](std::span<const std::size_t> idx) -> std::optional<double> {
        if (std::count(idx.begin(), idx.end(), std::size_t{0}) == 0) return std::nullopt;
        return 1.0;
    };
    const auto p = bootstrap_ci(3, partial, 1000, 0.95, rng);
    CHECK(p.n_defined < 1000);
    CHECK(p.n_defined > 500);
    CHECK_THROWS_AS(bootstrap_ci(1, mean, 10, 0.95, rng), std::invalid_argument);
    CHECK_THROWS_AS(bootstrap_ci(10, mean, 10, 1.5, rng), std::invalid_argument);
}

TEST_CASE("bootstrapped summary is deterministic and brackets the estimates") {
    const auto spec = three_arms({0.25, 0.25, 0.3});
    const auto batch = random_batch(200, 3);
    SummaryOptions opt;
    opt.select = SelectionStrategy::parse("best");
    opt.n_boot = 300;
    opt.boot_seed = 11;
    const auto a = summarize_batch(batch, spec, opt);
    const auto b = summarize_batch(batch, spec, opt);
    CHECK(a.bootstrapped);
    for (std::size_t i = 0; i < a.names.size(); ++i) {
        CAPTURE(a.names[i]);
        const auto& v = a.values[i];
        CHECK(v.lo == b.values[i].lo);
        if (v.estimate && v.lo) {
            CHECK(*v.lo <= *v.hi);
            CHECK(*v.err_sd >= 0.0);
        }
    }
    CHECK(*a.at("n_summarised").err_sd == 0.0);
}

TEST_CASE("remaining arm combinations") {
    std::vector<TrialResult> batch{
        make_result(TrialStatus::max, std::nullopt, 10, {0, 0, 0}, {true, true, true}, {0.3, 0.3, 0.4}),
        make_result(TrialStatus::max, std::nullopt, 10, {0, 0, 0}, {true, false, true}, {0.5, 0, 0.5}),
        make_result(TrialStatus::superiority, 2, 10, {0, 0, 0}, {false, false, true}, {0, 0, 1}),
        make_result(TrialStatus::max, std::nullopt, 10, {0, 0, 0}, {true, false, true}, {0.5, 0, 0.5}),
        make_result(TrialStatus::max, std::nullopt, 10, {0, 0, 0}, {true, true, true}, {0.3, 0.3, 0.4}),
    };
    batch.push_back(batch[1]);
    const auto combos = remaining_arm_combos(batch);
    REQUIRE(combos.size() == 3);
    CHECK(combos[0].arms == std::vector<std::size_t>{0, 2});
    CHECK(combos[0].count == 3);
    CHECK(combos[0].frequency == doctest::Approx(0.5));
    CHECK(combos[1].count == 2);
    CHECK(combos[2].arms == std::vector<std::size_t>{2});
    double total = 0.0;
    for (const auto& c : combos) total += c.frequency;
    CHECK(total == doctest::Approx(1.0));

    batch.resize(1);
    CHECK(remaining_arm_combos(batch).front().frequency == 1.0);
}

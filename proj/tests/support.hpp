#pragma once

#include "trialsim/trial_spec.hpp"

#include <vector>

namespace trialsim::testing {

inline std::vector<int> seq(int from, int to, int by) {
    std::vector<int> out;
    for (int v = from; v <= to; v += by) out.push_back(v);
    return out;
}

inline std::vector<ArmTruth> probs(std::initializer_list<double> ps) {
    std::vector<ArmTruth> out;
    for (double p : ps) out.push_back({p});
    return out;
}

/// Three-arm binary-outcome design without a control: looks every 250 from 500 to 10,000
/// participants with 200 more randomised than analysed, equivalence assessed from the fifth look.
inline TrialSpec primary_spec() {
    TrialSpec s;
    s.arms = {"Arm A", "Arm B", "Arm C"};
    s.outcome.kind = OutcomeKind::binomial;
    s.outcome.truth = probs({0.25, 0.25, 0.25});
    s.start_probs = std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3};
    s.min_probs = {0.25, 0.25, 0.25};
    s.rescale_probs = RescaleProbs::limits;
    s.soften_power = {0.5};
    s.data_looks = seq(500, 10000, 250);
    s.randomised_at_looks = seq(700, 9950, 250);
    s.randomised_at_looks.push_back(10000);
    s.inferiority = {0.01};
    s.superiority = {0.99};
    std::vector<double> eq(s.data_looks.size(), 0.9);
    for (std::size_t j = 0; j < s.data_looks.size(); ++j) {
        if (s.data_looks[j] < 1500) eq[j] = 1.0;
    }
    s.equivalence_prob = eq;
    s.equivalence_diff = 0.025;
    s.n_draws = 10000;
    return s;
}

/// Small, quick two-arm design for engine and io tests.
inline TrialSpec small_spec(double p1 = 0.3, double p2 = 0.3) {
    TrialSpec s;
    s.arms = {"A", "B"};
    s.outcome.truth = probs({p1, p2});
    s.data_looks = seq(100, 600, 100);
    s.n_draws = 500;
    return s;
}

}  // namespace trialsim::testing

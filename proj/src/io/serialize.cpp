#include "trialsim/io/serialize.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace trialsim::io {

static_assert(std::endian::native == std::endian::little, "batch records assume a little-endian host");

using nlohmann::json;

std::string_view to_string(OutcomeKind kind) {
    switch (kind) {
        case OutcomeKind::binomial: return "binomial";
        case OutcomeKind::normal: return "normal";
        case OutcomeKind::hurdle_beta_days: return "hurdle_beta_days";
        case OutcomeKind::binomial_pooled_prior: return "binomial_pooled_prior";
    }
    return "binomial";
}

OutcomeKind outcome_kind_from(std::string_view text) {
    for (auto k : {OutcomeKind::binomial, OutcomeKind::normal, OutcomeKind::hurdle_beta_days,
                   OutcomeKind::binomial_pooled_prior}) {
        if (to_string(k) == text) return k;
    }
    throw std::invalid_argument("unknown outcome model '" + std::string(text) +
                                "' (expected binomial, normal, hurdle_beta_days or binomial_pooled_prior)");
}

std::string_view to_string(ControlProbRule rule) {
    switch (rule) {
        case ControlProbRule::none: return "none";
        case ControlProbRule::sqrt_based: return "sqrt-based";
        case ControlProbRule::match: return "match";
    }
    return "none";
}

ControlProbRule control_rule_from(std::string_view text) {
    if (text == "none") return ControlProbRule::none;
    if (text == "sqrt-based" || text == "sqrt_based") return ControlProbRule::sqrt_based;
    if (text == "match") return ControlProbRule::match;
    throw std::invalid_argument("unknown control_prob_fixed '" + std::string(text) +
                                "' (expected none, sqrt-based or match)");
}

namespace {

json optional_list(const std::vector<std::optional<double>>& v) {
    json out = json::array();
    for (const auto& p : v) out.push_back(p ? json(*p) : json(nullptr));
    return out;
}

json design_json(const TrialSpec& s) {
    json j;
    j["arms"] = s.arms;
    j["control"] = s.control ? json(*s.control) : json(nullptr);
    j["highest_is_best"] = s.highest_is_best;
    j["outcome"] = {{"model", to_string(s.outcome.kind)},
                    {"prior_alpha", s.outcome.prior_alpha},
                    {"prior_beta", s.outcome.prior_beta},
                    {"beta_variance", s.outcome.beta_variance},
                    {"max_days", s.outcome.max_days},
                    {"prior_sd", s.outcome.prior_sd}};
    j["start_probs"] = *s.start_probs;
    j["fixed_probs"] = optional_list(s.fixed_probs);
    j["min_probs"] = optional_list(s.min_probs);
    j["max_probs"] = optional_list(s.max_probs);
    j["rescale_probs"] = s.rescale_probs == RescaleProbs::limits ? "limits" : "none";
    j["soften_power"] = s.soften_power;
    j["control_prob_fixed"] = to_string(s.control_prob_fixed);
    j["data_looks"] = s.data_looks;
    j["randomised_at_looks"] = s.randomised_at_looks;
    j["superiority"] = s.superiority;
    j["inferiority"] = s.inferiority;
    j["equivalence_prob"] = s.equivalence_prob ? json(*s.equivalence_prob) : json(nullptr);
    j["equivalence_diff"] = s.equivalence_diff ? json(*s.equivalence_diff) : json(nullptr);
    j["equivalence_only_first"] = s.equivalence_only_first;
    j["futility_prob"] = s.futility_prob ? json(*s.futility_prob) : json(nullptr);
    j["futility_diff"] = s.futility_diff ? json(*s.futility_diff) : json(nullptr);
    j["futility_only_first"] = s.futility_only_first;
    j["n_draws"] = s.n_draws;
    return j;
}

json truth_json(const OutcomeModel& m) {
    json out = json::array();
    for (const ArmTruth& t : m.truth) {
        switch (m.kind) {
            case OutcomeKind::binomial:
            case OutcomeKind::binomial_pooled_prior:
                out.push_back({{"p", t.value}});
                break;
            case OutcomeKind::normal:
                out.push_back({{"mean", t.value}, {"sd", t.sd}});
                break;
            case OutcomeKind::hurdle_beta_days:
                out.push_back({{"prop_zero", t.prop_zero}, {"mean_prop", t.mean_prop}});
                break;
        }
    }
    return out;
}

template <class T>
void put(std::ostream& out, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.write(bytes, sizeof(T));
}

template <class T>
T get(std::istream& in) {
    char bytes[sizeof(T)];
    if (!in.read(bytes, sizeof(T))) throw std::runtime_error("batch record truncated");
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

constexpr std::int64_t kNone = -1;

}  // namespace

json spec_to_json(const ValidatedSpec& spec) {
    json j = design_json(spec.spec());
    j["truth"] = truth_json(spec.spec().outcome);
    return j;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string fingerprint(const ValidatedSpec& spec) { return sha256_hex(spec_to_json(spec).dump()); }

std::string design_fingerprint(const ValidatedSpec& spec) { return sha256_hex(design_json(spec.spec()).dump()); }

void write_result(std::ostream& out, const TrialResult& r) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(r.final_status));
    put<std::int64_t>(out, r.superior_arm ? static_cast<std::int64_t>(*r.superior_arm) : kNone);
    put<std::int32_t>(out, r.final_look);
    put<std::int32_t>(out, r.n_total);
    put<std::int64_t>(out, r.final_control ? static_cast<std::int64_t>(*r.final_control) : kNone);
    put<std::uint8_t>(out, r.single_arm_remainder);
    put<double>(out, r.symmetric_lo);
    put<double>(out, r.symmetric_hi);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.arms.size()));
    for (const ArmResult& a : r.arms) {
        put<std::int32_t>(out, a.n);
        put<double>(out, a.sum_ys);
        put<double>(out, a.raw_estimate);
        put<double>(out, a.posterior_estimate);
        put<double>(out, a.posterior_mad_sd);
        put<std::uint8_t>(out, static_cast<std::uint8_t>(a.status));
        put<std::int32_t>(out, a.status_look);
        put<std::uint8_t>(out, a.active_at_end);
        put<double>(out, a.last_prob_best);
    }
}

TrialResult read_result(std::istream& in) {
    TrialResult r;
    const auto status = get<std::uint8_t>(in);
    if (status > static_cast<std::uint8_t>(TrialStatus::max)) throw std::runtime_error("batch record: bad status");
    r.final_status = static_cast<TrialStatus>(status);
    if (const auto s = get<std::int64_t>(in); s != kNone) r.superior_arm = static_cast<std::size_t>(s);
    r.final_look = get<std::int32_t>(in);
    r.n_total = get<std::int32_t>(in);
    if (const auto c = get<std::int64_t>(in); c != kNone) r.final_control = static_cast<std::size_t>(c);
    r.single_arm_remainder = get<std::uint8_t>(in) != 0;
    r.symmetric_lo = get<double>(in);
    r.symmetric_hi = get<double>(in);
    const auto n_arms = get<std::uint32_t>(in);
    if (n_arms > 4096) throw std::runtime_error("batch record: implausible arm count");
    r.arms.resize(n_arms);
    for (ArmResult& a : r.arms) {
        a.n = get<std::int32_t>(in);
        a.sum_ys = get<double>(in);
        a.raw_estimate = get<double>(in);
        a.posterior_estimate = get<double>(in);
        a.posterior_mad_sd = get<double>(in);
        const auto arm_status = get<std::uint8_t>(in);
        if (arm_status > static_cast<std::uint8_t>(ArmStatus::futility)) throw std::runtime_error("batch record: bad arm status");
        a.status = static_cast<ArmStatus>(arm_status);
        a.status_look = get<std::int32_t>(in);
        a.active_at_end = get<std::uint8_t>(in) != 0;
        a.last_prob_best = get<double>(in);
    }
    return r;
}

}  // namespace trialsim::io

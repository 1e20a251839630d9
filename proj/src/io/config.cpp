#include "trialsim/io/config.hpp"

#include "trialsim/io/serialize.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace trialsim::io {

namespace {

// Reads one YAML document; every error names the source line.
class Reader {
public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const YAML::Node& node, const std::string& message) const {
        std::ostringstream out;
        out << source_;
        if (node.IsDefined() && node.Mark().line >= 0) out << ':' << node.Mark().line + 1;
        out << ": " << message;
        throw ConfigError(out.str());
    }

    void check_keys(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& where) const {
        if (!map.IsMap()) fail(map, where + " must be a mapping");
        for (const auto& kv : map) {
            const auto key = kv.first.as<std::string>();
            if (!allowed.contains(key)) fail(kv.first, "unknown key '" + key + "' in " + where);
        }
    }

    double number(const YAML::Node& node, const std::string& what) const {
        if (!node.IsScalar()) fail(node, what + " must be a number");
        try {
            return node.as<double>();
        } catch (const YAML::Exception&) {
            fail(node, what + " must be a number, got '" + node.Scalar() + "'");
        }
    }

    int integer(const YAML::Node& node, const std::string& what) const {
        const double v = number(node, what);
        if (v != std::floor(v) || std::abs(v) > 1e9) fail(node, what + " must be an integer");
        return static_cast<int>(v);
    }

    bool boolean(const YAML::Node& node, const std::string& what) const {
        if (!node.IsScalar()) fail(node, what + " must be true or false");
        try {
            return node.as<bool>();
        } catch (const YAML::Exception&) {
            fail(node, what + " must be true or false, got '" + node.Scalar() + "'");
        }
    }

    std::string text(const YAML::Node& node, const std::string& what) const {
        if (!node.IsScalar()) fail(node, what + " must be a string");
        return node.Scalar();
    }

    bool is_null(const YAML::Node& node) const { return !node.IsDefined() || node.IsNull(); }

    std::vector<std::string> strings(const YAML::Node& node, const std::string& what) const {
        if (!node.IsSequence()) fail(node, what + " must be a list");
        std::vector<std::string> out;
        for (const auto& item : node) out.push_back(text(item, what + " entries"));
        return out;
    }

    /// Number or list of numbers; a scalar is repeated `n` times when n > 0.
    std::vector<double> numbers(const YAML::Node& node, const std::string& what, std::size_t n = 0) const {
        if (node.IsScalar()) return std::vector<double>(n > 0 ? n : 1, number(node, what));
        if (!node.IsSequence()) fail(node, what + " must be a number or a list of numbers");
        std::vector<double> out;
        for (const auto& item : node) out.push_back(number(item, what + " entries"));
        return out;
    }

    /// Per-arm probabilities: a scalar applies to every arm; list entries may be null.
    std::vector<std::optional<double>> per_arm(const YAML::Node& node, const std::string& what, std::size_t n) const {
        if (node.IsScalar()) return std::vector<std::optional<double>>(n, number(node, what));
        if (!node.IsSequence()) fail(node, what + " must be a number or a list of numbers/nulls");
        std::vector<std::optional<double>> out;
        for (const auto& item : node) {
            if (item.IsNull()) {
                out.emplace_back();
            } else {
                out.emplace_back(number(item, what + " entries"));
            }
        }
        if (out.size() != n) fail(node, what + " needs one entry per arm (" + std::to_string(n) + ")");
        return out;
    }

    /// Schedule: a number, a {seq: [from, to, by], add, cap} or {repeat: [value, count]} block,
    /// or a list mixing those.
    std::vector<double> schedule(const YAML::Node& node, const std::string& what) const {
        std::vector<double> out;
        append_schedule(node, what, out);
        return out;
    }

    std::vector<int> int_schedule(const YAML::Node& node, const std::string& what) const {
        std::vector<int> out;
        for (double v : schedule(node, what)) {
            if (v != std::floor(v)) fail(node, what + " must contain whole numbers");
            out.push_back(static_cast<int>(v));
        }
        return out;
    }

private:
    void append_schedule(const YAML::Node& node, const std::string& what, std::vector<double>& out) const {
        if (node.IsScalar()) {
            out.push_back(number(node, what));
        } else if (node.IsSequence()) {
            for (const auto& item : node) append_schedule(item, what, out);
        } else if (node.IsMap() && node["seq"]) {
            check_keys(node, {"seq", "add", "cap"}, what + " seq block");
            const auto args = numbers(node["seq"], what + " seq");
            if (args.size() != 3 || !(args[2] > 0.0) || args[1] < args[0]) {
                fail(node, what + " seq needs [from, to, by] with by > 0 and to >= from");
            }
            const double add = node["add"] ? number(node["add"], what + " add") : 0.0;
            const auto count = static_cast<long>(std::floor((args[1] - args[0]) / args[2] + 1e-9)) + 1;
            if (count > 1'000'000) fail(node, what + " seq is too long");
            for (long i = 0; i < count; ++i) {
                double v = args[0] + static_cast<double>(i) * args[2] + add;
                if (node["cap"]) v = std::min(v, number(node["cap"], what + " cap"));
                out.push_back(v);
            }
        } else if (node.IsMap() && node["repeat"]) {
            check_keys(node, {"repeat"}, what + " repeat block");
            const YAML::Node args = node["repeat"];
            if (!args.IsSequence() || args.size() != 2) fail(node, what + " repeat needs [value, count]");
            const double value = number(args[0], what + " repeat value");
            const int count = integer(args[1], what + " repeat count");
            if (count < 1 || count > 1'000'000) fail(args[1], what + " repeat count must be positive");
            out.insert(out.end(), static_cast<std::size_t>(count), value);
        } else {
            fail(node, what + " must be a number, a list, or a {seq: ...} / {repeat: ...} block");
        }
    }

    std::string source_;
};

const std::set<std::string> kTruthKeys{"true_ys", "true_means", "true_sds", "prop_zero", "mean_prop"};

std::vector<ArmTruth> read_truth(const Reader& r, const YAML::Node& block, OutcomeKind kind, std::size_t n,
                                 const std::string& where) {
    std::vector<ArmTruth> truth(n);
    auto expect = [&](const char* key) {
        const YAML::Node v = block[key];
        if (!v) r.fail(block, where + " needs '" + key + "' for outcome model " + std::string(to_string(kind)));
        const auto values = r.numbers(v, std::string(key), n);
        if (values.size() != n) r.fail(v, std::string(key) + " needs one value per arm (" + std::to_string(n) + ")");
        return values;
    };
    auto forbid = [&](std::initializer_list<const char*> keys) {
        for (const char* key : keys) {
            if (block[key]) {
                r.fail(block[key], "'" + std::string(key) + "' does not apply to outcome model " +
                                       std::string(to_string(kind)));
            }
        }
    };
    switch (kind) {
        case OutcomeKind::binomial:
        case OutcomeKind::binomial_pooled_prior: {
            forbid({"true_means", "true_sds", "prop_zero", "mean_prop"});
            const auto ys = expect("true_ys");
            for (std::size_t a = 0; a < n; ++a) truth[a].value = ys[a];
            break;
        }
        case OutcomeKind::normal: {
            forbid({"true_ys", "prop_zero", "mean_prop"});
            const auto means = expect("true_means");
            const auto sds = expect("true_sds");
            for (std::size_t a = 0; a < n; ++a) {
                truth[a].value = means[a];
                truth[a].sd = sds[a];
            }
            break;
        }
        case OutcomeKind::hurdle_beta_days: {
            forbid({"true_ys", "true_means", "true_sds"});
            const auto zero = expect("prop_zero");
            const auto mean = expect("mean_prop");
            for (std::size_t a = 0; a < n; ++a) {
                truth[a].prop_zero = zero[a];
                truth[a].mean_prop = mean[a];
            }
            break;
        }
    }
    return truth;
}

DesignConfig read_design(const Reader& r, const YAML::Node& doc, std::size_t index) {
    r.check_keys(doc,
                 {"name", "arms", "control", "highest_is_best", "outcome", "start_probs", "fixed_probs", "min_probs",
                  "max_probs", "rescale_probs", "soften_power", "control_prob_fixed", "data_looks",
                  "randomised_at_looks", "superiority", "inferiority", "equivalence_prob", "equivalence_diff",
                  "equivalence_only_first", "futility_prob", "futility_diff", "futility_only_first", "n_draws",
                  "scenarios", "scenario_grid"},
                 "design");
    TrialSpec s;
    if (!doc["arms"]) r.fail(doc, "design needs 'arms'");
    s.arms = r.strings(doc["arms"], "arms");
    const std::size_t n = s.arms.size();
    if (!r.is_null(doc["control"])) s.control = r.text(doc["control"], "control");
    if (doc["highest_is_best"]) s.highest_is_best = r.boolean(doc["highest_is_best"], "highest_is_best");

    const YAML::Node outcome = doc["outcome"];
    if (!outcome) r.fail(doc, "design needs an 'outcome' block");
    r.check_keys(outcome,
                 {"model", "true_ys", "true_means", "true_sds", "prop_zero", "mean_prop", "prior", "prior_sd",
                  "variance", "max_days"},
                 "outcome");
    if (!outcome["model"]) r.fail(outcome, "outcome needs 'model'");
    try {
        s.outcome.kind = outcome_kind_from(r.text(outcome["model"], "outcome model"));
    } catch (const std::invalid_argument& e) {
        r.fail(outcome["model"], e.what());
    }
    s.outcome.truth = read_truth(r, outcome, s.outcome.kind, n, "outcome");
    if (outcome["prior"]) {
        if (s.outcome.kind != OutcomeKind::binomial) r.fail(outcome["prior"], "'prior' applies to the binomial model only");
        const auto prior = r.numbers(outcome["prior"], "prior");
        if (prior.size() != 2) r.fail(outcome["prior"], "prior must be [alpha, beta]");
        s.outcome.prior_alpha = prior[0];
        s.outcome.prior_beta = prior[1];
    }
    if (outcome["prior_sd"]) {
        if (s.outcome.kind != OutcomeKind::binomial_pooled_prior) {
            r.fail(outcome["prior_sd"], "'prior_sd' applies to the binomial_pooled_prior model only");
        }
        s.outcome.prior_sd = r.number(outcome["prior_sd"], "prior_sd");
    }
    for (const char* key : {"variance", "max_days"}) {
        if (outcome[key] && s.outcome.kind != OutcomeKind::hurdle_beta_days) {
            r.fail(outcome[key], "'" + std::string(key) + "' applies to the hurdle_beta_days model only");
        }
    }
    if (outcome["variance"]) s.outcome.beta_variance = r.number(outcome["variance"], "variance");
    if (outcome["max_days"]) s.outcome.max_days = r.integer(outcome["max_days"], "max_days");

    if (const YAML::Node sp = doc["start_probs"]; sp && !(sp.IsScalar() && sp.Scalar() == "auto")) {
        s.start_probs = r.numbers(sp, "start_probs");
    }
    if (doc["fixed_probs"]) s.fixed_probs = r.per_arm(doc["fixed_probs"], "fixed_probs", n);
    if (doc["min_probs"]) s.min_probs = r.per_arm(doc["min_probs"], "min_probs", n);
    if (doc["max_probs"]) s.max_probs = r.per_arm(doc["max_probs"], "max_probs", n);
    if (const YAML::Node rp = doc["rescale_probs"]) {
        const std::string v = r.is_null(rp) ? "none" : r.text(rp, "rescale_probs");
        if (v == "limits") {
            s.rescale_probs = RescaleProbs::limits;
        } else if (v != "none") {
            r.fail(rp, "rescale_probs must be none or limits");
        }
    }
    if (doc["soften_power"]) s.soften_power = r.schedule(doc["soften_power"], "soften_power");
    if (const YAML::Node cp = doc["control_prob_fixed"]; cp && !r.is_null(cp)) {
        try {
            s.control_prob_fixed = control_rule_from(r.text(cp, "control_prob_fixed"));
        } catch (const std::invalid_argument& e) {
            r.fail(cp, e.what());
        }
    }
    if (!doc["data_looks"]) r.fail(doc, "design needs 'data_looks'");
    s.data_looks = r.int_schedule(doc["data_looks"], "data_looks");
    if (doc["randomised_at_looks"]) s.randomised_at_looks = r.int_schedule(doc["randomised_at_looks"], "randomised_at_looks");
    if (doc["superiority"]) s.superiority = r.schedule(doc["superiority"], "superiority");
    if (doc["inferiority"]) s.inferiority = r.schedule(doc["inferiority"], "inferiority");
    if (!r.is_null(doc["equivalence_prob"])) s.equivalence_prob = r.schedule(doc["equivalence_prob"], "equivalence_prob");
    if (!r.is_null(doc["equivalence_diff"])) s.equivalence_diff = r.number(doc["equivalence_diff"], "equivalence_diff");
    if (doc["equivalence_only_first"]) s.equivalence_only_first = r.boolean(doc["equivalence_only_first"], "equivalence_only_first");
    if (!r.is_null(doc["futility_prob"])) s.futility_prob = r.schedule(doc["futility_prob"], "futility_prob");
    if (!r.is_null(doc["futility_diff"])) s.futility_diff = r.number(doc["futility_diff"], "futility_diff");
    if (doc["futility_only_first"]) s.futility_only_first = r.boolean(doc["futility_only_first"], "futility_only_first");
    if (doc["n_draws"]) s.n_draws = r.integer(doc["n_draws"], "n_draws");

    std::optional<ValidatedSpec> spec;
    try {
        spec = validate_spec(s);
    } catch (const ValidationError& e) {
        r.fail(doc, e.what());
    }

    std::string name = doc["name"] ? r.text(doc["name"], "name") : "design_" + std::to_string(index + 1);
    DesignConfig config{std::move(name), std::move(*spec), {}, std::nullopt};

    if (const YAML::Node scenarios = doc["scenarios"]) {
        if (!scenarios.IsSequence()) r.fail(scenarios, "scenarios must be a list");
        for (const auto& item : scenarios) {
            std::set<std::string> allowed = kTruthKeys;
            allowed.insert("label");
            r.check_keys(item, allowed, "scenario");
            ScenarioDef def;
            if (item["label"]) def.label = r.text(item["label"], "scenario label");
            def.truth = read_truth(r, item, s.outcome.kind, n, "scenario");
            try {
                with_truth(config.spec, def.truth);
            } catch (const ValidationError& e) {
                r.fail(item, e.what());
            }
            config.scenarios.push_back(std::move(def));
        }
    }
    if (const YAML::Node grid = doc["scenario_grid"]) {
        r.check_keys(grid, {"effects", "fixed_arms"}, "scenario_grid");
        if (!grid["effects"]) r.fail(grid, "scenario_grid needs 'effects'");
        ScenarioGridDef def;
        def.effects = r.numbers(grid["effects"], "effects");
        if (grid["fixed_arms"]) def.fixed_arms = r.strings(grid["fixed_arms"], "fixed_arms");
        for (const auto& arm : def.fixed_arms) {
            if (std::find(s.arms.begin(), s.arms.end(), arm) == s.arms.end()) {
                r.fail(grid["fixed_arms"], "fixed arm '" + arm + "' is not an arm");
            }
        }
        config.grid = std::move(def);
    }
    return config;
}

}  // namespace

std::vector<DesignConfig> parse_config_string(const std::string& text, const std::string& source) {
    std::vector<YAML::Node> docs;
    try {
        docs = YAML::LoadAll(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    const Reader reader(source);
    std::vector<DesignConfig> out;
    std::set<std::string> names;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (docs[i].IsNull()) continue;
        out.push_back(read_design(reader, docs[i], out.size()));
        if (!names.insert(out.back().name).second) reader.fail(docs[i]["name"], "duplicate design name '" + out.back().name + "'");
    }
    if (out.empty()) throw ConfigError(source + ": no designs found");
    return out;
}

std::vector<Scenario> design_scenarios(const DesignConfig& design) {
    std::vector<Scenario> out;
    for (const auto& def : design.scenarios) {
        ValidatedSpec spec = with_truth(design.spec, def.truth);
        std::string label = def.label.empty() ? scenario_label(spec) : def.label;
        out.push_back({std::move(label), std::move(spec)});
    }
    if (design.grid) {
        auto grid = scenario_grid(design.spec, design.grid->effects, design.grid->fixed_arms);
        std::move(grid.begin(), grid.end(), std::back_inserter(out));
    }
    if (out.empty()) out.push_back({scenario_label(design.spec), design.spec});
    return out;
}

std::vector<DesignConfig> parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_string(text.str(), path.string());
}

}  // namespace trialsim::io

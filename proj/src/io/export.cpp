#include "trialsim/io/export.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace trialsim::io {

std::string format_number(std::optional<double> value) {
    if (!value || !std::isfinite(*value)) return "NA";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, *value);
    return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

namespace {

std::string uncertainty(const std::optional<double>& v, bool bootstrapped) {
    if (!bootstrapped) return "";
    return format_number(v);
}

void metric_row(std::ostream& out, const std::string& name, const MetricValue& v, bool boot) {
    out << csv_field(name) << ',' << format_number(v.estimate) << ',' << uncertainty(v.err_sd, boot) << ','
        << uncertainty(v.err_mad, boot) << ',' << uncertainty(v.lo, boot) << ',' << uncertainty(v.hi, boot) << '\n';
}

}  // namespace

void write_metrics_csv(std::ostream& out, const PerformanceSummary& summary) {
    out << "metric,est,err_sd,err_mad,lo,hi\n";
    for (std::size_t m = 0; m < summary.names.size(); ++m) {
        metric_row(out, summary.names[m], summary.values[m], summary.bootstrapped);
    }
}

void write_scenario_metrics_csv(std::ostream& out, const std::vector<ScenarioSummary>& scenarios) {
    out << "scenario,metric,est,err_sd,err_mad,lo,hi\n";
    for (const auto& sc : scenarios) {
        for (std::size_t m = 0; m < sc.summary.names.size(); ++m) {
            out << csv_field(sc.label) << ',';
            metric_row(out, sc.summary.names[m], sc.summary.values[m], sc.summary.bootstrapped);
        }
    }
}

void write_key_results_csv(std::ostream& out, const std::vector<ScenarioSummary>& scenarios) {
    static const char* const kKeys[] = {"size_mean",     "prob_conclusive", "prob_superior", "prob_equivalence",
                                        "prob_futility", "prob_max"};
    static const char* const kTail[] = {"prob_select_none", "rmse", "mae", "idp"};
    out << "scenario";
    if (!scenarios.empty()) {
        for (const auto& arm : scenarios.front().arms) out << ',' << csv_field("true_" + arm);
        for (const char* k : kKeys) out << ',' << k;
        for (const auto& arm : scenarios.front().arms) out << ',' << csv_field("prob_select_arm_" + arm);
        for (const char* k : kTail) out << ',' << k;
    }
    out << '\n';
    for (const auto& sc : scenarios) {
        out << csv_field(sc.label);
        for (double y : sc.true_ys) out << ',' << format_number(y);
        for (const char* k : kKeys) out << ',' << format_number(sc.summary.at(k).estimate);
        for (const auto& arm : sc.arms) out << ',' << format_number(sc.summary.at("prob_select_arm_" + arm).estimate);
        for (const char* k : kTail) out << ',' << format_number(sc.summary.at(k).estimate);
        out << '\n';
    }
}

void write_combos_csv(std::ostream& out, const std::vector<ArmCombo>& combos, const std::vector<std::string>& arms) {
    out << "arms,count,frequency\n";
    for (const auto& c : combos) {
        std::string names;
        for (std::size_t i = 0; i < c.arms.size(); ++i) names += (i ? "|" : "") + arms.at(c.arms[i]);
        out << csv_field(names) << ',' << c.count << ',' << format_number(c.frequency) << '\n';
    }
}

}  // namespace trialsim::io

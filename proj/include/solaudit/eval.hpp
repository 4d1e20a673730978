#pragma once

// Response parsing, the auditor→verifier demotion rule, and per-class /
// macro precision-recall-F1 reporting.

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "label.hpp"

namespace solaudit::eval {

enum class ParseStatus { Clean, Fuzzy, Failed };

inline std::string_view parse_status_name(ParseStatus status) {
    switch (status) {
        case ParseStatus::Clean: return "clean";
        case ParseStatus::Fuzzy: return "fuzzy";
        case ParseStatus::Failed: return "failed";
    }
    return "failed";
}

struct Prediction {
    std::string sample_id;
    VulnerabilityLabel predicted = VulnerabilityLabel::None;
    std::optional<bool> verified;  // present only when the verifier pass ran
    ParseStatus parse_status = ParseStatus::Failed;
};

namespace detail {

inline std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Longest synonyms first so "price manipulation" beats "price".
inline const std::vector<std::pair<std::string, VulnerabilityLabel>>& synonyms() {
    static const std::vector<std::pair<std::string, VulnerabilityLabel>> table = {
        {"timestamp-dependence", VulnerabilityLabel::TimestampDependence},
        {"timestamp dependence", VulnerabilityLabel::TimestampDependence},
        {"timestamp dependency", VulnerabilityLabel::TimestampDependence},
        {"block timestamp", VulnerabilityLabel::TimestampDependence},
        {"block.timestamp", VulnerabilityLabel::TimestampDependence},
        {"price-manipulation", VulnerabilityLabel::PriceManipulation},
        {"price manipulation", VulnerabilityLabel::PriceManipulation},
        {"oracle manipulation", VulnerabilityLabel::PriceManipulation},
        {"integer overflow", VulnerabilityLabel::Arithmetic},
        {"integer underflow", VulnerabilityLabel::Arithmetic},
        {"re-entrancy", VulnerabilityLabel::Reentrancy},
        {"reentrancy", VulnerabilityLabel::Reentrancy},
        {"reentrant", VulnerabilityLabel::Reentrancy},
        {"arithmetic", VulnerabilityLabel::Arithmetic},
        {"overflow", VulnerabilityLabel::Arithmetic},
        {"underflow", VulnerabilityLabel::Arithmetic},
        {"no vulnerability", VulnerabilityLabel::None},
        {"not vulnerable", VulnerabilityLabel::None},
    };
    return table;
}

inline std::string trim(const std::string& s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

}  // namespace detail

// First tries the LABEL: line (clean); then a case-insensitive synonym scan
// where the last occurrence wins (fuzzy); otherwise (none, failed).
inline std::pair<VulnerabilityLabel, ParseStatus> parse_response(const std::string& raw_text) {
    auto label_pos = raw_text.rfind("LABEL:");
    if (label_pos != std::string::npos) {
        auto line_end = raw_text.find('\n', label_pos);
        std::string value = raw_text.substr(label_pos + 6, line_end == std::string::npos
                                                               ? std::string::npos
                                                               : line_end - label_pos - 6);
        if (auto label = parse_label(detail::lowercase(detail::trim(value)))) {
            return {*label, ParseStatus::Clean};
        }
    }

    const std::string haystack = detail::lowercase(raw_text);
    std::optional<VulnerabilityLabel> best;
    std::size_t best_pos = 0;
    for (const auto& [needle, label] : detail::synonyms()) {
        auto pos = haystack.rfind(needle);
        if (pos == std::string::npos) continue;
        if (!best || pos > best_pos) {
            best = label;
            best_pos = pos;
        }
    }
    if (best) return {*best, ParseStatus::Fuzzy};
    return {VulnerabilityLabel::None, ParseStatus::Failed};
}

// CONFIRM keeps the prediction; REJECT or anything unparseable demotes it.
inline Prediction apply_verifier(Prediction pred, const std::string& verdict_text) {
    if (pred.predicted == VulnerabilityLabel::None) {
        throw std::invalid_argument("verifier applies only to concrete predictions");
    }
    const std::string verdict = detail::trim(verdict_text);
    const bool confirmed =
        verdict.find("CONFIRM") != std::string::npos && verdict.find("REJECT") == std::string::npos;
    if (confirmed) {
        pred.verified = true;
    } else {
        pred.predicted = VulnerabilityLabel::None;
        pred.verified = false;
    }
    return pred;
}

// ---------------------------------------------------------------------------
// Scoring

struct GoldSample {
    std::string sample_id;
    VulnerabilityLabel label = VulnerabilityLabel::None;
};

struct LabelCounts {
    std::size_t tp = 0, fp = 0, fn = 0;
    bool operator==(const LabelCounts&) const = default;
};

struct LabelMetrics {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    bool zero_denominator = false;  // some metric defaulted to 0
};

struct MetricsReport {
    std::map<VulnerabilityLabel, LabelCounts> counts;       // the four scored labels
    std::map<VulnerabilityLabel, LabelMetrics> per_label;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    double accuracy = 0.0;  // exact match over all samples including "none"
    double clean_rate = 0.0, fuzzy_rate = 0.0, parse_failure_rate = 0.0;
    std::size_t sample_count = 0;
};

inline MetricsReport score(const std::vector<Prediction>& predictions,
                           const std::vector<GoldSample>& gold) {
    std::map<std::string, const Prediction*> by_id;
    for (const auto& pred : predictions) {
        if (!by_id.emplace(pred.sample_id, &pred).second) {
            throw std::invalid_argument("duplicate prediction for sample " + pred.sample_id);
        }
    }

    MetricsReport report;
    report.sample_count = gold.size();
    for (VulnerabilityLabel label : kScoredLabels) report.counts[label];

    std::size_t correct = 0, clean = 0, fuzzy = 0, failed = 0;
    for (const auto& g : gold) {
        auto it = by_id.find(g.sample_id);
        VulnerabilityLabel predicted = VulnerabilityLabel::None;
        if (it != by_id.end()) {
            predicted = it->second->predicted;
            switch (it->second->parse_status) {
                case ParseStatus::Clean: ++clean; break;
                case ParseStatus::Fuzzy: ++fuzzy; break;
                case ParseStatus::Failed: ++failed; break;
            }
        } else {
            ++failed;  // missing prediction counts as None/failed
        }
        if (predicted == g.label) ++correct;
        for (VulnerabilityLabel label : kScoredLabels) {
            const bool is_gold = g.label == label;
            const bool is_pred = predicted == label;
            auto& c = report.counts[label];
            if (is_gold && is_pred) ++c.tp;
            else if (is_pred) ++c.fp;
            else if (is_gold) ++c.fn;
        }
    }

    double sum_p = 0.0, sum_r = 0.0, sum_f1 = 0.0;
    for (VulnerabilityLabel label : kScoredLabels) {
        const auto& c = report.counts[label];
        LabelMetrics m;
        if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / (c.tp + c.fp);
        else m.zero_denominator = true;
        if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / (c.tp + c.fn);
        else m.zero_denominator = true;
        if (m.precision + m.recall > 0) {
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        } else {
            m.zero_denominator = true;
        }
        sum_p += m.precision;
        sum_r += m.recall;
        sum_f1 += m.f1;
        report.per_label[label] = m;
    }
    // macro-F1 is the mean of per-class F1s, not the harmonic mean of
    // macro-P and macro-R
    report.macro_precision = sum_p / kScoredLabels.size();
    report.macro_recall = sum_r / kScoredLabels.size();
    report.macro_f1 = sum_f1 / kScoredLabels.size();

    if (!gold.empty()) {
        const double n = static_cast<double>(gold.size());
        report.accuracy = correct / n;
        report.clean_rate = clean / n;
        report.fuzzy_rate = fuzzy / n;
        report.parse_failure_rate = failed / n;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Rendering

inline nlohmann::ordered_json report_to_json(const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["sample_count"] = report.sample_count;
    j["per_label"] = nlohmann::ordered_json::object();
    for (VulnerabilityLabel label : kScoredLabels) {
        const auto& c = report.counts.at(label);
        const auto& m = report.per_label.at(label);
        j["per_label"][std::string(label_name(label))] = {
            {"tp", c.tp},
            {"fp", c.fp},
            {"fn", c.fn},
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"zero_denominator", m.zero_denominator},
        };
    }
    j["macro"] = {{"precision", report.macro_precision},
                  {"recall", report.macro_recall},
                  {"f1", report.macro_f1}};
    j["accuracy"] = report.accuracy;
    j["parse_rates"] = {{"clean", report.clean_rate},
                        {"fuzzy", report.fuzzy_rate},
                        {"failed", report.parse_failure_rate}};
    return j;
}

// Markdown table with the RV / AV / TDV / PMV column layout.
inline std::string report_table(const MetricsReport& report,
                                const std::string& method_name = "solaudit") {
    auto fmt = [](double v) {
        std::ostringstream out;
        out.setf(std::ios::fixed);
        out.precision(2);
        out << v;
        return out.str();
    };
    std::ostringstream out;
    out << "| Method | Metric | RV | AV | TDV | PMV |\n";
    out << "|---|---|---|---|---|---|\n";
    const std::vector<std::pair<std::string, double LabelMetrics::*>> metric_rows = {
        {"PRE", &LabelMetrics::precision},
        {"REC", &LabelMetrics::recall},
        {"F1", &LabelMetrics::f1},
    };
    for (const auto& [metric_name, member] : metric_rows) {
        out << "| " << method_name << " | " << metric_name;
        for (VulnerabilityLabel label : kScoredLabels) {
            out << " | " << fmt(report.per_label.at(label).*member);
        }
        out << " |\n";
    }
    out << "\nMacro: PRE " << fmt(report.macro_precision) << ", REC " << fmt(report.macro_recall)
        << ", F1 " << fmt(report.macro_f1) << "; accuracy " << fmt(report.accuracy)
        << "; parse failures " << fmt(report.parse_failure_rate) << "\n";
    return out.str();
}

}  // namespace solaudit::eval

#pragma once

// Random over-sampling: duplicates minority-class records until every label
// present in the input reaches the majority count.

#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <random>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "label.hpp"

namespace solaudit::augment {

struct ClassHistogram {
    std::map<VulnerabilityLabel, std::size_t> counts;

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& [label, count] : counts) n += count;
        return n;
    }
    std::size_t max_count() const {
        std::size_t m = 0;
        for (const auto& [label, count] : counts) m = std::max(m, count);
        return m;
    }
    bool operator==(const ClassHistogram&) const = default;
};

inline ClassHistogram histogram(const std::vector<dataset::DialogueRecord>& records) {
    ClassHistogram hist;
    for (const auto& record : records) {
        hist.counts[dataset::record_label(record)]++;  // throws on unparseable label
    }
    return hist;
}

// Originals first in input order, then duplicates in generation order.
// Sampling is with replacement; the RNG stream is part of the contract.
inline std::vector<dataset::DialogueRecord> ros_balance(
    const std::vector<dataset::DialogueRecord>& records, std::uint64_t seed) {
    if (records.empty()) return {};

    std::map<VulnerabilityLabel, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < records.size(); ++i) {
        by_label[dataset::record_label(records[i])].push_back(i);
    }
    std::size_t target = 0;
    for (const auto& [label, members] : by_label) target = std::max(target, members.size());

    std::vector<dataset::DialogueRecord> out = records;
    std::mt19937_64 rng(seed);
    for (VulnerabilityLabel label : kAllLabels) {
        auto it = by_label.find(label);
        if (it == by_label.end()) continue;
        const auto& members = it->second;
        std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
        for (std::size_t n = members.size(); n < target; ++n) {
            out.push_back(records[members[pick(rng)]]);
        }
    }
    return out;
}

// Before/after table for the CLI.
inline std::string histogram_table(const ClassHistogram& before, const ClassHistogram& after) {
    std::ostringstream out;
    out << std::left << std::setw(22) << "label" << std::setw(8) << "before" << "after\n";
    for (VulnerabilityLabel label : kAllLabels) {
        auto b = before.counts.count(label) ? before.counts.at(label) : 0;
        auto a = after.counts.count(label) ? after.counts.at(label) : 0;
        if (b == 0 && a == 0) continue;
        out << std::setw(22) << label_name(label) << std::setw(8) << b << a << "\n";
    }
    out << std::setw(22) << "total" << std::setw(8) << before.total() << after.total() << "\n";
    return out.str();
}

}  // namespace solaudit::augment

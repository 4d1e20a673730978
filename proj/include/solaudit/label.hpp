#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace solaudit {

// Closed set of flaw classes scored by the pipeline. "none" is the
// negative class and never appears in macro-averaged metrics.
enum class VulnerabilityLabel {
    Reentrancy,
    Arithmetic,
    TimestampDependence,
    PriceManipulation,
    None,
};

inline constexpr std::array<VulnerabilityLabel, 4> kScoredLabels = {
    VulnerabilityLabel::Reentrancy,
    VulnerabilityLabel::Arithmetic,
    VulnerabilityLabel::TimestampDependence,
    VulnerabilityLabel::PriceManipulation,
};

inline constexpr std::array<VulnerabilityLabel, 5> kAllLabels = {
    VulnerabilityLabel::Reentrancy,
    VulnerabilityLabel::Arithmetic,
    VulnerabilityLabel::TimestampDependence,
    VulnerabilityLabel::PriceManipulation,
    VulnerabilityLabel::None,
};

inline std::string_view label_name(VulnerabilityLabel label) {
    switch (label) {
        case VulnerabilityLabel::Reentrancy: return "reentrancy";
        case VulnerabilityLabel::Arithmetic: return "arithmetic";
        case VulnerabilityLabel::TimestampDependence: return "timestamp-dependence";
        case VulnerabilityLabel::PriceManipulation: return "price-manipulation";
        case VulnerabilityLabel::None: return "none";
    }
    throw std::logic_error("unreachable label");
}

// Short column codes used in report tables.
inline std::string_view label_code(VulnerabilityLabel label) {
    switch (label) {
        case VulnerabilityLabel::Reentrancy: return "RV";
        case VulnerabilityLabel::Arithmetic: return "AV";
        case VulnerabilityLabel::TimestampDependence: return "TDV";
        case VulnerabilityLabel::PriceManipulation: return "PMV";
        case VulnerabilityLabel::None: return "NONE";
    }
    throw std::logic_error("unreachable label");
}

inline std::optional<VulnerabilityLabel> parse_label(std::string_view name) {
    for (VulnerabilityLabel label : kAllLabels) {
        if (name == label_name(label)) return label;
    }
    return std::nullopt;
}

inline VulnerabilityLabel parse_label_or_throw(std::string_view name) {
    if (auto label = parse_label(name)) return *label;
    throw std::invalid_argument("unknown vulnerability label: " + std::string(name));
}

}  // namespace solaudit

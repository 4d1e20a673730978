#pragma once

// Three-role dialogue records for auditor training, JSONL serialization, and
// seeded stratified train/test splitting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "label.hpp"

namespace solaudit::dataset {

// Fixed auditor instruction, reproduced byte-for-byte including the missing
// space after the first period.
inline constexpr std::string_view kAuditorSystemPrompt =
    "You are a smart contract auditor.Review the following smart contract code "
    "in detail and identify vulnerabilities type within it.";

inline constexpr std::string_view kDescriptionDelimiter = "--- DESCRIPTION ---";

struct AuditSample {
    std::string id;  // content hash, filled by finalize()
    std::string source_code;
    std::string description;
    VulnerabilityLabel label = VulnerabilityLabel::None;
    std::string project;
};

struct Message {
    std::string role;
    std::string content;
    bool operator==(const Message&) const = default;
};

struct DialogueRecord {
    std::vector<Message> messages;  // exactly system, user, assistant
    bool operator==(const DialogueRecord&) const = default;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace detail

// id is a pure function of (source_code, description, label).
inline std::string sample_id(const AuditSample& s) {
    std::uint64_t h = detail::fnv1a(s.source_code);
    h = detail::fnv1a("\x1f", h);
    h = detail::fnv1a(s.description, h);
    h = detail::fnv1a("\x1f", h);
    h = detail::fnv1a(label_name(s.label), h);
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

inline AuditSample make_sample(std::string source_code, std::string description,
                               VulnerabilityLabel label, std::string project = {}) {
    if (source_code.empty()) throw std::invalid_argument("sample source_code must be non-empty");
    AuditSample s;
    s.source_code = std::move(source_code);
    s.description = std::move(description);
    s.label = label;
    s.project = std::move(project);
    s.id = sample_id(s);
    return s;
}

inline DialogueRecord build_record(const AuditSample& sample) {
    DialogueRecord record;
    record.messages.push_back({"system", std::string(kAuditorSystemPrompt)});
    record.messages.push_back({"user", sample.source_code + "\n" +
                                           std::string(kDescriptionDelimiter) + "\n" +
                                           sample.description});
    record.messages.push_back({"assistant", std::string(label_name(sample.label))});
    return record;
}

// Splits a user message back into (source_code, description).
inline std::pair<std::string, std::string> split_user_content(const std::string& content) {
    const std::string marker = "\n" + std::string(kDescriptionDelimiter) + "\n";
    auto pos = content.rfind(marker);
    if (pos == std::string::npos) return {content, ""};
    return {content.substr(0, pos), content.substr(pos + marker.size())};
}

inline VulnerabilityLabel record_label(const DialogueRecord& record) {
    if (record.messages.size() != 3 || record.messages[2].role != "assistant") {
        throw std::invalid_argument("record does not have the system/user/assistant shape");
    }
    return parse_label_or_throw(record.messages[2].content);
}

// ---------------------------------------------------------------------------
// JSONL serialization: one {"messages":[...]} object per line, key order
// preserved, parse∘serialize = identity.

inline nlohmann::ordered_json record_to_json(const DialogueRecord& record) {
    nlohmann::ordered_json j;
    j["messages"] = nlohmann::ordered_json::array();
    for (const auto& msg : record.messages) {
        j["messages"].push_back({{"role", msg.role}, {"content", msg.content}});
    }
    return j;
}

inline DialogueRecord record_from_json(const nlohmann::json& j) {
    DialogueRecord record;
    for (const auto& msg : j.at("messages")) {
        record.messages.push_back(
            {msg.at("role").get<std::string>(), msg.at("content").get<std::string>()});
    }
    return record;
}

inline std::string serialize(const std::vector<DialogueRecord>& records) {
    std::string out;
    for (const auto& record : records) {
        out += record_to_json(record).dump();
        out.push_back('\n');
    }
    return out;
}

inline std::vector<DialogueRecord> parse_jsonl(const std::string& text) {
    std::vector<DialogueRecord> records;
    std::istringstream stream(text);
    std::string line;
    while (std::getline(stream, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_json(nlohmann::json::parse(line)));
    }
    return records;
}

// ---------------------------------------------------------------------------
// Train/test split, stratified by label.

struct DatasetSplit {
    std::vector<DialogueRecord> train;
    std::vector<AuditSample> test;
    std::uint64_t seed = 0;
    double ratio = 0.8;
    std::vector<std::string> warnings;
};

inline DatasetSplit split(const std::vector<AuditSample>& samples, double ratio,
                          std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("ratio must be in (0,1)");

    DatasetSplit result;
    result.seed = seed;
    result.ratio = ratio;

    // Strata iterated in canonical label order so the shuffle stream is stable.
    std::mt19937_64 rng(seed);
    for (VulnerabilityLabel label : kAllLabels) {
        std::vector<const AuditSample*> stratum;
        for (const auto& s : samples) {
            if (s.label == label) stratum.push_back(&s);
        }
        if (stratum.empty()) continue;
        std::shuffle(stratum.begin(), stratum.end(), rng);

        std::size_t n = stratum.size();
        std::size_t n_train;
        if (n == 1) {
            n_train = 1;
            result.warnings.push_back("label " + std::string(label_name(label)) +
                                      " has a single sample; placed in train");
        } else {
            n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
            n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (i < n_train) {
                result.train.push_back(build_record(*stratum[i]));
            } else {
                result.test.push_back(*stratum[i]);
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Manifest loading for the CLI: JSON array of {path, description_path?, label,
// project}. Per-project granularity concatenates same-(project,label) files
// with file-boundary markers.

enum class Granularity { File, Project };

inline std::vector<AuditSample> load_manifest(const std::filesystem::path& manifest_path,
                                              Granularity granularity = Granularity::File) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("cannot read manifest: " + manifest_path.string());
    nlohmann::json manifest = nlohmann::json::parse(in);
    auto base = manifest_path.parent_path();

    auto read_file = [&](const std::string& rel) {
        std::ifstream f(base / rel, std::ios::binary);
        if (!f) throw std::runtime_error("cannot read sample file: " + rel);
        std::ostringstream buf;
        buf << f.rdbuf();
        return buf.str();
    };

    struct Entry {
        std::string path, code, description, project;
        VulnerabilityLabel label;
    };
    std::vector<Entry> entries;
    for (const auto& item : manifest) {
        Entry e;
        e.path = item.at("path").get<std::string>();
        e.code = read_file(e.path);
        if (item.contains("description_path")) {
            e.description = read_file(item.at("description_path").get<std::string>());
        }
        e.label = parse_label_or_throw(item.at("label").get<std::string>());
        e.project = item.value("project", std::string{});
        entries.push_back(std::move(e));
    }

    std::vector<AuditSample> samples;
    if (granularity == Granularity::File) {
        for (auto& e : entries) {
            samples.push_back(make_sample(e.code, e.description, e.label, e.project));
        }
        return samples;
    }

    // project granularity: stable grouping in manifest order
    std::vector<std::pair<std::string, VulnerabilityLabel>> order;
    std::map<std::pair<std::string, VulnerabilityLabel>, std::pair<std::string, std::string>> groups;
    for (auto& e : entries) {
        auto key = std::make_pair(e.project, e.label);
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) order.push_back(key);
        it->second.first += "// ===== FILE: " + e.path + " =====\n" + e.code + "\n";
        if (!e.description.empty()) {
            if (!it->second.second.empty()) it->second.second += "\n";
            it->second.second += e.description;
        }
    }
    for (const auto& key : order) {
        const auto& [code, desc] = groups.at(key);
        samples.push_back(make_sample(code, desc, key.second, key.first));
    }
    return samples;
}

}  // namespace solaudit::dataset

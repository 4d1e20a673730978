#pragma once

// Inference-time prompt rendering. Template wording lives in editable text
// assets under templates/; this module loads, validates, and fills them.

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "label.hpp"

namespace solaudit::prompts {

struct PromptTemplate {
    std::string name;  // basic | cot | verifier
    std::string role_definition;
    std::string prior_knowledge;   // must enumerate the four scored labels
    std::string response_format;
    std::optional<std::string> reasoning_scaffold;  // cot only
    std::string user_body;  // carries {{code}}, {{description}}, {{claimed_label}}
};

struct RenderedPrompt {
    std::vector<dataset::Message> messages;
    std::string template_name;
    std::string sample_id;
};

namespace detail {

inline std::string trim(const std::string& s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::size_t replace_all(std::string& text, const std::string& from,
                               const std::string& to) {
    std::size_t count = 0;
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
        ++count;
    }
    return count;
}

}  // namespace detail

// Template files use `## section` delimiter lines: role, prior-knowledge,
// reasoning (optional), response-format, user.
inline PromptTemplate parse_template(const std::string& name, const std::string& text) {
    PromptTemplate tpl;
    tpl.name = name;

    std::istringstream stream(text);
    std::string line, section, body;
    auto flush = [&] {
        std::string content = detail::trim(body);
        if (section == "role") tpl.role_definition = content;
        else if (section == "prior-knowledge") tpl.prior_knowledge = content;
        else if (section == "reasoning") tpl.reasoning_scaffold = content;
        else if (section == "response-format") tpl.response_format = content;
        else if (section == "user") tpl.user_body = content;
        else if (!section.empty()) throw std::runtime_error("unknown template section: " + section);
        body.clear();
    };
    while (std::getline(stream, line)) {
        if (line.rfind("## ", 0) == 0) {
            flush();
            section = detail::trim(line.substr(3));
        } else {
            body += line;
            body.push_back('\n');
        }
    }
    flush();

    if (tpl.role_definition.empty() || tpl.response_format.empty() || tpl.user_body.empty()) {
        throw std::runtime_error("template " + name + " is missing a required section");
    }
    if (name != "verifier") {
        if (tpl.prior_knowledge.empty()) {
            throw std::runtime_error("template " + name + " is missing prior-knowledge");
        }
        for (VulnerabilityLabel label : kScoredLabels) {
            if (tpl.prior_knowledge.find(label_name(label)) == std::string::npos) {
                throw std::runtime_error("template " + name + " prior-knowledge does not name " +
                                         std::string(label_name(label)));
            }
        }
    }
    if (name == "cot" && !tpl.reasoning_scaffold) {
        throw std::runtime_error("cot template requires a reasoning section");
    }
    return tpl;
}

inline PromptTemplate load_template(const std::filesystem::path& templates_dir,
                                    const std::string& name) {
    std::ifstream in(templates_dir / (name + ".txt"));
    if (!in) {
        throw std::runtime_error("cannot read template: " +
                                 (templates_dir / (name + ".txt")).string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_template(name, buf.str());
}

// Rough char-based budget; 0 disables the check.
inline constexpr std::size_t kDefaultCodeBudget = 512 * 1024;

inline RenderedPrompt render(const PromptTemplate& tpl, const dataset::AuditSample& sample,
                             std::size_t code_budget = kDefaultCodeBudget) {
    if (code_budget && sample.source_code.size() > code_budget) {
        throw std::runtime_error("contract code exceeds budget: " +
                                 std::to_string(sample.source_code.size()) + " > " +
                                 std::to_string(code_budget) + " bytes");
    }

    std::string system_content = tpl.role_definition;
    if (!tpl.prior_knowledge.empty()) system_content += "\n\n" + tpl.prior_knowledge;

    std::string user = tpl.user_body;
    std::size_t code_slots = detail::replace_all(user, "{{code}}", sample.source_code);
    detail::replace_all(user, "{{description}}", sample.description);
    if (code_slots != 1) {
        throw std::runtime_error("template " + tpl.name + " must reference {{code}} exactly once");
    }
    if (tpl.reasoning_scaffold) {
        user = *tpl.reasoning_scaffold + "\n\n" + user;
    }
    user += "\n\n" + tpl.response_format;  // the answer instruction stays last

    // self-parse check: the final instruction must admit machine extraction
    if (tpl.response_format.find("LABEL:") == std::string::npos &&
        tpl.response_format.find("CONFIRM") == std::string::npos) {
        throw std::runtime_error("template " + tpl.name +
                                 " response format is not machine-parseable");
    }

    RenderedPrompt out;
    out.template_name = tpl.name;
    out.sample_id = sample.id;
    out.messages.push_back({"system", system_content});
    out.messages.push_back({"user", user});
    return out;
}

inline RenderedPrompt render_verifier(const PromptTemplate& tpl, VulnerabilityLabel claimed,
                                      const dataset::AuditSample& sample) {
    if (claimed == VulnerabilityLabel::None) {
        throw std::invalid_argument("verifier requires a concrete claimed label");
    }
    if (tpl.name != "verifier") {
        throw std::invalid_argument("render_verifier needs the verifier template");
    }

    std::string user = tpl.user_body;
    std::size_t code_slots = detail::replace_all(user, "{{code}}", sample.source_code);
    detail::replace_all(user, "{{claimed_label}}", std::string(label_name(claimed)));
    if (code_slots != 1) {
        throw std::runtime_error("verifier template must reference {{code}} exactly once");
    }
    user += "\n\n" + tpl.response_format;

    if (tpl.response_format.find("CONFIRM") == std::string::npos) {
        throw std::runtime_error("verifier response format must demand CONFIRM/REJECT");
    }

    RenderedPrompt out;
    out.template_name = tpl.name;
    out.sample_id = sample.id;
    out.messages.push_back({"system", tpl.role_definition});
    out.messages.push_back({"user", user});
    return out;
}

inline nlohmann::ordered_json prompt_to_json(const RenderedPrompt& prompt) {
    nlohmann::ordered_json j;
    j["template"] = prompt.template_name;
    j["sample_id"] = prompt.sample_id;
    j["messages"] = nlohmann::ordered_json::array();
    for (const auto& msg : prompt.messages) {
        j["messages"].push_back({{"role", msg.role}, {"content", msg.content}});
    }
    return j;
}

inline RenderedPrompt prompt_from_json(const nlohmann::json& j) {
    RenderedPrompt prompt;
    prompt.template_name = j.at("template").get<std::string>();
    prompt.sample_id = j.at("sample_id").get<std::string>();
    for (const auto& msg : j.at("messages")) {
        prompt.messages.push_back(
            {msg.at("role").get<std::string>(), msg.at("content").get<std::string>()});
    }
    return prompt;
}

}  // namespace solaudit::prompts

#pragma once

// Dependency recovery for Solidity project trees: scans .sol files, parses
// import directives lexically, resolves specifiers to files, and repairs
// missing library contracts from a local stub store.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace solaudit::solgraph {

namespace fs = std::filesystem;

enum class ImportKind { Plain, Aliased, NamedSymbols, Glob };

inline std::string_view import_kind_name(ImportKind kind) {
    switch (kind) {
        case ImportKind::Plain: return "plain";
        case ImportKind::Aliased: return "aliased";
        case ImportKind::NamedSymbols: return "named-symbols";
        case ImportKind::Glob: return "glob";
    }
    return "plain";
}

struct ImportStatement {
    std::string specifier;               // quoted path, verbatim
    ImportKind kind = ImportKind::Plain;
    std::vector<std::string> symbols;    // named-symbols form only
    std::size_t span_begin = 0;          // byte offsets of the full statement
    std::size_t span_end = 0;            // one past the terminating ';'

    bool operator==(const ImportStatement&) const = default;
};

struct SourceUnit {
    std::string path;  // project-relative, '/' separated
    std::string raw_text;
    std::vector<ImportStatement> imports;
    std::vector<std::string> pragma_versions;
    std::vector<std::string> warnings;  // parse warnings, read failures
};

struct DependencyGraph {
    std::set<std::string> nodes;
    std::set<std::pair<std::string, std::string>> edges;  // importer -> imported
    std::vector<std::pair<std::string, std::string>> unresolved;  // (importer, specifier)
};

struct ResolutionReport {
    std::string project_root;
    std::size_t file_count = 0;
    std::size_t edge_count = 0;
    std::vector<std::pair<std::string, std::string>> missing;  // (importer, specifier)
    std::vector<std::pair<std::string, std::string>> patched;  // specifier -> stub path
    std::vector<std::string> notes;
};

using Remappings = std::vector<std::pair<std::string, std::string>>;  // prefix -> dir

// ---------------------------------------------------------------------------
// Import parsing

namespace detail {

inline bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

struct Cursor {
    const std::string& text;
    std::size_t pos = 0;

    bool done() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }

    void skip_ws() {
        while (!done() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    // Quoted string token; returns content without quotes, or nullopt when
    // the literal never terminates on its line.
    std::optional<std::string> take_string() {
        if (done() || (text[pos] != '"' && text[pos] != '\'')) return std::nullopt;
        const char quote = text[pos];
        std::string out;
        for (std::size_t i = pos + 1; i < text.size(); ++i) {
            if (text[i] == quote) {
                pos = i + 1;
                return out;
            }
            if (text[i] == '\n') break;
            out.push_back(text[i]);
        }
        return std::nullopt;
    }

    std::optional<std::string> take_ident() {
        skip_ws();
        std::size_t start = pos;
        while (!done() && is_ident_char(text[pos])) ++pos;
        if (pos == start) return std::nullopt;
        return text.substr(start, pos - start);
    }

    bool take(char c) {
        skip_ws();
        if (!done() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    bool take_keyword(std::string_view kw) {
        skip_ws();
        if (text.compare(pos, kw.size(), kw) != 0) return false;
        std::size_t after = pos + kw.size();
        if (after < text.size() && is_ident_char(text[after])) return false;
        pos = after;
        return true;
    }
};

// Parses one directive starting at the byte after the `import` keyword.
// On success fills `out` and leaves the cursor past the ';'.
inline bool parse_import_tail(Cursor& cur, ImportStatement& out) {
    cur.skip_ws();
    if (cur.done()) return false;

    if (cur.peek() == '"' || cur.peek() == '\'') {
        auto spec = cur.take_string();
        if (!spec || spec->empty()) return false;
        out.specifier = *spec;
        if (cur.take_keyword("as")) {
            if (!cur.take_ident()) return false;
            out.kind = ImportKind::Aliased;
        } else {
            out.kind = ImportKind::Plain;
        }
        return cur.take(';');
    }

    if (cur.peek() == '{') {
        cur.take('{');
        out.kind = ImportKind::NamedSymbols;
        while (true) {
            auto sym = cur.take_ident();
            if (!sym) return false;
            out.symbols.push_back(*sym);
            if (cur.take_keyword("as")) {
                if (!cur.take_ident()) return false;
            }
            if (cur.take(',')) continue;
            if (cur.take('}')) break;
            return false;
        }
        if (!cur.take_keyword("from")) return false;
        cur.skip_ws();
        auto spec = cur.take_string();
        if (!spec || spec->empty()) return false;
        out.specifier = *spec;
        return cur.take(';') && !out.symbols.empty();
    }

    if (cur.peek() == '*') {
        cur.take('*');
        out.kind = ImportKind::Glob;
        if (!cur.take_keyword("as")) return false;
        if (!cur.take_ident()) return false;
        if (!cur.take_keyword("from")) return false;
        cur.skip_ws();
        auto spec = cur.take_string();
        if (!spec || spec->empty()) return false;
        out.specifier = *spec;
        return cur.take(';');
    }

    return false;
}

}  // namespace detail

// Lexical import scan. Comments and string literals are masked while looking
// for the `import` keyword, so commented-out directives never match.
inline std::vector<ImportStatement> parse_imports(const std::string& raw_text,
                                                  std::vector<std::string>* warnings = nullptr) {
    std::vector<ImportStatement> result;
    enum class State { Code, LineComment, BlockComment, Str };
    State state = State::Code;
    char quote = 0;

    for (std::size_t i = 0; i < raw_text.size(); ++i) {
        const char c = raw_text[i];
        const char next = i + 1 < raw_text.size() ? raw_text[i + 1] : 0;
        switch (state) {
            case State::LineComment:
                if (c == '\n') state = State::Code;
                break;
            case State::BlockComment:
                if (c == '*' && next == '/') {
                    state = State::Code;
                    ++i;
                }
                break;
            case State::Str:
                if (c == '\\') ++i;
                else if (c == quote || c == '\n') state = State::Code;
                break;
            case State::Code:
                if (c == '/' && next == '/') {
                    state = State::LineComment;
                    ++i;
                } else if (c == '/' && next == '*') {
                    state = State::BlockComment;
                    ++i;
                } else if (c == '"' || c == '\'') {
                    state = State::Str;
                    quote = c;
                } else if (c == 'i' && raw_text.compare(i, 6, "import") == 0 &&
                           (i == 0 || !detail::is_ident_char(raw_text[i - 1])) &&
                           (i + 6 >= raw_text.size() || !detail::is_ident_char(raw_text[i + 6]))) {
                    detail::Cursor cur{raw_text, i + 6};
                    ImportStatement stmt;
                    stmt.span_begin = i;
                    if (detail::parse_import_tail(cur, stmt)) {
                        stmt.span_end = cur.pos;
                        result.push_back(std::move(stmt));
                        i = cur.pos - 1;
                    } else {
                        if (warnings) {
                            std::ostringstream msg;
                            msg << "malformed import directive at byte " << i << ", skipped";
                            warnings->push_back(msg.str());
                        }
                        i += 5;  // past "import"
                    }
                }
                break;
        }
    }
    return result;
}

inline std::vector<std::string> parse_pragma_versions(const std::string& raw_text) {
    std::vector<std::string> out;
    std::istringstream stream(raw_text);
    std::string line;
    while (std::getline(stream, line)) {
        auto pos = line.find("pragma solidity");
        if (pos == std::string::npos) continue;
        auto rest = line.substr(pos + 15);
        auto semi = rest.find(';');
        if (semi == std::string::npos) continue;
        rest = rest.substr(0, semi);
        auto first = rest.find_first_not_of(" \t");
        auto last = rest.find_last_not_of(" \t");
        if (first != std::string::npos) out.push_back(rest.substr(first, last - first + 1));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Project scanning

inline std::string to_generic(const fs::path& p) { return p.generic_string(); }

inline std::vector<SourceUnit> scan_project(const fs::path& root) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) {
        throw std::runtime_error("cannot scan project root: " + root.string());
    }

    std::vector<std::string> paths;
    for (auto it = fs::recursive_directory_iterator(
             root, fs::directory_options::skip_permission_denied);
         it != fs::recursive_directory_iterator(); ++it) {
        if (it->is_symlink()) {
            // never follow links that could escape the project tree
            it.disable_recursion_pending();
            continue;
        }
        if (!it->is_regular_file()) continue;
        if (it->path().extension() != ".sol") continue;
        paths.push_back(to_generic(fs::relative(it->path(), root)));
    }
    std::sort(paths.begin(), paths.end());

    std::vector<SourceUnit> units;
    units.reserve(paths.size());
    for (const auto& rel : paths) {
        SourceUnit unit;
        unit.path = rel;
        std::ifstream in(root / rel, std::ios::binary);
        if (!in) {
            unit.warnings.push_back("unreadable file: " + rel);
        } else {
            std::ostringstream buf;
            buf << in.rdbuf();
            unit.raw_text = buf.str();
            unit.imports = parse_imports(unit.raw_text, &unit.warnings);
            unit.pragma_versions = parse_pragma_versions(unit.raw_text);
        }
        units.push_back(std::move(unit));
    }
    return units;
}

// ---------------------------------------------------------------------------
// Resolution

// Lexical normalization of "a/./b/../c" shapes without touching the disk.
inline std::optional<std::string> normalize_within_root(const std::string& joined) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : joined + "/") {
        if (c == '/') {
            if (cur == "..") {
                if (parts.empty()) return std::nullopt;  // escapes root
                parts.pop_back();
            } else if (!cur.empty() && cur != ".") {
                parts.push_back(cur);
            }
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back('/');
        out += parts[i];
    }
    return out;
}

// Resolves one specifier against the set of scanned project paths.
// Relative specifiers resolve against the importer's directory; everything
// else goes through remappings (longest prefix wins) then the library root.
inline std::optional<std::string> resolve_specifier(const std::string& importer,
                                                    const std::string& specifier,
                                                    const Remappings& remappings,
                                                    const std::set<std::string>& known_files,
                                                    const std::string& library_root = {}) {
    auto exists = [&](const std::optional<std::string>& p) -> std::optional<std::string> {
        if (p && known_files.count(*p)) return p;
        return std::nullopt;
    };

    if (specifier.rfind("./", 0) == 0 || specifier.rfind("../", 0) == 0) {
        auto slash = importer.find_last_of('/');
        std::string dir = slash == std::string::npos ? "" : importer.substr(0, slash + 1);
        return exists(normalize_within_root(dir + specifier));
    }

    const std::pair<std::string, std::string>* best = nullptr;
    for (const auto& remap : remappings) {
        if (specifier.rfind(remap.first, 0) != 0) continue;
        if (!best || remap.first.size() > best->first.size()) best = &remap;
    }
    if (best) {
        std::string target = best->second;
        if (!target.empty() && target.back() != '/') target.push_back('/');
        return exists(normalize_within_root(target + specifier.substr(best->first.size())));
    }
    if (!library_root.empty()) {
        return exists(normalize_within_root(library_root + "/" + specifier));
    }
    return std::nullopt;
}

inline DependencyGraph build_graph(const std::vector<SourceUnit>& units,
                                   const Remappings& remappings = {},
                                   const std::string& library_root = {}) {
    DependencyGraph graph;
    for (const auto& unit : units) graph.nodes.insert(unit.path);

    for (const auto& unit : units) {
        for (const auto& stmt : unit.imports) {
            auto target = resolve_specifier(unit.path, stmt.specifier, remappings,
                                            graph.nodes, library_root);
            if (target) {
                graph.edges.emplace(unit.path, *target);
            } else {
                graph.unresolved.emplace_back(unit.path, stmt.specifier);
            }
        }
    }
    std::sort(graph.unresolved.begin(), graph.unresolved.end());
    return graph;
}

inline ResolutionReport make_report(const DependencyGraph& graph,
                                    const std::string& project_root = ".") {
    ResolutionReport report;
    report.project_root = project_root;
    report.file_count = graph.nodes.size();
    report.edge_count = graph.edges.size();
    report.missing = graph.unresolved;
    return report;
}

// Copies known stubs into <root>/vendored/ and re-resolves. The stub store is
// keyed by terminal file name; with several candidates the lexicographically
// first wins and the ambiguity is noted in the report.
inline std::pair<DependencyGraph, ResolutionReport> patch_missing(const DependencyGraph& graph,
                                                                  const fs::path& stub_library,
                                                                  const fs::path& project_root) {
    std::map<std::string, std::vector<std::string>> stubs;  // file name -> store paths
    std::error_code ec;
    if (fs::is_directory(stub_library, ec)) {
        for (const auto& entry : fs::recursive_directory_iterator(stub_library)) {
            if (entry.is_regular_file() && entry.path().extension() == ".sol") {
                stubs[entry.path().filename().string()].push_back(
                    to_generic(fs::relative(entry.path(), stub_library)));
            }
        }
    }
    for (auto& [name, candidates] : stubs) std::sort(candidates.begin(), candidates.end());

    DependencyGraph patched_graph = graph;
    ResolutionReport report = make_report(graph);
    report.missing.clear();
    patched_graph.unresolved.clear();

    for (const auto& [importer, specifier] : graph.unresolved) {
        auto slash = specifier.find_last_of('/');
        std::string terminal = slash == std::string::npos ? specifier : specifier.substr(slash + 1);
        auto it = stubs.find(terminal);
        if (it == stubs.end()) {
            patched_graph.unresolved.emplace_back(importer, specifier);
            report.missing.emplace_back(importer, specifier);
            continue;
        }
        if (it->second.size() > 1) {
            report.notes.push_back("ambiguous stub for " + terminal + ": picked " +
                                   it->second.front());
        }
        const std::string vendored = "vendored/" + terminal;
        fs::create_directories(project_root / "vendored");
        fs::copy_file(stub_library / it->second.front(), project_root / vendored,
                      fs::copy_options::overwrite_existing, ec);
        if (ec) {
            throw std::runtime_error("failed to vendor stub " + terminal + ": " + ec.message());
        }
        patched_graph.nodes.insert(vendored);
        patched_graph.edges.emplace(importer, vendored);
        bool already = std::any_of(report.patched.begin(), report.patched.end(),
                                   [&](const auto& p) { return p.first == specifier; });
        if (!already) report.patched.emplace_back(specifier, vendored);
    }

    report.file_count = patched_graph.nodes.size();
    report.edge_count = patched_graph.edges.size();
    return {std::move(patched_graph), std::move(report)};
}

// ---------------------------------------------------------------------------
// Serialization. Sorted arrays are part of the format contract.

inline nlohmann::ordered_json graph_to_json(const DependencyGraph& graph,
                                            const ResolutionReport& report) {
    nlohmann::ordered_json j;
    j["nodes"] = nlohmann::ordered_json::array();
    for (const auto& node : graph.nodes) j["nodes"].push_back(node);
    j["edges"] = nlohmann::ordered_json::array();
    for (const auto& [from, to] : graph.edges) j["edges"].push_back({from, to});
    j["unresolved"] = nlohmann::ordered_json::array();
    for (const auto& [importer, specifier] : graph.unresolved) {
        j["unresolved"].push_back({{"importer", importer}, {"specifier", specifier}});
    }
    nlohmann::ordered_json rep;
    rep["project_root"] = report.project_root;
    rep["file_count"] = report.file_count;
    rep["edge_count"] = report.edge_count;
    rep["missing"] = nlohmann::ordered_json::array();
    for (const auto& [importer, specifier] : report.missing) {
        rep["missing"].push_back({{"importer", importer}, {"specifier", specifier}});
    }
    rep["patched"] = nlohmann::ordered_json::array();
    for (const auto& [specifier, stub] : report.patched) {
        rep["patched"].push_back({{"specifier", specifier}, {"stub", stub}});
    }
    rep["notes"] = report.notes;
    j["report"] = std::move(rep);
    return j;
}

inline std::pair<DependencyGraph, ResolutionReport> graph_from_json(const nlohmann::json& j) {
    DependencyGraph graph;
    for (const auto& node : j.at("nodes")) graph.nodes.insert(node.get<std::string>());
    for (const auto& edge : j.at("edges")) {
        graph.edges.emplace(edge.at(0).get<std::string>(), edge.at(1).get<std::string>());
    }
    for (const auto& u : j.at("unresolved")) {
        graph.unresolved.emplace_back(u.at("importer").get<std::string>(),
                                      u.at("specifier").get<std::string>());
    }
    ResolutionReport report;
    const auto& rep = j.at("report");
    report.project_root = rep.at("project_root").get<std::string>();
    report.file_count = rep.at("file_count").get<std::size_t>();
    report.edge_count = rep.at("edge_count").get<std::size_t>();
    for (const auto& m : rep.at("missing")) {
        report.missing.emplace_back(m.at("importer").get<std::string>(),
                                    m.at("specifier").get<std::string>());
    }
    for (const auto& p : rep.at("patched")) {
        report.patched.emplace_back(p.at("specifier").get<std::string>(),
                                    p.at("stub").get<std::string>());
    }
    for (const auto& n : rep.at("notes")) report.notes.push_back(n.get<std::string>());
    return {std::move(graph), std::move(report)};
}

}  // namespace solaudit::solgraph

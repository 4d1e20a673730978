#include <catch2/catch_amalgamated.hpp>

#include <solaudit/solgraph.hpp>

#include <filesystem>
#include <fstream>
#include <random>

using namespace solaudit::solgraph;
namespace fs = std::filesystem;

static const fs::path kFixtures = SOLAUDIT_FIXTURE_DIR;

namespace {

fs::path copy_fixture_project(const std::string& tag) {
    fs::path dst = fs::temp_directory_path() / ("solgraph_" + tag);
    fs::remove_all(dst);
    fs::copy(kFixtures / "dapp", dst, fs::copy_options::recursive);
    return dst;
}

}  // namespace

TEST_CASE("parse_imports recognizes the four directive forms") {
    auto plain = parse_imports("import \"./aave/ILendingPool.sol\";");
    REQUIRE(plain.size() == 1);
    CHECK(plain[0].specifier == "./aave/ILendingPool.sol");
    CHECK(plain[0].kind == ImportKind::Plain);
    CHECK(plain[0].span_begin == 0);
    CHECK(plain[0].span_end == 33);

    auto aliased = parse_imports("import \"./Pool.sol\" as P;");
    REQUIRE(aliased.size() == 1);
    CHECK(aliased[0].kind == ImportKind::Aliased);
    CHECK(aliased[0].specifier == "./Pool.sol");

    auto named = parse_imports("import {IERC20} from \"@openzeppelin/token/IERC20.sol\";");
    REQUIRE(named.size() == 1);
    CHECK(named[0].kind == ImportKind::NamedSymbols);
    CHECK(named[0].symbols == std::vector<std::string>{"IERC20"});
    CHECK(named[0].specifier == "@openzeppelin/token/IERC20.sol");

    auto multi = parse_imports("import {X, Y as Z} from \"p.sol\";");
    REQUIRE(multi.size() == 1);
    CHECK(multi[0].symbols == std::vector<std::string>{"X", "Y"});

    auto glob = parse_imports("import * as A from \"./lib.sol\";");
    REQUIRE(glob.size() == 1);
    CHECK(glob[0].kind == ImportKind::Glob);
    CHECK(glob[0].specifier == "./lib.sol");
}

TEST_CASE("imports in comments and strings are not returned") {
    CHECK(parse_imports("// import \"x.sol\";").empty());
    CHECK(parse_imports("/* import \"x.sol\"; */").empty());
    CHECK(parse_imports("string s = \"import 'x.sol';\";").empty());
    CHECK(parse_imports("/* multi\nline\nimport \"x.sol\";\n*/").empty());

    auto mixed = parse_imports("// import \"a.sol\";\nimport \"b.sol\";\n");
    REQUIRE(mixed.size() == 1);
    CHECK(mixed[0].specifier == "b.sol");
}

TEST_CASE("identifier containing 'import' does not trigger the scanner") {
    CHECK(parse_imports("uint importantValue = 1;").empty());
    CHECK(parse_imports("uint reimport = 2;").empty());
}

TEST_CASE("malformed import becomes a warning, not a statement") {
    std::vector<std::string> warnings;
    auto stmts = parse_imports("import \"unterminated.sol\n", &warnings);
    CHECK(stmts.empty());
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("malformed") != std::string::npos);

    warnings.clear();
    auto partial = parse_imports("import {X from \"p.sol\";\nimport \"ok.sol\";", &warnings);
    REQUIRE(partial.size() == 1);
    CHECK(partial[0].specifier == "ok.sol");
    CHECK(warnings.size() == 1);
}

TEST_CASE("parse_imports is a pure function of its input") {
    const std::string text = "import \"a.sol\";\n// junk\nimport * as L from \"b.sol\";";
    CHECK(parse_imports(text) == parse_imports(text));
}

TEST_CASE("comment-masking property: wrapping any import in a comment removes it") {
    std::mt19937 rng(42);
    const std::vector<std::string> snippets = {
        "import \"./x.sol\";", "import {A} from \"y.sol\";", "uint v = 1;",
        "import * as M from \"z.sol\";", "// note\n", "contract C {}\n"};
    for (int round = 0; round < 50; ++round) {
        std::string text;
        for (int i = 0; i < 6; ++i) text += snippets[rng() % snippets.size()] + "\n";
        auto stmts = parse_imports(text);
        if (stmts.empty()) continue;
        // comment out a random statement via its byte span
        const auto& victim = stmts[rng() % stmts.size()];
        std::string masked = text.substr(0, victim.span_begin) + "/*" +
                             text.substr(victim.span_begin, victim.span_end - victim.span_begin) +
                             "*/" + text.substr(victim.span_end);
        CHECK(parse_imports(masked).size() == stmts.size() - 1);
    }
}

TEST_CASE("scan_project excludes non-Solidity files and orders lexicographically") {
    auto root = copy_fixture_project("scan");
    auto units = scan_project(root);
    REQUIRE(units.size() == 12);
    for (const auto& unit : units) {
        CHECK(unit.path.ends_with(".sol"));
    }
    CHECK(std::is_sorted(units.begin(), units.end(),
                         [](const auto& a, const auto& b) { return a.path < b.path; }));

    auto pool = std::find_if(units.begin(), units.end(),
                             [](const auto& u) { return u.path == "src/Pool.sol"; });
    REQUIRE(pool != units.end());
    REQUIRE(pool->imports.size() == 2);
    CHECK(pool->imports[0].specifier == "./aave/ILendingPool.sol");
    CHECK(pool->pragma_versions == std::vector<std::string>{"^0.8.0"});
    fs::remove_all(root);
}

TEST_CASE("scan_project on empty directory returns empty list") {
    fs::path root = fs::temp_directory_path() / "solgraph_empty";
    fs::create_directories(root);
    CHECK(scan_project(root).empty());
    fs::remove_all(root);
}

TEST_CASE("scan_project rejects a missing root") {
    CHECK_THROWS_AS(scan_project("/nonexistent/project"), std::runtime_error);
}

TEST_CASE("resolve_specifier handles relative paths, remappings, and misses") {
    std::set<std::string> files = {"src/Pool.sol", "src/aave/ILendingPool.sol",
                                   "lib/oz/ERC20.sol"};
    auto rel = resolve_specifier("src/Pool.sol", "./aave/ILendingPool.sol", {}, files);
    REQUIRE(rel);
    CHECK(*rel == "src/aave/ILendingPool.sol");

    Remappings remap = {{"@openzeppelin/", "lib/oz/"}};
    auto mapped = resolve_specifier("src/Pool.sol", "@openzeppelin/ERC20.sol", remap, files);
    REQUIRE(mapped);
    CHECK(*mapped == "lib/oz/ERC20.sol");

    CHECK_FALSE(resolve_specifier("src/Pool.sol", "ghost.sol", {}, files));
    // escaping the project root never resolves
    CHECK_FALSE(resolve_specifier("src/Pool.sol", "../../outside.sol", {}, files));
}

TEST_CASE("longest remapping prefix wins") {
    std::set<std::string> files = {"lib/oz/v4/token/ERC20.sol", "lib/old/token/ERC20.sol"};
    Remappings remap = {{"@openzeppelin/", "lib/old/"},
                        {"@openzeppelin/token/", "lib/oz/v4/token/"}};
    auto resolved = resolve_specifier("src/X.sol", "@openzeppelin/token/ERC20.sol", remap, files);
    REQUIRE(resolved);
    CHECK(*resolved == "lib/oz/v4/token/ERC20.sol");
}

TEST_CASE("build_graph tolerates cycles and collects unresolved imports") {
    SourceUnit a{.path = "A.sol", .raw_text = "import \"./B.sol\";"};
    a.imports = parse_imports(a.raw_text);
    SourceUnit b{.path = "B.sol", .raw_text = "import \"./A.sol\";\nimport \"./C.sol\";"};
    b.imports = parse_imports(b.raw_text);

    auto graph = build_graph({a, b});
    CHECK(graph.nodes == std::set<std::string>{"A.sol", "B.sol"});
    CHECK(graph.edges.count({"A.sol", "B.sol"}) == 1);
    CHECK(graph.edges.count({"B.sol", "A.sol"}) == 1);
    REQUIRE(graph.unresolved.size() == 1);
    CHECK(graph.unresolved[0] == std::pair<std::string, std::string>{"B.sol", "./C.sol"});
}

TEST_CASE("fixture project graph has the expected shape") {
    auto root = copy_fixture_project("graph");
    auto units = scan_project(root);
    Remappings remap = {{"@openzeppelin/", "lib/oz/"}};
    auto graph = build_graph(units, remap);

    CHECK(graph.nodes.size() == 12);
    CHECK(graph.edges.size() == 7);
    REQUIRE(graph.unresolved.size() == 2);
    CHECK(graph.edges.count({"src/A.sol", "src/B.sol"}) == 1);
    CHECK(graph.edges.count({"src/B.sol", "src/A.sol"}) == 1);
    CHECK(graph.edges.count({"src/Pool.sol", "lib/oz/token/ERC20.sol"}) == 1);
    fs::remove_all(root);
}

TEST_CASE("patch_missing vendors known stubs and leaves unknown gaps") {
    auto root = copy_fixture_project("patch");
    auto units = scan_project(root);
    Remappings remap = {{"@openzeppelin/", "lib/oz/"}};
    auto graph = build_graph(units, remap);
    REQUIRE(graph.unresolved.size() == 2);

    auto [patched, report] = patch_missing(graph, kFixtures / "stubs", root);
    CHECK(patched.unresolved.empty());
    CHECK(report.missing.empty());
    REQUIRE(report.patched.size() == 2);
    CHECK(fs::exists(root / "vendored/ERC721.sol"));
    CHECK(fs::exists(root / "vendored/AggregatorV3.sol"));
    CHECK(patched.nodes.count("vendored/ERC721.sol") == 1);
    // |unresolved| never grows
    CHECK(patched.unresolved.size() <= graph.unresolved.size());
    fs::remove_all(root);
}

TEST_CASE("patch_missing is a no-op on a fully resolved graph") {
    SourceUnit a{.path = "A.sol", .raw_text = ""};
    auto graph = build_graph({a});
    auto root = fs::temp_directory_path() / "solgraph_noop";
    fs::create_directories(root);
    auto [patched, report] = patch_missing(graph, kFixtures / "stubs", root);
    CHECK(patched.nodes == graph.nodes);
    CHECK(patched.edges == graph.edges);
    CHECK(report.patched.empty());
    fs::remove_all(root);
}

TEST_CASE("unknown stub stays missing") {
    SourceUnit a{.path = "A.sol", .raw_text = "import \"./Exotic.sol\";"};
    a.imports = parse_imports(a.raw_text);
    auto graph = build_graph({a});
    auto root = fs::temp_directory_path() / "solgraph_exotic";
    fs::create_directories(root);
    auto [patched, report] = patch_missing(graph, kFixtures / "stubs", root);
    REQUIRE(report.missing.size() == 1);
    CHECK(report.missing[0].second == "./Exotic.sol");
    CHECK(report.patched.empty());
    fs::remove_all(root);
}

TEST_CASE("graph JSON round-trip is exact") {
    auto root = copy_fixture_project("roundtrip");
    auto units = scan_project(root);
    Remappings remap = {{"@openzeppelin/", "lib/oz/"}};
    auto graph = build_graph(units, remap);
    auto report = make_report(graph);

    auto j = graph_to_json(graph, report);
    auto [graph2, report2] = graph_from_json(nlohmann::json::parse(j.dump()));
    CHECK(graph2.nodes == graph.nodes);
    CHECK(graph2.edges == graph.edges);
    CHECK(graph2.unresolved == graph.unresolved);
    CHECK(report2.missing == report.missing);
    CHECK(graph_to_json(graph2, report2).dump() == j.dump());
    fs::remove_all(root);
}

TEST_CASE("same tree yields byte-identical serialized output") {
    auto root = copy_fixture_project("determinism");
    Remappings remap = {{"@openzeppelin/", "lib/oz/"}};
    auto run = [&] {
        auto units = scan_project(root);
        auto graph = build_graph(units, remap);
        return graph_to_json(graph, make_report(graph)).dump();
    };
    CHECK(run() == run());
    fs::remove_all(root);
}

TEST_CASE("edges always connect known nodes") {
    auto root = copy_fixture_project("edges");
    auto units = scan_project(root);
    auto graph = build_graph(units, {{"@openzeppelin/", "lib/oz/"}});
    for (const auto& [from, to] : graph.edges) {
        CHECK(graph.nodes.count(from) == 1);
        CHECK(graph.nodes.count(to) == 1);
    }
    fs::remove_all(root);
}

// solaudit: pipeline CLI for Solidity dependency recovery, dialogue dataset
// construction, ROS balancing, prompt rendering, toy fine-tuning runs,
// inference, and metric reports.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <solaudit/augment.hpp>
#include <solaudit/dataset.hpp>
#include <solaudit/eval.hpp>
#include <solaudit/finetune.hpp>
#include <solaudit/model_client.hpp>
#include <solaudit/prompts.hpp>
#include <solaudit/solgraph.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

solaudit::solgraph::Remappings parse_remappings(const std::vector<std::string>& specs) {
    solaudit::solgraph::Remappings remappings;
    for (const auto& spec : specs) {
        auto eq = spec.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("remapping must be prefix=dir, got: " + spec);
        }
        remappings.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
    }
    return remappings;
}

// Sample files are either JSON objects or raw Solidity sources.
solaudit::dataset::AuditSample load_sample_file(const fs::path& path) {
    std::string text = read_file(path);
    if (path.extension() == ".json") {
        json j = json::parse(text);
        return solaudit::dataset::make_sample(
            j.at("source_code").get<std::string>(), j.value("description", std::string{}),
            solaudit::parse_label_or_throw(j.value("label", std::string{"none"})),
            j.value("project", std::string{}));
    }
    return solaudit::dataset::make_sample(text, "", solaudit::VulnerabilityLabel::None,
                                          path.stem().string());
}

ordered_json sample_to_json(const solaudit::dataset::AuditSample& s) {
    ordered_json j;
    j["id"] = s.id;
    j["label"] = std::string(solaudit::label_name(s.label));
    j["project"] = s.project;
    j["source_code"] = s.source_code;
    j["description"] = s.description;
    return j;
}

solaudit::dataset::AuditSample sample_from_json(const json& j) {
    auto s = solaudit::dataset::make_sample(
        j.at("source_code").get<std::string>(), j.value("description", std::string{}),
        solaudit::parse_label_or_throw(j.at("label").get<std::string>()),
        j.value("project", std::string{}));
    return s;
}

int cmd_collect(const fs::path& root, const std::vector<std::string>& remap_specs,
                const fs::path& stubs, const std::string& lib_root, const fs::path& out) {
    auto remappings = parse_remappings(remap_specs);
    auto units = solaudit::solgraph::scan_project(root);
    auto graph = solaudit::solgraph::build_graph(units, remappings, lib_root);
    solaudit::solgraph::ResolutionReport report;
    if (!stubs.empty()) {
        std::tie(graph, report) = solaudit::solgraph::patch_missing(graph, stubs, root);
    } else {
        report = solaudit::solgraph::make_report(graph);
    }
    write_file(out, solaudit::solgraph::graph_to_json(graph, report).dump(2) + "\n");
    std::cout << "scanned " << units.size() << " files, " << graph.edges.size() << " edges, "
              << graph.unresolved.size() << " unresolved\n";
    return 0;
}

int cmd_build_dataset(const fs::path& samples_path, double ratio, std::uint64_t seed,
                      const std::string& granularity, const fs::path& out_train,
                      const fs::path& out_test) {
    fs::path manifest = samples_path;
    if (fs::is_directory(manifest)) manifest /= "manifest.json";
    auto gran = granularity == "project" ? solaudit::dataset::Granularity::Project
                                         : solaudit::dataset::Granularity::File;
    auto samples = solaudit::dataset::load_manifest(manifest, gran);
    auto split = solaudit::dataset::split(samples, ratio, seed);
    for (const auto& warning : split.warnings) std::cerr << "warning: " << warning << "\n";

    write_file(out_train, solaudit::dataset::serialize(split.train));
    std::string test_out;
    for (const auto& s : split.test) test_out += sample_to_json(s).dump() + "\n";
    write_file(out_test, test_out);
    std::cout << "train " << split.train.size() << " records, test " << split.test.size()
              << " samples\n";
    return 0;
}

int cmd_augment(const fs::path& in, std::uint64_t seed, const fs::path& out) {
    auto records = solaudit::dataset::parse_jsonl(read_file(in));
    auto before = solaudit::augment::histogram(records);
    auto balanced = solaudit::augment::ros_balance(records, seed);
    auto after = solaudit::augment::histogram(balanced);
    write_file(out, solaudit::dataset::serialize(balanced));
    std::cout << solaudit::augment::histogram_table(before, after);
    return 0;
}

int cmd_prompt(const std::string& template_name, const fs::path& sample_path,
               const fs::path& templates_dir, const std::string& claimed, const fs::path& out) {
    auto sample = load_sample_file(sample_path);
    auto tpl = solaudit::prompts::load_template(templates_dir, template_name);
    solaudit::prompts::RenderedPrompt prompt;
    if (template_name == "verifier") {
        if (claimed.empty()) throw std::runtime_error("verifier template needs --claimed");
        prompt = solaudit::prompts::render_verifier(
            tpl, solaudit::parse_label_or_throw(claimed), sample);
    } else {
        prompt = solaudit::prompts::render(tpl, sample);
    }
    write_file(out, solaudit::prompts::prompt_to_json(prompt).dump(2) + "\n");
    return 0;
}

int cmd_train_toy(const std::string& mode_name, std::size_t dim, std::size_t rank,
                  std::size_t steps, double lr, std::uint64_t seed, const fs::path& out) {
    using namespace solaudit::finetune;
    const Mode mode = mode_name == "lora" ? Mode::Lora : Mode::Fft;

    TrainConfig config;
    config.learning_rate = lr;
    config.steps = steps;
    config.seed = seed;
    config.mode = mode;
    config.rank = rank;

    auto layer = make_layer(dim, mode, rank, seed);
    Matrix target = random_matrix(dim, dim, seed + 1000, 1.0 / std::sqrt(double(dim)));
    auto pairs = make_regression_dataset(target, 4 * dim, seed + 2000);
    auto result = train(layer, pairs, config);

    std::uint64_t checksum = 0;
    for (const auto& p : result.layer.projections) {
        checksum ^= matrix_checksum(p.effective());
    }

    ordered_json j;
    j["config"] = {{"mode", mode_name}, {"dim", dim},   {"rank", rank},
                   {"steps", steps},    {"lr", lr},     {"seed", seed}};
    j["loss_trace"] = result.loss_trace;
    j["final_loss"] = result.loss_trace.back();
    j["trainable_parameters"] = result.layer.trainable_count();
    std::ostringstream hex;
    hex << std::hex << checksum;
    j["merged_weight_checksum"] = hex.str();
    write_file(out, j.dump(2) + "\n");
    std::cout << "final loss " << result.loss_trace.back() << ", "
              << result.layer.trainable_count() << " trainable parameters\n";
    return 0;
}

int cmd_infer(const std::string& endpoint, const std::string& model, const fs::path& prompts_path,
              std::size_t concurrency, const fs::path& replay_dir, const fs::path& out) {
    std::vector<solaudit::prompts::RenderedPrompt> prompts;
    std::istringstream stream(read_file(prompts_path));
    std::string line;
    while (std::getline(stream, line)) {
        if (!line.empty()) prompts.push_back(solaudit::prompts::prompt_from_json(json::parse(line)));
    }

    std::vector<solaudit::model_client::ResponseRecord> responses;
    if (!replay_dir.empty()) {
        responses = solaudit::model_client::run_replay(replay_dir, prompts);
    } else {
        solaudit::model_client::EndpointConfig config;
        config.base_url = endpoint;
        config.model_name = model;
        if (const char* token = std::getenv("SOLAUDIT_API_TOKEN")) config.auth_token = token;
        responses = solaudit::model_client::run_batch(config, prompts, concurrency);
    }

    std::string out_text;
    for (const auto& record : responses) {
        out_text += solaudit::model_client::response_to_json(record).dump() + "\n";
    }
    write_file(out, out_text);
    std::cout << responses.size() << " responses written\n";
    return 0;
}

int cmd_evaluate(const fs::path& gold_path, const fs::path& responses_path,
                 const fs::path& verdicts_path, const fs::path& out_json,
                 const fs::path& out_table) {
    std::vector<solaudit::eval::GoldSample> gold;
    {
        std::istringstream stream(read_file(gold_path));
        std::string line;
        while (std::getline(stream, line)) {
            if (line.empty()) continue;
            json j = json::parse(line);
            gold.push_back({j.at("id").get<std::string>(),
                            solaudit::parse_label_or_throw(j.at("label").get<std::string>())});
        }
    }

    std::map<std::string, std::string> verdicts;
    if (!verdicts_path.empty()) {
        std::istringstream stream(read_file(verdicts_path));
        std::string line;
        while (std::getline(stream, line)) {
            if (line.empty()) continue;
            json j = json::parse(line);
            verdicts[j.at("sample_id").get<std::string>()] = j.at("verdict").get<std::string>();
        }
    }

    std::vector<solaudit::eval::Prediction> predictions;
    {
        std::istringstream stream(read_file(responses_path));
        std::string line;
        while (std::getline(stream, line)) {
            if (line.empty()) continue;
            auto record = solaudit::model_client::response_from_json(json::parse(line));
            solaudit::eval::Prediction pred;
            pred.sample_id = record.sample_id;
            std::tie(pred.predicted, pred.parse_status) =
                solaudit::eval::parse_response(record.raw_text);
            if (pred.predicted != solaudit::VulnerabilityLabel::None) {
                auto it = verdicts.find(pred.sample_id);
                if (it != verdicts.end()) {
                    pred = solaudit::eval::apply_verifier(pred, it->second);
                }
            }
            predictions.push_back(std::move(pred));
        }
    }

    auto report = solaudit::eval::score(predictions, gold);
    write_file(out_json, solaudit::eval::report_to_json(report).dump(2) + "\n");
    if (!out_table.empty()) write_file(out_table, solaudit::eval::report_table(report));
    std::cout << solaudit::eval::report_table(report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"smart-contract audit pipeline toolchain"};
    app.require_subcommand(1);

    // collect
    fs::path root, stubs, out;
    std::vector<std::string> remaps;
    std::string lib_root;
    auto* collect = app.add_subcommand("collect", "scan a project and build its import graph");
    collect->add_option("--root", root, "project root directory")->required();
    collect->add_option("--remap", remaps, "import remapping prefix=dir");
    collect->add_option("--stubs", stubs, "stub library directory for patching");
    collect->add_option("--lib-root", lib_root, "fallback library root for bare specifiers");
    collect->add_option("--out", out, "output graph.json")->required();

    // build-dataset
    fs::path samples, out_train, out_test;
    double ratio = 0.8;
    std::uint64_t seed = 0;
    std::string granularity = "file";
    auto* build = app.add_subcommand("build-dataset", "build dialogue records and split");
    build->add_option("--samples", samples, "sample manifest.json or directory")->required();
    build->add_option("--ratio", ratio, "train fraction");
    build->add_option("--seed", seed, "split seed");
    build->add_option("--granularity", granularity, "file or project")
        ->check(CLI::IsMember({"file", "project"}));
    build->add_option("--out-train", out_train, "train JSONL path")->required();
    build->add_option("--out-test", out_test, "test JSONL path")->required();

    // augment
    fs::path aug_in, aug_out;
    std::uint64_t aug_seed = 0;
    auto* augment = app.add_subcommand("augment", "balance classes by random over-sampling");
    augment->add_option("--in", aug_in, "input train JSONL")->required();
    augment->add_option("--seed", aug_seed, "sampling seed");
    augment->add_option("--out", aug_out, "output JSONL")->required();

    // prompt
    std::string template_name = "basic", claimed;
    fs::path sample_path, templates_dir = "templates", prompt_out;
    auto* prompt = app.add_subcommand("prompt", "render a detection or verifier prompt");
    prompt->add_option("--template", template_name, "basic, cot, or verifier")
        ->check(CLI::IsMember({"basic", "cot", "verifier"}));
    prompt->add_option("--sample", sample_path, "sample file (.json or .sol)")->required();
    prompt->add_option("--templates", templates_dir, "template asset directory");
    prompt->add_option("--claimed", claimed, "claimed label for the verifier template");
    prompt->add_option("--out", prompt_out, "output prompt.json")->required();

    // train-toy
    std::string mode = "fft";
    std::size_t dim = 16, rank = 2, steps = 500;
    double lr = 0.05;
    std::uint64_t train_seed = 0;
    fs::path run_out;
    auto* train = app.add_subcommand("train-toy", "run toy attention fine-tuning");
    train->add_option("--mode", mode, "fft or lora")->check(CLI::IsMember({"fft", "lora"}));
    train->add_option("--dim", dim, "model dimension");
    train->add_option("--rank", rank, "lora rank");
    train->add_option("--steps", steps, "gradient steps");
    train->add_option("--lr", lr, "learning rate");
    train->add_option("--seed", train_seed, "seed");
    train->add_option("--out", run_out, "output run.json")->required();

    // infer
    std::string endpoint, model_name;
    fs::path prompts_path, replay_dir, infer_out;
    std::size_t concurrency = 4;
    auto* infer = app.add_subcommand("infer", "send prompts to an endpoint or replay from disk");
    infer->add_option("--endpoint", endpoint, "chat-completions base URL");
    infer->add_option("--model", model_name, "model name");
    infer->add_option("--prompts", prompts_path, "prompts JSONL")->required();
    infer->add_option("--concurrency", concurrency, "max in-flight requests");
    infer->add_option("--replay", replay_dir, "replay directory of canned responses");
    infer->add_option("--out", infer_out, "output responses JSONL")->required();

    // evaluate
    fs::path gold_path, responses_path, verdicts_path, report_json, report_table;
    auto* evaluate = app.add_subcommand("evaluate", "score responses against gold labels");
    evaluate->add_option("--gold", gold_path, "gold test JSONL")->required();
    evaluate->add_option("--responses", responses_path, "responses JSONL")->required();
    evaluate->add_option("--verifier", verdicts_path, "verifier verdicts JSONL");
    evaluate->add_option("--out", report_json, "output report.json")->required();
    evaluate->add_option("--table", report_table, "output markdown table");

    CLI11_PARSE(app, argc, argv);

    try {
        if (collect->parsed()) return cmd_collect(root, remaps, stubs, lib_root, out);
        if (build->parsed())
            return cmd_build_dataset(samples, ratio, seed, granularity, out_train, out_test);
        if (augment->parsed()) return cmd_augment(aug_in, aug_seed, aug_out);
        if (prompt->parsed())
            return cmd_prompt(template_name, sample_path, templates_dir, claimed, prompt_out);
        if (train->parsed()) return cmd_train_toy(mode, dim, rank, steps, lr, train_seed, run_out);
        if (infer->parsed())
            return cmd_infer(endpoint, model_name, prompts_path, concurrency, replay_dir,
                             infer_out);
        if (evaluate->parsed())
            return cmd_evaluate(gold_path, responses_path, verdicts_path, report_json,
                                report_table);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

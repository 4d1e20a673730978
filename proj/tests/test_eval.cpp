#include <catch2/catch_amalgamated.hpp>

#include <solaudit/eval.hpp>

#include <algorithm>
#include <random>

using namespace solaudit;
using namespace solaudit::eval;

namespace {

// brute-force counting oracle written directly from the metric definitions
MetricsReport oracle_score(const std::vector<Prediction>& predictions,
                           const std::vector<GoldSample>& gold) {
    MetricsReport report;
    report.sample_count = gold.size();
    double sum_f1 = 0, sum_p = 0, sum_r = 0;
    for (VulnerabilityLabel label : kScoredLabels) {
        LabelCounts c;
        for (const auto& g : gold) {
            VulnerabilityLabel predicted = VulnerabilityLabel::None;
            for (const auto& p : predictions) {
                if (p.sample_id == g.sample_id) predicted = p.predicted;
            }
            if (g.label == label && predicted == label) ++c.tp;
            if (g.label != label && predicted == label) ++c.fp;
            if (g.label == label && predicted != label) ++c.fn;
        }
        LabelMetrics m;
        m.precision = c.tp + c.fp ? double(c.tp) / (c.tp + c.fp) : 0.0;
        m.recall = c.tp + c.fn ? double(c.tp) / (c.tp + c.fn) : 0.0;
        m.f1 = m.precision + m.recall ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        report.counts[label] = c;
        report.per_label[label] = m;
        sum_p += m.precision;
        sum_r += m.recall;
        sum_f1 += m.f1;
    }
    report.macro_precision = sum_p / 4;
    report.macro_recall = sum_r / 4;
    report.macro_f1 = sum_f1 / 4;
    return report;
}

Prediction pred(const std::string& id, VulnerabilityLabel label,
                ParseStatus status = ParseStatus::Clean) {
    Prediction p;
    p.sample_id = id;
    p.predicted = label;
    p.parse_status = status;
    return p;
}

}  // namespace

TEST_CASE("parse_response: LABEL line is clean") {
    auto [label, status] = parse_response("...reasoning...\nLABEL: reentrancy");
    CHECK(label == VulnerabilityLabel::Reentrancy);
    CHECK(status == ParseStatus::Clean);

    auto [l2, s2] = parse_response("LABEL: timestamp-dependence\n");
    CHECK(l2 == VulnerabilityLabel::TimestampDependence);
    CHECK(s2 == ParseStatus::Clean);

    auto [l3, s3] = parse_response("LABEL: none");
    CHECK(l3 == VulnerabilityLabel::None);
    CHECK(s3 == ParseStatus::Clean);
}

TEST_CASE("parse_response: synonym scan is fuzzy, last occurrence wins") {
    auto [label, status] = parse_response("This contract suffers from timestamp dependence.");
    CHECK(label == VulnerabilityLabel::TimestampDependence);
    CHECK(status == ParseStatus::Fuzzy);

    auto [l2, s2] = parse_response(
        "At first this looks like reentrancy, but it is actually an integer overflow.");
    CHECK(l2 == VulnerabilityLabel::Arithmetic);
    CHECK(s2 == ParseStatus::Fuzzy);

    auto [l3, s3] = parse_response("Classic RE-ENTRANCY issue in withdraw().");
    CHECK(l3 == VulnerabilityLabel::Reentrancy);
    CHECK(s3 == ParseStatus::Fuzzy);
}

TEST_CASE("parse_response: unusable text degrades to failed") {
    auto [label, status] = parse_response("I cannot determine the issue.");
    CHECK(label == VulnerabilityLabel::None);
    CHECK(status == ParseStatus::Failed);

    auto [l2, s2] = parse_response("");
    CHECK(l2 == VulnerabilityLabel::None);
    CHECK(s2 == ParseStatus::Failed);
}

TEST_CASE("hand-written response fixtures hit the synonym table") {
    const std::vector<std::pair<std::string, VulnerabilityLabel>> fixtures = {
        {"The withdraw function is reentrant.", VulnerabilityLabel::Reentrancy},
        {"A re-entrancy attack is possible here.", VulnerabilityLabel::Reentrancy},
        {"Balances can suffer integer overflow.", VulnerabilityLabel::Arithmetic},
        {"There is an integer underflow in sub().", VulnerabilityLabel::Arithmetic},
        {"Unchecked arithmetic throughout.", VulnerabilityLabel::Arithmetic},
        {"Relies on block.timestamp for the lottery.", VulnerabilityLabel::TimestampDependence},
        {"Timestamp dependency in unlock logic.", VulnerabilityLabel::TimestampDependence},
        {"Price manipulation via pool imbalance.", VulnerabilityLabel::PriceManipulation},
        {"Vulnerable to oracle manipulation.", VulnerabilityLabel::PriceManipulation},
        {"I found no vulnerability in this contract.", VulnerabilityLabel::None},
    };
    for (const auto& [text, expected] : fixtures) {
        auto [label, status] = parse_response(text);
        INFO(text);
        CHECK(label == expected);
        CHECK(status == ParseStatus::Fuzzy);
    }
}

TEST_CASE("apply_verifier: CONFIRM keeps, REJECT and noise demote") {
    auto base = pred("s1", VulnerabilityLabel::Reentrancy);
    auto kept = apply_verifier(base, "CONFIRM");
    CHECK(kept.predicted == VulnerabilityLabel::Reentrancy);
    CHECK(kept.verified == true);

    auto rejected = apply_verifier(pred("s2", VulnerabilityLabel::Arithmetic), "REJECT");
    CHECK(rejected.predicted == VulnerabilityLabel::None);
    CHECK(rejected.verified == false);

    auto noisy = apply_verifier(pred("s3", VulnerabilityLabel::PriceManipulation), "maybe?");
    CHECK(noisy.predicted == VulnerabilityLabel::None);
    CHECK(noisy.verified == false);

    CHECK_THROWS_AS(apply_verifier(pred("s4", VulnerabilityLabel::None), "CONFIRM"),
                    std::invalid_argument);
}

TEST_CASE("score: the fixed tp=7 fp=3 fn=3 example") {
    std::vector<GoldSample> gold;
    std::vector<Prediction> predictions;
    int id = 0;
    auto add = [&](VulnerabilityLabel g, VulnerabilityLabel p) {
        std::string sid = "s" + std::to_string(id++);
        gold.push_back({sid, g});
        predictions.push_back(pred(sid, p));
    };
    for (int i = 0; i < 7; ++i) add(VulnerabilityLabel::Reentrancy, VulnerabilityLabel::Reentrancy);
    for (int i = 0; i < 3; ++i) add(VulnerabilityLabel::None, VulnerabilityLabel::Reentrancy);
    for (int i = 0; i < 3; ++i) add(VulnerabilityLabel::Reentrancy, VulnerabilityLabel::None);

    auto report = score(predictions, gold);
    const auto& m = report.per_label.at(VulnerabilityLabel::Reentrancy);
    CHECK_THAT(m.precision, Catch::Matchers::WithinAbs(0.70, 1e-12));
    CHECK_THAT(m.recall, Catch::Matchers::WithinAbs(0.70, 1e-12));
    CHECK_THAT(m.f1, Catch::Matchers::WithinAbs(0.70, 1e-12));
}

TEST_CASE("score: all correct gives all ones") {
    std::vector<GoldSample> gold;
    std::vector<Prediction> predictions;
    int id = 0;
    for (VulnerabilityLabel label : kScoredLabels) {
        for (int i = 0; i < 3; ++i) {
            std::string sid = "s" + std::to_string(id++);
            gold.push_back({sid, label});
            predictions.push_back(pred(sid, label));
        }
    }
    auto report = score(predictions, gold);
    for (VulnerabilityLabel label : kScoredLabels) {
        CHECK(report.per_label.at(label).precision == 1.0);
        CHECK(report.per_label.at(label).recall == 1.0);
        CHECK(report.per_label.at(label).f1 == 1.0);
    }
    CHECK(report.macro_f1 == 1.0);
    CHECK(report.accuracy == 1.0);
}

TEST_CASE("score matches the brute-force oracle on random instances") {
    std::mt19937 rng(5);
    for (int round = 0; round < 50; ++round) {
        std::vector<GoldSample> gold;
        std::vector<Prediction> predictions;
        const int n = 50;
        for (int i = 0; i < n; ++i) {
            std::string sid = "s" + std::to_string(i);
            gold.push_back({sid, kAllLabels[rng() % kAllLabels.size()]});
            if (rng() % 10) {  // some samples get no prediction at all
                predictions.push_back(pred(sid, kAllLabels[rng() % kAllLabels.size()]));
            }
        }
        auto report = score(predictions, gold);
        auto expected = oracle_score(predictions, gold);
        for (VulnerabilityLabel label : kScoredLabels) {
            CHECK(report.counts.at(label) == expected.counts.at(label));
            CHECK_THAT(report.per_label.at(label).f1,
                       Catch::Matchers::WithinAbs(expected.per_label.at(label).f1, 1e-12));
        }
        CHECK_THAT(report.macro_f1, Catch::Matchers::WithinAbs(expected.macro_f1, 1e-12));
    }
}

TEST_CASE("permutation invariance") {
    std::mt19937 rng(9);
    std::vector<GoldSample> gold;
    std::vector<Prediction> predictions;
    for (int i = 0; i < 30; ++i) {
        std::string sid = "s" + std::to_string(i);
        gold.push_back({sid, kAllLabels[rng() % kAllLabels.size()]});
        predictions.push_back(pred(sid, kAllLabels[rng() % kAllLabels.size()]));
    }
    auto before = report_to_json(score(predictions, gold)).dump();
    std::shuffle(gold.begin(), gold.end(), rng);
    std::shuffle(predictions.begin(), predictions.end(), rng);
    CHECK(report_to_json(score(predictions, gold)).dump() == before);
}

TEST_CASE("metric range and F1 mean bounds") {
    std::mt19937 rng(13);
    for (int round = 0; round < 20; ++round) {
        std::vector<GoldSample> gold;
        std::vector<Prediction> predictions;
        for (int i = 0; i < 40; ++i) {
            std::string sid = "s" + std::to_string(i);
            gold.push_back({sid, kAllLabels[rng() % kAllLabels.size()]});
            predictions.push_back(pred(sid, kAllLabels[rng() % kAllLabels.size()]));
        }
        auto report = score(predictions, gold);
        for (VulnerabilityLabel label : kScoredLabels) {
            const auto& m = report.per_label.at(label);
            CHECK(m.precision >= 0.0);
            CHECK(m.precision <= 1.0);
            CHECK(m.recall >= 0.0);
            CHECK(m.recall <= 1.0);
            if (m.precision > 0 && m.recall > 0) {
                CHECK(m.f1 >= std::min(m.precision, m.recall) - 1e-12);
                CHECK(m.f1 <= (m.precision + m.recall) / 2 + 1e-12);
            }
        }
        CHECK_THAT(report.clean_rate + report.fuzzy_rate + report.parse_failure_rate,
                   Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("adding a correct prediction never lowers per-label metrics") {
    std::vector<GoldSample> gold = {{"a", VulnerabilityLabel::Reentrancy},
                                    {"b", VulnerabilityLabel::Arithmetic},
                                    {"c", VulnerabilityLabel::Reentrancy}};
    std::vector<Prediction> predictions = {pred("a", VulnerabilityLabel::Reentrancy)};
    auto before = score(predictions, gold);
    predictions.push_back(pred("c", VulnerabilityLabel::Reentrancy));
    auto after = score(predictions, gold);
    for (VulnerabilityLabel label : kScoredLabels) {
        CHECK(after.per_label.at(label).precision >= before.per_label.at(label).precision);
        CHECK(after.per_label.at(label).recall >= before.per_label.at(label).recall);
        CHECK(after.per_label.at(label).f1 >= before.per_label.at(label).f1);
    }
}

TEST_CASE("duplicate predictions are an error") {
    std::vector<GoldSample> gold = {{"a", VulnerabilityLabel::Reentrancy}};
    std::vector<Prediction> predictions = {pred("a", VulnerabilityLabel::Reentrancy),
                                           pred("a", VulnerabilityLabel::Arithmetic)};
    CHECK_THROWS_AS(score(predictions, gold), std::invalid_argument);
}

TEST_CASE("report table reproduces the RV/AV/TDV/PMV column layout") {
    std::vector<GoldSample> gold = {{"a", VulnerabilityLabel::Reentrancy}};
    std::vector<Prediction> predictions = {pred("a", VulnerabilityLabel::Reentrancy)};
    auto table = report_table(score(predictions, gold));
    CHECK(table.find("| RV | AV | TDV | PMV |") != std::string::npos);
    CHECK(table.find("PRE") != std::string::npos);
    CHECK(table.find("REC") != std::string::npos);
}

TEST_CASE("zero-denominator metrics are flagged, not NaN") {
    std::vector<GoldSample> gold = {{"a", VulnerabilityLabel::Reentrancy}};
    std::vector<Prediction> predictions = {pred("a", VulnerabilityLabel::None,
                                                ParseStatus::Failed)};
    auto report = score(predictions, gold);
    const auto& pm = report.per_label.at(VulnerabilityLabel::PriceManipulation);
    CHECK(pm.precision == 0.0);
    CHECK(pm.zero_denominator);
}

#include <doctest.h>

#include <filesystem>

#include "atnf/common.hpp"
#include "atnf/metrics.hpp"
#include "atnf/rng.hpp"

using namespace atnf;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("metrics");

TEST_CASE("confusion matrix construction") {
    std::vector<int> perfect = {0, 1, 2, 1, 0};
    ConfusionMatrix diag = confusion_matrix(perfect, perfect, 3);
    for (int64_t t = 0; t < 3; ++t)
        for (int64_t p = 0; p < 3; ++p)
            CHECK(diag.at(t, p) == (t == p ? (t == 2 ? 1 : 2) : 0));

    std::vector<int> zeros = {0, 0, 0, 0};
    std::vector<int> labels = {0, 1, 2, 1};
    ConfusionMatrix col0 = confusion_matrix(zeros, labels, 3);
    for (int64_t t = 0; t < 3; ++t)
        for (int64_t p = 1; p < 3; ++p) CHECK(col0.at(t, p) == 0);

    // hand tally: preds [0,1,1,0] vs labels [0,1,0,0] -> [[2,1],[0,1]]
    std::vector<int> preds = {0, 1, 1, 0};
    std::vector<int> truth = {0, 1, 0, 0};
    ConfusionMatrix cm = confusion_matrix(preds, truth, 2);
    CHECK(cm.at(0, 0) == 2);
    CHECK(cm.at(0, 1) == 1);
    CHECK(cm.at(1, 0) == 0);
    CHECK(cm.at(1, 1) == 1);

    CHECK_THROWS_AS(confusion_matrix(preds, labels, 2), ShapeError);  // length mismatch
    std::vector<int> oob = {0, 2};
    std::vector<int> two = {0, 1};
    CHECK_THROWS_AS(confusion_matrix(oob, two, 2), ShapeError);
}

TEST_CASE("precision/recall/F1 on the hand-computed fixture") {
    ConfusionMatrix cm;
    cm.k = 2;
    cm.counts = {50, 10, 5, 35};
    MetricsSummary s = precision_recall_f1(cm);
    CHECK(s.per_class[0].precision == doctest::Approx(50.0 / 55.0).epsilon(1e-9));
    CHECK(s.per_class[0].recall == doctest::Approx(50.0 / 60.0).epsilon(1e-9));
    const double p0 = 50.0 / 55.0, r0 = 50.0 / 60.0;
    CHECK(s.per_class[0].f1 == doctest::Approx(2 * p0 * r0 / (p0 + r0)).epsilon(1e-9));
    EvalReport rep = make_eval_report(cm, "m", "p", 0);
    CHECK(rep.accuracy == doctest::Approx(0.85).epsilon(1e-12));
}

TEST_CASE("degenerate classes use the zero convention") {
    ConfusionMatrix cm;
    cm.k = 3;
    cm.counts = {4, 0, 0, 0, 6, 0, 0, 0, 0};  // class 2 never present, never predicted
    MetricsSummary s = precision_recall_f1(cm);
    CHECK(s.per_class[2].precision == 0.0);
    CHECK(s.per_class[2].recall == 0.0);
    CHECK(s.per_class[2].f1 == 0.0);
    // a perfect diagonal otherwise scores 1.0
    CHECK(s.per_class[0].f1 == 1.0);
    CHECK(s.per_class[1].f1 == 1.0);
}

TEST_CASE("accuracy is exactly trace over total") {
    Rng rng(3);
    for (int it = 0; it < 10; ++it) {
        ConfusionMatrix cm;
        cm.k = 4;
        cm.counts.resize(16);
        for (auto& c : cm.counts) c = static_cast<int64_t>(rng.uniform_int(30));
        EvalReport rep = make_eval_report(cm, "m", "p", 0);
        CHECK(rep.accuracy ==
              static_cast<double>(cm.trace()) / static_cast<double>(cm.total()));
    }
}

TEST_CASE("permuting classes permutes per-class metrics and fixes the aggregates") {
    ConfusionMatrix cm;
    cm.k = 3;
    cm.counts = {12, 3, 1, 2, 20, 4, 0, 5, 9};
    MetricsSummary base = precision_recall_f1(cm);
    EvalReport base_rep = make_eval_report(cm, "m", "p", 0);

    const int perm[3] = {2, 0, 1};  // new index of each old class
    ConfusionMatrix shuffled;
    shuffled.k = 3;
    shuffled.counts.assign(9, 0);
    for (int64_t t = 0; t < 3; ++t)
        for (int64_t p = 0; p < 3; ++p) shuffled.at(perm[t], perm[p]) = cm.at(t, p);
    MetricsSummary moved = precision_recall_f1(shuffled);
    EvalReport moved_rep = make_eval_report(shuffled, "m", "p", 0);

    for (int64_t c = 0; c < 3; ++c) {
        CHECK(moved.per_class[static_cast<size_t>(perm[c])].precision ==
              doctest::Approx(base.per_class[static_cast<size_t>(c)].precision));
        CHECK(moved.per_class[static_cast<size_t>(perm[c])].f1 ==
              doctest::Approx(base.per_class[static_cast<size_t>(c)].f1));
    }
    CHECK(moved_rep.accuracy == doctest::Approx(base_rep.accuracy));
    CHECK(moved.macro.precision == doctest::Approx(base.macro.precision));
    CHECK(moved.macro.f1 == doctest::Approx(base.macro.f1));
}

TEST_CASE("micro precision == micro recall == accuracy on random matrices") {
    Rng rng(7);
    for (int it = 0; it < 20; ++it) {
        ConfusionMatrix cm;
        cm.k = 2 + static_cast<int64_t>(rng.uniform_int(5));
        cm.counts.resize(static_cast<size_t>(cm.k * cm.k));
        for (auto& c : cm.counts) c = static_cast<int64_t>(rng.uniform_int(40));
        if (cm.total() == 0) cm.counts[0] = 1;
        ClassMetrics micro = micro_metrics(cm);
        EvalReport rep = make_eval_report(cm, "m", "p", 0);
        CHECK(micro.precision == doctest::Approx(rep.accuracy).epsilon(1e-12));
        CHECK(micro.recall == doctest::Approx(rep.accuracy).epsilon(1e-12));
    }
}

TEST_CASE("CSV formatting carries 4 decimals and parses back") {
    ConfusionMatrix cm;
    cm.k = 2;
    cm.counts = {8997, 1003, 0, 10000};  // accuracy 0.89985 -> rounds to 0.8999
    EvalReport rep = make_eval_report(cm, "mini", "canonical:v3", 7);
    rep.accuracy = 0.8997;  // formatting example
    std::string csv = report_csv(rep);
    CHECK(csv.find("mini,canonical:v3,7,0.8997,") != std::string::npos);

    // every numeric field reparses within 5e-5 of the report value
    const std::string row = csv.substr(csv.find('\n') + 1);
    std::vector<std::string> fields;
    size_t pos = 0;
    while (pos <= row.size()) {
        size_t comma = row.find(',', pos);
        if (comma == std::string::npos) {
            fields.push_back(row.substr(pos, row.size() - pos - 1));  // trailing newline
            break;
        }
        fields.push_back(row.substr(pos, comma - pos));
        pos = comma + 1;
    }
    REQUIRE(fields.size() == 7);
    CHECK(std::abs(std::stod(fields[3]) - rep.accuracy) < 5e-5);
    CHECK(std::abs(std::stod(fields[4]) - rep.macro.precision) < 5e-5);
    CHECK(std::abs(std::stod(fields[5]) - rep.macro.recall) < 5e-5);
    CHECK(std::abs(std::stod(fields[6]) - rep.macro.f1) < 5e-5);
}

TEST_CASE("JSON report round trip is the identity") {
    ConfusionMatrix cm;
    cm.k = 3;
    cm.counts = {5, 1, 0, 2, 7, 1, 0, 0, 4};
    cm.class_names = {"ca", "cb", "cc"};
    EvalReport rep = make_eval_report(cm, "resnet_mini", "canonical:v2", 42);
    EvalReport back = report_from_json(report_json(rep));
    CHECK(back == rep);
}

TEST_CASE("writing to a directory path raises IoError with the path") {
    ConfusionMatrix cm;
    cm.k = 2;
    cm.counts = {1, 0, 0, 1};
    EvalReport rep = make_eval_report(cm, "m", "p", 0);
    const std::string dir = fs::temp_directory_path().string();
    CHECK_THROWS_AS(write_report(rep, dir, ReportFormat::CSV), IoError);
}

TEST_SUITE_END();

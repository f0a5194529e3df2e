#include "atnf/metrics.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "atnf/common.hpp"

namespace atnf {

int64_t ConfusionMatrix::total() const {
    int64_t t = 0;
    for (int64_t c : counts) t += c;
    return t;
}

int64_t ConfusionMatrix::trace() const {
    int64_t t = 0;
    for (int64_t i = 0; i < k; ++i) t += at(i, i);
    return t;
}

ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> labels,
                                 int64_t k) {
    if (preds.size() != labels.size())
        throw ShapeError("confusion_matrix: " + std::to_string(preds.size()) +
                         " predictions vs " + std::to_string(labels.size()) + " labels");
    if (k < 1) throw ShapeError("confusion_matrix: k must be positive");
    ConfusionMatrix cm;
    cm.k = k;
    cm.counts.assign(static_cast<size_t>(k * k), 0);
    for (size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] < 0 || preds[i] >= k || labels[i] < 0 || labels[i] >= k)
            throw ShapeError("confusion_matrix: class index out of range at sample " +
                             std::to_string(i));
        ++cm.at(labels[i], preds[i]);
    }
    return cm;
}

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

MetricsSummary precision_recall_f1(const ConfusionMatrix& cm) {
    if (cm.k < 2) throw ShapeError("precision_recall_f1: need at least two classes");
    MetricsSummary s;
    s.per_class.resize(static_cast<size_t>(cm.k));
    for (int64_t c = 0; c < cm.k; ++c) {
        int64_t colsum = 0, rowsum = 0;
        for (int64_t i = 0; i < cm.k; ++i) {
            colsum += cm.at(i, c);
            rowsum += cm.at(c, i);
        }
        ClassMetrics& m = s.per_class[static_cast<size_t>(c)];
        m.precision = safe_div(static_cast<double>(cm.at(c, c)), static_cast<double>(colsum));
        m.recall = safe_div(static_cast<double>(cm.at(c, c)), static_cast<double>(rowsum));
        m.f1 = safe_div(2.0 * m.precision * m.recall, m.precision + m.recall);
        s.macro.precision += m.precision;
        s.macro.recall += m.recall;
        s.macro.f1 += m.f1;
    }
    s.macro.precision /= static_cast<double>(cm.k);
    s.macro.recall /= static_cast<double>(cm.k);
    s.macro.f1 /= static_cast<double>(cm.k);
    return s;
}

ClassMetrics micro_metrics(const ConfusionMatrix& cm) {
    int64_t tp = cm.trace();
    int64_t total = cm.total();
    ClassMetrics m;
    // every misclassification is one false positive and one false negative
    m.precision = safe_div(static_cast<double>(tp), static_cast<double>(total));
    m.recall = m.precision;
    m.f1 = m.precision;
    return m;
}

EvalReport make_eval_report(ConfusionMatrix cm, std::string model, std::string plan,
                            uint64_t seed) {
    EvalReport r;
    r.accuracy = safe_div(static_cast<double>(cm.trace()), static_cast<double>(cm.total()));
    MetricsSummary s = precision_recall_f1(cm);
    r.per_class = std::move(s.per_class);
    r.macro = s.macro;
    r.confusion = std::move(cm);
    r.model = std::move(model);
    r.plan = std::move(plan);
    r.seed = seed;
    return r;
}

namespace {

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

std::string report_csv(const EvalReport& r) {
    std::string out = "model,plan,seed,test_accuracy,precision,recall,f1\n";
    out += r.model + "," + r.plan + "," + std::to_string(r.seed) + "," + fmt4(r.accuracy) + "," +
           fmt4(r.macro.precision) + "," + fmt4(r.macro.recall) + "," + fmt4(r.macro.f1) + "\n";
    return out;
}

std::string report_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["model"] = r.model;
    j["plan"] = r.plan;
    j["seed"] = r.seed;
    j["accuracy"] = r.accuracy;
    j["macro"] = {{"precision", r.macro.precision},
                  {"recall", r.macro.recall},
                  {"f1", r.macro.f1}};
    nlohmann::ordered_json per = nlohmann::ordered_json::array();
    for (size_t c = 0; c < r.per_class.size(); ++c) {
        std::string name = c < r.confusion.class_names.size() ? r.confusion.class_names[c]
                                                              : "class" + std::to_string(c);
        per.push_back({{"class", name},
                       {"precision", r.per_class[c].precision},
                       {"recall", r.per_class[c].recall},
                       {"f1", r.per_class[c].f1}});
    }
    j["per_class"] = per;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (int64_t t = 0; t < r.confusion.k; ++t) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (int64_t p = 0; p < r.confusion.k; ++p) row.push_back(r.confusion.at(t, p));
        rows.push_back(row);
    }
    j["confusion"] = rows;
    j["class_names"] = r.confusion.class_names;
    return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    EvalReport r;
    r.model = j.at("model").get<std::string>();
    r.plan = j.at("plan").get<std::string>();
    r.seed = j.at("seed").get<uint64_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.macro.precision = j.at("macro").at("precision").get<double>();
    r.macro.recall = j.at("macro").at("recall").get<double>();
    r.macro.f1 = j.at("macro").at("f1").get<double>();
    for (const auto& pc : j.at("per_class")) {
        ClassMetrics m;
        m.precision = pc.at("precision").get<double>();
        m.recall = pc.at("recall").get<double>();
        m.f1 = pc.at("f1").get<double>();
        r.per_class.push_back(m);
    }
    const auto& rows = j.at("confusion");
    r.confusion.k = static_cast<int64_t>(rows.size());
    for (const auto& row : rows)
        for (const auto& v : row) r.confusion.counts.push_back(v.get<int64_t>());
    r.confusion.class_names = j.at("class_names").get<std::vector<std::string>>();
    return r;
}

void write_report(const EvalReport& report, const std::string& path, ReportFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << (format == ReportFormat::CSV ? report_csv(report) : report_json(report));
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace atnf

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace atnf {

/// Rows index the true class, columns the predicted class.
struct ConfusionMatrix {
    int64_t k = 0;
    std::vector<int64_t> counts;  // k*k row-major
    std::vector<std::string> class_names;

    int64_t& at(int64_t truth, int64_t pred) { return counts[static_cast<size_t>(truth * k + pred)]; }
    int64_t at(int64_t truth, int64_t pred) const { return counts[static_cast<size_t>(truth * k + pred)]; }
    int64_t total() const;
    int64_t trace() const;

    bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> labels,
                                 int64_t k);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    bool operator==(const ClassMetrics&) const = default;
};

struct MetricsSummary {
    std::vector<ClassMetrics> per_class;
    ClassMetrics macro;  // unweighted mean over classes
};

/// precision_c = cm[c][c] / colsum_c, recall_c = cm[c][c] / rowsum_c,
/// F1 = 2PR/(P+R); any division by zero yields 0.
MetricsSummary precision_recall_f1(const ConfusionMatrix& cm);

/// Micro-averaged precision/recall (equal to accuracy for single-label
/// classification; kept as an internal cross-check).
ClassMetrics micro_metrics(const ConfusionMatrix& cm);

struct EvalReport {
    double accuracy = 0.0;
    std::vector<ClassMetrics> per_class;
    ClassMetrics macro;
    ConfusionMatrix confusion;
    // config fingerprint
    std::string model;
    std::string plan;
    uint64_t seed = 0;

    bool operator==(const EvalReport&) const = default;
};

EvalReport make_eval_report(ConfusionMatrix cm, std::string model, std::string plan,
                            uint64_t seed);

enum class ReportFormat { CSV, JSON };

/// CSV: one `model,plan,seed,test_accuracy,precision,recall,f1` row with
/// macro values at 4 decimals. JSON: full per-class detail plus the
/// confusion matrix.
void write_report(const EvalReport& report, const std::string& path, ReportFormat format);

std::string report_csv(const EvalReport& report);
std::string report_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

}  // namespace atnf

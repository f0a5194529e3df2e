#pragma once

#include <span>

#include "atnf/data.hpp"
#include "atnf/metrics.hpp"
#include "atnf/model.hpp"

namespace atnf {

enum class EvalSplit { Test, Holdout };

/// The full optimization regimen: cross-entropy loss, Adam with separate
/// backbone/attention learning rates, step decay, early stopping on
/// evaluation accuracy, best-checkpoint retention.
///
/// Note that the regimen's default monitors the evaluation set that is also
/// reported as the final score; supply a genuine holdout (eval_split =
/// Holdout) when that leak matters for your experiment.
struct TrainConfig {
    int64_t epochs = 60;
    int64_t batch_size = 32;
    double lr_backbone = 1e-4;
    double lr_attention = 6e-4;
    double weight_decay = 1e-4;
    int64_t scheduler_step = 10;
    double scheduler_gamma = 0.1;
    int64_t patience = 20;
    uint64_t seed = 0;
    EvalSplit eval_split = EvalSplit::Test;

    void validate() const;
};

/// base_lr * gamma^floor(epoch / step)
double steplr_lr(double base_lr, int64_t epoch, int64_t step = 10, double gamma = 0.1);

/// Adam accumulators for one parameter group; the step counter is shared by
/// every parameter the state serves.
template <typename T>
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t step = 0;
    std::vector<std::vector<T>> m, v;  // parallel to the param group
};

/// One Adam step over a parameter group. Weight decay is classic
/// L2-in-gradient (g <- g + wd*theta), applied before the moment updates.
template <typename T>
void adam_update(std::span<Param<T>*> params, AdamState<T>& state, double lr,
                 double weight_decay);

/// Strict-improvement early stopping: stops once (epoch - best_epoch) reaches
/// the patience window. Equal accuracy does not count as improvement.
struct EarlyStopping {
    int64_t patience = 20;
    int64_t best_epoch = -1;
    double best_metric = -1.0;
    int64_t next_epoch = 0;

    /// Feed one epoch's metric; returns true when training should stop.
    bool update(int64_t epoch, double metric);
    bool improved_at(int64_t epoch) const { return best_epoch == epoch; }
};

struct EpochRecord {
    int64_t epoch = 0;
    double train_loss = 0.0;
    double eval_accuracy = 0.0;
    double lr_backbone = 0.0;
    double lr_attention = 0.0;
    int64_t wall_ms = 0;
};

struct TrainLog {
    std::vector<EpochRecord> records;
    int64_t best_epoch = -1;
    bool stopped_early = false;

    /// Serialized logs zero the wall_ms column unless include_timing is set,
    /// keeping artifact files byte-reproducible across runs.
    std::string to_csv(bool include_timing = false) const;
    std::string to_json(bool include_timing = false) const;
};

struct TrainResult {
    TrainLog log;
    std::vector<uint8_t> best_checkpoint;
    double best_accuracy = 0.0;
};

/// Runs the full training loop. Deterministic for a fixed seed in
/// single-threaded mode; aborts with a diagnostic on non-finite loss.
TrainResult train(ModelGraph<float>& model, const Dataset& train_set, const Dataset& eval_set,
                  const TrainConfig& config);

/// Argmax prediction (ties break to the lowest class index) over the dataset
/// in Eval mode, reduced to a confusion matrix and derived metrics.
EvalReport evaluate(const ModelGraph<float>& model, const Dataset& dataset);

}  // namespace atnf

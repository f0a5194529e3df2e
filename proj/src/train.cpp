#include "atnf/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "atnf/checkpoint.hpp"

namespace atnf {

void TrainConfig::validate() const {
    if (epochs < 1) throw UsageError("TrainConfig: epochs must be positive");
    if (batch_size < 1) throw UsageError("TrainConfig: batch_size must be positive");
    if (lr_backbone <= 0 || lr_attention <= 0)
        throw UsageError("TrainConfig: learning rates must be positive");
    if (weight_decay < 0) throw UsageError("TrainConfig: weight_decay must be non-negative");
    if (scheduler_step < 1 || scheduler_gamma <= 0)
        throw UsageError("TrainConfig: invalid scheduler parameters");
    if (patience < 1 || patience > epochs)
        throw UsageError("TrainConfig: patience must be in [1, epochs]");
}

double steplr_lr(double base_lr, int64_t epoch, int64_t step, double gamma) {
    if (epoch < 0) throw UsageError("steplr_lr: epoch must be non-negative");
    return base_lr * std::pow(gamma, static_cast<double>(epoch / step));
}

template <typename T>
void adam_update(std::span<Param<T>*> params, AdamState<T>& state, double lr,
                 double weight_decay) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(static_cast<size_t>(params[i]->value.numel()), T(0));
            state.v[i].assign(static_cast<size_t>(params[i]->value.numel()), T(0));
        }
    }
    if (state.m.size() != params.size())
        throw UsageError("adam_update: state was created for a different parameter group");

    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    for (size_t i = 0; i < params.size(); ++i) {
        Param<T>& p = *params[i];
        if (!p.value.has_grad())
            throw UsageError("adam_update: parameter '" + p.name + "' has no gradient");
        T* theta = p.value.data();
        const T* grad = p.value.grad().data();
        T* m = state.m[i].data();
        T* v = state.v[i].data();
        const int64_t n = p.value.numel();
        for (int64_t j = 0; j < n; ++j) {
            const double g = static_cast<double>(grad[j]) +
                             weight_decay * static_cast<double>(theta[j]);
            const double mj = state.beta1 * static_cast<double>(m[j]) + (1.0 - state.beta1) * g;
            const double vj = state.beta2 * static_cast<double>(v[j]) + (1.0 - state.beta2) * g * g;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double mhat = mj / bc1;
            const double vhat = vj / bc2;
            theta[j] = static_cast<T>(static_cast<double>(theta[j]) -
                                      lr * mhat / (std::sqrt(vhat) + state.eps));
        }
    }
}

template void adam_update<float>(std::span<Param<float>*>, AdamState<float>&, double, double);
template void adam_update<double>(std::span<Param<double>*>, AdamState<double>&, double, double);

bool EarlyStopping::update(int64_t epoch, double metric) {
    if (epoch != next_epoch)
        throw UsageError("EarlyStopping: epochs must be fed in order (expected " +
                         std::to_string(next_epoch) + ", got " + std::to_string(epoch) + ")");
    ++next_epoch;
    if (best_epoch < 0 || metric > best_metric) {
        best_metric = metric;
        best_epoch = epoch;
        return false;
    }
    return epoch - best_epoch >= patience;
}

namespace {

std::string fmt(double v, const char* spec) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

}  // namespace

std::string TrainLog::to_csv(bool include_timing) const {
    std::string out = "epoch,train_loss,eval_accuracy,lr_backbone,lr_attention,wall_ms\n";
    for (const EpochRecord& r : records) {
        out += std::to_string(r.epoch) + "," + fmt(r.train_loss, "%.6f") + "," +
               fmt(r.eval_accuracy, "%.6f") + "," + fmt(r.lr_backbone, "%.10g") + "," +
               fmt(r.lr_attention, "%.10g") + "," +
               std::to_string(include_timing ? r.wall_ms : 0) + "\n";
    }
    return out;
}

std::string TrainLog::to_json(bool include_timing) const {
    nlohmann::ordered_json j;
    j["best_epoch"] = best_epoch;
    j["stopped_early"] = stopped_early;
    nlohmann::ordered_json recs = nlohmann::ordered_json::array();
    for (const EpochRecord& r : records)
        recs.push_back({{"epoch", r.epoch},
                        {"train_loss", r.train_loss},
                        {"eval_accuracy", r.eval_accuracy},
                        {"lr_backbone", r.lr_backbone},
                        {"lr_attention", r.lr_attention},
                        {"wall_ms", include_timing ? r.wall_ms : 0}});
    j["epochs"] = recs;
    return j.dump(2) + "\n";
}

EvalReport evaluate(const ModelGraph<float>& model, const Dataset& dataset) {
    if (dataset.size() == 0) throw UsageError("evaluate: empty dataset");
    if (static_cast<int64_t>(dataset.class_names.size()) > 0 &&
        static_cast<int64_t>(dataset.class_names.size()) != model.num_classes)
        throw UsageError("evaluate: dataset has " + std::to_string(dataset.class_names.size()) +
                         " classes but the model predicts " + std::to_string(model.num_classes));

    std::vector<int> preds;
    preds.reserve(dataset.size());
    const size_t chunk = 32;
    for (size_t start = 0; start < dataset.size(); start += chunk) {
        std::vector<size_t> idx;
        for (size_t i = start; i < std::min(dataset.size(), start + chunk); ++i) idx.push_back(i);
        auto [batch, labels] = make_batch(dataset, idx);
        Tensor<float> logits = model.forward(batch, Mode::Eval);
        const int64_t k = logits.dim(1);
        for (int64_t row = 0; row < logits.dim(0); ++row) {
            const float* lr = logits.data() + row * k;
            int best = 0;
            for (int64_t j = 1; j < k; ++j)
                if (lr[j] > lr[best]) best = static_cast<int>(j);
            preds.push_back(best);
        }
    }
    ConfusionMatrix cm = confusion_matrix(preds, dataset.labels,
                                          static_cast<int64_t>(model.num_classes));
    cm.class_names = dataset.class_names;
    return make_eval_report(std::move(cm), family_name(model.family), model.plan_label,
                            model.seed);
}

TrainResult train(ModelGraph<float>& model, const Dataset& train_set, const Dataset& eval_set,
                  const TrainConfig& config) {
    config.validate();
    if (train_set.size() == 0 || eval_set.size() == 0)
        throw UsageError("train: datasets must be non-empty");
    for (const Dataset* ds : {&train_set, &eval_set})
        for (int label : ds->labels)
            if (label < 0 || label >= model.num_classes)
                throw UsageError("train: dataset label " + std::to_string(label) +
                                 " outside the model's " + std::to_string(model.num_classes) +
                                 " classes");

    std::vector<Param<float>*> backbone = model.group_params(ParamGroup::Backbone);
    std::vector<Param<float>*> attention = model.group_params(ParamGroup::Attention);
    AdamState<float> adam_backbone, adam_attention;

    TrainResult result;
    EarlyStopping stopper;
    stopper.patience = config.patience;

    for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr_b =
            steplr_lr(config.lr_backbone, epoch, config.scheduler_step, config.scheduler_gamma);
        const double lr_a =
            steplr_lr(config.lr_attention, epoch, config.scheduler_step, config.scheduler_gamma);

        double loss_sum = 0.0;
        for (const auto& idx :
             batch_indices(train_set.size(), config.batch_size, config.seed, epoch)) {
            auto [batch, labels] = make_batch(train_set, idx);
            model.zero_grad();
            GradTape<float> tape;
            Tensor<float> logits;
            Tensor<float> loss;
            try {
                logits = model.forward(batch, Mode::Train);
                loss = softmax_cross_entropy(logits, labels);
            } catch (const NumericError& e) {
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   " (" + e.what() + ")");
            }
            tape.backward(loss);
            loss_sum += static_cast<double>(loss[0]) * static_cast<double>(idx.size());
            if (!backbone.empty()) adam_update<float>(backbone, adam_backbone, lr_b, config.weight_decay);
            if (!attention.empty())
                adam_update<float>(attention, adam_attention, lr_a, config.weight_decay);
        }

        EvalReport report = evaluate(model, eval_set);
        const auto t1 = std::chrono::steady_clock::now();

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train_set.size());
        rec.eval_accuracy = report.accuracy;
        rec.lr_backbone = lr_b;
        rec.lr_attention = lr_a;
        rec.wall_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
        result.log.records.push_back(rec);

        const bool stop = stopper.update(epoch, report.accuracy);
        if (stopper.improved_at(epoch)) {
            result.best_checkpoint = serialize_checkpoint(model);
            result.best_accuracy = report.accuracy;
            result.log.best_epoch = epoch;
        }
        if (stop) {
            result.log.stopped_early = true;
            break;
        }
    }
    return result;
}

}  // namespace atnf

// atnf - attention-augmented mini-CNN toolkit
//
// Subcommands: train, eval, gradcheck, inspect, gen-data.
// Exit codes: 0 success, 2 usage/config error, 1 runtime failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "atnf/arch_config.hpp"
#include "atnf/binio.hpp"
#include "atnf/checkpoint.hpp"
#include "atnf/gradcheck_targets.hpp"
#include "atnf/overhead.hpp"
#include "atnf/train.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

bool timing_enabled() {
    const char* v = std::getenv("ATNF_LOG_TIMING");
    return v && std::string(v) == "1";
}

atnf::Family parse_family(const std::string& name) {
    auto f = atnf::family_from_name(name);
    if (!f)
        throw atnf::UsageError("unknown family '" + name +
                               "' (expected vgg_mini, resnet_mini, inception_mini, "
                               "densenet_mini, or efficientnet_mini)");
    return *f;
}

atnf::Scale parse_scale(const std::string& name) {
    auto s = atnf::scale_from_name(name);
    if (!s) throw atnf::UsageError("unknown scale '" + name + "' (expected toy or paper)");
    return *s;
}

struct ResolvedPlan {
    atnf::PlacementPlan plan;
    std::string label;
    std::string source;  // "canonical" or the file path
};

ResolvedPlan resolve_plan(const std::string& spec, atnf::Family family, atnf::Scale scale) {
    ResolvedPlan out;
    if (spec.rfind("canonical:", 0) == 0) {
        const std::string name = spec.substr(10);
        auto plans = atnf::canonical_plans(family, scale);
        std::string key;
        if (name == "baseline") key = "baseline";
        else if (name == "v1") key = "v1_global_se";
        else if (name == "v2") key = "v2_selective_se";
        else if (name == "v3") key = "v3_hybrid";
        else
            throw atnf::UsageError("unknown canonical plan '" + name +
                                   "' (valid names: baseline, v1, v2, v3)");
        out.plan = plans.at(key);
        out.label = spec;
        out.source = "canonical";
        return out;
    }
    std::ifstream in(spec, std::ios::binary);
    if (!in) throw atnf::UsageError("cannot open plan file " + spec);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    atnf::PlanResult res = atnf::parse_plan(text);
    if (auto* err = std::get_if<atnf::PlanParseError>(&res))
        throw atnf::UsageError(spec + ": " + err->str());
    out.plan = std::get<atnf::PlacementPlan>(res);
    if (out.plan.family != family)
        throw atnf::UsageError("plan file " + spec + " targets family " +
                               atnf::family_name(out.plan.family) + " but --family is " +
                               atnf::family_name(family));
    out.label = fs::path(spec).filename().string();
    out.source = spec;
    return out;
}

struct DataArgs {
    std::string spec;
    int64_t n_per_class = 200;
    int64_t size = 0;  // 0 = scale default
    uint64_t data_seed = 0;
    std::string augment = "none";
};

std::pair<atnf::Dataset, atnf::Dataset> resolve_data(const DataArgs& args, int64_t default_size) {
    using atnf::Dataset;
    const int64_t size = args.size > 0 ? args.size : default_size;
    if (args.spec == "synthetic") {
        auto [train, test] = atnf::gen_synthetic(args.n_per_class, size, args.data_seed);
        return {std::move(train), std::move(test)};
    }

    auto load_pair_raw = [](const std::string& train_path, const std::string& test_path) {
        Dataset train = atnf::load_raw_dataset(train_path);
        Dataset test = atnf::load_raw_dataset(test_path);
        train.split = atnf::SplitKind::Train;
        test.split = atnf::SplitKind::Test;
        if (train.class_names != test.class_names)
            throw atnf::UsageError("train/test raw files disagree on class names");
        return std::make_pair(std::move(train), std::move(test));
    };

    if (args.spec.size() > 5 && args.spec.substr(args.spec.size() - 5) == ".atnd") {
        const std::string marker = "_train.atnd";
        if (args.spec.size() > marker.size() &&
            args.spec.substr(args.spec.size() - marker.size()) == marker) {
            std::string stem = args.spec.substr(0, args.spec.size() - marker.size());
            return load_pair_raw(args.spec, stem + "_test.atnd");
        }
        throw atnf::UsageError("--data expects the *_train.atnd file (or its stem); got " +
                               args.spec);
    }
    if (fs::exists(args.spec + "_train.atnd"))
        return load_pair_raw(args.spec + "_train.atnd", args.spec + "_test.atnd");
    if (fs::is_directory(args.spec)) {
        const std::string train_dir = (fs::path(args.spec) / "train").string();
        const std::string test_dir = (fs::path(args.spec) / "test").string();
        if (!fs::is_directory(train_dir) || !fs::is_directory(test_dir))
            throw atnf::UsageError("--data directory must contain train/ and test/ class trees");
        Dataset train = atnf::load_image_dataset(train_dir, size);
        Dataset test =
            atnf::load_image_dataset(test_dir, size, std::optional(train.class_names));
        train.split = atnf::SplitKind::Train;
        test.split = atnf::SplitKind::Test;
        return {std::move(train), std::move(test)};
    }
    throw atnf::UsageError("cannot resolve --data '" + args.spec +
                           "': expected 'synthetic', a *_train.atnd file/stem, or a directory");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw atnf::IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw atnf::IoError("failed writing " + path);
}

void print_report_summary(const atnf::EvalReport& r) {
    std::printf("model=%s plan=%s seed=%llu\n", r.model.c_str(), r.plan.c_str(),
                static_cast<unsigned long long>(r.seed));
    std::printf("accuracy  %.4f\n", r.accuracy);
    std::printf("macro     precision %.4f  recall %.4f  f1 %.4f\n", r.macro.precision,
                r.macro.recall, r.macro.f1);
    for (size_t c = 0; c < r.per_class.size(); ++c) {
        std::string name = c < r.confusion.class_names.size() ? r.confusion.class_names[c]
                                                              : "class" + std::to_string(c);
        std::printf("  %-16s precision %.4f  recall %.4f  f1 %.4f\n", name.c_str(),
                    r.per_class[c].precision, r.per_class[c].recall, r.per_class[c].f1);
    }
}

// ---------------------------------------------------------------------------

struct TrainCmd {
    std::string family, plan = "canonical:baseline", scale = "toy", out;
    DataArgs data;
    atnf::TrainConfig config;
    std::string eval_split = "test";
    bool patience_given = false;
};

int cmd_train(const TrainCmd& cmd, const std::vector<std::string>& argv) {
    atnf::Family family = parse_family(cmd.family);
    atnf::Scale scale = parse_scale(cmd.scale);
    atnf::TrainConfig config = cmd.config;
    if (cmd.eval_split == "holdout") config.eval_split = atnf::EvalSplit::Holdout;
    else if (cmd.eval_split != "test")
        throw atnf::UsageError("--eval-split must be test or holdout");
    if (!cmd.patience_given) config.patience = std::min(config.patience, config.epochs);
    config.validate();

    ResolvedPlan plan = resolve_plan(cmd.plan, family, scale);
    auto [train_set, test_set] = resolve_data(cmd.data, atnf::arch::input_size(scale));

    if (cmd.data.augment == "dihedral8")
        train_set = atnf::augment(
            train_set, {atnf::AugmentMode::Dihedral8, atnf::SplitKind::Train}, config.seed);
    else if (cmd.data.augment == "randrotflip")
        train_set = atnf::augment(
            train_set, {atnf::AugmentMode::RandomRotFlip, atnf::SplitKind::Train}, config.seed);
    else if (cmd.data.augment != "none")
        throw atnf::UsageError("--augment must be none, dihedral8, or randrotflip");

    const int64_t num_classes = static_cast<int64_t>(train_set.class_names.size());
    if (num_classes < 2) throw atnf::UsageError("dataset provides fewer than 2 classes");

    atnf::ModelGraph<float> model =
        atnf::build_model<float>(family, scale, num_classes, config.seed, plan.plan, plan.label);

    std::fprintf(stderr, "training %s / %s on %zu train, %zu eval samples (%lld classes)\n",
                 atnf::family_name(family), plan.label.c_str(), train_set.size(),
                 test_set.size(), static_cast<long long>(num_classes));

    atnf::TrainResult result = atnf::train(model, train_set, test_set, config);
    for (const atnf::EpochRecord& r : result.log.records)
        std::fprintf(stderr, "epoch %3lld  loss %.4f  acc %.4f  (%lld ms)\n",
                     static_cast<long long>(r.epoch), r.train_loss, r.eval_accuracy,
                     static_cast<long long>(r.wall_ms));
    std::fprintf(stderr, "best epoch %lld  accuracy %.4f%s\n",
                 static_cast<long long>(result.log.best_epoch), result.best_accuracy,
                 result.log.stopped_early ? "  (early stop)" : "");

    fs::create_directories(cmd.out);
    atnf::io::write_file((fs::path(cmd.out) / "checkpoint.atnf").string(),
                         result.best_checkpoint);

    const bool timing = timing_enabled();
    write_text((fs::path(cmd.out) / "trainlog.csv").string(), result.log.to_csv(timing));
    write_text((fs::path(cmd.out) / "trainlog.json").string(), result.log.to_json(timing));

    // report the retained best checkpoint, exercising the reload path
    atnf::ModelGraph<float> best = atnf::deserialize_checkpoint(result.best_checkpoint);
    atnf::EvalReport report = atnf::evaluate(best, test_set);
    atnf::write_report(report, (fs::path(cmd.out) / "report.csv").string(),
                       atnf::ReportFormat::CSV);
    atnf::write_report(report, (fs::path(cmd.out) / "report.json").string(),
                       atnf::ReportFormat::JSON);

    ordered_json manifest;
    manifest["tool_version"] = kVersion;
    manifest["command"] = "train";
    manifest["argv"] = argv;
    manifest["family"] = atnf::family_name(family);
    manifest["scale"] = atnf::scale_name(scale);
    manifest["num_classes"] = num_classes;
    manifest["seed"] = config.seed;
    manifest["plan"] = {{"name", plan.label},
                        {"source", plan.source},
                        {"text", atnf::serialize_plan(plan.plan)}};
    manifest["config"] = {{"epochs", config.epochs},
                          {"batch_size", config.batch_size},
                          {"lr_backbone", config.lr_backbone},
                          {"lr_attention", config.lr_attention},
                          {"weight_decay", config.weight_decay},
                          {"scheduler_step", config.scheduler_step},
                          {"scheduler_gamma", config.scheduler_gamma},
                          {"patience", config.patience},
                          {"eval_split", cmd.eval_split},
                          {"augment", cmd.data.augment}};
    manifest["data"] = {{"spec", cmd.data.spec},
                        {"n_per_class", cmd.data.n_per_class},
                        {"size", cmd.data.size},
                        {"data_seed", cmd.data.data_seed}};
    manifest["artifacts"] = {{"checkpoint", "checkpoint.atnf"},
                             {"trainlog_csv", "trainlog.csv"},
                             {"trainlog_json", "trainlog.json"},
                             {"report_csv", "report.csv"},
                             {"report_json", "report.json"}};
    write_text((fs::path(cmd.out) / "manifest.json").string(), manifest.dump(2) + "\n");

    std::printf("best_epoch=%lld best_accuracy=%.6f out=%s\n",
                static_cast<long long>(result.log.best_epoch), result.best_accuracy,
                cmd.out.c_str());
    return 0;
}

// ---------------------------------------------------------------------------

struct EvalCmd {
    std::string checkpoint, out, split = "test";
    DataArgs data;
};

int cmd_eval(const EvalCmd& cmd, const std::vector<std::string>& argv) {
    if (!fs::exists(cmd.checkpoint))
        throw atnf::UsageError("checkpoint file does not exist: " + cmd.checkpoint);
    atnf::ModelGraph<float> model = atnf::load_checkpoint(cmd.checkpoint);

    auto [train_set, test_set] = resolve_data(cmd.data, model.input_size);
    const atnf::Dataset& ds = cmd.split == "train" ? train_set : test_set;
    if (static_cast<int64_t>(ds.class_names.size()) != model.num_classes)
        throw atnf::UsageError("dataset has " + std::to_string(ds.class_names.size()) +
                               " classes but the checkpoint expects " +
                               std::to_string(model.num_classes));

    atnf::EvalReport report = atnf::evaluate(model, ds);
    print_report_summary(report);

    if (!cmd.out.empty()) {
        fs::create_directories(cmd.out);
        atnf::write_report(report, (fs::path(cmd.out) / "report.csv").string(),
                           atnf::ReportFormat::CSV);
        atnf::write_report(report, (fs::path(cmd.out) / "report.json").string(),
                           atnf::ReportFormat::JSON);
        ordered_json manifest;
        manifest["tool_version"] = kVersion;
        manifest["command"] = "eval";
        manifest["argv"] = argv;
        manifest["checkpoint"] = cmd.checkpoint;
        manifest["split"] = cmd.split;
        manifest["data"] = {{"spec", cmd.data.spec}, {"data_seed", cmd.data.data_seed}};
        manifest["artifacts"] = {{"report_csv", "report.csv"}, {"report_json", "report.json"}};
        write_text((fs::path(cmd.out) / "manifest.json").string(), manifest.dump(2) + "\n");
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct GradCheckCmd {
    std::string target;
    uint64_t seed = 0;
    double tol = 1e-4;
    double eps = 1e-5;
};

int cmd_gradcheck(const GradCheckCmd& cmd) {
    std::vector<std::string> targets;
    if (cmd.target == "all") targets = {"ops", "se", "sa", "model"};
    else targets = {cmd.target};

    bool all_pass = true;
    for (const std::string& t : targets) {
        for (const atnf::TargetReport& tr : atnf::run_gradcheck_target(t, cmd.seed, cmd.eps)) {
            const bool pass = tr.report.passed(cmd.tol);
            all_pass = all_pass && pass;
            std::printf("%-8s %-24s max_rel_err=%.3e checked=%lld skipped=%lld %s\n", t.c_str(),
                        tr.name.c_str(), tr.report.max_rel_err,
                        static_cast<long long>(tr.report.checked),
                        static_cast<long long>(tr.report.skipped_kinks),
                        pass ? "PASS" : "FAIL");
            if (!pass)
                for (const atnf::GradCheckEntry& e : tr.report.worst)
                    std::printf("    worst: %s[%lld] analytic=%.9e numeric=%.9e rel=%.3e\n",
                                e.param.c_str(), static_cast<long long>(e.coord), e.analytic,
                                e.numeric, e.rel_err);
        }
    }
    return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------

struct InspectCmd {
    std::string family, plan = "canonical:baseline", scale = "toy";
    int64_t input_size = 0;
    bool json = false;
};

int cmd_inspect(const InspectCmd& cmd) {
    atnf::Family family = parse_family(cmd.family);
    atnf::Scale scale = parse_scale(cmd.scale);
    ResolvedPlan plan = resolve_plan(cmd.plan, family, scale);

    atnf::ModelGraph<float> base = atnf::build_backbone<float>(family, scale, 4, 0);
    const int64_t size = cmd.input_size > 0 ? cmd.input_size : base.input_size;
    atnf::OverheadReport overhead = atnf::attention_overhead(base, plan.plan, {1, 3, size, size});
    atnf::ModelGraph<float> attached = atnf::attach_attention(base, plan.plan);

    if (cmd.json) {
        ordered_json j;
        j["family"] = atnf::family_name(family);
        j["scale"] = atnf::scale_name(scale);
        j["input_size"] = size;
        j["plan"] = {{"name", plan.label}, {"text", atnf::serialize_plan(plan.plan)}};
        ordered_json hooks = ordered_json::array();
        for (const atnf::HookPoint& h : base.hooks)
            hooks.push_back({{"name", h.name}, {"channels", h.channels}});
        j["hooks"] = hooks;
        j["params"] = {{"backbone", attached.count_params(atnf::ParamGroup::Backbone)},
                       {"attention", attached.count_params(atnf::ParamGroup::Attention)},
                       {"total", attached.count_params()}};
        ordered_json breakdown = ordered_json::array();
        for (const atnf::OverheadEntry& e : overhead.breakdown)
            breakdown.push_back({{"hook", e.hook},
                                 {"kind", e.kind == atnf::AttentionKind::SE ? "SE" : "SA"},
                                 {"params_added", e.params_added},
                                 {"flops_added", e.flops_added}});
        j["overhead"] = {{"params_added", overhead.params_added},
                         {"flops_added", overhead.flops_added},
                         {"breakdown", breakdown}};
        std::printf("%s\n", j.dump(2).c_str());
        return 0;
    }

    std::printf("%s (%s scale, input %lldx%lld)\n", atnf::family_name(family),
                atnf::scale_name(scale), static_cast<long long>(size),
                static_cast<long long>(size));
    std::printf("\nhooks:\n");
    for (const atnf::HookPoint& h : base.hooks)
        std::printf("  %-28s %5lld channels\n", h.name.c_str(),
                    static_cast<long long>(h.channels));
    std::printf("\nplan %s: %zu insertions\n", plan.label.c_str(), plan.plan.insertions.size());
    for (const atnf::OverheadEntry& e : overhead.breakdown)
        std::printf("  %-4s at %-24s +%8lld params  +%10lld MACs\n",
                    e.kind == atnf::AttentionKind::SE ? "SE" : "SA", e.hook.c_str(),
                    static_cast<long long>(e.params_added),
                    static_cast<long long>(e.flops_added));
    std::printf("\nparams: backbone %lld, attention %lld, total %lld\n",
                static_cast<long long>(attached.count_params(atnf::ParamGroup::Backbone)),
                static_cast<long long>(attached.count_params(atnf::ParamGroup::Attention)),
                static_cast<long long>(attached.count_params()));
    std::printf("overhead: params_added=%lld flops_added=%lld\n",
                static_cast<long long>(overhead.params_added),
                static_cast<long long>(overhead.flops_added));
    return 0;
}

// ---------------------------------------------------------------------------

struct GenDataCmd {
    int64_t n_per_class = 200;
    int64_t size = 32;
    uint64_t seed = 0;
    std::string out;
};

int cmd_gen_data(const GenDataCmd& cmd, const std::vector<std::string>& argv) {
    auto [train, test] = atnf::gen_synthetic(cmd.n_per_class, cmd.size, cmd.seed);
    if (fs::path(cmd.out).has_parent_path())
        fs::create_directories(fs::path(cmd.out).parent_path());
    atnf::save_raw_dataset(train, cmd.out + "_train.atnd");
    atnf::save_raw_dataset(test, cmd.out + "_test.atnd");

    ordered_json manifest;
    manifest["tool_version"] = kVersion;
    manifest["command"] = "gen-data";
    manifest["argv"] = argv;
    manifest["n_per_class"] = cmd.n_per_class;
    manifest["size"] = cmd.size;
    manifest["seed"] = cmd.seed;
    manifest["artifacts"] = {{"train", cmd.out + "_train.atnd"},
                             {"test", cmd.out + "_test.atnd"}};
    write_text(cmd.out + "_manifest.json", manifest.dump(2) + "\n");

    std::printf("wrote %s_train.atnd (%zu samples) and %s_test.atnd (%zu samples)\n",
                cmd.out.c_str(), train.size(), cmd.out.c_str(), test.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);

    CLI::App app{"attention-augmented mini-CNN toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    TrainCmd train_cmd;
    CLI::App* train_app =
        app.add_subcommand("train", "train a model and retain the best checkpoint");
    train_app->add_option("--family", train_cmd.family, "backbone family")->required();
    train_app->add_option("--plan", train_cmd.plan, "plan file or canonical:{baseline,v1,v2,v3}")
        ->capture_default_str();
    train_app
        ->add_option("--data", train_cmd.data.spec, "synthetic | raw file stem | image directory")
        ->required();
    train_app->add_option("--scale", train_cmd.scale, "toy | paper")->capture_default_str();
    train_app->add_option("--seed", train_cmd.config.seed, "run seed")->capture_default_str();
    train_app->add_option("--out", train_cmd.out, "output directory")->required();
    train_app->add_option("--epochs", train_cmd.config.epochs)->capture_default_str();
    train_app->add_option("--batch-size", train_cmd.config.batch_size)->capture_default_str();
    train_app->add_option("--lr-backbone", train_cmd.config.lr_backbone)->capture_default_str();
    train_app->add_option("--lr-attention", train_cmd.config.lr_attention)->capture_default_str();
    train_app->add_option("--weight-decay", train_cmd.config.weight_decay)->capture_default_str();
    CLI::Option* patience_opt =
        train_app->add_option("--patience", train_cmd.config.patience)->capture_default_str();
    train_app->add_option("--eval-split", train_cmd.eval_split, "test | holdout")
        ->capture_default_str();
    train_app
        ->add_option("--augment", train_cmd.data.augment,
                     "none | dihedral8 | randrotflip (train split only)")
        ->capture_default_str();
    train_app
        ->add_option("--n-per-class", train_cmd.data.n_per_class,
                     "synthetic data: samples per class")
        ->capture_default_str();
    train_app
        ->add_option("--size", train_cmd.data.size, "synthetic data: image size (0 = scale default)")
        ->capture_default_str();
    train_app->add_option("--data-seed", train_cmd.data.data_seed, "synthetic data seed")
        ->capture_default_str();

    EvalCmd eval_cmd;
    CLI::App* eval_app = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval_app->add_option("--checkpoint", eval_cmd.checkpoint, "checkpoint file")->required();
    eval_app->add_option("--data", eval_cmd.data.spec, "synthetic | raw file stem | image dir")
        ->required();
    eval_app->add_option("--split", eval_cmd.split, "test | train")->capture_default_str();
    eval_app->add_option("--out", eval_cmd.out, "optional output directory");
    eval_app->add_option("--n-per-class", eval_cmd.data.n_per_class)->capture_default_str();
    eval_app->add_option("--size", eval_cmd.data.size)->capture_default_str();
    eval_app->add_option("--data-seed", eval_cmd.data.data_seed)->capture_default_str();

    GradCheckCmd gc_cmd;
    CLI::App* gc_app =
        app.add_subcommand("gradcheck", "compare analytic gradients to finite differences");
    gc_app->add_option("--target", gc_cmd.target, "ops | se | sa | model | all")->required();
    gc_app->add_option("--seed", gc_cmd.seed)->capture_default_str();
    gc_app->add_option("--tol", gc_cmd.tol, "max relative error")->capture_default_str();
    gc_app->add_option("--eps", gc_cmd.eps, "finite-difference step")->capture_default_str();

    InspectCmd inspect_cmd;
    CLI::App* inspect_app =
        app.add_subcommand("inspect", "show hooks, parameter counts, and plan overhead");
    inspect_app->add_option("--family", inspect_cmd.family)->required();
    inspect_app->add_option("--plan", inspect_cmd.plan)->capture_default_str();
    inspect_app->add_option("--scale", inspect_cmd.scale)->capture_default_str();
    inspect_app
        ->add_option("--input-size", inspect_cmd.input_size, "probe input size (0 = scale default)")
        ->capture_default_str();
    inspect_app->add_flag("--json", inspect_cmd.json, "machine-readable output");

    GenDataCmd gen_cmd;
    CLI::App* gen_app = app.add_subcommand("gen-data", "write a synthetic raw dataset pair");
    gen_app->add_option("--n-per-class", gen_cmd.n_per_class)->capture_default_str();
    gen_app->add_option("--size", gen_cmd.size)->capture_default_str();
    gen_app->add_option("--seed", gen_cmd.seed)->capture_default_str();
    gen_app->add_option("--out", gen_cmd.out, "output stem (writes <out>_{train,test}.atnd)")
        ->required();

    try {
        app.parse(argc, argv);
        train_cmd.patience_given = patience_opt->count() > 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    }

    try {
        if (app.got_subcommand(train_app)) return cmd_train(train_cmd, args);
        if (app.got_subcommand(eval_app)) return cmd_eval(eval_cmd, args);
        if (app.got_subcommand(gc_app)) return cmd_gradcheck(gc_cmd);
        if (app.got_subcommand(inspect_app)) return cmd_inspect(inspect_cmd);
        if (app.got_subcommand(gen_app)) return cmd_gen_data(gen_cmd, args);
    } catch (const atnf::UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const atnf::ShapeError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return 1;
    }
    return 2;
}

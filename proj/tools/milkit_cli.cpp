// milkit command-line tool. Talks to the library only through the C API.

#include "milkit/milkit.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitValidation = 2,
    kExitIo = 3,
    kExitNumeric = 4,
};

int exit_code_for(mil_status s) {
    switch (s) {
        case MIL_OK: return kExitOk;
        case MIL_ERR_INVALID_ARGUMENT:
        case MIL_ERR_VALIDATION:
        case MIL_ERR_DIMENSION: return kExitValidation;
        case MIL_ERR_IO:
        case MIL_ERR_FORMAT:
        case MIL_ERR_CORRUPT: return kExitIo;
        case MIL_ERR_NUMERIC: return kExitNumeric;
        case MIL_ERR_INTERNAL: return kExitInternal;
    }
    return kExitInternal;
}

struct CommandFailed {
    int code;
};

void check(mil_status s, const std::string& context) {
    if (s == MIL_OK) return;
    std::cerr << "milkit: " << context << ": " << mil_status_name(s) << ": " << mil_last_error() << "\n";
    throw CommandFailed{exit_code_for(s)};
}

[[noreturn]] void usage_error(const std::string& message) {
    std::cerr << "milkit: " << message << "\n";
    throw CommandFailed{kExitValidation};
}

struct DatasetPtr {
    mil_dataset* p = nullptr;
    ~DatasetPtr() { mil_dataset_free(p); }
};

struct ModelPtr {
    mil_model* p = nullptr;
    ModelPtr() = default;
    ModelPtr(ModelPtr&& o) noexcept : p(o.p) { o.p = nullptr; }
    ModelPtr(const ModelPtr&) = delete;
    ~ModelPtr() { mil_model_free(p); }
};

std::string kind_name(mil_model_kind k) {
    switch (k) {
        case MIL_MEANPOOL: return "meanpool";
        case MIL_CHOWDER: return "chowder";
        case MIL_DEEPMIL: return "deepmil";
    }
    return "unknown";
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) usage_error("cannot write '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

// Every command leaves a record of its fully resolved configuration.
void write_run_record(const fs::path& out_dir, const std::string& command, ordered_json config) {
    ordered_json record;
    record["command"] = command;
    record["milkit_version"] = mil_version();
    record["bag_format_version"] = MIL_BAG_FORMAT_VERSION;
    record["checkpoint_format_version"] = MIL_CHECKPOINT_FORMAT_VERSION;
    record["config"] = std::move(config);
    write_text_atomic(out_dir / ("run_" + command + ".json"), record.dump(2) + "\n");
}

fs::path prepare_out_dir(const std::string& flag) {
    fs::path dir = flag;
    if (dir.empty()) {
        const char* env = std::getenv("MILKIT_OUT_DIR");
        dir = env && *env ? fs::path(env) : fs::path(".");
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        std::cerr << "milkit: cannot create output directory '" << dir.string() << "': " << ec.message() << "\n";
        throw CommandFailed{kExitIo};
    }
    return dir;
}

struct ModelFlags {
    std::string model = "meanpool";
    uint32_t r = 10;
    uint32_t n_hidden = 128;
    double l2_c = 0.0;

    void add(CLI::App* app) {
        app->add_option("--model", model, "meanpool|chowder|deepmil")->capture_default_str();
        app->add_option("--r", r, "Chowder: top/bottom tiles kept")->capture_default_str();
        app->add_option("--n-hidden", n_hidden, "DeepMIL: attention width")->capture_default_str();
        app->add_option("--l2-c", l2_c, "MeanPool: L2 penalty coefficient")->capture_default_str();
    }
    mil_model_spec spec() const {
        mil_model_kind kind;
        check(mil_parse_model_kind(model.c_str(), &kind), "--model");
        mil_model_spec s;
        mil_model_spec_default(&s, kind);
        s.r = r;
        s.n_hidden = n_hidden;
        s.l2_c = l2_c;
        return s;
    }
    ordered_json json() const {
        return {{"model", model}, {"r", r}, {"n_hidden", n_hidden}, {"l2_c", l2_c}};
    }
};

struct TrainFlags {
    mil_train_config cfg{};
    TrainFlags() { mil_train_config_default(&cfg); }

    void add(CLI::App* app) {
        app->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
        app->add_option("--lr", cfg.learning_rate, "Adam learning rate")->capture_default_str();
        app->add_option("--subsample", cfg.subsample_tiles, "Tiles sampled per bag for training (0 = all)")
            ->capture_default_str();
        app->add_option("--batch-bags", cfg.batch_bags, "Bags per gradient step")->capture_default_str();
        app->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    }
    ordered_json json() const {
        return {{"learning_rate", cfg.learning_rate}, {"epochs", cfg.epochs},         {"batch_bags", cfg.batch_bags},
                {"subsample_tiles", cfg.subsample_tiles}, {"adam_beta1", cfg.adam_beta1}, {"adam_beta2", cfg.adam_beta2},
                {"adam_eps", cfg.adam_eps},           {"seed", cfg.seed}};
    }
};

struct GridFlags {
    bool enabled = false;
    std::vector<uint32_t> r_values{10, 25, 100};
    std::vector<uint32_t> n_hidden_values{64, 128, 256};
    std::vector<double> l2_c_values{0.0, 0.5, 1.0};
    std::vector<uint32_t> epoch_values{5, 10, 20, 40, 80, 120};
    double holdout = 0.2;

    void add(CLI::App* app, bool optional) {
        if (optional) app->add_flag("--grid", enabled, "Tune hyperparameters per fold by grid search");
        app->add_option("--grid-r", r_values, "Chowder r values")->delimiter(',')->capture_default_str();
        app->add_option("--grid-n-hidden", n_hidden_values, "DeepMIL widths")->delimiter(',')->capture_default_str();
        app->add_option("--grid-l2-c", l2_c_values, "MeanPool penalties")->delimiter(',')->capture_default_str();
        app->add_option("--grid-epochs", epoch_values, "Epoch counts")->delimiter(',')->capture_default_str();
        app->add_option("--holdout", holdout, "Validation share of training patients")->capture_default_str();
    }
    mil_grid_spec spec() const {
        return mil_grid_spec{r_values.data(),     r_values.size(),     n_hidden_values.data(), n_hidden_values.size(),
                             l2_c_values.data(),  l2_c_values.size(),  epoch_values.data(),    epoch_values.size(),
                             holdout};
    }
    ordered_json json() const {
        return {{"r_values", r_values},     {"n_hidden_values", n_hidden_values}, {"l2_c_values", l2_c_values},
                {"epoch_values", epoch_values}, {"holdout_fraction", holdout}};
    }
};

DatasetPtr load(const std::string& manifest) {
    DatasetPtr ds;
    check(mil_dataset_load(manifest.c_str(), &ds.p), "loading manifest '" + manifest + "'");
    return ds;
}

int cmd_ingest(const std::string& manifest) {
    auto ds = load(manifest);
    mil_dataset_info info;
    check(mil_dataset_get_info(ds.p, &info), "inspecting dataset");
    std::cout << "slides=" << info.n_slides << "\n"
              << "patients=" << info.n_patients << "\n"
              << "centers=" << info.n_centers << "\n"
              << "positive_patients=" << info.n_positive_patients << "\n"
              << "negative_patients=" << info.n_negative_patients << "\n"
              << "unlabeled_patients=" << info.n_unlabeled_patients << "\n"
              << "feature_dim=" << info.feature_dim << "\n"
              << "min_tiles=" << info.min_tiles << "\n"
              << "max_tiles=" << info.max_tiles << "\n"
              << "coords=" << (info.has_coords ? "yes" : "no") << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"milkit: multiple-instance learning on precomputed tile features"};
    app.require_subcommand(1);

    std::string manifest;
    std::string out_dir_flag;
    uint32_t workers = 1;

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Validate a manifest and its bag files, print a summary");
    ingest->add_option("--manifest", manifest, "Manifest CSV")->required();

    // synth
    mil_synth_config synth_cfg;
    mil_synth_config_default(&synth_cfg);
    auto* synth = app.add_subcommand("synth", "Generate a planted-signal synthetic cohort");
    synth->add_option("--patients", synth_cfg.n_patients)->capture_default_str();
    synth->add_option("--slides-min", synth_cfg.slides_min)->capture_default_str();
    synth->add_option("--slides-max", synth_cfg.slides_max)->capture_default_str();
    synth->add_option("--tiles-min", synth_cfg.tiles_min)->capture_default_str();
    synth->add_option("--tiles-max", synth_cfg.tiles_max)->capture_default_str();
    synth->add_option("--dim", synth_cfg.d, "Feature dimension")->capture_default_str();
    synth->add_option("--witness-rate", synth_cfg.witness_rate)->capture_default_str();
    synth->add_option("--signal-shift", synth_cfg.signal_shift)->capture_default_str();
    synth->add_option("--signal-dims", synth_cfg.signal_dims)->capture_default_str();
    synth->add_option("--positive-fraction", synth_cfg.positive_fraction)->capture_default_str();
    synth->add_option("--centers", synth_cfg.n_centers)->capture_default_str();
    synth->add_option("--center-shift", synth_cfg.center_shift)->capture_default_str();
    bool synth_coords = false;
    synth->add_flag("--coords", synth_coords, "Attach grid tile coordinates");
    synth->add_option("--seed", synth_cfg.seed)->capture_default_str();
    synth->add_option("--out-dir", out_dir_flag, "Output directory (default $MILKIT_OUT_DIR or .)");

    // train
    ModelFlags train_model;
    TrainFlags train_flags;
    auto* train = app.add_subcommand("train", "Train one model on a labelled manifest");
    train->add_option("--manifest", manifest)->required();
    train_model.add(train);
    train_flags.add(train);
    train->add_option("--workers", workers, "Accepted for symmetry; training runs on one thread")->capture_default_str();
    train->add_option("--out-dir", out_dir_flag);

    // predict
    std::vector<std::string> checkpoints;
    auto* predict = app.add_subcommand("predict", "Slide and patient predictions; several checkpoints are median-combined");
    predict->add_option("--manifest", manifest)->required();
    predict->add_option("--checkpoint", checkpoints, "Checkpoint file(s)")->required();
    predict->add_option("--out-dir", out_dir_flag);

    // evaluate
    std::string predictions_csv;
    auto* evaluate = app.add_subcommand("evaluate", "AUC with DeLong 95% CI of a patient prediction CSV");
    evaluate->add_option("--predictions", predictions_csv)->required();
    evaluate->add_option("--out-dir", out_dir_flag);

    // cv
    ModelFlags cv_model;
    TrainFlags cv_train;
    GridFlags cv_grid;
    mil_cv_config cv_cfg{MIL_SPLIT_RANDOM, 5, 3, 1, 0};
    std::string split = "random";
    auto* cv = app.add_subcommand("cv", "Repeated k-fold cross-validation");
    cv->add_option("--manifest", manifest)->required();
    cv_model.add(cv);
    cv_train.add(cv);
    cv_grid.add(cv, true);
    cv->add_option("--split", split, "random|center")->capture_default_str();
    cv->add_option("--k", cv_cfg.k)->capture_default_str();
    cv->add_option("--repeats", cv_cfg.repeats)->capture_default_str();
    cv->add_option("--workers", workers, "Parallel folds")->capture_default_str();
    cv->add_option("--out-dir", out_dir_flag);

    // grid
    ModelFlags grid_model;
    TrainFlags grid_train;
    GridFlags grid_flags;
    auto* grid = app.add_subcommand("grid", "Grid search on a stratified holdout of the labelled patients");
    grid->add_option("--manifest", manifest)->required();
    grid_model.add(grid);
    grid_train.add(grid);
    grid_flags.add(grid, false);
    grid->add_option("--out-dir", out_dir_flag);

    // compare
    std::string csv_a;
    std::string csv_b;
    auto* compare = app.add_subcommand("compare", "Paired DeLong test between two patient prediction CSVs");
    compare->add_option("--a", csv_a)->required();
    compare->add_option("--b", csv_b)->required();
    compare->add_option("--out-dir", out_dir_flag);

    // explain
    std::string checkpoint;
    std::string slide_id;
    auto* explain = app.add_subcommand("explain", "Per-tile scores of one slide");
    explain->add_option("--manifest", manifest)->required();
    explain->add_option("--checkpoint", checkpoint)->required();
    explain->add_option("--slide", slide_id)->required();
    explain->add_option("--out-dir", out_dir_flag);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(manifest);

        const fs::path out = prepare_out_dir(out_dir_flag);

        if (synth->parsed()) {
            synth_cfg.with_coords = synth_coords ? 1 : 0;
            check(mil_synth_write(&synth_cfg, out.string().c_str()), "generating synthetic cohort");
            write_run_record(out, "synth",
                             {{"patients", synth_cfg.n_patients},
                              {"slides_min", synth_cfg.slides_min},
                              {"slides_max", synth_cfg.slides_max},
                              {"tiles_min", synth_cfg.tiles_min},
                              {"tiles_max", synth_cfg.tiles_max},
                              {"d", synth_cfg.d},
                              {"witness_rate", synth_cfg.witness_rate},
                              {"signal_shift", synth_cfg.signal_shift},
                              {"signal_dims", synth_cfg.signal_dims},
                              {"positive_fraction", synth_cfg.positive_fraction},
                              {"centers", synth_cfg.n_centers},
                              {"center_shift", synth_cfg.center_shift},
                              {"coords", synth_coords},
                              {"seed", synth_cfg.seed}});
            std::cout << "manifest=" << (out / "manifest.csv").string() << "\n";
            return kExitOk;
        }

        if (train->parsed()) {
            const auto spec = train_model.spec();
            auto ds = load(manifest);
            ModelPtr model;
            check(mil_train(ds.p, &spec, &train_flags.cfg, &model.p), "training");
            check(mil_model_save(model.p, (out / "model.milc").string().c_str()), "saving checkpoint");
            check(mil_model_write_loss_trace(model.p, (out / "loss_trace.csv").string().c_str()), "writing loss trace");
            ordered_json cfg = {{"manifest", manifest}};
            cfg["model"] = train_model.json();
            cfg["train"] = train_flags.json();
            write_run_record(out, "train", cfg);
            std::cout << "checkpoint=" << (out / "model.milc").string() << "\n";
            return kExitOk;
        }

        if (predict->parsed()) {
            auto ds = load(manifest);
            std::vector<ModelPtr> models;
            std::vector<const mil_model*> raw;
            for (const auto& path : checkpoints) {
                ModelPtr m;
                check(mil_model_load(path.c_str(), &m.p), "loading checkpoint '" + path + "'");
                raw.push_back(m.p);
                models.push_back(std::move(m));
            }
            check(mil_predict(raw.data(), raw.size(), ds.p, (out / "slide_predictions.csv").string().c_str(),
                              (out / "patient_predictions.csv").string().c_str()),
                  "predicting");
            write_run_record(out, "predict", {{"manifest", manifest}, {"checkpoints", checkpoints}});
            std::cout << "patient_predictions=" << (out / "patient_predictions.csv").string() << "\n";
            return kExitOk;
        }

        if (evaluate->parsed()) {
            mil_eval_result r;
            check(mil_evaluate_csv(predictions_csv.c_str(), (out / "eval_report.txt").string().c_str(), &r),
                  "evaluating");
            std::cout << "auc=" << r.auc << "\nci95=" << r.ci95_lo << ".." << r.ci95_hi << "\nn_pos=" << r.n_pos
                      << "\nn_neg=" << r.n_neg << "\n";
            write_run_record(out, "evaluate", {{"predictions", predictions_csv}});
            return kExitOk;
        }

        if (cv->parsed()) {
            if (split == "random") {
                cv_cfg.split = MIL_SPLIT_RANDOM;
            } else if (split == "center") {
                cv_cfg.split = MIL_SPLIT_CENTER;
            } else {
                usage_error("--split must be random or center");
            }
            cv_cfg.workers = workers;
            cv_cfg.seed = cv_train.cfg.seed;
            const auto spec = cv_model.spec();
            const auto gspec = cv_grid.spec();
            auto ds = load(manifest);
            mil_cv_result r;
            check(mil_cross_validate(ds.p, &spec, &cv_train.cfg, &cv_cfg, cv_grid.enabled ? &gspec : nullptr,
                                     out.string().c_str(), &r),
                  "cross-validation");
            ordered_json cfg = {{"manifest", manifest}, {"split", split}, {"k", cv_cfg.k}, {"repeats", cv_cfg.repeats},
                                {"workers", workers}};
            cfg["model"] = cv_model.json();
            cfg["train"] = cv_train.json();
            cfg["grid"] = cv_grid.enabled ? cv_grid.json() : ordered_json(nullptr);
            write_run_record(out, "cv", cfg);
            if (r.folds_used < r.folds_total) {
                std::cerr << "milkit: warning: " << (r.folds_total - r.folds_used)
                          << " degenerate fold(s) excluded from mean/SD, see summary.txt\n";
            }
            std::cout << "mean_auc=" << r.mean_auc << "\nsd_auc=" << r.sd_auc << "\nfolds_used=" << r.folds_used
                      << "/" << r.folds_total << "\n";
            return kExitOk;
        }

        if (grid->parsed()) {
            const auto spec = grid_model.spec();
            const auto gspec = grid_flags.spec();
            auto ds = load(manifest);
            mil_model_spec best;
            uint32_t best_epochs = 0;
            check(mil_grid_search(ds.p, &spec, &gspec, &grid_train.cfg, (out / "grid.csv").string().c_str(), &best,
                                  &best_epochs),
                  "grid search");
            ordered_json best_json = {{"model", kind_name(best.kind)}, {"r", best.r},  {"n_hidden", best.n_hidden},
                                      {"l2_c", best.l2_c},             {"epochs", best_epochs}};
            write_text_atomic(out / "best.json", best_json.dump(2) + "\n");
            ordered_json cfg = {{"manifest", manifest}};
            cfg["model"] = grid_model.json();
            cfg["train"] = grid_train.json();
            cfg["grid"] = grid_flags.json();
            write_run_record(out, "grid", cfg);
            std::cout << best_json.dump() << "\n";
            return kExitOk;
        }

        if (compare->parsed()) {
            mil_compare_result r;
            const fs::path report = out / "compare_report.txt";
            check(mil_compare_csv(csv_a.c_str(), csv_b.c_str(), report.string().c_str(), &r), "comparing");
            std::ifstream in(report);
            std::cout << in.rdbuf();
            write_run_record(out, "compare", {{"a", csv_a}, {"b", csv_b}});
            return kExitOk;
        }

        if (explain->parsed()) {
            auto ds = load(manifest);
            ModelPtr model;
            check(mil_model_load(checkpoint.c_str(), &model.p), "loading checkpoint '" + checkpoint + "'");
            const fs::path tiles = out / ("tiles_" + slide_id + ".csv");
            const fs::path extremes = out / ("extremes_" + slide_id + ".csv");
            check(mil_explain(model.p, ds.p, slide_id.c_str(), tiles.string().c_str(), extremes.string().c_str()),
                  "explaining slide '" + slide_id + "'");
            write_run_record(out, "explain", {{"manifest", manifest}, {"checkpoint", checkpoint}, {"slide", slide_id}});
            std::cout << "tiles=" << tiles.string() << "\n";
            return kExitOk;
        }
    } catch (const CommandFailed& f) {
        return f.code;
    } catch (const std::exception& e) {
        std::cerr << "milkit: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}

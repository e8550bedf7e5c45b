// extern "C" wrapper over the C++ core.

#include "milkit/milkit.h"

#include "milkit/cv.hpp"
#include "milkit/errors.hpp"
#include "milkit/fileio.hpp"
#include "milkit/predict.hpp"
#include "milkit/synth.hpp"
#include "milkit/trainer.hpp"

#include <algorithm>
#include <filesystem>
#include <new>
#include <string>

struct mil_dataset {
    milkit::Dataset dataset;
};

struct mil_model {
    milkit::Model model;
    std::vector<double> loss_trace;
};

namespace {

thread_local std::string g_last_error;

mil_status fail(mil_status status, std::string message) {
    g_last_error = std::move(message);
    return status;
}

mil_status translate_exception() {
    try {
        throw;
    } catch (const milkit::DimensionError& e) {
        return fail(MIL_ERR_DIMENSION, e.what());
    } catch (const milkit::ValidationError& e) {
        return fail(MIL_ERR_VALIDATION, e.what());
    } catch (const milkit::CorruptionError& e) {
        return fail(MIL_ERR_CORRUPT, e.what());
    } catch (const milkit::FormatError& e) {
        return fail(MIL_ERR_FORMAT, e.what());
    } catch (const milkit::IoError& e) {
        return fail(MIL_ERR_IO, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(MIL_ERR_IO, e.what());
    } catch (const milkit::NumericError& e) {
        return fail(MIL_ERR_NUMERIC, e.what());
    } catch (const std::bad_alloc&) {
        return fail(MIL_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(MIL_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(MIL_ERR_INTERNAL, "unknown error");
    }
}

template <typename Fn>
mil_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return MIL_OK;
    } catch (...) {
        return translate_exception();
    }
}

template <typename... Ptrs>
bool any_null(const Ptrs*... ptrs) {
    return ((ptrs == nullptr) || ...);
}

mil_status null_argument() { return fail(MIL_ERR_INVALID_ARGUMENT, "null pointer argument"); }

milkit::ModelKind to_kind(mil_model_kind kind) {
    switch (kind) {
        case MIL_MEANPOOL: return milkit::ModelKind::MeanPool;
        case MIL_CHOWDER: return milkit::ModelKind::Chowder;
        case MIL_DEEPMIL: return milkit::ModelKind::DeepMil;
    }
    throw milkit::ValidationError("unknown model kind " + std::to_string(static_cast<int>(kind)));
}

mil_model_kind from_kind(milkit::ModelKind kind) {
    switch (kind) {
        case milkit::ModelKind::MeanPool: return MIL_MEANPOOL;
        case milkit::ModelKind::Chowder: return MIL_CHOWDER;
        case milkit::ModelKind::DeepMil: return MIL_DEEPMIL;
    }
    return MIL_MEANPOOL;
}

milkit::ModelSpec to_spec(const mil_model_spec& s) {
    milkit::ModelSpec spec;
    spec.kind = to_kind(s.kind);
    spec.r = static_cast<int>(s.r);
    spec.n_hidden = static_cast<int>(s.n_hidden);
    spec.l2_c = s.l2_c;
    milkit::validate_spec(spec);
    return spec;
}

mil_model_spec from_spec(const milkit::ModelSpec& spec) {
    return mil_model_spec{from_kind(spec.kind), static_cast<uint32_t>(spec.r), static_cast<uint32_t>(spec.n_hidden),
                          spec.l2_c};
}

milkit::TrainConfig to_train_config(const mil_train_config& c) {
    milkit::TrainConfig cfg;
    cfg.learning_rate = c.learning_rate;
    cfg.epochs = static_cast<int>(c.epochs);
    cfg.batch_bags = static_cast<int>(c.batch_bags);
    cfg.subsample_tiles = c.subsample_tiles == 0 ? std::nullopt : std::optional<milkit::Index>(c.subsample_tiles);
    cfg.adam_beta1 = c.adam_beta1;
    cfg.adam_beta2 = c.adam_beta2;
    cfg.adam_eps = c.adam_eps;
    cfg.seed = c.seed;
    milkit::validate_config(cfg);
    return cfg;
}

template <typename T, typename U>
std::vector<T> to_vector(const U* data, size_t n) {
    if (n > 0 && data == nullptr) throw milkit::ValidationError("grid: null value list with non-zero length");
    std::vector<T> out;
    for (size_t i = 0; i < n; ++i) out.push_back(static_cast<T>(data[i]));
    return out;
}

milkit::GridSpec to_grid(const mil_grid_spec& g) {
    milkit::GridSpec grid;
    grid.r_values = to_vector<int>(g.r_values, g.n_r_values);
    grid.n_hidden_values = to_vector<int>(g.n_hidden_values, g.n_n_hidden_values);
    grid.l2_c_values = to_vector<double>(g.l2_c_values, g.n_l2_c_values);
    grid.epoch_values = to_vector<int>(g.epoch_values, g.n_epoch_values);
    grid.holdout_fraction = g.holdout_fraction;
    return grid;
}

std::string loss_trace_csv(const std::vector<double>& trace) {
    std::string out = "epoch,mean_train_loss\n";
    for (size_t i = 0; i < trace.size(); ++i) out += std::to_string(i + 1) + ',' + milkit::format_double(trace[i]) + '\n';
    return out;
}

}  // namespace

extern "C" {

const char* mil_version(void) { return "1.0.0"; }

const char* mil_last_error(void) { return g_last_error.c_str(); }

const char* mil_status_name(mil_status status) {
    switch (status) {
        case MIL_OK: return "ok";
        case MIL_ERR_INVALID_ARGUMENT: return "invalid argument";
        case MIL_ERR_VALIDATION: return "validation error";
        case MIL_ERR_DIMENSION: return "dimension mismatch";
        case MIL_ERR_IO: return "i/o error";
        case MIL_ERR_FORMAT: return "format error";
        case MIL_ERR_CORRUPT: return "corrupt file";
        case MIL_ERR_NUMERIC: return "numeric failure";
        case MIL_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

mil_status mil_dataset_load(const char* manifest_path, mil_dataset** out) {
    if (any_null(manifest_path, out)) return null_argument();
    *out = nullptr;
    return guarded([&] { *out = new mil_dataset{milkit::load_dataset(manifest_path)}; });
}

void mil_dataset_free(mil_dataset* dataset) { delete dataset; }

mil_status mil_dataset_get_info(const mil_dataset* dataset, mil_dataset_info* out) {
    if (any_null(dataset, out)) return null_argument();
    return guarded([&] {
        const auto& ds = dataset->dataset;
        mil_dataset_info info{};
        info.n_slides = ds.size();
        info.n_patients = ds.patients().size();
        info.n_centers = ds.centers().size();
        for (const auto& p : ds.patients()) {
            const auto label = ds.patient_label(p);
            if (!label) {
                ++info.n_unlabeled_patients;
            } else if (*label == 1) {
                ++info.n_positive_patients;
            } else {
                ++info.n_negative_patients;
            }
        }
        info.feature_dim = static_cast<size_t>(ds.feature_dim());
        info.has_coords = ds.size() > 0;
        info.min_tiles = ds.size() > 0 ? SIZE_MAX : 0;
        for (const auto& bag : ds.bags()) {
            info.min_tiles = std::min(info.min_tiles, static_cast<size_t>(bag.num_tiles()));
            info.max_tiles = std::max(info.max_tiles, static_cast<size_t>(bag.num_tiles()));
            if (!bag.coords) info.has_coords = 0;
        }
        *out = info;
    });
}

void mil_synth_config_default(mil_synth_config* config) {
    if (!config) return;
    const milkit::SynthConfig c;
    *config = mil_synth_config{static_cast<uint32_t>(c.n_patients),
                               static_cast<uint32_t>(c.slides_per_patient.min),
                               static_cast<uint32_t>(c.slides_per_patient.max),
                               static_cast<uint32_t>(c.tiles_per_slide.min),
                               static_cast<uint32_t>(c.tiles_per_slide.max),
                               static_cast<uint32_t>(c.d),
                               c.witness_rate,
                               c.signal_shift,
                               static_cast<uint32_t>(c.signal_dims),
                               c.positive_fraction,
                               static_cast<uint32_t>(c.n_centers),
                               c.center_shift,
                               c.with_coords ? 1 : 0,
                               c.seed};
}

mil_status mil_synth_write(const mil_synth_config* config, const char* out_dir) {
    if (any_null(config, out_dir)) return null_argument();
    return guarded([&] {
        milkit::SynthConfig c;
        c.n_patients = static_cast<int>(config->n_patients);
        c.slides_per_patient = {static_cast<int>(config->slides_min), static_cast<int>(config->slides_max)};
        c.tiles_per_slide = {static_cast<int>(config->tiles_min), static_cast<int>(config->tiles_max)};
        c.d = static_cast<int>(config->d);
        c.witness_rate = config->witness_rate;
        c.signal_shift = config->signal_shift;
        c.signal_dims = static_cast<int>(config->signal_dims);
        c.positive_fraction = config->positive_fraction;
        c.n_centers = static_cast<int>(config->n_centers);
        c.center_shift = config->center_shift;
        c.with_coords = config->with_coords != 0;
        c.seed = config->seed;
        milkit::write_synth(milkit::generate(c), out_dir);
    });
}

void mil_model_spec_default(mil_model_spec* spec, mil_model_kind kind) {
    if (!spec) return;
    milkit::ModelSpec s;
    *spec = from_spec(s);
    spec->kind = kind;
}

void mil_train_config_default(mil_train_config* config) {
    if (!config) return;
    const milkit::TrainConfig c;
    *config = mil_train_config{c.learning_rate,
                               static_cast<uint32_t>(c.epochs),
                               static_cast<uint32_t>(c.batch_bags),
                               static_cast<uint32_t>(c.subsample_tiles.value_or(0)),
                               c.adam_beta1,
                               c.adam_beta2,
                               c.adam_eps,
                               c.seed};
}

mil_status mil_parse_model_kind(const char* text, mil_model_kind* out) {
    if (any_null(text, out)) return null_argument();
    return guarded([&] { *out = from_kind(milkit::parse_model_kind(text)); });
}

mil_status mil_train(const mil_dataset* dataset, const mil_model_spec* spec, const mil_train_config* config,
                     mil_model** out) {
    if (any_null(dataset, spec, config, out)) return null_argument();
    *out = nullptr;
    return guarded([&] {
        auto result = milkit::train(to_spec(*spec), dataset->dataset, to_train_config(*config));
        *out = new mil_model{std::move(result.model), std::move(result.loss_trace)};
    });
}

void mil_model_free(mil_model* model) { delete model; }

mil_status mil_model_save(const mil_model* model, const char* path) {
    if (any_null(model, path)) return null_argument();
    return guarded([&] { milkit::save_checkpoint(model->model, path); });
}

mil_status mil_model_load(const char* path, mil_model** out) {
    if (any_null(path, out)) return null_argument();
    *out = nullptr;
    return guarded([&] { *out = new mil_model{milkit::load_checkpoint(path), {}}; });
}

mil_status mil_model_get_spec(const mil_model* model, mil_model_spec* spec, size_t* input_dim) {
    if (any_null(model)) return null_argument();
    if (spec) *spec = from_spec(model->model.spec);
    if (input_dim) *input_dim = static_cast<size_t>(model->model.input_dim);
    return MIL_OK;
}

size_t mil_model_loss_trace(const mil_model* model, double* buffer, size_t capacity) {
    if (!model) return 0;
    const auto& trace = model->loss_trace;
    if (buffer) std::copy_n(trace.begin(), std::min(capacity, trace.size()), buffer);
    return trace.size();
}

mil_status mil_model_write_loss_trace(const mil_model* model, const char* path) {
    if (any_null(model, path)) return null_argument();
    return guarded([&] { milkit::write_file_atomic(path, loss_trace_csv(model->loss_trace)); });
}

mil_status mil_predict(const mil_model* const* models, size_t n_models, const mil_dataset* dataset,
                       const char* slide_csv, const char* patient_csv) {
    if (any_null(models, dataset)) return null_argument();
    if (n_models == 0) return fail(MIL_ERR_INVALID_ARGUMENT, "predict: no models given");
    for (size_t i = 0; i < n_models; ++i) {
        if (!models[i]) return null_argument();
    }
    return guarded([&] {
        std::vector<milkit::Model> ensemble;
        for (size_t i = 0; i < n_models; ++i) {
            const auto& m = models[i]->model;
            if (m.input_dim != dataset->dataset.feature_dim()) {
                throw milkit::DimensionError("checkpoint " + std::to_string(i) + " expects D=" +
                                             std::to_string(m.input_dim) + " but the dataset has D=" +
                                             std::to_string(dataset->dataset.feature_dim()));
            }
            ensemble.push_back(m);
        }
        const auto pred = milkit::predict_ensemble(ensemble, dataset->dataset);
        if (slide_csv) milkit::write_file_atomic(slide_csv, milkit::format_slide_csv(pred.slides, dataset->dataset));
        if (patient_csv) milkit::write_file_atomic(patient_csv, milkit::format_patient_csv(pred.patients));
    });
}

mil_status mil_explain(const mil_model* model, const mil_dataset* dataset, const char* slide_id,
                       const char* tiles_csv, const char* extremes_csv) {
    if (any_null(model, dataset, slide_id, tiles_csv)) return null_argument();
    return guarded([&] {
        const auto e = milkit::explain_slide(model->model, dataset->dataset, slide_id);
        milkit::write_file_atomic(tiles_csv, milkit::format_tile_csv(e));
        if (extremes_csv && e.kind == milkit::ModelKind::Chowder) {
            milkit::write_file_atomic(extremes_csv, milkit::format_extremes_csv(e));
        }
    });
}

mil_status mil_evaluate_csv(const char* patient_csv, const char* report_path, mil_eval_result* out) {
    if (any_null(patient_csv, out)) return null_argument();
    return guarded([&] {
        const auto report = milkit::evaluate(milkit::read_patient_csv(patient_csv));
        const auto& iv = report.interval;
        *out = mil_eval_result{iv.auc, iv.variance, iv.ci_lo, iv.ci_hi, iv.n_pos, iv.n_neg};
        if (report_path) milkit::write_file_atomic(report_path, milkit::format_report(report));
    });
}

mil_status mil_compare_csv(const char* patient_csv_a, const char* patient_csv_b, const char* report_path,
                           mil_compare_result* out) {
    if (any_null(patient_csv_a, patient_csv_b, out)) return null_argument();
    return guarded([&] {
        const auto t = milkit::delong_paired_test(milkit::read_patient_csv(patient_csv_a),
                                                  milkit::read_patient_csv(patient_csv_b));
        *out = mil_compare_result{t.auc_a, t.auc_b, t.var_a,      t.var_b, t.covariance,
                                  t.z,     t.p_value, t.degenerate ? 1 : 0, t.n_pos, t.n_neg};
        if (report_path) milkit::write_file_atomic(report_path, milkit::format_paired_test(t));
    });
}

mil_status mil_grid_search(const mil_dataset* dataset, const mil_model_spec* base, const mil_grid_spec* grid,
                           const mil_train_config* config, const char* grid_log_csv, mil_model_spec* best_spec,
                           uint32_t* best_epochs) {
    if (any_null(dataset, base, grid, config)) return null_argument();
    return guarded([&] {
        const auto& ds = dataset->dataset;
        const auto patients = milkit::labeled_patients(ds);
        const auto result = milkit::grid_search(to_spec(*base), ds, {patients.begin(), patients.end()},
                                                to_grid(*grid), to_train_config(*config));
        if (grid_log_csv) milkit::write_file_atomic(grid_log_csv, milkit::format_grid_log(result.log));
        if (best_spec) *best_spec = from_spec(result.best.spec);
        if (best_epochs) *best_epochs = static_cast<uint32_t>(result.best.epochs);
    });
}

mil_status mil_cross_validate(const mil_dataset* dataset, const mil_model_spec* spec, const mil_train_config* config,
                              const mil_cv_config* cv, const mil_grid_spec* grid, const char* out_dir,
                              mil_cv_result* out) {
    if (any_null(dataset, spec, config, cv, out_dir)) return null_argument();
    return guarded([&] {
        namespace fs = std::filesystem;
        const auto& ds = dataset->dataset;
        const int k = static_cast<int>(cv->k);
        const int repeats = static_cast<int>(cv->repeats);
        std::vector<milkit::SplitPlan> plans;
        switch (cv->split) {
            case MIL_SPLIT_RANDOM: plans = milkit::make_stratified_folds(ds, k, repeats, cv->seed); break;
            case MIL_SPLIT_CENTER: plans = milkit::make_center_folds(ds, k, repeats, cv->seed); break;
            default: throw milkit::ValidationError("unknown split mode");
        }
        milkit::CvOptions options;
        options.train = to_train_config(*config);
        options.workers = static_cast<int>(std::max<uint32_t>(cv->workers, 1));
        if (grid) options.grid = to_grid(*grid);
        const auto summary = milkit::cross_validate(to_spec(*spec), ds, plans, options);

        const fs::path dir(out_dir);
        fs::create_directories(dir);
        milkit::write_file_atomic(dir / "plans.json", milkit::plans_to_json(plans));
        milkit::write_file_atomic(dir / "folds.csv", milkit::format_folds_csv(summary));
        milkit::write_file_atomic(dir / "summary.txt", milkit::format_cv_summary(summary));
        for (const auto& f : summary.folds) {
            if (f.degenerate) continue;
            const std::string tag = "r" + std::to_string(f.repeat) + "_f" + std::to_string(f.fold);
            milkit::save_checkpoint(*f.model, dir / ("fold_" + tag + ".milc"));
            milkit::write_file_atomic(dir / ("test_predictions_" + tag + ".csv"),
                                      milkit::format_patient_csv(f.test_predictions));
            if (!f.grid_log.empty()) {
                milkit::write_file_atomic(dir / ("grid_" + tag + ".csv"), milkit::format_grid_log(f.grid_log));
            }
        }
        *out = mil_cv_result{summary.mean, summary.sd, summary.folds_used, summary.folds.size()};
    });
}

}  // extern "C"

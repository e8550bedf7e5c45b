/*
 * milkit C API.
 *
 * Opaque handles own C++ objects; every call returns a mil_status and, on
 * failure, leaves a human-readable message retrievable with mil_last_error()
 * on the calling thread. Output files are written atomically.
 */
#ifndef MILKIT_MILKIT_H
#define MILKIT_MILKIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(MILKIT_BUILDING_LIBRARY)
#    define MILKIT_API __declspec(dllexport)
#  else
#    define MILKIT_API __declspec(dllimport)
#  endif
#else
#  define MILKIT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define MIL_BAG_FORMAT_VERSION 1
#define MIL_CHECKPOINT_FORMAT_VERSION 1

typedef enum mil_status {
    MIL_OK = 0,
    MIL_ERR_INVALID_ARGUMENT = 1, /* null pointer, bad enum value */
    MIL_ERR_VALIDATION = 2,       /* data or config violates an invariant */
    MIL_ERR_DIMENSION = 3,        /* feature dimension / shape mismatch */
    MIL_ERR_IO = 4,               /* file missing or unwritable */
    MIL_ERR_FORMAT = 5,           /* bad magic, version or layout */
    MIL_ERR_CORRUPT = 6,          /* truncated payload */
    MIL_ERR_NUMERIC = 7,          /* NaN/Inf during training */
    MIL_ERR_INTERNAL = 8
} mil_status;

typedef enum mil_model_kind { MIL_MEANPOOL = 0, MIL_CHOWDER = 1, MIL_DEEPMIL = 2 } mil_model_kind;
typedef enum mil_split_mode { MIL_SPLIT_RANDOM = 0, MIL_SPLIT_CENTER = 1 } mil_split_mode;

typedef struct mil_dataset mil_dataset;
typedef struct mil_model mil_model;

MILKIT_API const char* mil_version(void);
/* Message of the last failed call on this thread ("" if none). */
MILKIT_API const char* mil_last_error(void);
MILKIT_API const char* mil_status_name(mil_status status);

/* ---- datasets ---------------------------------------------------------- */

typedef struct mil_dataset_info {
    size_t n_slides;
    size_t n_patients;
    size_t n_centers;
    size_t n_positive_patients;
    size_t n_negative_patients;
    size_t n_unlabeled_patients;
    size_t min_tiles;
    size_t max_tiles;
    size_t feature_dim;
    int has_coords; /* every bag carries coordinates */
} mil_dataset_info;

MILKIT_API mil_status mil_dataset_load(const char* manifest_path, mil_dataset** out);
MILKIT_API void mil_dataset_free(mil_dataset* dataset);
MILKIT_API mil_status mil_dataset_get_info(const mil_dataset* dataset, mil_dataset_info* out);

/* ---- synthetic cohorts ------------------------------------------------- */

typedef struct mil_synth_config {
    uint32_t n_patients;
    uint32_t slides_min, slides_max;
    uint32_t tiles_min, tiles_max;
    uint32_t d;
    double witness_rate;
    double signal_shift;
    uint32_t signal_dims;
    double positive_fraction;
    uint32_t n_centers;
    double center_shift;
    int with_coords;
    uint64_t seed;
} mil_synth_config;

MILKIT_API void mil_synth_config_default(mil_synth_config* config);
/* Writes bags/, manifest.csv and witness.csv under out_dir. */
MILKIT_API mil_status mil_synth_write(const mil_synth_config* config, const char* out_dir);

/* ---- models and training ----------------------------------------------- */

typedef struct mil_model_spec {
    mil_model_kind kind;
    uint32_t r;        /* chowder */
    uint32_t n_hidden; /* deepmil */
    double l2_c;       /* meanpool */
} mil_model_spec;

typedef struct mil_train_config {
    double learning_rate;
    uint32_t epochs;
    uint32_t batch_bags;
    uint32_t subsample_tiles; /* 0 keeps every tile */
    double adam_beta1;
    double adam_beta2;
    double adam_eps;
    uint64_t seed;
} mil_train_config;

MILKIT_API void mil_model_spec_default(mil_model_spec* spec, mil_model_kind kind);
MILKIT_API void mil_train_config_default(mil_train_config* config);
MILKIT_API mil_status mil_parse_model_kind(const char* text, mil_model_kind* out);

MILKIT_API mil_status mil_train(const mil_dataset* dataset, const mil_model_spec* spec,
                                const mil_train_config* config, mil_model** out);
MILKIT_API void mil_model_free(mil_model* model);
MILKIT_API mil_status mil_model_save(const mil_model* model, const char* path);
MILKIT_API mil_status mil_model_load(const char* path, mil_model** out);
MILKIT_API mil_status mil_model_get_spec(const mil_model* model, mil_model_spec* spec, size_t* input_dim);
/* Per-epoch mean training loss; empty for loaded checkpoints. Returns the
 * trace length and copies min(length, capacity) values into buffer. */
MILKIT_API size_t mil_model_loss_trace(const mil_model* model, double* buffer, size_t capacity);
/* CSV `epoch,mean_train_loss`. */
MILKIT_API mil_status mil_model_write_loss_trace(const mil_model* model, const char* path);

/* ---- prediction and interpretation ------------------------------------- */

/* Slide CSV `slide_id,patient_id,probability`, patient CSV
 * `patient_id,label,probability`. Several models are combined by the
 * per-patient (and per-slide) median. */
MILKIT_API mil_status mil_predict(const mil_model* const* models, size_t n_models, const mil_dataset* dataset,
                                  const char* slide_csv, const char* patient_csv);

/* Tile CSV `tile_index,x,y,score`. For Chowder, extremes_csv (optional)
 * receives `rank,side,tile_index,score` for the top-r and bottom-r tiles. */
MILKIT_API mil_status mil_explain(const mil_model* model, const mil_dataset* dataset, const char* slide_id,
                                  const char* tiles_csv, const char* extremes_csv);

/* ---- evaluation -------------------------------------------------------- */

typedef struct mil_eval_result {
    double auc;
    double variance;
    double ci95_lo;
    double ci95_hi;
    size_t n_pos;
    size_t n_neg;
} mil_eval_result;

typedef struct mil_compare_result {
    double auc_a, auc_b;
    double var_a, var_b, covariance;
    double z;
    double p_value;
    int degenerate;
    size_t n_pos, n_neg;
} mil_compare_result;

/* DeLong AUC and 95% CI of a patient CSV; report_path (optional) receives key=value text. */
MILKIT_API mil_status mil_evaluate_csv(const char* patient_csv, const char* report_path, mil_eval_result* out);
/* Paired DeLong test of two patient CSVs; report_path optional. */
MILKIT_API mil_status mil_compare_csv(const char* patient_csv_a, const char* patient_csv_b, const char* report_path,
                                      mil_compare_result* out);

/* ---- grid search and cross-validation ---------------------------------- */

typedef struct mil_grid_spec {
    const uint32_t* r_values;
    size_t n_r_values;
    const uint32_t* n_hidden_values;
    size_t n_n_hidden_values;
    const double* l2_c_values;
    size_t n_l2_c_values;
    const uint32_t* epoch_values;
    size_t n_epoch_values;
    double holdout_fraction;
} mil_grid_spec;

/* Grid search over all labelled patients. Writes `point,val_auc` to
 * grid_log_csv (optional); best hyperparameters go to best_spec/best_epochs. */
MILKIT_API mil_status mil_grid_search(const mil_dataset* dataset, const mil_model_spec* base,
                                      const mil_grid_spec* grid, const mil_train_config* config,
                                      const char* grid_log_csv, mil_model_spec* best_spec, uint32_t* best_epochs);

typedef struct mil_cv_config {
    mil_split_mode split;
    uint32_t k;
    uint32_t repeats;
    uint32_t workers;
    uint64_t seed;
} mil_cv_config;

typedef struct mil_cv_result {
    double mean_auc;
    double sd_auc;
    size_t folds_used;
    size_t folds_total;
} mil_cv_result;

/* Writes folds.csv, summary.txt, plans.json, one checkpoint per fold
 * (fold_r<repeat>_f<fold>.milc), per-fold test predictions and, when grid
 * is given, per-fold grid logs under out_dir. grid may be NULL. */
MILKIT_API mil_status mil_cross_validate(const mil_dataset* dataset, const mil_model_spec* spec,
                                         const mil_train_config* config, const mil_cv_config* cv,
                                         const mil_grid_spec* grid, const char* out_dir, mil_cv_result* out);

#ifdef __cplusplus
}
#endif

#endif /* MILKIT_MILKIT_H */

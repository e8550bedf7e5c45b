#pragma once

#include "milkit/dataset.hpp"
#include "milkit/evaluation.hpp"
#include "milkit/models.hpp"
#include "milkit/trainer.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace milkit {

/// Train/test assignment of labelled patients for one fold of one repeat.
struct SplitPlan {
    int repeat = 0;
    int fold = 0;
    std::set<std::string> train_patients;
    std::set<std::string> test_patients;
    /// A side lacks one of the classes; the fold is reported but not scored.
    bool degenerate = false;
    std::string degenerate_reason;
};

/// Labelled patients in dataset order.
std::vector<std::string> labeled_patients(const Dataset& dataset);

/// Repeated k-fold stratified on the patient label. Each repeat reshuffles
/// with its own derived seed.
std::vector<SplitPlan> make_stratified_folds(const Dataset& dataset, int k, int repeats, std::uint64_t seed);

/// Repeated k-fold keeping every center inside a single fold. Centers are
/// placed largest first onto the fold with the fewest patients so far;
/// equal-sized centers and equally loaded folds are ordered by a seeded draw.
std::vector<SplitPlan> make_center_folds(const Dataset& dataset, int k, int repeats, std::uint64_t seed);

/// Sets `degenerate` on plans whose train or test side misses a class.
void flag_degenerate(std::vector<SplitPlan>& plans, const Dataset& dataset);

std::string plans_to_json(const std::vector<SplitPlan>& plans);

/// Stratified holdout: about `fraction` of each class goes to the second set.
std::pair<std::set<std::string>, std::set<std::string>> stratified_holdout(
    const Dataset& dataset, const std::set<std::string>& patients, double fraction, std::uint64_t seed);

struct GridSpec {
    std::vector<int> r_values{10, 25, 100};
    std::vector<int> n_hidden_values{64, 128, 256};
    std::vector<double> l2_c_values{0.0, 0.5, 1.0};
    std::vector<int> epoch_values{5, 10, 20, 40, 80, 120};
    /// Share of the training patients held out for validation.
    double holdout_fraction = 0.2;
};

struct GridPoint {
    ModelSpec spec;
    int epochs = 0;
    std::string label() const;
};

struct GridEntry {
    GridPoint point;
    /// Empty for a singleton grid, which is returned without training.
    std::optional<double> val_auc;
};

struct GridResult {
    GridPoint best;
    std::vector<GridEntry> log;
};

/// Only the capacity list matching base.kind is enumerated.
std::vector<GridPoint> enumerate_grid(const GridSpec& grid, const ModelSpec& base);

/// Scores every grid point on a stratified holdout of `train_patients` and
/// returns the best by validation AUC. Ties go to fewer epochs, then to the
/// smaller-capacity model (smaller r, smaller n_hidden, larger l2_c).
GridResult grid_search(const ModelSpec& base, const Dataset& dataset, const std::set<std::string>& train_patients,
                       const GridSpec& grid, const TrainConfig& train_config);

std::string format_grid_log(const std::vector<GridEntry>& log);

struct FoldResult {
    int repeat = 0;
    int fold = 0;
    bool degenerate = false;
    std::string degenerate_reason;
    double auc = 0.0;
    GridPoint hyperparameters;
    std::vector<GridEntry> grid_log;
    std::vector<PatientPrediction> test_predictions;
    std::optional<Model> model;
};

struct CvSummary {
    std::vector<FoldResult> folds;
    /// Over non-degenerate folds; SD is the population standard deviation.
    double mean = 0.0;
    double sd = 0.0;
    std::size_t folds_used = 0;
};

struct CvOptions {
    TrainConfig train;
    /// When set, hyperparameters are chosen per fold on its training side.
    std::optional<GridSpec> grid;
    int workers = 1;
    bool keep_models = true;
};

/// Trains one model per plan (seed derived from options.train.seed and the
/// plan index) and scores patient-level AUC on the test side.
CvSummary cross_validate(const ModelSpec& spec, const Dataset& dataset, const std::vector<SplitPlan>& plans,
                         const CvOptions& options);

/// Population mean and SD of a list.
std::pair<double, double> mean_and_sd(const std::vector<double>& values);

/// CSV `repeat,fold,auc` over non-degenerate folds.
std::string format_folds_csv(const CvSummary& summary);
/// `key=value` lines, including one `degenerate=` line per skipped fold.
std::string format_cv_summary(const CvSummary& summary);

}  // namespace milkit

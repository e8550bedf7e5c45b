#include "milkit/cv.hpp"

#include "milkit/errors.hpp"
#include "milkit/fileio.hpp"
#include "milkit/predict.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

namespace milkit {

namespace {

// Higher value = more capacity.
double capacity(const ModelSpec& spec) {
    switch (spec.kind) {
        case ModelKind::Chowder: return spec.r;
        case ModelKind::DeepMil: return spec.n_hidden;
        case ModelKind::MeanPool: return -spec.l2_c;
    }
    return 0.0;
}

bool better(const GridEntry& a, const GridEntry& b) {
    if (*a.val_auc != *b.val_auc) return *a.val_auc > *b.val_auc;
    if (a.point.epochs != b.point.epochs) return a.point.epochs < b.point.epochs;
    return capacity(a.point.spec) < capacity(b.point.spec);
}

std::vector<PatientPrediction> predict_patients(const Model& model, const Dataset& dataset,
                                                const std::set<std::string>& patients) {
    return aggregate_patients(predict_slides(model, dataset.select(patients)), dataset);
}

}  // namespace

std::string GridPoint::label() const {
    std::string out;
    switch (spec.kind) {
        case ModelKind::Chowder: out = "r=" + std::to_string(spec.r); break;
        case ModelKind::DeepMil: out = "n_hidden=" + std::to_string(spec.n_hidden); break;
        case ModelKind::MeanPool: out = "l2_c=" + format_double(spec.l2_c); break;
    }
    return out + ";epochs=" + std::to_string(epochs);
}

std::vector<GridPoint> enumerate_grid(const GridSpec& grid, const ModelSpec& base) {
    if (grid.epoch_values.empty()) throw ValidationError("grid: epoch list is empty");
    for (int e : grid.epoch_values) {
        if (e < 1) throw ValidationError("grid: epochs must be >= 1");
    }
    std::vector<ModelSpec> specs;
    switch (base.kind) {
        case ModelKind::Chowder:
            for (int r : grid.r_values) {
                specs.push_back(base);
                specs.back().r = r;
            }
            break;
        case ModelKind::DeepMil:
            for (int h : grid.n_hidden_values) {
                specs.push_back(base);
                specs.back().n_hidden = h;
            }
            break;
        case ModelKind::MeanPool:
            for (double c : grid.l2_c_values) {
                specs.push_back(base);
                specs.back().l2_c = c;
            }
            break;
    }
    if (specs.empty()) throw ValidationError("grid: hyperparameter list for " + std::string(to_string(base.kind)) + " is empty");
    std::vector<GridPoint> points;
    for (const auto& spec : specs) {
        validate_spec(spec);
        for (int e : grid.epoch_values) points.push_back({spec, e});
    }
    return points;
}

GridResult grid_search(const ModelSpec& base, const Dataset& dataset, const std::set<std::string>& train_patients,
                       const GridSpec& grid, const TrainConfig& train_config) {
    const auto points = enumerate_grid(grid, base);
    if (points.size() == 1) return GridResult{points.front(), {{points.front(), std::nullopt}}};

    const auto [inner_train, inner_val] =
        stratified_holdout(dataset, train_patients, grid.holdout_fraction, train_config.seed);
    const auto train_bags = dataset.select(inner_train);

    // Epoch counts share one trajectory: train once to the largest count and
    // score the snapshots, which equals retraining for each count.
    GridResult result;
    std::map<std::pair<std::size_t, int>, double> scored;
    std::vector<ModelSpec> specs;
    for (const auto& p : points) {
        bool seen = false;
        for (const auto& s : specs) {
            if (s.r == p.spec.r && s.n_hidden == p.spec.n_hidden && s.l2_c == p.spec.l2_c) seen = true;
        }
        if (!seen) specs.push_back(p.spec);
    }
    const int max_epochs = *std::max_element(grid.epoch_values.begin(), grid.epoch_values.end());
    for (std::size_t s = 0; s < specs.size(); ++s) {
        TrainConfig cfg = train_config;
        cfg.epochs = max_epochs;
        train(specs[s], train_bags, cfg, [&](int epoch, const Model& model) {
            if (std::find(grid.epoch_values.begin(), grid.epoch_values.end(), epoch) == grid.epoch_values.end()) return;
            scored[{s, epoch}] = auc(predict_patients(model, dataset, inner_val));
        });
    }
    for (const auto& p : points) {
        std::size_t s = 0;
        while (!(specs[s].r == p.spec.r && specs[s].n_hidden == p.spec.n_hidden && specs[s].l2_c == p.spec.l2_c)) ++s;
        result.log.push_back({p, scored.at({s, p.epochs})});
    }
    const GridEntry* best = &result.log.front();
    for (const auto& entry : result.log) {
        if (better(entry, *best)) best = &entry;
    }
    result.best = best->point;
    return result;
}

std::string format_grid_log(const std::vector<GridEntry>& log) {
    std::string out = "point,val_auc\n";
    for (const auto& e : log) out += e.point.label() + ',' + (e.val_auc ? format_double(*e.val_auc) : "NA") + '\n';
    return out;
}

std::pair<double, double> mean_and_sd(const std::vector<double>& values) {
    if (values.empty()) throw ValidationError("mean_and_sd: empty list");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

CvSummary cross_validate(const ModelSpec& spec, const Dataset& dataset, const std::vector<SplitPlan>& plans,
                         const CvOptions& options) {
    validate_spec(spec);
    validate_config(options.train);
    if (plans.empty()) throw ValidationError("cross_validate: no plans");
    for (const auto& plan : plans) {
        for (const auto* side : {&plan.train_patients, &plan.test_patients}) {
            for (const auto& p : *side) {
                if (!dataset.has_patient(p)) throw ValidationError("plan references unknown patient '" + p + "'");
            }
        }
    }

    CvSummary summary;
    summary.folds.resize(plans.size());
    auto run_fold = [&](std::size_t i) {
        const SplitPlan& plan = plans[i];
        FoldResult& fold = summary.folds[i];
        fold.repeat = plan.repeat;
        fold.fold = plan.fold;
        fold.degenerate = plan.degenerate;
        fold.degenerate_reason = plan.degenerate_reason;
        fold.hyperparameters = {spec, options.train.epochs};
        if (plan.degenerate) return;

        TrainConfig cfg = options.train;
        cfg.seed = derive_seed(options.train.seed, i);
        if (options.grid) {
            GridResult g = grid_search(spec, dataset, plan.train_patients, *options.grid, cfg);
            fold.hyperparameters = g.best;
            fold.grid_log = std::move(g.log);
        }
        cfg.epochs = fold.hyperparameters.epochs;
        TrainResult trained = train(fold.hyperparameters.spec, dataset.select(plan.train_patients), cfg);
        fold.test_predictions = predict_patients(trained.model, dataset, plan.test_patients);
        fold.auc = auc(fold.test_predictions);
        if (options.keep_models) fold.model = std::move(trained.model);
    };

    const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(options.workers, 1)), 1,
                                                         plans.size());
    if (workers == 1) {
        for (std::size_t i = 0; i < plans.size(); ++i) run_fold(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(plans.size());
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < plans.size(); i = next++) {
                    try {
                        run_fold(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    std::vector<double> aucs;
    for (const auto& f : summary.folds) {
        if (!f.degenerate) aucs.push_back(f.auc);
    }
    if (aucs.empty()) throw ValidationError("cross_validate: every fold is degenerate");
    std::tie(summary.mean, summary.sd) = mean_and_sd(aucs);
    summary.folds_used = aucs.size();
    return summary;
}

std::string format_folds_csv(const CvSummary& summary) {
    std::string out = "repeat,fold,auc\n";
    for (const auto& f : summary.folds) {
        if (f.degenerate) continue;
        out += std::to_string(f.repeat) + ',' + std::to_string(f.fold) + ',' + format_double(f.auc) + '\n';
    }
    return out;
}

std::string format_cv_summary(const CvSummary& summary) {
    std::string out;
    out += "mean_auc=" + format_double(summary.mean) + "\n";
    out += "sd_auc=" + format_double(summary.sd) + "\n";
    out += "folds_used=" + std::to_string(summary.folds_used) + "\n";
    out += "folds_total=" + std::to_string(summary.folds.size()) + "\n";
    for (const auto& f : summary.folds) {
        if (f.degenerate) {
            out += "degenerate=" + std::to_string(f.repeat) + ":" + std::to_string(f.fold) + ":" + f.degenerate_reason + "\n";
        }
    }
    return out;
}

}  // namespace milkit

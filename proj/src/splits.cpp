#include "milkit/cv.hpp"

#include "milkit/errors.hpp"
#include "milkit/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace milkit {

namespace {

// Stream offsets keep the split generators on disjoint random streams.
constexpr std::uint64_t kStratifiedStream = 100;
constexpr std::uint64_t kCenterStream = 10000;
constexpr std::uint64_t kHoldoutStream = 20000;

void check_k(int k, int repeats) {
    if (k < 2) throw ValidationError("k must be >= 2");
    if (repeats < 1) throw ValidationError("repeats must be >= 1");
}

std::vector<SplitPlan> plans_from_assignment(const std::vector<std::string>& patients,
                                             const std::vector<int>& fold_of, int k, int repeat) {
    std::vector<SplitPlan> plans;
    for (int f = 0; f < k; ++f) {
        SplitPlan plan;
        plan.repeat = repeat;
        plan.fold = f;
        for (std::size_t i = 0; i < patients.size(); ++i) {
            (fold_of[i] == f ? plan.test_patients : plan.train_patients).insert(patients[i]);
        }
        plans.push_back(std::move(plan));
    }
    return plans;
}

}  // namespace

std::vector<std::string> labeled_patients(const Dataset& dataset) {
    std::vector<std::string> out;
    for (const auto& p : dataset.patients()) {
        if (dataset.patient_label(p)) out.push_back(p);
    }
    return out;
}

std::vector<SplitPlan> make_stratified_folds(const Dataset& dataset, int k, int repeats, std::uint64_t seed) {
    check_k(k, repeats);
    std::vector<std::string> pos;
    std::vector<std::string> neg;
    for (const auto& p : labeled_patients(dataset)) (*dataset.patient_label(p) == 1 ? pos : neg).push_back(p);
    if (pos.size() < static_cast<std::size_t>(k) || neg.size() < static_cast<std::size_t>(k)) {
        throw ValidationError("stratified " + std::to_string(k) + "-fold needs at least " + std::to_string(k) +
                              " patients per class, have " + std::to_string(pos.size()) + " positive and " +
                              std::to_string(neg.size()) + " negative");
    }

    std::vector<SplitPlan> plans;
    for (int rep = 0; rep < repeats; ++rep) {
        Rng rng = make_rng(seed, kStratifiedStream + static_cast<std::uint64_t>(rep));
        auto p = pos;
        auto n = neg;
        std::shuffle(p.begin(), p.end(), rng);
        std::shuffle(n.begin(), n.end(), rng);
        // Deal positives then negatives round-robin; the negatives continue
        // where the positives stopped so fold sizes stay within one.
        std::vector<std::string> order = p;
        order.insert(order.end(), n.begin(), n.end());
        std::vector<int> fold_of(order.size());
        for (std::size_t i = 0; i < order.size(); ++i) fold_of[i] = static_cast<int>(i % static_cast<std::size_t>(k));
        auto rep_plans = plans_from_assignment(order, fold_of, k, rep);
        plans.insert(plans.end(), rep_plans.begin(), rep_plans.end());
    }
    flag_degenerate(plans, dataset);
    return plans;
}

std::vector<SplitPlan> make_center_folds(const Dataset& dataset, int k, int repeats, std::uint64_t seed) {
    check_k(k, repeats);
    const auto patients = labeled_patients(dataset);
    std::map<std::string, std::size_t> center_size;
    std::vector<std::string> centers;
    for (const auto& p : patients) {
        const auto& c = dataset.patient_center(p);
        if (center_size[c]++ == 0) centers.push_back(c);
    }
    if (centers.size() < static_cast<std::size_t>(k)) {
        throw ValidationError("center folds: " + std::to_string(centers.size()) + " centers for k=" +
                              std::to_string(k) + " folds (need at least k centers)");
    }

    std::vector<SplitPlan> plans;
    for (int rep = 0; rep < repeats; ++rep) {
        Rng rng = make_rng(seed, kCenterStream + static_cast<std::uint64_t>(rep));
        auto order = centers;
        std::shuffle(order.begin(), order.end(), rng);
        std::stable_sort(order.begin(), order.end(),
                         [&](const std::string& a, const std::string& b) { return center_size[a] > center_size[b]; });

        std::vector<std::size_t> load(static_cast<std::size_t>(k), 0);
        std::map<std::string, int> fold_of_center;
        for (const auto& c : order) {
            const std::size_t lightest = *std::min_element(load.begin(), load.end());
            std::vector<int> candidates;
            for (int f = 0; f < k; ++f) {
                if (load[static_cast<std::size_t>(f)] == lightest) candidates.push_back(f);
            }
            std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
            const int fold = candidates[pick(rng)];
            fold_of_center[c] = fold;
            load[static_cast<std::size_t>(fold)] += center_size[c];
        }
        std::vector<int> fold_of(patients.size());
        for (std::size_t i = 0; i < patients.size(); ++i) {
            fold_of[i] = fold_of_center.at(dataset.patient_center(patients[i]));
        }
        auto rep_plans = plans_from_assignment(patients, fold_of, k, rep);
        plans.insert(plans.end(), rep_plans.begin(), rep_plans.end());
    }
    flag_degenerate(plans, dataset);
    return plans;
}

void flag_degenerate(std::vector<SplitPlan>& plans, const Dataset& dataset) {
    auto classes = [&](const std::set<std::string>& ids) {
        std::pair<std::size_t, std::size_t> counts{0, 0};
        for (const auto& id : ids) (*dataset.patient_label(id) == 1 ? counts.first : counts.second)++;
        return counts;
    };
    for (auto& plan : plans) {
        const auto [train_pos, train_neg] = classes(plan.train_patients);
        const auto [test_pos, test_neg] = classes(plan.test_patients);
        plan.degenerate = false;
        plan.degenerate_reason.clear();
        if (train_pos == 0 || train_neg == 0) {
            plan.degenerate = true;
            plan.degenerate_reason = train_pos == 0 ? "train has no positive patient" : "train has no negative patient";
        } else if (test_pos == 0 || test_neg == 0) {
            plan.degenerate = true;
            plan.degenerate_reason = test_pos == 0 ? "test has no positive patient" : "test has no negative patient";
        }
    }
}

std::string plans_to_json(const std::vector<SplitPlan>& plans) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : plans) {
        out.push_back({{"repeat", p.repeat},
                       {"fold", p.fold},
                       {"train_patients", p.train_patients},
                       {"test_patients", p.test_patients},
                       {"degenerate", p.degenerate},
                       {"degenerate_reason", p.degenerate_reason}});
    }
    return out.dump(2) + "\n";
}

std::pair<std::set<std::string>, std::set<std::string>> stratified_holdout(
    const Dataset& dataset, const std::set<std::string>& patients, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("holdout fraction must lie in (0, 1)");
    std::vector<std::string> pos;
    std::vector<std::string> neg;
    for (const auto& p : dataset.patients()) {
        if (!patients.count(p)) continue;
        const auto label = dataset.patient_label(p);
        if (!label) throw ValidationError("holdout: patient '" + p + "' is unlabeled");
        (*label == 1 ? pos : neg).push_back(p);
    }
    if (pos.size() < 2 || neg.size() < 2) {
        throw ValidationError("inner holdout split impossible: need >= 2 patients per class, have " +
                              std::to_string(pos.size()) + " positive and " + std::to_string(neg.size()) +
                              " negative");
    }
    Rng rng = make_rng(seed, kHoldoutStream);
    std::pair<std::set<std::string>, std::set<std::string>> out;
    for (auto* group : {&pos, &neg}) {
        std::shuffle(group->begin(), group->end(), rng);
        auto held = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(group->size())));
        held = std::clamp<std::size_t>(held, 1, group->size() - 1);
        for (std::size_t i = 0; i < group->size(); ++i) {
            (i < held ? out.second : out.first).insert((*group)[i]);
        }
    }
    return out;
}

}  // namespace milkit

#include "milkit/predict.hpp"

#include "milkit/errors.hpp"
#include "milkit/fileio.hpp"

#include <map>

namespace milkit {

SlidePredictions predict_slides(const Model& model, const std::vector<const Bag*>& bags) {
    SlidePredictions out;
    out.reserve(bags.size());
    for (const Bag* bag : bags) out.emplace_back(bag->slide_id, forward(model, *bag).probability);
    return out;
}

EnsemblePrediction predict_ensemble(const std::vector<Model>& models, const Dataset& dataset) {
    if (models.empty()) throw ValidationError("predict: no models");
    const auto bags = dataset.all();
    std::vector<SlidePredictions> per_model;
    std::vector<std::vector<PatientPrediction>> patients;
    for (const auto& model : models) {
        per_model.push_back(predict_slides(model, bags));
        patients.push_back(aggregate_patients(per_model.back(), dataset));
    }
    EnsemblePrediction out;
    out.patients = ensemble_median(patients);
    for (std::size_t i = 0; i < bags.size(); ++i) {
        std::vector<double> values;
        for (const auto& slides : per_model) values.push_back(slides[i].second);
        out.slides.emplace_back(bags[i]->slide_id, median(values));
    }
    return out;
}

std::string format_slide_csv(const SlidePredictions& slides, const Dataset& dataset) {
    std::map<std::string, const Bag*> by_id;
    for (const auto& bag : dataset.bags()) by_id[bag.slide_id] = &bag;
    std::string out = "slide_id,patient_id,probability\n";
    for (const auto& [slide, prob] : slides) {
        auto it = by_id.find(slide);
        if (it == by_id.end()) throw ValidationError("unknown slide_id '" + slide + "'");
        out += slide + ',' + it->second->patient_id + ',' + format_double(prob) + '\n';
    }
    return out;
}

TileExplanation explain_slide(const Model& model, const Dataset& dataset, const std::string& slide_id) {
    const Bag* bag = nullptr;
    for (const auto& b : dataset.bags()) {
        if (b.slide_id == slide_id) bag = &b;
    }
    if (!bag) throw ValidationError("unknown slide_id '" + slide_id + "'");

    const Prediction pred = forward(model, *bag);
    TileExplanation e;
    e.slide_id = slide_id;
    e.kind = model.spec.kind;
    e.logit = pred.logit;
    e.scores = pred.tile_scores;
    e.coords = bag->coords;
    if (model.spec.kind == ModelKind::Chowder) {
        const auto extremes = chowder_extremes(pred.tile_scores, model.spec.r);
        const auto r = static_cast<std::size_t>(model.spec.r);
        e.top.assign(extremes.begin(), extremes.begin() + static_cast<std::ptrdiff_t>(r));
        e.bottom.assign(extremes.begin() + static_cast<std::ptrdiff_t>(r), extremes.end());
    }
    return e;
}

std::string format_tile_csv(const TileExplanation& e) {
    std::string out = "tile_index,x,y,score\n";
    for (Index i = 0; i < e.scores.size(); ++i) {
        out += std::to_string(i) + ',';
        if (e.coords) {
            out += format_float((*e.coords)(i, 0)) + ',' + format_float((*e.coords)(i, 1)) + ',';
        } else {
            out += "NA,NA,";
        }
        out += format_double(e.scores[i]) + '\n';
    }
    return out;
}

std::string format_extremes_csv(const TileExplanation& e) {
    std::string out = "rank,side,tile_index,score\n";
    for (std::size_t k = 0; k < e.top.size(); ++k) {
        out += std::to_string(k + 1) + ",top," + std::to_string(e.top[k]) + ',' + format_double(e.scores[e.top[k]]) + '\n';
    }
    for (std::size_t k = 0; k < e.bottom.size(); ++k) {
        out += std::to_string(k + 1) + ",bottom," + std::to_string(e.bottom[k]) + ',' +
               format_double(e.scores[e.bottom[k]]) + '\n';
    }
    return out;
}

}  // namespace milkit

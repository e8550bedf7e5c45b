#pragma once

#include "milkit/dataset.hpp"
#include "milkit/evaluation.hpp"
#include "milkit/models.hpp"

#include <string>
#include <vector>

namespace milkit {

/// Slide probabilities using every tile of each bag.
SlidePredictions predict_slides(const Model& model, const std::vector<const Bag*>& bags);

struct EnsemblePrediction {
    /// Median over models of each slide's probability.
    SlidePredictions slides;
    /// Per model: slide mean per patient; then median over models.
    std::vector<PatientPrediction> patients;
};

/// One model: slides and patient means. Several: per-model patient means
/// combined by the per-patient median.
EnsemblePrediction predict_ensemble(const std::vector<Model>& models, const Dataset& dataset);

/// CSV `slide_id,patient_id,probability`.
std::string format_slide_csv(const SlidePredictions& slides, const Dataset& dataset);

struct TileExplanation {
    std::string slide_id;
    ModelKind kind = ModelKind::MeanPool;
    double logit = 0.0;
    Eigen::VectorXd scores;
    std::optional<CoordMatrix> coords;
    /// Chowder only: tile indices of the r highest (descending) then r lowest (ascending) scores.
    std::vector<Index> top;
    std::vector<Index> bottom;
};

TileExplanation explain_slide(const Model& model, const Dataset& dataset, const std::string& slide_id);

/// CSV `tile_index,x,y,score`; x and y are NA when the bag has no coords.
std::string format_tile_csv(const TileExplanation& e);
/// CSV `rank,side,tile_index,score` for the Chowder extreme tiles.
std::string format_extremes_csv(const TileExplanation& e);

}  // namespace milkit

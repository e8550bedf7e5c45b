#pragma once

#include "milkit/bag.hpp"
#include "milkit/params.hpp"
#include "milkit/random.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace milkit {

enum class ModelKind { MeanPool = 0, Chowder = 1, DeepMil = 2 };

std::string_view to_string(ModelKind kind);
/// Accepts "meanpool", "chowder", "deepmil".
ModelKind parse_model_kind(std::string_view text);

/// Architecture and hyperparameters of one MIL model.
struct ModelSpec {
    ModelKind kind = ModelKind::MeanPool;
    /// Chowder: number of top and of bottom tile scores fed to the aggregator.
    int r = 10;
    /// DeepMIL: width of the embedding and of the gated attention layer.
    int n_hidden = 128;
    /// MeanPool: coefficient C of the C * ||w||^2 penalty (C = 0 disables it).
    double l2_c = 0.0;
    /// Chowder layer widths.
    int scorer_hidden = 128;
    int aggregator_hidden1 = 128;
    int aggregator_hidden2 = 64;
};

void validate_spec(const ModelSpec& spec);

struct Model {
    ModelSpec spec;
    Index input_dim = 0;
    ParamSet params;
};

/// Builds the parameter layout for `spec`. Weights are drawn uniform in
/// +-sqrt(1/fan_in) from `rng`; biases start at zero.
Model init_model(const ModelSpec& spec, Index input_dim, Rng& rng);

/// Tile features promoted to double and put in canonical (lexicographic)
/// row order. Every pooling reduction runs over this order, which makes
/// logits bitwise invariant to the order tiles were supplied in.
struct PreparedBag {
    Eigen::MatrixXd x;
    /// input_index[k] = position in the original bag of canonical row k.
    std::vector<Index> input_index;
    Index num_tiles() const { return x.rows(); }
};

PreparedBag prepare_bag(const FeatureMatrix& features);
/// Skips canonicalisation: rows stay in the given order.
PreparedBag prepare_bag_unsorted(const Eigen::MatrixXd& x);

struct Prediction {
    double logit = 0.0;
    double probability = 0.5;
    /// Per tile, in the bag's original order: Chowder tile score, DeepMIL
    /// attention weight, MeanPool per-tile contribution w.x_i + b.
    Eigen::VectorXd tile_scores;
};

double logistic(double logit);
/// Binary cross-entropy of logistic(logit) against `label`, evaluated without
/// forming log(0).
double bce_from_logit(double logit, int label);

Prediction forward(const Model& model, const PreparedBag& bag);
Prediction forward(const Model& model, const Bag& bag);

/// Cross-entropy plus the MeanPool penalty C * ||w||^2 (bias excluded).
double loss(const Model& model, const Prediction& prediction, int label);

struct LossAndGradient {
    double loss = 0.0;
    Prediction prediction;
    ParamSet gradient;
};

/// Exact gradient of loss() with respect to every tensor in model.params.
LossAndGradient loss_and_gradient(const Model& model, const PreparedBag& bag, int label);

/// Positions (into `scores`) of the Chowder extreme set: the r highest in
/// descending order followed by the r lowest in ascending order. Ties are
/// broken by ascending position. Requires scores.size() >= 2r.
std::vector<Index> chowder_extremes(const Eigen::VectorXd& scores, int r);

/// Versioned binary container: kind, hyperparameters, named f64 tensors.
inline constexpr char kCheckpointMagic[4] = {'M', 'I', 'L', 'C'};
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

std::string encode_checkpoint(const Model& model);
Model decode_checkpoint(std::string_view bytes, const std::string& what = "checkpoint");
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace milkit

#pragma once

#include "milkit/dataset.hpp"
#include "milkit/models.hpp"
#include "milkit/random.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace milkit {

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 50;
    int batch_bags = 16;
    /// Tiles kept per bag for training; empty keeps every tile.
    std::optional<Index> subsample_tiles = 8000;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
};

void validate_config(const TrainConfig& config);

struct AdamState {
    ParamSet first_moment;
    ParamSet second_moment;
    long step = 0;

    static AdamState for_params(const ParamSet& params);
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, const TrainConfig& config);

/// Uniform sample of k tiles without replacement, original order preserved.
/// Bags with N <= k are returned unchanged.
Bag subsample(const Bag& bag, Index k, Rng& rng);

struct TrainResult {
    Model model;
    /// Mean per-bag training loss of each epoch, evaluated on the fly.
    std::vector<double> loss_trace;
};

/// Called after each completed epoch (1-based) with the current model.
using EpochCallback = std::function<void(int epoch, const Model& model)>;

/// Trains a fresh model on `bags` with minibatch Adam.
///
/// Random streams derived from config.seed drive, in order: parameter
/// initialisation, a single per-run tile subsample of every bag, and the
/// per-epoch shuffle. Batch gradients are averaged in ascending bag order,
/// so a run is fully determined by (spec, bags, config).
TrainResult train(const ModelSpec& spec, const std::vector<const Bag*>& bags, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});
TrainResult train(const ModelSpec& spec, const Dataset& dataset, const TrainConfig& config);

}  // namespace milkit

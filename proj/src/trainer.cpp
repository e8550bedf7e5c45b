#include "milkit/trainer.hpp"

#include "milkit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace milkit {

namespace {

enum Stream : std::uint64_t { kInitStream = 1, kSubsampleStream = 2, kShuffleStream = 3 };

}  // namespace

void validate_config(const TrainConfig& c) {
    if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
        throw ValidationError("learning_rate must be > 0");
    }
    if (c.epochs < 1) throw ValidationError("epochs must be >= 1");
    if (c.batch_bags < 1) throw ValidationError("batch_bags must be >= 1");
    if (c.subsample_tiles && *c.subsample_tiles < 1) throw ValidationError("subsample_tiles must be >= 1");
    if (!(c.adam_beta1 > 0.0 && c.adam_beta1 < 1.0) || !(c.adam_beta2 > 0.0 && c.adam_beta2 < 1.0)) {
        throw ValidationError("adam betas must lie in (0, 1)");
    }
    if (!(c.adam_eps > 0.0)) throw ValidationError("adam_eps must be > 0");
}

AdamState AdamState::for_params(const ParamSet& params) {
    return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, const TrainConfig& config) {
    if (!params.same_layout(grads) || !params.same_layout(state.first_moment) ||
        !params.same_layout(state.second_moment)) {
        throw DimensionError("adam_step: parameter, gradient and state layouts differ");
    }
    ++state.step;
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params.tensors()[i].value;
        const auto& g = grads.tensors()[i].value;
        auto& m = state.first_moment.tensors()[i].value;
        auto& v = state.second_moment.tensors()[i].value;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
        p.array() -= config.learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + config.adam_eps);
    }
}

Bag subsample(const Bag& bag, Index k, Rng& rng) {
    if (k < 1) throw ValidationError("subsample size must be >= 1");
    if (bag.num_tiles() <= k) return bag;
    std::vector<Index> all(static_cast<std::size_t>(bag.num_tiles()));
    std::iota(all.begin(), all.end(), Index{0});
    std::vector<Index> keep;
    keep.reserve(static_cast<std::size_t>(k));
    std::sample(all.begin(), all.end(), std::back_inserter(keep), k, rng);

    Bag out;
    out.slide_id = bag.slide_id;
    out.patient_id = bag.patient_id;
    out.center_id = bag.center_id;
    out.label = bag.label;
    out.features.resize(k, bag.dim());
    if (bag.coords) out.coords = CoordMatrix(k, 2);
    for (Index i = 0; i < k; ++i) {
        const Index src = keep[static_cast<std::size_t>(i)];
        out.features.row(i) = bag.features.row(src);
        if (bag.coords) out.coords->row(i) = bag.coords->row(src);
    }
    return out;
}

TrainResult train(const ModelSpec& spec, const std::vector<const Bag*>& bags, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    validate_spec(spec);
    validate_config(config);
    if (bags.empty()) throw ValidationError("train: no bags");
    const Index dim = bags.front()->dim();

    std::vector<PreparedBag> prepared;
    std::vector<int> labels;
    prepared.reserve(bags.size());
    Rng init_rng = make_rng(config.seed, kInitStream);
    Rng subsample_rng = make_rng(config.seed, kSubsampleStream);
    Rng shuffle_rng = make_rng(config.seed, kShuffleStream);

    Model model = init_model(spec, dim, init_rng);

    for (const Bag* bag : bags) {
        if (!bag->label) throw ValidationError("train: slide '" + bag->slide_id + "' is unlabeled");
        if (bag->dim() != dim) {
            throw DimensionError("train: slide '" + bag->slide_id + "' has D=" + std::to_string(bag->dim()) +
                                 ", expected D=" + std::to_string(dim));
        }
        labels.push_back(*bag->label);
        if (config.subsample_tiles && bag->num_tiles() > *config.subsample_tiles) {
            prepared.push_back(prepare_bag(subsample(*bag, *config.subsample_tiles, subsample_rng).features));
        } else {
            prepared.push_back(prepare_bag(bag->features));
        }
        if (spec.kind == ModelKind::Chowder && prepared.back().num_tiles() < 2 * static_cast<Index>(spec.r)) {
            throw ValidationError("chowder: slide '" + bag->slide_id + "' has N=" +
                                  std::to_string(prepared.back().num_tiles()) + " tiles, needs N >= 2r = " +
                                  std::to_string(2 * spec.r));
        }
    }

    AdamState state = AdamState::for_params(model.params);
    std::vector<std::size_t> order(bags.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t batch = static_cast<std::size_t>(config.batch_bags);

    TrainResult result;
    result.loss_trace.reserve(static_cast<std::size_t>(config.epochs));
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t stop = std::min(order.size(), start + batch);
            // Reduce in ascending bag index regardless of shuffle position.
            std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(start),
                                             order.begin() + static_cast<std::ptrdiff_t>(stop));
            std::sort(members.begin(), members.end());
            ParamSet grad = model.params.zeros_like();
            for (std::size_t idx : members) {
                LossAndGradient lg = loss_and_gradient(model, prepared[idx], labels[idx]);
                if (!std::isfinite(lg.loss) || !lg.gradient.all_finite()) {
                    throw NumericError("train: non-finite loss/gradient at epoch " + std::to_string(epoch) +
                                       " on slide '" + bags[idx]->slide_id + "' (loss=" +
                                       std::to_string(lg.loss) + "); try a smaller learning rate");
                }
                epoch_loss += lg.loss;
                grad.add_scaled(lg.gradient, 1.0);
            }
            for (auto& t : grad.tensors()) t.value /= static_cast<double>(members.size());
            adam_step(model.params, grad, state, config);
        }
        if (!model.params.all_finite()) {
            throw NumericError("train: parameters became non-finite at epoch " + std::to_string(epoch));
        }
        result.loss_trace.push_back(epoch_loss / static_cast<double>(bags.size()));
        if (on_epoch) on_epoch(epoch, model);
    }
    result.model = std::move(model);
    return result;
}

TrainResult train(const ModelSpec& spec, const Dataset& dataset, const TrainConfig& config) {
    return train(spec, dataset.all(), config);
}

}  // namespace milkit

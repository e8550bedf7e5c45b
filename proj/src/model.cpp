#include "milkit/models.hpp"

#include "milkit/errors.hpp"
#include "model_impl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace milkit {

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::MeanPool: return "meanpool";
        case ModelKind::Chowder: return "chowder";
        case ModelKind::DeepMil: return "deepmil";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
    if (text == "meanpool") return ModelKind::MeanPool;
    if (text == "chowder") return ModelKind::Chowder;
    if (text == "deepmil") return ModelKind::DeepMil;
    throw ValidationError("unknown model kind '" + std::string(text) + "' (meanpool|chowder|deepmil)");
}

void validate_spec(const ModelSpec& spec) {
    switch (spec.kind) {
        case ModelKind::MeanPool:
            if (!(spec.l2_c >= 0.0) || !std::isfinite(spec.l2_c)) {
                throw ValidationError("meanpool: l2_c must be finite and >= 0");
            }
            break;
        case ModelKind::Chowder:
            if (spec.r < 1) throw ValidationError("chowder: r must be >= 1");
            if (spec.scorer_hidden < 1 || spec.aggregator_hidden1 < 1 || spec.aggregator_hidden2 < 1) {
                throw ValidationError("chowder: layer widths must be >= 1");
            }
            break;
        case ModelKind::DeepMil:
            if (spec.n_hidden < 1) throw ValidationError("deepmil: n_hidden must be >= 1");
            break;
    }
}

Model init_model(const ModelSpec& spec, Index input_dim, Rng& rng) {
    validate_spec(spec);
    if (input_dim < 1) throw ValidationError("input dimension must be >= 1");
    Model model{spec, input_dim, {}};
    switch (spec.kind) {
        case ModelKind::MeanPool: detail::init_meanpool(model, rng); break;
        case ModelKind::Chowder: detail::init_chowder(model, rng); break;
        case ModelKind::DeepMil: detail::init_deepmil(model, rng); break;
    }
    return model;
}

PreparedBag prepare_bag(const FeatureMatrix& features) {
    const Index n = features.rows();
    const Index d = features.cols();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        for (Index j = 0; j < d; ++j) {
            const float va = features(a, j);
            const float vb = features(b, j);
            if (va != vb) return va < vb;
        }
        return false;
    });
    PreparedBag out;
    out.x.resize(n, d);
    for (Index k = 0; k < n; ++k) {
        out.x.row(k) = features.row(order[static_cast<std::size_t>(k)]).cast<double>();
    }
    out.input_index = std::move(order);
    return out;
}

PreparedBag prepare_bag_unsorted(const Eigen::MatrixXd& x) {
    PreparedBag out;
    out.x = x;
    out.input_index.resize(static_cast<std::size_t>(x.rows()));
    std::iota(out.input_index.begin(), out.input_index.end(), Index{0});
    return out;
}

double logistic(double logit) {
    if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
    const double e = std::exp(logit);
    return e / (1.0 + e);
}

double bce_from_logit(double logit, int label) {
    // max(l, 0) - l*y + log(1 + exp(-|l|))
    return std::max(logit, 0.0) - logit * static_cast<double>(label) + std::log1p(std::exp(-std::abs(logit)));
}

namespace {

void check_input(const Model& model, const PreparedBag& bag) {
    if (bag.x.cols() != model.input_dim) {
        throw DimensionError("feature dimension mismatch: model expects D=" + std::to_string(model.input_dim) +
                             ", bag has D=" + std::to_string(bag.x.cols()));
    }
    if (bag.num_tiles() < 1) throw ValidationError("bag has no tiles");
    if (model.spec.kind == ModelKind::Chowder && bag.num_tiles() < 2 * static_cast<Index>(model.spec.r)) {
        throw ValidationError("chowder: bag has N=" + std::to_string(bag.num_tiles()) + " tiles but needs N >= 2r = " +
                              std::to_string(2 * model.spec.r));
    }
}

void check_label(int label) {
    if (label != 0 && label != 1) throw ValidationError("label must be 0 or 1");
}

}  // namespace

Prediction forward(const Model& model, const PreparedBag& bag) {
    check_input(model, bag);
    switch (model.spec.kind) {
        case ModelKind::MeanPool: return detail::meanpool_forward(model, bag);
        case ModelKind::Chowder: return detail::chowder_forward(model, bag);
        case ModelKind::DeepMil: return detail::deepmil_forward(model, bag);
    }
    throw Error("unreachable model kind");
}

Prediction forward(const Model& model, const Bag& bag) {
    if (bag.dim() != model.input_dim) {
        throw DimensionError("feature dimension mismatch: model expects D=" + std::to_string(model.input_dim) +
                             ", slide '" + bag.slide_id + "' has D=" + std::to_string(bag.dim()));
    }
    return forward(model, prepare_bag(bag.features));
}

double loss(const Model& model, const Prediction& prediction, int label) {
    check_label(label);
    double value = bce_from_logit(prediction.logit, label);
    if (model.spec.kind == ModelKind::MeanPool && model.spec.l2_c > 0.0) {
        value += model.spec.l2_c * model.params["w"].squaredNorm();
    }
    return value;
}

LossAndGradient loss_and_gradient(const Model& model, const PreparedBag& bag, int label) {
    check_input(model, bag);
    check_label(label);
    switch (model.spec.kind) {
        case ModelKind::MeanPool: return detail::meanpool_gradient(model, bag, label);
        case ModelKind::Chowder: return detail::chowder_gradient(model, bag, label);
        case ModelKind::DeepMil: return detail::deepmil_gradient(model, bag, label);
    }
    throw Error("unreachable model kind");
}

std::vector<Index> chowder_extremes(const Eigen::VectorXd& scores, int r) {
    const Index n = scores.size();
    if (r < 1 || n < 2 * static_cast<Index>(r)) {
        throw ValidationError("chowder: need N >= 2r, got N=" + std::to_string(n) + " r=" + std::to_string(r));
    }
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] > scores[b]; });
    std::vector<Index> out(order.begin(), order.begin() + r);
    out.insert(out.end(), order.rbegin(), order.rbegin() + r);
    return out;
}

namespace detail {

void init_uniform(Eigen::MatrixXd& m, Index fan_in, Rng& rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

Eigen::VectorXd to_input_order(const PreparedBag& bag, const Eigen::VectorXd& canonical) {
    Eigen::VectorXd out(canonical.size());
    for (Index k = 0; k < canonical.size(); ++k) out[bag.input_index[static_cast<std::size_t>(k)]] = canonical[k];
    return out;
}

}  // namespace detail

}  // namespace milkit

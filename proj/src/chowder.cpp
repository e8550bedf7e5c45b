// Chowder: a per-tile MLP scores every tile, the r highest and r lowest
// scores are concatenated and passed through a small MLP that emits the
// slide logit. Only the 2r selected tiles receive gradient.

#include "milkit/errors.hpp"
#include "model_impl.hpp"

namespace milkit::detail {

namespace {

struct ChowderPass {
    Eigen::MatrixXd tile_hidden;  // N x H, post-sigmoid
    Eigen::VectorXd scores;       // N, canonical order
    std::vector<Index> selected;  // 2r canonical positions
    Eigen::VectorXd extremes;     // 2r aggregator input
    Eigen::VectorXd h1, h2;
    double logit = 0.0;
};

ChowderPass run(const Model& model, const PreparedBag& bag) {
    const auto& p = model.params;
    ChowderPass pass;
    Eigen::MatrixXd pre = bag.x * p["score.hidden.weight"].transpose();
    pre.rowwise() += p["score.hidden.bias"].col(0).transpose();
    pass.tile_hidden = sigmoid(pre);
    pass.scores = pass.tile_hidden * p["score.out.weight"].row(0).transpose();
    pass.scores.array() += p["score.out.bias"](0, 0);

    pass.selected = chowder_extremes(pass.scores, model.spec.r);
    pass.extremes.resize(static_cast<Index>(pass.selected.size()));
    for (std::size_t k = 0; k < pass.selected.size(); ++k) {
        pass.extremes[static_cast<Index>(k)] = pass.scores[pass.selected[k]];
    }

    pass.h1 = sigmoid(p["agg.fc1.weight"] * pass.extremes + p["agg.fc1.bias"].col(0));
    pass.h2 = sigmoid(p["agg.fc2.weight"] * pass.h1 + p["agg.fc2.bias"].col(0));
    pass.logit = p["agg.out.weight"].row(0).dot(pass.h2) + p["agg.out.bias"](0, 0);
    return pass;
}

}  // namespace

void init_chowder(Model& model, Rng& rng) {
    const auto& s = model.spec;
    const Index d = model.input_dim;
    const Index h = s.scorer_hidden;
    const Index in = 2 * static_cast<Index>(s.r);
    auto& p = model.params;
    init_uniform(p.add("score.hidden.weight", h, d), d, rng);
    p.add("score.hidden.bias", h, 1);
    init_uniform(p.add("score.out.weight", 1, h), h, rng);
    p.add("score.out.bias", 1, 1);
    init_uniform(p.add("agg.fc1.weight", s.aggregator_hidden1, in), in, rng);
    p.add("agg.fc1.bias", s.aggregator_hidden1, 1);
    init_uniform(p.add("agg.fc2.weight", s.aggregator_hidden2, s.aggregator_hidden1), s.aggregator_hidden1, rng);
    p.add("agg.fc2.bias", s.aggregator_hidden2, 1);
    init_uniform(p.add("agg.out.weight", 1, s.aggregator_hidden2), s.aggregator_hidden2, rng);
    p.add("agg.out.bias", 1, 1);
}

Prediction chowder_forward(const Model& model, const PreparedBag& bag) {
    ChowderPass pass = run(model, bag);
    Prediction out;
    out.logit = pass.logit;
    out.probability = logistic(pass.logit);
    out.tile_scores = to_input_order(bag, pass.scores);
    return out;
}

LossAndGradient chowder_gradient(const Model& model, const PreparedBag& bag, int label) {
    const auto& p = model.params;
    ChowderPass pass = run(model, bag);

    LossAndGradient out;
    out.prediction.logit = pass.logit;
    out.prediction.probability = logistic(pass.logit);
    out.prediction.tile_scores = to_input_order(bag, pass.scores);
    out.loss = loss(model, out.prediction, label);
    out.gradient = p.zeros_like();
    auto& g = out.gradient;

    const double dlogit = out.prediction.probability - static_cast<double>(label);

    // Aggregator.
    g["agg.out.weight"].row(0) = dlogit * pass.h2.transpose();
    g["agg.out.bias"](0, 0) = dlogit;
    const Eigen::VectorXd dpre2 =
        (dlogit * p["agg.out.weight"].row(0).transpose()).cwiseProduct(pass.h2.cwiseProduct((1.0 - pass.h2.array()).matrix()));
    g["agg.fc2.weight"] = dpre2 * pass.h1.transpose();
    g["agg.fc2.bias"].col(0) = dpre2;
    const Eigen::VectorXd dh1 = p["agg.fc2.weight"].transpose() * dpre2;
    const Eigen::VectorXd dpre1 = dh1.cwiseProduct(pass.h1.cwiseProduct((1.0 - pass.h1.array()).matrix()));
    g["agg.fc1.weight"] = dpre1 * pass.extremes.transpose();
    g["agg.fc1.bias"].col(0) = dpre1;
    const Eigen::VectorXd dextremes = p["agg.fc1.weight"].transpose() * dpre1;

    // Tile scorer, selected tiles only.
    const Eigen::RowVectorXd v = p["score.out.weight"].row(0);
    auto& g_w1 = g["score.hidden.weight"];
    auto& g_b1 = g["score.hidden.bias"];
    auto& g_v = g["score.out.weight"];
    auto& g_c = g["score.out.bias"];
    for (std::size_t k = 0; k < pass.selected.size(); ++k) {
        const Index tile = pass.selected[k];
        const double dscore = dextremes[static_cast<Index>(k)];
        const Eigen::RowVectorXd hidden = pass.tile_hidden.row(tile);
        g_v.row(0) += dscore * hidden;
        g_c(0, 0) += dscore;
        const Eigen::VectorXd dpre =
            (dscore * v.array() * hidden.array() * (1.0 - hidden.array())).matrix().transpose();
        g_w1 += dpre * bag.x.row(tile);
        g_b1.col(0) += dpre;
    }
    return out;
}

}  // namespace milkit::detail

// Average pooling of tile features followed by logistic regression.

#include "model_impl.hpp"

namespace milkit::detail {

namespace {

// Shifted mean: rows identical to row 0 contribute exactly zero, so a bag of
// N copies of x pools to exactly x.
Eigen::RowVectorXd pooled_mean(const Eigen::MatrixXd& x) {
    const Eigen::RowVectorXd first = x.row(0);
    Eigen::RowVectorXd shift = Eigen::RowVectorXd::Zero(x.cols());
    for (Index i = 1; i < x.rows(); ++i) shift += x.row(i) - first;
    return first + shift / static_cast<double>(x.rows());
}

}  // namespace

void init_meanpool(Model& model, Rng& rng) {
    init_uniform(model.params.add("w", model.input_dim, 1), model.input_dim, rng);
    model.params.add("b", 1, 1);
}

Prediction meanpool_forward(const Model& model, const PreparedBag& bag) {
    const Eigen::VectorXd w = model.params["w"].col(0);
    const double b = model.params["b"](0, 0);
    const Eigen::RowVectorXd mean = pooled_mean(bag.x);

    Prediction p;
    p.logit = mean.dot(w.transpose()) + b;
    p.probability = logistic(p.logit);
    Eigen::VectorXd contrib = bag.x * w;
    contrib.array() += b;
    p.tile_scores = to_input_order(bag, contrib);
    return p;
}

LossAndGradient meanpool_gradient(const Model& model, const PreparedBag& bag, int label) {
    const Eigen::VectorXd w = model.params["w"].col(0);
    const double b = model.params["b"](0, 0);
    const Eigen::RowVectorXd mean = pooled_mean(bag.x);

    LossAndGradient out;
    out.prediction.logit = mean.dot(w.transpose()) + b;
    out.prediction.probability = logistic(out.prediction.logit);
    out.loss = loss(model, out.prediction, label);

    const double dlogit = out.prediction.probability - static_cast<double>(label);
    out.gradient = model.params.zeros_like();
    out.gradient["w"].col(0) = dlogit * mean.transpose() + 2.0 * model.spec.l2_c * w;
    out.gradient["b"](0, 0) = dlogit;
    return out;
}

}  // namespace milkit::detail

#pragma once

// Per-architecture kernels behind the dispatch in model.cpp.

#include "milkit/models.hpp"

namespace milkit::detail {

void init_meanpool(Model& model, Rng& rng);
void init_chowder(Model& model, Rng& rng);
void init_deepmil(Model& model, Rng& rng);

Prediction meanpool_forward(const Model& model, const PreparedBag& bag);
Prediction chowder_forward(const Model& model, const PreparedBag& bag);
Prediction deepmil_forward(const Model& model, const PreparedBag& bag);

LossAndGradient meanpool_gradient(const Model& model, const PreparedBag& bag, int label);
LossAndGradient chowder_gradient(const Model& model, const PreparedBag& bag, int label);
LossAndGradient deepmil_gradient(const Model& model, const PreparedBag& bag, int label);

/// Fills `m` uniform in +-sqrt(1/fan_in).
void init_uniform(Eigen::MatrixXd& m, Index fan_in, Rng& rng);

/// Scatters canonical-order values back to input order.
Eigen::VectorXd to_input_order(const PreparedBag& bag, const Eigen::VectorXd& canonical);

inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& m) {
    return m.unaryExpr([](double v) { return logistic(v); });
}

}  // namespace milkit::detail

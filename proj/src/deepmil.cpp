// Attention-based MIL with a gated attention layer:
//   h_i = E x_i + e
//   g_i = w . (tanh(V h_i + c) * sigmoid(U h_i + d))
//   a   = softmax(g),  z = sum_i a_i h_i,  logit = head . z + b

#include "model_impl.hpp"

#include <cmath>

namespace milkit::detail {

namespace {

struct DeepMilPass {
    Eigen::MatrixXd h;      // N x Nh embeddings
    Eigen::MatrixXd gate_tanh;  // N x Nh
    Eigen::MatrixXd gate_sig;   // N x Nh
    Eigen::VectorXd attention;  // N, canonical order
    Eigen::VectorXd z;          // Nh
    double logit = 0.0;
};

DeepMilPass run(const Model& model, const PreparedBag& bag) {
    const auto& p = model.params;
    DeepMilPass pass;
    pass.h = bag.x * p["embed.weight"].transpose();
    pass.h.rowwise() += p["embed.bias"].col(0).transpose();

    Eigen::MatrixXd pre_v = pass.h * p["attn.V.weight"].transpose();
    pre_v.rowwise() += p["attn.V.bias"].col(0).transpose();
    Eigen::MatrixXd pre_u = pass.h * p["attn.U.weight"].transpose();
    pre_u.rowwise() += p["attn.U.bias"].col(0).transpose();
    pass.gate_tanh = pre_v.array().tanh().matrix();
    pass.gate_sig = sigmoid(pre_u);

    const Eigen::VectorXd gate_logits =
        pass.gate_tanh.cwiseProduct(pass.gate_sig) * p["attn.w"].col(0);
    const double top = gate_logits.maxCoeff();
    Eigen::VectorXd e = (gate_logits.array() - top).exp().matrix();
    pass.attention = e / e.sum();

    pass.z = pass.h.transpose() * pass.attention;
    pass.logit = p["head.weight"].row(0).dot(pass.z) + p["head.bias"](0, 0);
    return pass;
}

}  // namespace

void init_deepmil(Model& model, Rng& rng) {
    const Index d = model.input_dim;
    const Index nh = model.spec.n_hidden;
    auto& p = model.params;
    init_uniform(p.add("embed.weight", nh, d), d, rng);
    p.add("embed.bias", nh, 1);
    init_uniform(p.add("attn.V.weight", nh, nh), nh, rng);
    p.add("attn.V.bias", nh, 1);
    init_uniform(p.add("attn.U.weight", nh, nh), nh, rng);
    p.add("attn.U.bias", nh, 1);
    init_uniform(p.add("attn.w", nh, 1), nh, rng);
    init_uniform(p.add("head.weight", 1, nh), nh, rng);
    p.add("head.bias", 1, 1);
}

Prediction deepmil_forward(const Model& model, const PreparedBag& bag) {
    DeepMilPass pass = run(model, bag);
    Prediction out;
    out.logit = pass.logit;
    out.probability = logistic(pass.logit);
    out.tile_scores = to_input_order(bag, pass.attention);
    return out;
}

LossAndGradient deepmil_gradient(const Model& model, const PreparedBag& bag, int label) {
    const auto& p = model.params;
    DeepMilPass pass = run(model, bag);

    LossAndGradient out;
    out.prediction.logit = pass.logit;
    out.prediction.probability = logistic(pass.logit);
    out.prediction.tile_scores = to_input_order(bag, pass.attention);
    out.loss = loss(model, out.prediction, label);
    out.gradient = p.zeros_like();
    auto& g = out.gradient;

    const double dlogit = out.prediction.probability - static_cast<double>(label);
    g["head.weight"].row(0) = dlogit * pass.z.transpose();
    g["head.bias"](0, 0) = dlogit;
    const Eigen::VectorXd dz = dlogit * p["head.weight"].row(0).transpose();

    // z = H^T a
    Eigen::MatrixXd dh = pass.attention * dz.transpose();
    const Eigen::VectorXd da = pass.h * dz;
    // softmax backward
    const double mean_da = pass.attention.dot(da);
    const Eigen::VectorXd dgate = pass.attention.cwiseProduct((da.array() - mean_da).matrix());

    const Eigen::MatrixXd gated = pass.gate_tanh.cwiseProduct(pass.gate_sig);
    g["attn.w"].col(0) = gated.transpose() * dgate;
    const Eigen::MatrixXd dgated = dgate * p["attn.w"].col(0).transpose();
    const Eigen::MatrixXd dpre_v =
        (dgated.array() * pass.gate_sig.array() * (1.0 - pass.gate_tanh.array().square())).matrix();
    const Eigen::MatrixXd dpre_u =
        (dgated.array() * pass.gate_tanh.array() * pass.gate_sig.array() * (1.0 - pass.gate_sig.array())).matrix();

    g["attn.V.weight"] = dpre_v.transpose() * pass.h;
    g["attn.V.bias"].col(0) = dpre_v.colwise().sum().transpose();
    g["attn.U.weight"] = dpre_u.transpose() * pass.h;
    g["attn.U.bias"].col(0) = dpre_u.colwise().sum().transpose();
    dh += dpre_v * p["attn.V.weight"] + dpre_u * p["attn.U.weight"];

    g["embed.weight"] = dh.transpose() * bag.x;
    g["embed.bias"].col(0) = dh.colwise().sum().transpose();
    return out;
}

}  // namespace milkit::detail

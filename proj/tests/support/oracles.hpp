#pragma once

// Independent reference computations used only by tests. None of these call
// into the code paths they are used to check.

#include "milkit/models.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace milkit::oracle {

/// O(n^2) Mann-Whitney count with ties as one half.
inline double brute_force_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) {
                wins += 1.0;
            } else if (scores[i] == scores[j]) {
                wins += 0.5;
            }
        }
    }
    return wins / pairs;
}

struct PairwiseDelong {
    double auc = 0.0;
    double variance = 0.0;
    std::vector<double> v10;
    std::vector<double> v01;
};

/// Placement values by explicit pairwise kernel psi(x, y) in {0, 1/2, 1}.
inline PairwiseDelong brute_force_delong(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::vector<double> pos;
    std::vector<double> neg;
    for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(scores[i]);
    auto psi = [](double x, double y) { return x > y ? 1.0 : (x == y ? 0.5 : 0.0); };
    PairwiseDelong out;
    for (double x : pos) {
        double s = 0.0;
        for (double y : neg) s += psi(x, y);
        out.v10.push_back(s / static_cast<double>(neg.size()));
    }
    for (double y : neg) {
        double s = 0.0;
        for (double x : pos) s += psi(x, y);
        out.v01.push_back(s / static_cast<double>(pos.size()));
    }
    auto var = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double a : v) m += a;
        m /= static_cast<double>(v.size());
        double s = 0.0;
        for (double a : v) s += (a - m) * (a - m);
        return s / static_cast<double>(v.size() - 1);
    };
    for (double v : out.v10) out.auc += v;
    out.auc /= static_cast<double>(out.v10.size());
    out.variance = var(out.v10) / static_cast<double>(pos.size()) + var(out.v01) / static_cast<double>(neg.size());
    return out;
}

inline double sort_median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// Loss evaluated through forward() + loss() only (no gradient code).
inline double objective(const Model& model, const PreparedBag& bag, int label) {
    return loss(model, forward(model, bag), label);
}

/// Central finite differences of the objective, h = step.
inline ParamSet finite_difference_gradient(const Model& model, const PreparedBag& bag, int label, double step) {
    Model probe = model;
    ParamSet grad = model.params.zeros_like();
    for (std::size_t t = 0; t < probe.params.size(); ++t) {
        auto& value = probe.params.tensors()[t].value;
        auto& g = grad.tensors()[t].value;
        for (Eigen::Index i = 0; i < value.size(); ++i) {
            const double saved = value.data()[i];
            value.data()[i] = saved + step;
            const double up = objective(probe, bag, label);
            value.data()[i] = saved - step;
            const double down = objective(probe, bag, label);
            value.data()[i] = saved;
            g.data()[i] = (up - down) / (2.0 * step);
        }
    }
    return grad;
}

/// ||a - b||_inf / max(||a||_inf, ||b||_inf), with 0 when both vanish.
inline double relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
    const double scale = std::max(analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff());
    if (scale < 1e-12) return (analytic - numeric).cwiseAbs().maxCoeff();
    return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

/// Scalar-loop gated attention forward on rows in the given order.
struct DeepMilScalar {
    std::vector<double> attention;
    std::vector<double> z;
    double logit = 0.0;
};

inline DeepMilScalar deepmil_scalar(const Model& m, const Eigen::MatrixXd& x) {
    const auto& p = m.params;
    const auto& E = p["embed.weight"];
    const auto& e = p["embed.bias"];
    const auto& V = p["attn.V.weight"];
    const auto& c = p["attn.V.bias"];
    const auto& U = p["attn.U.weight"];
    const auto& d = p["attn.U.bias"];
    const auto& w = p["attn.w"];
    const auto& head = p["head.weight"];
    const double head_b = p["head.bias"](0, 0);
    const auto n = static_cast<std::size_t>(x.rows());
    const auto nh = static_cast<std::size_t>(E.rows());
    std::vector<std::vector<double>> h(n, std::vector<double>(nh));
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < nh; ++k) {
            double s = e(static_cast<Eigen::Index>(k), 0);
            for (Eigen::Index j = 0; j < x.cols(); ++j) s += E(static_cast<Eigen::Index>(k), j) * x(static_cast<Eigen::Index>(i), j);
            h[i][k] = s;
        }
        double gi = 0.0;
        for (std::size_t k = 0; k < nh; ++k) {
            double sv = c(static_cast<Eigen::Index>(k), 0);
            double su = d(static_cast<Eigen::Index>(k), 0);
            for (std::size_t q = 0; q < nh; ++q) {
                sv += V(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(q)) * h[i][q];
                su += U(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(q)) * h[i][q];
            }
            gi += w(static_cast<Eigen::Index>(k), 0) * std::tanh(sv) * sigmoid(su);
        }
        g[i] = gi;
    }
    const double top = *std::max_element(g.begin(), g.end());
    double total = 0.0;
    DeepMilScalar out;
    for (double gi : g) {
        out.attention.push_back(std::exp(gi - top));
        total += out.attention.back();
    }
    for (double& a : out.attention) a /= total;
    out.z.assign(nh, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < nh; ++k) out.z[k] += out.attention[i] * h[i][k];
    }
    out.logit = head_b;
    for (std::size_t k = 0; k < nh; ++k) out.logit += head(0, static_cast<Eigen::Index>(k)) * out.z[k];
    return out;
}

/// Paired permutation test on the AUC difference: randomly swap the two
/// models' scores within each patient.
inline double permutation_p_value(const std::vector<double>& a, const std::vector<double>& b,
                                  const std::vector<int>& labels, int rounds, std::uint64_t seed) {
    const double observed = std::abs(brute_force_auc(a, labels) - brute_force_auc(b, labels));
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    int extreme = 0;
    std::vector<double> pa(a.size());
    std::vector<double> pb(b.size());
    for (int r = 0; r < rounds; ++r) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const bool swap = coin(rng);
            pa[i] = swap ? b[i] : a[i];
            pb[i] = swap ? a[i] : b[i];
        }
        if (std::abs(brute_force_auc(pa, labels) - brute_force_auc(pb, labels)) >= observed - 1e-15) ++extreme;
    }
    return (extreme + 1.0) / (rounds + 1.0);
}

}  // namespace milkit::oracle

#pragma once

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <vector>

namespace milkit {

/// One named parameter tensor. Vectors are stored as (n x 1).
struct Tensor {
    std::string name;
    Eigen::MatrixXd value;
};

/// Ordered, named collection of parameter tensors. Gradients and optimizer
/// moments use the same type with identical names and shapes.
class ParamSet {
public:
    Eigen::MatrixXd& add(std::string name, Eigen::Index rows, Eigen::Index cols);

    Eigen::MatrixXd& operator[](std::string_view name);
    const Eigen::MatrixXd& operator[](std::string_view name) const;
    bool contains(std::string_view name) const;

    std::vector<Tensor>& tensors() { return tensors_; }
    const std::vector<Tensor>& tensors() const { return tensors_; }
    std::size_t size() const { return tensors_.size(); }
    Eigen::Index num_scalars() const;

    /// Same names and shapes, all zeros.
    ParamSet zeros_like() const;
    bool same_layout(const ParamSet& other) const;
    bool all_finite() const;

    /// this += scale * other (layouts must match).
    void add_scaled(const ParamSet& other, double scale);

    friend bool operator==(const ParamSet& a, const ParamSet& b);

private:
    std::vector<Tensor> tensors_;
};

}  // namespace milkit

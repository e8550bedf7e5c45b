#include "milkit/params.hpp"

#include "milkit/errors.hpp"

namespace milkit {

Eigen::MatrixXd& ParamSet::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    if (contains(name)) throw ValidationError("duplicate parameter '" + name + "'");
    tensors_.push_back({std::move(name), Eigen::MatrixXd::Zero(rows, cols)});
    return tensors_.back().value;
}

Eigen::MatrixXd& ParamSet::operator[](std::string_view name) {
    for (auto& t : tensors_) {
        if (t.name == name) return t.value;
    }
    throw ValidationError("no parameter named '" + std::string(name) + "'");
}

const Eigen::MatrixXd& ParamSet::operator[](std::string_view name) const {
    for (const auto& t : tensors_) {
        if (t.name == name) return t.value;
    }
    throw ValidationError("no parameter named '" + std::string(name) + "'");
}

bool ParamSet::contains(std::string_view name) const {
    for (const auto& t : tensors_) {
        if (t.name == name) return true;
    }
    return false;
}

Eigen::Index ParamSet::num_scalars() const {
    Eigen::Index n = 0;
    for (const auto& t : tensors_) n += t.value.size();
    return n;
}

ParamSet ParamSet::zeros_like() const {
    ParamSet out;
    for (const auto& t : tensors_) out.add(t.name, t.value.rows(), t.value.cols());
    return out;
}

bool ParamSet::same_layout(const ParamSet& other) const {
    if (tensors_.size() != other.tensors_.size()) return false;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        const auto& a = tensors_[i];
        const auto& b = other.tensors_[i];
        if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) {
            return false;
        }
    }
    return true;
}

bool ParamSet::all_finite() const {
    for (const auto& t : tensors_) {
        if (!t.value.allFinite()) return false;
    }
    return true;
}

void ParamSet::add_scaled(const ParamSet& other, double scale) {
    if (!same_layout(other)) throw DimensionError("add_scaled: parameter layouts differ");
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        tensors_[i].value += scale * other.tensors_[i].value;
    }
}

bool operator==(const ParamSet& a, const ParamSet& b) {
    if (!a.same_layout(b)) return false;
    for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
        if (a.tensors_[i].value != b.tensors_[i].value) return false;
    }
    return true;
}

}  // namespace milkit

#pragma once

#include "milkit/bag.hpp"
#include "milkit/models.hpp"
#include "milkit/random.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace milkit::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("milkit_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Bag random_bag(Index n, Index d, Rng& rng, bool coords = false, const std::string& id = "s") {
    std::normal_distribution<float> normal(0.0f, 1.0f);
    Bag bag;
    bag.slide_id = id;
    bag.patient_id = "p_" + id;
    bag.center_id = "c";
    bag.label = 0;
    bag.features.resize(n, d);
    for (Index i = 0; i < bag.features.size(); ++i) bag.features.data()[i] = normal(rng);
    if (coords) {
        CoordMatrix c(n, 2);
        for (Index i = 0; i < c.size(); ++i) c.data()[i] = 100.0f * normal(rng);
        bag.coords = std::move(c);
    }
    return bag;
}

/// Small Chowder widths keep finite-difference sweeps fast.
inline ModelSpec small_spec(ModelKind kind) {
    ModelSpec s;
    s.kind = kind;
    s.r = 2;
    s.n_hidden = 4;
    s.l2_c = 0.5;
    s.scorer_hidden = 6;
    s.aggregator_hidden1 = 5;
    s.aggregator_hidden2 = 4;
    return s;
}

/// Random (not just initial) parameters: biases included, scale ~1.
inline Model random_model(const ModelSpec& spec, Index d, Rng& rng) {
    Model m = init_model(spec, d, rng);
    std::normal_distribution<double> normal(0.0, 0.7);
    for (auto& t : m.params.tensors()) {
        for (Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = normal(rng);
    }
    return m;
}

}  // namespace milkit::testing

#include "doctest.h"

#include "fixtures.hpp"
#include "milkit/errors.hpp"
#include "milkit/fileio.hpp"
#include "milkit/models.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace milkit;
using milkit::testing::random_bag;
using milkit::testing::random_model;
using milkit::testing::small_spec;

namespace {

FeatureMatrix permute_rows(const FeatureMatrix& x, Rng& rng) {
    std::vector<Index> p(static_cast<std::size_t>(x.rows()));
    std::iota(p.begin(), p.end(), Index{0});
    std::shuffle(p.begin(), p.end(), rng);
    FeatureMatrix out(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) out.row(i) = x.row(p[static_cast<std::size_t>(i)]);
    return out;
}

}  // namespace

TEST_CASE("meanpool: identical tiles pool to exactly w.x + b") {
    Rng rng(5);
    Model m = random_model(small_spec(ModelKind::MeanPool), 4, rng);
    Eigen::RowVectorXd x(4);
    x << 0.1, -0.3, 0.7, 1.9;
    FeatureMatrix f(6, 4);
    for (Index i = 0; i < 6; ++i) f.row(i) = x.cast<float>();
    const Eigen::RowVectorXd xf = x.cast<float>().cast<double>();
    const double expected = xf.dot(m.params["w"].col(0).transpose()) + m.params["b"](0, 0);
    CHECK(forward(m, prepare_bag(f)).logit == expected);
}

TEST_CASE("meanpool: zero weights give probability 0.5") {
    Rng rng(6);
    Model m = init_model(small_spec(ModelKind::MeanPool), 3, rng);
    m.params["w"].setZero();
    Bag bag = random_bag(9, 3, rng);
    CHECK(forward(m, bag).probability == 0.5);
}

TEST_CASE("meanpool: logit matches a brute-force mean on N=7, D=4") {
    Rng rng(7);
    Model m = random_model(small_spec(ModelKind::MeanPool), 4, rng);
    Bag bag = random_bag(7, 4, rng);
    double oracle = m.params["b"](0, 0);
    for (Index j = 0; j < 4; ++j) {
        double s = 0.0;
        for (Index i = 0; i < 7; ++i) s += static_cast<double>(bag.features(i, j));
        oracle += m.params["w"](j, 0) * s / 7.0;
    }
    CHECK(forward(m, bag).logit == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("meanpool: per-tile contributions average to the logit") {
    Rng rng(8);
    Model m = random_model(small_spec(ModelKind::MeanPool), 5, rng);
    Bag bag = random_bag(11, 5, rng);
    Prediction p = forward(m, bag);
    CHECK(p.tile_scores.mean() == doctest::Approx(p.logit).epsilon(1e-12));
}

TEST_CASE("chowder: extreme selection of [3,1,4,1,5] with r=2") {
    Eigen::VectorXd s(5);
    s << 3, 1, 4, 1, 5;
    const auto sel = chowder_extremes(s, 2);
    std::vector<double> values;
    for (Index i : sel) values.push_back(s[i]);
    CHECK(values == std::vector<double>{5, 4, 1, 1});
    CHECK(sel[0] == 4);
    CHECK(sel[1] == 2);
    CHECK_THROWS_AS(chowder_extremes(s, 3), ValidationError);
}

TEST_CASE("chowder: hand-set scorer feeds [5,4,1,1]/10 to the aggregator") {
    // One hidden unit with identity weight: score_i = sigmoid(x_i). Choosing
    // x_i = logit(t_i) plants scores t = [0.3, 0.1, 0.4, 0.1, 0.5].
    ModelSpec spec = small_spec(ModelKind::Chowder);
    spec.scorer_hidden = 1;
    spec.aggregator_hidden1 = 1;
    Rng rng(9);
    Model m = random_model(spec, 1, rng);
    m.params["score.hidden.weight"](0, 0) = 1.0;
    m.params["score.hidden.bias"](0, 0) = 0.0;
    m.params["score.out.weight"](0, 0) = 1.0;
    m.params["score.out.bias"](0, 0) = 0.0;
    const std::vector<double> targets{0.3, 0.1, 0.4, 0.1, 0.5};
    Eigen::MatrixXd x(5, 1);
    for (Index i = 0; i < 5; ++i) x(i, 0) = std::log(targets[static_cast<std::size_t>(i)] / (1.0 - targets[static_cast<std::size_t>(i)]));
    PreparedBag bag = prepare_bag_unsorted(x);

    Prediction p = forward(m, bag);
    for (Index i = 0; i < 5; ++i) CHECK(p.tile_scores[i] == doctest::Approx(targets[static_cast<std::size_t>(i)]).epsilon(1e-12));

    // d loss / d fc1.weight = dpre1 * extremes^T, so its row is proportional
    // to the aggregator input.
    const auto g = loss_and_gradient(m, bag, 1).gradient["agg.fc1.weight"];
    const std::vector<double> expected{0.5, 0.4, 0.1, 0.1};
    for (Index j = 0; j < 4; ++j) {
        CHECK(g(0, j) / g(0, 0) == doctest::Approx(expected[static_cast<std::size_t>(j)] / 0.5).epsilon(1e-9));
    }
}

TEST_CASE("chowder: N = 2r with identical tiles is well defined") {
    ModelSpec spec = small_spec(ModelKind::Chowder);
    Rng rng(10);
    Model m = random_model(spec, 3, rng);
    FeatureMatrix f(4, 3);
    f.rowwise() = Eigen::RowVector3f(0.2f, -1.0f, 0.5f);
    Prediction p = forward(m, prepare_bag(f));
    CHECK(std::isfinite(p.logit));
    for (Index i = 1; i < 4; ++i) CHECK(p.tile_scores[i] == p.tile_scores[0]);
}

TEST_CASE("chowder: bags smaller than 2r are rejected") {
    ModelSpec spec = small_spec(ModelKind::Chowder);
    spec.r = 3;
    Rng rng(11);
    Model m = random_model(spec, 2, rng);
    CHECK_THROWS_AS(forward(m, random_bag(5, 2, rng)), ValidationError);
    CHECK_NOTHROW(forward(m, random_bag(6, 2, rng)));
}

TEST_CASE("deepmil: singleton bag has attention exactly 1") {
    Rng rng(12);
    Model m = random_model(small_spec(ModelKind::DeepMil), 3, rng);
    Prediction p = forward(m, random_bag(1, 3, rng));
    REQUIRE(p.tile_scores.size() == 1);
    CHECK(p.tile_scores[0] == 1.0);
}

TEST_CASE("deepmil: identical tiles get uniform attention") {
    Rng rng(13);
    Model m = random_model(small_spec(ModelKind::DeepMil), 3, rng);
    FeatureMatrix f(7, 3);
    f.rowwise() = Eigen::RowVector3f(1.5f, 0.25f, -2.0f);
    Prediction p = forward(m, prepare_bag(f));
    for (Index i = 0; i < 7; ++i) CHECK(p.tile_scores[i] == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("deepmil: matches a scalar-loop reimplementation (N=3, Nh=2)") {
    ModelSpec spec = small_spec(ModelKind::DeepMil);
    spec.n_hidden = 2;
    Rng rng(14);
    Model m = random_model(spec, 3, rng);
    Eigen::MatrixXd x(3, 3);
    x << 0.5, -1.0, 2.0, 1.5, 0.0, -0.5, -2.0, 1.0, 0.25;
    PreparedBag bag = prepare_bag_unsorted(x);
    Prediction p = forward(m, bag);
    auto oracle = milkit::oracle::deepmil_scalar(m, x);
    CHECK(p.logit == doctest::Approx(oracle.logit).epsilon(1e-12));
    for (Index i = 0; i < 3; ++i) CHECK(p.tile_scores[i] == doctest::Approx(oracle.attention[static_cast<std::size_t>(i)]).epsilon(1e-12));
    CHECK(p.tile_scores.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("loss: analytic values and stability") {
    Rng rng(15);
    Model chowder = init_model(small_spec(ModelKind::Chowder), 2, rng);
    Prediction p;
    p.logit = 0.0;
    CHECK(loss(chowder, p, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    p.logit = 40.0;
    const double tiny = loss(chowder, p, 1);
    CHECK(std::isfinite(tiny));
    CHECK(tiny < 1e-15);
    p.logit = -800.0;
    CHECK(loss(chowder, p, 1) == doctest::Approx(800.0));
    CHECK(std::isfinite(loss(chowder, p, 0)));

    ModelSpec mp = small_spec(ModelKind::MeanPool);
    mp.l2_c = 0.5;
    Model meanpool = init_model(mp, 2, rng);
    meanpool.params["w"].setOnes();
    p.logit = 0.0;
    CHECK(loss(meanpool, p, 0) == doctest::Approx(std::log(2.0) + 1.0).epsilon(1e-15));
}

TEST_CASE("probability equals logistic(logit)") {
    Rng rng(16);
    for (ModelKind kind : {ModelKind::MeanPool, ModelKind::Chowder, ModelKind::DeepMil}) {
        Model m = random_model(small_spec(kind), 4, rng);
        for (int t = 0; t < 10; ++t) {
            Prediction p = forward(m, random_bag(12, 4, rng));
            CHECK(std::abs(p.probability - 1.0 / (1.0 + std::exp(-p.logit))) <= 1e-12);
        }
    }
}

TEST_CASE("property: tile order does not change the logit") {
    Rng rng(17);
    for (ModelKind kind : {ModelKind::MeanPool, ModelKind::Chowder, ModelKind::DeepMil}) {
        Model m = random_model(small_spec(kind), 5, rng);
        for (int t = 0; t < 20; ++t) {
            Bag bag = random_bag(20, 5, rng);
            Bag shuffled = bag;
            shuffled.features = permute_rows(bag.features, rng);
            CHECK(forward(m, bag).logit == forward(m, shuffled).logit);
        }
    }
}

TEST_CASE("property: duplicating every tile keeps MeanPool and DeepMIL logits") {
    Rng rng(18);
    for (ModelKind kind : {ModelKind::MeanPool, ModelKind::DeepMil}) {
        Model m = random_model(small_spec(kind), 4, rng);
        for (int t = 0; t < 10; ++t) {
            Bag bag = random_bag(9, 4, rng);
            Bag twice = bag;
            twice.features.resize(18, 4);
            twice.features << bag.features, bag.features;
            CHECK(forward(m, twice).logit == doctest::Approx(forward(m, bag).logit).epsilon(1e-12));
        }
    }
}

TEST_CASE("property: deepmil attention is a distribution") {
    Rng rng(19);
    Model m = random_model(small_spec(ModelKind::DeepMil), 6, rng);
    for (int t = 0; t < 20; ++t) {
        Prediction p = forward(m, random_bag(1 + t, 6, rng));
        CHECK(std::abs(p.tile_scores.sum() - 1.0) <= 1e-12);
        CHECK(p.tile_scores.minCoeff() > 0.0);
        CHECK(p.tile_scores.maxCoeff() <= 1.0);
    }
}

TEST_CASE("dimension mismatch is reported") {
    Rng rng(20);
    Model m = init_model(small_spec(ModelKind::DeepMil), 4, rng);
    CHECK_THROWS_AS(forward(m, random_bag(5, 3, rng)), DimensionError);
}

TEST_CASE("checkpoint round trip is exact") {
    Rng rng(21);
    for (ModelKind kind : {ModelKind::MeanPool, ModelKind::Chowder, ModelKind::DeepMil}) {
        Model m = random_model(small_spec(kind), 7, rng);
        const std::string bytes = encode_checkpoint(m);
        Model back = decode_checkpoint(bytes);
        CHECK(back.spec.kind == m.spec.kind);
        CHECK(back.spec.r == m.spec.r);
        CHECK(back.spec.n_hidden == m.spec.n_hidden);
        CHECK(back.spec.l2_c == m.spec.l2_c);
        CHECK(back.input_dim == 7);
        CHECK(back.params == m.params);
        CHECK(encode_checkpoint(back) == bytes);
    }
}

TEST_CASE("checkpoint decoding rejects damaged input") {
    Rng rng(22);
    const std::string bytes = encode_checkpoint(random_model(small_spec(ModelKind::DeepMil), 3, rng));
    CHECK_THROWS_AS(decode_checkpoint("XXXX" + bytes.substr(4)), FormatError);
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), CorruptionError);
    CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), FormatError);
}

// Links only the shared library and its C header.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "milkit/milkit.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Scratch {
    fs::path path;
    Scratch() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("milkit_capi_" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

mil_dataset* make_cohort(const Scratch& dir, uint32_t n_patients, uint32_t tiles, uint32_t d, uint64_t seed) {
    mil_synth_config c;
    mil_synth_config_default(&c);
    c.n_patients = n_patients;
    c.tiles_min = c.tiles_max = tiles;
    c.d = d;
    c.signal_dims = d < 4 ? d : 4;
    c.witness_rate = 0.3;
    c.signal_shift = 3.0;
    c.n_centers = 4;
    c.with_coords = 1;
    c.seed = seed;
    REQUIRE(mil_synth_write(&c, dir.path.string().c_str()) == MIL_OK);
    mil_dataset* ds = nullptr;
    REQUIRE(mil_dataset_load((dir / "manifest.csv").c_str(), &ds) == MIL_OK);
    return ds;
}

}  // namespace

TEST_CASE("status names and version") {
    CHECK(std::string(mil_status_name(MIL_OK)) == "ok");
    CHECK(std::string(mil_status_name(MIL_ERR_CORRUPT)) == "corrupt file");
    CHECK(std::string(mil_version()).size() > 0);
}

TEST_CASE("null arguments are rejected") {
    mil_dataset* ds = nullptr;
    CHECK(mil_dataset_load(nullptr, &ds) == MIL_ERR_INVALID_ARGUMENT);
    CHECK(std::string(mil_last_error()).find("null") != std::string::npos);
    CHECK(mil_dataset_get_info(nullptr, nullptr) == MIL_ERR_INVALID_ARGUMENT);
    mil_model_kind kind;
    CHECK(mil_parse_model_kind("chowder", &kind) == MIL_OK);
    CHECK(kind == MIL_CHOWDER);
    CHECK(mil_parse_model_kind("resnet", &kind) == MIL_ERR_VALIDATION);
    mil_dataset_free(nullptr);
    mil_model_free(nullptr);
}

TEST_CASE("dataset info") {
    Scratch dir;
    mil_dataset* ds = make_cohort(dir, 12, 15, 5, 1);
    mil_dataset_info info;
    REQUIRE(mil_dataset_get_info(ds, &info) == MIL_OK);
    CHECK(info.n_slides == 12);
    CHECK(info.n_patients == 12);
    CHECK(info.n_centers == 4);
    CHECK(info.n_positive_patients == 6);
    CHECK(info.n_negative_patients == 6);
    CHECK(info.min_tiles == 15);
    CHECK(info.max_tiles == 15);
    CHECK(info.feature_dim == 5);
    CHECK(info.has_coords == 1);
    mil_dataset_free(ds);
}

TEST_CASE("file errors map to distinct codes") {
    Scratch dir;
    mil_model* m = nullptr;
    CHECK(mil_model_load((dir / "missing.milc").c_str(), &m) == MIL_ERR_IO);
    CHECK(m == nullptr);
    {
        std::ofstream out(dir / "bad.milc", std::ios::binary);
        out << "NOPE and some more bytes";
    }
    CHECK(mil_model_load((dir / "bad.milc").c_str(), &m) == MIL_ERR_FORMAT);

    mil_dataset* ds = make_cohort(dir, 8, 10, 3, 2);
    mil_model_spec spec;
    mil_model_spec_default(&spec, MIL_DEEPMIL);
    spec.n_hidden = 4;
    mil_train_config cfg;
    mil_train_config_default(&cfg);
    cfg.epochs = 2;
    REQUIRE(mil_train(ds, &spec, &cfg, &m) == MIL_OK);
    REQUIRE(mil_model_save(m, (dir / "ok.milc").c_str()) == MIL_OK);
    const std::string bytes = slurp(dir / "ok.milc");
    {
        std::ofstream out(dir / "cut.milc", std::ios::binary);
        out << bytes.substr(0, bytes.size() / 2);
    }
    mil_model* cut = nullptr;
    CHECK(mil_model_load((dir / "cut.milc").c_str(), &cut) == MIL_ERR_CORRUPT);
    mil_model_free(m);
    mil_dataset_free(ds);
}

TEST_CASE("train, save, load, predict") {
    Scratch dir;
    mil_dataset* ds = make_cohort(dir, 20, 20, 6, 3);
    mil_model_spec spec;
    mil_model_spec_default(&spec, MIL_CHOWDER);
    spec.r = 2;
    mil_train_config cfg;
    mil_train_config_default(&cfg);
    cfg.epochs = 3;
    cfg.seed = 5;
    mil_model* m = nullptr;
    REQUIRE(mil_train(ds, &spec, &cfg, &m) == MIL_OK);
    double trace[3];
    CHECK(mil_model_loss_trace(m, trace, 3) == 3);
    for (double v : trace) CHECK(std::isfinite(v));
    REQUIRE(mil_model_save(m, (dir / "m.milc").c_str()) == MIL_OK);
    REQUIRE(mil_model_write_loss_trace(m, (dir / "trace.csv").c_str()) == MIL_OK);
    CHECK(slurp(dir / "trace.csv").rfind("epoch,mean_train_loss\n", 0) == 0);
    CHECK(count_lines(slurp(dir / "trace.csv")) == 4);

    mil_model* loaded = nullptr;
    REQUIRE(mil_model_load((dir / "m.milc").c_str(), &loaded) == MIL_OK);
    mil_model_spec back;
    size_t dim = 0;
    REQUIRE(mil_model_get_spec(loaded, &back, &dim) == MIL_OK);
    CHECK(back.kind == MIL_CHOWDER);
    CHECK(back.r == 2);
    CHECK(dim == 6);
    CHECK(mil_model_loss_trace(loaded, nullptr, 0) == 0);

    const mil_model* both[] = {m, loaded};
    REQUIRE(mil_predict(both, 1, ds, (dir / "s1.csv").c_str(), (dir / "p1.csv").c_str()) == MIL_OK);
    REQUIRE(mil_predict(both, 2, ds, (dir / "s2.csv").c_str(), (dir / "p2.csv").c_str()) == MIL_OK);
    // Median of two identical models is the model itself.
    CHECK(slurp(dir / "p1.csv") == slurp(dir / "p2.csv"));
    CHECK(count_lines(slurp(dir / "p1.csv")) == 21);

    mil_eval_result ev;
    REQUIRE(mil_evaluate_csv((dir / "p1.csv").c_str(), (dir / "report.txt").c_str(), &ev) == MIL_OK);
    CHECK(ev.n_pos == 10);
    CHECK(ev.n_neg == 10);
    CHECK(ev.ci95_lo <= ev.auc);
    CHECK(ev.auc <= ev.ci95_hi);

    mil_compare_result cmp;
    REQUIRE(mil_compare_csv((dir / "p1.csv").c_str(), (dir / "p2.csv").c_str(), nullptr, &cmp) == MIL_OK);
    CHECK(cmp.degenerate == 1);
    CHECK(cmp.p_value == 1.0);

    mil_model_free(m);
    mil_model_free(loaded);
    mil_dataset_free(ds);
}

TEST_CASE("dimension mismatch in predict") {
    Scratch a;
    Scratch b;
    mil_dataset* ds4 = make_cohort(a, 6, 5, 4, 1);
    mil_dataset* ds5 = make_cohort(b, 6, 5, 5, 1);
    mil_model_spec spec;
    mil_model_spec_default(&spec, MIL_MEANPOOL);
    mil_train_config cfg;
    mil_train_config_default(&cfg);
    cfg.epochs = 1;
    mil_model* m = nullptr;
    REQUIRE(mil_train(ds4, &spec, &cfg, &m) == MIL_OK);
    const mil_model* models[] = {m};
    CHECK(mil_predict(models, 1, ds5, nullptr, nullptr) == MIL_ERR_DIMENSION);
    const std::string msg = mil_last_error();
    CHECK(msg.find("D=4") != std::string::npos);
    CHECK(msg.find("D=5") != std::string::npos);
    mil_model_free(m);
    mil_dataset_free(ds4);
    mil_dataset_free(ds5);
}

TEST_CASE("chowder size violation is a validation error") {
    Scratch dir;
    mil_dataset* ds = make_cohort(dir, 6, 10, 3, 1);
    mil_model_spec spec;
    mil_model_spec_default(&spec, MIL_CHOWDER);
    spec.r = 6;
    mil_train_config cfg;
    mil_train_config_default(&cfg);
    mil_model* m = nullptr;
    CHECK(mil_train(ds, &spec, &cfg, &m) == MIL_ERR_VALIDATION);
    CHECK(m == nullptr);
    cfg.epochs = 0;
    spec.r = 2;
    CHECK(mil_train(ds, &spec, &cfg, &m) == MIL_ERR_VALIDATION);
    mil_dataset_free(ds);
}

TEST_CASE("explain writes tile scores") {
    Scratch dir;
    mil_dataset* ds = make_cohort(dir, 6, 9, 3, 4);
    mil_model_spec spec;
    mil_model_spec_default(&spec, MIL_CHOWDER);
    spec.r = 2;
    mil_train_config cfg;
    mil_train_config_default(&cfg);
    cfg.epochs = 1;
    mil_model* m = nullptr;
    REQUIRE(mil_train(ds, &spec, &cfg, &m) == MIL_OK);
    REQUIRE(mil_explain(m, ds, "P1_S1", (dir / "t.csv").c_str(), (dir / "e.csv").c_str()) == MIL_OK);
    CHECK(count_lines(slurp(dir / "t.csv")) == 10);
    CHECK(count_lines(slurp(dir / "e.csv")) == 5);
    CHECK(mil_explain(m, ds, "nope", (dir / "t.csv").c_str(), nullptr) == MIL_ERR_VALIDATION);
    mil_model_free(m);
    mil_dataset_free(ds);
}

TEST_CASE("grid search and cross-validation") {
    Scratch dir;
    mil_dataset* ds = make_cohort(dir, 30, 10, 4, 6);
    mil_model_spec spec;
    mil_model_spec_default(&spec, MIL_MEANPOOL);
    mil_train_config cfg;
    mil_train_config_default(&cfg);
    cfg.learning_rate = 0.05;
    cfg.epochs = 10;
    const double l2[] = {0.0, 0.5};
    const uint32_t epochs[] = {5, 10};
    mil_grid_spec grid{};
    grid.l2_c_values = l2;
    grid.n_l2_c_values = 2;
    grid.epoch_values = epochs;
    grid.n_epoch_values = 2;
    grid.holdout_fraction = 0.2;
    mil_model_spec best;
    uint32_t best_epochs = 0;
    REQUIRE(mil_grid_search(ds, &spec, &grid, &cfg, (dir / "grid.csv").c_str(), &best, &best_epochs) == MIL_OK);
    CHECK(count_lines(slurp(dir / "grid.csv")) == 5);
    CHECK((best_epochs == 5 || best_epochs == 10));

    mil_cv_config cv{MIL_SPLIT_RANDOM, 3, 2, 1, 9};
    mil_cv_result res;
    const std::string out = dir / "cv";
    REQUIRE(mil_cross_validate(ds, &spec, &cfg, &cv, nullptr, out.c_str(), &res) == MIL_OK);
    CHECK(res.folds_total == 6);
    CHECK(res.folds_used == 6);
    CHECK(count_lines(slurp(out + "/folds.csv")) == 7);
    CHECK(fs::exists(out + "/plans.json"));
    CHECK(fs::exists(out + "/fold_r1_f2.milc"));
    CHECK(fs::exists(out + "/test_predictions_r0_f0.csv"));

    mil_cv_config center{MIL_SPLIT_CENTER, 5, 1, 1, 9};
    CHECK(mil_cross_validate(ds, &spec, &cfg, &center, nullptr, out.c_str(), &res) == MIL_ERR_VALIDATION);
    mil_dataset_free(ds);
}

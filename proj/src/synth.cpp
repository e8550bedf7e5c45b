#include "milkit/synth.hpp"

#include "milkit/errors.hpp"
#include "milkit/fileio.hpp"
#include "milkit/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace milkit {

namespace {

constexpr std::uint64_t kMetaStream = 0;
constexpr std::uint64_t kBagStreamBase = 1;
constexpr std::uint64_t kShuffleLabelsStream = 77;

std::string padded(char prefix, int value, int total) {
    const int width = static_cast<int>(std::to_string(std::max(total, 1)).size());
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%c%0*d", prefix, width, value);
    return buf;
}

int draw(const CountRange& range, Rng& rng) {
    std::uniform_int_distribution<int> dist(range.min, range.max);
    return dist(rng);
}

}  // namespace

void validate_config(const SynthConfig& c) {
    auto fail = [](const std::string& msg) { throw ValidationError("synth: " + msg); };
    if (c.n_patients < 1) fail("n_patients must be >= 1");
    if (c.slides_per_patient.min < 1 || c.slides_per_patient.max < c.slides_per_patient.min) {
        fail("slides_per_patient must satisfy 1 <= min <= max");
    }
    if (c.tiles_per_slide.min < 1 || c.tiles_per_slide.max < c.tiles_per_slide.min) {
        fail("tiles_per_slide must satisfy 1 <= min <= max");
    }
    if (c.d < 1) fail("d must be >= 1");
    if (!(c.witness_rate > 0.0 && c.witness_rate <= 1.0)) fail("witness_rate must lie in (0, 1]");
    if (!std::isfinite(c.signal_shift)) fail("signal_shift must be finite");
    if (c.signal_dims < 1 || c.signal_dims > c.d) fail("signal_dims must lie in [1, d]");
    if (!(c.positive_fraction > 0.0 && c.positive_fraction < 1.0)) fail("positive_fraction must lie in (0, 1)");
    if (c.n_centers < 1) fail("n_centers must be >= 1");
    if (!(c.center_shift >= 0.0) || !std::isfinite(c.center_shift)) fail("center_shift must be finite and >= 0");
    if (c.witness_rate * c.tiles_per_slide.min < 1.0 - 1e-9) {
        fail("witness_rate * min tiles_per_slide must be >= 1 so every positive bag has a witness");
    }
}

int witness_count(double witness_rate, Index n) {
    // The small slack keeps products such as 0.07 * 100 from rounding up to 8.
    const double raw = witness_rate * static_cast<double>(n) - 1e-9;
    return static_cast<int>(std::clamp<double>(std::ceil(raw), 1.0, static_cast<double>(n)));
}

SynthResult generate(const SynthConfig& c) {
    validate_config(c);
    Rng meta = make_rng(c.seed, kMetaStream);

    const int n_pos = std::clamp(static_cast<int>(std::lround(c.positive_fraction * c.n_patients)), 0, c.n_patients);
    std::vector<int> order(static_cast<std::size_t>(c.n_patients));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), meta);
    std::vector<int> label(order.size(), 0);
    for (int i = 0; i < n_pos; ++i) label[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;

    std::shuffle(order.begin(), order.end(), meta);
    std::vector<int> center(order.size(), 0);
    for (std::size_t i = 0; i < order.size(); ++i) {
        center[static_cast<std::size_t>(order[i])] = static_cast<int>(i % static_cast<std::size_t>(c.n_centers));
    }

    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Eigen::RowVectorXd> offsets;
    for (int k = 0; k < c.n_centers; ++k) {
        Eigen::RowVectorXd dir(c.d);
        for (int j = 0; j < c.d; ++j) dir[j] = normal(meta);
        const double norm = dir.norm();
        offsets.push_back(norm > 0.0 ? Eigen::RowVectorXd(dir * (c.center_shift / norm))
                                     : Eigen::RowVectorXd::Zero(c.d));
    }

    std::vector<Bag> bags;
    SynthResult result;
    for (int p = 0; p < c.n_patients; ++p) {
        const int slides = draw(c.slides_per_patient, meta);
        for (int s = 0; s < slides; ++s) {
            const int n = draw(c.tiles_per_slide, meta);
            Rng rng = make_rng(c.seed, kBagStreamBase + bags.size());
            std::normal_distribution<double> tile_normal(0.0, 1.0);
            Bag bag;
            bag.patient_id = padded('P', p + 1, c.n_patients);
            bag.slide_id = bag.patient_id + "_S" + std::to_string(s + 1);
            bag.center_id = padded('C', center[static_cast<std::size_t>(p)] + 1, c.n_centers);
            bag.label = label[static_cast<std::size_t>(p)];

            Eigen::MatrixXd x(n, c.d);
            for (Index i = 0; i < x.rows(); ++i) {
                for (Index j = 0; j < x.cols(); ++j) x(i, j) = tile_normal(rng);
            }
            x.rowwise() += offsets[static_cast<std::size_t>(center[static_cast<std::size_t>(p)])];

            std::vector<std::uint8_t> mask(static_cast<std::size_t>(n), 0);
            if (*bag.label == 1) {
                std::vector<int> all(static_cast<std::size_t>(n));
                std::iota(all.begin(), all.end(), 0);
                std::vector<int> chosen;
                std::sample(all.begin(), all.end(), std::back_inserter(chosen), witness_count(c.witness_rate, n), rng);
                for (int i : chosen) {
                    mask[static_cast<std::size_t>(i)] = 1;
                    x.row(i).head(c.signal_dims).array() += c.signal_shift;
                }
            }
            bag.features = x.cast<float>();
            if (c.with_coords) {
                const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
                CoordMatrix coords(n, 2);
                for (int i = 0; i < n; ++i) {
                    coords(i, 0) = static_cast<float>(i % side);
                    coords(i, 1) = static_cast<float>(i / side);
                }
                bag.coords = std::move(coords);
            }
            bags.push_back(std::move(bag));
            result.witness.push_back(std::move(mask));
        }
    }
    result.dataset = Dataset("synthetic", std::move(bags));
    return result;
}

void write_synth(const SynthResult& result, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "bags");
    std::vector<ManifestRow> rows;
    std::string witness = "slide_id,tile_index,is_witness\n";
    const auto& bags = result.dataset.bags();
    for (std::size_t b = 0; b < bags.size(); ++b) {
        const auto& bag = bags[b];
        const std::string rel = "bags/" + bag.slide_id + ".milf";
        write_bag(bag, out_dir / rel);
        rows.push_back({bag.slide_id, bag.patient_id, bag.center_id, bag.label, rel});
        for (std::size_t i = 0; i < result.witness[b].size(); ++i) {
            witness += bag.slide_id + ',' + std::to_string(i) + ',' + (result.witness[b][i] ? "1" : "0") + '\n';
        }
    }
    write_manifest(rows, out_dir / "manifest.csv");
    write_file_atomic(out_dir / "witness.csv", witness);
}

Dataset shuffle_patient_labels(const Dataset& dataset, std::uint64_t seed) {
    std::vector<std::string> ids;
    std::vector<int> labels;
    for (const auto& p : dataset.patients()) {
        if (auto l = dataset.patient_label(p)) {
            ids.push_back(p);
            labels.push_back(*l);
        }
    }
    Rng rng = make_rng(seed, kShuffleLabelsStream);
    std::shuffle(labels.begin(), labels.end(), rng);
    std::map<std::string, int> assignment;
    for (std::size_t i = 0; i < ids.size(); ++i) assignment[ids[i]] = labels[i];
    return dataset.with_patient_labels(assignment);
}

}  // namespace milkit

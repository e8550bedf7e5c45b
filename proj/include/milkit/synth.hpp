#pragma once

#include "milkit/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace milkit {

struct CountRange {
    int min = 1;
    int max = 1;
};

/// Planted-signal cohort. Tiles are standard normal in d dims plus a
/// per-center offset; in positive bags a ceil(witness_rate * N) subset of
/// tiles is shifted by signal_shift on the first signal_dims dims.
struct SynthConfig {
    int n_patients = 100;
    CountRange slides_per_patient{1, 1};
    CountRange tiles_per_slide{100, 100};
    int d = 32;
    double witness_rate = 0.2;
    double signal_shift = 2.0;
    int signal_dims = 4;
    double positive_fraction = 0.5;
    int n_centers = 1;
    double center_shift = 0.0;
    /// Attach tile positions on a square grid.
    bool with_coords = false;
    std::uint64_t seed = 0;
};

void validate_config(const SynthConfig& config);

struct SynthResult {
    Dataset dataset;
    /// witness[b][i] is 1 when tile i of bag b carries the planted signal.
    std::vector<std::vector<std::uint8_t>> witness;
};

/// Number of witness tiles in a positive bag of n tiles.
int witness_count(double witness_rate, Index n);

SynthResult generate(const SynthConfig& config);

/// Writes `bags/<slide>.milf`, `manifest.csv` and `witness.csv`
/// (`slide_id,tile_index,is_witness`) under `out_dir`.
void write_synth(const SynthResult& result, const std::filesystem::path& out_dir);

/// Null control: patient labels permuted by a seeded shuffle.
Dataset shuffle_patient_labels(const Dataset& dataset, std::uint64_t seed);

}  // namespace milkit

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace milkit {

using Index = Eigen::Index;

/// Tile features as stored on disk: N rows of D 32-bit floats.
using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Tile centre positions, N rows of (x, y).
using CoordMatrix = Eigen::Matrix<float, Eigen::Dynamic, 2, Eigen::RowMajor>;

/// Binary slide label. 0 = MSS (negative), 1 = MSI (positive).
using Label = std::optional<int>;

/// One slide: its tile-feature matrix plus identifying metadata.
struct Bag {
    std::string slide_id;
    std::string patient_id;
    std::string center_id;
    Label label;
    FeatureMatrix features;
    std::optional<CoordMatrix> coords;

    Index num_tiles() const { return features.rows(); }
    Index dim() const { return features.cols(); }
};

inline constexpr char kBagMagic[4] = {'M', 'I', 'L', 'F'};
inline constexpr std::uint32_t kBagFormatVersion = 1;

/// Throws ValidationError unless N >= 1, D >= 1, every value is finite,
/// coords (if any) have N rows and the label (if any) is 0 or 1.
void validate_bag(const Bag& bag);

/// Writes the matrices of `bag` in the little-endian MILF layout.
/// Metadata (ids, label) lives in the manifest, not in the bag file.
void write_bag(const Bag& bag, const std::filesystem::path& path);

/// Reads a MILF file. Ids and label of the returned bag are empty.
Bag read_bag(const std::filesystem::path& path);

}  // namespace milkit

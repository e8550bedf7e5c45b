#include "milkit/bag.hpp"

#include "milkit/errors.hpp"
#include "milkit/fileio.hpp"

#include <cmath>

namespace milkit {

namespace {

constexpr std::uint32_t kFlagCoords = 1u;

template <typename Matrix>
bool all_finite(const Matrix& m) {
    const float* p = m.data();
    for (Index i = 0; i < m.size(); ++i) {
        if (!std::isfinite(p[i])) return false;
    }
    return true;
}

std::string describe(const Bag& bag) {
    return bag.slide_id.empty() ? std::string("bag") : "bag '" + bag.slide_id + "'";
}

}  // namespace

void validate_bag(const Bag& bag) {
    if (bag.num_tiles() < 1 || bag.dim() < 1) {
        throw ValidationError(describe(bag) + ": needs N >= 1 and D >= 1, got N=" +
                              std::to_string(bag.num_tiles()) + " D=" + std::to_string(bag.dim()));
    }
    if (!all_finite(bag.features)) {
        throw ValidationError(describe(bag) + ": features contain NaN or Inf");
    }
    if (bag.coords) {
        if (bag.coords->rows() != bag.num_tiles()) {
            throw ValidationError(describe(bag) + ": coords have " + std::to_string(bag.coords->rows()) +
                                  " rows for " + std::to_string(bag.num_tiles()) + " tiles");
        }
        if (!all_finite(*bag.coords)) {
            throw ValidationError(describe(bag) + ": coords contain NaN or Inf");
        }
    }
    if (bag.label && *bag.label != 0 && *bag.label != 1) {
        throw ValidationError(describe(bag) + ": label must be 0 or 1");
    }
}

void write_bag(const Bag& bag, const std::filesystem::path& path) {
    validate_bag(bag);
    ByteWriter w;
    w.put_bytes(std::string_view(kBagMagic, 4));
    w.put<std::uint32_t>(kBagFormatVersion);
    w.put<std::uint64_t>(static_cast<std::uint64_t>(bag.num_tiles()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(bag.dim()));
    w.put<std::uint32_t>(bag.coords ? kFlagCoords : 0u);
    if (bag.coords) {
        const float* c = bag.coords->data();
        for (Index i = 0; i < bag.coords->size(); ++i) w.put<float>(c[i]);
    }
    const float* f = bag.features.data();
    for (Index i = 0; i < bag.features.size(); ++i) w.put<float>(f[i]);
    write_file_atomic(path, w.str());
}

Bag read_bag(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    ByteReader r(bytes, "bag file '" + path.string() + "'");
    if (bytes.size() < 4 || r.get_bytes(4) != std::string_view(kBagMagic, 4)) {
        throw FormatError("bag file '" + path.string() + "': bad magic (expected MILF)");
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kBagFormatVersion) {
        throw FormatError("bag file '" + path.string() + "': unsupported version " + std::to_string(version));
    }
    const auto n = r.get<std::uint64_t>();
    const auto d = r.get<std::uint32_t>();
    const auto flags = r.get<std::uint32_t>();
    if ((flags & ~kFlagCoords) != 0) {
        throw FormatError("bag file '" + path.string() + "': unknown flag bits");
    }
    const bool has_coords = (flags & kFlagCoords) != 0;
    const std::uint64_t floats = n * (static_cast<std::uint64_t>(d) + (has_coords ? 2 : 0));
    if (d != 0 && n > r.remaining() / 4 / d) {
        throw CorruptionError("bag file '" + path.string() + "': declares N=" + std::to_string(n) +
                              " but payload is truncated");
    }
    if (r.remaining() != floats * 4) {
        throw CorruptionError("bag file '" + path.string() + "': payload size " +
                              std::to_string(r.remaining()) + " does not match N=" + std::to_string(n) +
                              " D=" + std::to_string(d));
    }

    Bag bag;
    if (has_coords) {
        CoordMatrix coords(static_cast<Index>(n), 2);
        float* c = coords.data();
        for (Index i = 0; i < coords.size(); ++i) c[i] = r.get<float>();
        bag.coords = std::move(coords);
    }
    bag.features.resize(static_cast<Index>(n), static_cast<Index>(d));
    float* f = bag.features.data();
    for (Index i = 0; i < bag.features.size(); ++i) f[i] = r.get<float>();
    validate_bag(bag);
    return bag;
}

}  // namespace milkit

#include "milkit/errors.hpp"
#include "milkit/fileio.hpp"
#include "milkit/models.hpp"

namespace milkit {

// Layout (little-endian):
//   "MILC" | u32 version | u32 kind | u64 input_dim | u32 r | u32 n_hidden | f64 l2_c
//   | u32 scorer_hidden | u32 aggregator_hidden1 | u32 aggregator_hidden2
//   | u32 tensor_count | per tensor: u32 name_len, name, u64 rows, u64 cols, rows*cols f64 row-major
std::string encode_checkpoint(const Model& model) {
    const auto& s = model.spec;
    ByteWriter w;
    w.put_bytes(std::string_view(kCheckpointMagic, 4));
    w.put<std::uint32_t>(kCheckpointFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.kind));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(model.input_dim));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.r));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.n_hidden));
    w.put<double>(s.l2_c);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.scorer_hidden));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.aggregator_hidden1));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.aggregator_hidden2));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(model.params.size()));
    for (const auto& t : model.params.tensors()) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.name.size()));
        w.put_bytes(t.name);
        w.put<std::uint64_t>(static_cast<std::uint64_t>(t.value.rows()));
        w.put<std::uint64_t>(static_cast<std::uint64_t>(t.value.cols()));
        for (Index i = 0; i < t.value.rows(); ++i) {
            for (Index j = 0; j < t.value.cols(); ++j) w.put<double>(t.value(i, j));
        }
    }
    return w.str();
}

Model decode_checkpoint(std::string_view bytes, const std::string& what) {
    ByteReader r(bytes, what);
    if (bytes.size() < 4 || r.get_bytes(4) != std::string_view(kCheckpointMagic, 4)) {
        throw FormatError(what + ": bad magic (expected MILC)");
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointFormatVersion) {
        throw FormatError(what + ": unsupported version " + std::to_string(version));
    }
    const auto kind = r.get<std::uint32_t>();
    if (kind > 2) throw FormatError(what + ": unknown model kind " + std::to_string(kind));

    ModelSpec spec;
    spec.kind = static_cast<ModelKind>(kind);
    const auto input_dim = static_cast<Index>(r.get<std::uint64_t>());
    spec.r = static_cast<int>(r.get<std::uint32_t>());
    spec.n_hidden = static_cast<int>(r.get<std::uint32_t>());
    spec.l2_c = r.get<double>();
    spec.scorer_hidden = static_cast<int>(r.get<std::uint32_t>());
    spec.aggregator_hidden1 = static_cast<int>(r.get<std::uint32_t>());
    spec.aggregator_hidden2 = static_cast<int>(r.get<std::uint32_t>());

    // Rebuild the expected layout and fill it; any mismatch means the file
    // does not describe the model its header claims.
    Rng unused(0);
    Model model = init_model(spec, input_dim, unused);
    const auto count = r.get<std::uint32_t>();
    if (count != model.params.size()) {
        throw FormatError(what + ": expected " + std::to_string(model.params.size()) + " tensors, found " +
                          std::to_string(count));
    }
    for (auto& t : model.params.tensors()) {
        const auto name_len = r.get<std::uint32_t>();
        const auto name = r.get_bytes(name_len);
        const auto rows = static_cast<Index>(r.get<std::uint64_t>());
        const auto cols = static_cast<Index>(r.get<std::uint64_t>());
        if (name != t.name || rows != t.value.rows() || cols != t.value.cols()) {
            throw FormatError(what + ": tensor '" + std::string(name) + "' does not match expected '" + t.name +
                              "' [" + std::to_string(t.value.rows()) + "x" + std::to_string(t.value.cols()) + "]");
        }
        for (Index i = 0; i < rows; ++i) {
            for (Index j = 0; j < cols; ++j) t.value(i, j) = r.get<double>();
        }
    }
    if (r.remaining() != 0) throw FormatError(what + ": trailing bytes after last tensor");
    return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    write_file_atomic(path, encode_checkpoint(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_file(path), "checkpoint '" + path.string() + "'");
}

}  // namespace milkit

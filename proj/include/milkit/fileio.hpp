#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

namespace milkit {

/// Writes `contents` to a sibling temp file then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);
std::string format_float(float value);
double parse_double(std::string_view text);

/// Splits one CSV line on commas. No quoting support: ids must not contain commas.
std::vector<std::string> split_csv_line(std::string_view line);
/// Splits text into lines, accepting `\n` or `\r\n`; drops a trailing empty line.
std::vector<std::string> split_lines(std::string_view text);

/// Append-only little-endian encoder.
class ByteWriter {
public:
    template <typename T>
    void put(T value) {
        static_assert(std::is_arithmetic_v<T>);
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            std::reverse(raw, raw + sizeof(T));
        }
        buffer_.append(reinterpret_cast<const char*>(raw), sizeof(T));
    }
    void put_bytes(std::string_view bytes) { buffer_.append(bytes); }

    const std::string& str() const { return buffer_; }

private:
    std::string buffer_;
};

/// Little-endian decoder over a byte buffer. Running past the end throws
/// CorruptionError mentioning `what`.
class ByteReader {
public:
    ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

    template <typename T>
    T get() {
        static_assert(std::is_arithmetic_v<T>);
        require(sizeof(T));
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, data_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            std::reverse(raw, raw + sizeof(T));
        }
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }
    std::string_view get_bytes(std::size_t n) {
        require(n);
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void require(std::size_t n) const;

    std::string_view data_;
    std::size_t pos_ = 0;
    std::string what_;
};

}  // namespace milkit

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "motorattn/types.hpp"

namespace motorattn::io {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

/// Appends little-endian scalars to a byte buffer.
class ByteWriter {
public:
    void magic(std::string_view tag) { bytes_.insert(bytes_.end(), tag.begin(), tag.end()); }

    template <typename T>
    void put(T value) {
        static_assert(std::is_arithmetic_v<T>);
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
    }

    template <typename T>
    void put_all(std::span<const T> values) {
        for (const T& v : values) put(v);
    }

    void put_string(std::string_view s) {
        put(static_cast<std::uint32_t>(s.size()));
        bytes_.insert(bytes_.end(), s.begin(), s.end());
    }

    [[nodiscard]] const std::vector<unsigned char>& bytes() const { return bytes_; }

private:
    std::vector<unsigned char> bytes_;
};

/// Bounds-checked little-endian reader; every overrun raises `Error(context + ...)`.
class ByteReader {
public:
    ByteReader(std::span<const unsigned char> bytes, std::string context)
        : bytes_(bytes), context_(std::move(context)) {}

    bool magic(std::string_view tag) {
        need(tag.size());
        const bool ok = std::memcmp(bytes_.data() + pos_, tag.data(), tag.size()) == 0;
        pos_ += tag.size();
        return ok;
    }

    template <typename T>
    T get() {
        static_assert(std::is_arithmetic_v<T>);
        need(sizeof(T));
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }

    template <typename T>
    std::vector<T> get_all(std::size_t n) {
        need(n * sizeof(T));
        std::vector<T> out(n);
        for (auto& v : out) v = get<T>();
        return out;
    }

    std::string get_string() {
        const auto n = get<std::uint32_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }

    /// Throws unless `n` more bytes are available.
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw Error(context_);
    }

private:
    std::span<const unsigned char> bytes_;
    std::size_t pos_ = 0;
    std::string context_;
};

std::vector<unsigned char> read_file(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const unsigned char> bytes);

/// FNV-1a 64-bit digest rendered as 16 hex digits.
std::string checksum_hex(std::span<const unsigned char> bytes);

}  // namespace motorattn::io

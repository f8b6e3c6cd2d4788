#pragma once

// Little-endian tensor blob shared by bundles and checkpoints: arrays are
// appended back to back and addressed by (byte offset, element count).

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "drin/error.hpp"

namespace drin::blob {

template <typename T>
T to_little_endian(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &value, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
            std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        }
        std::memcpy(&value, bytes, sizeof(T));
    }
    return value;
}

/// Accumulates arrays in memory; `save` writes them out in one go.
class Writer {
public:
    template <typename T>
    std::uint64_t append(std::span<const T> values) {
        const std::uint64_t off = bytes_.size();
        bytes_.resize(bytes_.size() + values.size() * sizeof(T));
        unsigned char* dst = bytes_.data() + off;
        for (T v : values) {
            const T le = to_little_endian(v);
            std::memcpy(dst, &le, sizeof(T));
            dst += sizeof(T);
        }
        return off;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + path.string() + " for writing");
        }
        out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
        if (!out) {
            throw IoError("write failed for " + path.string());
        }
    }

    std::uint64_t size() const noexcept { return bytes_.size(); }

private:
    std::vector<unsigned char> bytes_;
};

/// Random-access reader with bounds and alignment checks.
class Reader {
public:
    Reader() = default;

    explicit Reader(const std::filesystem::path& path) : path_(path) {
        std::error_code ec;
        size_ = std::filesystem::file_size(path, ec);
        if (ec) {
            throw IoError("cannot stat " + path.string() + ": " + ec.message());
        }
        in_.open(path, std::ios::binary);
        if (!in_) {
            throw IoError("cannot open " + path.string());
        }
    }

    std::uint64_t size() const noexcept { return size_; }

    /// `what` names the field for error messages.
    template <typename T>
    std::vector<T> read(const std::string& what, std::uint64_t off, std::uint64_t len) {
        if (off % sizeof(T) != 0) {
            throw FormatError(what + ": offset " + std::to_string(off) + " is not " + std::to_string(sizeof(T)) +
                              "-byte aligned");
        }
        const std::uint64_t end = off + len * sizeof(T);
        if (end > size_ || end < off) {
            throw IoError(what + ": blob truncated in " + path_.string() + ", needs bytes up to " +
                              std::to_string(end) + " of " + std::to_string(size_),
                          static_cast<std::int64_t>(std::min(off, size_)));
        }
        std::vector<T> out(len);
        in_.seekg(static_cast<std::streamoff>(off));
        in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(len * sizeof(T)));
        if (!in_) {
            throw IoError(what + ": short read from " + path_.string(), static_cast<std::int64_t>(off));
        }
        for (T& v : out) {
            v = to_little_endian(v);
        }
        return out;
    }

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::uint64_t size_ = 0;
};

} // namespace drin::blob

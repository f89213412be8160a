#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "bci/error.hpp"

namespace bci::io {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; add byte swapping for this host");

class ByteWriter {
public:
    template <class T>
    void put(T value) {
        static_assert(std::is_arithmetic_v<T>);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }

    template <class T>
    void put_array(std::span<const T> values) {
        static_assert(std::is_arithmetic_v<T>);
        const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
        buf_.insert(buf_.end(), p, p + values.size_bytes());
    }

    void put_bytes(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

    // u32 length prefix followed by the bytes.
    void put_string32(std::string_view s) {
        put(static_cast<std::uint32_t>(s.size()));
        put_bytes(s);
    }

    const std::vector<std::uint8_t>& bytes() const { return buf_; }
    std::vector<std::uint8_t>& bytes() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

// Bounds-checked reader; running off the end raises CorruptFile.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    template <class T>
    T get() {
        static_assert(std::is_arithmetic_v<T>);
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    template <class T>
    void get_array(std::span<T> out) {
        static_assert(std::is_arithmetic_v<T>);
        need(out.size_bytes());
        std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
        pos_ += out.size_bytes();
    }

    std::string get_bytes(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    std::string get_string32() { return get_bytes(get<std::uint32_t>()); }

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (n > data_.size() - pos_) raise(ErrorKind::CorruptFile, "unexpected end of data");
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

// CRC-64/XZ over the given bytes.
std::uint64_t crc64(std::span<const std::uint8_t> data);

std::vector<std::uint8_t> read_file(const std::string& path);
// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> data);

}  // namespace bci::io

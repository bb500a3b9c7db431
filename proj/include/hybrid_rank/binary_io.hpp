#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "hybrid_rank/errors.hpp"

namespace hybrid_rank {

static_assert(std::endian::native == std::endian::little, "artifact formats assume a little-endian host");

/// Appends fixed-width little-endian values to a byte buffer.
class ByteWriter {
  public:
    template <typename T>
        requires std::is_arithmetic_v<T>
    void put(T value) {
        const auto* p = reinterpret_cast<const char*>(&value);
        m_buf.append(p, sizeof(T));
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    void put_array(std::span<const T> values) {
        m_buf.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
    }

    void put_bytes(std::string_view bytes) { m_buf.append(bytes); }

    void put_string(std::string_view s) {
        put(static_cast<std::uint32_t>(s.size()));
        m_buf.append(s);
    }

    [[nodiscard]] const std::string& bytes() const noexcept { return m_buf; }

  private:
    std::string m_buf;
};

/// Bounds-checked reader over a byte buffer; overruns raise FormatError.
class ByteReader {
  public:
    explicit ByteReader(std::string_view data) : m_data(data) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    T get() {
        need(sizeof(T));
        T value;
        std::memcpy(&value, m_data.data() + m_pos, sizeof(T));
        m_pos += sizeof(T);
        return value;
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    std::vector<T> get_array(std::size_t n) {
        if (n > (m_data.size() - m_pos) / sizeof(T)) {
            throw FormatError("truncated artifact payload");
        }
        std::vector<T> out(n);
        std::memcpy(out.data(), m_data.data() + m_pos, n * sizeof(T));
        m_pos += n * sizeof(T);
        return out;
    }

    std::string_view get_bytes(std::size_t n) {
        need(n);
        auto out = m_data.substr(m_pos, n);
        m_pos += n;
        return out;
    }

    std::string get_string() {
        const auto n = get<std::uint32_t>();
        return std::string(get_bytes(n));
    }

    [[nodiscard]] bool at_end() const noexcept { return m_pos == m_data.size(); }

  private:
    void need(std::size_t n) const {
        if (n > m_data.size() - m_pos) {
            throw FormatError("truncated artifact payload");
        }
    }

    std::string_view m_data;
    std::size_t m_pos = 0;
};

/// Every binary artifact starts with an 8-byte magic and a format version.
inline void write_header(ByteWriter& w, std::string_view magic, std::uint32_t version) {
    w.put_bytes(magic);
    w.put(version);
}

inline void read_header(ByteReader& r, std::string_view magic, std::uint32_t version) {
    if (r.get_bytes(magic.size()) != magic) {
        throw FormatError("bad artifact magic, expected " + std::string(magic));
    }
    const auto v = r.get<std::uint32_t>();
    if (v != version) {
        throw FormatError("unsupported artifact version " + std::to_string(v));
    }
}

}  // namespace hybrid_rank

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "nadir/error.hpp"

namespace nadir::binary {

namespace detail {

template <typename T>
T to_little(T value) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &value, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        std::memcpy(&value, bytes, sizeof(T));
    }
    return value;
}

}  // namespace detail

template <typename T>
void write(std::ostream& out, T value) {
    static_assert(std::is_arithmetic_v<T>);
    value = detail::to_little(value);
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

inline void write_f64s(std::ostream& out, std::span<const double> values) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size_bytes()));
    } else {
        for (double v : values) write(out, v);
    }
}

template <typename T>
T read(std::istream& in) {
    static_assert(std::is_arithmetic_v<T>);
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw Error(ErrorCode::Storage, "unexpected end of binary stream");
    return detail::to_little(value);
}

inline void read_f64s(std::istream& in, std::span<double> values) {
    if constexpr (std::endian::native == std::endian::little) {
        in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
        if (!in) throw Error(ErrorCode::Storage, "unexpected end of binary stream");
    } else {
        for (double& v : values) v = read<double>(in);
    }
}

}  // namespace nadir::binary

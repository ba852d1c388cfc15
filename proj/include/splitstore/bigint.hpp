// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include "splitstore/bytes.hpp"

namespace splitstore {

using Bigint = boost::multiprecision::cpp_int;

inline unsigned bit_length(const Bigint& v) {
    if (v == 0) return 0;
    return static_cast<unsigned>(boost::multiprecision::msb(v)) + 1;
}

// Minimal big-endian encoding: no leading zero bytes, zero encodes as one byte.
inline Bytes to_bytes_be(const Bigint& v) {
    if (v < 0) throw std::invalid_argument("to_bytes_be: negative value");
    if (v == 0) return Bytes{0x00};
    Bytes out;
    boost::multiprecision::export_bits(v, std::back_inserter(out), 8);
    return out;
}

inline Bigint from_bytes_be(std::span<const unsigned char> data) {
    Bigint v = 0;
    for (unsigned char b : data) {
        v <<= 8;
        v += b;
    }
    return v;
}

// Lowercase hex, big-endian, whole bytes, no leading zero bytes.
inline std::string to_hex(const Bigint& v) {
    return to_hex(to_bytes_be(v));
}

inline Bigint bigint_from_hex(std::string_view hex) {
    if (hex.empty()) throw std::invalid_argument("bigint_from_hex: empty");
    Bytes raw = from_hex(hex);
    return from_bytes_be(raw);
}

}  // namespace splitstore

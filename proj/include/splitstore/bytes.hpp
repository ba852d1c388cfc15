// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace splitstore {

using Bytes = std::vector<unsigned char>;

inline std::string to_hex(std::span<const unsigned char> data) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (unsigned char b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

inline std::string to_hex(const Bytes& data) {
    return to_hex(std::span<const unsigned char>(data.data(), data.size()));
}

inline int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

// Accepts odd-length input by an implicit leading zero nibble.
inline Bytes from_hex(std::string_view hex) {
    Bytes out;
    out.reserve(hex.size() / 2 + 1);
    size_t i = 0;
    if (hex.size() % 2 == 1) {
        int lo = hex_nibble(hex[0]);
        if (lo < 0) throw std::invalid_argument("from_hex: bad digit");
        out.push_back(static_cast<unsigned char>(lo));
        i = 1;
    }
    for (; i + 1 < hex.size() + 1 && i < hex.size(); i += 2) {
        int hi = hex_nibble(hex[i]);
        int lo = hex_nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("from_hex: bad digit");
        out.push_back(static_cast<unsigned char>((hi << 4) | lo));
    }
    return out;
}

inline Bytes be64(uint64_t v) {
    Bytes out(8);
    for (int i = 7; i >= 0; --i) {
        out[static_cast<size_t>(i)] = static_cast<unsigned char>(v & 0xff);
        v >>= 8;
    }
    return out;
}

inline void append(Bytes& dst, std::span<const unsigned char> src) {
    dst.insert(dst.end(), src.begin(), src.end());
}

inline Bytes bytes_of(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

// Fills a buffer from any UniformRandomBitGenerator; used where reproducible
// randomness is wired in (scenario seeds, fixtures).
template <typename Engine>
void fill_random(Engine& eng, std::span<unsigned char> out) {
    size_t i = 0;
    while (i < out.size()) {
        uint64_t word = static_cast<uint64_t>(eng());
        for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
            out[i] = static_cast<unsigned char>(word & 0xff);
            word >>= 8;
        }
    }
}

}  // namespace splitstore

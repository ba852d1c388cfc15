// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>

#include "splitstore/bytes.hpp"

namespace splitstore {

// SHA3-512 per FIPS 202: Keccak-f[1600], rate 72 bytes, domain suffix 0x06.
class Sha3_512 {
public:
    static constexpr size_t kDigestSize = 64;
    static constexpr size_t kBlockSize = 72;  // sponge rate; also the HMAC block size

    using Digest = std::array<unsigned char, kDigestSize>;

    void update(std::span<const unsigned char> data) {
        for (unsigned char b : data) {
            buf_[fill_++] = b;
            if (fill_ == kBlockSize) {
                absorb();
                fill_ = 0;
            }
        }
    }

    Digest finish() {
        buf_[fill_++] = 0x06;
        std::memset(buf_ + fill_, 0, kBlockSize - fill_);
        buf_[kBlockSize - 1] |= 0x80;
        absorb();
        Digest out;
        for (size_t i = 0; i < kDigestSize; ++i) {
            out[i] = static_cast<unsigned char>(st_[i / 8] >> (8 * (i % 8)));
        }
        return out;
    }

    static Digest digest(std::span<const unsigned char> data) {
        Sha3_512 h;
        h.update(data);
        return h.finish();
    }

private:
    uint64_t st_[25] = {};
    unsigned char buf_[kBlockSize] = {};
    size_t fill_ = 0;

    static uint64_t rotl(uint64_t v, int n) { return (v << n) | (v >> (64 - n)); }

    void absorb() {
        for (size_t i = 0; i < kBlockSize / 8; ++i) {
            uint64_t lane = 0;
            for (int b = 7; b >= 0; --b) lane = (lane << 8) | buf_[i * 8 + static_cast<size_t>(b)];
            st_[i] ^= lane;
        }
        permute(st_);
    }

    static void permute(uint64_t s[25]) {
        static constexpr uint64_t kRc[24] = {
            0x0000000000000001ULL, 0x0000000000008082ULL, 0x800000000000808aULL,
            0x8000000080008000ULL, 0x000000000000808bULL, 0x0000000080000001ULL,
            0x8000000080008081ULL, 0x8000000000008009ULL, 0x000000000000008aULL,
            0x0000000000000088ULL, 0x0000000080008009ULL, 0x000000008000000aULL,
            0x000000008000808bULL, 0x800000000000008bULL, 0x8000000000008089ULL,
            0x8000000000008003ULL, 0x8000000000008002ULL, 0x8000000000000080ULL,
            0x000000000000800aULL, 0x800000008000000aULL, 0x8000000080008081ULL,
            0x8000000000008080ULL, 0x0000000080000001ULL, 0x8000000080008008ULL};
        static constexpr int kPi[24] = {10, 7,  11, 17, 18, 3,  5,  16, 8,  21, 24, 4,
                                        15, 23, 19, 13, 12, 2,  20, 14, 22, 9,  6,  1};
        static constexpr int kRho[24] = {1,  3,  6,  10, 15, 21, 28, 36, 45, 55, 2,  14,
                                         27, 41, 56, 8,  25, 43, 62, 18, 39, 61, 20, 44};
        for (int round = 0; round < 24; ++round) {
            uint64_t c[5];
            for (int x = 0; x < 5; ++x) {
                c[x] = s[x] ^ s[x + 5] ^ s[x + 10] ^ s[x + 15] ^ s[x + 20];
            }
            for (int x = 0; x < 5; ++x) {
                uint64_t d = c[(x + 4) % 5] ^ rotl(c[(x + 1) % 5], 1);
                for (int y = 0; y < 25; y += 5) s[x + y] ^= d;
            }
            uint64_t cur = s[1];
            for (int t = 0; t < 24; ++t) {
                uint64_t tmp = s[kPi[t]];
                s[kPi[t]] = rotl(cur, kRho[t]);
                cur = tmp;
            }
            for (int y = 0; y < 25; y += 5) {
                uint64_t row[5];
                for (int x = 0; x < 5; ++x) row[x] = s[y + x];
                for (int x = 0; x < 5; ++x) {
                    s[y + x] = row[x] ^ (~row[(x + 1) % 5] & row[(x + 2) % 5]);
                }
            }
            s[0] ^= kRc[round];
        }
    }
};

// HMAC per RFC 2104 over SHA3-512 (block size 72 bytes).
inline Sha3_512::Digest hmac_sha3_512(std::span<const unsigned char> key,
                                      std::span<const unsigned char> message) {
    std::array<unsigned char, Sha3_512::kBlockSize> k{};
    if (key.size() > Sha3_512::kBlockSize) {
        auto kh = Sha3_512::digest(key);
        std::memcpy(k.data(), kh.data(), kh.size());
    } else {
        std::memcpy(k.data(), key.data(), key.size());
    }
    std::array<unsigned char, Sha3_512::kBlockSize> pad;
    for (size_t i = 0; i < pad.size(); ++i) pad[i] = static_cast<unsigned char>(k[i] ^ 0x36);
    Sha3_512 inner;
    inner.update(pad);
    inner.update(message);
    auto inner_digest = inner.finish();
    for (size_t i = 0; i < pad.size(); ++i) pad[i] = static_cast<unsigned char>(k[i] ^ 0x5c);
    Sha3_512 outer;
    outer.update(pad);
    outer.update(inner_digest);
    return outer.finish();
}

inline Bytes hmac_sha3_512_bytes(std::span<const unsigned char> key,
                                 std::span<const unsigned char> message) {
    auto d = hmac_sha3_512(key, message);
    return Bytes(d.begin(), d.end());
}

}  // namespace splitstore

// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>

#include "splitstore/modmath.hpp"
#include "splitstore/sha3.hpp"

namespace splitstore {

enum class Side { X, Y };

inline char side_char(Side s) { return s == Side::X ? 'x' : 'y'; }

// Long-lived 512-bit secret, one per storage side. Leaves the owner only in
// the two bootstrap messages.
struct MasterKey {
    static constexpr size_t kSize = 64;
    std::array<unsigned char, kSize> bytes{};
    Side side = Side::X;
};

template <typename Engine>
MasterKey gen_master_key(Engine& eng, Side side) {
    MasterKey mk;
    mk.side = side;
    fill_random(eng, mk.bytes);
    return mk;
}

inline MasterKey master_key_from_bytes(const Bytes& raw, Side side) {
    if (raw.size() != MasterKey::kSize) {
        throw std::invalid_argument("master key must be exactly 64 bytes");
    }
    MasterKey mk;
    mk.side = side;
    std::copy(raw.begin(), raw.end(), mk.bytes.begin());
    return mk;
}

inline Bytes master_key_bytes(const MasterKey& mk) {
    return Bytes(mk.bytes.begin(), mk.bytes.end());
}

// Generator powers feeding the HMAC for epoch j: exponents 2j-1 and 2j.
struct PrngInputs {
    Bigint e1;
    Bigint e2;
};

inline PrngInputs prng_inputs(const Bigint& g, uint64_t epoch, const FieldParams& params) {
    if (epoch == 0) throw std::invalid_argument("prng_inputs: epoch starts at 1");
    require_element(g, params, "prng_inputs");
    Bigint e1 = mod_exp(g, Bigint(2 * epoch - 1), params);
    return PrngInputs{e1, (e1 * g) % params.p};
}

// Rolls g^(2j-1), g^(2j) forward one epoch with two multiplications by g^2
// instead of fresh exponentiations. Agrees with prng_inputs by construction;
// cross-checked in tests.
struct PowerCache {
    Bigint g;
    Bigint g_squared;
    uint64_t epoch = 0;
    PrngInputs in;

    static PowerCache at(const Bigint& g, uint64_t epoch, const FieldParams& params) {
        PowerCache c;
        c.g = g;
        c.g_squared = (g * g) % params.p;
        c.epoch = epoch;
        c.in = prng_inputs(g, epoch, params);
        return c;
    }

    void advance(const FieldParams& params) {
        in.e1 = (in.e1 * g_squared) % params.p;
        in.e2 = (in.e2 * g_squared) % params.p;
        ++epoch;
    }

    PrngInputs peek_next(const FieldParams& params) const {
        return PrngInputs{(in.e1 * g_squared) % params.p, (in.e2 * g_squared) % params.p};
    }
};

// Ephemeral per-(record, epoch, side, block) key.
struct ContentKey {
    Bigint residue;
    uint64_t record_id = 0;
    uint64_t epoch = 0;
    Side side = Side::X;
    uint64_t block_index = 0;
};

namespace detail {

inline Bytes derive_message(const Bigint& power, uint64_t block_index, unsigned retry) {
    Bytes msg = to_bytes_be(power);
    append(msg, be64(block_index));
    if (retry > 0) msg.push_back(static_cast<unsigned char>(retry));
    return msg;
}

}  // namespace detail

// Two HMAC-SHA3-512 digests over the generator powers, concatenated to 1024
// bits and reduced mod p. A zero residue re-derives with a retry byte
// (probability ~2^-1024 per attempt, hard error after 255).
inline Bigint derive_residue(const MasterKey& mk, const PrngInputs& in, uint64_t block_index,
                             const FieldParams& params) {
    for (unsigned retry = 0; retry <= 255; ++retry) {
        auto d1 = hmac_sha3_512(mk.bytes, detail::derive_message(in.e1, block_index, retry));
        auto d2 = hmac_sha3_512(mk.bytes, detail::derive_message(in.e2, block_index, retry));
        Bytes raw(d1.begin(), d1.end());
        raw.insert(raw.end(), d2.begin(), d2.end());
        Bigint residue = from_bytes_be(raw) % params.p;
        if (residue != 0) return residue;
    }
    throw std::runtime_error("derive_residue: exhausted retry counter");
}

inline ContentKey derive_content_key(const MasterKey& mk, const Bigint& g, uint64_t record_id,
                                     uint64_t epoch, uint64_t block_index,
                                     const FieldParams& params) {
    PrngInputs in = prng_inputs(g, epoch, params);
    return ContentKey{derive_residue(mk, in, block_index, params), record_id, epoch, mk.side,
                      block_index};
}

// Pluggable derivation so tests can inject fixed key tables; the default is
// the HMAC path above.
using DeriveResidueFn = std::function<Bigint(const MasterKey&, const Bigint& g, uint64_t record_id,
                                             uint64_t epoch, uint64_t block_index,
                                             const FieldParams&)>;

inline DeriveResidueFn default_derive() {
    return [](const MasterKey& mk, const Bigint& g, uint64_t record_id, uint64_t epoch,
              uint64_t block_index, const FieldParams& params) {
        return derive_content_key(mk, g, record_id, epoch, block_index, params).residue;
    };
}

// Test-vector line: hex(master key) hex(g) i j block_index hex(residue).
struct KeyVector {
    Bytes master_key;
    Bigint g;
    uint64_t record_id = 0;
    uint64_t epoch = 0;
    uint64_t block_index = 0;
    Bigint residue;
};

inline void write_key_vectors(const std::vector<KeyVector>& vectors, std::ostream& os) {
    for (const auto& v : vectors) {
        os << to_hex(v.master_key) << " " << to_hex(v.g) << " " << v.record_id << " " << v.epoch
           << " " << v.block_index << " " << to_hex(v.residue) << "\n";
    }
}

inline std::vector<KeyVector> read_key_vectors(std::istream& is) {
    std::vector<KeyVector> out;
    std::string mk_hex, g_hex, residue_hex;
    uint64_t i = 0, j = 0, b = 0;
    while (is >> mk_hex >> g_hex >> i >> j >> b >> residue_hex) {
        out.push_back(KeyVector{from_hex(mk_hex), bigint_from_hex(g_hex), i, j, b,
                                bigint_from_hex(residue_hex)});
    }
    return out;
}

}  // namespace splitstore

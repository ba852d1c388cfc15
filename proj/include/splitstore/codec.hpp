// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "splitstore/modmath.hpp"

namespace splitstore {

struct CorruptRecordError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invertible byte-string <-> field-element mapping. Each block is the byte
// 0x01 followed by up to B payload bytes, read as a big-endian integer, so
// every block is nonzero and below 2^(p_bits-7) <= p.
struct BlockVector {
    std::vector<Bigint> blocks;
    uint64_t original_length = 0;
};

inline size_t payload_block_size(const FieldParams& params) {
    if (params.p_bits < 24) {
        throw std::invalid_argument("payload_block_size: field too small to encode bytes");
    }
    return (params.p_bits - 8) / 8 - 1;
}

inline BlockVector encode_record(std::span<const unsigned char> data, const FieldParams& params) {
    if (data.empty()) throw std::invalid_argument("encode_record: empty input");
    const size_t block_size = payload_block_size(params);
    BlockVector bv;
    bv.original_length = data.size();
    bv.blocks.reserve((data.size() + block_size - 1) / block_size);
    for (size_t off = 0; off < data.size(); off += block_size) {
        const size_t len = std::min(block_size, data.size() - off);
        Bytes chunk;
        chunk.reserve(len + 1);
        chunk.push_back(0x01);
        append(chunk, data.subspan(off, len));
        bv.blocks.push_back(from_bytes_be(chunk));
    }
    return bv;
}

inline Bytes decode_record(const BlockVector& bv, const FieldParams& params) {
    const size_t block_size = payload_block_size(params);
    if (bv.original_length == 0 || bv.blocks.empty()) {
        throw CorruptRecordError("decode_record: empty block vector");
    }
    const size_t expect_blocks = (bv.original_length + block_size - 1) / block_size;
    if (bv.blocks.size() != expect_blocks) {
        throw CorruptRecordError("decode_record: block count does not match length");
    }
    Bytes out;
    out.reserve(bv.original_length);
    for (size_t b = 0; b < bv.blocks.size(); ++b) {
        const Bigint& v = bv.blocks[b];
        if (v <= 0) throw CorruptRecordError("decode_record: block not in F_p*");
        if (v >= params.p) throw CorruptRecordError("decode_record: block exceeds field");
        const size_t payload_len =
            (b + 1 < bv.blocks.size()) ? block_size
                                       : static_cast<size_t>(bv.original_length) - block_size * b;
        Bytes raw = to_bytes_be(v);
        if (raw.size() != payload_len + 1 || raw[0] != 0x01) {
            throw CorruptRecordError("decode_record: missing block prefix");
        }
        out.insert(out.end(), raw.begin() + 1, raw.end());
    }
    return out;
}

// S_{i,j} together with the metadata that travels with it.
struct EncryptedRecord {
    uint64_t record_id = 0;
    uint64_t epoch = 0;
    Bigint generator;
    std::vector<Bigint> blocks;
    uint64_t original_length = 0;
};

}  // namespace splitstore

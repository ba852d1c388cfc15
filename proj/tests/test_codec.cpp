// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "splitstore/codec.hpp"

using namespace splitstore;

namespace {

Bytes random_bytes(size_t n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    Bytes out(n);
    for (auto& b : out) b = static_cast<unsigned char>(rng());
    return out;
}

}  // namespace

TEST_CASE("payload block size leaves room for the sentinel byte", "[codec]") {
    CHECK(payload_block_size(FieldParams::default_1024()) == 126);

    std::mt19937_64 rng(3);
    FieldParams p32 = generate_safe_prime(32, rng);
    CHECK(payload_block_size(p32) == 2);  // (32-8)/8 - 1

    // Tiny fields cannot hold a sentinel plus payload.
    CHECK_THROWS_AS(payload_block_size(FieldParams::make(23)), std::invalid_argument);
}

TEST_CASE("encode/decode roundtrip across sizes", "[codec]") {
    const FieldParams& params = FieldParams::default_1024();
    for (size_t n : {size_t{1}, size_t{17}, size_t{125}, size_t{126}, size_t{127},
                     size_t{252}, size_t{253}, size_t{1000}}) {
        CAPTURE(n);
        Bytes data = random_bytes(n, 1000 + n);
        BlockVector bv = encode_record(data, params);
        CHECK(bv.original_length == n);
        CHECK(bv.blocks.size() == (n + 125) / 126);
        CHECK(decode_record(bv, params) == data);
    }
    CHECK_THROWS_AS(encode_record(Bytes{}, params), std::invalid_argument);
}

TEST_CASE("all-zero payloads survive the roundtrip", "[codec]") {
    const FieldParams& params = FieldParams::default_1024();
    Bytes zeros(200, 0x00);
    BlockVector bv = encode_record(zeros, params);
    CHECK(decode_record(bv, params) == zeros);
    for (const Bigint& b : bv.blocks) CHECK(b != 0);  // sentinel keeps blocks nonzero
}

TEST_CASE("encoded blocks are valid field elements with the sentinel prefix", "[codec]") {
    const FieldParams& params = FieldParams::default_1024();
    Bytes data = random_bytes(300, 99);
    BlockVector bv = encode_record(data, params);
    for (const Bigint& b : bv.blocks) {
        CHECK(b >= 1);
        CHECK(b < params.p);
        Bytes raw = to_bytes_be(b);
        CHECK(raw.front() == 0x01);
    }
}

TEST_CASE("corrupted blocks are rejected", "[codec]") {
    const FieldParams& params = FieldParams::default_1024();
    Bytes data = random_bytes(100, 5);
    BlockVector bv = encode_record(data, params);

    SECTION("sentinel destroyed") {
        bv.blocks[0] += 1;  // 0x01... || data  ->  trailing byte changed, length intact
        bv.blocks[0] <<= 8;  // now one byte longer than any valid block
        CHECK_THROWS_AS(decode_record(bv, params), CorruptRecordError);
    }
    SECTION("block replaced by a small residue") {
        bv.blocks[0] = 7;  // no sentinel byte
        CHECK_THROWS_AS(decode_record(bv, params), CorruptRecordError);
    }
    SECTION("length lies") {
        bv.original_length += 1;
        CHECK_THROWS_AS(decode_record(bv, params), CorruptRecordError);
    }
    SECTION("missing blocks") {
        bv.blocks.pop_back();
        CHECK_THROWS_AS(decode_record(bv, params), CorruptRecordError);
    }
}

TEST_CASE("decode rejects blocks outside the field", "[codec]") {
    const FieldParams& params = FieldParams::default_1024();
    BlockVector bv = encode_record(random_bytes(10, 6), params);
    bv.blocks[0] = params.p + 5;
    CHECK_THROWS_AS(decode_record(bv, params), CorruptRecordError);
}

// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0
//
// Derivation fixtures were generated once from an independent HMAC-SHA3-512
// oracle over the same message encoding and frozen here as hex residues.

#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "splitstore/keyderive.hpp"

using namespace splitstore;

namespace {

MasterKey fixture_mk(Side side) {
    Bytes raw;
    unsigned char base = side == Side::X ? 0x00 : 0x40;
    for (unsigned i = 0; i < 64; ++i) raw.push_back(static_cast<unsigned char>(base + i));
    return master_key_from_bytes(raw, side);
}

}  // namespace

TEST_CASE("master key generation", "[keyderive]") {
    std::mt19937_64 rng(11);
    MasterKey a = gen_master_key(rng, Side::X);
    MasterKey b = gen_master_key(rng, Side::Y);
    CHECK(a.bytes.size() == 64);
    CHECK(a.side == Side::X);
    CHECK(b.side == Side::Y);
    CHECK(a.bytes != b.bytes);

    // Same seed reproduces the same key bytes.
    std::mt19937_64 rng2(11);
    CHECK(gen_master_key(rng2, Side::X).bytes == a.bytes);
}

TEST_CASE("master key byte conversion enforces the 64-byte invariant", "[keyderive]") {
    CHECK_THROWS_AS(master_key_from_bytes(Bytes(63, 1), Side::X), std::invalid_argument);
    CHECK_THROWS_AS(master_key_from_bytes(Bytes(65, 1), Side::X), std::invalid_argument);
    MasterKey mk = master_key_from_bytes(Bytes(64, 7), Side::Y);
    CHECK(mk.side == Side::Y);
    CHECK(master_key_bytes(mk) == Bytes(64, 7));
}

TEST_CASE("prng inputs are the generator powers 2j-1 and 2j", "[keyderive]") {
    FieldParams p23 = FieldParams::make(23);

    PrngInputs j1 = prng_inputs(Bigint(5), 1, p23);
    CHECK(j1.e1 == 5);  // 5^1
    CHECK(j1.e2 == 2);  // 5^2 = 25 mod 23

    PrngInputs j2 = prng_inputs(Bigint(5), 2, p23);
    CHECK(j2.e1 == 10);  // 5^3 = 125 mod 23
    CHECK(j2.e2 == 4);   // 5^4

    CHECK_THROWS_AS(prng_inputs(Bigint(5), 0, p23), std::invalid_argument);

    // Exponent algebra holds on the big field too.
    const FieldParams& big = FieldParams::default_1024();
    for (uint64_t j : {1ull, 2ull, 17ull, 1000ull}) {
        PrngInputs in = prng_inputs(Bigint(2), j, big);
        CHECK(in.e1 == mod_exp(Bigint(2), Bigint(2 * j - 1), big));
        CHECK(in.e2 == mod_exp(Bigint(2), Bigint(2 * j), big));
    }
}

TEST_CASE("power cache advances by multiplication and matches direct exponentiation",
          "[keyderive]") {
    const FieldParams& params = FieldParams::default_1024();
    Bigint g(5);

    PowerCache c = PowerCache::at(g, 1, params);
    for (uint64_t j = 1; j <= 60; ++j) {
        PrngInputs direct = prng_inputs(g, j, params);
        CAPTURE(j);
        REQUIRE(c.epoch == j);
        CHECK(c.in.e1 == direct.e1);
        CHECK(c.in.e2 == direct.e2);

        PrngInputs next = c.peek_next(params);
        PrngInputs direct_next = prng_inputs(g, j + 1, params);
        CHECK(next.e1 == direct_next.e1);
        CHECK(next.e2 == direct_next.e2);

        c.advance(params);
    }

    // Seeding the cache mid-stream agrees with walking there.
    PowerCache mid = PowerCache::at(g, 61, params);
    CHECK(mid.in.e1 == c.in.e1);
    CHECK(mid.in.e2 == c.in.e2);
}

TEST_CASE("derived residues match the frozen oracle fixtures", "[keyderive]") {
    const FieldParams& p1024 = FieldParams::default_1024();
    FieldParams p23 = FieldParams::make(23);
    MasterKey mk_x = fixture_mk(Side::X);
    MasterKey mk_y = fixture_mk(Side::Y);

    struct Fixture {
        Side side;
        unsigned long g;
        uint64_t j;
        uint64_t b;
        bool big;
        const char* residue;
    };
    const Fixture fixtures[] = {
        {Side::X, 2, 1, 0, true,
         "2bdf00de8b2c53ad4502ecc6bcf0fed228350158b289d5162cd6a6de4a19aaee"
         "b31f30ff687d24e9d6a194607e2255b35ce030f1b5217ef4f1e1f2f025bc8d50"
         "bd4f4ed8d19b8373b8f7bd0045fcebf4e1814936dd21a28f1da9c6a2a7d4230d"
         "1d6c4b79a473cde1a41b46067b60ef84bbc1f56f1742b34b2cc7b87ce53b6d48"},
        {Side::X, 2, 2, 0, true,
         "2a17e34aa4c16e5fc91927e1b13e0c919dfd49fcc2bb9ed95892523b803c4c02"
         "d09a40a18839f1d0556cf464b1b9a3719d7b526d6941aa698f83ac0db60faf88"
         "76798c8afec806509b59e0c235f0dc3488cded25e99356065bb91fa9d0737615"
         "b88b3e3c447dcc0faae343f0d89b0d01c1d001fd7e6c93fd8c4f77b851dda54"},
        {Side::X, 2, 1, 1, true,
         "ab5c626d49a3d945071114f73ef7ee2db6ef760465237ff29420e050d16021de"
         "f4f9ff4bceceb659a9a220da954e02e85f597fb9629b529eb97aaaeffc57a68e"
         "83da7366679976ce984cdaa20e8b2375f36afc68fe3bad619c829f742792831d"
         "b936afe61b81fbb7b00e800ce6ffc4fcc0b3e25714085a96fb3675df759e4fa4"},
        {Side::Y, 2, 1, 0, true,
         "d9203c6b74040b5019746ebe3fa04bd68f1ea6a9b324ddce84c0ccb182b3c676"
         "f14749fbbc89151a42101944b2d5ee59b39ea88f02b56ba9761ea8310902ba82"
         "56ef34dd58502925beaa89fda0471044c1f17e3d0b9dd5a6cd4ee33375f3e917"
         "80fd07b21920abd07e464a87b915e9c02b08a0a2eede64ec7f2893d2aa4c5633"},
        {Side::Y, 2, 2, 0, true,
         "5c470d40908a7360feb928185dc322f3a96bfad70f8a40df5832b6d6cc2ae5cb"
         "61d46792196487707986ff814965512a573bcf4ecdf5252f513d77297ea6fa2d"
         "3ef4b8dfb186d25a7dcbc7b9b4c85a31d8b131063144cf4dcb4e08fe4d9a3d45"
         "9eb394a412958253362934e07b5a44d758ad898dc6728de343729328f7e179f8"},
        {Side::Y, 2, 1, 1, true,
         "1d34477e11fb8c6aa05f12d0fa1106c6a906516d677770bd83f9ffc202e58319"
         "2b2764d98a79ccdbcd2ba6869f5b3f6f0db62fb5cdf12101339089689ca15ccb"
         "9cafd5b31a76893d8aa31a6574da333957d2f175607f3f82ac8e4894462ffe1e"
         "1bcdff90b47b058b05c16d596d4364137674d6c74a3e953b4506edc0deac51a8"},
        {Side::X, 5, 1, 0, false, "01"},
        {Side::X, 5, 2, 0, false, "01"},
        {Side::Y, 5, 1, 0, false, "0e"},
        {Side::Y, 5, 2, 0, false, "0d"},
    };

    for (const auto& f : fixtures) {
        const FieldParams& params = f.big ? p1024 : p23;
        const MasterKey& mk = f.side == Side::X ? mk_x : mk_y;
        CAPTURE(side_char(f.side), f.g, f.j, f.b, f.big);
        ContentKey ck = derive_content_key(mk, Bigint(f.g), 1, f.j, f.b, params);
        CHECK(ck.residue == bigint_from_hex(f.residue));
        CHECK(ck.epoch == f.j);
        CHECK(ck.side == f.side);
        CHECK(ck.block_index == f.b);
    }
}

TEST_CASE("derivation is deterministic and in range", "[keyderive]") {
    FieldParams p23 = FieldParams::make(23);
    MasterKey mk = fixture_mk(Side::X);
    for (unsigned long g : {5ul, 7ul, 10ul}) {
        for (uint64_t j = 1; j <= 20; ++j) {
            for (uint64_t b = 0; b < 3; ++b) {
                Bigint r1 = derive_content_key(mk, Bigint(g), 1, j, b, p23).residue;
                Bigint r2 = derive_content_key(mk, Bigint(g), 1, j, b, p23).residue;
                CHECK(r1 == r2);
                CHECK(r1 >= 1);
                CHECK(r1 < 23);
            }
        }
    }
}

TEST_CASE("epoch separation on the fixture key", "[keyderive]") {
    const FieldParams& params = FieldParams::default_1024();
    MasterKey mk = fixture_mk(Side::X);
    std::set<Bigint> seen;
    for (uint64_t j = 1; j <= 64; ++j) {
        seen.insert(derive_content_key(mk, Bigint(2), 1, j, 0, params).residue);
    }
    CHECK(seen.size() == 64);
}

TEST_CASE("side separation on the fixture keys", "[keyderive]") {
    const FieldParams& params = FieldParams::default_1024();
    MasterKey mk_x = fixture_mk(Side::X);
    MasterKey mk_y = fixture_mk(Side::Y);
    for (uint64_t j = 1; j <= 8; ++j) {
        CHECK(derive_content_key(mk_x, Bigint(2), 1, j, 0, params).residue !=
              derive_content_key(mk_y, Bigint(2), 1, j, 0, params).residue);
    }
}

TEST_CASE("block index produces independent keys", "[keyderive]") {
    const FieldParams& params = FieldParams::default_1024();
    MasterKey mk = fixture_mk(Side::X);
    Bigint b0 = derive_content_key(mk, Bigint(2), 1, 1, 0, params).residue;
    Bigint b1 = derive_content_key(mk, Bigint(2), 1, 1, 1, params).residue;
    CHECK(b0 != b1);
}

TEST_CASE("default derive fn matches the direct path", "[keyderive]") {
    const FieldParams& params = FieldParams::default_1024();
    MasterKey mk = fixture_mk(Side::Y);
    DeriveResidueFn fn = default_derive();
    CHECK(fn(mk, Bigint(2), 9, 3, 1, params) ==
          derive_content_key(mk, Bigint(2), 9, 3, 1, params).residue);
}

TEST_CASE("key vector file roundtrip", "[keyderive]") {
    std::vector<KeyVector> vectors{
        {Bytes(64, 0xaa), Bigint(5), 1, 2, 0, Bigint(17)},
        {Bytes(64, 0xbb), Bigint(7), 9, 1, 3, Bigint("0x1fffffffffffffffff")},
    };
    std::ostringstream os;
    write_key_vectors(vectors, os);
    std::istringstream is(os.str());
    auto back = read_key_vectors(is);
    REQUIRE(back.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(back[i].master_key == vectors[i].master_key);
        CHECK(back[i].g == vectors[i].g);
        CHECK(back[i].record_id == vectors[i].record_id);
        CHECK(back[i].epoch == vectors[i].epoch);
        CHECK(back[i].block_index == vectors[i].block_index);
        CHECK(back[i].residue == vectors[i].residue);
    }
}

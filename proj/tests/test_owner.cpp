// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <filesystem>
#include <set>

#include "splitstore/owner.hpp"

using namespace splitstore;

namespace {

MasterKey fixture_mk(Side side) {
    Bytes raw;
    unsigned char base = side == Side::X ? 0x00 : 0x40;
    for (unsigned i = 0; i < 64; ++i) raw.push_back(static_cast<unsigned char>(base + i));
    return master_key_from_bytes(raw, side);
}

std::filesystem::path temp_dir(const char* tag) {
    auto dir = std::filesystem::temp_directory_path() /
               (std::string("splitstore_test_") + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("bootstrap yields one key per side, exactly once", "[owner]") {
    Owner owner(FieldParams::default_1024(), 5);
    CHECK_FALSE(owner.bootstrapped());

    auto [bx, by] = owner.bootstrap();
    CHECK(bx.side == Side::X);
    CHECK(by.side == Side::Y);
    CHECK(bx.master_key.size() == 64);
    CHECK(by.master_key.size() == 64);
    CHECK(bx.master_key != by.master_key);
    CHECK(owner.bootstrapped());

    CHECK_THROWS_AS(owner.bootstrap(), std::logic_error);
}

TEST_CASE("records get unique ids and fresh large-order generators", "[owner]") {
    Owner owner(FieldParams::default_1024(), 5);
    owner.bootstrap();

    std::set<Bigint> gs;
    for (uint64_t i = 1; i <= 5; ++i) {
        const RecordManifest& m = owner.add_record(i, Bytes(10, static_cast<unsigned char>(i)));
        CHECK(m.record_id == i);
        CHECK(has_large_order(m.g, owner.params()));
        gs.insert(m.g);
    }
    CHECK(gs.size() == 5);

    CHECK_THROWS_AS(owner.add_record(3, Bytes(4, 1)), std::invalid_argument);  // duplicate id
    CHECK_THROWS_AS(owner.add_record(0, Bytes(4, 1)), std::invalid_argument);  // reserved id
    CHECK_THROWS_AS(owner.add_record(9, Bytes(4, 1), Bigint(1)),
                    std::invalid_argument);  // small-order generator
}

TEST_CASE("first encryption matches the frozen golden vector", "[owner]") {
    const FieldParams& params = FieldParams::default_1024();
    RecordManifest m;
    m.record_id = 1;
    m.g = Bigint(2);
    m.plaintext = bytes_of("attack at dawn!!");

    EncryptedRecord enc = encrypt_record(m, fixture_mk(Side::X), fixture_mk(Side::Y), params);
    CHECK(enc.epoch == 1);
    CHECK(enc.original_length == 16);
    REQUIRE(enc.blocks.size() == 1);
    CHECK(enc.blocks[0] ==
          bigint_from_hex(
              "7402e57309cd6cdb318351a61da44c65742be0d39b90c6151c7aba72cc14ae11"
              "bcb51ce71f269ec135008932d51e8e0772e50c31f19324e8f1735fd6e54e9f16"
              "066eeba7335cd2a01dc892bb08ad998b5ae0bdde62625c14dd41795831103790"
              "74b26f3dab0fb8f79109ae4d1a16fd5e23e8883e21b87303441107690c5dd002"));
}

TEST_CASE("first encryption is the product of both content keys", "[owner]") {
    const FieldParams& params = FieldParams::default_1024();
    MasterKey mk_x = fixture_mk(Side::X);
    MasterKey mk_y = fixture_mk(Side::Y);

    RecordManifest m;
    m.record_id = 4;
    m.g = Bigint(5);
    m.plaintext = Bytes(300, 0x5a);  // three blocks

    EncryptedRecord enc = encrypt_record(m, mk_x, mk_y, params);
    BlockVector plain_blocks = encode_record(m.plaintext, params);
    REQUIRE(enc.blocks.size() == plain_blocks.blocks.size());

    for (uint64_t b = 0; b < enc.blocks.size(); ++b) {
        Bigint kx = derive_content_key(mk_x, m.g, m.record_id, 1, b, params).residue;
        Bigint ky = derive_content_key(mk_y, m.g, m.record_id, 1, b, params).residue;
        CHECK(enc.blocks[b] == kx * ky % params.p * plain_blocks.blocks[b] % params.p);
        CHECK(enc.blocks[b] != plain_blocks.blocks[b]);  // never stored in the clear

        // Undo with both inverses: D(S_1) = R.
        Bigint undone =
            mod_inv(kx, params) * mod_inv(ky, params) % params.p * enc.blocks[b] % params.p;
        CHECK(undone == plain_blocks.blocks[b]);
    }
}

TEST_CASE("encryption requires matching key sides", "[owner]") {
    const FieldParams& params = FieldParams::default_1024();
    RecordManifest m;
    m.record_id = 1;
    m.g = Bigint(2);
    m.plaintext = bytes_of("x");
    CHECK_THROWS_AS(encrypt_record(m, fixture_mk(Side::Y), fixture_mk(Side::Y), params),
                    std::invalid_argument);
    CHECK_THROWS_AS(encrypt_record(m, fixture_mk(Side::X), fixture_mk(Side::X), params),
                    std::invalid_argument);
}

TEST_CASE("provision payload shapes", "[owner]") {
    Owner owner(FieldParams::default_1024(), 6);
    owner.bootstrap();
    owner.add_record(3, Bytes(200, 0x11));

    auto [px, py] = owner.provision(3);
    CHECK(px.record_id == 3);
    CHECK(px.epoch == 1);
    CHECK(px.original_length == 200);
    CHECK(px.blocks.size() == 2);

    // Y receives state only: i, j, g and the block geometry, never ciphertext.
    CHECK(py.record_id == 3);
    CHECK(py.epoch == 1);
    CHECK(py.g == px.g);
    CHECK(py.block_count == px.blocks.size());

    CHECK_THROWS_AS(owner.provision(99), std::out_of_range);
}

TEST_CASE("provisioning twice produces identical ciphertext", "[owner]") {
    Owner owner(FieldParams::default_1024(), 6);
    owner.bootstrap();
    owner.add_record(1, bytes_of("stable bytes"));
    auto [px1, py1] = owner.provision(1);
    auto [px2, py2] = owner.provision(1);
    CHECK(px1.blocks == px2.blocks);
    CHECK(py1.block_count == py2.block_count);
}

TEST_CASE("owner state survives a save/load roundtrip", "[owner]") {
    auto dir = temp_dir("owner");
    FieldParams params = FieldParams::default_1024();

    Owner owner(params, 8);
    owner.bootstrap();
    owner.add_record(1, bytes_of("first"));
    owner.add_record(2, bytes_of("second"));
    auto [px_before, py_before] = owner.provision(2);
    owner.save(dir);

    Owner back = Owner::load(dir, params, 99);
    CHECK(back.bootstrapped());
    CHECK(back.mk_x().bytes == owner.mk_x().bytes);
    CHECK(back.mk_y().bytes == owner.mk_y().bytes);
    CHECK(back.manifests().size() == 2);
    CHECK(back.manifest(2).plaintext == bytes_of("second"));
    CHECK(back.manifest(2).g == owner.manifest(2).g);

    // Same keys + manifests -> byte-identical provisioning after reload.
    auto [px_after, py_after] = back.provision(2);
    CHECK(px_after.blocks == px_before.blocks);

    std::filesystem::remove_all(dir);
}

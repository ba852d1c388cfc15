// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "splitstore/channel.hpp"

using namespace splitstore;

TEST_CASE("plain sealer is the identity", "[channel]") {
    PlainSealer sealer;
    CHECK_FALSE(sealer.sealed_mode());
    Bytes msg = bytes_of("msg 1 rekey_ack x y delivered i=1 j=2");
    CHECK(sealer.seal("x", "y", msg) == msg);
    CHECK(sealer.open("x", "y", msg) == msg);
}

TEST_CASE("keyed sealer roundtrips and hides the payload", "[channel]") {
    KeyedSealer sealer(42);
    sealer.register_party("x");
    sealer.register_party("y");
    CHECK(sealer.sealed_mode());

    Bytes plain = bytes_of("msg 3 rekey_init y x delivered i=1 j=2 keys=06");
    Bytes wire = sealer.seal("y", "x", plain);

    CHECK(wire != plain);
    CHECK(wire.size() > plain.size());  // nonce + tag overhead
    // The plaintext must not appear verbatim inside the sealed bytes.
    auto it = std::search(wire.begin(), wire.end(), plain.begin(), plain.end());
    CHECK(it == wire.end());

    CHECK(sealer.open("y", "x", wire) == plain);
}

TEST_CASE("sealed payloads differ per message even for equal plaintext", "[channel]") {
    KeyedSealer sealer(7);
    sealer.register_party("a");
    sealer.register_party("b");
    Bytes plain = bytes_of("same bytes");
    Bytes w1 = sealer.seal("a", "b", plain);
    Bytes w2 = sealer.seal("a", "b", plain);
    CHECK(w1 != w2);  // fresh nonce each time
    CHECK(sealer.open("a", "b", w1) == plain);
    CHECK(sealer.open("a", "b", w2) == plain);
}

TEST_CASE("only the addressed receiver can open", "[channel]") {
    KeyedSealer sealer(9);
    sealer.register_party("x");
    sealer.register_party("y");
    sealer.register_party("eve");

    Bytes plain = bytes_of("for y only");
    Bytes wire = sealer.seal("x", "y", plain);

    CHECK_THROWS_AS(sealer.open("x", "eve", wire), SealError);
    CHECK_THROWS_AS(sealer.open("eve", "y", wire), SealError);  // claimed sender matters too
    CHECK(sealer.open("x", "y", wire) == plain);
}

TEST_CASE("tampered ciphertext is rejected", "[channel]") {
    KeyedSealer sealer(11);
    sealer.register_party("x");
    sealer.register_party("y");
    Bytes wire = sealer.seal("x", "y", bytes_of("payload payload payload"));

    for (size_t pos : {size_t{0}, wire.size() / 2, wire.size() - 1}) {
        Bytes mutated = wire;
        mutated[pos] ^= 0x01;
        CAPTURE(pos);
        CHECK_THROWS_AS(sealer.open("x", "y", mutated), SealError);
    }

    Bytes truncated(wire.begin(), wire.begin() + 8);
    CHECK_THROWS_AS(sealer.open("x", "y", truncated), SealError);
}

TEST_CASE("sealing needs the receiver's registration", "[channel]") {
    KeyedSealer sealer(13);
    sealer.register_party("x");
    CHECK_THROWS_AS(sealer.seal("x", "ghost", bytes_of("hi")), SealError);
    CHECK_THROWS_AS(sealer.open("x", "ghost", Bytes(64, 0)), SealError);
}

TEST_CASE("distinct seeds produce incompatible sealers", "[channel]") {
    KeyedSealer a(1), b(2);
    for (KeyedSealer* s : {&a, &b}) {
        s->register_party("x");
        s->register_party("y");
    }
    Bytes wire = a.seal("x", "y", bytes_of("cross"));
    CHECK_THROWS_AS(b.open("x", "y", wire), SealError);
}

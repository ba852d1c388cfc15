// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0
//
// Channel sealing. The protocol assumes every channel is encrypted; parties
// exchange key material (bootstrap, rekey) that must never ride in the clear.
// Cipher internals are out of scope here, so sealing hides behind a small
// interface: the plain sealer passes bytes through for inspectable runs, the
// keyed sealer stands in for hybrid public-key sealing with a per-party
// secret, an HMAC keystream and an authentication tag.

#pragma once

#include <map>
#include <random>
#include <stdexcept>
#include <string>

#include "splitstore/sha3.hpp"

namespace splitstore {

struct SealError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Sealer {
public:
    virtual ~Sealer() = default;

    // Seal plaintext so that only `receiver` can open it.
    virtual Bytes seal(const std::string& sender, const std::string& receiver,
                       const Bytes& plain) = 0;

    // Inverse of seal; throws SealError on tampering or a wrong addressee.
    virtual Bytes open(const std::string& sender, const std::string& receiver,
                       const Bytes& wire) = 0;

    virtual bool sealed_mode() const = 0;
};

// Plaintext simulation: wire bytes equal payload bytes. Default for local
// runs where transcripts should stay human-readable.
class PlainSealer final : public Sealer {
public:
    Bytes seal(const std::string&, const std::string&, const Bytes& plain) override {
        return plain;
    }
    Bytes open(const std::string&, const std::string&, const Bytes& wire) override {
        return wire;
    }
    bool sealed_mode() const override { return false; }
};

// Sealed mode. Each registered party holds a 64-byte secret standing in for
// its decryption key. Wire layout: 16-byte nonce || ciphertext || 32-byte tag.
class KeyedSealer final : public Sealer {
public:
    static constexpr size_t kNonceSize = 16;
    static constexpr size_t kTagSize = 32;

    explicit KeyedSealer(uint64_t seed) : rng_(seed) {}
    KeyedSealer() : rng_(std::random_device{}()) {}

    void register_party(const std::string& name) {
        if (secrets_.count(name)) return;
        Bytes secret(64);
        fill_random(rng_, secret);
        secrets_[name] = std::move(secret);
    }

    Bytes seal(const std::string& sender, const std::string& receiver,
               const Bytes& plain) override {
        const Bytes& secret = secret_for(receiver);
        Bytes nonce(kNonceSize);
        fill_random(rng_, nonce);

        Bytes out = nonce;
        Bytes ct = apply_keystream(secret, nonce, plain);
        append(out, ct);
        Bytes tag = compute_tag(secret, sender, receiver, nonce, ct);
        out.insert(out.end(), tag.begin(), tag.begin() + kTagSize);
        return out;
    }

    Bytes open(const std::string& sender, const std::string& receiver,
               const Bytes& wire) override {
        const Bytes& secret = secret_for(receiver);
        if (wire.size() < kNonceSize + kTagSize) throw SealError("sealed blob too short");
        Bytes nonce(wire.begin(), wire.begin() + kNonceSize);
        Bytes ct(wire.begin() + kNonceSize, wire.end() - kTagSize);
        Bytes tag(wire.end() - kTagSize, wire.end());

        Bytes want = compute_tag(secret, sender, receiver, nonce, ct);
        bool ok = true;
        for (size_t k = 0; k < kTagSize; ++k) ok &= want[k] == tag[k];
        if (!ok) throw SealError("seal tag mismatch (tampered or wrong receiver)");
        return apply_keystream(secret, nonce, ct);
    }

    bool sealed_mode() const override { return true; }

private:
    const Bytes& secret_for(const std::string& name) const {
        auto it = secrets_.find(name);
        if (it == secrets_.end()) throw SealError("unregistered party: " + name);
        return it->second;
    }

    static Bytes apply_keystream(const Bytes& secret, const Bytes& nonce, const Bytes& in) {
        Bytes out = in;
        Bytes block;
        for (size_t off = 0; off < out.size(); off += Sha3_512::kDigestSize) {
            Bytes msg;
            append(msg, bytes_of("stream"));
            append(msg, nonce);
            append(msg, be64(off / Sha3_512::kDigestSize));
            block = hmac_sha3_512_bytes(secret, msg);
            size_t n = std::min(block.size(), out.size() - off);
            for (size_t k = 0; k < n; ++k) out[off + k] ^= block[k];
        }
        return out;
    }

    static Bytes compute_tag(const Bytes& secret, const std::string& sender,
                             const std::string& receiver, const Bytes& nonce,
                             const Bytes& ct) {
        Bytes msg;
        append(msg, bytes_of("tag"));
        append(msg, be64(sender.size()));
        append(msg, bytes_of(sender));
        append(msg, be64(receiver.size()));
        append(msg, bytes_of(receiver));
        append(msg, nonce);
        append(msg, ct);
        return hmac_sha3_512_bytes(secret, msg);
    }

    std::mt19937_64 rng_;
    std::map<std::string, Bytes> secrets_;
};

}  // namespace splitstore

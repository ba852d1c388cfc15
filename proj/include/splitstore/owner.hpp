// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0
//
// Record-owner duties: field setup, master-key distribution, the first
// (epoch-1) encryption, and provisioning the two storages. Everything here is
// offline work — after provisioning, the owner can disappear and the
// storages keep the records fresh on their own.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <utility>

#include "splitstore/codec.hpp"
#include "splitstore/keyderive.hpp"
#include "splitstore/message.hpp"

namespace splitstore {

struct RecordManifest {
    uint64_t record_id = 0;
    Bigint g;         // per-record generator, large order in F_p*
    Bytes plaintext;  // held only by the owner
};

// Epoch-1 encryption: per block, S = ck_x * ck_y * R mod p. `derive` defaults
// to the HMAC derivation; tests inject fixed key tables through it.
inline EncryptedRecord encrypt_record(const RecordManifest& m, const MasterKey& mk_x,
                                      const MasterKey& mk_y, const FieldParams& params,
                                      const DeriveResidueFn& derive = default_derive()) {
    if (mk_x.side != Side::X || mk_y.side != Side::Y) {
        throw std::invalid_argument("encrypt_record: master keys on wrong sides");
    }
    BlockVector encoded = encode_record(m.plaintext, params);

    EncryptedRecord out;
    out.record_id = m.record_id;
    out.epoch = 1;
    out.generator = m.g;
    out.original_length = encoded.original_length;
    out.blocks.reserve(encoded.blocks.size());
    for (uint64_t b = 0; b < encoded.blocks.size(); ++b) {
        Bigint kx = derive(mk_x, m.g, m.record_id, 1, b, params);
        Bigint ky = derive(mk_y, m.g, m.record_id, 1, b, params);
        out.blocks.push_back(kx * ky % params.p * encoded.blocks[b] % params.p);
    }
    return out;
}

class Owner {
public:
    Owner(FieldParams params, uint64_t seed)
        : params_(std::move(params)), rng_(seed) {}

    const FieldParams& params() const { return params_; }

    // Test hook: replace HMAC derivation with a fixed key table.
    void set_derive_fn(DeriveResidueFn fn) { derive_ = std::move(fn); }

    bool bootstrapped() const { return mk_x_.has_value(); }

    // Generates both master keys and returns the step-1/step-2 payloads.
    // Master keys are immutable per deployment: a second call is an error,
    // never a silent re-key.
    std::pair<BootstrapPayload, BootstrapPayload> bootstrap() {
        if (bootstrapped()) throw std::logic_error("owner: already bootstrapped");
        mk_x_ = gen_master_key(rng_, Side::X);
        mk_y_ = gen_master_key(rng_, Side::Y);
        return {BootstrapPayload{Side::X, master_key_bytes(*mk_x_)},
                BootstrapPayload{Side::Y, master_key_bytes(*mk_y_)}};
    }

    const MasterKey& mk_x() const { return require_mk(mk_x_); }
    const MasterKey& mk_y() const { return require_mk(mk_y_); }

    // Registers plaintext under i with a fresh generator. Every record gets
    // its own g_i, distinct from all previously assigned ones.
    const RecordManifest& add_record(uint64_t i, Bytes plaintext) {
        Bigint g;
        do {
            g = pick_generator(params_, rng_);
        } while (generator_in_use(g));
        return add_record(i, std::move(plaintext), g);
    }

    const RecordManifest& add_record(uint64_t i, Bytes plaintext, Bigint g) {
        if (i == 0) throw std::invalid_argument("owner: record id must be positive");
        if (manifests_.count(i)) {
            throw std::invalid_argument("owner: duplicate record id " + std::to_string(i));
        }
        if (!has_large_order(g, params_)) {
            throw std::invalid_argument("owner: generator fails the large-order test");
        }
        RecordManifest m{i, std::move(g), std::move(plaintext)};
        return manifests_.emplace(i, std::move(m)).first->second;
    }

    const RecordManifest& manifest(uint64_t i) const {
        auto it = manifests_.find(i);
        if (it == manifests_.end()) {
            throw std::out_of_range("owner: unknown record " + std::to_string(i));
        }
        return it->second;
    }

    const std::map<uint64_t, RecordManifest>& manifests() const { return manifests_; }

    EncryptedRecord encrypt(uint64_t i) const {
        if (!bootstrapped()) throw std::logic_error("owner: encrypt before bootstrap");
        return encrypt_record(manifest(i), *mk_x_, *mk_y_, params_, derive_);
    }

    // Step 3a/3b payload pair. X gets the ciphertext; Y gets only what it
    // needs to mirror the key schedule — never a single ciphertext byte.
    std::pair<ProvisionXPayload, ProvisionYPayload> provision(uint64_t i) const {
        EncryptedRecord enc = encrypt(i);
        ProvisionXPayload px{enc.record_id, enc.epoch, enc.generator, enc.original_length,
                             enc.blocks};
        ProvisionYPayload py{enc.record_id, enc.epoch, enc.generator,
                             static_cast<uint64_t>(enc.blocks.size())};
        return {std::move(px), std::move(py)};
    }

    // --- persistence ------------------------------------------------------

    void save(const std::filesystem::path& dir) const {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        if (bootstrapped()) {
            write_line(dir / "master_x.key", to_hex(mk_x_->bytes));
            write_line(dir / "master_y.key", to_hex(mk_y_->bytes));
        }
        for (const auto& [i, m] : manifests_) {
            std::ofstream os(dir / ("record_" + std::to_string(i) + ".txt"));
            os << "i = " << i << "\n";
            os << "g = " << to_hex(m.g) << "\n";
            os << "data = " << to_hex(m.plaintext) << "\n";
        }
    }

    static Owner load(const std::filesystem::path& dir, FieldParams params, uint64_t seed) {
        namespace fs = std::filesystem;
        Owner o(std::move(params), seed);
        if (fs::exists(dir / "master_x.key")) {
            o.mk_x_ = master_key_from_bytes(read_key_file(dir / "master_x.key"), Side::X);
            o.mk_y_ = master_key_from_bytes(read_key_file(dir / "master_y.key"), Side::Y);
        }
        for (const auto& entry : fs::directory_iterator(dir)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("record_", 0) != 0) continue;
            std::ifstream is(entry.path());
            RecordManifest m;
            std::string line;
            while (std::getline(is, line)) {
                auto eq = line.find(" = ");
                if (eq == std::string::npos) continue;
                std::string key = line.substr(0, eq), val = line.substr(eq + 3);
                if (key == "i") m.record_id = std::stoull(val);
                else if (key == "g") m.g = bigint_from_hex(val);
                else if (key == "data") m.plaintext = from_hex(val);
            }
            if (m.record_id == 0) throw std::runtime_error("owner load: bad record file " + name);
            o.manifests_[m.record_id] = std::move(m);
        }
        return o;
    }

private:
    static const MasterKey& require_mk(const std::optional<MasterKey>& mk) {
        if (!mk) throw std::logic_error("owner: not bootstrapped");
        return *mk;
    }

    bool generator_in_use(const Bigint& g) const {
        for (const auto& [i, m] : manifests_) {
            if (m.g == g) return true;
        }
        return false;
    }

    static void write_line(const std::filesystem::path& p, const std::string& s) {
        std::ofstream os(p);
        if (!os) throw std::runtime_error("owner save: cannot write " + p.string());
        os << s << "\n";
    }

    static Bytes read_key_file(const std::filesystem::path& p) {
        std::ifstream is(p);
        std::string line;
        if (!is || !std::getline(is, line)) {
            throw std::runtime_error("owner load: cannot read " + p.string());
        }
        return from_hex(line);
    }

    FieldParams params_;
    std::mt19937_64 rng_;
    DeriveResidueFn derive_ = default_derive();
    std::optional<MasterKey> mk_x_;
    std::optional<MasterKey> mk_y_;
    std::map<uint64_t, RecordManifest> manifests_;
};

}  // namespace splitstore

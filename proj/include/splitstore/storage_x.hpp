// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0
//
// Storage X: the data store. Holds doubly encrypted records plus X's half of
// the key schedule. Re-encrypts on demand (multiplying fresh keys in, never
// decrypting), serves ciphertext with X's partial inverse to paid consumers,
// and nudges Y for the next rekey after every serve so no ciphertext is ever
// sold twice under the same epoch.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>

#include "splitstore/codec.hpp"
#include "splitstore/keyderive.hpp"
#include "splitstore/ledger.hpp"
#include "splitstore/message.hpp"

namespace splitstore {

// Control edge, not a wire message: X asks the harness (or its peer loop) to
// have Y start the next re-encryption for (record_id, epoch).
struct RekeyRequest {
    uint64_t record_id = 0;
    uint64_t epoch = 0;  // the epoch the record was served at
};

class StorageX {
public:
    explicit StorageX(FieldParams params) : params_(std::move(params)) {}

    // Test hook, mirrors Owner::set_derive_fn. When set, the incremental
    // power cache is bypassed and keys come from the injected table.
    void set_derive_fn(DeriveResidueFn fn) { derive_ = std::move(fn); }

    const FieldParams& params() const { return params_; }

    // Step 1. Master keys are immutable per deployment; any replay is refused.
    void install_master_key(const Bytes& raw) {
        std::unique_lock lock(map_mutex_);
        if (mk_) throw std::logic_error("storage X: master key already installed");
        mk_ = master_key_from_bytes(raw, Side::X);
    }

    bool has_master_key() const {
        std::shared_lock lock(map_mutex_);
        return mk_.has_value();
    }

    // Step 3a. Stores the epoch-1 ciphertext and seeds the accumulator with
    // ck^x_{i,1}, derived locally from mk_x.
    void ingest(const ProvisionXPayload& p) {
        std::unique_lock lock(map_mutex_);
        if (!mk_) throw std::logic_error("storage X: ingest before bootstrap");
        if (p.epoch != 1) throw std::invalid_argument("storage X: provision must carry j=1");
        if (p.blocks.empty()) throw std::invalid_argument("storage X: empty record");
        if (entries_.count(p.record_id)) {
            throw std::invalid_argument("storage X: duplicate record " +
                                        std::to_string(p.record_id));
        }
        require_element(p.g, params_, "storage X ingest");
        for (const Bigint& s : p.blocks) require_element(s, params_, "storage X ingest");

        auto e = std::make_unique<Entry>();
        e->record_id = p.record_id;
        e->epoch = 1;
        e->g = p.g;
        e->original_length = p.original_length;
        e->blocks = p.blocks;
        e->cache = PowerCache::at(p.g, 1, params_);
        e->acc.reserve(p.blocks.size());
        for (uint64_t b = 0; b < p.blocks.size(); ++b) {
            e->acc.push_back(derive_key(*e, b));
        }
        entries_.emplace(p.record_id, std::move(e));
    }

    // Steps 4b/4c. Lockstep: only epoch j+1 is acceptable; gaps leave the
    // entry untouched, and a resend of the already-applied init (Y never saw
    // the ack) is re-acked without reapplying. Y's fresh keys arrive in `p`,
    // X derives its own, and both are multiplied into the stored blocks.
    RekeyAckPayload apply_rekey(const RekeyInitPayload& p) {
        auto [entry, lock] = locked_entry(p.record_id, "apply_rekey");
        Entry& e = *entry;
        if (p.epoch == e.epoch) {
            return RekeyAckPayload{e.record_id, e.epoch};  // duplicate delivery
        }
        if (p.epoch != e.epoch + 1) {
            throw std::invalid_argument("storage X: rekey epoch " + std::to_string(p.epoch) +
                                        " out of step with " + std::to_string(e.epoch));
        }
        if (p.keys.size() != e.blocks.size()) {
            throw std::invalid_argument("storage X: rekey key count mismatch");
        }
        for (const Bigint& k : p.keys) require_element(k, params_, "storage X apply_rekey");

        e.cache.advance(params_);
        e.epoch += 1;
        for (uint64_t b = 0; b < e.blocks.size(); ++b) {
            Bigint kx = derive_key(e, b);
            e.blocks[b] = kx * p.keys[b] % params_.p * e.blocks[b] % params_.p;
            e.acc[b] = e.acc[b] * kx % params_.p;
        }
        return RekeyAckPayload{e.record_id, e.epoch};
    }

    struct ServeResult {
        ServeXPayload reply;
        std::optional<RekeyRequest> rekey;  // set exactly when reply.status == Ok
    };

    // Step 6a/7a. Gate order: record exists, first re-encryption done, then
    // payment — a too-early request must not burn the consumer's receipt.
    // On success X releases the ciphertext and inv(Π ck^x) per block, and
    // schedules the next rekey.
    ServeResult serve(uint64_t record_id, const std::string& consumer, PaymentGate& gate) {
        ServeXPayload r;
        r.record_id = record_id;

        std::shared_lock map_lock(map_mutex_);
        auto it = entries_.find(record_id);
        if (it == entries_.end()) {
            r.status = ServeStatus::UnknownRecord;
            return {std::move(r), std::nullopt};
        }
        Entry& e = *it->second;
        std::lock_guard entry_lock(e.mutex);
        r.epoch = e.epoch;
        if (e.epoch < 2) {
            r.status = ServeStatus::NotYetRekeyed;
            return {std::move(r), std::nullopt};
        }
        if (!gate.verify_and_consume(record_id, consumer, Side::X)) {
            r.status = ServeStatus::PaymentRequired;
            return {std::move(r), std::nullopt};
        }
        r.status = ServeStatus::Ok;
        r.g = e.g;
        r.original_length = e.original_length;
        r.blocks = e.blocks;
        r.inv_keys.reserve(e.acc.size());
        for (const Bigint& a : e.acc) r.inv_keys.push_back(mod_inv(a, params_));
        return {std::move(r), RekeyRequest{record_id, e.epoch}};
    }

    // --- introspection ------------------------------------------------------

    bool has_record(uint64_t record_id) const {
        std::shared_lock lock(map_mutex_);
        return entries_.count(record_id) != 0;
    }

    uint64_t epoch_of(uint64_t record_id) const {
        auto [entry, lock] = locked_entry(record_id, "epoch_of");
        return entry->epoch;
    }

    std::vector<Bigint> blocks_of(uint64_t record_id) const {
        auto [entry, lock] = locked_entry(record_id, "blocks_of");
        return entry->blocks;
    }

    std::vector<Bigint> acc_of(uint64_t record_id) const {
        auto [entry, lock] = locked_entry(record_id, "acc_of");
        return entry->acc;
    }

    Bigint generator_of(uint64_t record_id) const {
        auto [entry, lock] = locked_entry(record_id, "generator_of");
        return entry->g;
    }

    uint64_t original_length_of(uint64_t record_id) const {
        auto [entry, lock] = locked_entry(record_id, "original_length_of");
        return entry->original_length;
    }

    std::vector<uint64_t> record_ids() const {
        std::shared_lock lock(map_mutex_);
        std::vector<uint64_t> ids;
        ids.reserve(entries_.size());
        for (const auto& [i, e] : entries_) ids.push_back(i);
        return ids;
    }

    const MasterKey& master_key() const {
        std::shared_lock lock(map_mutex_);
        if (!mk_) throw std::logic_error("storage X: no master key");
        return *mk_;
    }

    // Canonical state string for transcript snapshots and replay comparison.
    // Must never contain key bytes: the master key appears as a one-way hash.
    std::string snapshot() const {
        std::shared_lock lock(map_mutex_);
        std::ostringstream os;
        os << "party=x mk=" << (mk_ ? key_digest(*mk_) : "none") << "\n";
        for (const auto& [i, e] : entries_) {
            std::lock_guard entry_lock(e->mutex);
            os << "record i=" << i << " j=" << e->epoch << " g=" << to_hex(e->g)
               << " len=" << e->original_length << " blocks=" << detail::join_hex(e->blocks)
               << " acc=" << detail::join_hex(e->acc) << "\n";
        }
        return os.str();
    }

    // Invariant sweep: recompute each accumulator as a fresh fold over
    // epochs 1..j and cross-check the incremental power cache. Returns
    // human-readable violations; empty means healthy.
    std::vector<std::string> audit() const {
        std::shared_lock lock(map_mutex_);
        std::vector<std::string> bad;
        if (!mk_) {
            bad.push_back("no master key installed");
            return bad;
        }
        for (const auto& [i, eptr] : entries_) {
            const Entry& e = *eptr;
            std::lock_guard entry_lock(e.mutex);
            PrngInputs want = prng_inputs(e.g, e.epoch, params_);
            if (want.e1 != e.cache.in.e1 || want.e2 != e.cache.in.e2) {
                bad.push_back("record " + std::to_string(i) + ": power cache diverged");
            }
            for (uint64_t b = 0; b < e.acc.size(); ++b) {
                Bigint fold = 1;
                for (uint64_t k = 1; k <= e.epoch; ++k) {
                    fold = fold * derive_at(e, k, b) % params_.p;
                }
                if (fold != e.acc[b]) {
                    bad.push_back("record " + std::to_string(i) + " block " +
                                  std::to_string(b) + ": accumulator mismatch");
                }
                if (e.acc[b] <= 0 || e.acc[b] >= params_.p) {
                    bad.push_back("record " + std::to_string(i) + " block " +
                                  std::to_string(b) + ": accumulator out of range");
                }
            }
        }
        return bad;
    }

    // --- persistence --------------------------------------------------------
    // One file per record: header then block hex lines, accumulator alongside.

    void save(const std::filesystem::path& dir) const {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        std::shared_lock lock(map_mutex_);
        if (mk_) {
            std::ofstream os(dir / "master.key");
            os << to_hex(mk_->bytes) << "\n";
        }
        for (const auto& [i, eptr] : entries_) {
            const Entry& e = *eptr;
            std::lock_guard entry_lock(e.mutex);
            std::ofstream rec(dir / ("record_" + std::to_string(i) + ".txt"));
            rec << "i = " << i << "\n";
            rec << "j = " << e.epoch << "\n";
            rec << "g = " << to_hex(e.g) << "\n";
            rec << "len = " << e.original_length << "\n";
            rec << "blocks = " << e.blocks.size() << "\n";
            for (const Bigint& s : e.blocks) rec << to_hex(s) << "\n";
            std::ofstream acc(dir / ("record_" + std::to_string(i) + ".acc"));
            for (const Bigint& a : e.acc) acc << to_hex(a) << "\n";
        }
    }

    // Repopulates a freshly constructed instance from a saved directory.
    void restore(const std::filesystem::path& dir) {
        namespace fs = std::filesystem;
        std::unique_lock lock(map_mutex_);
        if (mk_ || !entries_.empty()) throw std::logic_error("storage X: restore over live state");
        if (fs::exists(dir / "master.key")) {
            std::ifstream is(dir / "master.key");
            std::string line;
            std::getline(is, line);
            mk_ = master_key_from_bytes(from_hex(line), Side::X);
        }
        for (const auto& f : fs::directory_iterator(dir)) {
            const std::string name = f.path().filename().string();
            if (name.rfind("record_", 0) != 0 || f.path().extension() != ".txt") continue;

            std::ifstream rec(f.path());
            auto e = std::make_unique<Entry>();
            uint64_t nblocks = 0;
            std::string line;
            while (std::getline(rec, line)) {
                auto eq = line.find(" = ");
                if (eq == std::string::npos) break;  // header ends, blocks follow
                std::string key = line.substr(0, eq), val = line.substr(eq + 3);
                if (key == "i") e->record_id = std::stoull(val);
                else if (key == "j") e->epoch = std::stoull(val);
                else if (key == "g") e->g = bigint_from_hex(val);
                else if (key == "len") e->original_length = std::stoull(val);
                else if (key == "blocks") { nblocks = std::stoull(val); break; }
            }
            for (uint64_t b = 0; b < nblocks; ++b) {
                if (!std::getline(rec, line)) {
                    throw std::runtime_error("storage X restore: truncated " + name);
                }
                e->blocks.push_back(bigint_from_hex(line));
            }
            std::ifstream accf(fs::path(f.path()).replace_extension(".acc"));
            while (std::getline(accf, line)) {
                if (!line.empty()) e->acc.push_back(bigint_from_hex(line));
            }
            if (e->record_id == 0 || e->acc.size() != e->blocks.size()) {
                throw std::runtime_error("storage X restore: inconsistent " + name);
            }
            e->cache = PowerCache::at(e->g, e->epoch, params_);
            entries_.emplace(e->record_id, std::move(e));
        }
    }

private:
    struct Entry {
        uint64_t record_id = 0;
        uint64_t epoch = 0;
        Bigint g;
        uint64_t original_length = 0;
        std::vector<Bigint> blocks;
        std::vector<Bigint> acc;
        PowerCache cache;
        mutable std::mutex mutex;
    };

    // Derive X's key for the entry's current epoch. The cache already sits at
    // that epoch; injected tables get the full coordinates instead.
    Bigint derive_key(const Entry& e, uint64_t block) const {
        if (derive_) return derive_(*mk_, e.g, e.record_id, e.epoch, block, params_);
        return derive_residue(*mk_, e.cache.in, block, params_);
    }

    // Fold path used by audit(): fresh derivation at an arbitrary epoch.
    Bigint derive_at(const Entry& e, uint64_t epoch, uint64_t block) const {
        if (derive_) return derive_(*mk_, e.g, e.record_id, epoch, block, params_);
        return derive_content_key(*mk_, e.g, e.record_id, epoch, block, params_).residue;
    }

    std::pair<Entry*, std::unique_lock<std::mutex>> locked_entry(uint64_t record_id,
                                                                 const char* who) const {
        std::shared_lock lock(map_mutex_);
        auto it = entries_.find(record_id);
        if (it == entries_.end()) {
            throw std::out_of_range(std::string("storage X ") + who + ": unknown record " +
                                    std::to_string(record_id));
        }
        return {it->second.get(), std::unique_lock(it->second->mutex)};
    }

    static std::string key_digest(const MasterKey& mk) {
        auto d = Sha3_512::digest(mk.bytes);
        return to_hex(Bytes(d.begin(), d.begin() + 16));
    }

    FieldParams params_;
    DeriveResidueFn derive_;  // empty: use the HMAC path with the power cache
    std::optional<MasterKey> mk_;
    std::map<uint64_t, std::unique_ptr<Entry>> entries_;
    mutable std::shared_mutex map_mutex_;
};

}  // namespace splitstore

// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0
//
// Storage Y: the rented key store. Holds no ciphertext, only mk_y and
// per-record schedule state. Y starts every re-encryption by pushing fresh
// epoch keys to X, and hands its partial inverse to paid consumers. The
// epoch-1 key never leaves this process: the first key Y ever transmits is
// for epoch 2, which is the entire collusion boundary of the scheme.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>

#include "splitstore/keyderive.hpp"
#include "splitstore/ledger.hpp"
#include "splitstore/message.hpp"

namespace splitstore {

class StorageY {
public:
    explicit StorageY(FieldParams params) : params_(std::move(params)) {}

    void set_derive_fn(DeriveResidueFn fn) { derive_ = std::move(fn); }

    const FieldParams& params() const { return params_; }

    // Step 2. Single install, same rule as X.
    void install_master_key(const Bytes& raw) {
        std::unique_lock lock(map_mutex_);
        if (mk_) throw std::logic_error("storage Y: master key already installed");
        mk_ = master_key_from_bytes(raw, Side::Y);
    }

    bool has_master_key() const {
        std::shared_lock lock(map_mutex_);
        return mk_.has_value();
    }

    // Step 3b. Y sizes its accumulators from the block count and derives
    // ck^y_{i,1} locally — the one key that must never ride on a wire.
    void ingest_state(const ProvisionYPayload& p) {
        std::unique_lock lock(map_mutex_);
        if (!mk_) throw std::logic_error("storage Y: ingest before bootstrap");
        if (p.epoch != 1) throw std::invalid_argument("storage Y: provision must carry j=1");
        if (p.block_count == 0) throw std::invalid_argument("storage Y: empty record");
        if (entries_.count(p.record_id)) {
            throw std::invalid_argument("storage Y: duplicate record " +
                                        std::to_string(p.record_id));
        }
        require_element(p.g, params_, "storage Y ingest");

        auto e = std::make_unique<Entry>();
        e->record_id = p.record_id;
        e->epoch = 1;
        e->g = p.g;
        e->cache = PowerCache::at(p.g, 1, params_);
        e->acc.reserve(p.block_count);
        for (uint64_t b = 0; b < p.block_count; ++b) {
            e->acc.push_back(derive_current(*e, b));
        }
        entries_.emplace(p.record_id, std::move(e));
    }

    // Step 4a. Derives the epoch-(j+1) key vector and marks the record
    // pending. Nothing is committed until X acks: a lost RekeyInit leaves the
    // accumulator untouched and the record refusing serves, never diverged.
    RekeyInitPayload initiate_rekey(uint64_t record_id) {
        auto [entry, lock] = locked_entry(record_id, "initiate_rekey");
        Entry& e = *entry;
        if (e.pending_epoch) {
            throw std::logic_error("storage Y: rekey already pending for record " +
                                   std::to_string(record_id));
        }
        uint64_t next = e.epoch + 1;
        std::vector<Bigint> keys;
        keys.reserve(e.acc.size());
        for (uint64_t b = 0; b < e.acc.size(); ++b) {
            keys.push_back(derive_next(e, b));
        }
        e.pending_epoch = next;
        e.pending_keys = keys;
        return RekeyInitPayload{record_id, next, std::move(keys)};
    }

    // Step 5. X's ack commits the pending epoch: fold the sent keys into the
    // accumulator and roll the power cache forward.
    void commit_rekey(const RekeyAckPayload& ack) {
        auto [entry, lock] = locked_entry(ack.record_id, "commit_rekey");
        Entry& e = *entry;
        if (!e.pending_epoch) {
            throw std::logic_error("storage Y: ack without pending rekey for record " +
                                   std::to_string(ack.record_id));
        }
        if (ack.epoch != *e.pending_epoch) {
            throw std::invalid_argument("storage Y: ack epoch " + std::to_string(ack.epoch) +
                                        " does not match pending " +
                                        std::to_string(*e.pending_epoch));
        }
        for (uint64_t b = 0; b < e.acc.size(); ++b) {
            e.acc[b] = e.acc[b] * e.pending_keys[b] % params_.p;
        }
        e.epoch = *e.pending_epoch;
        e.cache.advance(params_);
        e.pending_epoch.reset();
        e.pending_keys.clear();
    }

    // Step 7b. Refuses mid-rekey rather than handing out a stale inverse;
    // payment is checked last so refusals never burn a receipt.
    ServeYPayload serve_key(uint64_t record_id, const std::string& consumer,
                            PaymentGate& gate) {
        ServeYPayload r;
        r.record_id = record_id;

        std::shared_lock map_lock(map_mutex_);
        auto it = entries_.find(record_id);
        if (it == entries_.end()) {
            r.status = ServeStatus::UnknownRecord;
            return r;
        }
        Entry& e = *it->second;
        std::lock_guard entry_lock(e.mutex);
        r.epoch = e.epoch;
        if (e.pending_epoch) {
            r.status = ServeStatus::PendingRekey;
            return r;
        }
        if (e.epoch < 2) {
            r.status = ServeStatus::NotYetRekeyed;
            return r;
        }
        if (!gate.verify_and_consume(record_id, consumer, Side::Y)) {
            r.status = ServeStatus::PaymentRequired;
            return r;
        }
        r.status = ServeStatus::Ok;
        r.inv_keys.reserve(e.acc.size());
        for (const Bigint& a : e.acc) r.inv_keys.push_back(mod_inv(a, params_));
        return r;
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

    std::vector<Bigint> acc_of(uint64_t record_id) const {
        auto [entry, lock] = locked_entry(record_id, "acc_of");
        return entry->acc;
    }

    std::optional<uint64_t> pending_of(uint64_t record_id) const {
        auto [entry, lock] = locked_entry(record_id, "pending_of");
        return entry->pending_epoch;
    }

    // Rebuilds the in-flight RekeyInit so a lost one can be resent verbatim;
    // the pending keys are stored, never re-derived, so the resend is
    // byte-identical to the original.
    std::optional<RekeyInitPayload> pending_init(uint64_t record_id) const {
        auto [entry, lock] = locked_entry(record_id, "pending_init");
        if (!entry->pending_epoch) return std::nullopt;
        return RekeyInitPayload{record_id, *entry->pending_epoch, entry->pending_keys};
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
        if (!mk_) throw std::logic_error("storage Y: no master key");
        return *mk_;
    }

    std::string snapshot() const {
        std::shared_lock lock(map_mutex_);
        std::ostringstream os;
        os << "party=y mk=" << (mk_ ? key_digest(*mk_) : "none") << "\n";
        for (const auto& [i, e] : entries_) {
            std::lock_guard entry_lock(e->mutex);
            os << "record i=" << i << " j=" << e->epoch << " g=" << to_hex(e->g)
               << " acc=" << detail::join_hex(e->acc) << " pending=";
            if (e->pending_epoch) {
                os << *e->pending_epoch << " pkeys=" << detail::join_hex(e->pending_keys);
            } else {
                os << "none";
            }
            os << "\n";
        }
        return os.str();
    }

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
            }
        }
        return bad;
    }

    // --- persistence --------------------------------------------------------

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
            rec << "pending = "
                << (e.pending_epoch ? std::to_string(*e.pending_epoch) : "none") << "\n";
            rec << "acc = " << detail::join_hex(e.acc) << "\n";
            rec << "pkeys = " << detail::join_hex(e.pending_keys) << "\n";
        }
    }

    // Repopulates a freshly constructed instance from a saved directory.
    void restore(const std::filesystem::path& dir) {
        namespace fs = std::filesystem;
        std::unique_lock lock(map_mutex_);
        if (mk_ || !entries_.empty()) throw std::logic_error("storage Y: restore over live state");
        if (fs::exists(dir / "master.key")) {
            std::ifstream is(dir / "master.key");
            std::string line;
            std::getline(is, line);
            mk_ = master_key_from_bytes(from_hex(line), Side::Y);
        }
        for (const auto& f : fs::directory_iterator(dir)) {
            const std::string name = f.path().filename().string();
            if (name.rfind("record_", 0) != 0 || f.path().extension() != ".txt") continue;

            std::ifstream rec(f.path());
            auto e = std::make_unique<Entry>();
            std::string line;
            while (std::getline(rec, line)) {
                auto eq = line.find(" = ");
                if (eq == std::string::npos) continue;
                std::string key = line.substr(0, eq), val = line.substr(eq + 3);
                if (key == "i") e->record_id = std::stoull(val);
                else if (key == "j") e->epoch = std::stoull(val);
                else if (key == "g") e->g = bigint_from_hex(val);
                else if (key == "pending" && val != "none") e->pending_epoch = std::stoull(val);
                else if (key == "acc") e->acc = detail::split_hex(val);
                else if (key == "pkeys") e->pending_keys = detail::split_hex(val);
            }
            if (e->record_id == 0 || e->acc.empty()) {
                throw std::runtime_error("storage Y restore: inconsistent " + name);
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
        std::vector<Bigint> acc;
        std::optional<uint64_t> pending_epoch;
        std::vector<Bigint> pending_keys;
        PowerCache cache;
        mutable std::mutex mutex;
    };

    Bigint derive_current(const Entry& e, uint64_t block) const {
        if (derive_) return derive_(*mk_, e.g, e.record_id, e.epoch, block, params_);
        return derive_residue(*mk_, e.cache.in, block, params_);
    }

    // Key for epoch j+1 without committing the cache: peek, don't advance.
    Bigint derive_next(const Entry& e, uint64_t block) const {
        if (derive_) return derive_(*mk_, e.g, e.record_id, e.epoch + 1, block, params_);
        return derive_residue(*mk_, e.cache.peek_next(params_), block, params_);
    }

    Bigint derive_at(const Entry& e, uint64_t epoch, uint64_t block) const {
        if (derive_) return derive_(*mk_, e.g, e.record_id, epoch, block, params_);
        return derive_content_key(*mk_, e.g, e.record_id, epoch, block, params_).residue;
    }

    std::pair<Entry*, std::unique_lock<std::mutex>> locked_entry(uint64_t record_id,
                                                                 const char* who) const {
        std::shared_lock lock(map_mutex_);
        auto it = entries_.find(record_id);
        if (it == entries_.end()) {
            throw std::out_of_range(std::string("storage Y ") + who + ": unknown record " +
                                    std::to_string(record_id));
        }
        return {it->second.get(), std::unique_lock(it->second->mutex)};
    }

    static std::string key_digest(const MasterKey& mk) {
        auto d = Sha3_512::digest(mk.bytes);
        return to_hex(Bytes(d.begin(), d.begin() + 16));
    }

    FieldParams params_;
    DeriveResidueFn derive_;
    std::optional<MasterKey> mk_;
    std::map<uint64_t, std::unique_ptr<Entry>> entries_;
    mutable std::shared_mutex map_mutex_;
};

}  // namespace splitstore

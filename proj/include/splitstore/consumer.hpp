// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0
//
// Consumer: pays the ledger once per retrieval, pulls ciphertext + X's
// partial inverse from the data store and Y's partial inverse from the key
// store, checks the two epoch tags agree, and combines the inverses to
// decode the plaintext. Neither storage alone ever gave it anything usable.

#pragma once

#include <functional>
#include <string>

#include "splitstore/codec.hpp"
#include "splitstore/ledger.hpp"
#include "splitstore/message.hpp"

namespace splitstore {

struct RetrievalBundle {
    uint64_t record_id = 0;

    // From X (step 7a).
    uint64_t epoch = 0;
    Bigint g;
    uint64_t original_length = 0;
    std::vector<Bigint> blocks;
    std::vector<Bigint> inv_x;

    // From Y (step 7b).
    uint64_t epoch_y = 0;
    std::vector<Bigint> inv_y;

    bool have_x = false;
    bool have_y = false;

    bool complete() const { return have_x && have_y; }
    bool epochs_match() const { return complete() && epoch == epoch_y; }
};

inline void absorb(RetrievalBundle& b, const ServeXPayload& r) {
    if (r.status != ServeStatus::Ok) return;
    b.record_id = r.record_id;
    b.epoch = r.epoch;
    b.g = r.g;
    b.original_length = r.original_length;
    b.blocks = r.blocks;
    b.inv_x = r.inv_keys;
    b.have_x = true;
}

inline void absorb(RetrievalBundle& b, const ServeYPayload& r) {
    if (r.status != ServeStatus::Ok) return;
    b.epoch_y = r.epoch;
    b.inv_y = r.inv_keys;
    b.have_y = true;
}

// Step 8 arithmetic: R-block = inv_x * inv_y * S-block mod p.
inline std::vector<Bigint> decrypt_blocks(const RetrievalBundle& b, const FieldParams& params) {
    if (!b.epochs_match()) {
        throw std::invalid_argument("decrypt: bundle epochs disagree (" +
                                    std::to_string(b.epoch) + " vs " +
                                    std::to_string(b.epoch_y) + ")");
    }
    if (b.inv_x.size() != b.blocks.size() || b.inv_y.size() != b.blocks.size()) {
        throw std::invalid_argument("decrypt: key vector length mismatch");
    }
    std::vector<Bigint> out;
    out.reserve(b.blocks.size());
    for (size_t k = 0; k < b.blocks.size(); ++k) {
        require_element(b.blocks[k], params, "decrypt");
        out.push_back(b.inv_x[k] * b.inv_y[k] % params.p * b.blocks[k] % params.p);
    }
    return out;
}

inline Bytes decrypt(const RetrievalBundle& b, const FieldParams& params) {
    return decode_record(BlockVector{decrypt_blocks(b, params), b.original_length}, params);
}

// Transport the consumer talks through; the harness binds these to direct
// calls, the networked tools to sockets.
using XChannel = std::function<ServeXPayload(const FetchPayload&)>;
using YChannel = std::function<ServeYPayload(const FetchPayload&)>;

struct FetchOutcome {
    bool ok = false;
    RetrievalBundle bundle;
    Bytes plaintext;
    uint64_t payments = 0;             // receipts spent on this retrieval
    std::vector<std::string> trail;    // status history, for transcripts and debugging
};

class Consumer {
public:
    Consumer(std::string name, FieldParams params, uint64_t balance)
        : name_(std::move(name)), params_(std::move(params)), balance_(balance) {}

    const std::string& name() const { return name_; }
    uint64_t balance() const { return balance_; }

    // Steps 6–8: one payment, both fetches, combine. Y's key release is
    // fetched first: serving X is what schedules the next re-encryption, so
    // asking X last closes out the retrieval before the epoch can move
    // underneath it. An epoch mismatch or a mid-rekey refusal earns exactly
    // one retry with a fresh payment — the first receipt is gone, that is
    // the cost of racing a re-encryption.
    FetchOutcome purchase_and_fetch(uint64_t record_id, PaymentSubmitter& ledger,
                                    const XChannel& to_x, const YChannel& to_y) {
        FetchOutcome out;
        for (int attempt = 0; attempt < 2; ++attempt) {
            if (balance_ < ledger.price()) {
                out.trail.push_back("payment refused: balance too low");
                return out;
            }
            ledger.pay(record_id, name_, ledger.price());
            balance_ -= ledger.price();
            out.payments += 1;

            RetrievalBundle b;
            FetchPayload req{record_id, name_};
            ServeXPayload rx;
            ServeYPayload ry;
            bool x_replied = true, y_replied = true;
            try {
                ry = to_y(req);
                out.trail.push_back(std::string("y: ") + serve_status_name(ry.status));
                absorb(b, ry);
            } catch (const DeliveryError&) {
                y_replied = false;
                out.trail.push_back("y: no reply");
            }
            try {
                rx = to_x(req);
                out.trail.push_back(std::string("x: ") + serve_status_name(rx.status));
                absorb(b, rx);
            } catch (const DeliveryError&) {
                x_replied = false;
                out.trail.push_back("x: no reply");
            }
            if (!x_replied || !y_replied) return out;  // unavailable, do not spend more

            if (b.complete() && b.epochs_match()) {
                out.bundle = std::move(b);
                out.plaintext = decrypt(out.bundle, params_);
                out.ok = true;
                return out;
            }
            bool retryable = (b.complete() && !b.epochs_match()) ||
                             ry.status == ServeStatus::PendingRekey;
            if (!retryable) return out;
            out.trail.push_back("retrying with fresh payment");
        }
        return out;
    }

    // Deliberately skip the payment and ask anyway; both sides must refuse.
    std::pair<ServeStatus, ServeStatus> fetch_unpaid(uint64_t record_id, const XChannel& to_x,
                                                     const YChannel& to_y) const {
        FetchPayload req{record_id, name_};
        return {to_x(req).status, to_y(req).status};
    }

private:
    std::string name_;
    FieldParams params_;
    uint64_t balance_;
};

}  // namespace splitstore

// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "splitstore/keyderive.hpp"

namespace splitstore {

struct UnderpaymentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One payment enables at most one serve from X and one key release from Y,
// so a receipt carries a consumption slot per storage side.
struct PaymentReceipt {
    uint64_t tx_id = 0;
    uint64_t nft_id = 0;
    std::string payer;
    uint64_t amount = 0;
    bool consumed_x = false;
    bool consumed_y = false;
};

// What the storages need from the payment layer; implemented by the in-process
// mock contract below and by the wire client in net.hpp.
class PaymentGate {
public:
    virtual ~PaymentGate() = default;
    virtual bool verify_and_consume(uint64_t nft_id, const std::string& payer, Side side) = 0;
};

// Consumer-facing half of the contract: query the price, submit a payment.
class PaymentSubmitter {
public:
    virtual ~PaymentSubmitter() = default;
    virtual uint64_t price() const = 0;
    virtual PaymentReceipt pay(uint64_t nft_id, const std::string& payer, uint64_t amount) = 0;
};

// Mock NFT smart contract. Receipts are append-only; verification is an
// atomic check-and-set under one lock, so concurrent callers observe a
// total order.
class MockLedger : public PaymentGate, public PaymentSubmitter {
public:
    explicit MockLedger(uint64_t price) : price_(price) {}

    uint64_t price() const override { return price_; }

    // Observer fires on every accepted payment; the simulator uses it to
    // thread pay events into transcripts at their true position.
    void set_observer(std::function<void(const PaymentReceipt&)> obs) {
        std::lock_guard lock(mutex_);
        observer_ = std::move(obs);
    }

    PaymentReceipt pay(uint64_t nft_id, const std::string& payer, uint64_t amount) override {
        std::lock_guard lock(mutex_);
        if (amount < price_) {
            throw UnderpaymentError("pay: amount " + std::to_string(amount) + " below price " +
                                    std::to_string(price_));
        }
        PaymentReceipt receipt{next_tx_++, nft_id, payer, amount, false, false};
        receipts_.push_back(receipt);
        if (observer_) observer_(receipt);
        return receipt;
    }

    bool verify_and_consume(uint64_t nft_id, const std::string& payer, Side side) override {
        std::lock_guard lock(mutex_);
        for (auto& r : receipts_) {
            if (r.nft_id != nft_id || r.payer != payer) continue;
            bool& slot = (side == Side::X) ? r.consumed_x : r.consumed_y;
            if (slot) continue;
            slot = true;
            return true;
        }
        return false;
    }

    std::vector<PaymentReceipt> receipts() const {
        std::lock_guard lock(mutex_);
        return receipts_;
    }

    size_t receipt_count() const {
        std::lock_guard lock(mutex_);
        return receipts_.size();
    }

    // Journal: one receipt per line, tx_id nft_id payer amount consumed_x consumed_y.
    std::string journal() const {
        std::lock_guard lock(mutex_);
        std::ostringstream os;
        for (const auto& r : receipts_) {
            os << r.tx_id << " " << r.nft_id << " " << r.payer << " " << r.amount << " "
               << (r.consumed_x ? 1 : 0) << " " << (r.consumed_y ? 1 : 0) << "\n";
        }
        return os.str();
    }

    void load_journal(std::istream& is) {
        std::lock_guard lock(mutex_);
        receipts_.clear();
        next_tx_ = 1;
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            PaymentReceipt r;
            int cx = 0, cy = 0;
            if (!(ls >> r.tx_id >> r.nft_id >> r.payer >> r.amount >> cx >> cy)) {
                throw std::invalid_argument("ledger journal: malformed line: " + line);
            }
            r.consumed_x = cx != 0;
            r.consumed_y = cy != 0;
            receipts_.push_back(r);
            next_tx_ = std::max(next_tx_, r.tx_id + 1);
        }
    }

private:
    uint64_t price_;
    uint64_t next_tx_ = 1;
    std::vector<PaymentReceipt> receipts_;
    std::function<void(const PaymentReceipt&)> observer_;
    mutable std::mutex mutex_;
};

}  // namespace splitstore

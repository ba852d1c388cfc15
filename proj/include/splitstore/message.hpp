// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "splitstore/codec.hpp"
#include "splitstore/keyderive.hpp"

namespace splitstore {

// Wire vocabulary. One enumerator per protocol edge; control traffic that
// never crosses a channel (e.g. the post-serve rekey nudge) is not listed.
enum class MsgType {
    BootstrapX,
    BootstrapY,
    ProvisionX,
    ProvisionY,
    RekeyInit,
    RekeyAck,
    FetchRequestX,
    FetchRequestY,
    ServeX,
    ServeY,
};

inline const char* msg_type_name(MsgType t) {
    switch (t) {
        case MsgType::BootstrapX: return "bootstrap_x";
        case MsgType::BootstrapY: return "bootstrap_y";
        case MsgType::ProvisionX: return "provision_x";
        case MsgType::ProvisionY: return "provision_y";
        case MsgType::RekeyInit: return "rekey_init";
        case MsgType::RekeyAck: return "rekey_ack";
        case MsgType::FetchRequestX: return "fetch_request_x";
        case MsgType::FetchRequestY: return "fetch_request_y";
        case MsgType::ServeX: return "serve_x";
        case MsgType::ServeY: return "serve_y";
    }
    throw std::logic_error("msg_type_name: bad enum");
}

inline MsgType msg_type_from_name(const std::string& s) {
    static const std::map<std::string, MsgType> table = {
        {"bootstrap_x", MsgType::BootstrapX},
        {"bootstrap_y", MsgType::BootstrapY},
        {"provision_x", MsgType::ProvisionX},
        {"provision_y", MsgType::ProvisionY},
        {"rekey_init", MsgType::RekeyInit},
        {"rekey_ack", MsgType::RekeyAck},
        {"fetch_request_x", MsgType::FetchRequestX},
        {"fetch_request_y", MsgType::FetchRequestY},
        {"serve_x", MsgType::ServeX},
        {"serve_y", MsgType::ServeY},
    };
    auto it = table.find(s);
    if (it == table.end()) throw std::invalid_argument("unknown msg type: " + s);
    return it->second;
}

// Raised by a transport when a request or reply never arrives (simulated
// drop faults, closed sockets). Parties treat it as "peer unavailable".
struct DeliveryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ServeStatus {
    Ok,
    PaymentRequired,
    NotYetRekeyed,
    PendingRekey,
    UnknownRecord,
};

inline const char* serve_status_name(ServeStatus s) {
    switch (s) {
        case ServeStatus::Ok: return "ok";
        case ServeStatus::PaymentRequired: return "payment_required";
        case ServeStatus::NotYetRekeyed: return "not_yet_rekeyed";
        case ServeStatus::PendingRekey: return "pending_rekey";
        case ServeStatus::UnknownRecord: return "unknown_record";
    }
    throw std::logic_error("serve_status_name: bad enum");
}

inline ServeStatus serve_status_from_name(const std::string& s) {
    static const std::map<std::string, ServeStatus> table = {
        {"ok", ServeStatus::Ok},
        {"payment_required", ServeStatus::PaymentRequired},
        {"not_yet_rekeyed", ServeStatus::NotYetRekeyed},
        {"pending_rekey", ServeStatus::PendingRekey},
        {"unknown_record", ServeStatus::UnknownRecord},
    };
    auto it = table.find(s);
    if (it == table.end()) throw std::invalid_argument("unknown serve status: " + s);
    return it->second;
}

// --- payloads -------------------------------------------------------------

struct BootstrapPayload {
    Side side = Side::X;
    Bytes master_key;  // 64 bytes, sealed in transit by the channel layer

    bool operator==(const BootstrapPayload&) const = default;
};

struct ProvisionXPayload {
    uint64_t record_id = 0;
    uint64_t epoch = 0;  // always 1 at provisioning
    Bigint g;
    uint64_t original_length = 0;
    std::vector<Bigint> blocks;  // doubly encrypted residues

    bool operator==(const ProvisionXPayload&) const = default;
};

// Y never sees ciphertext; it only needs enough to size its accumulators.
struct ProvisionYPayload {
    uint64_t record_id = 0;
    uint64_t epoch = 0;
    Bigint g;
    uint64_t block_count = 0;

    bool operator==(const ProvisionYPayload&) const = default;
};

struct RekeyInitPayload {
    uint64_t record_id = 0;
    uint64_t epoch = 0;  // the epoch being entered (j+1)
    std::vector<Bigint> keys;  // ck^y_{i,epoch}, one residue per block, sealed

    bool operator==(const RekeyInitPayload&) const = default;
};

struct RekeyAckPayload {
    uint64_t record_id = 0;
    uint64_t epoch = 0;

    bool operator==(const RekeyAckPayload&) const = default;
};

struct FetchPayload {
    uint64_t record_id = 0;
    std::string consumer;

    bool operator==(const FetchPayload&) const = default;
};

struct ServeXPayload {
    ServeStatus status = ServeStatus::Ok;
    uint64_t record_id = 0;
    uint64_t epoch = 0;
    Bigint g;
    uint64_t original_length = 0;
    std::vector<Bigint> blocks;
    std::vector<Bigint> inv_keys;  // (Pi ck^x)^-1 per block

    bool operator==(const ServeXPayload&) const = default;
};

struct ServeYPayload {
    ServeStatus status = ServeStatus::Ok;
    uint64_t record_id = 0;
    uint64_t epoch = 0;
    std::vector<Bigint> inv_keys;  // (Pi ck^y)^-1 per block

    bool operator==(const ServeYPayload&) const = default;
};

using Payload = std::variant<BootstrapPayload, ProvisionXPayload, ProvisionYPayload,
                             RekeyInitPayload, RekeyAckPayload, FetchPayload,
                             ServeXPayload, ServeYPayload>;

struct ProtocolMessage {
    uint64_t seq = 0;
    MsgType type = MsgType::BootstrapX;
    std::string sender;
    std::string receiver;
    bool delivered = true;  // false when a fault swallowed it
    Payload payload;

    bool operator==(const ProtocolMessage&) const = default;
};

// --- line format ----------------------------------------------------------
//
//   msg <seq> <type> <sender> <receiver> <delivered|dropped> k=v k=v ...
//
// Scalars are decimal, field elements lowercase hex, element vectors
// comma-joined hex with "-" standing in for the empty vector.

namespace detail {

inline std::string join_hex(const std::vector<Bigint>& v) {
    if (v.empty()) return "-";
    std::string out;
    for (size_t k = 0; k < v.size(); ++k) {
        if (k) out += ',';
        out += to_hex(v[k]);
    }
    return out;
}

inline std::vector<Bigint> split_hex(const std::string& s) {
    std::vector<Bigint> out;
    if (s == "-") return out;
    size_t pos = 0;
    while (pos <= s.size()) {
        size_t comma = s.find(',', pos);
        size_t end = comma == std::string::npos ? s.size() : comma;
        out.push_back(bigint_from_hex(s.substr(pos, end - pos)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

using KvMap = std::map<std::string, std::string>;

inline const std::string& kv_get(const KvMap& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::invalid_argument("message line missing field: " + key);
    return it->second;
}

inline uint64_t kv_u64(const KvMap& kv, const std::string& key) {
    return std::stoull(kv_get(kv, key));
}

}  // namespace detail

inline std::string format_message(const ProtocolMessage& m) {
    std::ostringstream os;
    os << "msg " << m.seq << ' ' << msg_type_name(m.type) << ' ' << m.sender << ' '
       << m.receiver << ' ' << (m.delivered ? "delivered" : "dropped");

    struct Writer {
        std::ostringstream& os;
        void operator()(const BootstrapPayload& p) {
            os << " side=" << side_char(p.side) << " mk=" << to_hex(p.master_key);
        }
        void operator()(const ProvisionXPayload& p) {
            os << " i=" << p.record_id << " j=" << p.epoch << " g=" << to_hex(p.g)
               << " len=" << p.original_length << " blocks=" << detail::join_hex(p.blocks);
        }
        void operator()(const ProvisionYPayload& p) {
            os << " i=" << p.record_id << " j=" << p.epoch << " g=" << to_hex(p.g)
               << " nblocks=" << p.block_count;
        }
        void operator()(const RekeyInitPayload& p) {
            os << " i=" << p.record_id << " j=" << p.epoch
               << " keys=" << detail::join_hex(p.keys);
        }
        void operator()(const RekeyAckPayload& p) {
            os << " i=" << p.record_id << " j=" << p.epoch;
        }
        void operator()(const FetchPayload& p) {
            os << " i=" << p.record_id << " consumer=" << p.consumer;
        }
        void operator()(const ServeXPayload& p) {
            os << " status=" << serve_status_name(p.status) << " i=" << p.record_id
               << " j=" << p.epoch << " g=" << to_hex(p.g) << " len=" << p.original_length
               << " blocks=" << detail::join_hex(p.blocks)
               << " invkeys=" << detail::join_hex(p.inv_keys);
        }
        void operator()(const ServeYPayload& p) {
            os << " status=" << serve_status_name(p.status) << " i=" << p.record_id
               << " j=" << p.epoch << " invkeys=" << detail::join_hex(p.inv_keys);
        }
    };
    std::visit(Writer{os}, m.payload);
    return os.str();
}

inline ProtocolMessage parse_message(const std::string& line) {
    std::istringstream is(line);
    std::string tag, type_s, delivered_s;
    ProtocolMessage m;
    if (!(is >> tag >> m.seq >> type_s >> m.sender >> m.receiver >> delivered_s) ||
        tag != "msg") {
        throw std::invalid_argument("malformed message line: " + line);
    }
    m.type = msg_type_from_name(type_s);
    if (delivered_s == "delivered") {
        m.delivered = true;
    } else if (delivered_s == "dropped") {
        m.delivered = false;
    } else {
        throw std::invalid_argument("bad delivery flag: " + delivered_s);
    }

    detail::KvMap kv;
    std::string tok;
    while (is >> tok) {
        size_t eq = tok.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("bad k=v token: " + tok);
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }

    using namespace detail;
    switch (m.type) {
        case MsgType::BootstrapX:
        case MsgType::BootstrapY: {
            BootstrapPayload p;
            const std::string& side = kv_get(kv, "side");
            if (side == "x") p.side = Side::X;
            else if (side == "y") p.side = Side::Y;
            else throw std::invalid_argument("bad side: " + side);
            p.master_key = from_hex(kv_get(kv, "mk"));
            m.payload = std::move(p);
            break;
        }
        case MsgType::ProvisionX: {
            ProvisionXPayload p;
            p.record_id = kv_u64(kv, "i");
            p.epoch = kv_u64(kv, "j");
            p.g = bigint_from_hex(kv_get(kv, "g"));
            p.original_length = kv_u64(kv, "len");
            p.blocks = split_hex(kv_get(kv, "blocks"));
            m.payload = std::move(p);
            break;
        }
        case MsgType::ProvisionY: {
            ProvisionYPayload p;
            p.record_id = kv_u64(kv, "i");
            p.epoch = kv_u64(kv, "j");
            p.g = bigint_from_hex(kv_get(kv, "g"));
            p.block_count = kv_u64(kv, "nblocks");
            m.payload = std::move(p);
            break;
        }
        case MsgType::RekeyInit: {
            RekeyInitPayload p;
            p.record_id = kv_u64(kv, "i");
            p.epoch = kv_u64(kv, "j");
            p.keys = split_hex(kv_get(kv, "keys"));
            m.payload = std::move(p);
            break;
        }
        case MsgType::RekeyAck: {
            RekeyAckPayload p;
            p.record_id = kv_u64(kv, "i");
            p.epoch = kv_u64(kv, "j");
            m.payload = std::move(p);
            break;
        }
        case MsgType::FetchRequestX:
        case MsgType::FetchRequestY: {
            FetchPayload p;
            p.record_id = kv_u64(kv, "i");
            p.consumer = kv_get(kv, "consumer");
            m.payload = std::move(p);
            break;
        }
        case MsgType::ServeX: {
            ServeXPayload p;
            p.status = serve_status_from_name(kv_get(kv, "status"));
            p.record_id = kv_u64(kv, "i");
            p.epoch = kv_u64(kv, "j");
            p.g = bigint_from_hex(kv_get(kv, "g"));
            p.original_length = kv_u64(kv, "len");
            p.blocks = split_hex(kv_get(kv, "blocks"));
            p.inv_keys = split_hex(kv_get(kv, "invkeys"));
            m.payload = std::move(p);
            break;
        }
        case MsgType::ServeY: {
            ServeYPayload p;
            p.status = serve_status_from_name(kv_get(kv, "status"));
            p.record_id = kv_u64(kv, "i");
            p.epoch = kv_u64(kv, "j");
            p.inv_keys = split_hex(kv_get(kv, "invkeys"));
            m.payload = std::move(p);
            break;
        }
    }
    return m;
}

}  // namespace splitstore

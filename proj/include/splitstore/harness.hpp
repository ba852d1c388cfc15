// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic multi-party simulator. Wires owner, the two storages, the
// mock ledger and any number of consumers over a recorded synchronous bus,
// executes declarative scenarios (with optional drop / interleave faults),
// and emits a transcript that can be audited for the protocol's security
// properties or replayed against fresh parties to the byte-identical end
// state.

#pragma once

#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>

#include "splitstore/channel.hpp"
#include "splitstore/consumer.hpp"
#include "splitstore/owner.hpp"
#include "splitstore/storage_x.hpp"
#include "splitstore/storage_y.hpp"

namespace splitstore {

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- scenario description ---------------------------------------------------

struct ScenarioRecord {
    uint64_t id = 0;
    Bytes payload;
    Bigint g;  // optional explicit generator (tests); 0 = let the owner pick
};

struct ScenarioAction {
    enum class Kind { Bootstrap, Provision, Rekey, Purchase, PurchaseUnpaid, Snapshot };
    Kind kind = Kind::Bootstrap;
    uint64_t record_id = 0;    // Provision/Rekey/Purchase*
    std::string consumer;      // Purchase*
};

struct FaultSpec {
    enum class Kind { Drop, InterleaveRekey };
    Kind kind = Kind::Drop;
    MsgType type = MsgType::RekeyInit;  // Drop: which message type
    uint64_t occurrence = 1;            // 1-based; Drop: nth of that type,
                                        // InterleaveRekey: nth purchase action
};

struct Scenario {
    FieldParams params;
    uint64_t price = 1;
    uint64_t seed = 1;
    bool sealed = false;
    std::vector<std::pair<std::string, uint64_t>> consumers;  // name, balance
    std::vector<ScenarioRecord> records;
    std::vector<ScenarioAction> actions;
    std::vector<FaultSpec> faults;
    DeriveResidueFn derive;  // test injection; empty = HMAC derivation
};

// Text form, one directive per line ('#' comments):
//   params default | params <hex-of-p>
//   price <n>
//   seed <n>
//   seal on|off
//   consumer <name> <balance>
//   record <i> <hex> [g=<hex>]  |  record <i> file <path>
//   action bootstrap | provision <i> | rekey <i> | purchase <name> <i>
//          | purchase-unpaid <name> <i> | snapshot
//   fault drop <msg_type> <occurrence> | fault interleave-rekey <occurrence>
inline Scenario parse_scenario(std::istream& is,
                               const std::filesystem::path& base_dir = ".") {
    Scenario sc;
    bool have_params = false;
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        auto fail = [&](const std::string& why) {
            throw ScenarioError("scenario line " + std::to_string(lineno) + ": " + why);
        };
        if (word == "params") {
            std::string v;
            ls >> v;
            sc.params = (v == "default") ? FieldParams::default_1024()
                                         : FieldParams::make(bigint_from_hex(v));
            have_params = true;
        } else if (word == "price") {
            ls >> sc.price;
        } else if (word == "seed") {
            ls >> sc.seed;
        } else if (word == "seal") {
            std::string v;
            ls >> v;
            sc.sealed = v == "on";
        } else if (word == "consumer") {
            std::string name;
            uint64_t balance = 0;
            if (!(ls >> name >> balance)) fail("consumer needs <name> <balance>");
            sc.consumers.emplace_back(name, balance);
        } else if (word == "record") {
            ScenarioRecord r;
            std::string v;
            if (!(ls >> r.id >> v)) fail("record needs <i> <hex|file>");
            if (v == "file") {
                std::string path;
                ls >> path;
                std::ifstream f(base_dir / path, std::ios::binary);
                if (!f) fail("cannot open record file " + path);
                r.payload.assign(std::istreambuf_iterator<char>(f), {});
            } else {
                r.payload = from_hex(v);
            }
            std::string extra;
            if (ls >> extra && extra.rfind("g=", 0) == 0) {
                r.g = bigint_from_hex(extra.substr(2));
            }
            sc.records.push_back(std::move(r));
        } else if (word == "action") {
            std::string kind;
            ls >> kind;
            ScenarioAction a;
            if (kind == "bootstrap") {
                a.kind = ScenarioAction::Kind::Bootstrap;
            } else if (kind == "provision") {
                a.kind = ScenarioAction::Kind::Provision;
                if (!(ls >> a.record_id)) fail("provision needs <i>");
            } else if (kind == "rekey") {
                a.kind = ScenarioAction::Kind::Rekey;
                if (!(ls >> a.record_id)) fail("rekey needs <i>");
            } else if (kind == "purchase" || kind == "purchase-unpaid") {
                a.kind = kind == "purchase" ? ScenarioAction::Kind::Purchase
                                            : ScenarioAction::Kind::PurchaseUnpaid;
                if (!(ls >> a.consumer >> a.record_id)) fail(kind + " needs <name> <i>");
            } else if (kind == "snapshot") {
                a.kind = ScenarioAction::Kind::Snapshot;
            } else {
                fail("unknown action " + kind);
            }
            sc.actions.push_back(a);
        } else if (word == "fault") {
            std::string kind;
            ls >> kind;
            FaultSpec f;
            if (kind == "drop") {
                std::string type;
                if (!(ls >> type >> f.occurrence)) fail("fault drop needs <type> <occurrence>");
                f.kind = FaultSpec::Kind::Drop;
                f.type = msg_type_from_name(type);
            } else if (kind == "interleave-rekey") {
                f.kind = FaultSpec::Kind::InterleaveRekey;
                if (!(ls >> f.occurrence)) fail("fault interleave-rekey needs <occurrence>");
            } else {
                fail("unknown fault " + kind);
            }
            sc.faults.push_back(f);
        } else {
            fail("unknown directive " + word);
        }
    }
    if (!have_params) sc.params = FieldParams::default_1024();
    return sc;
}

inline Scenario load_scenario(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) throw ScenarioError("cannot open scenario " + file.string());
    return parse_scenario(is, file.parent_path().empty() ? "." : file.parent_path());
}

// --- transcript --------------------------------------------------------------

struct PayEvent {
    uint64_t tx_id = 0;
    uint64_t nft_id = 0;
    std::string payer;
    uint64_t amount = 0;

    bool operator==(const PayEvent&) const = default;
};

struct SnapshotEvent {
    std::string party;  // "x", "y", "ledger"
    std::string state;  // the party's canonical snapshot string

    bool operator==(const SnapshotEvent&) const = default;
};

struct NoteEvent {
    std::string text;  // outcome summaries, halt diagnostics; no newlines

    bool operator==(const NoteEvent&) const = default;
};

using TranscriptEvent = std::variant<ProtocolMessage, PayEvent, SnapshotEvent, NoteEvent>;

struct Transcript {
    FieldParams params;
    uint64_t price = 1;
    uint64_t seed = 1;
    std::vector<TranscriptEvent> events;

    std::vector<const ProtocolMessage*> messages() const {
        std::vector<const ProtocolMessage*> out;
        for (const auto& e : events) {
            if (const auto* m = std::get_if<ProtocolMessage>(&e)) out.push_back(m);
        }
        return out;
    }
};

inline void write_transcript(const Transcript& t, std::ostream& os) {
    os << "transcript v1\n";
    os << "seed " << t.seed << "\n";
    os << "price " << t.price << "\n";
    os << "params " << to_hex(t.params.p) << "\n";
    for (const auto& e : t.events) {
        if (const auto* m = std::get_if<ProtocolMessage>(&e)) {
            os << format_message(*m) << "\n";
        } else if (const auto* p = std::get_if<PayEvent>(&e)) {
            os << "pay tx=" << p->tx_id << " i=" << p->nft_id << " payer=" << p->payer
               << " amount=" << p->amount << "\n";
        } else if (const auto* s = std::get_if<SnapshotEvent>(&e)) {
            os << "snapshot " << s->party << " " << to_hex(bytes_of(s->state)) << "\n";
        } else if (const auto* n = std::get_if<NoteEvent>(&e)) {
            os << "note " << n->text << "\n";
        }
    }
}

inline Transcript read_transcript(std::istream& is) {
    Transcript t;
    std::string line;
    if (!std::getline(is, line) || line != "transcript v1") {
        throw std::invalid_argument("not a transcript (missing header)");
    }
    bool have_params = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "seed") {
            ls >> t.seed;
        } else if (word == "price") {
            ls >> t.price;
        } else if (word == "params") {
            std::string hex;
            ls >> hex;
            t.params = FieldParams::make(bigint_from_hex(hex));
            have_params = true;
        } else if (word == "msg") {
            t.events.emplace_back(parse_message(line));
        } else if (word == "pay") {
            PayEvent p;
            std::string tok;
            while (ls >> tok) {
                auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
                if (k == "tx") p.tx_id = std::stoull(v);
                else if (k == "i") p.nft_id = std::stoull(v);
                else if (k == "payer") p.payer = v;
                else if (k == "amount") p.amount = std::stoull(v);
            }
            t.events.emplace_back(p);
        } else if (word == "snapshot") {
            SnapshotEvent s;
            std::string hex;
            ls >> s.party >> hex;
            Bytes raw = from_hex(hex);
            s.state.assign(raw.begin(), raw.end());
            t.events.emplace_back(std::move(s));
        } else if (word == "note") {
            NoteEvent n;
            std::getline(ls >> std::ws, n.text);
            t.events.emplace_back(std::move(n));
        } else {
            throw std::invalid_argument("unknown transcript line: " + line);
        }
    }
    if (!have_params) throw std::invalid_argument("transcript missing params");
    return t;
}

// --- simulation --------------------------------------------------------------

struct RunResult {
    Transcript transcript;
    bool halted = false;
    std::string halt_reason;
    std::vector<FetchOutcome> outcomes;  // one per purchase action executed
    std::string x_snapshot;
    std::string y_snapshot;
    std::string ledger_journal;
};

class SimWorld {
public:
    explicit SimWorld(const Scenario& sc)
        : scenario_(sc),
          ledger_(sc.price),
          owner_(sc.params, sc.seed),
          x_(sc.params),
          y_(sc.params) {
        if (sc.derive) {
            owner_.set_derive_fn(sc.derive);
            x_.set_derive_fn(sc.derive);
            y_.set_derive_fn(sc.derive);
        }
        if (sc.sealed) {
            sealer_ = std::make_unique<KeyedSealer>(sc.seed ^ 0x5ea1ed5ea1ed5ea1ULL);
            sealer_->register_party("owner");
            sealer_->register_party("x");
            sealer_->register_party("y");
        }
        for (const auto& [name, balance] : sc.consumers) {
            consumers_.emplace(name, Consumer(name, sc.params, balance));
            if (sealer_) sealer_->register_party(name);
        }
        ledger_.set_observer([this](const PaymentReceipt& r) {
            result_.transcript.events.emplace_back(
                PayEvent{r.tx_id, r.nft_id, r.payer, r.amount});
        });
    }

    RunResult run() {
        result_.transcript.params = scenario_.params;
        result_.transcript.price = scenario_.price;
        result_.transcript.seed = scenario_.seed;

        for (const auto& r : scenario_.records) {
            if (r.g == 0) {
                owner_.add_record(r.id, r.payload);
            } else {
                owner_.add_record(r.id, r.payload, r.g);
            }
        }

        size_t purchase_no = 0;
        for (size_t idx = 0; idx < scenario_.actions.size(); ++idx) {
            const ScenarioAction& a = scenario_.actions[idx];
            try {
                switch (a.kind) {
                    case ScenarioAction::Kind::Bootstrap:
                        do_bootstrap();
                        break;
                    case ScenarioAction::Kind::Provision:
                        do_provision(a.record_id);
                        break;
                    case ScenarioAction::Kind::Rekey:
                        do_rekey(a.record_id);
                        break;
                    case ScenarioAction::Kind::Purchase:
                        do_purchase(a.consumer, a.record_id, ++purchase_no);
                        break;
                    case ScenarioAction::Kind::PurchaseUnpaid:
                        do_purchase_unpaid(a.consumer, a.record_id);
                        break;
                    case ScenarioAction::Kind::Snapshot:
                        take_snapshots();
                        break;
                }
            } catch (const std::exception& ex) {
                // A violated precondition halts the scenario with the failing
                // step identified; everything recorded so far stands.
                result_.halted = true;
                result_.halt_reason =
                    "action " + std::to_string(idx + 1) + ": " + ex.what();
                note("halt " + result_.halt_reason);
                break;
            }
        }

        take_snapshots();
        result_.x_snapshot = x_.snapshot();
        result_.y_snapshot = y_.snapshot();
        result_.ledger_journal = ledger_.journal();
        return std::move(result_);
    }

    // Direct access for property tests that inspect a finished world.
    Owner& owner() { return owner_; }
    StorageX& x() { return x_; }
    StorageY& y() { return y_; }
    MockLedger& ledger() { return ledger_; }

private:
    // Drop faults count occurrences per message type, 1-based.
    bool should_drop(MsgType type) {
        uint64_t n = ++type_counts_[type];
        for (const auto& f : scenario_.faults) {
            if (f.kind == FaultSpec::Kind::Drop && f.type == type && f.occurrence == n) {
                return true;
            }
        }
        return false;
    }

    bool interleave_armed(uint64_t purchase_no) const {
        for (const auto& f : scenario_.faults) {
            if (f.kind == FaultSpec::Kind::InterleaveRekey && f.occurrence == purchase_no) {
                return true;
            }
        }
        return false;
    }

    // Record a message on the bus; returns delivered?. Key-bearing payloads
    // additionally make a seal/open round trip in sealed mode, proving the
    // wire never carries them in the clear.
    bool post(MsgType type, const std::string& from, const std::string& to, Payload payload) {
        ProtocolMessage m;
        m.seq = ++seq_;
        m.type = type;
        m.sender = from;
        m.receiver = to;
        m.delivered = !should_drop(type);
        m.payload = std::move(payload);
        if (sealer_ && (type == MsgType::BootstrapX || type == MsgType::BootstrapY ||
                        type == MsgType::RekeyInit)) {
            Bytes plain = bytes_of(format_message(m));
            Bytes wire = sealer_->seal(m.sender, m.receiver, plain);
            if (wire == plain) throw ScenarioError("sealed channel left plaintext on the wire");
            if (sealer_->open(m.sender, m.receiver, wire) != plain) {
                throw ScenarioError("sealed channel failed to round-trip");
            }
        }
        bool delivered = m.delivered;
        result_.transcript.events.emplace_back(std::move(m));
        return delivered;
    }

    void note(std::string text) {
        result_.transcript.events.emplace_back(NoteEvent{std::move(text)});
    }

    // Steps 1–2. Delivery is atomic: if either install would be lost, neither
    // side gets a key (both messages are marked dropped).
    void do_bootstrap() {
        auto [bx, by] = owner_.bootstrap();
        bool dx = !should_drop(MsgType::BootstrapX);
        bool dy = !should_drop(MsgType::BootstrapY);
        bool both = dx && dy;

        ProtocolMessage mx;
        mx.seq = ++seq_;
        mx.type = MsgType::BootstrapX;
        mx.sender = "owner";
        mx.receiver = "x";
        mx.delivered = both;
        mx.payload = bx;
        ProtocolMessage my;
        my.seq = ++seq_;
        my.type = MsgType::BootstrapY;
        my.sender = "owner";
        my.receiver = "y";
        my.delivered = both;
        my.payload = by;
        if (sealer_) {
            for (const ProtocolMessage* m : {&mx, &my}) {
                Bytes plain = bytes_of(format_message(*m));
                Bytes wire = sealer_->seal(m->sender, m->receiver, plain);
                if (wire == plain) {
                    throw ScenarioError("sealed channel left plaintext on the wire");
                }
            }
        }
        result_.transcript.events.emplace_back(std::move(mx));
        result_.transcript.events.emplace_back(std::move(my));

        if (!both) {
            note("bootstrap aborted: channel failure, neither side provisioned");
            return;
        }
        x_.install_master_key(bx.master_key);
        y_.install_master_key(by.master_key);
    }

    // Steps 3a/3b.
    void do_provision(uint64_t record_id) {
        auto [px, py] = owner_.provision(record_id);
        if (post(MsgType::ProvisionX, "owner", "x", px)) x_.ingest(px);
        if (post(MsgType::ProvisionY, "owner", "y", py)) y_.ingest_state(py);
    }

    // Steps 4a–5: one full re-encryption cascade. A record left pending by a
    // lost ack resends its stored init verbatim (X re-acks an epoch it has
    // already applied), so the next rekey attempt heals the pair instead of
    // wedging it — the same recovery the wire-mode nudge handler performs.
    void do_rekey(uint64_t record_id) {
        RekeyInitPayload init;
        if (std::optional<RekeyInitPayload> stuck = y_.pending_init(record_id)) {
            init = std::move(*stuck);
        } else {
            init = y_.initiate_rekey(record_id);
        }
        if (!post(MsgType::RekeyInit, "y", "x", init)) return;  // Y stays pending
        RekeyAckPayload ack = x_.apply_rekey(init);
        if (!post(MsgType::RekeyAck, "x", "y", ack)) return;  // X ahead, Y pending
        y_.commit_rekey(ack);
    }

    void drain_rekey_queue() {
        while (!rekey_queue_.empty()) {
            RekeyRequest req = rekey_queue_.front();
            rekey_queue_.pop_front();
            do_rekey(req.record_id);
        }
    }

    XChannel make_x_channel(const std::string& consumer, bool* interleave_pending) {
        return [this, consumer, interleave_pending](const FetchPayload& req) -> ServeXPayload {
            if (interleave_pending && *interleave_pending) {
                // Scheduled fault: a re-encryption — as another consumer's
                // serve would trigger — races in between Y's key release and
                // X's serve, so X answers one epoch ahead of Y.
                *interleave_pending = false;
                do_rekey(req.record_id);
            }
            if (!post(MsgType::FetchRequestX, consumer, "x", req)) {
                throw DeliveryError("fetch request to x dropped");
            }
            StorageX::ServeResult res = x_.serve(req.record_id, req.consumer, ledger_);
            if (res.rekey) rekey_queue_.push_back(*res.rekey);
            if (!post(MsgType::ServeX, "x", consumer, res.reply)) {
                throw DeliveryError("serve reply from x dropped");
            }
            return res.reply;
        };
    }

    YChannel make_y_channel(const std::string& consumer) {
        return [this, consumer](const FetchPayload& req) -> ServeYPayload {
            if (!post(MsgType::FetchRequestY, consumer, "y", req)) {
                throw DeliveryError("fetch request to y dropped");
            }
            ServeYPayload reply = y_.serve_key(req.record_id, req.consumer, ledger_);
            if (!post(MsgType::ServeY, "y", consumer, reply)) {
                throw DeliveryError("serve reply from y dropped");
            }
            return reply;
        };
    }

    // Steps 6–8 plus the post-serve tail: X's rekey requests are drained
    // after the purchase settles; the interleave fault instead injects a
    // full cascade mid-purchase.
    void do_purchase(const std::string& name, uint64_t record_id, uint64_t purchase_no) {
        Consumer& c = consumer(name);
        bool interleave = interleave_armed(purchase_no);
        XChannel xc = make_x_channel(name, &interleave);
        YChannel yc = make_y_channel(name);
        FetchOutcome outcome = c.purchase_and_fetch(record_id, ledger_, xc, yc);
        note("purchase consumer=" + name + " i=" + std::to_string(record_id) +
             " ok=" + (outcome.ok ? "1" : "0") +
             " payments=" + std::to_string(outcome.payments));
        result_.outcomes.push_back(std::move(outcome));
        drain_rekey_queue();
    }

    void do_purchase_unpaid(const std::string& name, uint64_t record_id) {
        Consumer& c = consumer(name);
        XChannel xc = make_x_channel(name, nullptr);
        YChannel yc = make_y_channel(name);
        auto [sx, sy] = c.fetch_unpaid(record_id, xc, yc);
        note(std::string("purchase-unpaid consumer=") + name + " i=" +
             std::to_string(record_id) + " x=" + serve_status_name(sx) +
             " y=" + serve_status_name(sy));
        drain_rekey_queue();
    }

    void take_snapshots() {
        result_.transcript.events.emplace_back(SnapshotEvent{"x", x_.snapshot()});
        result_.transcript.events.emplace_back(SnapshotEvent{"y", y_.snapshot()});
        result_.transcript.events.emplace_back(SnapshotEvent{"ledger", ledger_.journal()});
    }

    Consumer& consumer(const std::string& name) {
        auto it = consumers_.find(name);
        if (it == consumers_.end()) throw ScenarioError("unknown consumer " + name);
        return it->second;
    }

    Scenario scenario_;
    MockLedger ledger_;
    Owner owner_;
    StorageX x_;
    StorageY y_;
    std::map<std::string, Consumer> consumers_;
    std::unique_ptr<KeyedSealer> sealer_;
    std::deque<RekeyRequest> rekey_queue_;
    std::map<MsgType, uint64_t> type_counts_;
    uint64_t seq_ = 0;
    RunResult result_;
};

inline RunResult run_scenario(const Scenario& sc) { return SimWorld(sc).run(); }

// --- audit --------------------------------------------------------------------

struct AuditReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

// Transcript-only security audit. The auditor is a trusted oracle: it reads
// the master keys out of the two bootstrap messages and re-derives whatever
// key material the checks need. Checks:
//   (a) no epoch-1 Y key value (and no epoch-1 tag) in any Y->X message
//   (b) no plaintext block residue or long plaintext hex in any message
//   (c) master-key bytes confined to the two bootstrap messages
//   (d) one-payment-one-serve: running per-(record, payer) credit never dips
//       below zero on either side
//   (e) epochs strictly monotonic per record, provision at j=1, serves at j>=2
// Check (b) compares field-element values, which is only meaningful where a
// chance collision is impossible; fields narrower than 128 bits skip it.
inline AuditReport audit_transcript(const Transcript& t, DeriveResidueFn derive = {}) {
    AuditReport rep;
    if (!derive) derive = default_derive();
    const FieldParams& params = t.params;

    std::optional<MasterKey> mk_x, mk_y;
    std::string mk_x_hex, mk_y_hex;
    struct RecordInfo {
        Bigint g;
        uint64_t blocks = 0;
        std::vector<Bigint> cipher1;  // epoch-1 ciphertext from ProvisionX
        uint64_t original_length = 0;
    };
    std::map<uint64_t, RecordInfo> records;

    // Pass 1: extract keys and record geometry.
    for (const ProtocolMessage* m : t.messages()) {
        if (m->type == MsgType::BootstrapX) {
            const auto& p = std::get<BootstrapPayload>(m->payload);
            mk_x = master_key_from_bytes(p.master_key, Side::X);
            mk_x_hex = to_hex(p.master_key);
        } else if (m->type == MsgType::BootstrapY) {
            const auto& p = std::get<BootstrapPayload>(m->payload);
            mk_y = master_key_from_bytes(p.master_key, Side::Y);
            mk_y_hex = to_hex(p.master_key);
        } else if (m->type == MsgType::ProvisionX) {
            const auto& p = std::get<ProvisionXPayload>(m->payload);
            RecordInfo& r = records[p.record_id];
            r.g = p.g;
            r.blocks = p.blocks.size();
            r.cipher1 = p.blocks;
            r.original_length = p.original_length;
        } else if (m->type == MsgType::ProvisionY) {
            const auto& p = std::get<ProvisionYPayload>(m->payload);
            RecordInfo& r = records[p.record_id];
            if (r.g == 0) r.g = p.g;
            if (r.blocks == 0) r.blocks = p.block_count;
        }
    }

    // Reference key material, derived exactly as the parties would.
    std::map<uint64_t, std::vector<Bigint>> y1_keys;   // record -> per-block ck^y_{i,1}
    std::map<uint64_t, std::vector<Bigint>> r_blocks;  // record -> plaintext residues
    if (mk_y) {
        for (auto& [i, r] : records) {
            if (r.g == 0) continue;
            std::vector<Bigint> keys;
            for (uint64_t b = 0; b < r.blocks; ++b) {
                keys.push_back(derive(*mk_y, r.g, i, 1, b, params));
            }
            y1_keys[i] = std::move(keys);
        }
    }
    if (mk_x && mk_y) {
        for (auto& [i, r] : records) {
            if (r.g == 0 || r.cipher1.empty()) continue;
            std::vector<Bigint> plain;
            for (uint64_t b = 0; b < r.cipher1.size(); ++b) {
                Bigint kx = derive(*mk_x, r.g, i, 1, b, params);
                Bigint ky = derive(*mk_y, r.g, i, 1, b, params);
                plain.push_back(mod_inv(kx, params) * mod_inv(ky, params) % params.p *
                                r.cipher1[b] % params.p);
            }
            r_blocks[i] = std::move(plain);
        }
    }

    auto flag = [&](char check, uint64_t seq, const std::string& what) {
        rep.violations.push_back(std::string("(") + check + ") msg " + std::to_string(seq) +
                                 ": " + what);
    };

    // Collect every field element a message carries, for value scans.
    auto elements_of = [](const ProtocolMessage& m) {
        std::vector<const Bigint*> out;
        if (const auto* p = std::get_if<ProvisionXPayload>(&m.payload)) {
            for (const auto& v : p->blocks) out.push_back(&v);
        } else if (const auto* p = std::get_if<RekeyInitPayload>(&m.payload)) {
            for (const auto& v : p->keys) out.push_back(&v);
        } else if (const auto* p = std::get_if<ServeXPayload>(&m.payload)) {
            for (const auto& v : p->blocks) out.push_back(&v);
            for (const auto& v : p->inv_keys) out.push_back(&v);
        } else if (const auto* p = std::get_if<ServeYPayload>(&m.payload)) {
            for (const auto& v : p->inv_keys) out.push_back(&v);
        }
        return out;
    };

    const bool value_scan = params.p_bits >= 128;

    // Walk the event stream in order for the stateful checks.
    std::map<std::pair<uint64_t, std::string>, int64_t> credit_x, credit_y;
    std::map<uint64_t, uint64_t> epoch_floor;  // record -> last committed epoch
    size_t bootstrap_x_count = 0, bootstrap_y_count = 0;

    for (const auto& ev : t.events) {
        const auto* m = std::get_if<ProtocolMessage>(&ev);
        if (!m) {
            if (const auto* p = std::get_if<PayEvent>(&ev)) {
                credit_x[{p->nft_id, p->payer}] += 1;
                credit_y[{p->nft_id, p->payer}] += 1;
            }
            continue;
        }

        // (c) master keys only inside bootstrap messages.
        if (m->type == MsgType::BootstrapX) {
            ++bootstrap_x_count;
        } else if (m->type == MsgType::BootstrapY) {
            ++bootstrap_y_count;
        } else {
            const std::string line = format_message(*m);
            if (!mk_x_hex.empty() && line.find(mk_x_hex) != std::string::npos) {
                flag('c', m->seq, "mk_x bytes outside bootstrap");
            }
            if (!mk_y_hex.empty() && line.find(mk_y_hex) != std::string::npos) {
                flag('c', m->seq, "mk_y bytes outside bootstrap");
            }
        }

        // (a) Y->X traffic must never carry epoch-1 key material.
        if (m->sender == "y" && m->receiver == "x") {
            if (const auto* p = std::get_if<RekeyInitPayload>(&m->payload)) {
                if (p->epoch < 2) {
                    flag('a', m->seq, "rekey init tagged epoch " + std::to_string(p->epoch));
                }
                if (value_scan) {
                    auto it = y1_keys.find(p->record_id);
                    if (it != y1_keys.end()) {
                        for (const Bigint& k : p->keys) {
                            for (const Bigint& k1 : it->second) {
                                if (k == k1) {
                                    flag('a', m->seq, "epoch-1 Y key value on the wire");
                                }
                            }
                        }
                    }
                }
            }
        }

        // (b) plaintext never rides in any message.
        if (value_scan) {
            for (const Bigint* v : elements_of(*m)) {
                for (const auto& [i, plain] : r_blocks) {
                    for (const Bigint& r : plain) {
                        if (*v == r) {
                            flag('b', m->seq,
                                 "plaintext residue of record " + std::to_string(i));
                        }
                    }
                }
            }
        }

        // (d) serve only against available credit.
        if (m->type == MsgType::ServeX) {
            const auto& p = std::get<ServeXPayload>(m->payload);
            if (p.status == ServeStatus::Ok) {
                int64_t& c = credit_x[{p.record_id, m->receiver}];
                if (c <= 0) {
                    flag('d', m->seq, "X served record " + std::to_string(p.record_id) +
                                          " without a consumable receipt");
                } else {
                    c -= 1;
                }
            }
        } else if (m->type == MsgType::ServeY) {
            const auto& p = std::get<ServeYPayload>(m->payload);
            if (p.status == ServeStatus::Ok) {
                int64_t& c = credit_y[{p.record_id, m->receiver}];
                if (c <= 0) {
                    flag('d', m->seq, "Y served record " + std::to_string(p.record_id) +
                                          " without a consumable receipt");
                } else {
                    c -= 1;
                }
            }
        }

        // (e) epoch discipline.
        switch (m->type) {
            case MsgType::ProvisionX:
            case MsgType::ProvisionY: {
                uint64_t epoch = m->type == MsgType::ProvisionX
                                     ? std::get<ProvisionXPayload>(m->payload).epoch
                                     : std::get<ProvisionYPayload>(m->payload).epoch;
                uint64_t i = m->type == MsgType::ProvisionX
                                 ? std::get<ProvisionXPayload>(m->payload).record_id
                                 : std::get<ProvisionYPayload>(m->payload).record_id;
                if (epoch != 1) flag('e', m->seq, "provision not at epoch 1");
                epoch_floor.emplace(i, 1);
                break;
            }
            case MsgType::RekeyInit: {
                const auto& p = std::get<RekeyInitPayload>(m->payload);
                auto it = epoch_floor.find(p.record_id);
                if (it != epoch_floor.end() && m->delivered && p.epoch != it->second + 1) {
                    flag('e', m->seq, "rekey init skips from epoch " +
                                          std::to_string(it->second) + " to " +
                                          std::to_string(p.epoch));
                }
                break;
            }
            case MsgType::RekeyAck: {
                // The floor tracks the two-sided committed epoch, which only
                // moves when Y actually receives the ack; a dropped ack (and
                // the verbatim resend it forces) must not trip the check.
                const auto& p = std::get<RekeyAckPayload>(m->payload);
                auto it = epoch_floor.find(p.record_id);
                if (it != epoch_floor.end() && m->delivered) {
                    if (p.epoch <= it->second) {
                        flag('e', m->seq, "epoch did not advance on rekey ack");
                    } else {
                        it->second = p.epoch;
                    }
                }
                break;
            }
            case MsgType::ServeX: {
                const auto& p = std::get<ServeXPayload>(m->payload);
                if (p.status == ServeStatus::Ok && p.epoch < 2) {
                    flag('e', m->seq, "served before first re-encryption");
                }
                break;
            }
            case MsgType::ServeY: {
                const auto& p = std::get<ServeYPayload>(m->payload);
                if (p.status == ServeStatus::Ok && p.epoch < 2) {
                    flag('e', m->seq, "Y released keys before first re-encryption");
                }
                break;
            }
            default:
                break;
        }
    }

    if (bootstrap_x_count > 1 || bootstrap_y_count > 1) {
        rep.violations.push_back("(c) master key transmitted more than once");
    }
    return rep;
}

// --- replay --------------------------------------------------------------------

struct ReplayMismatchError : std::runtime_error {
    uint64_t seq;
    explicit ReplayMismatchError(uint64_t seq_, const std::string& what)
        : std::runtime_error("replay mismatch at seq " + std::to_string(seq_) + ": " + what),
          seq(seq_) {}
};

struct ReplayResult {
    std::string x_snapshot;
    std::string y_snapshot;
    std::string ledger_journal;
};

// Re-executes a transcript against fresh parties. Recorded payloads serve two
// roles: inputs to receivers, and expected outputs of senders — any produced
// payload is compared field-for-field against the recording, so a mutated
// transcript fails at the first divergent message.
inline ReplayResult replay(const Transcript& t, DeriveResidueFn derive = {}) {
    MockLedger ledger(t.price);
    StorageX x(t.params);
    StorageY y(t.params);
    if (derive) {
        x.set_derive_fn(derive);
        y.set_derive_fn(derive);
    }

    std::optional<ServeXPayload> expect_serve_x;
    std::optional<ServeYPayload> expect_serve_y;
    std::map<uint64_t, RekeyAckPayload> expect_ack;  // record -> ack produced by X

    for (const auto& ev : t.events) {
        if (const auto* p = std::get_if<PayEvent>(&ev)) {
            try {
                PaymentReceipt r = ledger.pay(p->nft_id, p->payer, p->amount);
                if (r.tx_id != p->tx_id) {
                    throw ReplayMismatchError(0, "ledger issued tx " + std::to_string(r.tx_id) +
                                                     ", transcript has " +
                                                     std::to_string(p->tx_id));
                }
            } catch (const UnderpaymentError& ex) {
                throw ReplayMismatchError(0, std::string("payment refused: ") + ex.what());
            }
            continue;
        }
        if (const auto* s = std::get_if<SnapshotEvent>(&ev)) {
            std::string now = s->party == "x"        ? x.snapshot()
                              : s->party == "y"      ? y.snapshot()
                              : s->party == "ledger" ? ledger.journal()
                                                     : std::string();
            if (now != s->state) {
                throw ReplayMismatchError(0, "snapshot of " + s->party + " diverged");
            }
            continue;
        }
        const auto* m = std::get_if<ProtocolMessage>(&ev);
        if (!m) continue;  // notes carry no state

        // A live run records a message first and halts if the receiver then
        // refuses it, so receiver-side refusals here must not abort the
        // replay — the recorded stream simply contains nothing further from
        // that cascade, and a mutated transcript that does continue past a
        // refusal trips the next comparison instead.
        auto tolerate = [](auto&& op) {
            try {
                op();
            } catch (const std::exception&) {
            }
        };

        switch (m->type) {
            case MsgType::BootstrapX:
                if (m->delivered) {
                    tolerate([&] {
                        x.install_master_key(std::get<BootstrapPayload>(m->payload).master_key);
                    });
                }
                break;
            case MsgType::BootstrapY:
                if (m->delivered) {
                    tolerate([&] {
                        y.install_master_key(std::get<BootstrapPayload>(m->payload).master_key);
                    });
                }
                break;
            case MsgType::ProvisionX:
                if (m->delivered) {
                    tolerate([&] { x.ingest(std::get<ProvisionXPayload>(m->payload)); });
                }
                break;
            case MsgType::ProvisionY:
                if (m->delivered) {
                    tolerate([&] { y.ingest_state(std::get<ProvisionYPayload>(m->payload)); });
                }
                break;
            case MsgType::RekeyInit: {
                const auto& recorded = std::get<RekeyInitPayload>(m->payload);
                RekeyInitPayload produced;
                try {
                    // A live Y resends its stored init when a lost ack left
                    // the record pending; replay mirrors that exactly.
                    if (std::optional<RekeyInitPayload> stuck =
                            y.pending_init(recorded.record_id)) {
                        produced = std::move(*stuck);
                    } else {
                        produced = y.initiate_rekey(recorded.record_id);
                    }
                } catch (const std::exception& ex) {
                    // The recording proves the live initiate succeeded.
                    throw ReplayMismatchError(m->seq,
                                              std::string("initiate_rekey refused: ") + ex.what());
                }
                if (!(produced == recorded)) {
                    throw ReplayMismatchError(m->seq, "rekey init payload diverged");
                }
                if (m->delivered) {
                    tolerate([&] { expect_ack[recorded.record_id] = x.apply_rekey(recorded); });
                }
                break;
            }
            case MsgType::RekeyAck: {
                const auto& recorded = std::get<RekeyAckPayload>(m->payload);
                auto it = expect_ack.find(recorded.record_id);
                if (it == expect_ack.end()) {
                    throw ReplayMismatchError(m->seq, "ack without a preceding rekey init");
                }
                if (!(it->second == recorded)) {
                    throw ReplayMismatchError(m->seq, "rekey ack payload diverged");
                }
                expect_ack.erase(it);
                if (m->delivered) {
                    tolerate([&] { y.commit_rekey(recorded); });
                }
                break;
            }
            case MsgType::FetchRequestX: {
                const auto& req = std::get<FetchPayload>(m->payload);
                if (m->delivered) {
                    tolerate([&] {
                        expect_serve_x = x.serve(req.record_id, req.consumer, ledger).reply;
                    });
                }
                break;
            }
            case MsgType::ServeX: {
                const auto& recorded = std::get<ServeXPayload>(m->payload);
                if (!expect_serve_x) {
                    throw ReplayMismatchError(m->seq, "serve_x without a fetch");
                }
                if (!(*expect_serve_x == recorded)) {
                    throw ReplayMismatchError(m->seq, "serve_x payload diverged");
                }
                expect_serve_x.reset();
                break;
            }
            case MsgType::FetchRequestY: {
                const auto& req = std::get<FetchPayload>(m->payload);
                if (m->delivered) {
                    tolerate([&] {
                        expect_serve_y = y.serve_key(req.record_id, req.consumer, ledger);
                    });
                }
                break;
            }
            case MsgType::ServeY: {
                const auto& recorded = std::get<ServeYPayload>(m->payload);
                if (!expect_serve_y) {
                    throw ReplayMismatchError(m->seq, "serve_y without a fetch");
                }
                if (!(*expect_serve_y == recorded)) {
                    throw ReplayMismatchError(m->seq, "serve_y payload diverged");
                }
                expect_serve_y.reset();
                break;
            }
        }
    }

    return ReplayResult{x.snapshot(), y.snapshot(), ledger.journal()};
}

// --- canned scenarios -----------------------------------------------------------

// Seeded random scenario on the default field: a few records, a couple of
// consumers, a mix of rekeys and purchases. Drives the determinism and
// transcript-audit properties.
inline Scenario random_scenario(uint64_t seed) {
    std::mt19937_64 rng(seed);
    Scenario sc;
    sc.params = FieldParams::default_1024();
    sc.price = 1 + rng() % 7;
    sc.seed = seed;

    size_t n_records = 2 + rng() % 3;
    size_t n_consumers = 1 + rng() % 2;
    for (size_t c = 0; c < n_consumers; ++c) {
        sc.consumers.emplace_back("c" + std::to_string(c + 1), 1000);
    }
    sc.actions.push_back({ScenarioAction::Kind::Bootstrap, 0, ""});
    for (size_t r = 0; r < n_records; ++r) {
        ScenarioRecord rec;
        rec.id = r + 1;
        rec.payload.resize(1 + rng() % 300);
        fill_random(rng, rec.payload);
        sc.records.push_back(std::move(rec));
        sc.actions.push_back({ScenarioAction::Kind::Provision, r + 1, ""});
        sc.actions.push_back({ScenarioAction::Kind::Rekey, r + 1, ""});
    }
    size_t n_purchases = 2 + rng() % 4;
    for (size_t k = 0; k < n_purchases; ++k) {
        uint64_t record = 1 + rng() % n_records;
        std::string consumer = "c" + std::to_string(1 + rng() % n_consumers);
        sc.actions.push_back({ScenarioAction::Kind::Purchase, record, consumer});
    }
    sc.actions.push_back({ScenarioAction::Kind::Snapshot, 0, ""});
    return sc;
}

}  // namespace splitstore

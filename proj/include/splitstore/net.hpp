// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0
//
// Networked mode: binds the ledger and both storages to local TCP endpoints
// using the same line-format messages as the simulator, length-prefixed on
// the wire (4-byte big-endian size, then the line). One logical request per
// frame; a connection may carry several frames. The loopback deployment is a
// demonstrator — parties still trust their config, there is no TLS here.

#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <functional>
#include <optional>
#include <string>

#include "splitstore/consumer.hpp"
#include "splitstore/ledger.hpp"
#include "splitstore/storage_x.hpp"
#include "splitstore/storage_y.hpp"

namespace splitstore {

struct NetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr size_t kMaxFrame = 64u << 20;  // refuse absurd frames early

struct Endpoint {
    std::string host = "127.0.0.1";
    uint16_t port = 0;
};

inline Endpoint parse_endpoint(const std::string& s) {
    auto colon = s.rfind(':');
    if (colon == std::string::npos) throw NetError("endpoint must be host:port, got " + s);
    Endpoint ep;
    ep.host = s.substr(0, colon);
    unsigned long port = std::stoul(s.substr(colon + 1));
    if (port > 65535) throw NetError("port out of range in " + s);
    ep.port = static_cast<uint16_t>(port);
    return ep;
}

namespace detail {

// MSG_NOSIGNAL: a peer that hung up must surface as an error, not SIGPIPE.
inline void write_all(int fd, const unsigned char* p, size_t n) {
    while (n > 0) {
        ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) continue;
            throw NetError(std::string("send: ") + std::strerror(errno));
        }
        p += w;
        n -= static_cast<size_t>(w);
    }
}

// False on clean EOF at a frame boundary; throws mid-frame.
inline bool read_all(int fd, unsigned char* p, size_t n, bool eof_ok) {
    size_t got = 0;
    while (got < n) {
        ssize_t r = ::read(fd, p + got, n - got);
        if (r < 0) {
            if (errno == EINTR) continue;
            throw NetError(std::string("read: ") + std::strerror(errno));
        }
        if (r == 0) {
            if (got == 0 && eof_ok) return false;
            throw NetError("connection closed mid-frame");
        }
        got += static_cast<size_t>(r);
    }
    return true;
}

}  // namespace detail

inline void send_frame(int fd, std::string_view line) {
    if (line.size() > kMaxFrame) throw NetError("frame too large");
    unsigned char hdr[4];
    uint32_t n = static_cast<uint32_t>(line.size());
    hdr[0] = static_cast<unsigned char>(n >> 24);
    hdr[1] = static_cast<unsigned char>(n >> 16);
    hdr[2] = static_cast<unsigned char>(n >> 8);
    hdr[3] = static_cast<unsigned char>(n);
    detail::write_all(fd, hdr, 4);
    detail::write_all(fd, reinterpret_cast<const unsigned char*>(line.data()), line.size());
}

inline std::optional<std::string> recv_frame(int fd) {
    unsigned char hdr[4];
    if (!detail::read_all(fd, hdr, 4, true)) return std::nullopt;
    uint32_t n = (uint32_t(hdr[0]) << 24) | (uint32_t(hdr[1]) << 16) | (uint32_t(hdr[2]) << 8) |
                 uint32_t(hdr[3]);
    if (n > kMaxFrame) throw NetError("oversized frame announced");
    std::string out(n, '\0');
    detail::read_all(fd, reinterpret_cast<unsigned char*>(out.data()), n, false);
    return out;
}

inline int tcp_listen(const Endpoint& ep) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw NetError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw NetError("bad listen address " + ep.host);
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        int e = errno;
        ::close(fd);
        throw NetError(std::string("bind: ") + std::strerror(e));
    }
    if (::listen(fd, 16) < 0) {
        int e = errno;
        ::close(fd);
        throw NetError(std::string("listen: ") + std::strerror(e));
    }
    return fd;
}

inline uint16_t local_port(int listen_fd) {
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    if (::getsockname(listen_fd, reinterpret_cast<sockaddr*>(&addr), &len) < 0) {
        throw NetError(std::string("getsockname: ") + std::strerror(errno));
    }
    return ntohs(addr.sin_port);
}

inline int tcp_connect(const Endpoint& ep) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    std::string port = std::to_string(ep.port);
    int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res);
    if (rc != 0) throw NetError(std::string("getaddrinfo: ") + gai_strerror(rc));
    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw NetError("cannot connect to " + ep.host + ":" + port);
    return fd;
}

// Fire-and-forget: connect, send one frame, close without waiting. Used for
// control nudges where the sender must never block on the receiver (the
// receiver's handler may itself be calling back into the sender's loop).
inline void notify(const Endpoint& ep, const std::string& line) {
    int fd = tcp_connect(ep);
    try {
        send_frame(fd, line);
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
}

// One-shot exchange: connect, send a frame, read one frame back.
inline std::string request(const Endpoint& ep, const std::string& line) {
    int fd = tcp_connect(ep);
    std::string reply;
    try {
        send_frame(fd, line);
        auto r = recv_frame(fd);
        if (!r) throw NetError("peer closed without replying");
        reply = std::move(*r);
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
    return reply;
}

inline void throw_if_error(const std::string& reply) {
    if (reply.rfind("error ", 0) == 0) throw NetError("peer: " + reply.substr(6));
}

// Remote payment gate: X and Y consult the ledger process over TCP with the
// same verify-and-consume semantics as the in-process mock, and consumers
// pay through it.
class LedgerClient : public PaymentGate, public PaymentSubmitter {
public:
    explicit LedgerClient(Endpoint ep) : ep_(std::move(ep)) {}

    uint64_t price() const override {
        std::string reply = request(ep_, "price");
        throw_if_error(reply);
        return std::stoull(reply);
    }

    PaymentReceipt pay(uint64_t nft_id, const std::string& payer, uint64_t amount) override {
        std::string reply = request(ep_, "pay " + std::to_string(nft_id) + " " + payer + " " +
                                             std::to_string(amount));
        throw_if_error(reply);
        std::istringstream is(reply);
        std::string tag;
        PaymentReceipt r;
        if (!(is >> tag >> r.tx_id) || tag != "receipt") {
            throw NetError("bad pay reply: " + reply);
        }
        r.nft_id = nft_id;
        r.payer = payer;
        r.amount = amount;
        return r;
    }

    bool verify_and_consume(uint64_t nft_id, const std::string& payer, Side side) override {
        std::string reply = request(ep_, "consume " + std::to_string(nft_id) + " " + payer +
                                             " " + side_char(side));
        throw_if_error(reply);
        return reply == "ok";
    }

private:
    Endpoint ep_;
};

namespace detail {

template <typename Handler>
void serve_loop(int listen_fd, Handler&& handle) {
    for (;;) {
        int conn = ::accept(listen_fd, nullptr, nullptr);
        if (conn < 0) {
            if (errno == EINTR) continue;
            throw NetError(std::string("accept: ") + std::strerror(errno));
        }
        bool shutdown = false;
        try {
            while (auto frame = recv_frame(conn)) {
                if (*frame == "shutdown") {
                    send_frame(conn, "ok");
                    shutdown = true;
                    break;
                }
                std::string reply;
                try {
                    reply = handle(*frame);
                } catch (const std::exception& ex) {
                    reply = std::string("error ") + ex.what();
                }
                send_frame(conn, reply);
            }
        } catch (const NetError&) {
            // a botched client connection must not take the server down
        }
        ::close(conn);
        if (shutdown) break;
    }
    ::close(listen_fd);
}

}  // namespace detail

// Ledger server. Text protocol: "price", "pay <nft> <payer> <amount>",
// "consume <nft> <payer> <x|y>". Runs until a "shutdown" frame. on_mutate
// fires after every state change so a daemon can persist its journal.
inline void serve_ledger(MockLedger& ledger, int listen_fd,
                         std::function<void()> on_mutate = {}) {
    detail::serve_loop(listen_fd, [&](const std::string& frame) -> std::string {
        std::istringstream is(frame);
        std::string op;
        is >> op;
        if (op == "price") {
            return std::to_string(ledger.price());
        }
        if (op == "pay") {
            uint64_t nft = 0, amount = 0;
            std::string payer;
            if (!(is >> nft >> payer >> amount)) return "error malformed pay";
            PaymentReceipt r = ledger.pay(nft, payer, amount);
            if (on_mutate) on_mutate();
            return "receipt " + std::to_string(r.tx_id);
        }
        if (op == "consume") {
            uint64_t nft = 0;
            std::string payer, side;
            if (!(is >> nft >> payer >> side) || (side != "x" && side != "y")) {
                return "error malformed consume";
            }
            bool ok = ledger.verify_and_consume(nft, payer, side == "x" ? Side::X : Side::Y);
            if (ok && on_mutate) on_mutate();
            return ok ? "ok" : "no";
        }
        return "error unknown op " + op;
    });
}

// Storage X server. Accepts bootstrap/provision/rekey-init/fetch messages in
// transcript line format; after each successful serve it nudges Y (when a Y
// control endpoint is configured) to start the next re-encryption.
inline void serve_storage_x(StorageX& x, PaymentGate& gate, int listen_fd,
                            std::optional<Endpoint> y_ctl = std::nullopt,
                            std::function<void()> on_mutate = {}) {
    uint64_t seq = 0;
    detail::serve_loop(listen_fd, [&](const std::string& frame) -> std::string {
        if (frame.rfind("msg ", 0) != 0) return "error expected a message line";
        ProtocolMessage m = parse_message(frame);
        switch (m.type) {
            case MsgType::BootstrapX:
                x.install_master_key(std::get<BootstrapPayload>(m.payload).master_key);
                if (on_mutate) on_mutate();
                return "ok";
            case MsgType::ProvisionX:
                x.ingest(std::get<ProvisionXPayload>(m.payload));
                if (on_mutate) on_mutate();
                return "ok";
            case MsgType::RekeyInit: {
                RekeyAckPayload ack =
                    x.apply_rekey(std::get<RekeyInitPayload>(m.payload));
                if (on_mutate) on_mutate();
                ProtocolMessage out;
                out.seq = ++seq;
                out.type = MsgType::RekeyAck;
                out.sender = "x";
                out.receiver = m.sender;
                out.payload = ack;
                return format_message(out);
            }
            case MsgType::FetchRequestX: {
                const auto& req = std::get<FetchPayload>(m.payload);
                StorageX::ServeResult res = x.serve(req.record_id, req.consumer, gate);
                if (on_mutate) on_mutate();
                if (res.rekey && y_ctl) {
                    // Post-serve rekey trigger. One-way on purpose: Y's
                    // cascade calls back into this very loop, so waiting for
                    // Y's reply here would deadlock both parties. A dead Y
                    // just means the next serve happens at the same epoch.
                    try {
                        notify(*y_ctl, "ctl rekey_request i=" +
                                           std::to_string(res.rekey->record_id) +
                                           " j=" + std::to_string(res.rekey->epoch));
                    } catch (const std::exception&) {
                    }
                }
                ProtocolMessage out;
                out.seq = ++seq;
                out.type = MsgType::ServeX;
                out.sender = "x";
                out.receiver = req.consumer;
                out.payload = res.reply;
                return format_message(out);
            }
            default:
                return "error message type not for storage x";
        }
    });
}

// Storage Y server. Same line format, plus the control frame
// "ctl rekey_request i=<i> j=<j>" which makes Y run a full rekey cascade
// against the configured X endpoint.
inline void serve_storage_y(StorageY& y, PaymentGate& gate, int listen_fd,
                            std::optional<Endpoint> x_ep = std::nullopt,
                            std::function<void()> on_mutate = {}) {
    uint64_t seq = 0;
    detail::serve_loop(listen_fd, [&](const std::string& frame) -> std::string {
        if (frame.rfind("ctl rekey_request", 0) == 0) {
            std::istringstream is(frame.substr(std::string("ctl rekey_request").size()));
            uint64_t record_id = 0;
            std::string tok;
            while (is >> tok) {
                if (tok.rfind("i=", 0) == 0) record_id = std::stoull(tok.substr(2));
            }
            if (record_id == 0) return "error malformed rekey_request";
            if (!x_ep) return "error no x endpoint configured";

            // A cascade that died between init and ack leaves the record
            // pending; resend the stored init instead of failing forever.
            RekeyInitPayload init;
            if (auto stuck = y.pending_init(record_id)) {
                init = std::move(*stuck);
            } else {
                init = y.initiate_rekey(record_id);
                if (on_mutate) on_mutate();
            }
            ProtocolMessage m;
            m.seq = ++seq;
            m.type = MsgType::RekeyInit;
            m.sender = "y";
            m.receiver = "x";
            m.payload = init;
            std::string reply = request(*x_ep, format_message(m));
            throw_if_error(reply);
            ProtocolMessage ack = parse_message(reply);
            if (ack.type != MsgType::RekeyAck) return "error x replied with wrong type";
            y.commit_rekey(std::get<RekeyAckPayload>(ack.payload));
            if (on_mutate) on_mutate();
            return "ok";
        }
        if (frame.rfind("msg ", 0) != 0) return "error expected a message line";
        ProtocolMessage m = parse_message(frame);
        switch (m.type) {
            case MsgType::BootstrapY:
                y.install_master_key(std::get<BootstrapPayload>(m.payload).master_key);
                if (on_mutate) on_mutate();
                return "ok";
            case MsgType::ProvisionY:
                y.ingest_state(std::get<ProvisionYPayload>(m.payload));
                if (on_mutate) on_mutate();
                return "ok";
            case MsgType::FetchRequestY: {
                const auto& req = std::get<FetchPayload>(m.payload);
                ServeYPayload reply = y.serve_key(req.record_id, req.consumer, gate);
                if (on_mutate) on_mutate();
                ProtocolMessage out;
                out.seq = ++seq;
                out.type = MsgType::ServeY;
                out.sender = "y";
                out.receiver = req.consumer;
                out.payload = reply;
                return format_message(out);
            }
            default:
                return "error message type not for storage y";
        }
    });
}

// Consumer-side channels over TCP, usable with Consumer::purchase_and_fetch.
inline XChannel net_x_channel(Endpoint x_ep, const std::string& consumer) {
    return [x_ep, consumer](const FetchPayload& req) -> ServeXPayload {
        ProtocolMessage m;
        m.seq = 1;
        m.type = MsgType::FetchRequestX;
        m.sender = consumer;
        m.receiver = "x";
        m.payload = req;
        std::string reply;
        try {
            reply = request(x_ep, format_message(m));
        } catch (const NetError& ex) {
            throw DeliveryError(ex.what());
        }
        throw_if_error(reply);
        return std::get<ServeXPayload>(parse_message(reply).payload);
    };
}

inline YChannel net_y_channel(Endpoint y_ep, const std::string& consumer) {
    return [y_ep, consumer](const FetchPayload& req) -> ServeYPayload {
        ProtocolMessage m;
        m.seq = 1;
        m.type = MsgType::FetchRequestY;
        m.sender = consumer;
        m.receiver = "y";
        m.payload = req;
        std::string reply;
        try {
            reply = request(y_ep, format_message(m));
        } catch (const NetError& ex) {
            throw DeliveryError(ex.what());
        }
        throw_if_error(reply);
        return std::get<ServeYPayload>(parse_message(reply).payload);
    };
}

}  // namespace splitstore

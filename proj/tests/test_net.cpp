// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <thread>

#include "splitstore/message.hpp"
#include "splitstore/net.hpp"
#include "splitstore/owner.hpp"

using namespace splitstore;

namespace {

FieldParams small_params() {
    static const FieldParams params = [] {
        std::mt19937_64 eng(7);
        return generate_safe_prime(48, eng);
    }();
    return params;
}

// Listens on an ephemeral loopback port, runs the given serve function on its
// own thread, and tears the loop down with the shutdown sentinel. Declared
// after the state it serves, so unwinding stops the thread first.
class ServerThread {
public:
    template <typename Serve>
    explicit ServerThread(Serve serve) {
        int fd = tcp_listen(Endpoint{});
        ep_.port = local_port(fd);
        thread_ = std::thread([serve = std::move(serve), fd]() mutable { serve(fd); });
    }

    const Endpoint& endpoint() const { return ep_; }

    void shutdown() {
        if (!thread_.joinable()) return;
        request(ep_, "shutdown");
        thread_.join();
    }

    ~ServerThread() {
        try {
            shutdown();
        } catch (...) {
            if (thread_.joinable()) thread_.detach();
        }
    }

private:
    Endpoint ep_;
    std::thread thread_;
};

template <typename P>
std::string msg_line(uint64_t seq, MsgType type, const std::string& receiver, P payload) {
    ProtocolMessage m;
    m.seq = seq;
    m.type = type;
    m.sender = "owner";
    m.receiver = receiver;
    m.payload = std::move(payload);
    return format_message(m);
}

struct SocketPair {
    int fds[2] = {-1, -1};
    int& a = fds[0];
    int& b = fds[1];
    SocketPair() { REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0); }
    ~SocketPair() {
        if (a >= 0) ::close(a);
        if (b >= 0) ::close(b);
    }
};

}  // namespace

TEST_CASE("endpoint strings parse as host:port", "[net]") {
    Endpoint ep = parse_endpoint("127.0.0.1:7443");
    CHECK(ep.host == "127.0.0.1");
    CHECK(ep.port == 7443);
    CHECK(parse_endpoint("0.0.0.0:0").port == 0);

    CHECK_THROWS_AS(parse_endpoint("no-port-here"), NetError);
    CHECK_THROWS_AS(parse_endpoint("127.0.0.1:70000"), NetError);
}

TEST_CASE("frames are length-prefixed and byte-transparent", "[net]") {
    SECTION("roundtrip, including empty and NUL-bearing lines") {
        SocketPair sp;
        std::string nulled("a\0b", 3);
        send_frame(sp.a, "");
        send_frame(sp.a, "hello");
        send_frame(sp.a, nulled);
        send_frame(sp.a, std::string(5000, 'x'));
        CHECK(recv_frame(sp.b) == "");
        CHECK(recv_frame(sp.b) == "hello");
        CHECK(recv_frame(sp.b) == nulled);
        CHECK(recv_frame(sp.b) == std::string(5000, 'x'));
    }

    SECTION("a close at a frame boundary is a clean end of stream") {
        SocketPair sp;
        send_frame(sp.a, "last");
        ::close(sp.a);
        sp.a = -1;
        CHECK(recv_frame(sp.b) == "last");
        CHECK_FALSE(recv_frame(sp.b).has_value());
    }

    SECTION("a close inside a frame is an error") {
        SocketPair sp;
        const unsigned char partial[] = {0, 0, 0, 10, 'a', 'b', 'c'};
        REQUIRE(::send(sp.a, partial, sizeof(partial), MSG_NOSIGNAL) == sizeof(partial));
        ::close(sp.a);
        sp.a = -1;
        CHECK_THROWS_AS(recv_frame(sp.b), NetError);
    }

    SECTION("an absurd announced size is refused before reading it") {
        SocketPair sp;
        const unsigned char header[] = {0x04, 0x00, 0x00, 0x01};  // kMaxFrame + 1
        REQUIRE(::send(sp.a, header, sizeof(header), MSG_NOSIGNAL) == sizeof(header));
        CHECK_THROWS_AS(recv_frame(sp.b), NetError);
    }
}

TEST_CASE("the ledger serves price, payment, and consumption over tcp", "[net]") {
    MockLedger ledger(10);
    std::atomic<int> mutations{0};
    ServerThread srv([&](int fd) { serve_ledger(ledger, fd, [&] { mutations += 1; }); });
    LedgerClient client(srv.endpoint());

    CHECK(client.price() == 10);

    PaymentReceipt r = client.pay(1, "alice", 10);
    CHECK(r.tx_id >= 1);
    CHECK(r.nft_id == 1);
    CHECK(r.payer == "alice");
    CHECK(r.amount == 10);

    // The remote ledger enforces the price exactly as the in-process one.
    CHECK_THROWS_AS(client.pay(1, "mallory", 3), NetError);

    CHECK(client.verify_and_consume(1, "alice", Side::X));
    CHECK_FALSE(client.verify_and_consume(1, "alice", Side::X));  // slot burned
    CHECK(client.verify_and_consume(1, "alice", Side::Y));

    // Malformed frames are answered, not fatal.
    CHECK(request(srv.endpoint(), "bogus") == "error unknown op bogus");
    CHECK(request(srv.endpoint(), "pay oops") == "error malformed pay");
    CHECK(request(srv.endpoint(), "consume 1 alice z") == "error malformed consume");

    // One connection may carry several frames.
    int fd = tcp_connect(srv.endpoint());
    send_frame(fd, "price");
    send_frame(fd, "price");
    CHECK(recv_frame(fd) == "10");
    CHECK(recv_frame(fd) == "10");
    ::close(fd);

    srv.shutdown();
    CHECK(mutations.load() == 3);  // one pay, two honored consumes
    REQUIRE(ledger.receipt_count() == 1);
    CHECK(ledger.receipts()[0].consumed_x);
    CHECK(ledger.receipts()[0].consumed_y);
}

TEST_CASE("a consumer buys through live storage and ledger processes", "[net]") {
    FieldParams params = small_params();
    Owner owner(params, 21);
    owner.bootstrap();
    Bytes plaintext = bytes_of("the quick brown fox jumps over 13 lazy dogs");
    owner.add_record(1, plaintext);

    MockLedger ledger(10);
    StorageX x(params);
    StorageY y(params);

    ServerThread ledger_srv([&](int fd) { serve_ledger(ledger, fd); });
    LedgerClient gate_x(ledger_srv.endpoint());
    LedgerClient gate_y(ledger_srv.endpoint());

    // X is told where to nudge Y, and Y where to run its cascades against.
    // The two listeners must exist before either server needs the other.
    int x_fd = tcp_listen(Endpoint{});
    int y_fd = tcp_listen(Endpoint{});
    Endpoint x_ep{"127.0.0.1", local_port(x_fd)};
    Endpoint y_ep{"127.0.0.1", local_port(y_fd)};
    std::thread x_thread([&] { serve_storage_x(x, gate_x, x_fd, y_ep); });
    std::thread y_thread([&] { serve_storage_y(y, gate_y, y_fd, x_ep); });

    auto [px, py] = owner.provision(1);
    REQUIRE(request(x_ep, msg_line(1, MsgType::BootstrapX, "x",
                                   BootstrapPayload{Side::X, master_key_bytes(owner.mk_x())}))
            == "ok");
    REQUIRE(request(y_ep, msg_line(2, MsgType::BootstrapY, "y",
                                   BootstrapPayload{Side::Y, master_key_bytes(owner.mk_y())}))
            == "ok");
    REQUIRE(request(x_ep, msg_line(3, MsgType::ProvisionX, "x", px)) == "ok");
    REQUIRE(request(y_ep, msg_line(4, MsgType::ProvisionY, "y", py)) == "ok");

    // Frames the servers cannot act on come back as error replies.
    CHECK(request(x_ep, "what is this") == "error expected a message line");
    CHECK(request(x_ep, msg_line(5, MsgType::ProvisionY, "x", py)).rfind("error ", 0) == 0);
    CHECK(request(y_ep, msg_line(6, MsgType::ProvisionX, "y", px)).rfind("error ", 0) == 0);
    CHECK(request(y_ep, "ctl rekey_request j=2") == "error malformed rekey_request");

    // First re-encryption, driven through Y's control channel.
    REQUIRE(request(y_ep, "ctl rekey_request i=1 j=1") == "ok");

    Consumer alice("alice", params, 100);
    LedgerClient pay(ledger_srv.endpoint());
    XChannel to_x = net_x_channel(x_ep, "alice");
    YChannel to_y = net_y_channel(y_ep, "alice");

    FetchOutcome first = alice.purchase_and_fetch(1, pay, to_x, to_y);
    REQUIRE(first.ok);
    CHECK(first.plaintext == plaintext);
    CHECK(first.payments == 1);  // no mismatch race against the post-serve nudge

    // X's nudge has re-encrypted by now; a second purchase pays once again.
    FetchOutcome second = alice.purchase_and_fetch(1, pay, to_x, to_y);
    REQUIRE(second.ok);
    CHECK(second.plaintext == plaintext);
    CHECK(second.payments == 1);
    CHECK(alice.balance() == 80);

    auto [sx, sy] = alice.fetch_unpaid(1, to_x, to_y);
    CHECK(sx == ServeStatus::PaymentRequired);
    CHECK(sy == ServeStatus::PaymentRequired);

    // Y first: its queued cascade still needs X alive.
    request(y_ep, "shutdown");
    y_thread.join();
    request(x_ep, "shutdown");
    x_thread.join();
    ledger_srv.shutdown();

    CHECK(x.epoch_of(1) == 4);  // provision, ctl rekey, one nudge per serve
    CHECK(y.epoch_of(1) == 4);
    REQUIRE(ledger.receipt_count() == 2);
    CHECK(ledger.receipts()[1].consumed_x);
    CHECK(ledger.receipts()[1].consumed_y);
}

TEST_CASE("a wedged re-encryption heals through the control channel", "[net]") {
    FieldParams params = small_params();
    Owner owner(params, 5);
    owner.bootstrap();
    Bytes plaintext = bytes_of("wedged but recoverable");
    owner.add_record(1, plaintext);

    MockLedger ledger(10);
    StorageX x(params);
    StorageY y(params);
    x.install_master_key(master_key_bytes(owner.mk_x()));
    y.install_master_key(master_key_bytes(owner.mk_y()));
    auto [px, py] = owner.provision(1);
    x.ingest(px);
    y.ingest_state(py);

    // The first cascade died after Y went pending: X never saw the init.
    y.initiate_rekey(1);
    REQUIRE(y.pending_init(1).has_value());
    REQUIRE(x.epoch_of(1) == 1);

    ServerThread ledger_srv([&](int fd) { serve_ledger(ledger, fd); });
    LedgerClient gate_x(ledger_srv.endpoint());
    LedgerClient gate_y(ledger_srv.endpoint());
    int x_fd = tcp_listen(Endpoint{});
    int y_fd = tcp_listen(Endpoint{});
    Endpoint x_ep{"127.0.0.1", local_port(x_fd)};
    Endpoint y_ep{"127.0.0.1", local_port(y_fd)};
    std::thread x_thread([&] { serve_storage_x(x, gate_x, x_fd, y_ep); });
    std::thread y_thread([&] { serve_storage_y(y, gate_y, y_fd, x_ep); });

    // The nudge resends the stored init instead of failing forever.
    REQUIRE(request(y_ep, "ctl rekey_request i=1 j=1") == "ok");

    Consumer carol("carol", params, 50);
    LedgerClient pay(ledger_srv.endpoint());
    FetchOutcome out = carol.purchase_and_fetch(1, pay, net_x_channel(x_ep, "carol"),
                                                net_y_channel(y_ep, "carol"));
    REQUIRE(out.ok);
    CHECK(out.plaintext == plaintext);
    CHECK(out.payments == 1);

    request(y_ep, "shutdown");
    y_thread.join();
    request(x_ep, "shutdown");
    x_thread.join();
    ledger_srv.shutdown();

    CHECK_FALSE(y.pending_init(1).has_value());
    CHECK(x.epoch_of(1) == 3);  // healed to 2, then the post-serve cascade
    CHECK(y.epoch_of(1) == 3);
}

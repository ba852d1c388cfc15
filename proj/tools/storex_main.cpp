// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0
//
// Storage X daemon and maintenance CLI. serve-loop answers fetch and rekey
// messages over TCP, consulting the ledger endpoint for payment verification
// and nudging Y after each serve; audit recomputes the accumulator invariants
// from the master key.

#include <CLI11.hpp>

#include "common.hpp"

using namespace splitstore;

int main(int argc, char** argv) {
    CLI::App app{"storage X: encrypted data store and partial key store"};
    app.require_subcommand(1);

    std::string state = "state";
    app.add_option("--state", state, "state directory")->capture_default_str();

    std::string listen = "127.0.0.1:0";
    std::string ledger_ep;
    std::string notify_y;
    auto* serve = app.add_subcommand("serve-loop", "serve fetch/rekey requests over TCP");
    serve->add_option("--listen", listen, "host:port to bind (port 0 = ephemeral)")
        ->capture_default_str();
    serve->add_option("--ledger", ledger_ep, "ledger endpoint host:port")->required();
    serve->add_option("--notify-y", notify_y,
                      "storage Y control endpoint for post-serve rekey requests");

    auto* audit = app.add_subcommand("audit", "check key-store invariants, exit 1 on violation");

    CLI11_PARSE(app, argc, argv);

    return tool::guarded("storex", [&]() -> int {
        FieldParams params = tool::read_params(state);
        StorageX x(params);
        x.restore(tool::x_dir(state));

        if (audit->parsed()) {
            std::vector<std::string> bad = x.audit();
            for (const auto& v : bad) std::cout << "violation: " << v << "\n";
            std::cout << (bad.empty() ? "audit clean" : "audit failed") << ": "
                      << x.record_ids().size() << " record(s)\n";
            return bad.empty() ? 0 : 1;
        }

        LedgerClient gate(parse_endpoint(ledger_ep));
        std::optional<Endpoint> y_ctl;
        if (!notify_y.empty()) y_ctl = parse_endpoint(notify_y);

        int fd = tcp_listen(parse_endpoint(listen));
        std::cout << "storage x listening on port " << local_port(fd) << std::endl;
        serve_storage_x(x, gate, fd, y_ctl, [&] { x.save(tool::x_dir(state)); });
        std::cout << "storage x shut down\n";
        return 0;
    });
}

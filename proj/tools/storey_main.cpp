// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0
//
// Storage Y daemon and maintenance CLI. serve-loop releases partial keys to
// paid consumers and, on X's control nudge, runs the rekey cascade against
// the configured X endpoint; audit recomputes accumulator invariants.

#include <CLI11.hpp>

#include "common.hpp"

using namespace splitstore;

int main(int argc, char** argv) {
    CLI::App app{"storage Y: rented key store and rekey initiator"};
    app.require_subcommand(1);

    std::string state = "state";
    app.add_option("--state", state, "state directory")->capture_default_str();

    std::string listen = "127.0.0.1:0";
    std::string ledger_ep;
    std::string x_ep;
    auto* serve = app.add_subcommand("serve-loop", "serve key requests over TCP");
    serve->add_option("--listen", listen, "host:port to bind (port 0 = ephemeral)")
        ->capture_default_str();
    serve->add_option("--ledger", ledger_ep, "ledger endpoint host:port")->required();
    serve->add_option("--x", x_ep, "storage X endpoint for rekey cascades");

    auto* audit = app.add_subcommand("audit", "check key-store invariants, exit 1 on violation");

    CLI11_PARSE(app, argc, argv);

    return tool::guarded("storey", [&]() -> int {
        FieldParams params = tool::read_params(state);
        StorageY y(params);
        y.restore(tool::y_dir(state));

        if (audit->parsed()) {
            std::vector<std::string> bad = y.audit();
            for (const auto& v : bad) std::cout << "violation: " << v << "\n";
            std::cout << (bad.empty() ? "audit clean" : "audit failed") << ": "
                      << y.record_ids().size() << " record(s)\n";
            return bad.empty() ? 0 : 1;
        }

        LedgerClient gate(parse_endpoint(ledger_ep));
        std::optional<Endpoint> to_x;
        if (!x_ep.empty()) to_x = parse_endpoint(x_ep);

        int fd = tcp_listen(parse_endpoint(listen));
        std::cout << "storage y listening on port " << local_port(fd) << std::endl;
        serve_storage_y(y, gate, fd, to_x, [&] { y.save(tool::y_dir(state)); });
        std::cout << "storage y shut down\n";
        return 0;
    });
}

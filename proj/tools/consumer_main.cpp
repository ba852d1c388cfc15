// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0
//
// Consumer CLI. `buy` pays the ledger, fetches ciphertext from X and the
// partial key from Y, combines the inverses and writes the plaintext. Two
// deployments: networked (--x/--y/--ledger endpoints against running
// serve-loops) and local (--state, every party loaded in-process). Exits
// nonzero when payment or retrieval fails.

#include <CLI11.hpp>

#include "common.hpp"

using namespace splitstore;

namespace {

int report(const FetchOutcome& out, const std::string& out_path) {
    for (const auto& line : out.trail) std::cout << "  " << line << "\n";
    if (!out.ok) {
        std::cerr << "purchase failed after " << out.payments << " payment(s)\n";
        return 2;
    }
    tool::write_file_bytes(out_path, out.plaintext);
    std::cout << "wrote " << out.plaintext.size() << " bytes to " << out_path << " ("
              << out.payments << " payment(s), epoch " << out.bundle.epoch << ")\n";
    return 0;
}

int buy_networked(const std::string& name, uint64_t balance, uint64_t id,
                  const std::string& out_path, const std::string& x_ep,
                  const std::string& y_ep, const std::string& ledger_ep,
                  const std::string& params_path) {
    FieldParams params = FieldParams::default_1024();
    if (!params_path.empty()) {
        std::ifstream is(params_path);
        if (!is) throw std::runtime_error("cannot read " + params_path);
        params = load_params(is);
    }
    LedgerClient ledger(parse_endpoint(ledger_ep));
    Consumer consumer(name, params, balance);
    FetchOutcome out = consumer.purchase_and_fetch(id, ledger,
                                                   net_x_channel(parse_endpoint(x_ep), name),
                                                   net_y_channel(parse_endpoint(y_ep), name));
    return report(out, out_path);
}

int buy_local(const std::string& name, uint64_t balance, uint64_t id,
              const std::string& out_path, const tool::fs::path& state) {
    FieldParams params = tool::read_params(state);
    MockLedger ledger(tool::read_price(state));
    tool::load_journal_if_any(state, ledger);
    StorageX x(params);
    x.restore(tool::x_dir(state));
    StorageY y(params);
    y.restore(tool::y_dir(state));

    // In-process channels; post-serve rekeys run after the purchase settles,
    // exactly like the simulator's cascade ordering.
    std::vector<RekeyRequest> pending;
    XChannel to_x = [&](const FetchPayload& req) {
        StorageX::ServeResult res = x.serve(req.record_id, req.consumer, ledger);
        if (res.rekey) pending.push_back(*res.rekey);
        return res.reply;
    };
    YChannel to_y = [&](const FetchPayload& req) {
        return y.serve_key(req.record_id, req.consumer, ledger);
    };

    Consumer consumer(name, params, balance);
    FetchOutcome out = consumer.purchase_and_fetch(id, ledger, to_x, to_y);
    for (const RekeyRequest& r : pending) {
        RekeyInitPayload init = y.initiate_rekey(r.record_id);
        y.commit_rekey(x.apply_rekey(init));
    }

    x.save(tool::x_dir(state));
    y.save(tool::y_dir(state));
    tool::save_journal(state, ledger);
    return report(out, out_path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"consumer: pay for and retrieve a record"};
    app.require_subcommand(1);

    std::string name = "consumer";
    uint64_t balance = 1000;
    app.add_option("--name", name, "payer identity on the ledger")->capture_default_str();
    app.add_option("--balance", balance, "spendable balance")->capture_default_str();

    uint64_t id = 0;
    std::string out_path;
    std::string state, x_ep, y_ep, ledger_ep, params_path;
    auto* buy = app.add_subcommand("buy", "purchase and decrypt one record");
    buy->add_option("--id", id, "NFT index i")->required();
    buy->add_option("--out", out_path, "plaintext output file")->required();
    buy->add_option("--state", state, "state directory (local mode)");
    buy->add_option("--x", x_ep, "storage X endpoint (networked mode)");
    buy->add_option("--y", y_ep, "storage Y endpoint (networked mode)");
    buy->add_option("--ledger", ledger_ep, "ledger endpoint (networked mode)");
    buy->add_option("--params", params_path,
                    "field-parameter file (networked mode; default: built-in prime)");

    CLI11_PARSE(app, argc, argv);

    return tool::guarded("consumer", [&]() -> int {
        bool networked = !x_ep.empty() || !y_ep.empty() || !ledger_ep.empty();
        if (networked) {
            if (x_ep.empty() || y_ep.empty() || ledger_ep.empty()) {
                throw std::runtime_error("networked mode needs --x, --y and --ledger");
            }
            return buy_networked(name, balance, id, out_path, x_ep, y_ep, ledger_ep,
                                 params_path);
        }
        if (state.empty()) {
            throw std::runtime_error("pass --state for local mode or --x/--y/--ledger");
        }
        return buy_local(name, balance, id, out_path, state);
    });
}

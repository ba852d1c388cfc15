// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0
//
// Simulator CLI: deterministic multi-party scenario runs, transcript audit
// and replay, parameter generation, and the ledger daemon for networked
// deployments.

#include <CLI11.hpp>

#include "common.hpp"

using namespace splitstore;

namespace {

int cmd_run(const std::string& config, uint64_t seed, bool seed_set, const std::string& out) {
    Scenario sc = load_scenario(config);
    if (seed_set) sc.seed = seed;

    RunResult res = run_scenario(sc);

    std::ofstream os(out);
    if (!os) throw std::runtime_error("cannot write " + out);
    write_transcript(res.transcript, os);

    size_t ok = 0;
    for (const auto& o : res.outcomes) ok += o.ok ? 1 : 0;
    std::cout << "transcript: " << out << "\n"
              << "  messages:  " << res.transcript.messages().size() << "\n"
              << "  purchases: " << ok << "/" << res.outcomes.size() << " ok\n";
    if (res.halted) std::cout << "  halted:    " << res.halt_reason << "\n";
    return 0;
}

int cmd_audit(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    Transcript t = read_transcript(is);
    AuditReport rep = audit_transcript(t);
    for (const auto& v : rep.violations) std::cout << "violation: " << v << "\n";
    std::cout << (rep.ok() ? "audit clean" : "audit failed") << ": "
              << t.messages().size() << " message(s)\n";
    return rep.ok() ? 0 : 1;
}

int cmd_replay(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    Transcript t = read_transcript(is);
    try {
        ReplayResult res = replay(t);
        std::cout << "replay ok: final states reproduced ("
                  << t.messages().size() << " message(s))\n";
        (void)res;
        return 0;
    } catch (const ReplayMismatchError& ex) {
        std::cout << "replay mismatch: " << ex.what() << "\n";
        return 1;
    }
}

int cmd_gen_params(unsigned bits, uint64_t seed, const std::string& out) {
    std::mt19937_64 rng(seed);
    FieldParams params = generate_safe_prime(bits, rng);
    if (out.empty()) {
        save_params(params, std::cout);
    } else {
        std::ofstream os(out);
        if (!os) throw std::runtime_error("cannot write " + out);
        save_params(params, os);
        std::cout << "wrote " << params.p_bits << "-bit parameters to " << out << "\n";
    }
    return 0;
}

int cmd_ledger(const tool::fs::path& state, const std::string& listen) {
    MockLedger ledger(tool::read_price(state));
    tool::load_journal_if_any(state, ledger);
    int fd = tcp_listen(parse_endpoint(listen));
    std::cout << "ledger listening on port " << local_port(fd) << std::endl;
    serve_ledger(ledger, fd, [&] { tool::save_journal(state, ledger); });
    std::cout << "ledger shut down\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"protocol simulator: scenario runs, transcript audit/replay, services"};
    app.require_subcommand(1);

    std::string config, out_path = "transcript.txt";
    uint64_t seed = 1;
    auto* run = app.add_subcommand("run", "execute a scenario and record the transcript");
    run->add_option("--config", config, "scenario file")->required()->check(CLI::ExistingFile);
    auto* seed_opt = run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--out", out_path, "transcript output file")->capture_default_str();

    std::string audit_path;
    auto* audit = app.add_subcommand("audit", "security-audit a transcript, exit 1 on violation");
    audit->add_option("transcript", audit_path, "transcript file")
        ->required()
        ->check(CLI::ExistingFile);

    std::string replay_path;
    auto* rep = app.add_subcommand("replay", "re-execute a transcript against fresh parties");
    rep->add_option("transcript", replay_path, "transcript file")
        ->required()
        ->check(CLI::ExistingFile);

    unsigned bits = 1024;
    uint64_t gen_seed = 1;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen-params", "generate safe-prime field parameters");
    gen->add_option("--bits", bits, "prime size in bits")->capture_default_str();
    gen->add_option("--seed", gen_seed, "deterministic seed")->capture_default_str();
    gen->add_option("--out", gen_out, "output file (default: stdout)");

    std::string state = "state", listen = "127.0.0.1:0";
    auto* led = app.add_subcommand("ledger", "run the payment ledger daemon");
    led->add_option("--state", state, "state directory")->capture_default_str();
    led->add_option("--listen", listen, "host:port to bind (port 0 = ephemeral)")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    return tool::guarded("sim", [&]() -> int {
        if (run->parsed()) return cmd_run(config, seed, seed_opt->count() > 0, out_path);
        if (audit->parsed()) return cmd_audit(audit_path);
        if (rep->parsed()) return cmd_replay(replay_path);
        if (gen->parsed()) return cmd_gen_params(bits, gen_seed, gen_out);
        return cmd_ledger(state, listen);
    });
}

// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0
//
// Record-owner CLI. The owner works offline: bootstrap distributes the two
// master keys into the storage state directories (the trusted step-1/step-2
// channel), add-record encrypts and provisions a record and applies the
// initial re-encryption so it is immediately servable.

#include <CLI11.hpp>

#include "common.hpp"

using namespace splitstore;

namespace {

int cmd_bootstrap(const tool::fs::path& state, uint64_t seed, uint64_t price,
                  const std::string& params_path, unsigned gen_bits) {
    if (tool::fs::exists(tool::params_file(state))) {
        throw std::runtime_error("state directory already bootstrapped: " + state.string());
    }
    tool::fs::create_directories(state);

    FieldParams params;
    if (!params_path.empty()) {
        std::ifstream is(params_path);
        if (!is) throw std::runtime_error("cannot read " + params_path);
        params = load_params(is);
    } else if (gen_bits != 0) {
        std::mt19937_64 rng(seed);
        std::cout << "generating a " << gen_bits << "-bit safe prime...\n";
        params = generate_safe_prime(gen_bits, rng);
    } else {
        params = FieldParams::default_1024();
    }
    tool::write_params(state, params);
    tool::write_price(state, price);

    Owner owner(params, seed);
    auto [boot_x, boot_y] = owner.bootstrap();
    owner.save(tool::owner_dir(state));

    // Step 1/2 key delivery: seed each storage's directory with its key.
    StorageX x(params);
    x.install_master_key(boot_x.master_key);
    x.save(tool::x_dir(state));
    StorageY y(params);
    y.install_master_key(boot_y.master_key);
    y.save(tool::y_dir(state));

    std::cout << "bootstrapped " << state.string() << "\n"
              << "  p_bits = " << params.p_bits << "\n"
              << "  price  = " << price << "\n";
    return 0;
}

int cmd_add_record(const tool::fs::path& state, uint64_t seed, uint64_t id,
                   const std::string& file) {
    FieldParams params = tool::read_params(state);
    Owner owner = Owner::load(tool::owner_dir(state), params, seed);
    StorageX x(params);
    x.restore(tool::x_dir(state));
    StorageY y(params);
    y.restore(tool::y_dir(state));

    owner.add_record(id, tool::read_file_bytes(file));
    owner.save(tool::owner_dir(state));

    auto [prov_x, prov_y] = owner.provision(id);
    x.ingest(prov_x);
    y.ingest_state(prov_y);

    // First re-encryption (epoch 1 -> 2): records are never served at the
    // epoch the owner produced.
    RekeyInitPayload init = y.initiate_rekey(id);
    RekeyAckPayload ack = x.apply_rekey(init);
    y.commit_rekey(ack);

    x.save(tool::x_dir(state));
    y.save(tool::y_dir(state));

    std::cout << "record " << id << ": " << prov_x.blocks.size() << " block(s), "
              << prov_x.original_length << " bytes, epoch " << x.epoch_of(id) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"record owner: bootstrap a deployment and provision records"};
    app.require_subcommand(1);

    std::string state = "state";
    uint64_t seed = 0;
    app.add_option("--state", state, "state directory")->capture_default_str();
    app.add_option("--seed", seed, "deterministic seed (0 = random)")->capture_default_str();

    uint64_t price = 10;
    std::string params_path;
    unsigned gen_bits = 0;
    auto* boot = app.add_subcommand("bootstrap", "create keys, parameters and party state");
    boot->add_option("--price", price, "per-NFT price")->capture_default_str();
    boot->add_option("--params", params_path, "field-parameter file (default: built-in 1024-bit prime)");
    boot->add_option("--gen-bits", gen_bits, "generate a fresh safe prime of this size instead");

    uint64_t id = 0;
    std::string file;
    auto* add = app.add_subcommand("add-record", "encrypt and provision one record");
    add->add_option("--id", id, "NFT index i")->required();
    add->add_option("--file", file, "plaintext input file")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    if (seed == 0) seed = std::random_device{}();

    return tool::guarded("owner", [&]() -> int {
        if (boot->parsed()) return cmd_bootstrap(state, seed, price, params_path, gen_bits);
        return cmd_add_record(state, seed, id, file);
    });
}

// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared state-directory conventions for the command-line tools. Every party
// reads and writes under one state directory:
//   params.txt      field parameters (p, q, p_bits)
//   price.txt       per-NFT price in abstract units
//   ledger.journal  append-only receipt journal
//   owner/ x/ y/    per-party persistent state

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "splitstore/splitstore.hpp"

namespace tool {

namespace fs = std::filesystem;

inline fs::path params_file(const fs::path& state) { return state / "params.txt"; }
inline fs::path price_file(const fs::path& state) { return state / "price.txt"; }
inline fs::path journal_file(const fs::path& state) { return state / "ledger.journal"; }
inline fs::path owner_dir(const fs::path& state) { return state / "owner"; }
inline fs::path x_dir(const fs::path& state) { return state / "x"; }
inline fs::path y_dir(const fs::path& state) { return state / "y"; }

inline splitstore::FieldParams read_params(const fs::path& state) {
    std::ifstream is(params_file(state));
    if (!is) {
        throw std::runtime_error("no field parameters at " + params_file(state).string() +
                                 " (run `owner bootstrap` first)");
    }
    return splitstore::load_params(is);
}

inline void write_params(const fs::path& state, const splitstore::FieldParams& params) {
    std::ofstream os(params_file(state));
    if (!os) throw std::runtime_error("cannot write " + params_file(state).string());
    splitstore::save_params(params, os);
}

inline uint64_t read_price(const fs::path& state) {
    std::ifstream is(price_file(state));
    uint64_t price = 0;
    if (!is || !(is >> price)) {
        throw std::runtime_error("no price at " + price_file(state).string() +
                                 " (run `owner bootstrap` first)");
    }
    return price;
}

inline void write_price(const fs::path& state, uint64_t price) {
    std::ofstream os(price_file(state));
    os << price << "\n";
}

inline void load_journal_if_any(const fs::path& state, splitstore::MockLedger& ledger) {
    std::ifstream is(journal_file(state));
    if (is) ledger.load_journal(is);
}

inline void save_journal(const fs::path& state, const splitstore::MockLedger& ledger) {
    std::ofstream os(journal_file(state));
    os << ledger.journal();
}

inline splitstore::Bytes read_file_bytes(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + p.string());
    return splitstore::Bytes(std::istreambuf_iterator<char>(is),
                             std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const fs::path& p, const splitstore::Bytes& data) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size()));
}

// Uniform top-level error reporting: tools exit 1 on operational failure.
template <typename Fn>
int guarded(const char* tool, Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& ex) {
        std::cerr << tool << ": " << ex.what() << "\n";
        return 1;
    }
}

}  // namespace tool

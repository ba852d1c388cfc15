// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <boost/multiprecision/miller_rabin.hpp>

#include <functional>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "splitstore/bigint.hpp"

namespace splitstore {

// 64 Miller-Rabin rounds: error probability <= 4^-64 = 2^-128.
inline constexpr unsigned kPrimalityRounds = 64;

inline bool is_probable_prime(const Bigint& n, unsigned rounds = kPrimalityRounds) {
    if (n < 2) return false;
    std::mt19937_64 gen(0x73706c69747374ULL ^ static_cast<uint64_t>(n % 0x7fffffff));
    return boost::multiprecision::miller_rabin_test(n, rounds, gen);
}

// p is safe iff p and (p-1)/2 are both prime.
inline bool is_safe_prime(const Bigint& p) {
    if (p < 5) return false;
    if (!is_probable_prime(p)) return false;
    return is_probable_prime((p - 1) / 2);
}

// The field F_p* for a safe prime p = 2q + 1. Immutable once constructed.
struct FieldParams {
    Bigint p;
    Bigint q;
    unsigned p_bits = 0;

    static FieldParams make(const Bigint& p) {
        if (!is_safe_prime(p)) throw std::invalid_argument("FieldParams: p is not a safe prime");
        return FieldParams{p, (p - 1) / 2, bit_length(p)};
    }

    // RFC 2409 Oakley Group 2 1024-bit MODP prime; fixed, pre-validated.
    static const FieldParams& default_1024() {
        static const FieldParams params = make(Bigint(
            "0xffffffffffffffffc90fdaa22168c234c4c6628b80dc1cd129024e088a67cc74"
            "020bbea63b139b22514a08798e3404ddef9519b3cd3a431b302b0a6df25f1437"
            "4fe1356d6d51c245e485b576625e7ec6f44c42e9a637ed6b0bff5cb6f406b7ed"
            "ee386bfb5a899fa5ae9f24117c4b1fe649286651ece65381ffffffffffffffff"));
        return params;
    }

    bool operator==(const FieldParams& o) const = default;
};

inline void require_element(const Bigint& a, const FieldParams& params, const char* who) {
    if (a < 1 || a >= params.p) {
        throw std::invalid_argument(std::string(who) + ": value outside [1, p-1]");
    }
}

inline Bigint mod_exp(const Bigint& base, const Bigint& exp, const FieldParams& params) {
    require_element(base, params, "mod_exp");
    if (exp < 0) throw std::invalid_argument("mod_exp: negative exponent");
    return boost::multiprecision::powm(base, exp, params.p);
}

// Extended Euclid; rejects values congruent to 0 mod p.
inline Bigint mod_inv(const Bigint& a, const FieldParams& params) {
    Bigint r = a % params.p;
    if (r < 0) r += params.p;
    if (r == 0) throw std::invalid_argument("mod_inv: zero is not invertible");
    Bigint r0 = params.p, r1 = r;
    Bigint t0 = 0, t1 = 1;
    while (r1 != 0) {
        Bigint quot = r0 / r1;
        Bigint r2 = r0 - quot * r1;
        r0 = r1;
        r1 = r2;
        Bigint t2 = t0 - quot * t1;
        t0 = t1;
        t1 = t2;
    }
    if (r0 != 1) throw std::invalid_argument("mod_inv: value not coprime with p");
    if (t0 < 0) t0 += params.p;
    return t0;
}

// a^q == -1 mod p. Sufficient for order 2q except at a = p-1 (order 2),
// which also satisfies it; pair with has_large_order for acceptance.
inline bool fermat_generator_test(const Bigint& a, const FieldParams& params) {
    require_element(a, params, "fermat_generator_test");
    return mod_exp(a, params.q, params) == params.p - 1;
}

// a^2 != 1 mod p. Under a safe prime this forces order(a) in {q, 2q}.
inline bool has_large_order(const Bigint& a, const FieldParams& params) {
    require_element(a, params, "has_large_order");
    return (a * a) % params.p != 1;
}

// Draws candidates from `next` until one passes the single-squaring test.
// Only 1 and p-1 fail, so two draws suffice in expectation.
inline Bigint find_large_order_element(const FieldParams& params,
                                       const std::function<Bigint()>& next) {
    for (;;) {
        Bigint a = next();
        require_element(a, params, "find_large_order_element");
        if (has_large_order(a, params)) return a;
    }
}

// Uniform element of [1, p-1] by rejection sampling over p_bits-wide draws.
template <typename Engine>
Bigint random_element(const FieldParams& params, Engine& eng) {
    const size_t nbytes = (params.p_bits + 7) / 8;
    Bytes buf(nbytes);
    for (;;) {
        fill_random(eng, buf);
        Bigint v = from_bytes_be(buf);
        v >>= (8 * nbytes - params.p_bits);
        if (v >= 1 && v < params.p) return v;
    }
}

template <typename Engine>
std::function<Bigint()> element_source(const FieldParams& params, Engine& eng) {
    return [&params, &eng]() { return random_element(params, eng); };
}

template <typename Engine>
Bigint pick_generator(const FieldParams& params, Engine& eng) {
    return find_large_order_element(params, element_source(params, eng));
}

namespace detail {

inline const std::vector<uint32_t>& small_primes() {
    static const std::vector<uint32_t> primes = [] {
        std::vector<uint32_t> out;
        std::vector<bool> sieve(8192, true);
        for (uint32_t i = 2; i < sieve.size(); ++i) {
            if (!sieve[i]) continue;
            out.push_back(i);
            for (uint32_t j = i * 2; j < sieve.size(); j += i) sieve[j] = false;
        }
        return out;
    }();
    return primes;
}

inline bool sieve_pass(const Bigint& n) {
    for (uint32_t sp : small_primes()) {
        if (n == sp) return true;
        if (n % sp == 0) return false;
    }
    return true;
}

}  // namespace detail

// Offline search for p = 2q+1 with both prime. Cost grows quadratically in
// bits; intended for the gen-params subcommand, not the hot path.
template <typename Engine>
FieldParams generate_safe_prime(unsigned bits, Engine& eng) {
    if (bits < 8) throw std::invalid_argument("generate_safe_prime: need at least 8 bits");
    for (;;) {
        const size_t nbytes = (bits + 7) / 8;
        Bytes buf(nbytes);
        fill_random(eng, buf);
        Bigint q = from_bytes_be(buf);
        q >>= (8 * nbytes - (bits - 1));
        q |= (Bigint(1) << (bits - 2));  // force bit length
        q |= 1;                          // force odd
        Bigint p = 2 * q + 1;
        if (!detail::sieve_pass(q) || !detail::sieve_pass(p)) continue;
        if (!is_probable_prime(q, 2) || !is_probable_prime(p, 2)) continue;
        if (!is_probable_prime(q) || !is_probable_prime(p)) continue;
        if (bit_length(p) < bits) continue;
        return FieldParams{p, q, bit_length(p)};
    }
}

// Text document with keys p, q, p_bits.
inline void save_params(const FieldParams& params, std::ostream& os) {
    os << "p = " << to_hex(params.p) << "\n";
    os << "q = " << to_hex(params.q) << "\n";
    os << "p_bits = " << params.p_bits << "\n";
}

inline FieldParams load_params(std::istream& is) {
    Bigint p, q;
    unsigned p_bits = 0;
    bool have_p = false, have_q = false, have_bits = false;
    std::string line;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string key, eq, value;
        if (!(ls >> key >> eq >> value) || eq != "=") continue;
        if (key == "p") {
            p = bigint_from_hex(value);
            have_p = true;
        } else if (key == "q") {
            q = bigint_from_hex(value);
            have_q = true;
        } else if (key == "p_bits") {
            p_bits = static_cast<unsigned>(std::stoul(value));
            have_bits = true;
        }
    }
    if (!have_p || !have_q || !have_bits) throw std::invalid_argument("load_params: missing key");
    FieldParams params = FieldParams::make(p);
    if (params.q != q || params.p_bits != p_bits) {
        throw std::invalid_argument("load_params: inconsistent document");
    }
    return params;
}

}  // namespace splitstore

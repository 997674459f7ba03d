#pragma once

// Shared error types, seeded RNG helpers, and a small parallel map used
// across the tuning library.

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace tunekit {

class TuneError : public std::runtime_error {
public:
    explicit TuneError(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public TuneError {
public:
    explicit ParseError(const std::string& what) : TuneError(what) {}
};

class PoleError : public TuneError {
public:
    explicit PoleError(const std::string& what) : TuneError(what) {}
};

// Deterministic uniform generator. All randomness in the library flows
// through this wrapper so that results depend only on the 64-bit seed,
// not on any library distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard exponential via inversion; used for Dirichlet sampling
    double exponential() {
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return -std::log(u);
    }

    std::uint64_t next_seed() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

// Global worker count for parallel maps; the CLI sets this from its
// --threads flag. 0 means hardware concurrency.
inline unsigned& worker_count() {
    static unsigned n = 0;
    return n;
}

// Order-preserving parallel map over [0, n). The reduction done by callers
// must not depend on completion order; results are indexed by i.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    unsigned workers = worker_count();
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned t = 0; t < workers; ++t) {
        std::size_t lo = t * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace tunekit

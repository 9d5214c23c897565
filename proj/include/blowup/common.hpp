#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace blowup {

// ---------------------------------------------------------------------------
// Error taxonomy. Everything user-facing derives from Error so the CLI can
// catch one type and report the message.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DomainError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct NumericalError : Error {
    using Error::Error;
};

// Requested time lies at or past the ODE blow-up; carries T1.
struct BlowupPassedError : Error {
    double t1;
    BlowupPassedError(const std::string& msg, double t1_) : Error(msg), t1(t1_) {}
};

struct NoBlowupError : Error {
    using Error::Error;
};

// phi + psi left the positive regime the scheme assumes.
struct RegimeError : Error {
    using Error::Error;
};

struct NotReachedError : Error {
    using Error::Error;
};

struct IllConditionedError : Error {
    using Error::Error;
};

struct InsufficientCoverageError : Error {
    using Error::Error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct OutsideDomainError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Small numeric helpers
// ---------------------------------------------------------------------------

/// x^p with fast paths for the exponents that dominate the hot loops.
inline double pow_pos(double x, double p) {
    if (p == 2.0) return x * x;
    if (p == 3.0) return x * x * x;
    if (p == 1.5) return x * std::sqrt(x);
    return std::pow(x, p);
}

inline bool nearly_integer(double x, double tol = 1e-9) {
    return std::fabs(x - std::llround(x)) <= tol * (1.0 + std::fabs(x));
}

/// Format a double with 17 significant digits (round-trip exact).
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Deterministic parallelism.
//
// Worker threads get fixed contiguous index ranges, so results are written to
// disjoint slots and the output is bitwise identical for any thread count.
// ---------------------------------------------------------------------------

/// Thread cap from BLOWUP_LAB_THREADS (unset or 0 = hardware concurrency).
inline int thread_count() {
    const char* env = std::getenv("BLOWUP_LAB_THREADS");
    long n = 0;
    if (env != nullptr && *env != '\0') n = std::strtol(env, nullptr, 10);
    if (n <= 0) n = static_cast<long>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    return static_cast<int>(n);
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const int threads = thread_count();
    if (threads <= 1 || n < 4096) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t chunk = (n + threads - 1) / threads;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        const std::size_t lo = static_cast<std::size_t>(t) * chunk;
        if (lo >= n) break;
        const std::size_t hi = std::min(n, lo + chunk);
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace blowup

#pragma once
// Shared small utilities: complex alias, error types, deterministic summation,
// Gauss-Legendre node tables, fixed-format float printing, thread pool knob.
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace evo {

using cplx = std::complex<double>;
inline constexpr double pi = 3.14159265358979323846;

// ---------------------------------------------------------------- error types

struct config_error : std::runtime_error {
    explicit config_error(const std::string& m) : std::runtime_error(m) {}
};

struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& m) : std::runtime_error(m) {}
};

struct singular_denominator : numeric_error {
    explicit singular_denominator(const std::string& m) : numeric_error(m) {}
};

struct unsupported_error : std::runtime_error {
    explicit unsupported_error(const std::string& m) : std::runtime_error(m) {}
};

// ------------------------------------------------------- deterministic sums

// Pairwise (cascade) summation over a fixed-order range. Deterministic for a
// given element order and immune to the worst linear-accumulation cancellation.
template <class T>
T pairwise_sum(const T* data, std::size_t n) {
    if (n == 0) return T{};
    if (n <= 8) {
        T s = data[0];
        for (std::size_t i = 1; i < n; ++i) s += data[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(data, h) + pairwise_sum(data + h, n - h);
}

template <class T>
T pairwise_sum(const std::vector<T>& v) {
    return pairwise_sum(v.data(), v.size());
}

// Accumulator that keeps a flat buffer and reduces pairwise on demand.
template <class T>
struct pairwise_acc {
    std::vector<T> buf;
    void add(const T& x) { buf.push_back(x); }
    T total() const { return pairwise_sum(buf); }
};

// ---------------------------------------------------------------- threading

// Worker-count knob. All parallel loops partition work into chunks whose
// boundaries do not depend on the thread count, and combine per-chunk results
// in chunk order, so results are identical for any EVOASYM_THREADS value.
inline unsigned worker_count() {
    if (const char* s = std::getenv("EVOASYM_THREADS")) {
        long v = std::strtol(s, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

// Runs fn(chunk_index) for chunk_index in [0, n_chunks). Chunked static
// schedule; fn must write only into its own chunk's slot.
template <class Fn>
void parallel_chunks(std::size_t n_chunks, Fn&& fn) {
    unsigned nt = worker_count();
    if (nt <= 1 || n_chunks <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) fn(c);
        return;
    }
    if (nt > n_chunks) nt = static_cast<unsigned>(n_chunks);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (unsigned w = 0; w < nt; ++w) {
        pool.emplace_back([=] {
            for (std::size_t c = w; c < n_chunks; c += nt) fn(c);
        });
    }
    for (auto& th : pool) th.join();
}

// ------------------------------------------------------------- formatting

// Fixed 17-significant-digit form used for every float that reaches an output
// file; guarantees byte-identical re-runs and value round-trip.
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ------------------------------------------------------ Gauss-Legendre rule

// Nodes/weights on [-1,1]; Newton iteration from the Chebyshev estimate with a
// fixed sweep count, so tables are reproducible bit-for-bit.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
}

// Affine map of the [-1,1] rule onto [a,b].
inline void gauss_legendre_ab(int n, double a, double b,
                              std::vector<double>& x, std::vector<double>& w) {
    gauss_legendre(n, x, w);
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    for (int i = 0; i < n; ++i) {
        x[i] = c + h * x[i];
        w[i] *= h;
    }
}

}  // namespace evo

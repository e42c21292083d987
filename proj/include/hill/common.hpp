// Shared numeric utilities: cardinal sine, deterministic RNG streams,
// pairwise summation, Gauss-Legendre nodes, small statistics helpers.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hill {

inline constexpr double kPi = 3.14159265358979323846;

// sinc(x) = sin(pi x)/(pi x), sinc(0) = 1.
inline double sinc(double x) {
    double u = kPi * x;
    if (std::abs(u) < 1e-4) {
        double u2 = u * u;
        return 1.0 - u2 / 6.0 * (1.0 - u2 / 20.0);
    }
    return std::sin(u) / u;
}

inline std::complex<double> sinc(std::complex<double> z) {
    std::complex<double> u = kPi * z;
    if (std::abs(u) < 1e-4) {
        auto u2 = u * u;
        return 1.0 - u2 / 6.0 * (1.0 - u2 / 20.0);
    }
    return std::sin(u) / u;
}

// sinc'(x) = (cos(pi x) - sinc(x)) / x.
inline double sinc_deriv(double x) {
    if (std::abs(x) < 1e-4) {
        double p2 = kPi * kPi;
        return -p2 * x / 3.0 * (1.0 - p2 * x * x / 10.0);
    }
    return (std::cos(kPi * x) - sinc(x)) / x;
}

// Order-insensitive deterministic reduction.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    size_t h = v.size() / 2;
    return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(std::span<const double>(v));
}

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ with a splitmix-seeded state; gaussians by Marsaglia polar.
// Self-contained so streams are stable across standard libraries.
class Rng {
  public:
    explicit Rng(uint64_t seed) {
        uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
        spare_valid_ = false;
    }
    // Stream for trial i of a batch, independent of thread scheduling.
    static Rng for_trial(uint64_t master_seed, uint64_t trial) {
        uint64_t s = master_seed;
        uint64_t mixed = splitmix64(s) ^ (0x632be59bd9b4e019ULL * (trial + 1));
        return Rng(mixed);
    }

    uint64_t next_u64() {
        auto rotl = [](uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
        uint64_t* s = state_;
        uint64_t result = rotl(s[0] + s[3], 23) + s[0];
        uint64_t t = s[1] << 17;
        s[2] ^= s[0]; s[3] ^= s[1]; s[1] ^= s[2]; s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }

    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double gaussian() {
        if (spare_valid_) { spare_valid_ = false; return spare_; }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        spare_valid_ = true;
        return u * f;
    }

  private:
    uint64_t state_[4];
    double spare_ = 0.0;
    bool spare_valid_;
};

inline unsigned hardware_threads() {
    unsigned n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("HILL_THREADS")) {
        long cap = std::strtol(env, nullptr, 10);
        if (cap > 0 && static_cast<unsigned>(cap) < n) n = static_cast<unsigned>(cap);
    }
    return n;
}

// Runs fn(i) for i in [0, count). Work is indexed, so outputs written by
// index are identical for any thread count.
inline void parallel_for(size_t count, const std::function<void(size_t)>& fn) {
    unsigned nthreads = hardware_threads();
    if (nthreads <= 1 || count <= 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex err_mutex;
    for (unsigned t = 0; t < nthreads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

struct GaussLegendre {
    std::vector<double> x;  // nodes on [-1, 1]
    std::vector<double> w;
};

// Nodes by Newton iteration on the Legendre recurrence.
inline const GaussLegendre& gauss_legendre(int n) {
    static std::mutex mu;
    static std::vector<std::unique_ptr<GaussLegendre>> cache;
    std::lock_guard<std::mutex> lock(mu);
    if (static_cast<size_t>(n) >= cache.size()) cache.resize(n + 1);
    if (!cache[n]) {
        auto rule = std::make_unique<GaussLegendre>();
        rule->x.resize(n);
        rule->w.resize(n);
        int m = (n + 1) / 2;
        for (int i = 0; i < m; ++i) {
            double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
            double pp = 0.0, dz;
            do {
                double p1 = 1.0, p2 = 0.0;
                for (int j = 1; j <= n; ++j) {
                    double p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j - 1) * z * p2 - (j - 1) * p3) / j;
                }
                pp = n * (z * p1 - p2) / (z * z - 1.0);
                dz = -p1 / pp;
                z += dz;
            } while (std::abs(dz) > 1e-15);
            rule->x[i] = -z;
            rule->x[n - 1 - i] = z;
            rule->w[i] = rule->w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
        }
        cache[n] = std::move(rule);
    }
    return *cache[n];
}

struct LinearFit {
    double slope = 0.0, intercept = 0.0, r_squared = 0.0;
};

inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("linear_fit: need >= 2 matched points");
    double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i]; sy += y[i];
        sxx += x[i] * x[i]; sxy += x[i] * y[i]; syy += y[i] * y[i];
    }
    double den = n * sxx - sx * sx;
    LinearFit f;
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
    double ss_tot = syy - sy * sy / n;
    double ss_res = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        double e = y[i] - (f.slope * x[i] + f.intercept);
        ss_res += e * e;
    }
    f.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return f;
}

inline double mean_of(std::span<const double> v) {
    return pairwise_sum(v) / static_cast<double>(v.size());
}

inline double variance_of(std::span<const double> v) {
    double m = mean_of(v);
    std::vector<double> sq(v.size());
    for (size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - m) * (v[i] - m);
    return pairwise_sum(sq) / static_cast<double>(v.size());
}

}  // namespace hill

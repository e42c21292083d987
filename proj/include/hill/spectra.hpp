// Periodic, antiperiodic and Dirichlet eigenvalues of Hill's equation by
// window-bracketed root finding on the discriminant, an independent Fourier
// truncation oracle, the Dirichlet Green's kernel, contour midpoints, and the
// derived sequences (gaps, t, tau, xi).
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "hill/common.hpp"
#include "hill/floquet.hpp"
#include "hill/potential.hpp"

namespace hill {

inline constexpr double kDefaultRootTol = 1e-9;

struct SpectralData {
    std::vector<double> lambdas;   // lambda_0 <= lambda_1 <= ... <= lambda_{2 j_max}
    std::vector<bool> merged;      // per gap j = 1..j_max: treated as closed
    std::vector<double> mus;       // mu_1..mu_{j_max}
    std::vector<double> gaps;      // d_j = lambda_{2j} - lambda_{2j-1}
    int j_max = 0;
    double tol = kDefaultRootTol;
};

namespace detail {

// Bisection to a coarse bracket, then safeguarded Newton. fd returns the
// (value, derivative) pair in one evaluation.
template <class F, class FD>
double refine_root(F&& f, FD&& fd, double a, double b, double fa, double tol) {
    double coarse = std::max(tol * 1e3, (b - a) * 1e-3);
    while (b - a > coarse) {
        double m = 0.5 * (a + b), fm = f(m);
        if (fm == 0.0) return m;
        if ((fa < 0) == (fm < 0)) { a = m; fa = fm; } else { b = m; }
    }
    double x = 0.5 * (a + b);
    for (int it = 0; it < 30; ++it) {
        auto [fx, dfx] = fd(x);
        if (fx == 0.0) return x;
        if ((fa < 0) == (fx < 0)) { a = x; fa = fx; } else { b = x; }
        double xn = (dfx != 0.0) ? x - fx / dfx : 0.5 * (a + b);
        if (!(xn > a && xn < b)) xn = 0.5 * (a + b);
        if (std::abs(xn - x) < tol && b - a < 64 * tol) return xn;
        x = xn;
        if (b - a < 0.25 * tol) break;
    }
    return 0.5 * (a + b);
}

}  // namespace detail

// First 2*j_max + 1 zeros of Delta^2 - 4. The principal series solves
// Delta = 2 and the complementary series Delta = -2, alternating per gap;
// each pair (lambda_{2n-1}, lambda_{2n}) is bracketed in a window around
// n^2/4 + a0/2, and a tangency of |Delta| = 2 is a closed gap.
inline std::pair<std::vector<double>, std::vector<bool>> periodic_spectrum_flagged(
    const PotentialSpec& spec, int j_max, double tol = kDefaultRootTol,
    double ode_tol = kDefaultOdeTol) {
    if (j_max < 1) throw std::invalid_argument("periodic_spectrum: j_max >= 1");
    const double shift = 0.5 * spec.a0;
    const double qnorm = std::sqrt(norm_sq(spec));

    auto delta = [&](double l) { return propagate(spec, l, false, ode_tol).delta; };
    auto delta_pair = [&](double l) {
        auto s = propagate(spec, l, true, ode_tol);
        return std::pair<double, double>(s.delta, s.delta_prime);
    };

    std::vector<double> lams;
    std::vector<bool> merged(j_max + 1, false);
    lams.reserve(2 * j_max + 1);

    // lambda_0: lowest zero of Delta - 2; Delta -> +infinity as lambda -> -inf.
    {
        double hi = shift + 0.05;
        while (delta(hi) - 2.0 >= 0.0) {
            hi += 0.1;
            if (hi > shift + 2.0) throw std::runtime_error("periodic_spectrum: lost lambda_0");
        }
        double step = std::max(0.25, sup_norm_bound(spec));
        double lo = hi - 0.1, flo = delta(lo) - 2.0;
        while (flo <= 0.0) {
            lo -= step;
            step *= 1.5;
            flo = delta(lo) - 2.0;
            if (lo < shift - 1e4) throw std::runtime_error("periodic_spectrum: lost lambda_0");
        }
        lams.push_back(detail::refine_root(
            [&](double l) { return delta(l) - 2.0; },
            [&](double l) { auto [d, dp] = delta_pair(l); return std::pair(d - 2.0, dp); },
            lo, hi, flo, tol));
    }

    for (int n = 1; n <= j_max; ++n) {
        const double sgn = (n % 2 == 1) ? -1.0 : 1.0;
        auto dfun = [&](double l) { return delta(l) - 2.0 * sgn; };
        auto dfun_pair = [&](double l) {
            auto [d, dp] = delta_pair(l);
            return std::pair(d - 2.0 * sgn, dp);
        };
        const double center = 0.25 * n * n + shift;
        const double wcap = (2.0 * n + 1.0) / 8.0;
        double w = std::min(std::sqrt(double(n)) * std::max(0.25, qnorm), wcap);

        bool done = false;
        // Resolve a suspected tangency near lambda = guess: Newton on Delta'
        // to the extremum, then either a closed gap or a quadratic recovery
        // of a barely-open pair.
        auto resolve_extremum = [&](double lo, double hi, double guess) -> bool {
            double dplo = delta_pair(std::max(lo, guess - 0.25 * wcap)).second;
            double dphi = delta_pair(std::min(hi, guess + 0.25 * wcap)).second;
            double a = std::max(lo, guess - 0.25 * wcap), b = std::min(hi, guess + 0.25 * wcap);
            if ((dplo < 0) == (dphi < 0)) { a = lo; b = hi;
                dplo = delta_pair(a).second; dphi = delta_pair(b).second;
                if ((dplo < 0) == (dphi < 0)) return false;
            }
            double ext = detail::refine_root(
                [&](double l) { return delta_pair(l).second; },
                [&](double l) {
                    double h = 1e-6 * (1.0 + std::abs(l));
                    double d =
                        (delta_pair(l + h).second - delta_pair(l - h).second) / (2 * h);
                    return std::pair(delta_pair(l).second, d);
                },
                a, b, dplo, tol);
            double dext = dfun(ext);
            double h = std::max(1e-5, 1e-3 * wcap);
            double curv = (dfun(ext + h) - 2.0 * dext + dfun(ext - h)) / (h * h);
            if (std::abs(dext) <= 1e-10 * (1.0 + std::abs(center)) ||
                (dext < 0) == (curv < 0) || curv == 0.0) {
                merged[n] = true;
                lams.push_back(ext);
                lams.push_back(ext);
                return true;
            }
            double half = std::sqrt(-2.0 * dext / curv);
            double ra = ext - 2.0 * half, rb = ext + 2.0 * half;
            double fa = dfun(ra), fb = dfun(rb);
            if ((fa < 0) != (dext < 0) && (fb < 0) != (dext < 0)) {
                lams.push_back(detail::refine_root(dfun, dfun_pair, ra, ext, fa, tol));
                lams.push_back(detail::refine_root(dfun, dfun_pair, ext, rb, dext, tol));
                return true;
            }
            return false;
        };

        for (int attempt = 0; attempt < 2 && !done; ++attempt) {
            double lo = std::max(center - w, lams.back() + 0.25 * tol);
            double hi = center + w;
            const int K = attempt == 0 ? 17 : 41;
            std::vector<double> xs(K), fs(K);
            for (int i = 0; i < K; ++i) {
                xs[i] = lo + (hi - lo) * i / (K - 1);
                fs[i] = dfun(xs[i]);
            }
            std::vector<std::array<double, 3>> brackets;  // {a, b, f(a)}
            for (int i = 0; i + 1 < K; ++i)
                if ((fs[i] < 0) != (fs[i + 1] < 0))
                    brackets.push_back({xs[i], xs[i + 1], fs[i]});

            if (brackets.size() > 2) {
                // keep the two closest to the window center
                std::sort(brackets.begin(), brackets.end(),
                          [&](const auto& p, const auto& q) {
                              return std::abs(0.5 * (p[0] + p[1]) - center) <
                                     std::abs(0.5 * (q[0] + q[1]) - center);
                          });
                brackets.resize(2);
                std::sort(brackets.begin(), brackets.end());
            }
            if (brackets.size() == 2) {
                double r1 = detail::refine_root(dfun, dfun_pair, brackets[0][0], brackets[0][1],
                                                brackets[0][2], tol);
                double r2 = detail::refine_root(dfun, dfun_pair, brackets[1][0], brackets[1][1],
                                                brackets[1][2], tol);
                lams.push_back(std::min(r1, r2));
                lams.push_back(std::max(r1, r2));
                done = true;
                break;
            }
            if (brackets.empty()) {
                // best tangency candidate from the scan
                double guess = xs[0];
                double best = std::abs(fs[0]);
                for (int i = 1; i < K; ++i)
                    if (std::abs(fs[i]) < best) { best = std::abs(fs[i]); guess = xs[i]; }
                if (resolve_extremum(lo, hi, guess)) { done = true; break; }
            }
            w = std::min(2.0 * w, wcap * 1.4);  // widen once and rescan denser
        }

        if (!done) {
            // The asymptotic window misses wide low-index gaps of strong
            // potentials; march right from the previous eigenvalue instead.
            double x = lams.back() + 0.25 * tol;
            double limit = center + 4.0 * wcap + sup_norm_bound(spec);
            double h = std::max(0.02, 0.02 * n);
            double fx = dfun(x);
            std::vector<std::array<double, 3>> found;
            double best_x = x, best_f = std::abs(fx);
            while (x < limit && found.size() < 2) {
                double xn = x + h, fn = dfun(xn);
                if ((fx < 0) != (fn < 0)) found.push_back({x, xn, fx});
                if (std::abs(fn) < best_f) { best_f = std::abs(fn); best_x = xn; }
                x = xn;
                fx = fn;
            }
            bool crossings_far = !found.empty() && found[0][0] > center + 2.0 * wcap;
            if ((found.empty() || crossings_far) && best_f < 0.1) {
                // a near-tangency precedes any crossing: likely a closed gap
                done = resolve_extremum(lams.back() + 0.25 * tol,
                                        crossings_far ? found[0][0] : limit, best_x);
            }
            if (!done && found.size() >= 2) {
                double r1 = detail::refine_root(dfun, dfun_pair, found[0][0], found[0][1],
                                                found[0][2], tol);
                double r2 = detail::refine_root(dfun, dfun_pair, found[1][0], found[1][1],
                                                found[1][2], tol);
                lams.push_back(std::min(r1, r2));
                lams.push_back(std::max(r1, r2));
                done = true;
            }
        }
        if (!done)
            throw std::runtime_error("periodic_spectrum: bracket failure at gap index " +
                                     std::to_string(n));
    }
    return {lams, merged};
}

inline std::vector<double> periodic_spectrum(const PotentialSpec& spec, int j_max,
                                             double tol = kDefaultRootTol,
                                             double ode_tol = kDefaultOdeTol) {
    return periodic_spectrum_flagged(spec, j_max, tol, ode_tol).first;
}

// Dirichlet (tied) eigenvalues: zeros of g_lambda(2pi), one per gap
// [lambda_{2j-1}, lambda_{2j}], bracketed by interlacing.
inline std::vector<double> dirichlet_spectrum(const PotentialSpec& spec, int j_max,
                                              double tol = kDefaultRootTol,
                                              const std::vector<double>* lambdas_in = nullptr,
                                              double ode_tol = kDefaultOdeTol) {
    std::vector<double> lams;
    if (lambdas_in) {
        lams = *lambdas_in;
        if (static_cast<int>(lams.size()) < 2 * j_max + 1)
            throw std::invalid_argument("dirichlet_spectrum: lambdas too short for j_max");
    } else {
        lams = periodic_spectrum(spec, j_max, tol, ode_tol);
    }
    auto gend = [&](double l) { return propagate(spec, l, false, ode_tol).g_end; };
    auto gend_pair = [&](double l) {
        std::array<double, 8> y{1, 0, 0, 1, 0, 0, 0, 0};
        auto rhs = [&](double x, const std::array<double, 8>& v, std::array<double, 8>& d) {
            double w = eval_potential(spec, x) - l;
            d[0] = v[1]; d[1] = w * v[0];
            d[2] = v[3]; d[3] = w * v[2];
            d[4] = v[5]; d[5] = w * v[4] - v[0];
            d[6] = v[7]; d[7] = w * v[6] - v[2];
        };
        y = integrate_dopri5<double, 8>(rhs, y, 0.0, 2.0 * kPi, ode_tol);
        return std::pair<double, double>(y[2], y[6]);
    };

    std::vector<double> mus(j_max);
    parallel_for(j_max, [&](size_t idx) {
        int j = static_cast<int>(idx) + 1;
        double a = lams[2 * j - 1], b = lams[2 * j];
        // The bracket pad must cover the edge uncertainty of nearly closed
        // gaps, where the pair refinement is sqrt-limited.
        double pad = std::max({tol, 1e-7, 0.05 * (b - a)});
        double mu = 0.0;
        bool found = false;
        for (int widen = 0; widen < 2 && !found; ++widen, pad *= 10.0) {
            double lo = a - pad, hi = b + pad;
            double flo = gend(lo), fhi = gend(hi);
            if ((flo < 0) != (fhi < 0)) {
                mu = detail::refine_root(gend, gend_pair, lo, hi, flo, tol);
                found = true;
            } else if (b - a <= pad) {
                mu = 0.5 * (a + b);  // closed gap: tied eigenvalue at the double root
                found = true;
            }
        }
        if (!found)
            throw std::runtime_error(
                "dirichlet_spectrum: no sign change across open gap index " +
                std::to_string(j) + " (integrator tolerance too loose)");
        mus[idx] = std::clamp(mu, a, b);  // interlacing clamp within tolerance
    });
    return mus;
}

inline SpectralData build_spectral_data(const PotentialSpec& spec, int j_max,
                                        double tol = kDefaultRootTol,
                                        double ode_tol = kDefaultOdeTol) {
    SpectralData sd;
    sd.j_max = j_max;
    sd.tol = tol;
    auto [lams, merged] = periodic_spectrum_flagged(spec, j_max, tol, ode_tol);
    sd.lambdas = std::move(lams);
    sd.merged = std::move(merged);
    sd.mus = dirichlet_spectrum(spec, j_max, tol, &sd.lambdas, ode_tol);
    sd.gaps.resize(j_max);
    for (int j = 1; j <= j_max; ++j) sd.gaps[j - 1] = sd.lambdas[2 * j] - sd.lambdas[2 * j - 1];
    return sd;
}

enum class BoundaryCondition { periodic, antiperiodic, dirichlet };

// Self-adjoint Fourier truncation of -d^2/dx^2 + q in the exponential basis
// e^{inx} (periodic), e^{i(n+1/2)x} (antiperiodic), or sin(jx/2) (Dirichlet
// on [0, 2pi]). Independent verification oracle for the ODE spectra.
inline std::vector<double> fourier_matrix_oracle(const PotentialSpec& spec, int mode_cut,
                                                 BoundaryCondition bc, int count) {
    if (bc == BoundaryCondition::periodic || bc == BoundaryCondition::antiperiodic) {
        int K = mode_cut;
        int dim = 2 * K + 1;
        if (count > dim) throw std::invalid_argument("fourier_matrix_oracle: count > dim");
        auto qhat = [&](int m) -> std::complex<double> {
            if (m == 0) return 0.5 * spec.a0;
            int am = std::abs(m);
            if (am > spec.modes()) return 0.0;
            std::complex<double> v(0.5 * spec.a[am - 1], -0.5 * spec.b[am - 1]);
            return m > 0 ? v : std::conj(v);
        };
        Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(dim, dim);
        for (int r = 0; r < dim; ++r) {
            double freq = (r - K) + (bc == BoundaryCondition::antiperiodic ? 0.5 : 0.0);
            for (int c = 0; c < dim; ++c) {
                H(r, c) = qhat((r - K) - (c - K));
                if (r == c) H(r, c) += freq * freq;
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
        return std::vector<double>(es.eigenvalues().data(), es.eigenvalues().data() + count);
    }
    // Dirichlet: orthonormal basis sqrt(2) sin(jx/2), j = 1..K, on
    // L2([0, 2pi], dx/2pi). Matrix elements in closed form:
    //   V[j][k] = C(j - k) - C(j + k),  C(m) = int q cos(mx/2) dx / 2pi,
    // where even m picks the cosine coefficients of q and odd m couples only
    // to the sine part.
    int K = mode_cut;
    if (count > K) throw std::invalid_argument("fourier_matrix_oracle: count > dim");
    auto C = [&](int m) -> double {
        m = std::abs(m);
        if (m % 2 == 0) {
            int p = m / 2;
            if (p == 0) return 0.5 * spec.a0;
            return p <= spec.modes() ? 0.5 * spec.a[p - 1] : 0.0;
        }
        double s = 0.0;
        for (int n = 1; n <= spec.modes(); ++n)
            if (spec.b[n - 1] != 0.0)
                s += spec.b[n - 1] * (n / kPi) / (double(n) * n - 0.25 * m * m);
        return s;
    };
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(K, K);
    for (int j = 1; j <= K; ++j)
        for (int k = 1; k <= K; ++k) {
            H(j - 1, k - 1) = C(j - k) - C(j + k);
            if (j == k) H(j - 1, k - 1) += 0.25 * j * j;
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
    return std::vector<double>(es.eigenvalues().data(), es.eigenvalues().data() + count);
}

// Green's function of zeta - d^2/dx^2 with Dirichlet ends on [0, 2pi].
inline double greens_kernel(double zeta, double x, double y) {
    if (!(zeta > 0)) throw std::invalid_argument("greens_kernel: zeta > 0 required");
    if (x < 0 || x > 2 * kPi || y < 0 || y > 2 * kPi)
        throw std::invalid_argument("greens_kernel: x, y in [0, 2pi] required");
    double rz = std::sqrt(zeta);
    double lo = std::min(x, y), hi = std::max(x, y);
    return std::sinh(lo * rz) * std::sinh((2.0 * kPi - hi) * rz) /
           (rz * std::sinh(2.0 * kPi * rz));
}

// (1/2 pi i) contour integral of lambda Delta Delta' / (Delta^2 - 4) around
// C(j^2/4, radius); equals the midpoint of the j-th instability interval.
inline double midpoint_contour(const PotentialSpec& spec, int j, double radius,
                               int nodes = 64, const std::vector<double>* lambdas_in = nullptr,
                               double ode_tol = kDefaultOdeTol) {
    std::vector<double> lams =
        lambdas_in ? *lambdas_in : periodic_spectrum(spec, j + 1, kDefaultRootTol, ode_tol);
    const double center = 0.25 * j * j;
    for (size_t i = 0; i < lams.size(); ++i) {
        bool inside = std::abs(lams[i] - center) < radius;
        bool wanted = (i == size_t(2 * j - 1)) || (i == size_t(2 * j));
        if (inside != wanted)
            throw std::runtime_error("midpoint_contour: eigenvalue index " + std::to_string(i) +
                                     " at " + std::to_string(lams[i]) +
                                     (inside ? " falls inside" : " falls outside") +
                                     " the contour");
    }
    std::vector<std::complex<double>> vals(nodes);
    parallel_for(nodes, [&](size_t k) {
        double th = 2.0 * kPi * (k + 0.5) / nodes;
        std::complex<double> lam = center + radius * std::exp(std::complex<double>(0, th));
        auto s = propagate(spec, lam, true, ode_tol);
        std::complex<double> f = lam * s.delta * s.delta_prime / (s.delta * s.delta - 4.0);
        vals[k] = f * (lam - center);
    });
    std::complex<double> acc = 0.0;
    for (auto& v : vals) acc += v;
    std::complex<double> integral = acc / double(nodes);  // (1/2pi i) * oint
    if (std::abs(integral.imag()) > 1e-6)
        throw std::runtime_error("midpoint_contour: imaginary part " +
                                 std::to_string(integral.imag()) + " exceeds 1e-6");
    return integral.real();
}

inline std::vector<double> gap_lengths(const std::vector<double>& lambdas) {
    std::vector<double> g;
    for (size_t j = 1; 2 * j < lambdas.size(); ++j)
        g.push_back(lambdas[2 * j] - lambdas[2 * j - 1]);
    return g;
}

// Sampling points of (1.9) type: stride 2 gives t_n = sqrt(lambda_{2n} -
// lambda_0) (density 2), stride 4 gives t_n = sqrt(lambda_{4n} - lambda_0)
// (unit density). Returned symmetric, indexed -m..m with t_0 = 0.
inline std::vector<double> sampling_t(const std::vector<double>& lambdas, int stride) {
    if (stride != 2 && stride != 4)
        throw std::invalid_argument("sampling_t: stride must be 2 or 4");
    int m = static_cast<int>(lambdas.size() - 1) / stride;
    std::vector<double> t(2 * m + 1, 0.0);
    for (int n = 1; n <= m; ++n) {
        double v = std::sqrt(lambdas[stride * n] - lambdas[0]);
        t[m + n] = v;
        t[m - n] = -v;
    }
    return t;
}

// tau_j = sqrt(2 (lambda_{2j} + lambda_{2j-1})); entries with a negative
// radicand come out purely imaginary and are combined pairwise downstream.
// Indexed j = 0..m with tau_0 = 0; tau_{-j} = -tau_j by convention.
inline std::vector<std::complex<double>> tau_sequence(const std::vector<double>& lambdas) {
    int m = static_cast<int>((lambdas.size() - 1) / 2);
    std::vector<std::complex<double>> tau(m + 1, 0.0);
    for (int j = 1; j <= m; ++j) {
        double r = 2.0 * (lambdas[2 * j] + lambdas[2 * j - 1]);
        tau[j] = r >= 0 ? std::complex<double>(std::sqrt(r), 0.0)
                        : std::complex<double>(0.0, std::sqrt(-r));
    }
    return tau;
}

// xi_j = 2 sqrt(mu_j) - j, imaginary-flagged like tau when mu_j < 0.
inline std::vector<std::complex<double>> xi_sequence(const std::vector<double>& mus) {
    std::vector<std::complex<double>> xi(mus.size() + 1, 0.0);
    for (size_t j = 1; j <= mus.size(); ++j) {
        double mu = mus[j - 1];
        std::complex<double> root = mu >= 0 ? std::complex<double>(std::sqrt(mu), 0.0)
                                            : std::complex<double>(0.0, std::sqrt(-mu));
        xi[j] = 2.0 * root - double(j);
    }
    return xi;
}

}  // namespace hill

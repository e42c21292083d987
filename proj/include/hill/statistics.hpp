// Linear statistics over random spectra, the two-regime rate function, free
// energy and Legendre transform estimation, the Hopf-Lax infimum convolution,
// and the Monte Carlo concentration and gap-scaling experiments.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "hill/common.hpp"
#include "hill/potential.hpp"
#include "hill/spectra.hpp"

namespace hill {

// Band-limited test function g(x) = sum_{|j| <= K} c_j sinc(x - j); the
// integer sinc family is orthonormal, so ||g||_{L2}^2 = sum c_j^2.
struct BandLimited {
    std::vector<double> c;  // indexed -K..K
    int K = 0;

    BandLimited() = default;
    explicit BandLimited(std::vector<double> coeffs) : c(std::move(coeffs)) {
        if (c.size() % 2 == 0 || c.empty())
            throw std::invalid_argument("BandLimited: coefficient window must be odd");
        K = static_cast<int>(c.size() / 2);
    }
    static BandLimited sinc_kernel() { return BandLimited(std::vector<double>{0.0, 1.0, 0.0}); }

    double l2_norm() const {
        double s = 0.0;
        for (double v : c) s += v * v;
        return std::sqrt(s);
    }
    double operator()(double x) const {
        double s = 0.0;
        for (int j = -K; j <= K; ++j) s += c[j + K] * sinc(x - j);
        return s;
    }
    std::complex<double> operator()(std::complex<double> z) const {
        std::complex<double> s = 0.0;
        for (int j = -K; j <= K; ++j) s += c[j + K] * sinc(z - double(j));
        return s;
    }
    double deriv(double x) const {
        double s = 0.0;
        for (int j = -K; j <= K; ++j) s += c[j + K] * sinc_deriv(x - j);
        return s;
    }
    // sinc'' from the ODE (x s)'' = -pi^2 x s.
    double second_deriv(double x) const {
        double s = 0.0;
        for (int j = -K; j <= K; ++j) {
            double u = x - j;
            if (std::abs(u) < 1e-4) {
                s += c[j + K] * (-kPi * kPi / 3.0 + std::pow(kPi, 4) * u * u / 10.0);
            } else {
                s += c[j + K] * (-kPi * kPi * sinc(u) - 2.0 * sinc_deriv(u) / u);
            }
        }
        return s;
    }
};

// F_m(tau) = sum_{j=-m..m} (g(tau_j) - g(j)), with the (j, -j) pairs combined
// first so purely imaginary tau entries contribute the real pair value.
inline double linear_statistic(const BandLimited& g,
                               const std::vector<std::complex<double>>& tau, int m) {
    if (m >= static_cast<int>(tau.size()))
        throw std::invalid_argument("linear_statistic: m exceeds the spectrum window");
    double acc = g(std::real(tau[0])) - g(0.0);
    for (int j = 1; j <= m; ++j) {
        double pair_ref = g(double(j)) + g(double(-j));
        double pair_val;
        if (std::imag(tau[j]) != 0.0) {
            pair_val = 2.0 * std::real(g(tau[j]));
        } else {
            double t = std::real(tau[j]);
            pair_val = g(t) + g(-t);
        }
        acc += pair_val - pair_ref;
    }
    return acc;
}

struct RateProfileEntry {
    int n = 1;
    double alpha = 0.0;
    double d = 0.0;
};

// Schedule (4.1): alpha_n = (1/2) n^{-8} exp(-C beta^{5/2} N^{9/4}),
// d_n = C1 N (N + 1) / n. C and C1 stay configurable; no numeric value is
// asserted for them.
struct RateProfile {
    std::vector<RateProfileEntry> schedule;
    double C = 1.0, C1 = 1.0;

    static RateProfile make(double C, double C1, double beta, double N,
                            const std::vector<int>& ns) {
        RateProfile p;
        p.C = C;
        p.C1 = C1;
        double damp = std::exp(-C * std::pow(beta, 2.5) * std::pow(N, 2.25));
        for (int n : ns) {
            if (n < 1) throw std::invalid_argument("RateProfile: n >= 1");
            RateProfileEntry e;
            e.n = n;
            e.alpha = 0.5 * std::pow(double(n), -8.0) * damp;
            e.d = C1 * N * (N + 1.0) / n;
            p.schedule.push_back(e);
        }
        return p;
    }
};

// Two-branch lower bound (4.14) for the rate function, sup over the schedule:
//   (1/4) alpha_n (s - d_n)^2            for s >= d_n,
//   (1/4) alpha_n s^2 / (1 + alpha_n d_n^2)   for 0 <= s <= d_n + 1/(alpha_n d_n).
// Past the second branch's validity window the supremum over t < 1/(2 d_n)
// continues linearly from the window endpoint, which keeps the assembled
// bound convex and nondecreasing.
inline double rate_lower_bound(const RateProfile& profile, double s) {
    if (s < 0) throw std::invalid_argument("rate_lower_bound: s >= 0 required");
    if (profile.schedule.empty())
        throw std::invalid_argument("rate_lower_bound: empty schedule");
    double best = 0.0;
    for (const auto& e : profile.schedule) {
        if (s >= e.d) best = std::max(best, 0.25 * e.alpha * (s - e.d) * (s - e.d));
        if (e.d > 0) {
            double window = e.d + 1.0 / (e.alpha * e.d);
            if (s <= window)
                best = std::max(best, 0.25 * e.alpha * s * s / (1.0 + e.alpha * e.d * e.d));
            else
                best = std::max(best, 0.5 * s / e.d - 0.25 / (e.alpha * e.d * e.d) - 0.25);
        }
    }
    return best;
}

struct EmpiricalFreeEnergy {
    std::vector<double> t_grid;
    std::vector<double> c_values;
    std::vector<double> s_grid;
    std::vector<double> c_star;
};

// Normalized free energy c_F(t) = log E_w[e^{tF}] - t E_w[F] from weighted
// samples, max-shift guarded, with the discrete Legendre-Fenchel transform on
// an s-grid.
inline EmpiricalFreeEnergy empirical_free_energy(const std::vector<double>& F,
                                                 const std::vector<double>& weights,
                                                 const std::vector<double>& t_grid,
                                                 const std::vector<double>& s_grid) {
    if (F.size() != weights.size() || F.empty())
        throw std::invalid_argument("empirical_free_energy: mismatched samples");
    double wsum = pairwise_sum(weights);
    if (!(wsum > 0)) throw std::invalid_argument("empirical_free_energy: zero total weight");
    std::vector<double> wf(F.size());
    for (size_t i = 0; i < F.size(); ++i) wf[i] = weights[i] * F[i];
    double mean = pairwise_sum(wf) / wsum;

    EmpiricalFreeEnergy out;
    out.t_grid = t_grid;
    out.s_grid = s_grid;
    out.c_values.resize(t_grid.size());
    for (size_t ti = 0; ti < t_grid.size(); ++ti) {
        double t = t_grid[ti];
        double shift = -std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < F.size(); ++i) shift = std::max(shift, t * F[i]);
        std::vector<double> terms(F.size());
        for (size_t i = 0; i < F.size(); ++i)
            terms[i] = weights[i] * std::exp(t * F[i] - shift);
        out.c_values[ti] = std::log(pairwise_sum(terms) / wsum) + shift - t * mean;
    }
    out.c_star.resize(s_grid.size());
    for (size_t si = 0; si < s_grid.size(); ++si) {
        double best = -std::numeric_limits<double>::infinity();
        for (size_t ti = 0; ti < t_grid.size(); ++ti)
            best = std::max(best, s_grid[si] * t_grid[ti] - out.c_values[ti]);
        out.c_star[si] = best;
    }
    return out;
}

struct HopfLaxResult {
    double value = 0.0;              // Q_s F(eta)
    std::vector<double> xi;          // per-coordinate minimizers
};

// Q_s F(eta) for the linear statistic F(xi) = sum_j (g(xi_j + j) - g(j)) on a
// finite window: per-coordinate damped Newton on s g'(xi + j) + xi = eta_j.
// Valid in the contraction regime s pi^2 ||g|| / sqrt(5) < 1. eta is indexed
// -m..m like the window.
inline HopfLaxResult hopf_lax(const BandLimited& g, double s, const std::vector<double>& eta) {
    if (!(s > 0)) throw std::invalid_argument("hopf_lax: s > 0 required");
    if (eta.size() % 2 == 0) throw std::invalid_argument("hopf_lax: window must be odd");
    double bound = s * kPi * kPi * g.l2_norm() / std::sqrt(5.0);
    if (!(bound < 1.0))
        throw std::domain_error("hopf_lax: contraction bound s pi^2 ||g|| / sqrt(5) = " +
                                std::to_string(bound) + " >= 1");
    int m = static_cast<int>(eta.size() / 2);
    HopfLaxResult r;
    r.xi.resize(eta.size());
    double fval = 0.0, quad = 0.0;
    for (int j = -m; j <= m; ++j) {
        double target = eta[j + m];
        double xi = target;
        for (int it = 0; it < 100; ++it) {
            double phi = xi + s * g.deriv(xi + j) - target;
            double dphi = 1.0 + s * g.second_deriv(xi + j);
            double step = phi / (dphi > 0.25 ? dphi : 1.0);
            xi -= step;
            if (std::abs(step) < 1e-14 * (1.0 + std::abs(xi))) break;
        }
        r.xi[j + m] = xi;
        fval += g(xi + j) - g(double(j));
        quad += (xi - target) * (xi - target);
    }
    r.value = fval + quad / (2.0 * s);
    return r;
}

inline double linear_statistic_value(const BandLimited& g, const std::vector<double>& xi) {
    int m = static_cast<int>(xi.size() / 2);
    double acc = 0.0;
    for (int j = -m; j <= m; ++j) acc += g(xi[j + m] + j) - g(double(j));
    return acc;
}

struct TrialRecord {
    double f_m = 0.0;        // linear statistic
    double xi_norm = 0.0;    // || xi ||_l2 over the window (when computed)
    std::vector<double> gaps;
    std::vector<double> abs_xi;
    double log_weight = 0.0;
    bool in_ball = false;
};

struct TailPoint {
    double eps = 0.0;
    double tail = 0.0;   // weighted P(F - mean > eps)
    double bound = 0.0;  // rate_lower_bound overlay, as exp(-rate)
};

struct ConcentrationReport {
    double mean = 0.0, variance = 0.0, stderr_mean = 0.0;
    double ess = 0.0;
    std::vector<TailPoint> tails;
    double kappa_hat = 0.0;
    double fit_r_squared = 0.0;
    bool gaussian_shape = false;  // negative slope, R^2 > 0.9
    std::vector<TrialRecord> trials;
};

// Weighted tail statistics of the per-trial values with the Gaussian-shape
// fit log tail ~ -kappa eps^2 on the 16-point log-spaced eps grid.
inline ConcentrationReport concentration_from_trials(std::vector<TrialRecord> trials,
                                                     const RateProfile* profile = nullptr) {
    ConcentrationReport rep;
    std::vector<double> w, v;
    for (const auto& t : trials) {
        if (!t.in_ball) continue;
        w.push_back(std::exp(t.log_weight));
        v.push_back(t.f_m);
    }
    if (v.empty()) throw std::runtime_error("concentration: no in-ball trials");
    double wsum = pairwise_sum(w);
    rep.ess = 0.0;
    {
        double sw2 = 0.0;
        for (double x : w) sw2 += x * x;
        rep.ess = wsum * wsum / sw2;
    }
    std::vector<double> wf(v.size());
    for (size_t i = 0; i < v.size(); ++i) wf[i] = w[i] * v[i];
    rep.mean = pairwise_sum(wf) / wsum;
    for (size_t i = 0; i < v.size(); ++i) wf[i] = w[i] * (v[i] - rep.mean) * (v[i] - rep.mean);
    rep.variance = pairwise_sum(wf) / wsum;
    rep.stderr_mean = std::sqrt(rep.variance / rep.ess);

    double sigma = std::sqrt(std::max(rep.variance, 1e-300));
    if (rep.variance > 0) {
        const int npts = 16;
        for (int i = 0; i < npts; ++i) {
            double eps = 0.05 * sigma * std::pow(4.0 / 0.05, double(i) / (npts - 1));
            double mass = 0.0;
            for (size_t k = 0; k < v.size(); ++k)
                if (v[k] - rep.mean > eps) mass += w[k];
            TailPoint tp;
            tp.eps = eps;
            tp.tail = mass / wsum;
            tp.bound = profile ? std::exp(-rate_lower_bound(*profile, eps)) : 1.0;
            rep.tails.push_back(tp);
        }
        std::vector<double> xs, ys;
        for (const auto& tp : rep.tails)
            if (tp.tail > 0) {
                xs.push_back(tp.eps * tp.eps);
                ys.push_back(std::log(tp.tail));
            }
        if (xs.size() >= 4) {
            LinearFit fit = linear_fit(xs, ys);
            rep.kappa_hat = -fit.slope;
            rep.fit_r_squared = fit.r_squared;
            rep.gaussian_shape = fit.slope < 0 && fit.r_squared > 0.9;
        }
    }
    rep.trials = std::move(trials);
    return rep;
}

// Samples Gibbs potentials, computes spectra, and reports concentration of
// the linear statistic F_m(tau). with_xi additionally computes the tied
// spectrum per trial for the xi-based diagnostics.
inline ConcentrationReport mc_concentration(const GibbsConfig& cfg, const BandLimited& g,
                                            int m, int trials, bool with_xi = false,
                                            const RateProfile* profile = nullptr,
                                            double tol = kDefaultRootTol,
                                            double ode_tol = kDefaultOdeTol) {
    if (trials < 1) throw std::invalid_argument("mc_concentration: trials >= 1");
    cfg.validate();
    std::vector<TrialRecord> recs(trials);
    parallel_for(trials, [&](size_t i) {
        Rng rng = Rng::for_trial(cfg.seed, i);
        WeightedSample ws =
            make_weighted_sample(cfg, sample_free_field(rng, cfg.mode_cut), int(i));
        TrialRecord& r = recs[i];
        r.log_weight = ws.log_weight;
        r.in_ball = ws.in_ball;
        if (!ws.in_ball) return;
        int j_max = std::max(m, 1);
        if (with_xi) {
            SpectralData sd = build_spectral_data(ws.spec, j_max, tol, ode_tol);
            auto tau = tau_sequence(sd.lambdas);
            r.f_m = linear_statistic(g, tau, m);
            r.gaps = sd.gaps;
            auto xi = xi_sequence(sd.mus);
            double nrm = 0.0;
            for (size_t j = 1; j < xi.size(); ++j) {
                r.abs_xi.push_back(std::abs(xi[j]));
                nrm += std::norm(xi[j]);
            }
            r.xi_norm = std::sqrt(nrm);
        } else {
            auto lams = periodic_spectrum(ws.spec, j_max, tol, ode_tol);
            auto tau = tau_sequence(lams);
            r.f_m = linear_statistic(g, tau, m);
            r.gaps = gap_lengths(lams);
        }
    });
    int in_ball = 0;
    for (const auto& r : recs) in_ball += r.in_ball ? 1 : 0;
    if (in_ball == 0)
        throw std::runtime_error("mc_concentration: no in-ball samples (ess = 0)");
    return concentration_from_trials(std::move(recs), profile);
}

struct GapScalingReport {
    std::vector<int> j_values;
    std::vector<double> mean_gap;
    std::vector<double> stderr_gap;
    double slope = 0.0;       // of log mean-gap vs log j
    bool degenerate = false;  // all gaps vanish (scaling undefined)
};

// Weighted mean gap length per index and the least-squares slope of
// log mean-gap against log j. sampler overrides the Gibbs draw (used to
// inject fixed potentials).
inline GapScalingReport mean_gap_scaling(
    const GibbsConfig& cfg, int j_lo, int j_hi, int trials,
    const std::function<WeightedSample(int)>& sampler = {}, double tol = kDefaultRootTol,
    double ode_tol = kDefaultOdeTol) {
    if (j_lo < 1 || j_hi < j_lo) throw std::invalid_argument("mean_gap_scaling: bad j range");
    cfg.validate();
    std::vector<std::vector<double>> gaps(trials);
    std::vector<double> weights(trials, 0.0);
    parallel_for(trials, [&](size_t i) {
        WeightedSample ws;
        if (sampler) {
            ws = sampler(int(i));
        } else {
            Rng rng = Rng::for_trial(cfg.seed, i);
            ws = make_weighted_sample(cfg, sample_free_field(rng, cfg.mode_cut), int(i));
        }
        if (!ws.in_ball) return;
        weights[i] = std::exp(ws.log_weight);
        gaps[i] = gap_lengths(periodic_spectrum(ws.spec, j_hi, tol, ode_tol));
    });
    double wsum = pairwise_sum(weights);
    if (!(wsum > 0)) throw std::runtime_error("mean_gap_scaling: no in-ball samples");

    GapScalingReport rep;
    bool all_zero = true;
    for (int j = j_lo; j <= j_hi; ++j) {
        std::vector<double> contrib(trials, 0.0), contrib2(trials, 0.0);
        for (int i = 0; i < trials; ++i)
            if (weights[i] > 0) {
                contrib[i] = weights[i] * gaps[i][j - 1];
                contrib2[i] = weights[i] * gaps[i][j - 1] * gaps[i][j - 1];
            }
        double mg = pairwise_sum(contrib) / wsum;
        double var = std::max(pairwise_sum(contrib2) / wsum - mg * mg, 0.0);
        rep.j_values.push_back(j);
        rep.mean_gap.push_back(mg);
        rep.stderr_gap.push_back(std::sqrt(var / std::max(1.0, double(trials))));
        if (mg > 1e-14) all_zero = false;
    }
    if (all_zero) {
        rep.degenerate = true;
        rep.slope = std::numeric_limits<double>::quiet_NaN();
        return rep;
    }
    std::vector<double> lx, ly;
    for (size_t i = 0; i < rep.j_values.size(); ++i)
        if (rep.mean_gap[i] > 0) {
            lx.push_back(std::log(double(rep.j_values[i])));
            ly.push_back(std::log(rep.mean_gap[i]));
        }
    rep.slope = linear_fit(lx, ly).slope;
    return rep;
}

struct HilbertCubeReport {
    double fitted_c1 = 0.0;
    double pass_fraction = 0.0;
};

// Membership test for the Hilbert cube |xi_j| <= d_j / 2 with d_j =
// C1 N (N+1) / j; C1 is fitted from the observed gap decay (98th percentile
// of j * gap_j over the sample).
inline HilbertCubeReport hilbert_cube_check(const std::vector<TrialRecord>& trials, double N) {
    std::vector<double> jd;
    for (const auto& t : trials) {
        if (!t.in_ball) continue;
        for (size_t j = 1; j <= t.gaps.size(); ++j) jd.push_back(double(j) * t.gaps[j - 1]);
    }
    if (jd.empty()) throw std::runtime_error("hilbert_cube_check: no data");
    std::sort(jd.begin(), jd.end());
    double q98 = jd[static_cast<size_t>(0.98 * (jd.size() - 1))];
    HilbertCubeReport rep;
    rep.fitted_c1 = q98 / (N * (N + 1.0));
    int total = 0, pass = 0;
    for (const auto& t : trials) {
        if (!t.in_ball || t.abs_xi.empty()) continue;
        ++total;
        bool ok = true;
        for (size_t j = 1; j <= t.abs_xi.size(); ++j) {
            double dj = rep.fitted_c1 * N * (N + 1.0) / double(j);
            if (t.abs_xi[j - 1] > 0.5 * dj) { ok = false; break; }
        }
        pass += ok ? 1 : 0;
    }
    rep.pass_fraction = total > 0 ? double(pass) / total : 0.0;
    return rep;
}

}  // namespace hill

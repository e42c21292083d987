// Truncated real Fourier potentials on the circle, the free Gaussian field,
// and importance-weighted draws from the KdV invariant measure on the L2 ball.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hill/common.hpp"

namespace hill {

// q(x) = a0/2 + sum_{n=1..M} (a_n cos nx + b_n sin nx).
struct PotentialSpec {
    double a0 = 0.0;
    std::vector<double> a;  // cosine coefficients, n = 1..M
    std::vector<double> b;  // sine coefficients, n = 1..M

    int modes() const { return static_cast<int>(a.size()); }

    static PotentialSpec zero(int mode_cut = 0) {
        PotentialSpec s;
        s.a.assign(mode_cut, 0.0);
        s.b.assign(mode_cut, 0.0);
        return s;
    }
    static PotentialSpec constant(double c) {
        PotentialSpec s;
        s.a0 = 2.0 * c;
        return s;
    }
    static PotentialSpec cosine(int n, double amplitude) {
        PotentialSpec s = zero(n);
        s.a[n - 1] = amplitude;
        return s;
    }
};

inline double eval_potential(const PotentialSpec& spec, double x) {
    double s = 0.5 * spec.a0;
    for (int n = 1; n <= spec.modes(); ++n)
        s += spec.a[n - 1] * std::cos(n * x) + spec.b[n - 1] * std::sin(n * x);
    return s;
}

// Parseval value of int q^2 dx/(2pi).
inline double norm_sq(const PotentialSpec& spec) {
    double s = 0.25 * spec.a0 * spec.a0;
    for (int n = 1; n <= spec.modes(); ++n)
        s += 0.5 * (spec.a[n - 1] * spec.a[n - 1] + spec.b[n - 1] * spec.b[n - 1]);
    return s;
}

inline double sup_norm_bound(const PotentialSpec& spec) {
    double s = std::abs(0.5 * spec.a0);
    for (int n = 1; n <= spec.modes(); ++n)
        s += std::hypot(spec.a[n - 1], spec.b[n - 1]);
    return s;
}

// q(x) -> q(x + s): rotates each mode's (a_n, b_n) phase by angle n*s.
inline PotentialSpec translate(const PotentialSpec& spec, double s) {
    PotentialSpec out = spec;
    for (int n = 1; n <= spec.modes(); ++n) {
        double c = std::cos(n * s), sn = std::sin(n * s);
        out.a[n - 1] = spec.a[n - 1] * c + spec.b[n - 1] * sn;
        out.b[n - 1] = -spec.a[n - 1] * sn + spec.b[n - 1] * c;
    }
    return out;
}

// Trapezoid quadrature of int f(q(x)) dx/(2pi); exact for trigonometric
// polynomials of degree < npts.
template <class F>
double circle_quadrature(const PotentialSpec& spec, F&& f, int npts) {
    std::vector<double> vals(npts);
    for (int i = 0; i < npts; ++i)
        vals[i] = f(eval_potential(spec, 2.0 * kPi * i / npts));
    return pairwise_sum(vals) / npts;
}

inline double cubic_integral(const PotentialSpec& spec) {
    int npts = std::max(32, 8 * spec.modes());
    return circle_quadrature(spec, [](double q) { return q * q * q; }, npts);
}

// Free Gaussian field: the q-series constant term is gamma_0 (so a0 = 2 gamma_0),
// a_n = gamma_n / n, b_n = gamma_{-n} / n with i.i.d. standard normals.
inline PotentialSpec sample_free_field(Rng& rng, int mode_cut) {
    if (mode_cut < 1) throw std::invalid_argument("sample_free_field: mode_cut >= 1");
    PotentialSpec s = PotentialSpec::zero(mode_cut);
    s.a0 = 2.0 * rng.gaussian();
    for (int n = 1; n <= mode_cut; ++n) {
        s.a[n - 1] = rng.gaussian() / n;
        s.b[n - 1] = rng.gaussian() / n;
    }
    return s;
}

inline PotentialSpec sample_free_field(uint64_t seed, int mode_cut) {
    Rng rng(seed);
    return sample_free_field(rng, mode_cut);
}

// Variance of the series tail sum_{n > M} 1/n^2, reported as a truncation
// diagnostic for the mode cutoff.
inline double mode_tail_variance(int mode_cut) {
    double head = 0.0;
    for (int n = 1; n <= mode_cut; ++n) head += 1.0 / (double(n) * n);
    return kPi * kPi / 6.0 - head;
}

struct GibbsConfig {
    double beta = 0.0;    // inverse temperature
    double big_n = 1.0;   // L2 ball radius^2 (the paper's N)
    int mode_cut = 16;
    uint64_t seed = 0;
    int batch = 1;

    void validate() const {
        if (beta < 0) throw std::invalid_argument("GibbsConfig: beta >= 0 required");
        if (big_n <= 0) throw std::invalid_argument("GibbsConfig: big_n > 0 required");
        if (mode_cut < 1) throw std::invalid_argument("GibbsConfig: mode_cut >= 1 required");
        if (batch < 1) throw std::invalid_argument("GibbsConfig: batch >= 1 required");
    }
};

struct WeightedSample {
    PotentialSpec spec;
    double log_weight = 0.0;  // (beta/6) int q^3 dx/2pi when inside the ball
    bool in_ball = false;
    int trial_index = 0;
};

inline WeightedSample make_weighted_sample(const GibbsConfig& cfg, const PotentialSpec& spec,
                                           int trial_index) {
    WeightedSample ws;
    ws.spec = spec;
    ws.in_ball = norm_sq(spec) <= cfg.big_n;
    ws.log_weight = ws.in_ball ? (cfg.beta / 6.0) * cubic_integral(spec) : 0.0;
    ws.trial_index = trial_index;
    return ws;
}

// Draws free-field potentials and records self-normalized importance data for
// the Gibbs measure nu_N^beta. beta = 0 reduces to the conditioned Gaussian.
inline std::vector<WeightedSample> sample_gibbs(const GibbsConfig& cfg) {
    cfg.validate();
    std::vector<WeightedSample> out(cfg.batch);
    parallel_for(cfg.batch, [&](size_t i) {
        Rng rng = Rng::for_trial(cfg.seed, i);
        out[i] = make_weighted_sample(cfg, sample_free_field(rng, cfg.mode_cut),
                                      static_cast<int>(i));
    });
    bool any = false;
    for (const auto& w : out) any = any || w.in_ball;
    if (!any)
        throw std::runtime_error(
            "sample_gibbs: no samples landed in the L2 ball; big_n too small for mode_cut");
    return out;
}

inline double effective_sample_size(const std::vector<WeightedSample>& batch) {
    double sw = 0.0, sw2 = 0.0;
    for (const auto& ws : batch) {
        if (!ws.in_ball) continue;
        double w = std::exp(ws.log_weight);
        sw += w;
        sw2 += w * w;
    }
    return sw2 > 0 ? sw * sw / sw2 : 0.0;
}

struct ExpMomentResult {
    double mc_estimate = 0.0;
    double closed_form = 0.0;
    double std_error = 0.0;
};

// Monte Carlo of e^{eps ||q||^2} under the free field against the per-mode
// Gaussian product. The constant mode contributes (1-2 eps)^{-1/2} and each
// (cos, sin) pair at frequency n contributes (1 - eps/n^2)^{-1}; the moment
// diverges at eps = 1/2 through the constant mode.
inline ExpMomentResult free_field_exp_moment(double eps, int mode_cut, int draws = 100000,
                                             uint64_t seed = 20140927) {
    if (!(eps > 0.0 && eps < 0.5))
        throw std::domain_error("free_field_exp_moment: eps must lie in (0, 1/2)");
    if (mode_cut < 1) throw std::invalid_argument("free_field_exp_moment: mode_cut >= 1");
    ExpMomentResult r;
    r.closed_form = 1.0 / std::sqrt(1.0 - 2.0 * eps);
    for (int n = 1; n <= mode_cut; ++n)
        r.closed_form /= 1.0 - eps / (double(n) * n);

    std::vector<double> vals(draws);
    parallel_for(draws, [&](size_t i) {
        Rng rng = Rng::for_trial(seed, i);
        vals[i] = std::exp(eps * norm_sq(sample_free_field(rng, mode_cut)));
    });
    r.mc_estimate = mean_of(vals);
    r.std_error = std::sqrt(variance_of(vals) / draws);
    return r;
}

inline void to_json(nlohmann::json& j, const PotentialSpec& s) {
    j = nlohmann::json{{"a0", s.a0}, {"a", s.a}, {"b", s.b}};
}

inline void from_json(const nlohmann::json& j, PotentialSpec& s) {
    j.at("a0").get_to(s.a0);
    j.at("a").get_to(s.a);
    j.at("b").get_to(s.b);
    if (s.a.size() != s.b.size())
        throw std::invalid_argument("PotentialSpec: a and b must have equal length");
}

inline void to_json(nlohmann::json& j, const WeightedSample& w) {
    j = nlohmann::json{{"spec", w.spec},
                       {"log_weight", w.log_weight},
                       {"in_ball", w.in_ball},
                       {"trial_index", w.trial_index}};
}

inline void from_json(const nlohmann::json& j, WeightedSample& w) {
    j.at("spec").get_to(w.spec);
    j.at("log_weight").get_to(w.log_weight);
    j.at("in_ball").get_to(w.in_ball);
    j.at("trial_index").get_to(w.trial_index);
}

}  // namespace hill

// Paley-Wiener sampling machinery: sinc Gram matrices and their Carleman
// determinants, Riesz-basis certification from the l2 jitter bound,
// biorthogonal systems and truncated reconstruction.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "hill/common.hpp"

namespace hill {

// Window -n..n of a real sampling sequence; index i <-> j = i - n.
struct SamplingSequence {
    int n = 0;
    std::vector<double> t;

    double dev_l2 = 0.0;      // || t_j - j ||_l2 over the window
    double separation = 0.0;  // min_{j != k} |t_j - t_k|
    bool tail_decaying = true;

    SamplingSequence() = default;
    explicit SamplingSequence(std::vector<double> values) : t(std::move(values)) {
        if (t.size() % 2 == 0 || t.empty())
            throw std::invalid_argument("SamplingSequence: window must have odd size 2n+1");
        n = static_cast<int>(t.size() / 2);
        double dev2 = 0.0;
        separation = std::numeric_limits<double>::infinity();
        for (int i = 0; i < static_cast<int>(t.size()); ++i) {
            double d = t[i] - (i - n);
            dev2 += d * d;
        }
        for (size_t i = 1; i < t.size(); ++i)
            separation = std::min(separation, t[i] - t[i - 1]);
        dev_l2 = std::sqrt(dev2);
        // window tail heuristic: the outer quarter deviations should not carry
        // more energy than the adjacent quarter, else the l2 tail estimate is
        // untrustworthy.
        if (n >= 4) {
            auto band_energy = [&](int lo, int hi) {
                double s = 0.0;
                for (int j = lo; j <= hi; ++j) {
                    double dp = t[n + j] - j, dm = t[n - j] + j;
                    s += dp * dp + dm * dm;
                }
                return s;
            };
            double outer = band_energy(3 * n / 4 + 1, n);
            double inner = band_energy(n / 2 + 1, 3 * n / 4);
            tail_decaying = outer <= inner + 1e-15;
        }
    }

    static SamplingSequence integers(int n) {
        std::vector<double> v(2 * n + 1);
        for (int i = 0; i <= 2 * n; ++i) v[i] = i - n;
        return SamplingSequence(std::move(v));
    }

    double at(int j) const { return t[n + j]; }  // j in [-n, n]
};

struct GramTruncation {
    int order = 0;
    Eigen::MatrixXd gamma;
    double det2 = 0.0;
    double eig_min = 0.0, eig_max = 0.0;
    double riesz_margin = 0.0;
};

// Gram matrix [sinc(t_j - t_k)] on the window -order..order together with its
// Carleman determinant. The diagonal is 1, so det2 = det(Gamma) exactly.
inline GramTruncation gram(const SamplingSequence& t, int order) {
    if (order > t.n) throw std::invalid_argument("gram: order exceeds sequence window");
    int dim = 2 * order + 1;
    GramTruncation g;
    g.order = order;
    g.gamma.resize(dim, dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c)
            g.gamma(r, c) = sinc(t.at(r - order) - t.at(c - order));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.gamma, Eigen::EigenvaluesOnly);
    g.eig_min = es.eigenvalues().minCoeff();
    g.eig_max = es.eigenvalues().maxCoeff();
    double logdet = 0.0;
    bool nonpos = false;
    for (int i = 0; i < dim; ++i) {
        double e = es.eigenvalues()[i];
        if (e <= 0.0) { nonpos = true; break; }
        logdet += std::log(e);
    }
    g.det2 = nonpos ? 0.0 : std::exp(logdet);
    g.riesz_margin = 1.0 - (2.0 * kPi / std::sqrt(3.0)) * t.dev_l2;
    return g;
}

// |det [sinc(t_j - k)]_{j,k=-n..n}|^2; converges to det2 of the Gram matrix
// as the window grows.
inline double carleman_det_via_sinc_matrix(const SamplingSequence& t, int order) {
    if (order > t.n) throw std::invalid_argument("carleman_det: order exceeds window");
    int dim = 2 * order + 1;
    Eigen::MatrixXd m(dim, dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c)
            m(r, c) = sinc(t.at(r - order) - double(c - order));
    double d = m.partialPivLu().determinant();
    return d * d;
}

struct RieszCertificate {
    double margin = 0.0;
    bool certified = false;
    double frame_lower = 0.0;   // empirical eig_min of the truncated Gram
    double frame_upper = 0.0;   // empirical eig_max
    double guaranteed_lower = 0.0;  // margin^2 when certified
    double guaranteed_upper = 0.0;  // (2 - margin)^2 when certified
};

// Certification by the Hilbert-Schmidt jitter bound: margin =
// 1 - (2 pi / sqrt 3) ||t_j - j||_l2 > 0 makes sinc(x - t_j) a Riesz basis,
// with frame bounds A >= margin^2 and B <= (2 - margin)^2.
inline RieszCertificate riesz_certificate(const SamplingSequence& t) {
    RieszCertificate c;
    if (!t.tail_decaying || !(t.separation > 0)) {
        c.margin = -std::numeric_limits<double>::infinity();
        c.certified = false;
        return c;
    }
    c.margin = 1.0 - (2.0 * kPi / std::sqrt(3.0)) * t.dev_l2;
    c.certified = c.margin > 0.0;
    GramTruncation g = gram(t, t.n);
    c.frame_lower = g.eig_min;
    c.frame_upper = g.eig_max;
    if (c.certified) {
        c.guaranteed_lower = c.margin * c.margin;
        c.guaranteed_upper = (2.0 - c.margin) * (2.0 - c.margin);
    }
    return c;
}

// Biorthogonal system for the windowed sinc family: row k of inverse(Gamma)
// gives the expansion of g_k in sinc(. - t_m). Near-singular Grams drop to a
// flagged pseudo-inverse with eigenvalue cutoff 1e-12.
struct BiorthogonalSystem {
    SamplingSequence t;
    Eigen::MatrixXd gamma_inv;
    bool pseudo = false;
    double eig_min = 0.0;

    double g(int k, double x) const {
        const int n = t.n;
        double s = 0.0;
        for (int m = -n; m <= n; ++m) s += gamma_inv(k + n, m + n) * sinc(x - t.at(m));
        return s;
    }
    std::complex<double> g(int k, std::complex<double> z) const {
        const int n = t.n;
        std::complex<double> s = 0.0;
        for (int m = -n; m <= n; ++m) s += gamma_inv(k + n, m + n) * sinc(z - t.at(m));
        return s;
    }
    double g_deriv(int k, double x) const {
        const int n = t.n;
        double s = 0.0;
        for (int m = -n; m <= n; ++m) s += gamma_inv(k + n, m + n) * sinc_deriv(x - t.at(m));
        return s;
    }
    // ||g_k||_{L2}^2 = inverse Gram diagonal.
    double norm_sq(int k) const { return gamma_inv(k + t.n, k + t.n); }
    double max_norm() const {
        double m = 0.0;
        for (int k = -t.n; k <= t.n; ++k) m = std::max(m, std::sqrt(norm_sq(k)));
        return m;
    }
};

inline BiorthogonalSystem biorthogonals(const SamplingSequence& t, int order) {
    GramTruncation g = gram(t, order);
    SamplingSequence sub = t;
    if (order < t.n) {
        std::vector<double> v(t.t.begin() + (t.n - order), t.t.begin() + (t.n + order + 1));
        sub = SamplingSequence(std::move(v));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.gamma);
    BiorthogonalSystem b;
    b.t = sub;
    b.eig_min = es.eigenvalues().minCoeff();
    const double cutoff = 1e-12;
    if (b.eig_min <= cutoff) b.pseudo = true;
    Eigen::VectorXd inv_eigs = es.eigenvalues();
    for (int i = 0; i < inv_eigs.size(); ++i)
        inv_eigs[i] = inv_eigs[i] > cutoff ? 1.0 / inv_eigs[i] : 0.0;
    b.gamma_inv = es.eigenvectors() * inv_eigs.asDiagonal() * es.eigenvectors().transpose();
    return b;
}

// Solves Gamma c = samples and evaluates sum_j c_j sinc(x - t_j) on the grid.
inline std::vector<double> reconstruct(const std::vector<double>& samples,
                                       const SamplingSequence& t, int order,
                                       const std::vector<double>& eval_grid) {
    int dim = 2 * order + 1;
    if (static_cast<int>(samples.size()) != dim)
        throw std::invalid_argument("reconstruct: samples must cover the window -n..n");
    BiorthogonalSystem b = biorthogonals(t, order);
    if (b.pseudo)
        throw std::runtime_error("reconstruct: Gram matrix singular, eig_min = " +
                                 std::to_string(b.eig_min));
    Eigen::Map<const Eigen::VectorXd> rhs(samples.data(), dim);
    Eigen::VectorXd c = b.gamma_inv * rhs;
    std::vector<double> out(eval_grid.size());
    for (size_t i = 0; i < eval_grid.size(); ++i) {
        double s = 0.0;
        for (int m = -order; m <= order; ++m) s += c[m + order] * sinc(eval_grid[i] - b.t.at(m));
        out[i] = s;
    }
    return out;
}

// ||f||_{L2}^2 by trapezoid on [-L, L]; band-limited tails decay slowly, so L
// defaults to window + 10 with spacing 1/8.
template <class F>
double l2_norm_sq_quadrature(F&& f, double L, double h = 0.125) {
    long m = static_cast<long>(L / h);
    std::vector<double> vals(2 * m + 1);
    for (long i = -m; i <= m; ++i) {
        double v = f(i * h);
        double w = (i == -m || i == m) ? 0.5 : 1.0;
        vals[i + m] = w * v * v;
    }
    return pairwise_sum(vals) * h;
}

// Entrywise closed form for the Hilbert-Schmidt distance of the exponential
// maps: int |e^{i t x} - e^{i s x}|^2 dx/2pi over [-pi, pi] = 2(1 - sinc(t-s)).
inline double hs_exponential_distance_sq(const std::vector<double>& t,
                                         const std::vector<double>& s) {
    if (t.size() != s.size())
        throw std::invalid_argument("hs_exponential_distance_sq: size mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < t.size(); ++i) acc += 2.0 * (1.0 - sinc(t[i] - s[i]));
    return acc;
}

}  // namespace hill

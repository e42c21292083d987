// Fundamental solutions of Hill's equation -f'' + q f = lambda f over one
// period, the discriminant Delta(lambda) = f(2pi) + g'(2pi), its lambda
// derivative via the variational system, and the large-lambda series head.
#pragma once

#include <array>
#include <complex>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hill/common.hpp"
#include "hill/ode.hpp"
#include "hill/potential.hpp"

namespace hill {

inline constexpr double kDefaultOdeTol = 1e-10;

template <class Scalar>
struct FloquetSampleT {
    Scalar lambda{};
    Scalar f_end{}, fp_end{}, g_end{}, gp_end{};
    Scalar delta{};
    Scalar delta_prime{};
    bool has_derivative = false;

    // Liouville: the system is trace-free, so the Wronskian stays 1.
    Scalar wronskian() const { return f_end * gp_end - fp_end * g_end; }

    // |W - 1| relative to the size of the products that form it; the absolute
    // defect cannot beat machine precision once the solutions grow
    // hyperbolically.
    double wronskian_defect() const {
        double scale = std::max(1.0, detail::scalar_abs(f_end * gp_end) +
                                         detail::scalar_abs(fp_end * g_end));
        return detail::scalar_abs(wronskian() - Scalar(1)) / scale;
    }
};

using FloquetSample = FloquetSampleT<double>;
using FloquetSampleC = FloquetSampleT<std::complex<double>>;

template <class Scalar>
FloquetSampleT<Scalar> propagate_impl(const PotentialSpec& spec, Scalar lambda,
                                      bool with_derivative, double tol) {
    if (tol <= 0) throw std::invalid_argument("propagate: tol must be > 0");
    FloquetSampleT<Scalar> out;
    out.lambda = lambda;
    if (!with_derivative) {
        // (f, f', g, g') with y'' = (q - lambda) y.
        std::array<Scalar, 4> y{Scalar(1), Scalar(0), Scalar(0), Scalar(1)};
        auto rhs = [&](double x, const std::array<Scalar, 4>& v, std::array<Scalar, 4>& d) {
            Scalar w = eval_potential(spec, x) - lambda;
            d[0] = v[1];
            d[1] = w * v[0];
            d[2] = v[3];
            d[3] = w * v[2];
        };
        y = integrate_dopri5<Scalar, 4>(rhs, y, 0.0, 2.0 * kPi, tol);
        out.f_end = y[0];
        out.fp_end = y[1];
        out.g_end = y[2];
        out.gp_end = y[3];
    } else {
        // Augmented with z = dy/d lambda: z'' = (q - lambda) z - y.
        std::array<Scalar, 8> y{Scalar(1), Scalar(0), Scalar(0), Scalar(1),
                                Scalar(0), Scalar(0), Scalar(0), Scalar(0)};
        auto rhs = [&](double x, const std::array<Scalar, 8>& v, std::array<Scalar, 8>& d) {
            Scalar w = eval_potential(spec, x) - lambda;
            d[0] = v[1];
            d[1] = w * v[0];
            d[2] = v[3];
            d[3] = w * v[2];
            d[4] = v[5];
            d[5] = w * v[4] - v[0];
            d[6] = v[7];
            d[7] = w * v[6] - v[2];
        };
        y = integrate_dopri5<Scalar, 8>(rhs, y, 0.0, 2.0 * kPi, tol);
        out.f_end = y[0];
        out.fp_end = y[1];
        out.g_end = y[2];
        out.gp_end = y[3];
        out.delta_prime = y[4] + y[7];
        out.has_derivative = true;
    }
    out.delta = out.f_end + out.gp_end;
    return out;
}

inline FloquetSample propagate(const PotentialSpec& spec, double lambda,
                               bool with_derivative = false, double tol = kDefaultOdeTol) {
    return propagate_impl<double>(spec, lambda, with_derivative, tol);
}

inline FloquetSampleC propagate(const PotentialSpec& spec, std::complex<double> lambda,
                                bool with_derivative = false, double tol = kDefaultOdeTol) {
    return propagate_impl<std::complex<double>>(spec, lambda, with_derivative, tol);
}

inline double discriminant(const PotentialSpec& spec, double lambda,
                           double tol = kDefaultOdeTol) {
    return propagate(spec, lambda, false, tol).delta;
}

inline std::vector<std::pair<double, FloquetSample>> discriminant_scan(
    const PotentialSpec& spec, const std::vector<double>& lambda_grid,
    bool with_derivative = false, double tol = kDefaultOdeTol) {
    for (size_t i = 1; i < lambda_grid.size(); ++i)
        if (!(lambda_grid[i] >= lambda_grid[i - 1]))
            throw std::invalid_argument("discriminant_scan: grid must be sorted");
    std::vector<std::pair<double, FloquetSample>> out(lambda_grid.size());
    parallel_for(lambda_grid.size(), [&](size_t i) {
        out[i] = {lambda_grid[i], propagate(spec, lambda_grid[i], with_derivative, tol)};
    });
    return out;
}

// Two explicit leading terms of the large-lambda series:
//   Delta(lambda) ~ 2 cos(2 pi sqrt(lambda)) + pi a0 sin(2 pi sqrt(lambda))/sqrt(lambda),
// with O(1/lambda) remainder. The series converges for lambda > 4 ||q||^2.
inline double asymptotic_discriminant(const PotentialSpec& spec, double lambda) {
    double threshold = std::max(1.0, 4.0 * norm_sq(spec));
    if (!(lambda > threshold))
        throw std::domain_error("asymptotic_discriminant: lambda below validity threshold " +
                                std::to_string(threshold));
    double rt = std::sqrt(lambda);
    return 2.0 * std::cos(2.0 * kPi * rt) +
           kPi * spec.a0 * std::sin(2.0 * kPi * rt) / rt;
}

}  // namespace hill

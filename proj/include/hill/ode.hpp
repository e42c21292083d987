// Adaptive embedded Dormand-Prince 5(4) integrator on fixed-size states.
// Templated on the scalar so the same stepper drives real lambda, complex
// lambda, and the variational (d/d lambda) augmentation.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace hill {

struct IntegrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
inline double scalar_abs(double x) { return std::abs(x); }
inline double scalar_abs(const std::complex<double>& z) { return std::abs(z); }
}  // namespace detail

// Integrates y' = rhs(x, y) from x0 to x1 (x0 < x1). rhs has signature
// void(double x, const State&, State&). tol is applied mixed abs/rel.
template <class Scalar, size_t N, class Rhs>
std::array<Scalar, N> integrate_dopri5(Rhs&& rhs, std::array<Scalar, N> y,
                                       double x0, double x1, double tol) {
    using State = std::array<Scalar, N>;
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                            a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // 5th-minus-4th order error weights.
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    if (x1 == x0) return y;
    if (tol <= 0.0) throw std::invalid_argument("integrate_dopri5: tol must be > 0");

    double x = x0;
    double h = (x1 - x0) / 64.0;
    const double hmin = (x1 - x0) * 1e-14;
    State k1, k2, k3, k4, k5, k6, k7, yt, ynew;
    rhs(x, y, k1);
    int rejects = 0;
    for (long iter = 0; iter < 4000000; ++iter) {
        if (x >= x1) return y;
        if (x + h > x1) h = x1 - x;

        for (size_t i = 0; i < N; ++i) yt[i] = y[i] + h * (a21 * k1[i]);
        rhs(x + c2 * h, yt, k2);
        for (size_t i = 0; i < N; ++i) yt[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        rhs(x + c3 * h, yt, k3);
        for (size_t i = 0; i < N; ++i)
            yt[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs(x + c4 * h, yt, k4);
        for (size_t i = 0; i < N; ++i)
            yt[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs(x + c5 * h, yt, k5);
        for (size_t i = 0; i < N; ++i)
            yt[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                a65 * k5[i]);
        rhs(x + h, yt, k6);
        for (size_t i = 0; i < N; ++i)
            ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                                  b6 * k6[i]);
        rhs(x + h, ynew, k7);

        double err = 0.0;
        for (size_t i = 0; i < N; ++i) {
            double ei = detail::scalar_abs(h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] +
                                                e5 * k5[i] + e6 * k6[i] + e7 * k7[i]));
            double scale =
                tol * (1.0 + std::max(detail::scalar_abs(y[i]), detail::scalar_abs(ynew[i])));
            err = std::max(err, ei / scale);
        }
        if (err <= 1.0) {
            x += h;
            y = ynew;
            k1 = k7;  // FSAL
            rejects = 0;
            h *= std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0);
        } else {
            if (++rejects > 60 || h < hmin)
                throw IntegrationError("integrate_dopri5: step size underflow at x=" +
                                       std::to_string(x) + " err=" + std::to_string(err));
            h *= std::max(0.9 * std::pow(err, -0.2), 0.1);
        }
    }
    throw IntegrationError("integrate_dopri5: step budget exhausted");
}

}  // namespace hill

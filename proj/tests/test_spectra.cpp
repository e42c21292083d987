#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "hill/spectra.hpp"

using namespace hill;

namespace {
std::vector<double> sorted_union_oracle(const PotentialSpec& spec, int count) {
    int K = std::max(32, 2 * spec.modes() + 16);
    auto per = fourier_matrix_oracle(spec, K, BoundaryCondition::periodic, count);
    auto anti = fourier_matrix_oracle(spec, K, BoundaryCondition::antiperiodic, count);
    std::vector<double> all;
    all.insert(all.end(), per.begin(), per.end());
    all.insert(all.end(), anti.begin(), anti.end());
    std::sort(all.begin(), all.end());
    all.resize(count);
    return all;
}
}  // namespace

TEST_CASE("free periodic spectrum is the double ladder k^2/4") {
    auto [lams, merged] = periodic_spectrum_flagged(PotentialSpec::zero(1), 3);
    REQUIRE(lams.size() == 7);
    std::vector<double> expect{0.0, 0.25, 0.25, 1.0, 1.0, 2.25, 2.25};
    for (size_t i = 0; i < expect.size(); ++i)
        CHECK(lams[i] == Catch::Approx(expect[i]).margin(1e-8));
    for (int j = 1; j <= 3; ++j) CHECK(merged[j]);
}

TEST_CASE("constant potential shifts the free ladder") {
    auto lams = periodic_spectrum(PotentialSpec::constant(0.35), 2);
    std::vector<double> expect{0.35, 0.6, 0.6, 1.35, 1.35};
    for (size_t i = 0; i < expect.size(); ++i)
        CHECK(lams[i] == Catch::Approx(expect[i]).margin(1e-8));
}

TEST_CASE("single-cosine potential matches the matrix oracle") {
    PotentialSpec s = PotentialSpec::cosine(3, 0.2);
    auto lams = periodic_spectrum(s, 6);
    auto oracle = sorted_union_oracle(s, 13);
    for (int i = 0; i < 13; ++i) CHECK(lams[i] == Catch::Approx(oracle[i]).margin(1e-6));
}

TEST_CASE("free Dirichlet spectrum is j^2/4") {
    auto mus = dirichlet_spectrum(PotentialSpec::zero(1), 4);
    for (int j = 1; j <= 4; ++j)
        CHECK(mus[j - 1] == Catch::Approx(0.25 * j * j).margin(1e-8));

    auto shifted = dirichlet_spectrum(PotentialSpec::constant(0.6), 4);
    for (int j = 1; j <= 4; ++j)
        CHECK(shifted[j - 1] == Catch::Approx(0.25 * j * j + 0.6).margin(1e-8));
}

TEST_CASE("Dirichlet spectrum against the sine-basis oracle") {
    PotentialSpec s = PotentialSpec::cosine(1, 0.3);
    auto mus = dirichlet_spectrum(s, 6);
    auto oracle = fourier_matrix_oracle(s, 48, BoundaryCondition::dirichlet, 6);
    for (int j = 0; j < 6; ++j) CHECK(mus[j] == Catch::Approx(oracle[j]).margin(1e-6));

    // potential with a sine component exercises the odd-parity couplings
    PotentialSpec sb = PotentialSpec::zero(2);
    sb.b[1] = 0.25;
    auto mus2 = dirichlet_spectrum(sb, 5);
    auto oracle2 = fourier_matrix_oracle(sb, 48, BoundaryCondition::dirichlet, 5);
    for (int j = 0; j < 5; ++j) CHECK(mus2[j] == Catch::Approx(oracle2[j]).margin(1e-6));
}

TEST_CASE("matrix oracle free ladders") {
    PotentialSpec zero = PotentialSpec::zero(1);
    auto per = fourier_matrix_oracle(zero, 8, BoundaryCondition::periodic, 5);
    std::vector<double> expect_per{0.0, 1.0, 1.0, 4.0, 4.0};
    for (int i = 0; i < 5; ++i) CHECK(per[i] == Catch::Approx(expect_per[i]).margin(1e-12));

    auto anti = fourier_matrix_oracle(zero, 8, BoundaryCondition::antiperiodic, 4);
    std::vector<double> expect_anti{0.25, 0.25, 2.25, 2.25};
    for (int i = 0; i < 4; ++i) CHECK(anti[i] == Catch::Approx(expect_anti[i]).margin(1e-12));

    // self-convergence under mode_cut doubling
    PotentialSpec s = PotentialSpec::cosine(3, 0.2);
    auto e32 = fourier_matrix_oracle(s, 32, BoundaryCondition::periodic, 8);
    auto e64 = fourier_matrix_oracle(s, 64, BoundaryCondition::periodic, 8);
    for (int i = 0; i < 8; ++i) CHECK(std::abs(e32[i] - e64[i]) < 1e-8);
}

TEST_CASE("interlacing for random Gibbs potentials") {
    int tested = 0;
    for (int t = 0; tested < 20 && t < 800; ++t) {
        Rng rng = Rng::for_trial(7171, t);
        PotentialSpec s = sample_free_field(rng, 16);
        if (norm_sq(s) > 1.0) continue;
        ++tested;
        SpectralData sd = build_spectral_data(s, 8);
        for (int j = 1; j <= 8; ++j) {
            CHECK(sd.mus[j - 1] >= sd.lambdas[2 * j - 1] - 1e-8);
            CHECK(sd.mus[j - 1] <= sd.lambdas[2 * j] + 1e-8);
        }
        for (size_t i = 1; i < sd.lambdas.size(); ++i)
            CHECK(sd.lambdas[i] >= sd.lambdas[i - 1] - 1e-10);
    }
    CHECK(tested == 20);
}

TEST_CASE("oracle equivalence on random potentials") {
    int tested = 0;
    for (int t = 0; tested < 5 && t < 400; ++t) {
        Rng rng = Rng::for_trial(8888, t);
        PotentialSpec s = sample_free_field(rng, 16);
        if (norm_sq(s) > 1.0) continue;
        ++tested;
        auto lams = periodic_spectrum(s, 6);
        auto oracle = sorted_union_oracle(s, 12);
        for (int i = 0; i < 12; ++i) CHECK(lams[i] == Catch::Approx(oracle[i]).margin(1e-6));
    }
    CHECK(tested == 5);
}

TEST_CASE("Erdelyi gap law for single-cosine potentials") {
    for (int j : {2, 3, 4}) {
        double prev_ratio = 0.0;
        for (double eps : {0.01, 0.02, 0.04}) {
            PotentialSpec s = PotentialSpec::cosine(j, eps);
            auto lams = periodic_spectrum(s, j + 1);
            double dj = lams[2 * j] - lams[2 * j - 1];
            double ratio = dj / eps;
            CHECK(ratio > 0.8);
            CHECK(ratio < 1.2);
            if (prev_ratio > 0) CHECK(ratio == Catch::Approx(prev_ratio).epsilon(0.10));
            prev_ratio = ratio;
        }
    }
}

TEST_CASE("eigenvalue asymptotics trend") {
    // |lambda_{2j} - j^2/4 - a0/2| decreases in j once the gap-driving mode
    // is passed.
    PotentialSpec s = PotentialSpec::cosine(1, 0.3);
    s.a0 = 0.4;
    auto lams = periodic_spectrum(s, 12);
    std::vector<double> dev;
    for (int j = 4; j <= 12; j += 2)
        dev.push_back(std::abs(lams[2 * j] - 0.25 * j * j - 0.2));
    for (size_t i = 1; i < dev.size(); ++i) CHECK(dev[i] <= dev[i - 1] + 1e-9);
}

TEST_CASE("greens kernel closed form and symmetry") {
    CHECK(greens_kernel(1.0, kPi, kPi) ==
          Catch::Approx(std::sinh(kPi) * std::sinh(kPi) / std::sinh(2 * kPi)).epsilon(1e-12));
    Rng rng = Rng::for_trial(5, 0);
    for (int i = 0; i < 20; ++i) {
        double x = 2 * kPi * rng.uniform01(), y = 2 * kPi * rng.uniform01();
        double z = 0.5 + 3.0 * rng.uniform01();
        CHECK(greens_kernel(z, x, y) == greens_kernel(z, y, x));
    }
    CHECK_THROWS_AS(greens_kernel(-1.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("greens kernel Nystrom eigenvalues match 1/(zeta + j^2/4)") {
    const double zeta = 1.0;
    const int n = 512;
    Eigen::MatrixXd K(n, n);
    double h = 2 * kPi / (n + 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            K(i, j) = greens_kernel(zeta, (i + 1) * h, (j + 1) * h) * h;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
    std::vector<double> eigs(es.eigenvalues().data(), es.eigenvalues().data() + n);
    std::sort(eigs.rbegin(), eigs.rend());
    for (int j = 1; j <= 5; ++j)
        CHECK(eigs[j - 1] == Catch::Approx(1.0 / (zeta + 0.25 * j * j)).margin(1e-4));
}

TEST_CASE("midpoint contour integral") {
    // q = 0, j = 1: double zero at 1/4, residue calculus gives 1/4
    CHECK(midpoint_contour(PotentialSpec::zero(1), 1, 0.2) ==
          Catch::Approx(0.25).margin(1e-6));

    // open gap: agrees with the root-finder midpoint
    PotentialSpec s = PotentialSpec::cosine(1, 0.2);
    auto lams = periodic_spectrum(s, 2);
    double expect = 0.5 * (lams[1] + lams[2]);
    CHECK(midpoint_contour(s, 1, 0.2) == Catch::Approx(expect).margin(1e-6));

    // constant shift: j = 2 gives 1 + c (radius wide enough for the pair)
    CHECK(midpoint_contour(PotentialSpec::constant(0.15), 2, 0.3) ==
          Catch::Approx(1.15).margin(1e-6));

    // enclosure validation: radius so large it swallows a neighbour
    CHECK_THROWS_AS(midpoint_contour(s, 1, 1.2), std::runtime_error);
}

TEST_CASE("derived sequences on the free ladder") {
    auto lams = periodic_spectrum(PotentialSpec::zero(1), 8);
    auto gaps = gap_lengths(lams);
    for (double d : gaps) CHECK(std::abs(d) < 1e-9);

    auto tau = tau_sequence(lams);
    for (int j = 1; j <= 8; ++j) {
        CHECK(std::imag(tau[j]) == 0.0);
        CHECK(std::real(tau[j]) == Catch::Approx(double(j)).margin(1e-8));
    }

    auto t4 = sampling_t(lams, 4);
    int m = static_cast<int>(t4.size() / 2);
    REQUIRE(m == 4);
    for (int nn = 1; nn <= m; ++nn) {
        CHECK(t4[m + nn] == Catch::Approx(double(nn)).margin(1e-8));
        CHECK(t4[m - nn] == Catch::Approx(-double(nn)).margin(1e-8));
    }
    auto t2 = sampling_t(lams, 2);
    int m2 = static_cast<int>(t2.size() / 2);
    CHECK(t2[m2 + 2] == Catch::Approx(1.0).margin(1e-8));  // sqrt(lambda_4) = 1

    auto mus = dirichlet_spectrum(PotentialSpec::zero(1), 6);
    auto xi = xi_sequence(mus);
    for (size_t j = 1; j < xi.size(); ++j) CHECK(std::abs(xi[j]) < 1e-8);

    CHECK_THROWS_AS(sampling_t(lams, 3), std::invalid_argument);
}

TEST_CASE("tau flags imaginary entries pairwise-safely") {
    // deep negative constant shift makes the first radicand negative
    PotentialSpec s = PotentialSpec::constant(-0.5);
    auto lams = periodic_spectrum(s, 2);
    auto tau = tau_sequence(lams);
    REQUIRE(std::real(tau[1]) == 0.0);
    CHECK(std::imag(tau[1]) > 0.0);
    CHECK(std::abs(tau[1]) == Catch::Approx(std::sqrt(2.0 * 0.5)).epsilon(1e-6));
}

TEST_CASE("merged-gap flag marks closed gaps") {
    auto [lams, merged] = periodic_spectrum_flagged(PotentialSpec::cosine(2, 0.1), 3);
    CHECK(!merged[2]);  // the driven gap opens
    CHECK(lams[4] - lams[3] > 0.05);
    // gaps 1 and 3 open only at second order in the amplitude
    CHECK(lams[2] - lams[1] < 5e-3);
    CHECK(lams[6] - lams[5] < 5e-3);
}

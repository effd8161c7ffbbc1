#include "clpt/field_theory.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace clpt;

namespace {

/// Synthetic data with dx = x0 (x1 = 0) so the poles are set directly.
SpectralData toy(const std::vector<double>& lambda, const std::vector<double>& dx, double I, double kappa = 3.0) {
    SpectralData d;
    d.L = static_cast<int>(lambda.size());
    d.lambda = Eigen::Map<const Vec>(lambda.data(), d.L);
    d.x0 = Eigen::Map<const Vec>(dx.data(), d.L);
    d.x1 = Vec::Zero(d.L);
    d.b = Vec::Zero(d.L);
    d.I = I;
    d.kappa = kappa;
    return d;
}

}  // namespace

TEST_CASE("single-mode saddle matches the closed form") {
    // the positive mode carries no weight, so only the negative pole bounds y
    for (double I : {0.01, 0.3, 2.0}) {
        for (double lm : {-0.5, -4.0}) {
            const double D = 0.7;
            const auto d = toy({5.0, lm}, {0.0, D}, I);
            const auto sp = solve_saddle(d);
            const double closed = (1.0 - std::sqrt(D * D * -lm / (2.0 * I))) / -lm;
            CHECK(std::abs(sp.y - closed) < 1e-10 * std::max(1.0, std::abs(closed)));
            CHECK(sp.inside());
            CHECK(std::isinf(sp.lo));
        }
    }
}

TEST_CASE("symmetric two-mode saddle sits at zero") {
    const auto d = toy({2.0, -2.0}, {0.4, 0.4}, 0.0);
    const auto sp = solve_saddle(d);
    CHECK(std::abs(sp.y) < 1e-14);
    CHECK(sp.lo == doctest::Approx(-0.5));
    CHECK(sp.hi == doctest::Approx(0.5));
}

TEST_CASE("saddle bracket and convexity on random spectra") {
    CounterRng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const int L = 12;
        std::vector<double> lam, dx;
        for (int n = 0; n < L; ++n) {
            lam.push_back(n < 5 ? rng.uniform(0.1, 10.0) : -rng.uniform(0.01, 3.0));
            dx.push_back(rng.uniform(-1.0, 1.0));
        }
        const auto d = toy(lam, dx, rng.uniform(-1.0, 1.0));
        const auto sp = solve_saddle(d);
        CHECK(sp.inside());
        CHECK(std::abs(omega_prime(sp.y, d)) < 1e-9);
        // second finite difference of Omega at interior points
        for (int k = 1; k < 100; ++k) {
            const double y = sp.lo + (sp.hi - sp.lo) * k / 100.0;
            const double h = 1e-4 * (sp.hi - sp.lo);
            CHECK(omega(y + h, d) - 2 * omega(y, d) + omega(y - h, d) > 0.0);
        }
    }
}

TEST_CASE("omega derivatives agree with finite differences") {
    const auto d = toy({3.0, 0.5, -1.0}, {0.2, -0.6, 0.9}, 0.05);
    const double y = 0.1, h = 1e-6;
    CHECK(omega_prime(y, d) == doctest::Approx((omega(y + h, d) - omega(y - h, d)) / (2 * h)).epsilon(1e-7));
    CHECK(omega_second(y, d) ==
          doctest::Approx((omega_prime(y + h, d) - omega_prime(y - h, d)) / (2 * h)).epsilon(1e-7));
    CHECK_THROWS_AS(omega(-1.0 / 3.0, d), SaddleError);
}

TEST_CASE("degenerate spectra are rejected") {
    CHECK_THROWS_AS(solve_saddle(toy({1.0, 2.0}, {0.1, 0.1}, 0.1)), SaddleError);
    CHECK_THROWS_AS(solve_saddle(toy({1.0, -2.0}, {0.0, 0.0}, 0.1)), SaddleError);
}

TEST_CASE("q prediction on a toy spectrum") {
    CHECK(r0(0.0) == 1.0);
    const auto d = toy({2.0, -2.0}, {0.4, 0.4}, 0.0);
    const auto q = q_prediction(d);
    // y = 0: every mode contributes 1 / (kappa L)
    CHECK(q.leading == doctest::Approx(1.0 / 3.0));
    CHECK(q.leading_r0 == doctest::Approx(1.0 / 3.0));
    CHECK(q.halved == doctest::Approx(1.0 / 6.0));
    CHECK(q.difference == doctest::Approx(q.corrected - q.leading));
    const auto m = gaussian_boundary_moments();
    CHECK(m.mean == 0.0);
    CHECK(m.second == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("entropy identities") {
    const double N = 200;
    CHECK(coarse_grain_entropy(Vec::Zero(16), N) == doctest::Approx(N * std::log(2.0)));
    CHECK(coarse_grain_entropy(Vec::Constant(16, 1.0), N) == 0.0);
    CHECK(coarse_grain_entropy(Vec::Constant(16, -1.0), N) == 0.0);
    CHECK(tsallis_entropy(Vec::Zero(16), N) == doctest::Approx(N / 2));
    CHECK(tsallis_entropy(Vec::Constant(16, 1.0), N) == 0.0);
    // refining the bins without changing the profile leaves S unchanged
    CounterRng rng(3);
    const auto pr = oracle::random_protocol(1.0, 16, rng);
    Vec fine(32);
    for (int i = 0; i < 16; ++i) fine(2 * i) = fine(2 * i + 1) = pr.s(i);
    CHECK(coarse_grain_entropy(fine, N) == doctest::Approx(coarse_grain_entropy(pr.s, N)));
    CHECK(tsallis_entropy(fine, N) == doctest::Approx(tsallis_entropy(pr.s, N)));
}

TEST_CASE("tsallis and shannon agree to fourth order in s") {
    const double N = 100;
    CounterRng rng(5);
    const auto pr = oracle::random_protocol(1.0, 20, rng);
    auto gap = [&](double eps) {
        const Vec s = eps * pr.s;
        const double dS = coarse_grain_entropy(s, N) - coarse_grain_entropy(Vec::Zero(20), N);
        const double dT = tsallis_entropy(s, N) - tsallis_entropy(Vec::Zero(20), N);
        return std::abs(dS - dT);
    };
    const double slope = std::log(gap(0.02) / gap(0.2)) / std::log(0.1);
    CHECK(slope == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("linear fit") {
    const auto f = linear_fit({0, 1, 2, 3}, {1, 3, 5, 7});
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.r2 == doctest::Approx(1.0));
}

TEST_CASE("spectral data of the traced optimum past the speed limit") {
    const auto p = build_single_qubit_problem();
    const double T_c = 0.9761085877;
    const auto d = spectral_data_at(p, 2.52, 32, 0.5 * (2.52 - T_c));
    const Protocol center = s_delta_cell_average(2.52, *continued_delta0(p, 2.52, 0.5 * (2.52 - T_c)), 32);
    CHECK(d.reconstruction_residual(center) < 1e-12);
    CHECK(d.lambda(0) > 0.0);
    CHECK(d.lambda(31) < 0.0);
    // quadratic model along one eigenfunction vs the exact landscape
    const int n = 2;
    const double x = 1e-3;
    const double exact = infidelity_exact(p, Protocol(2.52, center.s + x * d.f.col(n)));
    const double quad = d.c + d.b(n) * x + 0.5 * d.lambda(n) * x * x;
    CHECK(std::abs(exact - quad) < 1e-8);
    const auto csv = spectral_data_csv(d);
    CHECK(csv.find("n,lambda,b,x0,x1") == 0);
}

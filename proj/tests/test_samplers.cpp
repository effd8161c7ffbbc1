#include "clpt/samplers.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace clpt;

TEST_CASE("exact site landscape proposals match full propagation") {
    CounterRng rng(21);
    for (const auto& p : {build_single_qubit_problem(), build_two_qubit_problem()}) {
        auto land = make_exact_site_landscape(p, 1.7, 10);
        const auto pr = oracle::random_protocol(1.7, 10, rng);
        land->reset(pr.s);
        CHECK(land->value() == doctest::Approx(infidelity_exact(p, pr)).epsilon(1e-12));
        for (int k = 0; k < 20; ++k) {
            const int i = static_cast<int>(rng.below(10));
            const double v = rng.uniform(-1, 1);
            Protocol q(1.7, land->protocol());
            q.s(i) = v;
            CHECK(land->propose(i, v) == doctest::Approx(infidelity_exact(p, q)).epsilon(1e-12));
            if (k % 2) land->accept(i, v);
        }
        CHECK(land->value() == doctest::Approx(infidelity_exact(p, Protocol(1.7, land->protocol()))).epsilon(1e-12));
    }
}

TEST_CASE("descent ends in a single-flip local minimum, never below the enumerated optimum") {
    const auto p = build_single_qubit_problem();
    const int N = 12;
    for (double T : {0.8, 1.6}) {
        double global = 1.0;
        for (int m = 0; m < (1 << N); ++m) {
            Vec s(N);
            for (int i = 0; i < N; ++i) s(i) = (m >> i) & 1 ? 1.0 : -1.0;
            global = std::min(global, infidelity_exact(p, Protocol(T, s)));
        }
        bool found = false;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto r = stochastic_descent(p, T, N, seed);
            CHECK(r.infidelity >= global - 1e-12);
            found |= r.infidelity < global + 1e-12;
            for (int i = 0; i < N; ++i) {
                Protocol q(T, r.s);
                q.s(i) = -q.s(i);
                CHECK(infidelity_exact(p, q) >= r.infidelity - 1e-12);
            }
        }
        // below T_c the landscape is simple enough for descent to find the optimum
        if (T < 0.9) CHECK(found);
    }
}

TEST_CASE("ensemble drivers: parallel equals serial") {
    const auto p = build_single_qubit_problem();
    const auto a = sd_ensemble(p, 1.5, 40, 6, 3);
    const auto b = sd_ensemble_serial(p, 1.5, 40, 6, 3);
    for (int r = 0; r < 6; ++r) CHECK(a.runs[r][0] == b.runs[r][0]);
    LmcConfig c;
    c.L = 8;
    c.T = 2.0;
    c.max_relax_iterations = 3000;
    c.therm_window = 200;
    c.stride = 10;
    c.samples = 5;
    const auto x = lmc_ensemble(p, c, 3, 9);
    const auto y = lmc_ensemble_serial(p, c, 3, 9);
    for (int r = 0; r < 3; ++r) {
        REQUIRE(x.runs[r].size() == y.runs[r].size());
        for (size_t k = 0; k < x.runs[r].size(); ++k) CHECK(x.runs[r][k] == y.runs[r][k]);
    }
}

TEST_CASE("metropolis sweeps sample the Boltzmann weight") {
    // exp(-beta a |s|^2) with beta a = 12.5: Gaussian of variance 0.04, truncation negligible
    auto land = make_function_site_landscape([](const Vec& s) { return s.squaredNorm(); }, 2);
    land->reset(Vec::Zero(2));
    CounterRng rng(1);
    long acc = 0;
    double m2 = 0.0, m4 = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        lmc_sweep(*land, 12.5, 0.2, rng, acc);
        const double x = land->protocol()(0);
        m2 += x * x;
        m4 += x * x * x * x;
    }
    CHECK(m2 / n == doctest::Approx(0.04).epsilon(0.05));
    CHECK(m4 / n == doctest::Approx(3 * 0.04 * 0.04).epsilon(0.1));
}

TEST_CASE("mexican hat: samples spread evenly around the ring") {
    const double r0 = 0.6;
    auto land = make_function_site_landscape(
        [r0](const Vec& s) { return std::pow(s.squaredNorm() - r0 * r0, 2); }, 2);
    land->reset((Vec(2) << r0, 0.0).finished());
    CounterRng rng(2);
    long acc = 0;
    std::vector<Vec> samples;
    double radius = 0.0;
    for (int k = 0; k < 200000; ++k) {
        lmc_sweep(*land, 1e3, 0.1, rng, acc);
        if (k % 20 == 0) {
            samples.push_back(land->protocol());
            radius += land->protocol().norm();
        }
    }
    CHECK(radius / samples.size() == doctest::Approx(r0).epsilon(0.05));
    const Vec ev = covariance_spectrum(samples);
    CHECK(ev(0) == doctest::Approx(r0 * r0 / 2).epsilon(0.15));
    CHECK(ev(1) == doctest::Approx(r0 * r0 / 2).epsilon(0.15));
}

TEST_CASE("order parameters of simple ensembles") {
    SampleEnsemble e;
    e.runs = {{Vec::Constant(4, 1.0)}, {Vec::Constant(4, 1.0)}};
    CHECK(q_bb(e) == doctest::Approx(0.0));
    e.runs = {{Vec::Constant(4, 1.0)}, {Vec::Constant(4, -1.0)}};
    CHECK(q_bb(e) == doctest::Approx(1.0));
    e.runs = {{Vec::Constant(4, 0.5), Vec::Constant(4, -0.5)}};
    e.trapped = {false};
    CHECK(q_continuous(e).mean == doctest::Approx(0.25));
}

TEST_CASE("relaxation toy model limits") {
    const double sigma = 0.03, a = std::sqrt(sigma * sigma / (2 * M_PI));
    // far from the set the decrease is linear
    const auto far = relaxation_toy_model(sigma, 10.0, 100);
    CHECK(far[100] == doctest::Approx(10.0 - 100 * a).epsilon(1e-10));
    // close to it dl/dn = -2 a l^2 / sigma^2, so 1/l grows linearly
    const double l0 = 1e-3 * sigma;
    const auto near = relaxation_toy_model(sigma, l0, 1000);
    CHECK(1.0 / near[1000] == doctest::Approx(1.0 / l0 + 2 * a * 1000 / (sigma * sigma)).epsilon(1e-4));
}

TEST_CASE("decay slope of a power law") {
    std::vector<double> tr(10001);
    for (size_t n = 1; n < tr.size(); ++n) tr[n] = 5.0 / std::pow(static_cast<double>(n), 1.5);
    CHECK(decay_slope(tr, 10, 10000) == doctest::Approx(-1.5));
    CHECK_THROWS(decay_slope(tr, 0, 100));
}

TEST_CASE("distances") {
    const Vec a = Vec::Zero(4), b = Vec::Constant(4, 1.0);
    CHECK(protocol_distance(a, b) > 0.0);
    CHECK(run_distance({a, b}, {b}) == 0.0);
}

TEST_CASE("deformation scan finds the minimum of a known direction") {
    const auto p = build_single_qubit_problem();
    const Protocol center = Protocol::constant(1.0, 8, 0.0);
    const auto scan = deformation_scan(p, center, Vec::Constant(8, 1.0), -1.0, 1.0, 41);
    REQUIRE(!scan.minima_x.empty());
    // the constant protocol s = x is a single exponential; check against a fine search
    double best = 1.0, bx = 0.0;
    for (int k = 0; k <= 20000; ++k) {
        const double x = -1.0 + k / 10000.0;
        const double v = infidelity_exact(p, Protocol::constant(1.0, 8, x));
        if (v < best) {
            best = v;
            bx = x;
        }
    }
    CHECK(scan.minima_x.front() == doctest::Approx(bx).epsilon(1e-3));
    CHECK(scan.minima_infidelity.front() <= best + 1e-12);
}

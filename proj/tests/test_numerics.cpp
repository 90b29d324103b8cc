#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "evo/model.hpp"
#include "evo/numerics.hpp"

using namespace evo;
using model::Dispersion;
using model::GridRule;
using model::InteractionKernel;
using model::MomentumGrid;
using numerics::EpsilonSchedule;
using numerics::TimeGrid;

TEST_CASE("time grids demand ordered nonnegative samples") {
    const TimeGrid g = TimeGrid::of({0.0, 0.5, 2.0});
    CHECK(g.size() == 3);
    CHECK_THROWS_AS(TimeGrid::of({0.0, 2.0, 1.0}), config_error);
    CHECK_THROWS_AS(TimeGrid::of({-1.0, 0.0}), config_error);
    const TimeGrid lin = TimeGrid::linspace(0.0, 10.0, 101);
    CHECK(lin.t.front() == 0.0);
    CHECK(lin.t.back() == doctest::Approx(10.0));
}

TEST_CASE("epsilon schedule is a geometric ladder") {
    const EpsilonSchedule s;
    CHECK(s.at(0) == doctest::Approx(0.1));
    CHECK(s.at(1) == doctest::Approx(0.05));
    CHECK(s.count == 8);
    CHECK(s.at(7) == doctest::Approx(0.1 / 128.0));
}

TEST_CASE("grid integration matches analytic values") {
    const MomentumGrid g1 = model::build_grid(1, 4, 1.0, GridRule::gauss_legendre);
    std::vector<double> ones(g1.size(), 1.0), sq(g1.size());
    CHECK(numerics::integrate(g1, ones) == doctest::Approx(2.0));
    for (std::size_t i = 0; i < g1.size(); ++i) sq[i] = g1.node1(i) * g1.node1(i);
    CHECK(numerics::integrate(g1, sq) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    const MomentumGrid g64 = model::build_grid(1, 64, 6.0, GridRule::gauss_legendre);
    std::vector<cplx> gauss(g64.size());
    for (std::size_t i = 0; i < g64.size(); ++i)
        gauss[i] = std::exp(-g64.node1(i) * g64.node1(i));
    CHECK(std::abs(numerics::integrate(g64, gauss) - std::sqrt(M_PI)) < 1e-10);

    std::vector<cplx> bad(g64.size(), 1.0);
    bad[7] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(numerics::integrate(g64, bad), numeric_error);
}

TEST_CASE("ordered time integrals hit their closed forms") {
    CHECK(numerics::ordered_time_integral({-1.0, 1.0}, 0, 0.0) == cplx(0.0, 0.0));

    const cplx v = numerics::ordered_time_integral({-2.0, 2.0}, 0, M_PI);
    CHECK(std::abs(v - cplx(0.0, -M_PI / 2)) < 1e-9 * (1 + M_PI / 2));

    CHECK_THROWS_AS(numerics::ordered_time_integral({1, 1, 1, 1, 1}, 0, 1.0),
                    unsupported_error);
    CHECK_THROWS_AS(numerics::ordered_time_integral({-1.0, 1.0}, 0, 1.0, 0), config_error);
}

TEST_CASE("weighted double integral grows like t^2/(2i)") {
    // I(t) = t^2/(2i) + t + O(1) for unit phases. Subtract the known linear
    // term, then least-squares {t^2, 1} so the bounded remainder is absorbed
    // by the constant instead of leaking into the curvature estimate.
    const double ts[3] = {10.0, 20.0, 40.0};
    cplx I[3];
    for (int i = 0; i < 3; ++i) I[i] = numerics::ordered_time_integral({-1.0, 1.0}, 1, ts[i]);
    CHECK(std::abs(I[0] - cplx(10.0, -50.0)) < 2.5);    // remainder stays O(1)

    double s22 = 0, s20 = 0;
    cplx r2{}, r0{};
    for (int i = 0; i < 3; ++i) {
        const double t2 = ts[i] * ts[i];
        const cplx y = I[i] - ts[i];
        s22 += t2 * t2;
        s20 += t2;
        r2 += t2 * y;
        r0 += y;
    }
    const double det = s22 * 3.0 - s20 * s20;
    const cplx a = (r2 * 3.0 - r0 * s20) / det;
    CHECK(std::abs(a - cplx(0.0, -0.5)) < 1e-3);
}

TEST_CASE("closed form double integral") {
    CHECK(numerics::closed_form_double(1.0, 0.0) == cplx(0.0, 0.0));
    CHECK(std::abs(numerics::closed_form_double(2.0, M_PI) - cplx(0.0, -M_PI / 2)) < 1e-14);
    CHECK_THROWS_AS(numerics::closed_form_double(0.0, 1.0), singular_denominator);

    for (const double E : {0.5, 1.0, 2.0, 5.0})
        for (const double t : {0.1, 1.0, 10.0, 100.0}) {
            const cplx cf = numerics::closed_form_double(E, t);
            const cplx oq = numerics::ordered_time_integral({-E, E}, 0, t);
            CHECK(std::abs(cf - oq) < 1e-9 * (1 + std::abs(t / E)));
        }
}

TEST_CASE("panel refinement reproduces the same value") {
    const cplx base = numerics::ordered_time_integral({-1.5, 0.7, 0.8}, 0, 7.0);
    const cplx fine = numerics::ordered_time_integral({-1.5, 0.7, 0.8}, 0, 7.0, 2);
    CHECK(std::abs(base - fine) < 1e-9 * (1 + std::abs(base)));
}

TEST_CASE("ieps limit extrapolates analytic functions") {
    const numerics::IepsResult a =
        numerics::ieps_limit([](double e) { return cplx(1.0 / (1.0 + e), 0.0); });
    CHECK(std::abs(a.value - 1.0) < 1e-10);
    CHECK_FALSE(a.diverging);

    const numerics::IepsResult b =
        numerics::ieps_limit([](double e) { return 1.0 / cplx(2.0, -e); });
    CHECK(std::abs(b.value - 0.5) < 1e-10);

    const numerics::IepsResult c =
        numerics::ieps_limit([](double e) { return cplx(1.0 / e, 0.0); });
    CHECK(c.diverging);
}

TEST_CASE("ieps limit recovers the principal-value split") {
    // sum e^{-k^2}/(k^2 - 1 - i eps) -> P.V. + i pi e^{-1}; the oracle is a
    // midpoint rule whose nodes straddle the poles symmetrically.
    const MomentumGrid g = model::build_grid(1, 262144, 6.0, GridRule::uniform_trapezoid);
    std::vector<cplx> f(g.size());
    const numerics::IepsResult r = numerics::ieps_limit([&](double eps) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double k = g.node1(i);
            f[i] = std::exp(-k * k) / cplx(k * k - 1.0, -eps);
        }
        return numerics::integrate(g, f);
    });
    const double h = 0.01;
    double pv = 0.0;
    for (int j = 0; j < 1200; ++j) {
        const double k = -6.0 + (j + 0.5) * h;
        pv += h * std::exp(-k * k) / (k * k - 1.0);
    }
    const cplx expected(pv, M_PI * std::exp(-1.0));
    CHECK(std::abs(r.value - expected) < 1e-3);
}

TEST_CASE("stationary phase coefficient at the band minimum") {
    const MomentumGrid g = model::build_grid(1, 64, 6.0, GridRule::gauss_legendre);
    const Dispersion nonrel = Dispersion::nonrel_shifted(1.0);
    const numerics::StationaryPhase sp =
        numerics::stationary_phase_coeff(nonrel, InteractionKernel::omega_gaussian(g, nonrel), g);
    CHECK(std::abs(sp.k0) < 1e-10);
    CHECK(sp.exponent == doctest::Approx(0.5));
    const cplx want = std::sqrt(cplx(0.0, 2.0 * M_PI));
    CHECK(std::abs(sp.amplitude - want) < 5e-3);

    const Dispersion rel = Dispersion::relativistic(1.0);
    const numerics::StationaryPhase sr =
        numerics::stationary_phase_coeff(rel, InteractionKernel::gaussian(g), g);
    CHECK(std::abs(sr.k0) < 1e-10);
    CHECK(std::abs(sr.amplitude - want) < 5e-3);

    // A flat table has a vanishing second difference everywhere: no usable
    // critical point, so the asymptotics are refused.
    CHECK_THROWS_AS(numerics::stationary_phase_coeff(
                        Dispersion::tabulated(std::vector<double>(g.size(), 1.0)),
                        InteractionKernel::gaussian(g), g),
                    numeric_error);
}

TEST_CASE("term engine agrees with quadrature") {
    const std::vector<double> phases = {-1.3, 0.4, 0.9};
    const auto terms = numerics::osc::ordered_terms(phases, 1);
    for (const double t : {0.0, 1.0, 5.0, 20.0}) {
        const cplx engine = numerics::osc::eval_terms(terms, t);
        const cplx quad = numerics::ordered_time_integral(phases, 1, t);
        CHECK(std::abs(engine - quad) < 1e-8 * (1 + std::abs(engine)));
    }
}

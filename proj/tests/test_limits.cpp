#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "evo/limits.hpp"
#include "evo/model.hpp"
#include "evo/numerics.hpp"
#include "evo/oracles.hpp"

using namespace evo;
using model::Dispersion;
using model::InteractionKernel;
using model::ModelSpec;
using oracles::Element;
using oracles::FockSpec;

namespace {

// Three solvable modes; the closed coefficients are short sums over (omega, v).
const std::vector<double> kOmega = {0.9, 1.4, 2.3};
const std::vector<double> kAmp = {0.4, 0.3, 0.5};

ModelSpec three_linear_modes(double lambda) {
    model::LinearCoupling lc{InteractionKernel::table({kAmp[0], kAmp[1], kAmp[2]}, 1, true),
                             Dispersion::tabulated(kOmega)};
    return ModelSpec::make(lc, lambda, model::explicit_grid({0.0, 1.0, 2.0}));
}

}  // namespace

TEST_CASE("log-log exponent fits") {
    std::vector<double> xs, y2, y15;
    for (int i = 0; i < 12; ++i) {
        const double x = 1.0 + 0.5 * i;
        xs.push_back(x);
        y2.push_back(x * x);
        y15.push_back(std::pow(x, 1.5) * (1.0 + 0.01 * std::sin(x)));
    }
    const auto f2 = limits::fit_exponent(xs, y2);
    CHECK(f2.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(f2.intercept) < 1e-12);
    CHECK(f2.half_width < 1e-10);

    const auto f15 = limits::fit_exponent(xs, y15);
    CHECK(std::abs(f15.slope - 1.5) < 0.05);
    CHECK(f15.half_width > 0.0);

    CHECK_THROWS_AS(limits::fit_exponent({1.0, 2.0, 3.0}, {1.0, 4.0, 9.0}), config_error);
    CHECK_THROWS_AS(limits::fit_exponent(xs, std::vector<double>(xs.size(), -1.0)),
                    std::domain_error);
}

TEST_CASE("unwrap recovers a pure exponential") {
    const auto grid = numerics::TimeGrid::linspace(0.0, 30.0, 301);
    const cplx a(-0.1, 2.0);
    const cplx b(0.05, -0.3);
    std::vector<cplx> vals(grid.t.size());
    for (std::size_t i = 0; i < vals.size(); ++i)
        vals[i] = std::exp(a * grid.t[i] + b);

    const auto u = limits::unwrap_exponent(grid, vals);
    CHECK(std::abs(u.A - a) < 1e-10);
    CHECK(std::abs(u.B - b) < 1e-10);
    CHECK(u.residual < 1e-10);
    REQUIRE(u.c_trace.size() == vals.size());
    for (const cplx& c : u.c_trace) CHECK(std::abs(c) < 1e-9);
}

TEST_CASE("unwrap inverts the closed exponent form") {
    // exp(A t + B + C(t)) with two known oscillation modes and bounded C.
    const auto grid = numerics::TimeGrid::linspace(0.0, 40.0, 801);
    const cplx A(0.0, 0.35);
    const cplx B(-0.04, 0.0);
    const double w1 = -1.0, w2 = -1.7;
    const cplx c1(0.03, 0.0), c2(0.01, 0.0);
    std::vector<cplx> vals(grid.t.size());
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double t = grid.t[i];
        vals[i] = std::exp(A * t + B + c1 * std::exp(cplx(0.0, w1 * t)) +
                           c2 * std::exp(cplx(0.0, w2 * t)));
    }
    const auto u = limits::unwrap_exponent(grid, vals, {w1, w2});
    CHECK(std::abs(u.A - A) < 1e-10);
    CHECK(std::abs(u.B - B) < 1e-10);
}

TEST_CASE("unwrap guards") {
    const auto grid = numerics::TimeGrid::linspace(0.0, 10.0, 101);
    std::vector<cplx> alias(grid.t.size());
    const double freq = (M_PI + 0.005) / 0.1;    // one grid step jumps just past pi
    for (std::size_t i = 0; i < alias.size(); ++i)
        alias[i] = std::exp(cplx(0.0, freq * grid.t[i]));
    CHECK_THROWS_AS(limits::unwrap_exponent(grid, alias), numeric_error);

    std::vector<cplx> dead(grid.t.size(), cplx(1e-13, 0.0));
    CHECK_THROWS_AS(limits::unwrap_exponent(grid, dead), numeric_error);

    std::vector<cplx> short_vals(3, cplx(1.0, 0.0));
    CHECK_THROWS_AS(
        limits::unwrap_exponent(numerics::TimeGrid::linspace(0.0, 1.0, 3), short_vals),
        config_error);
}

TEST_CASE("unwrap of the exact evolution recovers the grid sums") {
    const double lam = 0.1;
    const ModelSpec m = three_linear_modes(lam);
    const auto spec = FockSpec::for_model(m, 12, 64);
    const auto grid = numerics::TimeGrid::linspace(0.0, 20.0, 201);

    std::vector<cplx> vals(grid.t.size());
    for (std::size_t i = 0; i < vals.size(); ++i)
        vals[i] = oracles::fock_exact(spec, m, Element::vacuum(), grid.t[i], lam).value;

    std::vector<double> freqs;
    for (const double w : kOmega) freqs.push_back(-w);
    const auto u = limits::unwrap_exponent(grid, vals, freqs);

    double s1 = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < kOmega.size(); ++k) {
        s1 += kAmp[k] * kAmp[k] / kOmega[k];
        s2 += kAmp[k] * kAmp[k] / (kOmega[k] * kOmega[k]);
    }
    const double l2 = lam * lam;
    CHECK(std::abs(u.A - cplx(0.0, l2 * s1)) < 1e-8);
    CHECK(std::abs(u.B - cplx(-l2 * s2, 0.0)) < 1e-8);
    for (std::size_t i = 0; i < grid.t.size(); ++i) {
        cplx want{};
        for (std::size_t k = 0; k < kOmega.size(); ++k)
            want += kAmp[k] * kAmp[k] / (kOmega[k] * kOmega[k]) *
                    std::exp(cplx(0.0, -kOmega[k] * grid.t[i]));
        CHECK(std::abs(u.c_trace[i] - l2 * want) < 1e-8);
    }
}

TEST_CASE("rescaled sweep on the solvable model") {
    const ModelSpec m = three_linear_modes(0.1);
    limits::SweepOptions opt;
    opt.fock = FockSpec::for_model(m, 12, 64);

    const auto sweep =
        limits::stochastic_sweep(m, Element::vacuum(), 1.0, {0.2, 0.1, 0.05, 0.025}, opt);
    REQUIRE(sweep.rows.size() == 4);
    CHECK(sweep.rows.front().lambda == 0.2);
    CHECK(sweep.rows.back().lambda == 0.025);
    for (const auto& row : sweep.rows) {
        CHECK(row.tau == 1.0);
        CHECK(row.t == doctest::Approx(1.0 / (row.lambda * row.lambda)));
        CHECK(row.resid_corrected < row.resid_uncorrected);
    }
    // The leading-exponent residual is the lam^2 tail of an exact exponent
    // form. Three coherent modes never dephase, so C(tau/lam^2) modulates the
    // four-point fit by a few tenths around the clean quadratic order.
    CHECK(std::abs(sweep.order.slope - 2.0) <= 0.35);
    CHECK(sweep.gain > 100.0);

    const std::string csv = limits::sweep_csv(sweep);
    const std::string header =
        "lambda,tau,t,pred_re,pred_im,oracle_re,oracle_im,"
        "resid_uncorrected,resid_corrected\n";
    CHECK(csv.rfind(header, 0) == 0);
    std::size_t lines = 0;
    for (const char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 5);
}

TEST_CASE("sweep input guards") {
    const ModelSpec m = three_linear_modes(0.1);
    limits::SweepOptions opt;
    opt.fock = FockSpec::for_model(m, 8, 16);
    CHECK_THROWS_AS(
        limits::stochastic_sweep(m, Element::vacuum(), 1.0, {0.2, 0.1, 0.05}, opt),
        config_error);
    CHECK_THROWS_AS(
        limits::stochastic_sweep(m, Element::vacuum(), 1.0, {0.4, 0.2, 0.1, 0.05}, opt),
        config_error);
    CHECK_THROWS_AS(
        limits::stochastic_sweep(m, Element::vacuum(), 0.0, {0.2, 0.1, 0.05, 0.025}, opt),
        config_error);
}

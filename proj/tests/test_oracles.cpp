#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "evo/model.hpp"
#include "evo/numerics.hpp"
#include "evo/oracles.hpp"
#include "evo/perturb.hpp"

using namespace evo;
using model::CreationPattern;
using model::Dispersion;
using model::GridRule;
using model::InteractionKernel;
using model::ModelSpec;
using model::MomentumGrid;
using oracles::Element;
using oracles::FockSpec;
using oracles::Route;

namespace {

ModelSpec two_pair_modes(double lambda) {
    model::PureCreation pc{2, CreationPattern::creation,
                           InteractionKernel::table({0.3, 0.2}, 1, true),
                           Dispersion::tabulated({1.0, 1.5})};
    return ModelSpec::make(pc, lambda, model::explicit_grid({0.0, 1.0}));
}

ModelSpec two_linear_modes(double lambda) {
    model::LinearCoupling lc{InteractionKernel::table({0.5, 0.4}, 1, true),
                             Dispersion::tabulated({1.0, 1.6})};
    return ModelSpec::make(lc, lambda, model::explicit_grid({0.0, 1.0}));
}

ModelSpec kub_field(double lambda) {
    model::PureCreation pc{3, CreationPattern::field,
                           InteractionKernel::table({0.9, 0.6}, 1, true),
                           Dispersion::tabulated({0.35, 0.8})};
    return ModelSpec::make(pc, lambda, model::explicit_grid({0.0, 1.0}));
}

ModelSpec cubic_ring3(double lambda) {
    model::CubicTI ct{InteractionKernel::table({0.45, 0.30, 0.30, 0.25, 0.25, 0.35,
                                                0.28, 0.40, 0.28},
                                               2, true),
                      Dispersion::tabulated({1.0, 0.9, 1.3})};
    return ModelSpec::make(ct, lambda, model::explicit_grid({0.0, 1.0, 2.0}, {}, 3));
}

// Thirteen-mode cubic ring with a separable positive kernel.
ModelSpec cubic_ring13(double lambda) {
    const std::vector<double> om = {1.019908834001, 1.231534709235, 2.021784251289,
                                    1.71502685049,  1.031780099137, 1.506377716331,
                                    1.570671817397, 1.123634480492, 1.928408011973,
                                    1.05914082789,  1.447719466694, 1.62343625567,
                                    1.50287922858};
    const std::vector<double> g = {0.183679857144, 0.198783778729, 0.220626725484,
                                   0.153420116375, 0.189854720708, 0.194621599667,
                                   0.154272074901, 0.125149008351, 0.222346027477,
                                   0.154840122302, 0.156398600203, 0.214171107045,
                                   0.183516293989};
    const std::size_t n = om.size();
    std::vector<cplx> vt(n * n);
    std::vector<double> nodes(n);
    for (std::size_t p = 0; p < n; ++p) {
        nodes[p] = double(p);
        for (std::size_t q = 0; q < n; ++q)
            vt[p * n + q] = g[q] * g[(p + n - q) % n] * g[p];
    }
    model::CubicTI ct{InteractionKernel::table(vt, 2, true), Dispersion::tabulated(om)};
    return ModelSpec::make(ct, lambda, model::explicit_grid(nodes, {}, int(n)));
}

}  // namespace

TEST_CASE("displaced-oscillator closed form") {
    model::LinearCoupling lc{InteractionKernel::table({1.0}, 1, true),
                             Dispersion::tabulated({1.0})};
    const ModelSpec m = ModelSpec::make(lc, 1.0, model::explicit_grid({0.0}));

    CHECK(std::abs(oracles::solvable_closed_form(m, 0.0, 1.0).value - 1.0) < 1e-15);
    // S1 = S2 = 1: value(pi) = exp(i pi - 1 + e^{-i pi}) = -e^{-2}.
    const auto r = oracles::solvable_closed_form(m, M_PI, 1.0);
    CHECK(r.route == Route::closed_form);
    CHECK(std::abs(r.value + std::exp(-2.0)) < 1e-14);

    CHECK_THROWS_AS(oracles::solvable_closed_form(two_pair_modes(0.1), 1.0, 0.1),
                    unsupported_error);

    // A band crossing zero breaks the solution's assumptions.
    const MomentumGrid g = model::build_grid(1, 16, 6.0, GridRule::gauss_legendre);
    const Dispersion w = Dispersion::nonrel_shifted(1.0);
    model::LinearCoupling bad{InteractionKernel::omega_gaussian(g, w), w};
    CHECK_THROWS_AS(
        oracles::solvable_closed_form(ModelSpec::make(bad, 0.1, g), 1.0, 0.1),
        config_error);
}

TEST_CASE("truncated-basis evolution is normalized and contractive") {
    const ModelSpec m = two_pair_modes(0.1);
    const auto spec = FockSpec::for_model(m, 30, 60);

    const auto r0 = oracles::fock_exact(spec, m, Element::vacuum(), 0.0, 0.1);
    CHECK(r0.route == Route::fock_exact);
    CHECK(std::abs(r0.value - 1.0) < 1e-13);
    CHECK(std::abs(oracles::fock_exact(spec, m, Element::vacuum(), 3.0, 0.0).value - 1.0) <
          1e-13);

    for (const double t : {0.5, 2.0, 9.0, 31.0}) {
        const auto r = oracles::fock_exact(spec, m, Element::vacuum(), t, 0.1);
        CHECK(std::abs(r.value) <= 1.0 + 1e-10);
        CHECK(r.error_estimate >= 0.0);
        CHECK(r.error_estimate < 1e-8);
    }

    CHECK_THROWS_AS(FockSpec::for_model(m, 1, 12), config_error);
    CHECK_THROWS_AS(FockSpec::for_model(m, 10, 1), config_error);
}

TEST_CASE("truncated evolution matches the closed form for linear coupling") {
    const ModelSpec m = two_linear_modes(0.1);
    const auto spec = FockSpec::for_model(m, 12, 24);
    for (const double t : {1.0, 5.0, 20.0}) {
        const cplx closed = oracles::solvable_closed_form(m, t, 0.1).value;
        const cplx fock = oracles::fock_exact(spec, m, Element::vacuum(), t, 0.1).value;
        CHECK(std::abs(fock - closed) < 1e-8);
    }
}

TEST_CASE("second-order partial sum and its quartic residual") {
    const ModelSpec m = two_pair_modes(0.1);
    const double t = 2.0;

    // dyson2 = 1 - lam^2 (rho_1 cf(E_1) + rho_2 cf(E_2)) for the two channels.
    const cplx fine = 0.09 * numerics::closed_form_double(2.0, t) +
                      0.04 * numerics::closed_form_double(3.0, t);
    for (const double lam : {0.05, 0.1}) {
        const auto d2 = oracles::dyson_order2(m, Element::vacuum(), t, lam);
        CHECK(d2.route == Route::dyson2);
        CHECK(std::abs(d2.value - (1.0 - lam * lam * fine)) < 1e-9);
    }

    // The residual against the exact evolution shrinks like lam^4.
    const auto spec = FockSpec::for_model(m, 30, 60);
    const double lams[3] = {0.04, 0.08, 0.16};
    double lx[3], ly[3];
    for (int i = 0; i < 3; ++i) {
        const cplx fock = oracles::fock_exact(spec, m, Element::vacuum(), t, lams[i]).value;
        const cplx d2 = oracles::dyson_order2(m, Element::vacuum(), t, lams[i]).value;
        lx[i] = std::log(lams[i]);
        ly[i] = std::log(std::abs(fock - d2));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < 3; ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double slope = (3.0 * sxy - sx * sy) / (3.0 * sxx - sx * sx);
    CHECK(slope == doctest::Approx(4.0).epsilon(0.075));
}

TEST_CASE("fourth-order contribution: quadrature and term-engine routes") {
    const ModelSpec m = kub_field(1.0);
    const auto terms = oracles::dyson_order4_terms(m, Element::vacuum(), 1.0);
    const double ts[3] = {1.0, 5.0, 10.0};
    const cplx want[3] = {cplx(185.145715315214, -269.321864324919),
                          cplx(-19112.6543523905, 25969.8161069805),
                          cplx(-16643.0429063879, 15995.6528046008)};
    for (int i = 0; i < 3; ++i) {
        const cplx engine = numerics::osc::eval_terms(terms, ts[i]);
        CHECK(std::abs(engine - want[i]) < 1e-9 * std::abs(want[i]));

        const auto quad = oracles::dyson_order4(m, Element::vacuum(), ts[i], 1.0);
        CHECK(quad.route == Route::dyson4);
        CHECK(std::abs(quad.value - engine) < 1e-7 * std::abs(engine));
    }
    // Coefficients are O(1e4); cancellation at t = 0 is clean to roundoff.
    CHECK(std::abs(numerics::osc::eval_terms(terms, 0.0)) < 1e-11);
    CHECK(std::abs(oracles::dyson_order4(m, Element::vacuum(), 0.0, 1.0).value) < 1e-12);

    // Secular t^2 coefficient of the vacuum contribution is A2^2/2: the
    // disconnected square of the order-2 linear term.
    const auto sec = oracles::dyson_order4_secular(m, Element::vacuum(), 1.0);
    const cplx a2 = perturb::vacuum_order2(m).A;
    CHECK(std::abs(sec.c2 - a2 * a2 / 2.0) < 1e-9 * std::abs(sec.c2));
}

TEST_CASE("one-particle secular coefficients on the three-mode ring") {
    const ModelSpec m = cubic_ring3(1.0);
    const auto sec = oracles::dyson_order4_secular(m, Element::one_particle(0), 1.0);
    CHECK(std::abs(sec.c2 - cplx(-0.062128125, 0.0)) < 1e-12);
    CHECK(std::abs(sec.c1 - cplx(0.0, 0.073368157615711)) < 1e-12);
}

TEST_CASE("basis dimensions and mode-set guards") {
    const ModelSpec z13 = cubic_ring13(0.1);
    CHECK(oracles::fock_dimension(FockSpec::for_model(z13, 4, 4), z13,
                                  Element::one_particle(0)) == 184);

    // Without mode mixing there is no sector filter: one pair mode with
    // per-mode cap 4 retains occupations 0..4.
    model::PureCreation pc{2, CreationPattern::creation, InteractionKernel::table({0.3}, 1, true),
                           Dispersion::tabulated({1.0})};
    const ModelSpec one = ModelSpec::make(pc, 0.1, model::explicit_grid({0.0}));
    CHECK(oracles::fock_dimension(FockSpec::for_model(one, 4, 10), one, Element::vacuum()) ==
          5);

    // Momentum-conserving variants refuse proper mode subsets.
    FockSpec sub = FockSpec::for_model(z13, 3, 3);
    sub.modes = {0, 1};
    CHECK_THROWS_AS(oracles::fock_exact(sub, z13, Element::vacuum(), 1.0, 0.1),
                    config_error);

    // The requested element must live on a retained mode.
    const ModelSpec pair = two_pair_modes(0.1);
    FockSpec psub = FockSpec::for_model(pair, 6, 12);
    psub.modes = {0};
    CHECK_THROWS_AS(oracles::fock_exact(psub, pair, Element::one_particle(1), 1.0, 0.1),
                    config_error);
}

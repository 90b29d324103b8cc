#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evo/diagrams.hpp"
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

namespace {

// Two field modes under the cubic field pattern (n = 3): the workhorse for
// order-4 vacuum structure.
ModelSpec two_field_modes(double g1, double g2, double lambda) {
    model::PureCreation pc{3, CreationPattern::field,
                           InteractionKernel::table({g1, g2}, 1, true),
                           Dispersion::tabulated({0.35, 0.8})};
    return ModelSpec::make(pc, lambda, model::explicit_grid({0.0, 1.0}));
}

ModelSpec two_pair_modes(double lambda) {
    model::PureCreation pc{2, CreationPattern::creation,
                           InteractionKernel::table({0.3, 0.2}, 1, true),
                           Dispersion::tabulated({1.0, 1.5})};
    return ModelSpec::make(pc, lambda, model::explicit_grid({0.0, 1.0}));
}

cplx total(const std::vector<cplx>& vals) {
    return std::accumulate(vals.begin(), vals.end(), cplx{});
}

}  // namespace

TEST_CASE("composition catalogue covers every cut choice once") {
    for (const int n : {2, 3, 4}) {
        const auto terms = diagrams::enumerate_terms(n);
        CHECK(terms.size() == std::size_t(1) << (n - 1));
        std::size_t uncut = 0;
        for (const auto& t : terms) {
            CHECK(t.order == n);
            CHECK(std::accumulate(t.composition.begin(), t.composition.end(), 0) == n);
            const int lower = int(t.composition.size()) - 1;
            CHECK(t.sign == (lower % 2 == 0 ? 1 : -1));
            const auto c = t.cuts();
            CHECK(c.size() == std::size_t(n - 1));
            CHECK(std::count(c.begin(), c.end(), true) == lower);
            // Only the single-block piece has the identically vanishing full
            // phase; every other first block oscillates.
            CHECK(t.oscillatory == (t.composition.size() > 1));
            if (t.composition.size() == 1) ++uncut;
        }
        CHECK(uncut == 1);
    }
    CHECK_THROWS_AS(diagrams::enumerate_terms(1), unsupported_error);
    CHECK_THROWS_AS(diagrams::enumerate_terms(5), unsupported_error);
}

TEST_CASE("pairing class tables") {
    const ModelSpec field = two_field_modes(0.9, 0.6, 1.0);
    const auto f2 = diagrams::pairing_classes(field, 2);
    REQUIRE(f2.size() == 1);
    CHECK(f2[0].lines.size() == 3);
    CHECK(f2[0].pairing_count == 6.0);
    CHECK(f2[0].connected);
    CHECK(diagrams::pairing_classes(field, 3).empty());

    const ModelSpec pair = two_pair_modes(0.1);
    const auto p4 = diagrams::pairing_classes(pair, 4);
    REQUIRE(!p4.empty());
    bool any_connected = false, any_disconnected = false;
    for (const auto& cl : p4) {
        CHECK(cl.pairing_count > 0.0);
        for (const auto& ln : cl.lines) CHECK(ln.first < ln.second);
        (cl.connected ? any_connected : any_disconnected) = true;
    }
    CHECK(any_connected);
    CHECK(any_disconnected);
}

TEST_CASE("order-2 pieces sum to the closed double integral") {
    const ModelSpec m = two_pair_modes(0.1);
    const auto terms = diagrams::enumerate_terms(2);
    for (const double t : {0.7, 3.0, 12.0}) {
        const cplx sum = total(diagrams::evaluate_all(terms, m, t));
        // (-i)^2 folds into the pieces: minus the weighted closed forms over
        // the two channels with vertex energies 2 omega.
        cplx want = -(0.09 * numerics::closed_form_double(2.0, t) +
                      0.04 * numerics::closed_form_double(3.0, t));
        CHECK(std::abs(sum - want) < 1e-12);
        CHECK(std::abs(sum - diagrams::order_total(m, 2, t)) < 1e-12);
    }
}

TEST_CASE("order-4 pieces sum to the direct ordered integral") {
    const ModelSpec m = two_field_modes(0.9, 0.6, 1.0);
    const auto terms = diagrams::enumerate_terms(4);
    REQUIRE(terms.size() == 8);
    const double ts[3] = {1.0, 5.0, 10.0};
    const cplx want[3] = {cplx(185.145715315214, -269.321864324919),
                          cplx(-19112.6543523905, 25969.8161069805),
                          cplx(-16643.0429063879, 15995.6528046008)};
    for (int i = 0; i < 3; ++i) {
        const cplx sum = total(diagrams::evaluate_all(terms, m, ts[i]));
        const cplx direct = diagrams::order_total(m, 4, ts[i]);
        CHECK(std::abs(sum - direct) < 1e-9 * std::abs(direct));
        CHECK(std::abs(sum - want[i]) < 1e-8 * std::abs(want[i]));
    }
    CHECK(std::abs(total(diagrams::evaluate_all(terms, m, 0.0))) < 1e-14);
}

TEST_CASE("split of the connected amplitude on a mode set is exact") {
    const ModelSpec m = two_field_modes(0.9, 0.6, 1.0);
    const auto sample = numerics::TimeGrid::linspace(0.0, 10.0, 11);

    const auto s2 = diagrams::split_ABC(diagrams::enumerate_terms(2), m, sample);
    CHECK(std::abs(s2.A - cplx(0.0, 6.9568069450549475)) < 1e-9);
    CHECK(std::abs(s2.B + 5.3272917290182376) < 1e-9);
    CHECK(std::abs(s2.B + s2.C(0.0)) < 1e-12);
    CHECK(!s2.c_terms.empty());
    const auto pc2 = perturb::vacuum_order2(m);
    CHECK(std::abs(s2.A - pc2.A) < 1e-12);
    CHECK(std::abs(s2.B - pc2.B) < 1e-12);

    const auto s4 = diagrams::split_ABC(diagrams::enumerate_terms(4), m, sample);
    CHECK(std::abs(s4.A - cplx(0.0, 2867.0971378930662)) < 1e-9 * 2867.0);
    CHECK(std::abs(s4.B + 6850.769564150927) < 1e-9 * 6850.0);
    CHECK(std::abs(s4.B + s4.C(0.0)) < 1e-8);
    for (const double t : {1.0, 5.0, 10.0}) {
        const cplx direct = diagrams::order_total(m, 4, t, 0.0, true);
        CHECK(std::abs(s4.at(t) - direct) < 1e-10 * (1.0 + std::abs(direct)));
    }
}

TEST_CASE("order-2 split stays exact on quadrature grids") {
    const MomentumGrid g = model::build_grid(1, 64, 6.0, GridRule::gauss_legendre);
    model::LinearCoupling lc{InteractionKernel::gaussian(g), Dispersion::relativistic(1.0)};
    const ModelSpec m = ModelSpec::make(lc, 0.1, g);
    const auto sample = numerics::TimeGrid::linspace(0.0, 20.0, 41);

    const auto s = diagrams::split_ABC(diagrams::enumerate_terms(2), m, sample);
    CHECK(!s.c_terms.empty());
    const auto co = perturb::vacuum_order2(m);
    CHECK(std::abs(s.A - co.A) < 1e-12);
    CHECK(std::abs(s.B - co.B) < 1e-12);
    for (const double t : {2.0, 10.0}) {
        const cplx direct = diagrams::order_total(m, 2, t);
        CHECK(std::abs(s.at(t) - direct) < 1e-11 * (1.0 + std::abs(direct)));
    }
}

TEST_CASE("order-4 split on a quadrature grid uses the damped tail route") {
    const MomentumGrid g = model::build_grid(1, 64, 6.0, GridRule::gauss_legendre);
    model::PureCreation pc{2, CreationPattern::creation, InteractionKernel::gaussian(g),
                           Dispersion::relativistic(1.0)};
    const ModelSpec m = ModelSpec::make(pc, 0.1, g);
    const auto sample = numerics::TimeGrid::of({0.0, 1.0, 2.0, 5.0});

    const auto s = diagrams::split_ABC(diagrams::enumerate_terms(4), m, sample);
    CHECK(s.c_terms.empty());
    CHECK(s.error_estimate > 0.0);
    CHECK(s.error_estimate < 1.0);
    CHECK(std::abs(s.B + s.C(0.0)) < 1e-6);
    // The damping-level spread is the route's own accuracy claim; the direct
    // ordered integral must sit inside it at the sampled times.
    for (const double t : {1.0, 2.0, 5.0}) {
        const cplx direct = diagrams::order_total(m, 4, t, 0.0, true);
        CHECK(std::abs(s.at(t) - direct) < s.error_estimate);
    }
}

TEST_CASE("exponentiated split tracks the exact amplitude at fourth order") {
    // Residual exp(l^2 S2 + l^4 S4) - <U(t)> should shrink like l^6; the
    // fitted order over a lambda octave pair stays well above 5.5.
    const ModelSpec base = two_field_modes(0.45, 0.3, 1.0);
    const auto sample = numerics::TimeGrid::linspace(0.0, 3.0, 4);
    const auto s2 = diagrams::split_ABC(diagrams::enumerate_terms(2), base, sample);
    const auto s4 = diagrams::split_ABC(diagrams::enumerate_terms(4), base, sample);
    const double t = 3.0;

    const double lams[3] = {0.02, 0.04, 0.08};
    double lx[3], ly[3];
    for (int i = 0; i < 3; ++i) {
        const double l = lams[i];
        const ModelSpec m = two_field_modes(0.45, 0.3, l);
        const auto spec = oracles::FockSpec::for_model(m, 24, 48);
        const cplx fock =
            oracles::fock_exact(spec, m, oracles::Element::vacuum(), t, l).value;
        const cplx pred = std::exp(l * l * s2.at(t) + l * l * l * l * s4.at(t));
        const double resid = std::abs(pred - fock);
        REQUIRE(resid > 0.0);
        CHECK(resid < 1e-4);
        lx[i] = std::log(l);
        ly[i] = std::log(resid);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < 3; ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double slope = (3.0 * sxy - sx * sy) / (3.0 * sxx - sx * sx);
    CHECK(slope > 5.5);
    CHECK(slope < 7.0);
}

TEST_CASE("term export carries the full piece description") {
    const auto terms = diagrams::enumerate_terms(3);
    const auto j = diagrams::term_json(terms[2], cplx(0.5, -0.25));
    for (const char* key :
         {"order", "composition", "sign", "denominator_chain", "value_re", "value_im"})
        CHECK(j.contains(key));
    CHECK(j["order"] == 3);
    CHECK(j["composition"].is_array());
    CHECK(j["value_re"] == 0.5);
    CHECK(j["value_im"] == -0.25);
}

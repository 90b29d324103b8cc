#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "evo/model.hpp"

using namespace evo;
using model::CreationPattern;
using model::Dispersion;
using model::GridRule;
using model::InteractionKernel;
using model::ModelSpec;
using model::MomentumGrid;

namespace {

ModelSpec two_mode_pair(double lambda = 0.1) {
    model::PureCreation pc{2, CreationPattern::creation,
                           InteractionKernel::table({0.3, 0.2}, 1, true),
                           Dispersion::tabulated({1.0, 1.5})};
    return ModelSpec::make(pc, lambda, model::explicit_grid({0.0, 1.0}));
}

}  // namespace

TEST_CASE("dispersion kinds evaluate and validate") {
    const Dispersion rel = Dispersion::relativistic(1.0);
    CHECK(rel(0.0) == doctest::Approx(1.0));
    CHECK(rel(1.0) == doctest::Approx(std::sqrt(2.0)));
    CHECK_FALSE(rel.sign_indefinite());

    const Dispersion shifted = Dispersion::nonrel_shifted(1.0);
    CHECK(shifted(2.0) == doctest::Approx(1.0));
    CHECK(shifted(0.0) == doctest::Approx(-1.0));
    CHECK(shifted.sign_indefinite());
    CHECK(shifted.radial_derivative(2.0) == doctest::Approx(2.0));

    const Dispersion quad = Dispersion::quadratic_shifted(0.5);
    CHECK(quad.sign_indefinite());

    CHECK_THROWS_AS(Dispersion::relativistic(0.0), config_error);
    CHECK_THROWS_AS(Dispersion::nonrel_shifted(-1.0), config_error);
    CHECK_THROWS_AS(Dispersion::tabulated({}), config_error);
}

TEST_CASE("tabulated dispersion reads node values only") {
    const MomentumGrid g = model::explicit_grid({0.0, 1.0, 2.0});
    const Dispersion tab = Dispersion::tabulated({0.9, 1.4, 2.3});
    CHECK(tab.at_node(1, g) == doctest::Approx(1.4));
    CHECK_THROWS_AS(tab(0.5), unsupported_error);
    const Dispersion shorter = Dispersion::tabulated({0.9});
    CHECK_THROWS_AS(shorter.at_node(2, g), config_error);
}

TEST_CASE("gauss-legendre grids integrate exactly") {
    const MomentumGrid tiny = model::build_grid(1, 2, 1.0, GridRule::gauss_legendre);
    REQUIRE(tiny.size() == 2);
    CHECK(tiny.node1(0) == doctest::Approx(-1.0 / std::sqrt(3.0)));
    CHECK(tiny.node1(1) == doctest::Approx(1.0 / std::sqrt(3.0)));
    CHECK(tiny.weights[0] == doctest::Approx(1.0));
    CHECK(tiny.weights[1] == doctest::Approx(1.0));

    const MomentumGrid g1 = model::build_grid(1, 64, 6.0, GridRule::gauss_legendre);
    std::vector<double> ones(g1.size(), 1.0);
    CHECK(g1.integrate(ones) == doctest::Approx(12.0).epsilon(1e-12));
    std::vector<double> gauss(g1.size());
    for (std::size_t i = 0; i < g1.size(); ++i) {
        const double k = g1.node1(i);
        gauss[i] = std::exp(-k * k);
    }
    CHECK(g1.integrate(gauss) == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-10));

    const MomentumGrid g2 = model::build_grid(2, 32, 6.0, GridRule::gauss_legendre);
    std::vector<double> ones2(g2.size(), 1.0);
    CHECK(g2.integrate(ones2) == doctest::Approx(144.0).epsilon(1e-12));
    std::vector<double> gauss2(g2.size());
    for (std::size_t i = 0; i < g2.size(); ++i) {
        const double* k = g2.node(i);
        gauss2[i] = std::exp(-(k[0] * k[0] + k[1] * k[1]));
    }
    CHECK(g2.integrate(gauss2) == doctest::Approx(M_PI).epsilon(1e-8));
}

TEST_CASE("grid construction validates its inputs") {
    CHECK_THROWS_AS(model::build_grid(0, 8, 1.0, GridRule::gauss_legendre), config_error);
    CHECK_THROWS_AS(model::build_grid(1, 1, 1.0, GridRule::gauss_legendre), config_error);
    CHECK_THROWS_AS(model::build_grid(1, 8, 0.0, GridRule::gauss_legendre), config_error);
    CHECK_THROWS_AS(model::explicit_grid({}), config_error);
    CHECK_THROWS_AS(model::explicit_grid({0.0, 1.0}, {1.0}), config_error);
    CHECK_THROWS_AS(model::explicit_grid({0.0, 1.0}, {}, 3), config_error);
    CHECK(model::default_n_axis(1) == 64);
    CHECK(model::default_n_axis(2) == 24);
    CHECK(model::default_n_axis(3) == 12);
}

TEST_CASE("ring grids combine momenta modulo the node count") {
    const MomentumGrid ring = model::explicit_grid({0.0, 1.0, 2.0}, {}, 3);
    CHECK(model::momentum_minus(ring, 0, 2) == 1);
    CHECK(model::momentum_minus(ring, 1, 2) == 2);
    const MomentumGrid flat = model::explicit_grid({0.0, 1.0, 2.0});
    CHECK(model::momentum_minus(flat, 2, 1) == 1);
    CHECK_THROWS_AS(model::momentum_minus(flat, 0, 1), config_error);
}

TEST_CASE("vertex energies follow the variant") {
    const ModelSpec pair = two_mode_pair();
    CHECK(model::energy_total(pair, {0, 1}) == doctest::Approx(2.5));
    CHECK(model::min_vertex_energy(pair) == doctest::Approx(2.0));

    model::CubicTI cu{InteractionKernel::table({0.1, 0.2, 0.25, 0.25}, 2, true),
                      Dispersion::tabulated({1.0, 1.4})};
    const ModelSpec mc =
        ModelSpec::make(cu, 0.1, model::explicit_grid({0.0, 1.0}, {}, 2));
    // omega(p-q) + omega(q) - omega(p) at (p, q) = (0, 1): 1.4 + 1.4 - 1.0.
    CHECK(model::energy_total(mc, {0, 1}) == doctest::Approx(1.8));
}

TEST_CASE("no-decay validation rejects vanishing vertex energies") {
    model::PureCreation pc{2, CreationPattern::creation,
                           InteractionKernel::table({0.3}, 1, true),
                           Dispersion::tabulated({0.0})};
    CHECK_THROWS_AS(ModelSpec::make(pc, 0.1, model::explicit_grid({0.0})), config_error);
    // Sign-indefinite dispersions flag the model as decaying instead.
    model::LinearCoupling lc{InteractionKernel::gaussian(model::build_grid(
                                 1, 16, 6.0, GridRule::gauss_legendre)),
                             Dispersion::nonrel_shifted(1.0)};
    const ModelSpec m = ModelSpec::make(
        lc, 0.1, model::build_grid(1, 16, 6.0, GridRule::gauss_legendre));
    CHECK(m.decaying);
}

TEST_CASE("cubic kernels must be symmetric under q <-> p-q") {
    model::CubicTI cu{InteractionKernel::table({0.1, 0.2, 0.25, 0.3}, 2, true),
                      Dispersion::tabulated({1.0, 1.4})};
    CHECK_THROWS_AS(ModelSpec::make(cu, 0.1, model::explicit_grid({0.0, 1.0}, {}, 2)),
                    config_error);
}

TEST_CASE("model json round-trips bit-exactly") {
    const std::string text = R"({
      "model": {"variant": "linear_coupling", "lambda": 0.1,
                "coupling": {"kind": "table", "values": [0.4, 0.3, 0.5]}},
      "dispersion": {"kind": "tabulated", "params": {"values": [0.9, 1.4, 2.3]}},
      "grid": {"rule": "explicit", "nodes": [0.0, 1.0, 2.0]}
    })";
    const ModelSpec m = model::model_from_json(text);
    CHECK(m.linear_coupling() != nullptr);
    CHECK(m.lambda == 0.1);
    const std::string once = model::model_to_json(m);
    const std::string twice = model::model_to_json(model::model_from_json(once));
    CHECK(once == twice);
}

TEST_CASE("unknown config keys are rejected") {
    const std::string bad_model = R"({
      "model": {"variant": "linear_coupling", "lambda": 0.1, "extra": 1,
                "coupling": {"kind": "table", "values": [0.4]}},
      "dispersion": {"kind": "tabulated", "params": {"values": [1.0]}},
      "grid": {"rule": "explicit", "nodes": [0.0]}
    })";
    CHECK_THROWS_AS(model::model_from_json(bad_model), config_error);
    const std::string bad_grid = R"({
      "model": {"variant": "linear_coupling", "lambda": 0.1,
                "coupling": {"kind": "table", "values": [0.4]}},
      "dispersion": {"kind": "tabulated", "params": {"values": [1.0]}},
      "grid": {"rule": "explicit", "nodes": [0.0], "spacing": 2}
    })";
    CHECK_THROWS_AS(model::model_from_json(bad_grid), config_error);
}

TEST_CASE("analytic coupling kernels sample the grid") {
    const MomentumGrid g = model::build_grid(1, 8, 2.0, GridRule::gauss_legendre);
    const InteractionKernel gauss = InteractionKernel::gaussian(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double k = g.node1(i);
        CHECK(gauss.at(i).real() == doctest::Approx(std::exp(-k * k / 2)));
    }
    const Dispersion rel = Dispersion::relativistic(1.0);
    const InteractionKernel og = InteractionKernel::omega_gaussian(g, rel);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double k = g.node1(i);
        CHECK(og.at(i).real() == doctest::Approx(rel(std::abs(k)) * std::exp(-k * k / 2)));
    }
}

TEST_CASE("lee models parse from json") {
    const std::string text = R"({
      "model": {"variant": "lee", "lambda": 0.1,
                "vtable": [0.3, 0.2, 0.25, 0.15, 0.35, 0.1, 0.22, 0.18, 0.28]},
      "dispersion": {"kind": "tabulated",
                     "params": {"omega_a": [1.0, 1.1, 1.2],
                                "omega_b": [0.9, 1.0, 1.3],
                                "omega_c": [0.8, 0.9, 1.0]}},
      "grid": {"rule": "explicit", "nodes": [0.0, 1.0, 2.0], "ring": 3}
    })";
    const ModelSpec m = model::model_from_json(text);
    REQUIRE(m.lee() != nullptr);
    CHECK(model::energy_total(m, {0, 1}) == doctest::Approx(1.1 + 1.3 - 0.8));
    const std::string once = model::model_to_json(m);
    CHECK(model::model_to_json(model::model_from_json(once)) == once);
}

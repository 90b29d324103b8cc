#pragma once
// Independent reference values for evolution-operator matrix elements: a
// closed form for the linear-coupling model, truncated-Fock exact evolution,
// and Dyson partial sums evaluated by time quadrature over operator paths.
// None of these share arithmetic with the perturbative prediction modules;
// they exist to audit them.
#include <cstddef>
#include <vector>

#include "evo/common.hpp"
#include "evo/model.hpp"
#include "evo/numerics.hpp"

namespace evo::oracles {

using model::ModelSpec;

// Which matrix element of U(t) = e^{itH0} e^{-itH} is requested.
struct Element {
    enum class Kind { vacuum, one_particle };
    Kind kind = Kind::vacuum;
    std::size_t p = 0;          // grid node of the incoming quantum

    static Element vacuum() { return {}; }
    static Element one_particle(std::size_t p) { return {Kind::one_particle, p}; }
};

// Truncated occupation basis: the retained grid modes plus a per-mode cap and
// a total-quanta cap. Mode data (momentum, dispersion value, couplings) is
// read off the model at the listed nodes; an empty list means every node.
struct FockSpec {
    std::vector<std::size_t> modes;
    int n_max = 10;             // per-mode occupation cutoff, >= 2
    int N_max = 12;             // total-quanta cutoff, >= 2

    static FockSpec for_model(const ModelSpec& m, int n_max, int N_max);
};

enum class Route { closed_form, dyson2, dyson4, fock_exact };

struct OracleResult {
    cplx value{};
    Route route = Route::closed_form;
    double error_estimate = 0.0;    // route-specific; always >= 0
};

// Basis dimension the dense route would use (after the total cap and, for
// momentum-conserving variants on ring grids, the sector filter).
std::size_t fock_dimension(const FockSpec& spec, const ModelSpec& m, Element el);

// Vacuum amplitude of the linear-coupling model from the displaced-oscillator
// solution, as discrete grid sums:
//   exp( i lam^2 S1 t - lam^2 S2 + lam^2 sum_k w |v|^2 e^{-i w t} / w^2 ),
//   S1 = sum w |v|^2 / w, S2 = sum w |v|^2 / w^2.
// Nodes with omega <= 0 violate the solution's assumptions and are an error.
OracleResult solvable_closed_form(const ModelSpec& m, double t, double lambda);

// Second-order Dyson partial sum 1 + (-i lam)^2 sum over two-step operator
// paths, each path's time integral evaluated by panel quadrature. The error
// estimate is the quadrature refinement delta.
OracleResult dyson_order2(const ModelSpec& m, Element el, double t, double lambda);

// The fourth-order Dyson contribution alone (order lam^4; 0 at t = 0),
// connected and disconnected parts included automatically by the operator
// path sum.
OracleResult dyson_order4(const ModelSpec& m, Element el, double t, double lambda);

// Zero-oscillation t-power coefficients of the order-4 contribution,
// extracted exactly from the closed-form term engine applied per path:
//   contribution = c2 t^2 + c1 t + c0 + (oscillatory terms).
struct SecularCoefficients {
    cplx c2{}, c1{}, c0{};
};
SecularCoefficients dyson_order4_secular(const ModelSpec& m, Element el, double lambda);

// The order-4 contribution as a merged closed-form term list
// sum coeff t^tpow e^{i phase t} (lam^4 included), for comparisons that need
// more accuracy than quadrature provides.
std::vector<numerics::osc::Term> dyson_order4_terms(const ModelSpec& m, Element el,
                                                    double lambda);

// <el| U(t) |el> on the truncated basis: e^{itH0} is a diagonal phase and
// e^{-itH} is computed by dense eigendecomposition (real-symmetric couplings,
// larger dimensions) or scaling-and-squaring (small or complex cases). Models
// whose interaction does not mix modes factorize into per-mode blocks and are
// evaluated mode by mode, so grids with many modes stay exact. The error
// estimate is the change under reducing both cutoffs by one.
OracleResult fock_exact(const FockSpec& spec, const ModelSpec& m, Element el, double t,
                        double lambda);

}  // namespace evo::oracles

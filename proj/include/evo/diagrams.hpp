#pragma once
// Composition-indexed pieces of the ordered Dyson integrals for vacuum
// amplitudes. At order n the n-fold ordered time integral splits into 2^{n-1}
// pieces, one per composition of n: every inner integral contributes either
// its upper-limit series or its lower-limit constant, and a run of upper
// choices closed by a lower choice forms a block. The sum of all pieces is an
// exact identity with the full amplitude; the pieces expose the linear,
// constant and oscillatory structure directly.
//
// Contraction patterns are hard-coded per model variant (pair creation and the
// normal-ordered cubic field power); there is no general Wick generator here.

#include <functional>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "evo/common.hpp"
#include "evo/model.hpp"
#include "evo/numerics.hpp"

namespace evo::diagrams {

using model::GridRule;
using model::ModelSpec;

// ----------------------------------------------------------------- terms

// One composition piece. Blocks are listed from the slot-1 (latest time) side;
// sign is (-1)^l with l = composition.size() - 1 lower-limit cuts. Oscillatory
// pieces carry e^{i t P1} with P1 the first block's phase total. The
// denominator chain lists, per block left to right and longest sum first, the
// 1-based slot index sets whose phase partial sums appear as denominators; the
// uncut piece omits its (identically vanishing) full-sum factor.
struct BracketTerm {
    int order = 0;
    std::vector<int> composition;
    int sign = 1;
    bool oscillatory = false;
    std::vector<std::vector<int>> denominator_chain;

    // Lower-limit choices for the inner integrals, innermost first.
    std::vector<bool> cuts() const;
};

// All 2^{order-1} pieces, grouped by cut count and then by composition,
// first part descending. Supported orders: 2..4.
std::vector<BracketTerm> enumerate_terms(int order);

// ----------------------------------------------------------------- patterns

// A Wick pairing class: lines between vertex slots (1-based, i < j, repeats
// for multiple lines on one pair) with the pairing multiplicity as weight.
// Pair-creation classes correlate all lines through one mode sum; field
// classes sum modes per line independently.
struct PairingClass {
    std::vector<std::pair<int, int>> lines;
    double pairing_count = 1.0;
    bool connected = true;
};

// Hard-coded class tables. Supported: PureCreation (creation pattern n = 2 at
// order 4, any n at order 2; field pattern n = 3) and LinearCoupling. Odd
// orders yield an empty table for these patterns.
std::vector<PairingClass> pairing_classes(const ModelSpec& m, int order);

// ----------------------------------------------------------------- evaluation

// Value of one composition piece at time t: grid sums over the model's
// contraction channels, each channel run through the upper/lower recursion on
// its slot phase vector. eps > 0 shifts every denominator off the real axis
// (required when the model is decaying). The uncut piece asserts that every
// intermediate energy of a connected channel is strictly positive before
// dividing by it.
cplx evaluate_term(const BracketTerm& term, const ModelSpec& m, double t,
                   double eps = 0.0);

// Direct sum over channels of the full ordered integral at order `order`;
// equals the sum of evaluate_term over enumerate_terms(order). With
// connected_only the disconnected classes are skipped.
cplx order_total(const ModelSpec& m, int order, double t, double eps = 0.0,
                 bool connected_only = false);

// Parallel map of evaluate_term over `terms` with a deterministic, index-
// ordered result vector.
std::vector<cplx> evaluate_all(const std::vector<BracketTerm>& terms,
                               const ModelSpec& m, double t, double eps = 0.0);

// ----------------------------------------------------------------- split

struct OscTerm {
    cplx coeff;
    int tpow = 0;
    double phase = 0.0;
};

// Connected order-n amplitude as A t + B + C(t).
struct SplitABC {
    cplx A{};
    cplx B{};
    std::vector<OscTerm> c_terms;     // exact route only; empty for the tail route
    std::function<cplx(double)> C;
    double error_estimate = 0.0;      // tail route: spread between damping levels

    cplx at(double t) const { return A * t + B + C(t); }
};

// Splits the connected part of the order fixed by `terms`. Explicit mode sets
// get the exact oscillatory-term split (A t + B + C(t) reproduces the summed
// connected values identically); quadrature grids get the time-domain tail
// route, whose C(t) decays for continuum-like spectra. `sample` bounds the
// time range the returned C must cover.
SplitABC split_ABC(const std::vector<BracketTerm>& terms, const ModelSpec& m,
                   const numerics::TimeGrid& sample);

// ----------------------------------------------------------------- export

// Row {order, composition, sign, denominator_chain, value_re, value_im}.
nlohmann::json term_json(const BracketTerm& term, cplx value);

}  // namespace evo::diagrams

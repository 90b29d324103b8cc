#pragma once
// Shared numerical machinery: time grids, epsilon schedules, momentum-grid
// integration, ordered (simplex) time integrals, the i*eps -> 0 limit, and
// stationary-phase coefficients. Two independent routes to ordered integrals
// live here: a panel-quadrature evaluator and an exact term engine; they share
// no arithmetic so one can audit the other.
#include <functional>
#include <vector>

#include "evo/common.hpp"
#include "evo/model.hpp"

namespace evo::numerics {

using model::Dispersion;
using model::InteractionKernel;
using model::MomentumGrid;

// ------------------------------------------------------------------- grids

// Strictly increasing, nonnegative sample times.
struct TimeGrid {
    std::vector<double> t;

    static TimeGrid of(std::vector<double> times);
    static TimeGrid linspace(double t0, double t1, std::size_t n);
    std::size_t size() const { return t.size(); }
};

// Geometric ladder eps_k = eps1 * ratio^k, k = 0..count-1.
struct EpsilonSchedule {
    double eps1 = 0.1;
    double ratio = 0.5;
    int count = 8;

    double at(int k) const;
};

// Weighted sum of samples over the grid in fixed node order (pairwise
// reduction); a non-finite sample raises a numeric error naming the node.
cplx integrate(const MomentumGrid& g, const std::vector<cplx>& samples);
double integrate(const MomentumGrid& g, const std::vector<double>& samples);

// ------------------------------------------------- ordered time integrals

// I = int_0^t dt1 e^{i E1 t1} int_0^{t1} dt2 e^{i E2 t2} ...
//     int_0^{t_{m-1}} dt_m e^{i E_m t_m} t_m^{inner_tpow}.
// Iterated one-dimensional Gauss-Legendre panels sized to keep at least eight
// nodes per oscillation period of max|E_k|; relative accuracy ~1e-9. Orders
// m > 4 are rejected.
cplx ordered_time_integral(const std::vector<double>& phases, int inner_tpow, double t,
                           int panel_scale = 1);

// The m = 2 case with phases (-E, +E) in closed form:
//   -i t / E + 1 / E^2 - e^{-i t E} / E^2.
cplx closed_form_double(double E, double t);

// --------------------------------------------------------- i*eps -> 0 limit

struct IepsResult {
    cplx value{};
    double error_estimate = 0.0;    // magnitude of the last extrapolation increment
    bool diverging = false;         // increments stopped shrinking along the ladder
};

// Evaluates g on the schedule and Richardson-extrapolates (ratio-1/2 ladder,
// four elimination levels) to eps = 0.
IepsResult ieps_limit(const std::function<cplx(double)>& g,
                      const EpsilonSchedule& sched = {});

// ------------------------------------------------------- stationary phase

// Leading large-time coefficient data for int |v|^2 / omega^2 e^{-i omega t}:
// the integral behaves like amplitude * t^{-exponent} * e^{-i omega(k0) t}.
struct StationaryPhase {
    double k0 = 0.0;
    cplx amplitude{};
    double exponent = 0.0;          // d / 2
};

// Locates the radial critical point of omega (grid argmin of |omega'|, Newton
// refinement for analytic kinds) and returns
//   amplitude = (2 i pi)^{d/2} |v(k0)|^2 / omega(k0)^2.
// Raises a numeric error when no critical point lies on the grid or the
// critical point is degenerate (omega'' ~ 0).
StationaryPhase stationary_phase_coeff(const Dispersion& omega, const InteractionKernel& v,
                                       const MomentumGrid& g);

// ------------------------------------------------------ exact term engine

// Exact evaluation of the same ordered integrals as finite sums of
// coeff * t^tpow * e^{i phase t} terms. Used by the perturbative modules;
// deliberately shares nothing with the quadrature route above.
namespace osc {

struct Term {
    cplx coeff{};
    int tpow = 0;
    double phase = 0.0;
};

// int_0^s (sum_k c_k u^{j_k} e^{i P_k u}) du, then multiplied by
// e^{i next_phase s}; like-terms merged on (tpow, phase) buckets.
std::vector<Term> integrate_level(const std::vector<Term>& terms, double next_phase);

// Full ordered integral as a closed term list (phases outermost first).
std::vector<Term> ordered_terms(const std::vector<double>& phases, int inner_tpow);

cplx eval_terms(const std::vector<Term>& terms, double t);

}  // namespace osc

}  // namespace evo::numerics

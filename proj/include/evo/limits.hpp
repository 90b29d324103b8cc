#pragma once
// Weak-coupling rescaled-time sweeps (t = tau / lambda^2 with tau fixed),
// log-log exponent fits with confidence half-widths, and recovery of exponent
// data A t + B + C(t) from complex amplitude traces.
#include <string>
#include <vector>

#include "evo/common.hpp"
#include "evo/model.hpp"
#include "evo/numerics.hpp"
#include "evo/oracles.hpp"

namespace evo::limits {

using model::ModelSpec;

// ---------------------------------------------------------- exponent fits

struct FitResult {
    double slope = 0.0;
    double half_width = 0.0;        // 95% confidence from residual variance
    double intercept = 0.0;         // in log-log coordinates
};

// Least squares of log y against log x. Needs >= 4 points and y > 0
// throughout (std::domain_error otherwise).
FitResult fit_exponent(const std::vector<double>& xs, const std::vector<double>& ys);

// --------------------------------------------------------- phase unwrap

struct UnwrapResult {
    cplx A{};                       // exponent rate
    cplx B{};                       // exponent intercept
    std::vector<cplx> c_trace;      // per-sample remainder log v - (A t + B)
    double residual = 0.0;          // rms of the fitted-basis residual
};

// Interprets values as exp(A t + B + C(t)): takes log magnitude plus the
// continuity-unwrapped phase along the grid and removes the linear trend.
// Known oscillation frequencies f extend the fit basis with e^{i f t} columns
// so a bounded C(t) does not bias A and B. Requires |values| > 1e-12; a raw
// phase step of size >= pi aborts with an aliasing error (refine the grid).
UnwrapResult unwrap_exponent(const numerics::TimeGrid& grid, const std::vector<cplx>& values,
                             const std::vector<double>& osc_freqs = {});

// ------------------------------------------------------- rescaled sweeps

struct SweepRow {
    double lambda = 0.0;
    double tau = 0.0;
    double t = 0.0;                 // tau / lambda^2
    cplx predicted{};               // corrected closed prediction
    cplx oracle{};
    double resid_uncorrected = 0.0; // |oracle - leading-exponent form|
    double resid_corrected = 0.0;   // |oracle - predicted|
};

struct SweepResult {
    std::vector<SweepRow> rows;     // lambda descending
    FitResult order;                // fitted lambda-order of resid_uncorrected
    double gain = 0.0;              // resid_uncorrected / resid_corrected, smallest lambda
};

struct SweepOptions {
    oracles::Route route = oracles::Route::fock_exact;
    oracles::FockSpec fock{};       // truncation for the fock route
    bool include_order4 = true;     // fold the lam^4 A4 t term into the prediction
};

// For each lambda evaluates the oracle at t = tau / lambda^2 and compares
// against the leading exponent exp(lam^2 A2 t) and against the corrected
// prediction exp(lam^2 (A2 t + B2 + C2(t)) [+ lam^4 A4 t]). The uncorrected
// residual must shrink like lambda^2; the corrected one faster.
SweepResult stochastic_sweep(const ModelSpec& m, oracles::Element el, double tau,
                             std::vector<double> lambdas, const SweepOptions& opt = {});

// CSV with header lambda,tau,t,pred_re,pred_im,oracle_re,oracle_im,
// resid_uncorrected,resid_corrected; 17 significant digits.
std::string sweep_csv(const SweepResult& s);

}  // namespace evo::limits

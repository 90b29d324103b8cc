#pragma once
// Perturbative coefficients of the interaction-picture evolution operator:
// order-2 and order-4 vacuum and one-particle data, resolvent (Gamma) algebra
// on grid kernels, decay-route coefficients with dual limits, and the closed
// predictions assembled from them.
#include <functional>
#include <vector>

#include "evo/model.hpp"
#include "evo/numerics.hpp"

namespace evo::perturb {

using model::ModelSpec;
using numerics::EpsilonSchedule;

// ------------------------------------------------------------ grid kernels

// Kernel samples with the vertex energy attached to every tuple.
struct GridKernel {
    int arity = 1;
    std::vector<cplx> values;
    std::vector<double> energies;
};

// Pointwise division by (E - i eps)^power. eps = 0 requires every |E| to be
// bounded away from zero; a near-singular tuple raises an error naming it.
GridKernel gamma_apply(const GridKernel& k, int power, double eps);

// ----------------------------------------------------- order-2 coefficients

enum class Flavor { vacuum, one_particle };

// Vacuum flavor: the trace behaves like exp(lambda^2 (A t + B + C(t))), with
// A purely imaginary and B real <= 0. One-particle flavor stores the real
// energy-shift coefficient A, and the amplitude behaves like
// exp(lambda^2 (i A t + B + C(t))). In both cases B + C(0) = 0.
struct PredictionCoefficients {
    Flavor flavor = Flavor::vacuum;
    std::size_t p = 0;               // one-particle momentum node
    int order = 2;
    cplx A{};
    cplx B{};
    std::function<cplx(double)> C;
    double lambda = 0.0;
};

// Order-2 vacuum coefficients for pure-creation models (either creation or
// field pattern) and for linear coupling:
//   A2 = i sum rho/E,  B2 = -sum rho/E^2,  C2(t) = sum (rho/E^2) e^{-i E t},
// rho carrying grid weights. Decaying pure-creation models must go through
// decay_order2 instead.
PredictionCoefficients vacuum_order2(const ModelSpec& m);

// Closed vacuum prediction exp(lambda^2 (A t + B + C(t))).
cplx vacuum_prediction(const PredictionCoefficients& c, double t);

// One-particle order-2 coefficients at momentum node p (cubic or Lee):
//   A2(p) = sum_q rho_q / E2(q),  B2(p) = -sum rho/E2^2,
//   C2(t) = sum (rho/E2^2) e^{-i E2 t},
// with E2(q) the two-particle vertex energy. Decaying models need eps > 0;
// drive eps through ieps_limit for the physical limit.
PredictionCoefficients oneparticle_order2(const ModelSpec& m, std::size_t p, double eps = 0.0);

// Closed one-particle prediction exp(lambda^2 (i A t + B + C(t))), optionally
// carrying the order-4 linear correction (1 + i lambda^4 t A4).
cplx u11_prediction(const PredictionCoefficients& c, double t, const cplx* A4_total = nullptr);

// ----------------------------------------------------- order-4 one-particle

// Order-4 pieces at momentum node p for the cubic model. The one-particle-
// reducible family is closed in the order-2 sums; the irreducible linear
// coefficient comes from the two four-vertex topologies. U4 evaluates the
// full order-4 amplitude as an exact oscillatory-term sum.
struct OneParticleOrder4 {
    cplx A4_1pi{};
    cplx A4_1pr{};
    cplx B4_1pr{};
    std::function<cplx(double)> C4_1pr;
    std::function<cplx(double)> U4;
};

OneParticleOrder4 oneparticle_order4(const ModelSpec& m, std::size_t p);

// ----------------------------------------------------------- decay route

// Memory-kernel data for decaying pure-creation models (nonrel-shifted
// dispersion, Gaussian generator), reduced to the combined dn-dimensional
// radial integral:
//   F(sigma) = Surf_dn int R^{dn-1} e^{-R^2} e^{-i sigma (R^2/2 - n w0)} dR,
//   A2(t) = -int_0^t F,  B2(t) = int_0^t sigma F.
// Limits carry a tail correction built from the stationary-phase envelope;
// the resolvent route recomputes them through (E - i eps) sums extrapolated
// to eps = 0 (A2 for dn >= 3, B2 for dn >= 5).
struct DecayCoefficients {
    int dn = 0;
    double osc_rate = 0.0;               // n * omega0
    std::function<cplx(double)> F;
    std::function<cplx(double)> A2_at;
    std::function<cplx(double)> B2_at;
    cplx A2_time{}, B2_time{};
    double A2_time_err = 0.0, B2_time_err = 0.0;
    cplx A2_eps{}, B2_eps{};
    double A2_eps_err = 0.0, B2_eps_err = 0.0;
    bool has_limits = false;             // dn >= 3
    bool has_eps_B2 = false;             // dn >= 5

    cplx A2() const;                     // throws when dn < 3
    cplx B2() const;
};

DecayCoefficients decay_order2(const ModelSpec& m);

// ------------------------------------------------------------- mass kernels

// Effective-mass kernels at momentum node p for the cubic model. M2 = -A2(p)
// identically; M4 is assembled from sector matrices (resolvent chain with the
// one-particle component subtracted inside), an arithmetic path sharing
// nothing with the order-4 topology sums: M4 + A4_1pi + A4_1pr = 0.
struct MassKernels {
    cplx M2{};
    cplx M4{};
};

MassKernels m_kernels(const ModelSpec& m, std::size_t p);

}  // namespace evo::perturb

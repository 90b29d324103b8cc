#pragma once
// Hamiltonian menu: dispersion laws, interaction kernels, the four model
// variants, and the momentum-grid discretization every other module sums over.
// All types are immutable after construction.
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "evo/common.hpp"

namespace evo::model {

// ---------------------------------------------------------------- dispersion

enum class DispersionKind { relativistic, nonrel_shifted, quadratic_shifted, tabulated };

// One-particle energy as a function of |k|. Analytic kinds evaluate anywhere;
// `tabulated` carries values at exactly the grid nodes (no interpolation).
struct Dispersion {
    DispersionKind kind = DispersionKind::relativistic;
    double param = 1.0;              // mass for relativistic, omega0 for shifted kinds
    std::vector<double> table;       // node values for tabulated

    static Dispersion relativistic(double mass);
    static Dispersion nonrel_shifted(double omega0);
    static Dispersion quadratic_shifted(double omega0);
    static Dispersion tabulated(std::vector<double> values);

    bool analytic() const { return kind != DispersionKind::tabulated; }
    // omega(|k|) for analytic kinds.
    double operator()(double kabs) const;
    // d omega / d|k| for analytic kinds.
    double radial_derivative(double kabs) const;
    double second_radial_derivative(double kabs) const;
    // Value at grid node i (tabulated reads the table, analytic evaluates).
    double at_node(std::size_t i, const struct MomentumGrid& g) const;
    // True when omega can change sign over momentum space.
    bool sign_indefinite() const {
        return kind == DispersionKind::nonrel_shifted || kind == DispersionKind::quadratic_shifted;
    }
};

// ------------------------------------------------------------ momentum grid

enum class GridRule { gauss_legendre, uniform_trapezoid, explicit_list };

// Tensor-product quadrature of [-cutoff, cutoff]^d, or an explicit node list
// (d=1) for models living on a finite mode set. Node order is fixed at build
// time; every sum in the toolkit walks it in that order.
struct MomentumGrid {
    int d = 1;
    int n_axis = 0;
    double cutoff = 0.0;
    GridRule rule = GridRule::gauss_legendre;
    std::vector<double> axis_nodes;      // per-axis nodes (size n_axis) unless explicit
    std::vector<double> axis_weights;
    std::vector<double> nodes;           // flattened node coordinates, size() = size()*d
    std::vector<double> weights;         // product weights, one per node
    int ring_modulus = 0;                // >0: node index arithmetic is mod this value

    std::size_t size() const { return weights.size(); }
    double node1(std::size_t i) const { return nodes[i * d]; }
    const double* node(std::size_t i) const { return nodes.data() + i * d; }
    double abs_node(std::size_t i) const;

    // Weighted sum over nodes in fixed order with pairwise reduction.
    cplx integrate(const std::vector<cplx>& samples) const;
    double integrate(const std::vector<double>& samples) const;
};

MomentumGrid build_grid(int d, int n_axis, double cutoff, GridRule rule);
// Explicit d=1 node list; empty weights mean unit weights. ring > 0 marks
// modular index arithmetic for momentum combination on mode sets.
MomentumGrid explicit_grid(std::vector<double> nodes, std::vector<double> weights = {},
                           int ring = 0);
// Default axis count per dimension (resolves the Gaussian kernels to ~1e-14).
int default_n_axis(int d);

// -------------------------------------------------------- interaction kernel

// Complex samples of an interaction kernel on a tensor power of the grid.
struct InteractionKernel {
    int arity = 1;
    std::vector<cplx> values;   // size grid.size()^arity, row-major in node index
    bool symmetric = true;

    static InteractionKernel gaussian(const MomentumGrid& g);          // f(k)=e^{-|k|^2/2}
    static InteractionKernel omega_gaussian(const MomentumGrid& g, const Dispersion& w);
    static InteractionKernel table(std::vector<cplx> values, int arity, bool symmetric);
    cplx at(std::size_t i) const { return values[i]; }
    cplx at(std::size_t i, std::size_t j, std::size_t n) const { return values[i * n + j]; }
};

// ------------------------------------------------------------- model variants

// H0 + lambda * sum_k kernel(k)/sqrt(n!) a*(k)^n + h.c. -- each elementary
// vertex puts n quanta into a single mode. pattern `field` instead couples the
// normal-ordered n-fold product of (a*+a) field factors with a separable
// kernel (used by the cubic vacuum-polarization model, n=3).
enum class CreationPattern { creation, field };

struct PureCreation {
    int n = 2;
    CreationPattern pattern = CreationPattern::creation;
    InteractionKernel v;        // arity 1: per-mode amplitude (or field factor g)
    Dispersion omega;
};

// H0 + lambda * sum_k v(k)(a*(k) + a(k)).
struct LinearCoupling {
    InteractionKernel v;        // arity 1
    Dispersion omega;
};

// H0 + lambda * sum_{p,q} v(p,q) a*(q) a*(p-q) a(p) + h.c., with v symmetric
// under q <-> p-q. Lives on mode sets closed under the (p; q, p-q) triples.
struct CubicTI {
    InteractionKernel v;        // arity 2, v[p][q]
    Dispersion omega;
};

// Three species: H0 + lambda * sum v(p,q) a*(q) b*(p-q) c(p) + h.c.
struct LeeModel {
    InteractionKernel v;        // arity 2
    Dispersion omega_a, omega_b, omega_c;
};

struct ModelSpec {
    std::variant<PureCreation, LinearCoupling, CubicTI, LeeModel> variant;
    double lambda = 0.0;
    MomentumGrid grid;
    bool decaying = false;

    // Checks the variant's no-decay condition (or flags `decaying`) and basic
    // shape consistency; every constructor path funnels through here.
    static ModelSpec make(std::variant<PureCreation, LinearCoupling, CubicTI, LeeModel> v,
                          double lambda, MomentumGrid grid);

    const PureCreation* pure_creation() const { return std::get_if<PureCreation>(&variant); }
    const LinearCoupling* linear_coupling() const { return std::get_if<LinearCoupling>(&variant); }
    const CubicTI* cubic_ti() const { return std::get_if<CubicTI>(&variant); }
    const LeeModel* lee() const { return std::get_if<LeeModel>(&variant); }
    std::string variant_name() const;
};

// Modular combination p-q for ring grids, exact node match otherwise.
std::size_t momentum_minus(const MomentumGrid& g, std::size_t p, std::size_t q);

// Energy denominator attached to one elementary vertex:
//   PureCreation: sum of omega over the n-tuple of nodes;
//   LinearCoupling: omega(k);
//   CubicTI: omega(p-q) + omega(q) - omega(p) for the tuple (p, q);
//   LeeModel: omega_a(q) + omega_b(p-q) - omega_c(p) for the tuple (p, q).
double energy_total(const ModelSpec& m, const std::vector<std::size_t>& momenta);

// Minimum of energy_total over all vertex tuples (the no-decay margin).
double min_vertex_energy(const ModelSpec& m);

// ------------------------------------------------------------ configuration

// Parses the model/dispersion/grid sections of an experiment config. Unknown
// keys inside these sections are an error. `json_text` is the raw file text.
ModelSpec model_from_json(const std::string& json_text);
std::string model_to_json(const ModelSpec& m);

}  // namespace evo::model

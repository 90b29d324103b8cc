#include "evo/oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <utility>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace evo::oracles {

using model::CreationPattern;
using model::MomentumGrid;

namespace {

// ------------------------------------------------------------ mode data

std::vector<std::size_t> resolve_modes(const FockSpec& spec, const ModelSpec& m) {
    if (spec.modes.empty()) {
        std::vector<std::size_t> all(m.grid.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return all;
    }
    for (std::size_t i : spec.modes)
        if (i >= m.grid.size()) throw config_error("fock mode index outside the grid");
    return spec.modes;
}

void check_caps(const FockSpec& spec) {
    if (spec.n_max < 2 || spec.N_max < 2)
        throw config_error("fock cutoffs must be at least 2");
}

// Per-mode coupling amplitude for single-mode vertices: the kernel value
// carries the quadrature weight as sqrt(w) so that |amplitude|^2 sums
// reproduce the discrete w |v|^2 sums of the prediction modules.
cplx mode_amplitude(const ModelSpec& m, std::size_t node, const model::InteractionKernel& v) {
    return v.at(node) * std::sqrt(m.grid.weights[node]);
}

// ------------------------------------------------------- occupation basis

// Registers are grid modes, except for the three-species model where the
// register list is [a-species modes, b-species modes, c-species modes].
struct Basis {
    std::vector<std::vector<int>> states;
    std::map<std::vector<int>, int> index;
    std::vector<double> h0;

    int find(const std::vector<int>& s) const {
        auto it = index.find(s);
        return it == index.end() ? -1 : it->second;
    }
};

bool momentum_conserving(const ModelSpec& m) { return m.cubic_ti() || m.lee(); }

int ring_of(const ModelSpec& m) {
    if (m.grid.ring_modulus <= 0)
        throw config_error(m.variant_name() +
                           ": the dense oracle needs a momentum-closed ring mode set");
    return m.grid.ring_modulus;
}

// Total momentum index of an occupation vector, mod the ring. Register r
// carries the momentum of grid node r % n_modes.
int sector_of(const std::vector<int>& occ, std::size_t n_modes, int ring) {
    long total = 0;
    for (std::size_t r = 0; r < occ.size(); ++r)
        total += static_cast<long>(r % n_modes) * occ[r];
    return static_cast<int>(total % ring);
}

std::vector<double> register_energies(const ModelSpec& m,
                                      const std::vector<std::size_t>& modes) {
    std::vector<double> e;
    if (const auto* lee = m.lee()) {
        for (std::size_t i : modes) e.push_back(lee->omega_a.at_node(i, m.grid));
        for (std::size_t i : modes) e.push_back(lee->omega_b.at_node(i, m.grid));
        for (std::size_t i : modes) e.push_back(lee->omega_c.at_node(i, m.grid));
        return e;
    }
    const model::Dispersion* w = nullptr;
    if (const auto* pc = m.pure_creation()) w = &pc->omega;
    if (const auto* lc = m.linear_coupling()) w = &lc->omega;
    if (const auto* cu = m.cubic_ti()) w = &cu->omega;
    for (std::size_t i : modes) e.push_back(w->at_node(i, m.grid));
    return e;
}

// Element's occupation vector; el.p names a grid node, mapped to its position
// in the retained mode list.
std::vector<int> element_state(const ModelSpec& m, const std::vector<std::size_t>& modes,
                               Element el, std::size_t n_regs) {
    std::vector<int> s(n_regs, 0);
    if (el.kind == Element::Kind::one_particle) {
        std::size_t pos = modes.size();
        for (std::size_t j = 0; j < modes.size(); ++j)
            if (modes[j] == el.p) pos = j;
        if (pos == modes.size())
            throw config_error("one-particle node is not in the mode set");
        s[m.lee() ? 2 * modes.size() + pos : pos] = 1;
    }
    return s;
}

Basis build_basis(const ModelSpec& m, const std::vector<std::size_t>& modes, int n_max,
                  int N_max, Element el) {
    const std::size_t n_modes = modes.size();
    const std::size_t n_regs = m.lee() ? 3 * n_modes : n_modes;
    const bool sectored = momentum_conserving(m);
    const int ring = sectored ? ring_of(m) : 0;
    const std::vector<int> ref = element_state(m, modes, el, n_regs);
    const int want = sectored ? sector_of(ref, n_modes, ring) : 0;

    Basis b;
    std::vector<int> occ(n_regs, 0);
    int total = 0;
    // Odometer over occupation vectors with per-register and total caps.
    for (;;) {
        if (!sectored || sector_of(occ, n_modes, ring) == want) {
            b.index.emplace(occ, static_cast<int>(b.states.size()));
            b.states.push_back(occ);
        }
        std::size_t r = 0;
        while (r < n_regs) {
            if (occ[r] < n_max && total < N_max) {
                ++occ[r];
                ++total;
                break;
            }
            total -= occ[r];
            occ[r] = 0;
            ++r;
        }
        if (r == n_regs) break;
    }

    const std::vector<double> we = register_energies(m, modes);
    b.h0.resize(b.states.size());
    for (std::size_t i = 0; i < b.states.size(); ++i) {
        double e = 0.0;
        for (std::size_t r = 0; r < n_regs; ++r) e += b.states[i][r] * we[r];
        b.h0[i] = e;
    }
    return b;
}

// --------------------------------------------------------- operator build

struct Monomial {
    cplx coeff{};
    std::vector<int> create;        // register indices, creations applied last
    std::vector<int> annihilate;
};

// Interaction monomials for the dense route. Register indexing matches
// build_basis.
std::vector<Monomial> interaction_monomials(const ModelSpec& m,
                                            const std::vector<std::size_t>& modes) {
    const std::size_t n_modes = modes.size();
    std::vector<Monomial> terms;
    auto grid_pos = [&](std::size_t node) {
        for (std::size_t j = 0; j < n_modes; ++j)
            if (modes[j] == node) return j;
        throw config_error("mode set is not closed under momentum combination");
    };

    if (const auto* pc = m.pure_creation()) {
        if (pc->pattern == CreationPattern::creation) {
            double fact = 1.0;
            for (int k = 2; k <= pc->n; ++k) fact *= k;
            for (std::size_t j = 0; j < n_modes; ++j) {
                const cplx c = mode_amplitude(m, modes[j], pc->v) / std::sqrt(fact);
                std::vector<int> reg(pc->n, static_cast<int>(j));
                terms.push_back({c, reg, {}});
                terms.push_back({std::conj(c), {}, reg});
            }
        } else {
            // Normal-ordered n-fold product of (a + a*) field factors with a
            // separable kernel: expand over creation/annihilation choices.
            const int n = pc->n;
            if (n < 2 || n > 3)
                throw unsupported_error("field-pattern oracle supports n = 2 or 3");
            std::vector<std::size_t> tup(n, 0);
            for (;;) {
                cplx g = 1.0;
                for (int s = 0; s < n; ++s) g *= mode_amplitude(m, modes[tup[s]], pc->v);
                for (int mask = 0; mask < (1 << n); ++mask) {
                    Monomial t;
                    t.coeff = g;
                    for (int s = 0; s < n; ++s)
                        (mask >> s & 1 ? t.create : t.annihilate)
                            .push_back(static_cast<int>(tup[s]));
                    terms.push_back(std::move(t));
                }
                int s = n - 1;
                while (s >= 0 && ++tup[s] == n_modes) tup[s--] = 0;
                if (s < 0) break;
            }
        }
        return terms;
    }

    if (const auto* lc = m.linear_coupling()) {
        for (std::size_t j = 0; j < n_modes; ++j) {
            const cplx c = mode_amplitude(m, modes[j], lc->v);
            terms.push_back({c, {static_cast<int>(j)}, {}});
            terms.push_back({std::conj(c), {}, {static_cast<int>(j)}});
        }
        return terms;
    }

    if (const auto* cu = m.cubic_ti()) {
        ring_of(m);
        const std::size_t n = m.grid.size();
        for (std::size_t p = 0; p < n_modes; ++p)
            for (std::size_t q = 0; q < n_modes; ++q) {
                const std::size_t r = model::momentum_minus(m.grid, modes[p], modes[q]);
                const cplx c = cu->v.at(modes[p], modes[q], n) / std::sqrt(2.0);
                const int iq = static_cast<int>(grid_pos(modes[q]));
                const int ir = static_cast<int>(grid_pos(r));
                const int ip = static_cast<int>(p);
                terms.push_back({c, {iq, ir}, {ip}});
                terms.push_back({std::conj(c), {ip}, {iq, ir}});
            }
        return terms;
    }

    const auto* lee = m.lee();
    ring_of(m);
    const std::size_t n = m.grid.size();
    const int M = static_cast<int>(n_modes);
    for (std::size_t p = 0; p < n_modes; ++p)
        for (std::size_t q = 0; q < n_modes; ++q) {
            const std::size_t r = model::momentum_minus(m.grid, modes[p], modes[q]);
            const cplx c = lee->v.at(modes[p], modes[q], n);
            const int aq = static_cast<int>(grid_pos(modes[q]));
            const int br = M + static_cast<int>(grid_pos(r));
            const int cp = 2 * M + static_cast<int>(p);
            terms.push_back({c, {aq, br}, {cp}});
            terms.push_back({std::conj(c), {cp}, {aq, br}});
        }
    return terms;
}

Eigen::MatrixXcd build_v(const Basis& b, const std::vector<Monomial>& terms) {
    const auto dim = static_cast<Eigen::Index>(b.states.size());
    Eigen::MatrixXcd V = Eigen::MatrixXcd::Zero(dim, dim);
    std::vector<int> scratch;
    for (Eigen::Index j = 0; j < dim; ++j) {
        for (const Monomial& t : terms) {
            scratch = b.states[static_cast<std::size_t>(j)];
            double f = 1.0;
            bool dead = false;
            for (int r : t.annihilate) {
                if (scratch[r] == 0) {
                    dead = true;
                    break;
                }
                f *= std::sqrt(static_cast<double>(scratch[r]));
                --scratch[r];
            }
            if (dead) continue;
            for (int r : t.create) {
                ++scratch[r];
                f *= std::sqrt(static_cast<double>(scratch[r]));
            }
            const int i = b.find(scratch);
            if (i >= 0) V(i, j) += t.coeff * f;
        }
    }
    return V;
}

// ------------------------------------------------------ matrix exponential

// <e| exp(-itH) |e> for Hermitian H given as H0 diagonal plus lam * V.
// Spectral route: the diagonal element needs only |Q_{e,a}|^2 weights.
cplx evolved_diagonal(const std::vector<double>& h0, const Eigen::MatrixXcd& V, double lambda,
                     double t, int e) {
    const Eigen::Index dim = V.rows();
    const bool real_v = V.imag().cwiseAbs().maxCoeff() < 1e-13;
    std::vector<double> evals(static_cast<std::size_t>(dim));
    std::vector<double> wt(static_cast<std::size_t>(dim));

    if (real_v) {
        Eigen::MatrixXd A = V.real() * lambda;
        for (Eigen::Index i = 0; i < dim; ++i) A(i, i) += h0[static_cast<std::size_t>(i)];
        if (dim <= 64) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
            for (Eigen::Index a = 0; a < dim; ++a) {
                evals[a] = es.eigenvalues()(a);
                const double q = es.eigenvectors()(e, a);
                wt[a] = q * q;
            }
        } else {
            const auto n = static_cast<lapack_int>(dim);
            const lapack_int info =
                LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, A.data(), n, evals.data());
            if (info != 0) throw numeric_error("dense symmetric eigensolve failed");
            for (Eigen::Index a = 0; a < dim; ++a) {
                const double q = A(e, a);
                wt[a] = q * q;
            }
        }
    } else {
        Eigen::MatrixXcd A = V * lambda;
        for (Eigen::Index i = 0; i < dim; ++i)
            A(i, i) += h0[static_cast<std::size_t>(i)];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A);
        for (Eigen::Index a = 0; a < dim; ++a) {
            evals[a] = es.eigenvalues()(a);
            wt[a] = std::norm(es.eigenvectors()(e, a));
        }
    }

    std::vector<cplx> parts(static_cast<std::size_t>(dim));
    for (std::size_t a = 0; a < parts.size(); ++a)
        parts[a] = wt[a] * std::exp(cplx(0.0, -t * evals[a]));
    return pairwise_sum(parts);
}

// --------------------------------------------------------- factorized route

bool factorizes(const ModelSpec& m) {
    if (m.linear_coupling()) return true;
    const auto* pc = m.pure_creation();
    return pc && pc->pattern == CreationPattern::creation;
}

// Single-mode block <occ| e^{it n w} e^{-it(H0 + lam V)} |occ> by
// scaling-and-squaring on the (n_max+1)-dimensional block.
cplx mode_block_value(const ModelSpec& m, std::size_t node, int n_max, double t,
                      double lambda, int occ) {
    const double w = register_energies(m, {node})[0];
    const int dim = n_max + 1;
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) A(i, i) = i * w;

    if (const auto* lc = m.linear_coupling()) {
        const cplx c = mode_amplitude(m, node, lc->v);
        for (int i = 0; i + 1 < dim; ++i) {
            A(i + 1, i) += lambda * c * std::sqrt(i + 1.0);
            A(i, i + 1) += lambda * std::conj(c) * std::sqrt(i + 1.0);
        }
    } else {
        const auto* pc = m.pure_creation();
        double fact = 1.0;
        for (int k = 2; k <= pc->n; ++k) fact *= k;
        const cplx c = mode_amplitude(m, node, pc->v) / std::sqrt(fact);
        for (int i = 0; i + pc->n < dim; ++i) {
            double f = 1.0;
            for (int s = 1; s <= pc->n; ++s) f *= std::sqrt(i + static_cast<double>(s));
            A(i + pc->n, i) += lambda * c * f;
            A(i, i + pc->n) += lambda * std::conj(c) * f;
        }
    }
    const Eigen::MatrixXcd U = (cplx(0.0, -t) * A).exp();
    return std::exp(cplx(0.0, t * occ * w)) * U(occ, occ);
}

cplx factorized_value(const ModelSpec& m, const std::vector<std::size_t>& modes, int n_max,
                      Element el, double t, double lambda) {
    cplx prod = 1.0;
    bool found = el.kind != Element::Kind::one_particle;
    for (std::size_t node : modes) {
        const bool hit = el.kind == Element::Kind::one_particle && el.p == node;
        found = found || hit;
        prod *= mode_block_value(m, node, n_max, t, lambda, hit ? 1 : 0);
    }
    if (!found) throw config_error("one-particle node is not in the mode set");
    return prod;
}

cplx fock_value(const FockSpec& spec, const ModelSpec& m, Element el, double t,
                double lambda) {
    const std::vector<std::size_t> modes = resolve_modes(spec, m);
    if (factorizes(m)) return factorized_value(m, modes, spec.n_max, el, t, lambda);

    if (momentum_conserving(m) && modes.size() != m.grid.size())
        throw config_error("mode subset breaks momentum closure; list every grid node");
    const Basis b = build_basis(m, modes, spec.n_max, spec.N_max, el);
    if (b.states.size() > 4096)
        throw numeric_error("dense basis dimension " + std::to_string(b.states.size()) +
                            " exceeds 4096; reduce the cutoffs");
    const int e = b.find(
        element_state(m, modes, el, m.lee() ? 3 * modes.size() : modes.size()));
    if (e < 0) throw config_error("requested element lies outside the truncated basis");
    const Eigen::MatrixXcd V = build_v(b, interaction_monomials(m, modes));
    const cplx inner = evolved_diagonal(b.h0, V, lambda, t, e);
    return std::exp(cplx(0.0, t * b.h0[static_cast<std::size_t>(e)])) * inner;
}

// ------------------------------------------------------------ dyson paths

// Maximum total-quanta increase of one interaction application.
int max_step_up(const ModelSpec& m) {
    if (const auto* pc = m.pure_creation()) return pc->n;
    if (m.linear_coupling()) return 1;
    return 1;       // cubic and three-species vertices change the total by one
}

struct PathSum {
    // Amplitude grouped by the exact slot-phase tuple (padded with zeros).
    std::map<std::array<double, 4>, cplx> groups;
    std::size_t n_paths = 0;
};

PathSum dyson_paths(const ModelSpec& m, Element el, int order) {
    FockSpec spec;
    const std::vector<std::size_t> modes = resolve_modes(spec, m);
    if (momentum_conserving(m)) ring_of(m);
    const int initial = el.kind == Element::Kind::one_particle ? 1 : 0;
    const int cap = initial + (order / 2 + order % 2) * max_step_up(m);
    const Basis b = build_basis(m, modes, cap, cap, el);
    const Eigen::MatrixXcd V = build_v(b, interaction_monomials(m, modes));
    const int dim = static_cast<int>(b.states.size());
    const int e = b.find(
        element_state(m, modes, el, m.lee() ? 3 * modes.size() : modes.size()));
    if (e < 0) throw config_error("requested element lies outside the path basis");

    std::vector<std::vector<int>> nz(dim);
    for (int j = 0; j < dim; ++j)
        for (int i = 0; i < dim; ++i)
            if (std::abs(V(i, j)) > 1e-14) nz[static_cast<std::size_t>(j)].push_back(i);

    PathSum out;
    std::vector<int> chain{e};
    std::array<double, 4> phases{};

    // Depth-first walk over operator paths e -> ... -> e; slot j carries the
    // phase H0(u_{j-1}) - H0(u_j).
    std::function<void(int, cplx)> rec = [&](int depth, cplx a) {
        const int u = chain.back();
        if (depth == order) {
            if (u != e) return;
            if (++out.n_paths > 10'000'000)
                throw numeric_error("dyson path budget exceeded (1e7 contractions)");
            out.groups[phases] += a;
            return;
        }
        for (int nxt : nz[static_cast<std::size_t>(u)]) {
            chain.push_back(nxt);
            phases[static_cast<std::size_t>(depth)] =
                b.h0[static_cast<std::size_t>(u)] - b.h0[static_cast<std::size_t>(nxt)];
            rec(depth + 1, a * V(u, nxt));
            chain.pop_back();
        }
    };
    rec(0, cplx(1.0));
    return out;
}

cplx dyson_quadrature(const PathSum& ps, int order, double t, int panel_scale) {
    std::vector<cplx> parts;
    parts.reserve(ps.groups.size());
    for (const auto& [phs, a] : ps.groups) {
        std::vector<double> es(phs.begin(), phs.begin() + order);
        parts.push_back(a * numerics::ordered_time_integral(es, 0, t, panel_scale));
    }
    return pairwise_sum(parts);
}

}  // namespace

// ---------------------------------------------------------------- public

FockSpec FockSpec::for_model(const ModelSpec& m, int n_max, int N_max) {
    FockSpec s;
    s.modes.resize(m.grid.size());
    for (std::size_t i = 0; i < s.modes.size(); ++i) s.modes[i] = i;
    s.n_max = n_max;
    s.N_max = N_max;
    check_caps(s);
    return s;
}

std::size_t fock_dimension(const FockSpec& spec, const ModelSpec& m, Element el) {
    check_caps(spec);
    const std::vector<std::size_t> modes = resolve_modes(spec, m);
    if (factorizes(m)) {
        // Factorized evaluation never materializes the product basis; report
        // the per-mode block count times block size for bookkeeping.
        return modes.size() * static_cast<std::size_t>(spec.n_max + 1);
    }
    return build_basis(m, modes, spec.n_max, spec.N_max, el).states.size();
}

OracleResult solvable_closed_form(const ModelSpec& m, double t, double lambda) {
    const auto* lc = m.linear_coupling();
    if (!lc) throw unsupported_error("the closed form requires the linear-coupling model");
    const MomentumGrid& g = m.grid;
    std::vector<double> s1(g.size()), s2(g.size());
    std::vector<cplx> osc(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double w = lc->omega.at_node(i, g);
        if (!(w > 0.0))
            throw config_error("closed form assumes a positive dispersion; node " +
                               std::to_string(i) + " has omega = " + fmt17(w));
        const double r2 = std::norm(lc->v.at(i));
        s1[i] = r2 / w;
        s2[i] = r2 / (w * w);
        osc[i] = r2 / (w * w) * std::exp(cplx(0.0, -w * t));
    }
    const double L2 = lambda * lambda;
    const cplx expo = cplx(0.0, L2 * g.integrate(s1) * t) - L2 * g.integrate(s2) +
                      L2 * g.integrate(osc);
    return {std::exp(expo), Route::closed_form, 0.0};
}

OracleResult dyson_order2(const ModelSpec& m, Element el, double t, double lambda) {
    const PathSum ps = dyson_paths(m, el, 2);
    const cplx coarse = dyson_quadrature(ps, 2, t, 1);
    const cplx fine = dyson_quadrature(ps, 2, t, 2);
    const double L2 = lambda * lambda;
    OracleResult r;
    r.value = 1.0 - L2 * fine;
    r.route = Route::dyson2;
    r.error_estimate = L2 * std::abs(fine - coarse);
    return r;
}

OracleResult dyson_order4(const ModelSpec& m, Element el, double t, double lambda) {
    const PathSum ps = dyson_paths(m, el, 4);
    const cplx coarse = dyson_quadrature(ps, 4, t, 1);
    const cplx fine = dyson_quadrature(ps, 4, t, 2);
    const double L4 = lambda * lambda * lambda * lambda;
    OracleResult r;
    r.value = L4 * fine;
    r.route = Route::dyson4;
    r.error_estimate = L4 * std::abs(fine - coarse);
    return r;
}

SecularCoefficients dyson_order4_secular(const ModelSpec& m, Element el, double lambda) {
    const PathSum ps = dyson_paths(m, el, 4);
    const double L4 = lambda * lambda * lambda * lambda;
    SecularCoefficients out;
    for (const auto& [phs, a] : ps.groups) {
        const std::vector<double> es(phs.begin(), phs.begin() + 4);
        for (const auto& term : numerics::osc::ordered_terms(es, 0)) {
            if (std::abs(term.phase) > 1e-9) continue;
            const cplx c = L4 * a * term.coeff;
            if (term.tpow == 2) out.c2 += c;
            else if (term.tpow == 1) out.c1 += c;
            else if (term.tpow == 0) out.c0 += c;
        }
    }
    return out;
}

std::vector<numerics::osc::Term> dyson_order4_terms(const ModelSpec& m, Element el,
                                                    double lambda) {
    const PathSum ps = dyson_paths(m, el, 4);
    const double L4 = lambda * lambda * lambda * lambda;
    std::map<std::pair<int, long long>, numerics::osc::Term> acc;
    for (const auto& [phs, a] : ps.groups) {
        const std::vector<double> es(phs.begin(), phs.begin() + 4);
        for (const auto& term : numerics::osc::ordered_terms(es, 0)) {
            const std::pair<int, long long> key{term.tpow,
                                                std::llround(term.phase * 1e9)};
            auto [it, fresh] = acc.try_emplace(key, term);
            if (fresh) it->second.coeff = 0.0;
            it->second.coeff += L4 * a * term.coeff;
        }
    }
    std::vector<numerics::osc::Term> out;
    out.reserve(acc.size());
    for (const auto& [key, term] : acc)
        if (std::abs(term.coeff) > 0.0) out.push_back(term);
    return out;
}

OracleResult fock_exact(const FockSpec& spec, const ModelSpec& m, Element el, double t,
                        double lambda) {
    check_caps(spec);
    OracleResult r;
    r.route = Route::fock_exact;
    if (lambda == 0.0) {
        r.value = 1.0;
        return r;
    }
    r.value = fock_value(spec, m, el, t, lambda);
    FockSpec smaller = spec;
    smaller.n_max -= 1;
    smaller.N_max -= 1;
    r.error_estimate = std::abs(r.value - fock_value(smaller, m, el, t, lambda));
    if (std::abs(r.value) > 1.0 + 1e-8)
        throw numeric_error("truncated evolution lost unitarity; |value| = " +
                            fmt17(std::abs(r.value)));
    return r;
}

}  // namespace evo::oracles

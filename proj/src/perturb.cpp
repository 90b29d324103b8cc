#include "evo/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

namespace evo::perturb {

using model::CreationPattern;
using model::MomentumGrid;
using numerics::osc::Term;

// ------------------------------------------------------------ grid kernels

GridKernel gamma_apply(const GridKernel& k, int power, double eps) {
    if (power < 1 || power > 3) throw unsupported_error("gamma_apply: power must be 1, 2 or 3");
    if (eps < 0.0) throw config_error("gamma_apply: eps must be >= 0");
    if (k.values.size() != k.energies.size())
        throw config_error("gamma_apply: values/energies shape mismatch");
    GridKernel out = k;
    for (std::size_t i = 0; i < k.values.size(); ++i) {
        const double E = k.energies[i];
        if (eps == 0.0 && std::abs(E) < 1e-12)
            throw singular_denominator("gamma_apply: vanishing energy at tuple " +
                                       std::to_string(i));
        const cplx d = cplx(E, -eps);
        cplx dp = d;
        for (int r = 1; r < power; ++r) dp *= d;
        out.values[i] = k.values[i] / dp;
    }
    return out;
}

// ----------------------------------------------------- order-2 coefficients

namespace {

// Flattens the model's elementary excitation channels to (rho, E) pairs with
// grid weights folded into rho.
GridKernel order2_channels(const ModelSpec& m) {
    const MomentumGrid& g = m.grid;
    GridKernel k;
    k.arity = 1;
    if (const auto* pc = m.pure_creation()) {
        if (m.decaying)
            throw numeric_error(
                "decaying pure-creation model: vacuum order-2 coefficients go through the "
                "decay route");
        if (pc->pattern == CreationPattern::creation) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                k.values.push_back(g.weights[i] * std::norm(pc->v.at(i)));
                k.energies.push_back(pc->n * pc->omega.at_node(i, g));
            }
        } else {
            // Normal-ordered cubic field pattern: channels are mode multisets
            // of size three; six contractions pair the two vertices, and the
            // multinomial counts orderings inside the multiset.
            std::vector<double> line(g.size());
            std::vector<double> w(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) {
                line[i] = g.weights[i] * std::norm(pc->v.at(i));
                w[i] = pc->omega.at_node(i, g);
            }
            for (std::size_t a = 0; a < g.size(); ++a)
                for (std::size_t b = a; b < g.size(); ++b)
                    for (std::size_t c = b; c < g.size(); ++c) {
                        double mult = 6.0;                       // 3! orderings
                        if (a == b && b == c) mult = 1.0;
                        else if (a == b || b == c) mult = 3.0;
                        k.values.push_back(6.0 * mult * line[a] * line[b] * line[c]);
                        k.energies.push_back(w[a] + w[b] + w[c]);
                    }
        }
    } else if (const auto* lc = m.linear_coupling()) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            k.values.push_back(g.weights[i] * std::norm(lc->v.at(i)));
            k.energies.push_back(lc->omega.at_node(i, g));
        }
    } else {
        throw unsupported_error("vacuum order-2 coefficients need a pure-creation or "
                                "linear-coupling model");
    }
    return k;
}

}  // namespace

PredictionCoefficients vacuum_order2(const ModelSpec& m) {
    const GridKernel channels = order2_channels(m);
    const GridKernel g1 = gamma_apply(channels, 1, 0.0);
    const GridKernel g2 = gamma_apply(channels, 2, 0.0);

    PredictionCoefficients c;
    c.flavor = Flavor::vacuum;
    c.order = 2;
    c.lambda = m.lambda;
    c.A = cplx(0.0, 1.0) * pairwise_sum(g1.values);
    c.B = -pairwise_sum(g2.values);
    auto resid = std::make_shared<GridKernel>(g2);
    c.C = [resid](double t) {
        std::vector<cplx> vals(resid->values.size());
        for (std::size_t i = 0; i < vals.size(); ++i)
            vals[i] = resid->values[i] * std::exp(cplx(0.0, -resid->energies[i] * t));
        return pairwise_sum(vals);
    };
    return c;
}

cplx vacuum_prediction(const PredictionCoefficients& c, double t) {
    if (c.flavor != Flavor::vacuum)
        throw config_error("vacuum_prediction needs vacuum-flavor coefficients");
    const double l2 = c.lambda * c.lambda;
    return std::exp(l2 * (c.A * t + c.B + c.C(t)));
}

PredictionCoefficients oneparticle_order2(const ModelSpec& m, std::size_t p, double eps) {
    const MomentumGrid& g = m.grid;
    if (p >= g.size()) throw config_error("oneparticle_order2: momentum node out of range");
    if (!m.cubic_ti() && !m.lee())
        throw unsupported_error("one-particle coefficients need a cubic or Lee model");
    if (m.decaying && eps == 0.0)
        throw numeric_error("decaying model: one-particle coefficients need eps > 0");

    GridKernel channels;
    channels.arity = 1;
    const std::size_t N = g.size();
    for (std::size_t q = 0; q < N; ++q) {
        const cplx v = m.cubic_ti() ? m.cubic_ti()->v.at(p, q, N) : m.lee()->v.at(p, q, N);
        channels.values.push_back(g.weights[q] * std::norm(v));
        channels.energies.push_back(model::energy_total(m, {p, q}));
    }
    const GridKernel g1 = gamma_apply(channels, 1, eps);
    const GridKernel g2 = gamma_apply(channels, 2, eps);

    PredictionCoefficients c;
    c.flavor = Flavor::one_particle;
    c.p = p;
    c.order = 2;
    c.lambda = m.lambda;
    c.A = pairwise_sum(g1.values);
    c.B = -pairwise_sum(g2.values);
    auto resid = std::make_shared<GridKernel>(g2);
    auto energies = std::make_shared<std::vector<double>>(channels.energies);
    c.C = [resid, energies](double t) {
        std::vector<cplx> vals(resid->values.size());
        for (std::size_t i = 0; i < vals.size(); ++i)
            vals[i] = resid->values[i] * std::exp(cplx(0.0, -(*energies)[i] * t));
        return pairwise_sum(vals);
    };
    return c;
}

cplx u11_prediction(const PredictionCoefficients& c, double t, const cplx* A4_total) {
    if (c.flavor != Flavor::one_particle)
        throw config_error("u11_prediction needs one-particle coefficients");
    const double l2 = c.lambda * c.lambda;
    cplx out = std::exp(l2 * (cplx(0.0, 1.0) * c.A * t + c.B + c.C(t)));
    if (A4_total) out *= 1.0 + cplx(0.0, 1.0) * l2 * l2 * t * (*A4_total);
    return out;
}

// ----------------------------------------------------- order-4 one-particle

namespace {

// Merged oscillatory-term accumulator keyed on (tpow, phase bucket); the
// representative keeps the exact phase of the first term seen.
struct TermBag {
    std::map<std::pair<int, long long>, std::size_t> slot;
    std::vector<Term> terms;

    void add(const std::vector<Term>& list, double scale) {
        for (const Term& t : list) {
            const auto key = std::make_pair(t.tpow, std::llround(t.phase / 1e-9));
            auto it = slot.find(key);
            if (it == slot.end()) {
                slot.emplace(key, terms.size());
                terms.push_back({t.coeff * scale, t.tpow, t.phase});
            } else {
                terms[it->second].coeff += t.coeff * scale;
            }
        }
    }
};

std::function<cplx(double)> term_evaluator(std::vector<Term> terms) {
    auto held = std::make_shared<std::vector<Term>>(std::move(terms));
    return [held](double t) { return numerics::osc::eval_terms(*held, t); };
}

double real_kernel_at(const model::InteractionKernel& v, std::size_t i, std::size_t j,
                      std::size_t n) {
    const cplx val = v.at(i, j, n);
    if (std::abs(val.imag()) > 1e-13)
        throw unsupported_error("order-4 one-particle coefficients need a real kernel");
    return val.real();
}

}  // namespace

OneParticleOrder4 oneparticle_order4(const ModelSpec& m, std::size_t p) {
    const auto* ct = m.cubic_ti();
    if (!ct) throw unsupported_error("oneparticle_order4 needs the cubic model");
    if (m.decaying) throw unsupported_error("oneparticle_order4 needs a non-decaying model");
    const MomentumGrid& g = m.grid;
    const std::size_t N = g.size();
    if (p >= N) throw config_error("oneparticle_order4: momentum node out of range");

    std::vector<double> w(N), om(N);
    for (std::size_t i = 0; i < N; ++i) {
        w[i] = g.weights[i];
        om[i] = ct->omega.at_node(i, g);
    }
    auto vt = [&](std::size_t a, std::size_t b) { return real_kernel_at(ct->v, a, b, N); };
    auto eps2 = [&](std::size_t P, std::size_t q) {
        return om[q] + om[model::momentum_minus(g, P, q)] - om[P];
    };

    // Self-energy sums over the two-particle channel at p.
    double S1 = 0.0, S2 = 0.0, S3 = 0.0;
    for (std::size_t q = 0; q < N; ++q) {
        const double rho = w[q] * vt(p, q) * vt(p, q);
        const double e = eps2(p, q);
        S1 += rho / e;
        S2 += rho / (e * e);
        S3 += rho / (e * e * e);
    }

    TermBag all;       // full order-4 amplitude
    TermBag reducible; // the particle line revisits |p> between the two loops

    for (std::size_t q = 0; q < N; ++q) {
        const double rq = w[q] * vt(p, q) * vt(p, q);
        const double Eq = eps2(p, q);
        for (std::size_t k = 0; k < N; ++k) {
            const double rk = w[k] * vt(p, k) * vt(p, k);
            const double Ek = eps2(p, k);
            const auto terms = numerics::osc::ordered_terms({-Eq, Eq, -Ek, Ek}, 0);
            all.add(terms, rq * rk);
            reducible.add(terms, rq * rk);
        }
    }

    double X1 = 0.0, X2 = 0.0;
    for (std::size_t r = 0; r < N; ++r) {
        const std::size_t s = model::momentum_minus(g, p, r);
        const double er = eps2(p, r);
        const double vpr = vt(p, r);
        for (std::size_t u = 0; u < N; ++u) {
            const double E3 = eps2(s, u);
            const double ww = w[r] * w[u];
            // nested: the spectator from the first pair waits through an
            // inner two-particle fluctuation of its partner
            const double wt1 = 2.0 * ww * vpr * vpr * vt(s, u) * vt(s, u);
            all.add(numerics::osc::ordered_terms({-er, -E3, E3, er}, 0), wt1);
            X1 += wt1 / (er * er * (er + E3));
            // crossed: the recombination exchanges partners
            const std::size_t radd = [&] {
                // r + u on the mode set: p - ((p - r) - u)
                const std::size_t t1 = model::momentum_minus(g, s, u);
                return model::momentum_minus(g, p, t1);
            }();
            const double eru = eps2(p, radd);
            const double wt2 = 4.0 * ww * vpr * vt(s, u) * vt(radd, r) * vt(p, radd);
            all.add(numerics::osc::ordered_terms({-eru, eru - er - E3, E3, er}, 0), wt2);
            X2 += wt2 / (er * (er + E3) * eru);
        }
    }

    OneParticleOrder4 out;
    out.A4_1pi = X1 + X2;
    out.A4_1pr = -S1 * S2;
    out.B4_1pr = 2.0 * S1 * S3 + S2 * S2;
    std::vector<Term> c4;
    for (const Term& t : reducible.terms)
        if (std::abs(t.phase) > 1e-9) c4.push_back(t);
    out.C4_1pr = term_evaluator(std::move(c4));
    out.U4 = term_evaluator(all.terms);
    return out;
}

// ----------------------------------------------------------- decay route

namespace {

// Stationary-phase envelope of the decay kernel and its derivatives:
// h(sigma) = pi^{dn/2} (1 + i sigma / 2)^{-dn/2}.
cplx envelope_deriv(int dn, double sigma, int order) {
    const double a = 0.5 * dn;
    cplx coeff = std::pow(pi, a);
    for (int r = 0; r < order; ++r) coeff *= (-a - r) * cplx(0.0, 0.5);
    return coeff * std::pow(cplx(1.0, 0.5 * sigma), -a - order);
}

// Tail int_T^inf env(sigma) e^{i b sigma} d sigma by three integrations by
// parts; env_shift = 1 multiplies the envelope by sigma first.
struct Tail {
    cplx value{};
    double err = 0.0;
};

Tail ibp_tail(int dn, double b, double T, bool sigma_weight) {
    auto env = [&](int order) -> cplx {
        if (!sigma_weight) return envelope_deriv(dn, T, order);
        // derivatives of sigma * h(sigma)
        if (order == 0) return T * envelope_deriv(dn, T, 0);
        if (order == 1) return envelope_deriv(dn, T, 0) + T * envelope_deriv(dn, T, 1);
        return 2.0 * envelope_deriv(dn, T, 1) + T * envelope_deriv(dn, T, 2);
    };
    const cplx ib(0.0, b);
    const cplx phase = std::exp(cplx(0.0, b * T));
    cplx sum = 0.0;
    cplx den = ib;
    cplx last = 0.0;
    for (int k = 0; k < 3; ++k) {
        last = env(k) / den;
        sum += last;
        den *= ib;
    }
    Tail t;
    t.value = -phase * sum;
    t.err = std::abs(last);
    return t;
}

// 20-node Gauss-Legendre panels over [0, t], sized to the oscillation rate.
cplx panel_integral(const std::function<cplx(double)>& f, double t, double rate) {
    if (t == 0.0) return 0.0;
    const auto n_panels =
        static_cast<std::size_t>(std::max(4.0, std::ceil(1.25 * t * rate / (2.0 * pi))));
    static std::vector<double> x, wq;
    if (x.empty()) gauss_legendre(20, x, wq);
    const double width = t / static_cast<double>(n_panels);
    std::vector<cplx> totals(n_panels);
    for (std::size_t p = 0; p < n_panels; ++p) {
        const double a = width * static_cast<double>(p);
        cplx s = 0.0;
        for (int i = 0; i < 20; ++i) s += wq[i] * f(a + 0.5 * width * (x[i] + 1.0));
        totals[p] = 0.5 * width * s;
    }
    return pairwise_sum(totals);
}

struct RadialChannels {
    std::vector<double> rho;    // Surf * w * R^{dn-1} e^{-R^2}
    std::vector<double> E;      // R^2/2 - n w0
};

RadialChannels radial_channels(int dn, double n_omega0, int n_nodes, bool uniform) {
    const double Rmax = 8.0;
    std::vector<double> R, w;
    if (uniform) {
        R.resize(n_nodes);
        w.resize(n_nodes);
        const double h = Rmax / (n_nodes - 1);
        for (int i = 0; i < n_nodes; ++i) {
            R[i] = h * i;
            w[i] = (i == 0 || i == n_nodes - 1) ? 0.5 * h : h;
        }
    } else {
        gauss_legendre_ab(n_nodes, 0.0, Rmax, R, w);
    }
    const double surf = 2.0 * std::pow(pi, 0.5 * dn) / std::tgamma(0.5 * dn);
    RadialChannels ch;
    ch.rho.resize(R.size());
    ch.E.resize(R.size());
    for (std::size_t i = 0; i < R.size(); ++i) {
        ch.rho[i] = surf * w[i] * std::pow(R[i], dn - 1) * std::exp(-R[i] * R[i]);
        ch.E[i] = 0.5 * R[i] * R[i] - n_omega0;
    }
    return ch;
}

}  // namespace

cplx DecayCoefficients::A2() const {
    if (!has_limits)
        throw numeric_error("decay limit may not exist: dn = " + std::to_string(dn) + " < 3");
    return A2_time;
}

cplx DecayCoefficients::B2() const {
    if (!has_limits)
        throw numeric_error("decay limit may not exist: dn = " + std::to_string(dn) + " < 3");
    return B2_time;
}

DecayCoefficients decay_order2(const ModelSpec& m) {
    const auto* pc = m.pure_creation();
    if (!pc || pc->pattern != CreationPattern::creation)
        throw unsupported_error("decay_order2 needs a pure-creation model");
    if (pc->omega.kind != model::DispersionKind::nonrel_shifted)
        throw unsupported_error("decay_order2 needs the nonrel-shifted dispersion");
    const MomentumGrid& g = m.grid;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double a = g.abs_node(i);
        if (std::abs(pc->v.at(i) - std::exp(-0.5 * a * a)) > 1e-9)
            throw unsupported_error("decay_order2 needs the Gaussian generator kernel");
    }

    DecayCoefficients d;
    d.dn = g.d * pc->n;
    d.osc_rate = pc->n * pc->omega.param;
    const double b = d.osc_rate;

    auto fgrid = std::make_shared<RadialChannels>(radial_channels(d.dn, b, 4096, false));
    d.F = [fgrid](double sigma) {
        std::vector<cplx> vals(fgrid->rho.size());
        for (std::size_t i = 0; i < vals.size(); ++i)
            vals[i] = fgrid->rho[i] * std::exp(cplx(0.0, -sigma * fgrid->E[i]));
        return pairwise_sum(vals);
    };
    const auto F = d.F;
    d.A2_at = [F, b](double t) { return -panel_integral(F, t, b + 1.0); };
    d.B2_at = [F, b](double t) {
        return panel_integral([&](double s) { return s * F(s); }, t, b + 1.0);
    };

    if (d.dn >= 3) {
        d.has_limits = true;
        const double T = 200.0;
        const Tail tA = ibp_tail(d.dn, b, T, false);
        const Tail tB = ibp_tail(d.dn, b, T, true);
        d.A2_time = -(panel_integral(F, T, b + 1.0) + tA.value);
        d.B2_time = panel_integral([&](double s) { return s * F(s); }, T, b + 1.0) + tB.value;
        d.A2_time_err = tA.err;
        d.B2_time_err = tB.err;

        // The resolvent ladder reaches eps ~ 8e-4 and the squared pole picks up
        // a 1/h prefactor in its aliasing error, so the uniform rule near the
        // E = 0 shell needs node spacing ~ eps/10 or better.
        auto egrid = std::make_shared<RadialChannels>(radial_channels(d.dn, b, 131072, true));
        auto A2_eps = [egrid](double eps) {
            std::vector<cplx> vals(egrid->rho.size());
            for (std::size_t i = 0; i < vals.size(); ++i)
                vals[i] = egrid->rho[i] / cplx(egrid->E[i], -eps);
            return cplx(0.0, 1.0) * pairwise_sum(vals);
        };
        const auto rA = numerics::ieps_limit(A2_eps);
        d.A2_eps = rA.value;
        d.A2_eps_err = rA.error_estimate;
        if (d.dn >= 5) {
            d.has_eps_B2 = true;
            auto B2_eps = [egrid](double eps) {
                std::vector<cplx> vals(egrid->rho.size());
                for (std::size_t i = 0; i < vals.size(); ++i) {
                    const cplx den = cplx(egrid->E[i], -eps);
                    vals[i] = egrid->rho[i] / (den * den);
                }
                return -pairwise_sum(vals);
            };
            const auto rB = numerics::ieps_limit(B2_eps);
            d.B2_eps = rB.value;
            d.B2_eps_err = rB.error_estimate;
        }
    }
    return d;
}

// ------------------------------------------------------------- mass kernels

namespace {

using State = std::vector<std::size_t>;   // sorted node-index multiset

// Dense real matrix in column-major (source-index) layout.
struct SectorMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;
    double& at(std::size_t r, std::size_t c) { return a[c * rows + r]; }
    double at(std::size_t r, std::size_t c) const { return a[c * rows + r]; }
};

std::map<State, std::size_t> index_states(const std::vector<State>& states) {
    std::map<State, std::size_t> idx;
    for (std::size_t i = 0; i < states.size(); ++i) idx.emplace(states[i], i);
    return idx;
}

// Creation part of the cubic vertex applied to every source state:
// sum_{P,Q} (v(P,Q)/sqrt(2)) adag_Q adag_{P-Q} a_P, with bosonic factors.
SectorMatrix raising_block(const ModelSpec& m, const std::vector<State>& src,
                           const std::vector<State>& dst) {
    const auto* ct = m.cubic_ti();
    const MomentumGrid& g = m.grid;
    const std::size_t N = g.size();
    const auto dst_index = index_states(dst);
    SectorMatrix M;
    M.rows = dst.size();
    M.cols = src.size();
    M.a.assign(M.rows * M.cols, 0.0);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (std::size_t c = 0; c < src.size(); ++c) {
        std::vector<int> occ(N, 0);
        for (std::size_t n : src[c]) ++occ[n];
        for (std::size_t P = 0; P < N; ++P) {
            if (occ[P] == 0) continue;
            const double f_ann = std::sqrt(static_cast<double>(occ[P]));
            for (std::size_t Q = 0; Q < N; ++Q) {
                const std::size_t R = model::momentum_minus(g, P, Q);
                std::vector<int> o = occ;
                --o[P];
                double amp = real_kernel_at(ct->v, P, Q, N) * inv_sqrt2 * f_ann;
                amp *= std::sqrt(static_cast<double>(o[Q] + 1));
                ++o[Q];
                amp *= std::sqrt(static_cast<double>(o[R] + 1));
                ++o[R];
                State target;
                for (std::size_t n = 0; n < N; ++n)
                    for (int r = 0; r < o[n]; ++r) target.push_back(n);
                const auto it = dst_index.find(target);
                if (it == dst_index.end())
                    throw config_error("m_kernels: mode set is not momentum closed");
                M.at(it->second, c) += amp;
            }
        }
    }
    return M;
}

}  // namespace

MassKernels m_kernels(const ModelSpec& m, std::size_t p) {
    const auto* ct = m.cubic_ti();
    if (!ct) throw unsupported_error("m_kernels needs the cubic model");
    if (m.decaying) throw unsupported_error("m_kernels needs a non-decaying model");
    const MomentumGrid& g = m.grid;
    if (g.ring_modulus <= 0)
        throw unsupported_error("m_kernels needs a momentum-closed ring mode set");
    const std::size_t N = g.size();
    if (p >= N) throw config_error("m_kernels: momentum node out of range");

    std::vector<double> om(N);
    for (std::size_t i = 0; i < N; ++i) om[i] = ct->omega.at_node(i, g);

    // Momentum-sector bases: one, two and three particles with total p.
    const std::vector<State> s1{{p}};
    std::vector<State> s2, s3;
    for (std::size_t q = 0; q < N; ++q) {
        const std::size_t r = model::momentum_minus(g, p, q);
        if (q <= r) s2.push_back({q, r});
    }
    for (std::size_t a = 0; a < N; ++a)
        for (std::size_t b = a; b < N; ++b) {
            const std::size_t c = model::momentum_minus(g, model::momentum_minus(g, p, a), b);
            if (c >= b) s3.push_back({a, b, c});
        }

    const SectorMatrix V21 = raising_block(m, s1, s2);
    const SectorMatrix V32 = raising_block(m, s2, s3);

    std::vector<double> D2(s2.size()), D3(s3.size());
    for (std::size_t i = 0; i < s2.size(); ++i)
        D2[i] = om[s2[i][0]] + om[s2[i][1]] - om[p];
    for (std::size_t i = 0; i < s3.size(); ++i)
        D3[i] = om[s3[i][0]] + om[s3[i][1]] + om[s3[i][2]] - om[p];

    // Resolvent chain with the one-particle component dropped between the
    // inner and outer loops (the three-particle sector carries the rest).
    std::vector<double> x(s2.size());
    for (std::size_t i = 0; i < s2.size(); ++i) x[i] = V21.at(i, 0) / D2[i];
    std::vector<double> z(s3.size(), 0.0);
    for (std::size_t r = 0; r < s3.size(); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < s2.size(); ++c) acc += V32.at(r, c) * x[c];
        z[r] = acc / D3[r];
    }
    std::vector<double> u(s2.size(), 0.0);
    for (std::size_t c = 0; c < s2.size(); ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < s3.size(); ++r) acc += V32.at(r, c) * z[r];
        u[c] = acc / D2[c];
    }
    double chain = 0.0, S1 = 0.0, S2 = 0.0;
    for (std::size_t i = 0; i < s2.size(); ++i) {
        chain += V21.at(i, 0) * u[i];
        S1 += V21.at(i, 0) * V21.at(i, 0) / D2[i];
        S2 += V21.at(i, 0) * V21.at(i, 0) / (D2[i] * D2[i]);
    }

    MassKernels out;
    out.M2 = -S1;
    // Fourth-order energy assembly: the reducible correction enters with the
    // second-order shift's sign, so the product term adds back.
    out.M4 = -chain + S1 * S2;
    return out;
}

}  // namespace evo::perturb

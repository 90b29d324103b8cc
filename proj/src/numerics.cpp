#include "evo/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

namespace evo::numerics {

// ------------------------------------------------------------------- grids

TimeGrid TimeGrid::of(std::vector<double> times) {
    if (times.empty()) throw config_error("time grid must be non-empty");
    if (times.front() < 0.0) throw config_error("time grid must start at t >= 0");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw config_error("time grid must be strictly increasing");
    TimeGrid g;
    g.t = std::move(times);
    return g;
}

TimeGrid TimeGrid::linspace(double t0, double t1, std::size_t n) {
    if (n < 2) throw config_error("time grid needs at least two points");
    std::vector<double> ts(n);
    for (std::size_t i = 0; i < n; ++i)
        ts[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n - 1);
    return of(std::move(ts));
}

double EpsilonSchedule::at(int k) const {
    if (k < 0 || k >= count) throw config_error("epsilon schedule index out of range");
    return eps1 * std::pow(ratio, k);
}

cplx integrate(const MomentumGrid& g, const std::vector<cplx>& samples) {
    return g.integrate(samples);
}

double integrate(const MomentumGrid& g, const std::vector<double>& samples) {
    return g.integrate(samples);
}

// ------------------------------------------------- ordered time integrals

namespace {

constexpr int kPanelNodes = 20;

// Gauss-Legendre nodes/weights on [-1,1] plus Legendre values P_n(x_i) up to
// degree kPanelNodes (one above the collocation degree, for antiderivatives).
struct PanelBasis {
    std::array<double, kPanelNodes> x{}, w{};
    std::array<std::array<double, kPanelNodes>, kPanelNodes + 1> leg{};

    PanelBasis() {
        std::vector<double> xs, ws;
        gauss_legendre(kPanelNodes, xs, ws);
        for (int i = 0; i < kPanelNodes; ++i) {
            x[i] = xs[i];
            w[i] = ws[i];
            leg[0][i] = 1.0;
            leg[1][i] = xs[i];
            for (int n = 1; n < kPanelNodes; ++n)
                leg[n + 1][i] =
                    ((2 * n + 1) * xs[i] * leg[n][i] - n * leg[n - 1][i]) / (n + 1);
        }
    }
};

const PanelBasis& basis() {
    static const PanelBasis b;
    return b;
}

// Per-panel Legendre collocation of the sampled integrand, then term-by-term
// antiderivative: prefix integrals at every node plus the running offset of
// the panels before, and the grand total.
struct PrefixResult {
    std::vector<cplx> prefix;   // int_0^{u_node} f, at all panel nodes
    cplx total{};
};

PrefixResult panel_prefix(const std::vector<cplx>& f, double t, std::size_t n_panels) {
    const PanelBasis& B = basis();
    PrefixResult res;
    res.prefix.resize(f.size());
    std::vector<cplx> totals(n_panels);
    const double width = t / static_cast<double>(n_panels);
    for (std::size_t p = 0; p < n_panels; ++p) {
        const double half = 0.5 * width;
        std::array<cplx, kPanelNodes> c{};
        for (int n = 0; n < kPanelNodes; ++n) {
            cplx s = 0.0;
            for (int i = 0; i < kPanelNodes; ++i)
                s += B.w[i] * f[p * kPanelNodes + i] * B.leg[n][i];
            c[n] = s * (0.5 * (2 * n + 1));
        }
        std::array<cplx, kPanelNodes + 1> b{};
        b[1] += c[0];
        for (int n = 1; n < kPanelNodes; ++n) {
            b[n + 1] += c[n] / static_cast<double>(2 * n + 1);
            b[n - 1] -= c[n] / static_cast<double>(2 * n + 1);
        }
        cplx at_left = 0.0;                       // F(-1) with b[0] still zero
        for (int n = 1; n <= kPanelNodes; ++n) at_left += (n % 2 ? -b[n] : b[n]);
        b[0] = -at_left;
        for (int i = 0; i < kPanelNodes; ++i) {
            cplx F = 0.0;
            for (int n = 0; n <= kPanelNodes; ++n) F += b[n] * B.leg[n][i];
            res.prefix[p * kPanelNodes + i] = half * F;
        }
        cplx at_right = 0.0;                      // F(1) = sum of coefficients
        for (int n = 0; n <= kPanelNodes; ++n) at_right += b[n];
        totals[p] = half * at_right;
    }
    cplx run = 0.0;
    for (std::size_t p = 0; p < n_panels; ++p) {
        for (int i = 0; i < kPanelNodes; ++i) res.prefix[p * kPanelNodes + i] += run;
        run += totals[p];
    }
    res.total = pairwise_sum(totals);
    return res;
}

}  // namespace

cplx ordered_time_integral(const std::vector<double>& phases, int inner_tpow, double t,
                           int panel_scale) {
    const std::size_t m = phases.size();
    if (m < 1 || m > 4)
        throw unsupported_error("ordered_time_integral supports orders 1 through 4");
    if (inner_tpow < 0) throw config_error("ordered_time_integral: negative weight degree");
    if (!(t >= 0.0)) throw numeric_error("ordered_time_integral: t must be >= 0");
    if (panel_scale < 1) throw config_error("ordered_time_integral: panel_scale must be >= 1");
    if (t == 0.0) return 0.0;

    double max_abs = 0.0;
    for (double e : phases) max_abs = std::max(max_abs, std::abs(e));
    // At least eight quadrature nodes per period 2 pi / max|E|; the panel size
    // keeps roughly 25.  panel_scale refines uniformly so callers can form a
    // two-resolution delta as an error estimate.
    const auto n_panels = static_cast<std::size_t>(panel_scale) *
        static_cast<std::size_t>(std::max(2.0, std::ceil(1.25 * t * max_abs / (2.0 * pi))));
    if (n_panels > 2'000'000)
        throw numeric_error("ordered_time_integral: oscillation count too large");

    const PanelBasis& B = basis();
    const double width = t / static_cast<double>(n_panels);
    std::vector<double> u(n_panels * kPanelNodes);
    for (std::size_t p = 0; p < n_panels; ++p) {
        const double a = width * static_cast<double>(p);
        for (int i = 0; i < kPanelNodes; ++i)
            u[p * kPanelNodes + i] = a + 0.5 * width * (B.x[i] + 1.0);
    }

    std::vector<cplx> f(u.size());
    for (std::size_t k = 0; k < u.size(); ++k)
        f[k] = std::exp(cplx(0.0, phases[m - 1] * u[k])) * std::pow(u[k], inner_tpow);
    for (std::size_t level = m - 1; level-- > 0;) {
        PrefixResult inner = panel_prefix(f, t, n_panels);
        for (std::size_t k = 0; k < u.size(); ++k)
            f[k] = std::exp(cplx(0.0, phases[level] * u[k])) * inner.prefix[k];
    }
    return panel_prefix(f, t, n_panels).total;
}

cplx closed_form_double(double E, double t) {
    if (E == 0.0) throw singular_denominator("closed_form_double: E must be nonzero");
    const double E2 = E * E;
    return cplx(0.0, -t) / E + 1.0 / E2 - std::exp(cplx(0.0, -t * E)) / E2;
}

// --------------------------------------------------------- i*eps -> 0 limit

IepsResult ieps_limit(const std::function<cplx(double)>& g, const EpsilonSchedule& sched) {
    if (sched.count < 2) throw config_error("ieps_limit needs at least two ladder points");
    if (!(sched.ratio > 0.0 && sched.ratio < 1.0))
        throw config_error("ieps_limit needs a contracting ratio in (0,1)");
    std::vector<cplx> row(sched.count);
    for (int k = 0; k < sched.count; ++k) row[k] = g(sched.at(k));

    IepsResult res;
    if (sched.count >= 3) {
        const double d_prev = std::abs(row[sched.count - 2] - row[sched.count - 3]);
        const double d_last = std::abs(row[sched.count - 1] - row[sched.count - 2]);
        res.diverging = d_last >= d_prev && d_last > 1e-14;
    }

    const int levels = std::min(4, sched.count - 1);
    cplx prev_best = row.back();
    for (int j = 1; j <= levels; ++j) {
        const double rj = std::pow(sched.ratio, j);
        std::vector<cplx> next(row.size() - 1);
        for (std::size_t k = 0; k + 1 < row.size(); ++k)
            next[k] = (row[k + 1] - rj * row[k]) / (1.0 - rj);
        row = std::move(next);
        if (j == levels - 1) prev_best = row.back();
    }
    res.value = row.back();
    res.error_estimate =
        row.size() >= 2 ? std::abs(row.back() - row[row.size() - 2]) : std::abs(row.back() - prev_best);
    return res;
}

// ------------------------------------------------------- stationary phase

StationaryPhase stationary_phase_coeff(const Dispersion& omega, const InteractionKernel& v,
                                       const MomentumGrid& g) {
    if (v.arity != 1) throw config_error("stationary_phase_coeff needs an arity-1 kernel");
    const std::size_t N = g.size();
    if (N < 3) throw config_error("stationary_phase_coeff needs at least three nodes");

    double k0 = 0.0;
    std::size_t best = 0;
    if (omega.analytic()) {
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < N; ++i) {
            const double dv = std::abs(omega.radial_derivative(g.abs_node(i)));
            if (dv < dmin) {
                dmin = dv;
                best = i;
            }
        }
        k0 = g.abs_node(best);
        for (int it = 0; it < 60; ++it) {
            const double d2 = omega.second_radial_derivative(k0);
            if (std::abs(d2) < 1e-10)
                throw numeric_error("stationary_phase_coeff: degenerate critical point");
            const double step = omega.radial_derivative(k0) / d2;
            k0 -= step;
            if (std::abs(step) < 1e-14) break;
        }
        if (std::abs(omega.radial_derivative(k0)) > 1e-8)
            throw numeric_error("stationary_phase_coeff: no critical point on the grid");
    } else {
        if (g.d != 1)
            throw unsupported_error("stationary_phase_coeff: tabulated dispersion needs d = 1");
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i + 1 < N; ++i) {
            const double dv = std::abs((omega.table[i + 1] - omega.table[i - 1]) /
                                       (g.node1(i + 1) - g.node1(i - 1)));
            if (dv < dmin) {
                dmin = dv;
                best = i;
            }
        }
        if (!(dmin < 1e-2))
            throw numeric_error("stationary_phase_coeff: no critical point on the grid");
        const double hl = g.node1(best) - g.node1(best - 1);
        const double hr = g.node1(best + 1) - g.node1(best);
        const double d2 = (omega.table[best + 1] - omega.table[best]) / hr -
                          (omega.table[best] - omega.table[best - 1]) / hl;
        if (std::abs(d2 / (0.5 * (hl + hr))) < 1e-8)
            throw numeric_error("stationary_phase_coeff: degenerate critical point");
        k0 = g.abs_node(best);
    }

    // Kernel value at the critical point: five-point interpolation along the
    // first axis in d = 1, nearest node otherwise.
    cplx v0;
    const double w0 = omega.analytic() ? omega(k0) : omega.table[best];
    if (g.d == 1 && g.rule != model::GridRule::explicit_list) {
        std::size_t c = 0;
        double dist = std::numeric_limits<double>::infinity();
        const double signed_k0 = k0;    // radial point taken on the positive side
        for (std::size_t i = 0; i < N; ++i) {
            const double di = std::abs(g.node1(i) - signed_k0);
            if (di < dist) {
                dist = di;
                c = i;
            }
        }
        const std::size_t span = std::min<std::size_t>(5, N);
        std::size_t a = c >= span / 2 ? c - span / 2 : 0;
        a = std::min(a, N - span);
        const double x = signed_k0;
        v0 = cplx(0.0, 0.0);
        for (std::size_t i = a; i < a + span; ++i) {
            double li = 1.0;
            for (std::size_t j = a; j < a + span; ++j)
                if (j != i) li *= (x - g.node1(j)) / (g.node1(i) - g.node1(j));
            v0 += v.at(i) * li;
        }
    } else {
        std::size_t c = 0;
        double dist = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < N; ++i) {
            const double di = std::abs(g.abs_node(i) - k0);
            if (di < dist) {
                dist = di;
                c = i;
            }
        }
        v0 = v.at(c);
    }

    if (std::abs(w0) < 1e-12)
        throw singular_denominator("stationary_phase_coeff: omega vanishes at the critical point");
    StationaryPhase out;
    out.k0 = k0;
    out.exponent = 0.5 * g.d;
    out.amplitude = std::pow(cplx(0.0, 2.0 * pi), 0.5 * g.d) * std::norm(v0) / (w0 * w0);
    return out;
}

// ------------------------------------------------------ exact term engine

namespace osc {

namespace {
constexpr double kPhaseTol = 1e-12;    // |P| below this integrates as a pure power
constexpr double kMergeStep = 1e-10;   // bucket width for like-term merging
}  // namespace

std::vector<Term> integrate_level(const std::vector<Term>& terms, double next_phase) {
    std::map<std::pair<int, long long>, std::size_t> slot;
    std::vector<Term> out;
    auto add = [&](cplx c, int j, double P) {
        const auto key = std::make_pair(j, std::llround(P / kMergeStep));
        auto it = slot.find(key);
        if (it == slot.end()) {
            slot.emplace(key, out.size());
            out.push_back({c, j, P});    // representative keeps the exact phase
        } else {
            out[it->second].coeff += c;
        }
    };
    for (const Term& term : terms) {
        const int j = term.tpow;
        const double P = term.phase;
        if (std::abs(P) > kPhaseTol) {
            const cplx ip(0.0, P);
            double fact = 1.0;           // j! / (j - r)!
            cplx denom = ip;             // (iP)^{r+1}
            double sgn = 1.0;
            for (int r = 0; r <= j; ++r) {
                add(term.coeff * sgn * fact / denom, j - r, P + next_phase);
                if (r < j) {
                    fact *= static_cast<double>(j - r);
                    sgn = -sgn;
                    denom *= ip;
                }
            }
            // value of the antiderivative at u = 0, subtracted
            add(-term.coeff * sgn * fact / denom, 0, next_phase);
        } else {
            add(term.coeff / static_cast<double>(j + 1), j + 1, next_phase);
        }
    }
    return out;
}

std::vector<Term> ordered_terms(const std::vector<double>& phases, int inner_tpow) {
    if (phases.empty()) throw config_error("ordered_terms: empty phase list");
    std::vector<Term> terms{{cplx(1.0, 0.0), inner_tpow, phases.back()}};
    for (std::size_t j = phases.size() - 1; j-- > 0;)
        terms = integrate_level(terms, phases[j]);
    return integrate_level(terms, 0.0);
}

cplx eval_terms(const std::vector<Term>& terms, double t) {
    std::vector<cplx> vals(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i)
        vals[i] = terms[i].coeff * std::pow(t, terms[i].tpow) *
                  std::exp(cplx(0.0, terms[i].phase * t));
    return pairwise_sum(vals);
}

}  // namespace osc

}  // namespace evo::numerics

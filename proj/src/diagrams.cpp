#include "evo/diagrams.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

namespace evo::diagrams {

using model::CreationPattern;

namespace {

constexpr double kPhaseTol = 1e-9;
constexpr double kFact[8] = {1, 1, 2, 6, 24, 120, 720, 5040};

// ------------------------------------------------------------- compositions

std::vector<std::vector<int>> compositions_of(int n) {
    std::vector<std::vector<int>> out;
    for (int mask = 0; mask < (1 << (n - 1)); ++mask) {
        std::vector<int> parts;
        int run = 1;
        for (int i = 0; i < n - 1; ++i) {
            if (mask >> i & 1) {
                parts.push_back(run);
                run = 1;
            } else {
                ++run;
            }
        }
        parts.push_back(run);
        out.push_back(std::move(parts));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        return a > b;
    });
    return out;
}

std::vector<int> block_slots(const std::vector<int>& comp, std::size_t q) {
    int first = 1;
    for (std::size_t i = 0; i < q; ++i) first += comp[i];
    std::vector<int> slots(comp[q]);
    for (int s = 0; s < comp[q]; ++s) slots[s] = first + s;
    return slots;
}

// ------------------------------------------------------------- piece algebra

// c * u^j * e^{i P u}; P stays real, denominators pick up +i eps when asked.
struct Piece {
    cplx c;
    int j = 0;
    double P = 0.0;
};

cplx inv_den(double P, double eps, int power) {
    const cplx d(-eps, P);  // i (P + i eps)
    cplx out(1.0, 0.0);
    for (int r = 0; r < power; ++r) out /= d;
    return out;
}

void assert_uncut_positive(double P) {
    if (P <= kPhaseTol)
        throw numeric_error("uncut chain requires strictly positive intermediate energies; got " +
                            std::to_string(P));
}

// Upper-limit contribution of one integration level.
void level_upper(const std::vector<Piece>& in, double next, double eps, bool assert_positive,
                 std::vector<Piece>& out) {
    for (const auto& p : in) {
        if (std::abs(p.P) <= kPhaseTol) {
            out.push_back({p.c / double(p.j + 1), p.j + 1, next});
            continue;
        }
        if (assert_positive) assert_uncut_positive(p.P);
        double sgn = 1.0;
        for (int r = 0; r <= p.j; ++r) {
            out.push_back({p.c * sgn * (kFact[p.j] / kFact[p.j - r]) * inv_den(p.P, eps, r + 1),
                           p.j - r, p.P + next});
            sgn = -sgn;
        }
    }
}

// Lower-limit contribution; zero-phase pieces vanish at the lower endpoint.
void level_lower(const std::vector<Piece>& in, double next, double eps,
                 std::vector<Piece>& out) {
    for (const auto& p : in) {
        if (std::abs(p.P) <= kPhaseTol) continue;
        const double sgn = (p.j % 2 == 0) ? 1.0 : -1.0;
        out.push_back({-p.c * sgn * kFact[p.j] * inv_den(p.P, eps, p.j + 1), 0, next});
    }
}

void level_full(const std::vector<Piece>& in, double next, double eps,
                std::vector<Piece>& out) {
    level_upper(in, next, eps, false, out);
    level_lower(in, next, eps, out);
}

// Outermost integral over [0, t], returned as merged oscillatory terms.
struct OscAccum {
    std::map<std::pair<int, std::int64_t>, OscTerm> bag;

    void add(cplx c, int tpow, double phase) {
        const auto key = std::make_pair(tpow, std::llround(phase * 1e9));
        auto it = bag.find(key);
        if (it == bag.end())
            bag.emplace(key, OscTerm{c, tpow, phase});
        else
            it->second.coeff += c;
    }

    void final_level(const std::vector<Piece>& pieces, double eps, cplx scale) {
        for (const auto& p : pieces) {
            const cplx c = scale * p.c;
            if (std::abs(p.P) <= kPhaseTol) {
                add(c / double(p.j + 1), p.j + 1, 0.0);
                continue;
            }
            double sgn = 1.0;
            for (int r = 0; r <= p.j; ++r) {
                add(c * sgn * (kFact[p.j] / kFact[p.j - r]) * inv_den(p.P, eps, r + 1),
                    p.j - r, p.P);
                sgn = -sgn;
            }
            const double lsgn = (p.j % 2 == 0) ? 1.0 : -1.0;
            add(-c * lsgn * kFact[p.j] * inv_den(p.P, eps, p.j + 1), 0, 0.0);
        }
    }

    std::vector<OscTerm> take() {
        std::vector<OscTerm> out;
        out.reserve(bag.size());
        double peak = 0.0;
        for (const auto& [k, v] : bag) peak = std::max(peak, std::abs(v.coeff));
        for (const auto& [k, v] : bag)
            if (std::abs(v.coeff) > 1e-14 * peak) out.push_back(v);
        return out;
    }
};

cplx eval_osc(const std::vector<OscTerm>& terms, double t) {
    std::vector<cplx> vals(terms.size());
    for (std::size_t i = 0; i < vals.size(); ++i)
        vals[i] = terms[i].coeff * std::pow(t, terms[i].tpow) *
                  std::exp(cplx(0.0, terms[i].phase * t));
    return pairwise_sum(vals);
}

// ------------------------------------------------------------- channels

// Per-line mode data: excitation energy and contraction weight.
struct LineTable {
    std::vector<double> energy;
    std::vector<double> weight;
};

enum class PatternKind { creation, field, linear };

PatternKind pattern_kind(const ModelSpec& m) {
    if (const auto* pc = m.pure_creation())
        return pc->pattern == CreationPattern::field ? PatternKind::field
                                                     : PatternKind::creation;
    if (m.linear_coupling()) return PatternKind::linear;
    throw unsupported_error("no hard-coded contraction pattern for variant " + m.variant_name());
}

LineTable line_table(const ModelSpec& m) {
    LineTable tab;
    const std::size_t n = m.grid.size();
    tab.energy.resize(n);
    tab.weight.resize(n);
    const PatternKind kind = pattern_kind(m);
    for (std::size_t i = 0; i < n; ++i) {
        if (kind == PatternKind::field) {
            const auto* pc = m.pure_creation();
            tab.energy[i] = pc->omega.at_node(i, m.grid);
            tab.weight[i] = m.grid.weights[i] * std::norm(pc->v.at(i));
        } else if (kind == PatternKind::creation) {
            const auto* pc = m.pure_creation();
            tab.energy[i] = pc->n * pc->omega.at_node(i, m.grid);
            tab.weight[i] = m.grid.weights[i] * std::norm(pc->v.at(i));
        } else {
            const auto* lc = m.linear_coupling();
            tab.energy[i] = lc->omega.at_node(i, m.grid);
            tab.weight[i] = m.grid.weights[i] * std::norm(lc->v.at(i));
        }
    }
    return tab;
}

// True for the order-4 pair-creation class whose lines share one mode sum.
bool same_mode_class(const ModelSpec& m, int order, const PairingClass& cls) {
    return order == 4 && cls.connected && pattern_kind(m) == PatternKind::creation;
}

void check_channel_budget(std::size_t n_modes, std::size_t n_lines) {
    double total = 1.0;
    for (std::size_t l = 0; l < n_lines; ++l) total *= double(n_modes);
    if (total > 2e6)
        throw numeric_error("contraction channel sum too large (" + std::to_string(n_modes) +
                            " modes over " + std::to_string(n_lines) +
                            " lines); use a compact explicit mode set");
}

// Calls fn(weight, phases) for every contraction channel of one class.
template <class Fn>
void for_each_channel(const ModelSpec& m, int order, const PairingClass& cls,
                      const LineTable& tab, Fn&& fn) {
    const std::size_t n = tab.energy.size();
    std::vector<double> phases(order, 0.0);
    if (same_mode_class(m, order, cls)) {
        for (std::size_t j = 0; j < n; ++j) {
            std::fill(phases.begin(), phases.end(), 0.0);
            for (const auto& [a, b] : cls.lines) {
                phases[b - 1] += tab.energy[j];
                phases[a - 1] -= tab.energy[j];
            }
            fn(tab.weight[j] * tab.weight[j], phases);
        }
        return;
    }
    const std::size_t L = cls.lines.size();
    check_channel_budget(n, L);
    std::vector<std::size_t> idx(L, 0);
    while (true) {
        std::fill(phases.begin(), phases.end(), 0.0);
        double w = 1.0;
        for (std::size_t l = 0; l < L; ++l) {
            const auto& [a, b] = cls.lines[l];
            const double e = tab.energy[idx[l]];
            phases[b - 1] += e;
            phases[a - 1] -= e;
            w *= tab.weight[idx[l]];
        }
        fn(w, phases);
        std::size_t l = 0;
        while (l < L && ++idx[l] == n) idx[l++] = 0;
        if (l == L) break;
    }
}

cplx dyson_prefactor(int order) {
    // (-i)^order
    switch (order & 3) {
        case 0: return {1.0, 0.0};
        case 1: return {0.0, -1.0};
        case 2: return {-1.0, 0.0};
        default: return {0.0, 1.0};
    }
}

void check_order(int order) {
    if (order < 2 || order > 4)
        throw unsupported_error("bracket terms are tabulated for orders 2..4, got " +
                                std::to_string(order));
}

void check_term(const BracketTerm& term) {
    check_order(term.order);
    if (term.composition.empty())
        throw config_error("bracket term has an empty composition");
    int sum = 0;
    for (int k : term.composition) {
        if (k < 1) throw config_error("bracket term composition parts must be >= 1");
        sum += k;
    }
    if (sum != term.order)
        throw config_error("bracket term composition does not sum to its order");
}

void check_eps(const ModelSpec& m, double eps) {
    if (m.decaying && eps <= 0.0)
        throw config_error("decaying model requires a positive eps for bracket evaluation");
}

// ------------------------------------------------------------- tail route

// Time-domain moments of the connected order-4 kernel over the gap octant:
// A = int G, B = -int S G, C(t) = int_{S>t} (S - t) G with S the total span.
// G factorizes through a tabulated one-gap kernel, so the cost is cubic in the
// box resolution instead of exponential in the line count.

struct KernelTable {
    std::vector<cplx> f;
    double h = 0.005;

    cplx at(double tau) const {
        const double x = tau / h;
        const auto i0 = static_cast<std::size_t>(x);
        const double fr = x - double(i0);
        return f[i0] * (1.0 - fr) + f[i0 + 1] * fr;
    }
};

KernelTable build_kernel_table(const std::vector<double>& energy,
                               const std::vector<double>& weight, double taumax, double h) {
    KernelTable tab;
    tab.h = h;
    const auto len = static_cast<std::size_t>(taumax / h) + 3;
    tab.f.assign(len, cplx(0.0, 0.0));
    for (std::size_t m = 0; m < energy.size(); ++m) {
        const cplx step = std::exp(cplx(0.0, -energy[m] * h));
        cplx z(1.0, 0.0);
        for (std::size_t k = 0; k < len; ++k) {
            tab.f[k] += weight[m] * z;
            z *= step;
        }
    }
    return tab;
}

struct TailMoments {
    cplx a0{};                 // int G e^{-eps S}
    cplx a1{};                 // int S G e^{-eps S}
    std::vector<cplx> m1;      // int_{S>t} (S-t) G e^{-eps S} per sample t
};

// G evaluated from the six base spans x, y, z, x+y, y+z, x+y+z.
struct GapKernel {
    // field route: per-class span powers over the six base spans
    struct ClassPow {
        std::array<int, 6> pow{};
        double count = 1.0;
    };
    std::vector<ClassPow> classes;
    bool pair_route = false;   // pair creation: single kernel at span x+2y+z
    double pair_count = 4.0;
    KernelTable tab;
    cplx prefactor{1.0, 0.0};

    cplx eval(double x, double y, double z) const {
        if (pair_route) return prefactor * pair_count * tab.at(x + 2.0 * y + z);
        const std::array<double, 6> span{x, y, z, x + y, y + z, x + y + z};
        std::array<cplx, 6> base;
        for (int s = 0; s < 6; ++s) base[s] = tab.at(span[s]);
        cplx total(0.0, 0.0);
        for (const auto& cl : classes) {
            cplx prod(1.0, 0.0);
            for (int s = 0; s < 6; ++s)
                for (int r = 0; r < cl.pow[s]; ++r) prod *= base[s];
            total += cl.count * prod;
        }
        return prefactor * total;
    }
};

int span_index(int a, int b) {
    // spans: 0 x, 1 y, 2 z, 3 x+y, 4 y+z, 5 x+y+z for line (a, b), a < b
    if (a == 1 && b == 2) return 0;
    if (a == 2 && b == 3) return 1;
    if (a == 3 && b == 4) return 2;
    if (a == 1 && b == 3) return 3;
    if (a == 2 && b == 4) return 4;
    return 5;  // (1,4)
}

GapKernel build_gap_kernel(const ModelSpec& m) {
    GapKernel gk;
    const LineTable tab = line_table(m);
    const PatternKind kind = pattern_kind(m);
    gk.prefactor = dyson_prefactor(4);
    const double taumax = (kind == PatternKind::creation ? 2000.0 : 1500.0);
    if (kind == PatternKind::creation) {
        gk.pair_route = true;
        std::vector<double> wsq(tab.weight.size());
        for (std::size_t i = 0; i < wsq.size(); ++i) wsq[i] = tab.weight[i] * tab.weight[i];
        gk.tab = build_kernel_table(tab.energy, wsq, taumax, 0.005);
        return gk;
    }
    gk.tab = build_kernel_table(tab.energy, tab.weight, taumax, 0.005);
    for (const auto& cls : pairing_classes(m, 4)) {
        if (!cls.connected) continue;
        GapKernel::ClassPow cp;
        cp.count = cls.pairing_count;
        for (const auto& [a, b] : cls.lines) cp.pow[span_index(a, b)] += 1;
        gk.classes.push_back(cp);
    }
    return gk;
}

TailMoments tail_moments(const GapKernel& gk, const std::vector<double>& ts, double eps,
                         double box, double dx, double trans, double big, double xstep) {
    TailMoments out;
    out.m1.assign(ts.size(), cplx(0.0, 0.0));
    const auto nb = static_cast<std::size_t>(box / dx);

    auto absorb = [&](double x, double y, double z, double vol) {
        const double S = x + y + z;
        const cplx g = gk.eval(x, y, z) * std::exp(-eps * S) * vol;
        out.a0 += g;
        out.a1 += S * g;
        for (std::size_t i = 0; i < ts.size(); ++i)
            if (S > ts[i]) out.m1[i] += (S - ts[i]) * g;
    };

    for (std::size_t ix = 0; ix < nb; ++ix) {
        const double x = (double(ix) + 0.5) * dx;
        for (std::size_t iy = 0; iy < nb; ++iy) {
            const double y = (double(iy) + 0.5) * dx;
            for (std::size_t iz = 0; iz < nb; ++iz)
                absorb(x, y, (double(iz) + 0.5) * dx, dx * dx * dx);
        }
    }

    // One gap large, the other two within the box.
    const auto nt = static_cast<std::size_t>(box / trans);
    const auto nx = static_cast<std::size_t>((big - box) / xstep);
    for (int axis = 0; axis < 3; ++axis) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const double u = box + (double(ix) + 0.5) * xstep;
            for (std::size_t ip = 0; ip < nt; ++ip) {
                const double p = (double(ip) + 0.5) * trans;
                for (std::size_t iq = 0; iq < nt; ++iq) {
                    const double q = (double(iq) + 0.5) * trans;
                    const double vol = xstep * trans * trans;
                    if (axis == 0)
                        absorb(u, p, q, vol);
                    else if (axis == 1)
                        absorb(p, u, q, vol);
                    else
                        absorb(p, q, u, vol);
                }
            }
        }
    }
    return out;
}

}  // namespace

// ----------------------------------------------------------------- terms

std::vector<bool> BracketTerm::cuts() const {
    std::vector<bool> out;
    out.reserve(order - 1);
    for (std::size_t q = composition.size(); q-- > 0;) {
        for (int s = 0; s < composition[q] - 1; ++s) out.push_back(false);
        if (q > 0) out.push_back(true);
    }
    return out;
}

std::vector<BracketTerm> enumerate_terms(int order) {
    check_order(order);
    std::vector<BracketTerm> out;
    for (auto& comp : compositions_of(order)) {
        BracketTerm term;
        term.order = order;
        term.oscillatory = comp.size() > 1;
        term.sign = (comp.size() % 2 == 1) ? 1 : -1;
        for (std::size_t q = 0; q < comp.size(); ++q) {
            const auto slots = block_slots(comp, q);
            const bool first_block = (q == 0);
            // Longest partial sum first; the uncut piece's full sum vanishes
            // identically and is omitted.
            for (std::size_t start = (first_block && comp.size() == 1) ? 1 : 0;
                 start < slots.size(); ++start)
                term.denominator_chain.emplace_back(slots.begin() + start, slots.end());
        }
        term.composition = std::move(comp);
        out.push_back(std::move(term));
    }
    return out;
}

// ----------------------------------------------------------------- patterns

std::vector<PairingClass> pairing_classes(const ModelSpec& m, int order) {
    check_order(order);
    const PatternKind kind = pattern_kind(m);
    if (order == 3) return {};  // odd leg count: no complete pairings

    using P = std::pair<int, int>;
    std::vector<PairingClass> out;
    if (kind == PatternKind::field) {
        if (order == 2) {
            out.push_back({{P{1, 2}, P{1, 2}, P{1, 2}}, 6.0, true});
            return out;
        }
        out.push_back({{P{1, 2}, P{1, 3}, P{1, 4}, P{2, 3}, P{2, 4}, P{3, 4}}, 1296.0, true});
        out.push_back({{P{1, 2}, P{1, 2}, P{1, 3}, P{2, 4}, P{3, 4}, P{3, 4}}, 324.0, true});
        out.push_back({{P{1, 2}, P{1, 2}, P{1, 4}, P{2, 3}, P{3, 4}, P{3, 4}}, 324.0, true});
        out.push_back({{P{1, 2}, P{1, 3}, P{1, 3}, P{2, 4}, P{2, 4}, P{3, 4}}, 324.0, true});
        out.push_back({{P{1, 2}, P{1, 4}, P{1, 4}, P{2, 3}, P{2, 3}, P{3, 4}}, 324.0, true});
        out.push_back({{P{1, 3}, P{1, 3}, P{1, 4}, P{2, 3}, P{2, 4}, P{2, 4}}, 324.0, true});
        out.push_back({{P{1, 3}, P{1, 4}, P{1, 4}, P{2, 3}, P{2, 3}, P{2, 4}}, 324.0, true});
        out.push_back({{P{1, 2}, P{1, 2}, P{1, 2}, P{3, 4}, P{3, 4}, P{3, 4}}, 36.0, false});
        out.push_back({{P{1, 3}, P{1, 3}, P{1, 3}, P{2, 4}, P{2, 4}, P{2, 4}}, 36.0, false});
        out.push_back({{P{1, 4}, P{1, 4}, P{1, 4}, P{2, 3}, P{2, 3}, P{2, 3}}, 36.0, false});
        return out;
    }
    if (kind == PatternKind::creation) {
        if (order == 2) {
            out.push_back({{P{1, 2}}, 1.0, true});
            return out;
        }
        const auto* pc = m.pure_creation();
        if (pc->n != 2)
            throw unsupported_error("order-4 contraction table is tabulated for pair creation "
                                    "(n = 2), got n = " + std::to_string(pc->n));
        out.push_back({{P{1, 3}, P{2, 4}}, 4.0, true});
        out.push_back({{P{1, 2}, P{3, 4}}, 1.0, false});
        out.push_back({{P{1, 4}, P{2, 3}}, 1.0, false});
        out.push_back({{P{1, 3}, P{2, 4}}, 1.0, false});
        return out;
    }
    // linear coupling
    if (order == 2) {
        out.push_back({{P{1, 2}}, 1.0, true});
        return out;
    }
    out.push_back({{P{1, 2}, P{3, 4}}, 1.0, false});
    out.push_back({{P{1, 4}, P{2, 3}}, 1.0, false});
    out.push_back({{P{1, 3}, P{2, 4}}, 1.0, false});
    return out;
}

// ----------------------------------------------------------------- evaluation

cplx evaluate_term(const BracketTerm& term, const ModelSpec& m, double t, double eps) {
    check_term(term);
    check_eps(m, eps);
    const int n = term.order;
    const auto cuts = term.cuts();
    const bool uncut = term.composition.size() == 1;
    const LineTable tab = line_table(m);

    cplx total(0.0, 0.0);
    for (const auto& cls : pairing_classes(m, n)) {
        const bool guard = uncut && cls.connected && !m.decaying && eps == 0.0;
        cplx cls_sum(0.0, 0.0);
        for_each_channel(m, n, cls, tab, [&](double w, const std::vector<double>& ph) {
            std::vector<Piece> pieces{{cplx(1.0, 0.0), 0, ph[n - 1]}}, next;
            for (int k = n - 1; k >= 1; --k) {
                next.clear();
                if (cuts[n - 1 - k])
                    level_lower(pieces, ph[k - 1], eps, next);
                else
                    level_upper(pieces, ph[k - 1], eps, guard, next);
                pieces.swap(next);
            }
            OscAccum acc;
            acc.final_level(pieces, eps, cplx(w, 0.0));
            cls_sum += eval_osc(acc.take(), t);
        });
        total += cls.pairing_count * cls_sum;
    }
    return dyson_prefactor(n) * total;
}

cplx order_total(const ModelSpec& m, int order, double t, double eps, bool connected_only) {
    check_order(order);
    check_eps(m, eps);
    const LineTable tab = line_table(m);
    cplx total(0.0, 0.0);
    for (const auto& cls : pairing_classes(m, order)) {
        if (connected_only && !cls.connected) continue;
        cplx cls_sum(0.0, 0.0);
        for_each_channel(m, order, cls, tab, [&](double w, const std::vector<double>& ph) {
            std::vector<Piece> pieces{{cplx(1.0, 0.0), 0, ph[order - 1]}}, next;
            for (int k = order - 1; k >= 1; --k) {
                next.clear();
                level_full(pieces, ph[k - 1], eps, next);
                pieces.swap(next);
            }
            OscAccum acc;
            acc.final_level(pieces, eps, cplx(w, 0.0));
            cls_sum += eval_osc(acc.take(), t);
        });
        total += cls.pairing_count * cls_sum;
    }
    return dyson_prefactor(order) * total;
}

std::vector<cplx> evaluate_all(const std::vector<BracketTerm>& terms, const ModelSpec& m,
                               double t, double eps) {
    std::vector<cplx> out(terms.size());
    parallel_chunks(terms.size(), [&](std::size_t i) {
        out[i] = evaluate_term(terms[i], m, t, eps);
    });
    return out;
}

// ----------------------------------------------------------------- split

SplitABC split_ABC(const std::vector<BracketTerm>& terms, const ModelSpec& m,
                   const numerics::TimeGrid& sample) {
    if (terms.empty()) throw config_error("split_ABC needs the enumerated term list");
    const int order = terms[0].order;
    check_order(order);
    for (const auto& term : terms) {
        check_term(term);
        if (term.order != order)
            throw config_error("split_ABC received terms of mixed orders");
    }
    if (terms.size() != std::size_t(1) << (order - 1))
        throw config_error("split_ABC needs the complete term list of its order");
    if (m.decaying)
        throw config_error("split_ABC requires a non-decaying model; use the decay route");

    SplitABC out;
    const bool explicit_modes = m.grid.rule == GridRule::explicit_list;
    if (order == 2 || explicit_modes) {
        // Exact oscillatory split of the connected channel sums.
        const LineTable tab = line_table(m);
        OscAccum acc;
        for (const auto& cls : pairing_classes(m, order)) {
            if (!cls.connected) continue;
            const cplx scale = dyson_prefactor(order) * cls.pairing_count;
            for_each_channel(m, order, cls, tab, [&](double w, const std::vector<double>& ph) {
                std::vector<Piece> pieces{{cplx(1.0, 0.0), 0, ph[order - 1]}}, next;
                for (int k = order - 1; k >= 1; --k) {
                    next.clear();
                    level_full(pieces, ph[k - 1], 0.0, next);
                    pieces.swap(next);
                }
                acc.final_level(pieces, 0.0, scale * w);
            });
        }
        for (auto& term : acc.take()) {
            if (term.phase == 0.0 && term.tpow == 1)
                out.A += term.coeff;
            else if (term.phase == 0.0 && term.tpow == 0)
                out.B += term.coeff;
            else
                out.c_terms.push_back(term);
        }
        auto held = std::make_shared<std::vector<OscTerm>>(out.c_terms);
        out.C = [held](double t) { return eval_osc(*held, t); };
        return out;
    }

    // Quadrature grid at order 4: time-domain tail route with two damping
    // levels; the spread between them is the error estimate.
    const GapKernel gk = build_gap_kernel(m);
    std::vector<double> ts = sample.t;
    double tmax = 0.0;
    for (double t : ts) tmax = std::max(tmax, t);
    const double big = std::max(400.0, 2.0 * tmax);
    const std::array<double, 2> eps{0.1, 0.05};
    std::array<TailMoments, 2> mm;
    for (int e = 0; e < 2; ++e)
        mm[e] = tail_moments(gk, ts, eps[e], 36.0, 0.12, 0.3, big, 0.15);

    out.A = mm[1].a0;
    out.B = -mm[1].a1;
    double spread = std::max(std::abs(mm[0].a0 - mm[1].a0), std::abs(mm[0].a1 - mm[1].a1));
    for (std::size_t i = 0; i < ts.size(); ++i)
        spread = std::max(spread, std::abs(mm[0].m1[i] - mm[1].m1[i]));
    out.error_estimate = spread;

    auto times = std::make_shared<std::vector<double>>(ts);
    auto cvals = std::make_shared<std::vector<cplx>>(mm[1].m1);
    out.C = [times, cvals](double t) {
        const auto& tt = *times;
        for (std::size_t i = 0; i < tt.size(); ++i)
            if (std::abs(tt[i] - t) <= 1e-9 * (1.0 + std::abs(t))) return (*cvals)[i];
        // linear interpolation between sampled times
        for (std::size_t i = 0; i + 1 < tt.size(); ++i)
            if (t > tt[i] && t < tt[i + 1]) {
                const double fr = (t - tt[i]) / (tt[i + 1] - tt[i]);
                return (*cvals)[i] * (1.0 - fr) + (*cvals)[i + 1] * fr;
            }
        throw numeric_error("tail-route C(t) is sampled on the provided time grid; t = " +
                            std::to_string(t) + " is outside it");
    };
    return out;
}

// ----------------------------------------------------------------- export

nlohmann::json term_json(const BracketTerm& term, cplx value) {
    nlohmann::json j;
    j["order"] = term.order;
    j["composition"] = term.composition;
    j["sign"] = term.sign;
    j["denominator_chain"] = term.denominator_chain;
    j["value_re"] = value.real();
    j["value_im"] = value.imag();
    return j;
}

}  // namespace evo::diagrams

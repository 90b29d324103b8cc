#include "evo/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

namespace evo::model {

using nlohmann::json;

// ---------------------------------------------------------------- dispersion

Dispersion Dispersion::relativistic(double mass) {
    if (!(mass > 0.0)) throw config_error("relativistic dispersion needs mass > 0");
    Dispersion d;
    d.kind = DispersionKind::relativistic;
    d.param = mass;
    return d;
}

Dispersion Dispersion::nonrel_shifted(double omega0) {
    if (!(omega0 > 0.0)) throw config_error("nonrel_shifted dispersion needs omega0 > 0");
    Dispersion d;
    d.kind = DispersionKind::nonrel_shifted;
    d.param = omega0;
    return d;
}

Dispersion Dispersion::quadratic_shifted(double omega0) {
    if (!(omega0 > 0.0)) throw config_error("quadratic_shifted dispersion needs omega0 > 0");
    Dispersion d;
    d.kind = DispersionKind::quadratic_shifted;
    d.param = omega0;
    return d;
}

Dispersion Dispersion::tabulated(std::vector<double> values) {
    if (values.empty()) throw config_error("tabulated dispersion needs at least one value");
    Dispersion d;
    d.kind = DispersionKind::tabulated;
    d.table = std::move(values);
    return d;
}

double Dispersion::operator()(double kabs) const {
    switch (kind) {
        case DispersionKind::relativistic:
            return std::sqrt(kabs * kabs + param * param);
        case DispersionKind::nonrel_shifted:
            return 0.5 * kabs * kabs - param;
        case DispersionKind::quadratic_shifted:
            return kabs * kabs - param;
        case DispersionKind::tabulated:
            throw unsupported_error("tabulated dispersion has node values only");
    }
    throw unsupported_error("unknown dispersion kind");
}

double Dispersion::radial_derivative(double kabs) const {
    switch (kind) {
        case DispersionKind::relativistic:
            return kabs / std::sqrt(kabs * kabs + param * param);
        case DispersionKind::nonrel_shifted:
            return kabs;
        case DispersionKind::quadratic_shifted:
            return 2.0 * kabs;
        case DispersionKind::tabulated:
            throw unsupported_error("tabulated dispersion has no analytic derivative");
    }
    throw unsupported_error("unknown dispersion kind");
}

double Dispersion::second_radial_derivative(double kabs) const {
    switch (kind) {
        case DispersionKind::relativistic: {
            const double w = std::sqrt(kabs * kabs + param * param);
            return param * param / (w * w * w);
        }
        case DispersionKind::nonrel_shifted:
            return 1.0;
        case DispersionKind::quadratic_shifted:
            return 2.0;
        case DispersionKind::tabulated:
            throw unsupported_error("tabulated dispersion has no analytic derivative");
    }
    throw unsupported_error("unknown dispersion kind");
}

double Dispersion::at_node(std::size_t i, const MomentumGrid& g) const {
    if (kind == DispersionKind::tabulated) {
        if (i >= table.size()) throw config_error("tabulated dispersion shorter than grid");
        return table[i];
    }
    return (*this)(g.abs_node(i));
}

// ------------------------------------------------------------ momentum grid

double MomentumGrid::abs_node(std::size_t i) const {
    if (d == 1) return std::abs(nodes[i]);
    double s = 0.0;
    for (int a = 0; a < d; ++a) s += nodes[i * d + a] * nodes[i * d + a];
    return std::sqrt(s);
}

cplx MomentumGrid::integrate(const std::vector<cplx>& samples) const {
    if (samples.size() != size()) throw numeric_error("integrate: sample count != node count");
    std::vector<cplx> terms(size());
    for (std::size_t i = 0; i < size(); ++i) {
        if (!std::isfinite(samples[i].real()) || !std::isfinite(samples[i].imag()))
            throw numeric_error("integrate: non-finite sample at node " + std::to_string(i));
        terms[i] = weights[i] * samples[i];
    }
    return pairwise_sum(terms);
}

double MomentumGrid::integrate(const std::vector<double>& samples) const {
    if (samples.size() != size()) throw numeric_error("integrate: sample count != node count");
    std::vector<double> terms(size());
    for (std::size_t i = 0; i < size(); ++i) {
        if (!std::isfinite(samples[i]))
            throw numeric_error("integrate: non-finite sample at node " + std::to_string(i));
        terms[i] = weights[i] * samples[i];
    }
    return pairwise_sum(terms);
}

int default_n_axis(int d) {
    switch (d) {
        case 1: return 64;
        case 2: return 24;
        default: return 12;
    }
}

MomentumGrid build_grid(int d, int n_axis, double cutoff, GridRule rule) {
    if (d < 1) throw config_error("build_grid: d must be >= 1");
    if (n_axis < 2) throw config_error("build_grid: n_axis must be >= 2");
    if (!(cutoff > 0.0)) throw config_error("build_grid: cutoff must be > 0");
    if (rule == GridRule::explicit_list)
        throw config_error("build_grid: explicit node lists use explicit_grid()");

    MomentumGrid g;
    g.d = d;
    g.n_axis = n_axis;
    g.cutoff = cutoff;
    g.rule = rule;
    if (rule == GridRule::gauss_legendre) {
        gauss_legendre_ab(n_axis, -cutoff, cutoff, g.axis_nodes, g.axis_weights);
    } else {
        const double h = 2.0 * cutoff / (n_axis - 1);
        g.axis_nodes.resize(n_axis);
        g.axis_weights.resize(n_axis);
        for (int i = 0; i < n_axis; ++i) {
            g.axis_nodes[i] = -cutoff + h * i;
            g.axis_weights[i] = (i == 0 || i == n_axis - 1) ? 0.5 * h : h;
        }
    }
    std::size_t total = 1;
    for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(n_axis);
    g.nodes.resize(total * d);
    g.weights.resize(total);
    std::vector<int> idx(d, 0);
    for (std::size_t i = 0; i < total; ++i) {
        double w = 1.0;
        for (int a = 0; a < d; ++a) {
            g.nodes[i * d + a] = g.axis_nodes[idx[a]];
            w *= g.axis_weights[idx[a]];
        }
        g.weights[i] = w;
        for (int a = d - 1; a >= 0; --a) {
            if (++idx[a] < n_axis) break;
            idx[a] = 0;
        }
    }
    return g;
}

MomentumGrid explicit_grid(std::vector<double> nodes, std::vector<double> weights, int ring) {
    if (nodes.empty()) throw config_error("explicit_grid: empty node list");
    if (weights.empty()) weights.assign(nodes.size(), 1.0);
    if (weights.size() != nodes.size())
        throw config_error("explicit_grid: weights/nodes length mismatch");
    if (ring > 0 && static_cast<std::size_t>(ring) != nodes.size())
        throw config_error("explicit_grid: ring modulus must equal node count");
    MomentumGrid g;
    g.d = 1;
    g.n_axis = static_cast<int>(nodes.size());
    g.cutoff = 0.0;
    for (double k : nodes) g.cutoff = std::max(g.cutoff, std::abs(k));
    g.rule = GridRule::explicit_list;
    g.axis_nodes = nodes;
    g.axis_weights = weights;
    g.nodes = std::move(nodes);
    g.weights = std::move(weights);
    g.ring_modulus = ring;
    return g;
}

std::size_t momentum_minus(const MomentumGrid& g, std::size_t p, std::size_t q) {
    if (g.ring_modulus > 0) {
        const long L = g.ring_modulus;
        long r = (static_cast<long>(p) - static_cast<long>(q)) % L;
        if (r < 0) r += L;
        return static_cast<std::size_t>(r);
    }
    const double target = g.node1(p) - g.node1(q);
    for (std::size_t i = 0; i < g.size(); ++i)
        if (std::abs(g.node1(i) - target) < 1e-12) return i;
    throw config_error("momentum combination p-q is not a grid node; use a closed mode set");
}

// -------------------------------------------------------- interaction kernel

InteractionKernel InteractionKernel::gaussian(const MomentumGrid& g) {
    InteractionKernel k;
    k.arity = 1;
    k.values.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double a = g.abs_node(i);
        k.values[i] = std::exp(-0.5 * a * a);
    }
    return k;
}

InteractionKernel InteractionKernel::omega_gaussian(const MomentumGrid& g, const Dispersion& w) {
    InteractionKernel k = gaussian(g);
    for (std::size_t i = 0; i < g.size(); ++i) k.values[i] *= w.at_node(i, g);
    return k;
}

InteractionKernel InteractionKernel::table(std::vector<cplx> values, int arity, bool symmetric) {
    if (values.empty()) throw config_error("kernel table must be non-empty");
    InteractionKernel k;
    k.arity = arity;
    k.values = std::move(values);
    k.symmetric = symmetric;
    return k;
}

// ------------------------------------------------------------- model variants

std::string ModelSpec::variant_name() const {
    if (pure_creation()) return "pure_creation";
    if (linear_coupling()) return "linear_coupling";
    if (cubic_ti()) return "cubic_ti";
    return "lee";
}

ModelSpec ModelSpec::make(std::variant<PureCreation, LinearCoupling, CubicTI, LeeModel> v,
                          double lambda, MomentumGrid grid) {
    if (lambda < 0.0) throw config_error("lambda must be >= 0");
    ModelSpec m;
    m.variant = std::move(v);
    m.lambda = lambda;
    m.grid = std::move(grid);
    const std::size_t N = m.grid.size();

    auto check_kernel = [&](const InteractionKernel& k, int arity, const char* who) {
        std::size_t need = 1;
        for (int a = 0; a < arity; ++a) need *= N;
        if (k.arity != arity || k.values.size() != need)
            throw config_error(std::string(who) + ": kernel arity/size mismatch");
        for (const cplx& c : k.values)
            if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
                throw config_error(std::string(who) + ": non-finite kernel sample");
    };

    if (const auto* pc = m.pure_creation()) {
        if (pc->n < 1) throw config_error("pure_creation: arity must be >= 1");
        if (pc->pattern == CreationPattern::field && pc->n != 3)
            throw config_error("pure_creation: field pattern supports arity 3 only");
        check_kernel(pc->v, 1, "pure_creation");
    } else if (const auto* lc = m.linear_coupling()) {
        check_kernel(lc->v, 1, "linear_coupling");
    } else if (const auto* ct = m.cubic_ti()) {
        check_kernel(ct->v, 2, "cubic_ti");
        for (std::size_t p = 0; p < N; ++p)
            for (std::size_t q = 0; q < N; ++q) {
                const std::size_t r = momentum_minus(m.grid, p, q);
                const cplx a = ct->v.at(p, q, N), b = ct->v.at(p, r, N);
                if (std::abs(a - b) > 1e-12 * (1.0 + std::abs(a)))
                    throw config_error("cubic_ti: v(p,q) must be symmetric under q <-> p-q");
            }
    } else if (const auto* lm = m.lee()) {
        check_kernel(lm->v, 2, "lee");
    }

    bool indef = false;
    if (const auto* pc = m.pure_creation())
        indef = pc->omega.sign_indefinite();
    else if (const auto* lc = m.linear_coupling())
        indef = lc->omega.sign_indefinite();
    else if (const auto* ct = m.cubic_ti())
        indef = ct->omega.sign_indefinite();
    else
        indef = m.lee()->omega_a.sign_indefinite() || m.lee()->omega_b.sign_indefinite() ||
                m.lee()->omega_c.sign_indefinite();
    const double emin = min_vertex_energy(m);
    m.decaying = indef;
    if (!m.decaying && emin < 1e-12)
        throw config_error("vertex energy not bounded away from zero: min " + fmt17(emin));
    return m;
}

double energy_total(const ModelSpec& m, const std::vector<std::size_t>& momenta) {
    const MomentumGrid& g = m.grid;
    if (const auto* pc = m.pure_creation()) {
        if (momenta.size() != static_cast<std::size_t>(pc->n))
            throw config_error("energy_total: pure_creation expects an n-tuple");
        double e = 0.0;
        for (std::size_t i : momenta) e += pc->omega.at_node(i, g);
        return e;
    }
    if (const auto* lc = m.linear_coupling()) {
        if (momenta.size() != 1) throw config_error("energy_total: linear_coupling expects one node");
        return lc->omega.at_node(momenta[0], g);
    }
    if (const auto* ct = m.cubic_ti()) {
        if (momenta.size() != 2) throw config_error("energy_total: cubic_ti expects (p, q)");
        const std::size_t p = momenta[0], q = momenta[1], r = momentum_minus(g, p, q);
        return ct->omega.at_node(r, g) + ct->omega.at_node(q, g) - ct->omega.at_node(p, g);
    }
    const auto* lm = m.lee();
    if (momenta.size() != 2) throw config_error("energy_total: lee expects (p, q)");
    const std::size_t p = momenta[0], q = momenta[1], r = momentum_minus(g, p, q);
    return lm->omega_a.at_node(q, g) + lm->omega_b.at_node(r, g) - lm->omega_c.at_node(p, g);
}

double min_vertex_energy(const ModelSpec& m) {
    const std::size_t N = m.grid.size();
    double emin = std::numeric_limits<double>::infinity();
    if (const auto* pc = m.pure_creation()) {
        // Vertex tuples cover all node multisets; the minimum total is n
        // copies of the smallest single-node energy.
        double wmin = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < N; ++i)
            wmin = std::min(wmin, pc->omega.at_node(i, m.grid));
        emin = pc->n * wmin;
    } else if (m.linear_coupling()) {
        for (std::size_t i = 0; i < N; ++i)
            emin = std::min(emin, energy_total(m, {i}));
    } else {
        for (std::size_t p = 0; p < N; ++p)
            for (std::size_t q = 0; q < N; ++q)
                emin = std::min(emin, energy_total(m, {p, q}));
    }
    return emin;
}

// ------------------------------------------------------------ configuration

namespace {

void reject_unknown(const json& section, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (auto it = section.begin(); it != section.end(); ++it)
        if (!allowed.count(it.key()))
            throw config_error("unknown key '" + where + "." + it.key() + "'");
}

std::vector<double> dlist(const json& j) {
    std::vector<double> v;
    for (const auto& x : j) v.push_back(x.get<double>());
    return v;
}

Dispersion dispersion_from(const json& j) {
    reject_unknown(j, {"kind", "params"}, "dispersion");
    const std::string kind = j.at("kind").get<std::string>();
    const json params = j.value("params", json::object());
    if (kind == "relativistic") {
        reject_unknown(params, {"mass"}, "dispersion.params");
        return Dispersion::relativistic(params.at("mass").get<double>());
    }
    if (kind == "nonrel_shifted") {
        reject_unknown(params, {"omega0"}, "dispersion.params");
        return Dispersion::nonrel_shifted(params.at("omega0").get<double>());
    }
    if (kind == "quadratic_shifted") {
        reject_unknown(params, {"omega0"}, "dispersion.params");
        return Dispersion::quadratic_shifted(params.at("omega0").get<double>());
    }
    if (kind == "tabulated") {
        reject_unknown(params, {"values"}, "dispersion.params");
        return Dispersion::tabulated(dlist(params.at("values")));
    }
    throw config_error("unknown dispersion.kind '" + kind + "'");
}

MomentumGrid grid_from(const json& j) {
    reject_unknown(j, {"d", "n_axis", "cutoff", "rule", "nodes", "weights", "ring"}, "grid");
    const std::string rule = j.value("rule", std::string("gauss_legendre"));
    if (rule == "explicit") {
        std::vector<double> nodes = dlist(j.at("nodes"));
        std::vector<double> weights =
            j.contains("weights") ? dlist(j.at("weights")) : std::vector<double>{};
        return explicit_grid(std::move(nodes), std::move(weights), j.value("ring", 0));
    }
    GridRule r;
    if (rule == "gauss_legendre")
        r = GridRule::gauss_legendre;
    else if (rule == "uniform_trapezoid")
        r = GridRule::uniform_trapezoid;
    else
        throw config_error("unknown grid.rule '" + rule + "'");
    const int d = j.at("d").get<int>();
    const int n_axis = j.contains("n_axis") ? j.at("n_axis").get<int>() : default_n_axis(d);
    const double cutoff = j.value("cutoff", 6.0);
    return build_grid(d, n_axis, cutoff, r);
}

InteractionKernel kernel_from(const json& j, const MomentumGrid& g, const Dispersion& w,
                              int arity) {
    reject_unknown(j, {"kind", "values"}, "model.coupling");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gaussian") return InteractionKernel::gaussian(g);
    if (kind == "omega_gaussian") return InteractionKernel::omega_gaussian(g, w);
    if (kind == "table") {
        std::vector<cplx> vals;
        for (const auto& x : j.at("values")) vals.emplace_back(x.get<double>(), 0.0);
        return InteractionKernel::table(std::move(vals), arity, true);
    }
    throw config_error("unknown model.coupling.kind '" + kind + "'");
}

}  // namespace

ModelSpec model_from_json(const std::string& json_text) {
    json root = json::parse(json_text);
    const json jm = root.at("model");
    reject_unknown(jm, {"variant", "lambda", "n", "pattern", "coupling", "vtable"}, "model");
    const std::string variant = jm.at("variant").get<std::string>();
    const double lambda = jm.value("lambda", 0.0);
    MomentumGrid grid = grid_from(root.at("grid"));

    if (variant == "lee") {
        const json jd = root.at("dispersion");
        reject_unknown(jd, {"kind", "params"}, "dispersion");
        if (jd.at("kind").get<std::string>() != "tabulated")
            throw config_error("lee model needs tabulated per-species dispersions");
        const json params = jd.at("params");
        reject_unknown(params, {"omega_a", "omega_b", "omega_c"}, "dispersion.params");
        LeeModel lm;
        lm.omega_a = Dispersion::tabulated(dlist(params.at("omega_a")));
        lm.omega_b = Dispersion::tabulated(dlist(params.at("omega_b")));
        lm.omega_c = Dispersion::tabulated(dlist(params.at("omega_c")));
        std::vector<cplx> vt;
        for (const auto& x : jm.at("vtable")) vt.emplace_back(x.get<double>(), 0.0);
        lm.v = InteractionKernel::table(std::move(vt), 2, false);
        return ModelSpec::make(std::move(lm), lambda, std::move(grid));
    }

    Dispersion w = dispersion_from(root.at("dispersion"));
    if (variant == "pure_creation") {
        PureCreation pc;
        pc.n = jm.value("n", 2);
        const std::string pat = jm.value("pattern", std::string("creation"));
        if (pat == "creation")
            pc.pattern = CreationPattern::creation;
        else if (pat == "field")
            pc.pattern = CreationPattern::field;
        else
            throw config_error("unknown model.pattern '" + pat + "'");
        pc.v = kernel_from(jm.at("coupling"), grid, w, 1);
        pc.omega = std::move(w);
        return ModelSpec::make(std::move(pc), lambda, std::move(grid));
    }
    if (variant == "linear_coupling") {
        LinearCoupling lc;
        lc.v = kernel_from(jm.at("coupling"), grid, w, 1);
        lc.omega = std::move(w);
        return ModelSpec::make(std::move(lc), lambda, std::move(grid));
    }
    if (variant == "cubic_ti") {
        CubicTI ct;
        std::vector<cplx> vt;
        for (const auto& x : jm.at("vtable")) vt.emplace_back(x.get<double>(), 0.0);
        ct.v = InteractionKernel::table(std::move(vt), 2, true);
        ct.omega = std::move(w);
        return ModelSpec::make(std::move(ct), lambda, std::move(grid));
    }
    throw config_error("unknown model.variant '" + variant + "'");
}

std::string model_to_json(const ModelSpec& m) {
    json root;
    json jm;
    jm["variant"] = m.variant_name();
    jm["lambda"] = m.lambda;
    json jd, jg;
    const Dispersion* w = nullptr;
    if (const auto* pc = m.pure_creation()) {
        jm["n"] = pc->n;
        jm["pattern"] = pc->pattern == CreationPattern::creation ? "creation" : "field";
        w = &pc->omega;
        json vals = json::array();
        for (const cplx& c : pc->v.values) vals.push_back(c.real());
        jm["coupling"] = {{"kind", "table"}, {"values", vals}};
    } else if (const auto* lc = m.linear_coupling()) {
        w = &lc->omega;
        json vals = json::array();
        for (const cplx& c : lc->v.values) vals.push_back(c.real());
        jm["coupling"] = {{"kind", "table"}, {"values", vals}};
    } else if (const auto* ct = m.cubic_ti()) {
        w = &ct->omega;
        json vals = json::array();
        for (const cplx& c : ct->v.values) vals.push_back(c.real());
        jm["vtable"] = vals;
    } else {
        const auto* lm = m.lee();
        jd["kind"] = "tabulated";
        jd["params"] = {{"omega_a", lm->omega_a.table},
                        {"omega_b", lm->omega_b.table},
                        {"omega_c", lm->omega_c.table}};
        json vals = json::array();
        for (const cplx& c : lm->v.values) vals.push_back(c.real());
        jm["vtable"] = vals;
    }
    if (w) {
        switch (w->kind) {
            case DispersionKind::relativistic:
                jd = {{"kind", "relativistic"}, {"params", {{"mass", w->param}}}};
                break;
            case DispersionKind::nonrel_shifted:
                jd = {{"kind", "nonrel_shifted"}, {"params", {{"omega0", w->param}}}};
                break;
            case DispersionKind::quadratic_shifted:
                jd = {{"kind", "quadratic_shifted"}, {"params", {{"omega0", w->param}}}};
                break;
            case DispersionKind::tabulated:
                jd = {{"kind", "tabulated"}, {"params", {{"values", w->table}}}};
                break;
        }
    }
    const MomentumGrid& g = m.grid;
    if (g.rule == GridRule::explicit_list) {
        jg = {{"rule", "explicit"}, {"nodes", g.axis_nodes}, {"weights", g.axis_weights}};
        if (g.ring_modulus > 0) jg["ring"] = g.ring_modulus;
    } else {
        jg = {{"d", g.d},
              {"n_axis", g.n_axis},
              {"cutoff", g.cutoff},
              {"rule", g.rule == GridRule::gauss_legendre ? "gauss_legendre" : "uniform_trapezoid"}};
    }
    root["model"] = jm;
    root["dispersion"] = jd;
    root["grid"] = jg;
    return root.dump(2);
}

}  // namespace evo::model

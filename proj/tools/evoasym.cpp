// evoasym: experiment driver for the evolution-operator toolkit. Each command
// loads one JSON config, runs an experiment, writes CSV traces plus a
// report.json into --out, prints one line per check, and exits 0 (all checks
// pass), 1 (a check failed or a computation broke down) or 2 (bad config).
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evo/diagrams.hpp"
#include "evo/limits.hpp"
#include "evo/model.hpp"
#include "evo/numerics.hpp"
#include "evo/oracles.hpp"
#include "evo/perturb.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using evo::cplx;
using evo::config_error;
using evo::fmt17;
namespace model = evo::model;
namespace numerics = evo::numerics;
namespace perturb = evo::perturb;
namespace diagrams = evo::diagrams;
namespace oracles = evo::oracles;
namespace limits = evo::limits;

namespace {

// ------------------------------------------------------------ config loading

json load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw config_error("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

// key=value with a dotted path into the config; the value text is parsed as
// JSON (numbers, bools, arrays), falling back to a plain string. Numeric path
// segments index into arrays.
void apply_override(json& root, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
        throw config_error("override must look like path.to.key=value, got '" + spec + "'");
    const std::string path = spec.substr(0, eq);
    json value;
    try {
        value = json::parse(spec.substr(eq + 1));
    } catch (const json::parse_error&) {
        value = spec.substr(eq + 1);
    }

    json* cur = &root;
    std::size_t pos = 0;
    while (true) {
        const auto dot = path.find('.', pos);
        const std::string key =
            path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (key.empty()) throw config_error("override path '" + path + "' has an empty segment");
        const bool leaf = dot == std::string::npos;
        if (cur->is_array()) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(key);
            } catch (const std::exception&) {
                throw config_error("override path '" + path + "' indexes an array with '" + key +
                                   "'");
            }
            if (idx >= cur->size())
                throw config_error("override path '" + path + "' runs past the array end");
            if (leaf) {
                (*cur)[idx] = value;
                return;
            }
            cur = &(*cur)[idx];
        } else {
            if (leaf) {
                (*cur)[key] = value;
                return;
            }
            cur = &(*cur)[key];
        }
        pos = dot + 1;
    }
}

std::vector<double> dlist(const json& j) {
    std::vector<double> out;
    for (const auto& x : j) out.push_back(x.get<double>());
    return out;
}

// Section accessor that rejects unknown keys, so typos fail loudly instead of
// silently falling back to defaults.
json section(const json& cfg, const std::string& key, std::initializer_list<const char*> allowed) {
    const json j = cfg.value(key, json::object());
    for (const auto& it : j.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || it.key() == a;
        if (!known) throw config_error("unknown key '" + key + "." + it.key() + "'");
    }
    return j;
}

void check_top(const json& cfg, std::initializer_list<const char*> extra) {
    static const std::vector<std::string> base = {"experiment", "model", "dispersion", "grid"};
    for (const auto& it : cfg.items()) {
        bool known = false;
        for (const auto& b : base) known = known || it.key() == b;
        for (const char* a : extra) known = known || it.key() == a;
        if (!known) throw config_error("unknown key '" + it.key() + "'");
    }
}

numerics::TimeGrid times_from(const json& cfg, double dflt_max, std::size_t dflt_count,
                              std::vector<double> dflt_values = {}) {
    const json jt = section(cfg, "times", {"values", "max", "count"});
    if (jt.contains("values")) return numerics::TimeGrid::of(dlist(jt.at("values")));
    if (!jt.contains("max") && !jt.contains("count") && !dflt_values.empty())
        return numerics::TimeGrid::of(std::move(dflt_values));
    return numerics::TimeGrid::linspace(0.0, jt.value("max", dflt_max),
                                        jt.value("count", dflt_count));
}

oracles::FockSpec fock_from(const json& cfg, const model::ModelSpec& m, int dflt_n = 10,
                            int dflt_cap = 12) {
    const json jf = section(cfg, "fock", {"n_max", "N_max"});
    return oracles::FockSpec::for_model(m, jf.value("n_max", dflt_n), jf.value("N_max", dflt_cap));
}

oracles::Element element_from(const json& cfg) {
    const json je = section(cfg, "element", {"kind", "p"});
    const std::string kind = je.value("kind", std::string("vacuum"));
    if (kind == "vacuum") return oracles::Element::vacuum();
    if (kind == "one_particle") return oracles::Element::one_particle(je.value("p", 0));
    throw config_error("unknown element.kind '" + kind + "'");
}

// ----------------------------------------------------------------- reporting

struct Check {
    std::string name;
    double measured = 0.0;
    double threshold = 0.0;
    std::string verdict;
};

struct Report {
    std::string experiment;
    json config;
    std::vector<Check> checks;
    std::vector<std::string> outputs;

    void add(const std::string& name, double measured, double threshold, bool ok) {
        checks.push_back({name, measured, threshold, ok ? "pass" : "fail"});
    }
    // Informational rows never drive the exit code.
    void info(const std::string& name, double measured) {
        checks.push_back({name, measured, 0.0, "info"});
    }
    bool pass() const {
        for (const Check& c : checks)
            if (c.verdict == "fail") return false;
        return true;
    }
};

void write_file(const fs::path& dir, const std::string& name, const std::string& text,
                Report& rep) {
    fs::create_directories(dir);
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw config_error("cannot write '" + (dir / name).string() + "'");
    out << text;
    rep.outputs.push_back(name);
}

void write_report(const fs::path& dir, const Report& rep) {
    json checks = json::array();
    for (const Check& c : rep.checks)
        checks.push_back({{"name", c.name},
                          {"measured", c.measured},
                          {"threshold", c.threshold},
                          {"verdict", c.verdict}});
    const json doc = {{"experiment", rep.experiment},
                      {"config", rep.config},
                      {"checks", checks},
                      {"outputs", rep.outputs}};
    fs::create_directories(dir);
    std::ofstream out(dir / "report.json", std::ios::binary);
    if (!out) throw config_error("cannot write '" + (dir / "report.json").string() + "'");
    out << doc.dump(2) << "\n";
}

void print_report(const Report& rep) {
    for (const Check& c : rep.checks) {
        if (c.verdict == "info")
            std::printf("[info] %s: %.10g\n", c.name.c_str(), c.measured);
        else
            std::printf("[%s] %s: measured %.10g, threshold %.6g\n", c.verdict.c_str(),
                        c.name.c_str(), c.measured, c.threshold);
    }
    std::printf("%s: %s\n", rep.experiment.c_str(), rep.pass() ? "PASS" : "FAIL");
}

void append_cplx(std::string& row, cplx z) {
    row += ',';
    row += fmt17(z.real());
    row += ',';
    row += fmt17(z.imag());
}

// ------------------------------------------------------------------ solvable

// Linear-coupling vacuum amplitude three ways: the displacement closed form,
// truncated Fock evolution, and the closed exponent prediction; then the
// exponent recovered back from the Fock trace.
Report cmd_solvable(const json& cfg, const fs::path& out) {
    check_top(cfg, {"times", "fock", "tol"});
    Report rep{"solvable", cfg, {}, {}};
    const model::ModelSpec m = model::model_from_json(cfg.dump());
    if (!m.linear_coupling())
        throw config_error("solvable experiment needs the linear_coupling variant");
    const json tol = section(cfg, "tol", {"fock", "prediction", "unwrap"});
    const numerics::TimeGrid tg = times_from(cfg, 20.0, 201);
    const oracles::FockSpec spec = fock_from(cfg, m, 12, 64);
    const perturb::PredictionCoefficients c2 = perturb::vacuum_order2(m);

    std::vector<cplx> closed(tg.size()), fock(tg.size()), pred(tg.size());
    for (std::size_t i = 0; i < tg.size(); ++i) {
        const double t = tg.t[i];
        closed[i] = oracles::solvable_closed_form(m, t, m.lambda).value;
        fock[i] = oracles::fock_exact(spec, m, oracles::Element::vacuum(), t, m.lambda).value;
        pred[i] = perturb::vacuum_prediction(c2, t);
    }

    std::string csv = "t,closed_re,closed_im,closed_abs,closed_phase,fock_re,fock_im,pred_re,pred_im\n";
    for (std::size_t i = 0; i < tg.size(); ++i) {
        std::string row = fmt17(tg.t[i]);
        append_cplx(row, closed[i]);
        row += ',';
        row += fmt17(std::abs(closed[i]));
        row += ',';
        row += fmt17(std::arg(closed[i]));
        append_cplx(row, fock[i]);
        append_cplx(row, pred[i]);
        csv += row;
        csv += '\n';
    }
    write_file(out, "trace.csv", csv, rep);

    double dfock = 0.0, dpred = 0.0;
    for (std::size_t i = 0; i < tg.size(); ++i) {
        dfock = std::max(dfock, std::abs(fock[i] - closed[i]));
        dpred = std::max(dpred, std::abs(pred[i] - closed[i]));
    }
    rep.add("fock_matches_closed_form", dfock, tol.value("fock", 1e-8),
            dfock <= tol.value("fock", 1e-8));
    rep.add("prediction_matches_closed_form", dpred, tol.value("prediction", 1e-8),
            dpred <= tol.value("prediction", 1e-8));

    // The oscillatory remainder of the exponent lives at the mode frequencies,
    // so hand them to the unwrap fit and the linear part comes back clean.
    std::vector<double> freqs;
    const model::LinearCoupling& lc = *m.linear_coupling();
    for (std::size_t i = 0; i < m.grid.size(); ++i)
        freqs.push_back(-lc.omega.at_node(i, m.grid));
    const limits::UnwrapResult uw = limits::unwrap_exponent(tg, fock, freqs);
    const double l2 = m.lambda * m.lambda;
    const double tu = tol.value("unwrap", 1e-8);
    rep.add("unwrap_recovers_rate", std::abs(uw.A - l2 * c2.A), tu,
            std::abs(uw.A - l2 * c2.A) <= tu);
    rep.add("unwrap_recovers_intercept", std::abs(uw.B - l2 * c2.B), tu,
            std::abs(uw.B - l2 * c2.B) <= tu);
    return rep;
}

// --------------------------------------------------------------------- decay

// Memory-kernel tail for decaying pure-creation models: |F(sigma)| power law
// against the dimension count, and the two independent routes to the order-2
// coefficients when the tail is integrable.
Report cmd_decay(const json& cfg, const fs::path& out) {
    check_top(cfg, {"sigma", "tol"});
    Report rep{"decay", cfg, {}, {}};
    const model::ModelSpec m = model::model_from_json(cfg.dump());
    const json tol = section(cfg, "tol", {"slope", "routes"});
    const perturb::DecayCoefficients dc = perturb::decay_order2(m);

    const json js = section(cfg, "sigma", {"min", "max", "count"});
    const double smin = js.value("min", 20.0);
    const double smax = js.value("max", 200.0);
    const std::size_t count = js.value("count", std::size_t{25});
    if (!(smin > 0.0) || !(smax > smin) || count < 4)
        throw config_error("sigma window needs 0 < min < max and at least 4 samples");

    std::vector<double> sigmas(count), absf(count);
    std::string csv = "sigma,f_re,f_im,f_abs\n";
    for (std::size_t i = 0; i < count; ++i) {
        sigmas[i] = smin * std::pow(smax / smin, double(i) / double(count - 1));
        const cplx f = dc.F(sigmas[i]);
        absf[i] = std::abs(f);
        std::string row = fmt17(sigmas[i]);
        append_cplx(row, f);
        row += ',';
        row += fmt17(absf[i]);
        csv += row;
        csv += '\n';
    }
    write_file(out, "memory_kernel.csv", csv, rep);

    const limits::FitResult fit = limits::fit_exponent(sigmas, absf);
    const double expected = -0.5 * dc.dn;
    const double ts = tol.value("slope", 0.05);
    rep.info("tail_slope", fit.slope);
    rep.add("tail_slope_deviation", std::abs(fit.slope - expected), ts,
            std::abs(fit.slope - expected) <= ts);

    std::string coef = "name,re,im,error\n";
    auto coef_row = [&coef](const char* name, cplx z, double err) {
        std::string row = name;
        append_cplx(row, z);
        row += ',';
        row += fmt17(err);
        coef += row;
        coef += '\n';
    };
    coef_row("a2_time", dc.A2_time, dc.A2_time_err);
    coef_row("b2_time", dc.B2_time, dc.B2_time_err);

    if (!dc.has_limits) {
        std::printf("warning: dn = %d gives a sigma^{-%g} tail; the order-2 coefficients "
                    "may not converge\n",
                    dc.dn, 0.5 * dc.dn);
        rep.add("tail_limit_exists", double(dc.dn), 3.0, false);
    } else {
        coef_row("a2_eps", dc.A2_eps, dc.A2_eps_err);
        const double tr = tol.value("routes", 1e-3);
        const double da = std::abs(dc.A2_time - dc.A2_eps) / std::abs(dc.A2_time);
        rep.add("a2_route_agreement", da, tr, da <= tr);
        if (dc.has_eps_B2) {
            coef_row("b2_eps", dc.B2_eps, dc.B2_eps_err);
            const double db = std::abs(dc.B2_time - dc.B2_eps) / std::abs(dc.B2_time);
            rep.add("b2_route_agreement", db, tr, db <= tr);
        }
    }
    write_file(out, "coefficients.csv", coef, rep);
    return rep;
}

// ---------------------------------------------------------------- stochastic

// Weak-coupling sweep at fixed rescaled time: residual order against the
// leading exponent and the gain from the lambda^2 correction.
Report cmd_stochastic(const json& cfg, const fs::path& out) {
    check_top(cfg, {"element", "tau", "lambdas", "fock", "route", "tol"});
    Report rep{"stochastic", cfg, {}, {}};
    const model::ModelSpec m = model::model_from_json(cfg.dump());
    const oracles::Element el = element_from(cfg);
    const json tol = section(cfg, "tol", {"order", "gain"});
    const double tau = cfg.value("tau", 1.0);
    if (!cfg.contains("lambdas")) throw config_error("stochastic experiment needs a lambdas list");
    const std::vector<double> lambdas = dlist(cfg.at("lambdas"));

    limits::SweepOptions opt;
    const std::string route = cfg.value("route", std::string("fock_exact"));
    if (route == "fock_exact")
        opt.route = oracles::Route::fock_exact;
    else if (route == "dyson")
        opt.route = oracles::Route::dyson4;
    else
        throw config_error("unknown route '" + route + "' (use fock_exact or dyson)");
    opt.fock = fock_from(cfg, m, 8, 64);

    const limits::SweepResult s = limits::stochastic_sweep(m, el, tau, lambdas, opt);
    write_file(out, "sweep.csv", limits::sweep_csv(s), rep);

    const double dev = std::abs(s.order.slope - 2.0);
    const double to = tol.value("order", 0.2);
    rep.info("residual_order", s.order.slope);
    rep.info("residual_order_half_width", s.order.half_width);
    rep.add("residual_order_deviation", dev, to, dev <= to);
    const double gmin = tol.value("gain", 5.0);
    rep.add("corrected_gain", s.gain, gmin, s.gain >= gmin);
    return rep;
}

// --------------------------------------------------------------- oneparticle

// One-particle amplitude at a momentum node: order-2 and order-4 closed
// predictions against the direct series and truncated Fock evolution, plus
// the secular-coefficient and mass-kernel identities.
Report cmd_oneparticle(const json& cfg, const fs::path& out) {
    check_top(cfg, {"p", "times", "fock", "tol"});
    Report rep{"oneparticle", cfg, {}, {}};
    const model::ModelSpec m = model::model_from_json(cfg.dump());
    if (!m.cubic_ti() && !m.lee())
        throw config_error("oneparticle experiment needs the cubic_ti or lee variant");
    const std::size_t p = cfg.value("p", std::size_t{0});
    const json tol = section(cfg, "tol", {"t_zero", "order4_routes", "fock", "secular", "mass"});
    const numerics::TimeGrid tg = times_from(cfg, 2.0, 21);
    const oracles::FockSpec spec = fock_from(cfg, m, 4, 6);
    const oracles::Element el = oracles::Element::one_particle(p);

    const perturb::PredictionCoefficients c2 = perturb::oneparticle_order2(m, p);
    const double l2 = m.lambda * m.lambda, l4 = l2 * l2;
    if (m.lee()) rep.info("a2_imaginary_part", std::imag(c2.A));

    if (m.lee()) {
        std::string csv = "t,pred2_re,pred2_im,series2_re,series2_im,fock_re,fock_im\n";
        double dzero = 0.0;
        for (std::size_t i = 0; i < tg.size(); ++i) {
            const double t = tg.t[i];
            const cplx pred2 = perturb::u11_prediction(c2, t);
            const cplx ser2 = oracles::dyson_order2(m, el, t, m.lambda).value;
            const cplx fv = oracles::fock_exact(spec, m, el, t, m.lambda).value;
            if (t == 0.0)
                dzero = std::max({std::abs(pred2 - 1.0), std::abs(ser2 - 1.0), std::abs(fv - 1.0)});
            std::string row = fmt17(t);
            append_cplx(row, pred2);
            append_cplx(row, ser2);
            append_cplx(row, fv);
            csv += row;
            csv += '\n';
        }
        write_file(out, "trace.csv", csv, rep);
        const double tz = tol.value("t_zero", 1e-12);
        rep.add("t_zero_values", dzero, tz, dzero <= tz);
        return rep;
    }

    const perturb::OneParticleOrder4 o4 = perturb::oneparticle_order4(m, p);
    const cplx a4_total = o4.A4_1pi + o4.A4_1pr;
    std::string csv = "t,pred2_re,pred2_im,pred4_re,pred4_im,series4_re,series4_im,fock_re,fock_im\n";
    double dzero = 0.0, droutes = 0.0, dfock = 0.0;
    for (std::size_t i = 0; i < tg.size(); ++i) {
        const double t = tg.t[i];
        const cplx pred2 = perturb::u11_prediction(c2, t);
        const cplx pred4 = perturb::u11_prediction(c2, t, &a4_total);
        const cplx d2 = oracles::dyson_order2(m, el, t, m.lambda).value;
        const cplx d4 = oracles::dyson_order4(m, el, t, m.lambda).value;
        const cplx u4 = l4 * o4.U4(t);
        const cplx ser4 = d2 + u4;
        const cplx fv = oracles::fock_exact(spec, m, el, t, m.lambda).value;
        if (t == 0.0)
            dzero = std::max({std::abs(pred4 - 1.0), std::abs(ser4 - 1.0), std::abs(fv - 1.0),
                              std::abs(pred2 - 1.0)});
        droutes = std::max(droutes, std::abs(u4 - d4));
        dfock = std::max(dfock, std::abs(ser4 - fv));
        std::string row = fmt17(t);
        append_cplx(row, pred2);
        append_cplx(row, pred4);
        append_cplx(row, ser4);
        append_cplx(row, fv);
        csv += row;
        csv += '\n';
    }
    write_file(out, "trace.csv", csv, rep);

    const double tz = tol.value("t_zero", 1e-12);
    rep.add("t_zero_values", dzero, tz, dzero <= tz);
    const double tr = tol.value("order4_routes", 1e-10);
    rep.add("order4_route_agreement", droutes, tr, droutes <= tr);
    const double tf = tol.value("fock", 1e-5);
    rep.add("series_matches_fock", dfock, tf, dfock <= tf);

    // Secular coefficients of the order-4 series: the t^2 piece is fixed by
    // the order-2 rate, the t piece by the order-4 rates plus the cross term.
    const oracles::SecularCoefficients sec = oracles::dyson_order4_secular(m, el, m.lambda);
    const cplx want_c2 = -l4 * c2.A * c2.A / 2.0;
    const cplx want_c1 = cplx(0, 1) * l4 * (a4_total + c2.A * c2.B);
    const double tsec = tol.value("secular", 1e-6);
    const double dc2 = std::abs(sec.c2 - want_c2) / l4;
    const double dc1 = std::abs(sec.c1 - want_c1) / l4;
    rep.add("secular_t2_coefficient", dc2, tsec, dc2 <= tsec);
    rep.add("secular_t1_coefficient", dc1, tsec, dc1 <= tsec);

    const perturb::MassKernels mk = perturb::m_kernels(m, p);
    const double dm = std::abs(mk.M4 + a4_total);
    const double tm = tol.value("mass", 1e-10);
    rep.add("mass_kernel_consistency", dm, tm, dm <= tm);
    return rep;
}

// --------------------------------------------------------------------- terms

// Composition table of the ordered vacuum integral at one order: per-piece
// values, their sum against the directly expanded series, and the row count.
Report cmd_terms(const json& cfg, const fs::path& out) {
    check_top(cfg, {"order", "times", "tol"});
    Report rep{"terms", cfg, {}, {}};
    const model::ModelSpec m = model::model_from_json(cfg.dump());
    if (!(m.lambda > 0.0)) throw config_error("terms experiment needs lambda > 0");
    const int order = cfg.value("order", 4);
    const json tol = section(cfg, "tol", {"sum"});
    const std::vector<diagrams::BracketTerm> terms = diagrams::enumerate_terms(order);
    const numerics::TimeGrid tg = times_from(cfg, 10.0, 3, {1.0, 5.0, 10.0});

    const double lp = std::pow(m.lambda, order);
    const oracles::Element el = oracles::Element::vacuum();
    std::vector<numerics::osc::Term> engine;
    if (order == 4) engine = oracles::dyson_order4_terms(m, el, m.lambda);

    auto composition_label = [](const diagrams::BracketTerm& term) {
        std::string s;
        for (std::size_t k = 0; k < term.composition.size(); ++k) {
            if (k) s += '+';
            s += std::to_string(term.composition[k]);
        }
        return s;
    };

    std::string csv = "t,term_index,composition,sign,oscillatory,value_re,value_im\n";
    std::string totals = "t,total_re,total_im,oracle_re,oracle_im,abs_diff\n";
    json jdoc = json::array();
    double dsum = 0.0;
    for (std::size_t i = 0; i < tg.size(); ++i) {
        const double t = tg.t[i];
        const std::vector<cplx> vals = diagrams::evaluate_all(terms, m, t);
        cplx total = 0.0;
        json jterms = json::array();
        for (std::size_t k = 0; k < terms.size(); ++k) {
            total += vals[k];
            std::string row = fmt17(t);
            row += ',';
            row += std::to_string(k);
            row += ',';
            row += composition_label(terms[k]);
            row += ',';
            row += std::to_string(terms[k].sign);
            row += ',';
            row += terms[k].oscillatory ? '1' : '0';
            append_cplx(row, vals[k]);
            csv += row;
            csv += '\n';
            jterms.push_back(diagrams::term_json(terms[k], vals[k]));
        }
        // Direct series route: the exact term engine at order 4, the
        // quadrature oracle at order 2 (where (-i)^2 flips the sign).
        cplx oracle;
        if (order == 4)
            oracle = numerics::osc::eval_terms(engine, t) / lp;
        else
            oracle = (oracles::dyson_order2(m, el, t, m.lambda).value - 1.0) / lp;
        dsum = std::max(dsum, std::abs(total - oracle));
        std::string row = fmt17(t);
        append_cplx(row, total);
        append_cplx(row, oracle);
        row += ',';
        row += fmt17(std::abs(total - oracle));
        totals += row;
        totals += '\n';
        jdoc.push_back({{"t", t},
                        {"terms", jterms},
                        {"total_re", total.real()},
                        {"total_im", total.imag()},
                        {"oracle_re", oracle.real()},
                        {"oracle_im", oracle.imag()}});
    }
    write_file(out, "terms.csv", csv, rep);
    write_file(out, "totals.csv", totals, rep);
    write_file(out, "terms.json", jdoc.dump(2) + "\n", rep);

    const double expected_rows = std::pow(2.0, order - 1);
    rep.add("term_count", double(terms.size()), expected_rows,
            double(terms.size()) == expected_rows);
    const double ts = tol.value("sum", 1e-8);
    rep.add("sum_matches_series", dsum, ts, dsum <= ts);
    return rep;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evolution-operator experiment driver"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    std::vector<std::string> overrides;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"solvable", "linear-coupling vacuum amplitude against its closed form"},
        {"decay", "memory-kernel tail and dual-route order-2 coefficients"},
        {"stochastic", "weak-coupling sweep at fixed rescaled time"},
        {"oneparticle", "one-particle amplitude against series and Fock routes"},
        {"terms", "composition table of the ordered vacuum integral"}};
    for (const auto& [name, desc] : commands) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", config_path, "experiment config (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--override", overrides, "dotted-path config override key=value");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();

    try {
        json cfg = load_config(config_path);
        for (const std::string& ov : overrides) apply_override(cfg, ov);
        if (cfg.contains("experiment") && cfg.at("experiment").get<std::string>() != cmd)
            throw config_error("config declares experiment '" +
                               cfg.at("experiment").get<std::string>() + "' but command '" + cmd +
                               "' was invoked");
        const fs::path out(out_dir);
        Report rep;
        if (cmd == "solvable")
            rep = cmd_solvable(cfg, out);
        else if (cmd == "decay")
            rep = cmd_decay(cfg, out);
        else if (cmd == "stochastic")
            rep = cmd_stochastic(cfg, out);
        else if (cmd == "oneparticle")
            rep = cmd_oneparticle(cfg, out);
        else
            rep = cmd_terms(cfg, out);
        write_report(out, rep);
        print_report(rep);
        return rep.pass() ? 0 : 1;
    } catch (const config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const evo::unsupported_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

#include "evo/limits.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "evo/diagrams.hpp"
#include "evo/perturb.hpp"

namespace evo::limits {

namespace {

// 97.5% Student-t quantiles by degrees of freedom (95% two-sided interval).
double t_quantile(std::size_t dof) {
    static const double tab[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365,
                                 2.306,  2.262, 2.228, 2.201, 2.179, 2.160, 2.145,
                                 2.131,  2.120, 2.110, 2.101, 2.093, 2.086};
    if (dof == 0) return 0.0;
    if (dof <= 20) return tab[dof - 1];
    if (dof <= 30) return 2.05;
    return 1.96;
}

struct LineFit {
    double slope, intercept, se_slope;
};

LineFit line_fit(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::domain_error("fit_exponent: abscissas are all equal");
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - slope * x[i] - intercept;
        ss += r * r;
    }
    const double var = x.size() > 2 ? ss / (n - 2.0) : 0.0;
    return {slope, intercept, std::sqrt(var / sxx)};
}

}  // namespace

// ------------------------------------------------------------ exponent fits

FitResult fit_exponent(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw config_error("fit_exponent: length mismatch");
    if (xs.size() < 4) throw config_error("fit_exponent needs at least 4 points");
    std::vector<double> lx(xs.size()), ly(ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
            throw std::domain_error("fit_exponent needs positive samples on both axes");
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
    }
    const LineFit f = line_fit(lx, ly);
    return {f.slope, t_quantile(xs.size() - 2) * f.se_slope, f.intercept};
}

// -------------------------------------------------------------- phase unwrap

UnwrapResult unwrap_exponent(const numerics::TimeGrid& grid, const std::vector<cplx>& values,
                             const std::vector<double>& osc_freqs) {
    const std::size_t n = grid.size();
    if (values.size() != n) throw config_error("unwrap_exponent: grid/value length mismatch");
    const std::size_t unknowns = 2 + osc_freqs.size();
    if (n < unknowns + 2)
        throw config_error("unwrap_exponent: need at least " + std::to_string(unknowns + 2) +
                           " samples");
    for (const cplx& v : values)
        if (std::abs(v) <= 1e-12)
            throw numeric_error("unwrap_exponent: amplitude fell below 1e-12");

    // Continuity-unwrapped complex logarithm along the grid.
    std::vector<cplx> L(n);
    double phase = std::arg(values[0]);
    L[0] = cplx(std::log(std::abs(values[0])), phase);
    for (std::size_t j = 1; j < n; ++j) {
        const double step = std::arg(values[j] / values[j - 1]);
        if (std::abs(step) >= M_PI - 1e-2)
            throw numeric_error("unwrap_exponent: phase step of " + fmt17(step) +
                                " is aliased; refine the time grid");
        phase += step;
        L[j] = cplx(std::log(std::abs(values[j])), phase);
    }

    Eigen::MatrixXcd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(unknowns));
    Eigen::VectorXcd b(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
        const auto r = static_cast<Eigen::Index>(j);
        X(r, 0) = grid.t[j];
        X(r, 1) = 1.0;
        for (std::size_t f = 0; f < osc_freqs.size(); ++f)
            X(r, static_cast<Eigen::Index>(2 + f)) =
                std::exp(cplx(0.0, osc_freqs[f] * grid.t[j]));
        b(r) = L[j];
    }
    const Eigen::VectorXcd sol = X.colPivHouseholderQr().solve(b);

    UnwrapResult out;
    out.A = sol(0);
    out.B = sol(1);
    out.c_trace.resize(n);
    const Eigen::VectorXcd fitted = X * sol;
    double ss = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const auto r = static_cast<Eigen::Index>(j);
        out.c_trace[j] = L[j] - out.A * grid.t[j] - out.B;
        ss += std::norm(L[j] - fitted(r));
    }
    out.residual = std::sqrt(ss / static_cast<double>(n));
    return out;
}

// ---------------------------------------------------------- rescaled sweeps

namespace {

struct PredictionSet {
    std::function<cplx(double)> leading;
    std::function<cplx(double)> corrected;
};

PredictionSet build_predictions(const ModelSpec& m, oracles::Element el, bool order4) {
    if (el.kind == oracles::Element::Kind::vacuum) {
        if (m.decaying) {
            const perturb::DecayCoefficients d = perturb::decay_order2(m);
            const cplx A = d.A2(), B = d.B2();
            const double L2 = m.lambda * m.lambda;
            return {[=](double t) { return std::exp(L2 * A * t); },
                    [=](double t) { return std::exp(L2 * (A * t + B)); }};
        }
        perturb::PredictionCoefficients c = perturb::vacuum_order2(m);
        cplx A4 = 0.0;
        if (order4) {
            const numerics::TimeGrid sample = numerics::TimeGrid::of({0.0, 1.0});
            A4 = diagrams::split_ABC(diagrams::enumerate_terms(4), m, sample).A;
        }
        const double L2 = m.lambda * m.lambda;
        return {[=](double t) { return std::exp(L2 * c.A * t); },
                [=, L4 = L2 * L2](double t) {
                    return perturb::vacuum_prediction(c, t) * (1.0 + L4 * A4 * t);
                }};
    }

    perturb::PredictionCoefficients c = perturb::oneparticle_order2(m, el.p);
    cplx A4 = 0.0;
    if (order4) {
        const perturb::OneParticleOrder4 o4 = perturb::oneparticle_order4(m, el.p);
        A4 = o4.A4_1pi + o4.A4_1pr;
    }
    const double L2 = m.lambda * m.lambda;
    return {[=](double t) { return std::exp(cplx(0.0, L2) * c.A * t); },
            [=, has4 = order4](double t) {
                return perturb::u11_prediction(c, t, has4 ? &A4 : nullptr);
            }};
}

}  // namespace

SweepResult stochastic_sweep(const ModelSpec& m, oracles::Element el, double tau,
                             std::vector<double> lambdas, const SweepOptions& opt) {
    if (lambdas.size() < 4)
        throw config_error("stochastic sweep needs at least 4 lambda values");
    for (double l : lambdas)
        if (!(l > 0.0 && l <= 0.3))
            throw config_error("sweep lambda " + fmt17(l) + " outside (0, 0.3]");
    if (!(tau > 0.0)) throw config_error("sweep needs tau > 0");
    std::sort(lambdas.begin(), lambdas.end(), std::greater<>());

    SweepResult res;
    res.rows.resize(lambdas.size());
    parallel_chunks(lambdas.size(), [&](std::size_t i) {
        const double lam = lambdas[i];
        const double t = tau / (lam * lam);
        ModelSpec at = m;
        at.lambda = lam;
        const PredictionSet pred = build_predictions(at, el, opt.include_order4);

        cplx oracle;
        if (opt.route == oracles::Route::fock_exact) {
            oracle = oracles::fock_exact(opt.fock, at, el, t, lam).value;
        } else {
            oracle = oracles::dyson_order2(at, el, t, lam).value +
                     oracles::dyson_order4(at, el, t, lam).value;
        }

        SweepRow& row = res.rows[i];
        row.lambda = lam;
        row.tau = tau;
        row.t = t;
        row.predicted = pred.corrected(t);
        row.oracle = oracle;
        row.resid_uncorrected = std::abs(oracle - pred.leading(t));
        row.resid_corrected = std::abs(oracle - row.predicted);
    });

    std::vector<double> r0(lambdas.size());
    for (std::size_t i = 0; i < lambdas.size(); ++i) r0[i] = res.rows[i].resid_uncorrected;
    res.order = fit_exponent(lambdas, r0);
    const SweepRow& last = res.rows.back();
    res.gain = last.resid_uncorrected / std::max(last.resid_corrected, 1e-300);
    return res;
}

std::string sweep_csv(const SweepResult& s) {
    std::string out =
        "lambda,tau,t,pred_re,pred_im,oracle_re,oracle_im,"
        "resid_uncorrected,resid_corrected\n";
    for (const SweepRow& r : s.rows) {
        out += fmt17(r.lambda) + "," + fmt17(r.tau) + "," + fmt17(r.t) + "," +
               fmt17(r.predicted.real()) + "," + fmt17(r.predicted.imag()) + "," +
               fmt17(r.oracle.real()) + "," + fmt17(r.oracle.imag()) + "," +
               fmt17(r.resid_uncorrected) + "," + fmt17(r.resid_corrected) + "\n";
    }
    return out;
}

}  // namespace evo::limits

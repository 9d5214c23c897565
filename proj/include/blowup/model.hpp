#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "blowup/expr.hpp"
#include "blowup/ode.hpp"

namespace blowup {

// ---------------------------------------------------------------------------
// Problem setup: scalar parameters, Riemann-invariant initial data, and the
// assumption checker.
// ---------------------------------------------------------------------------

/// Glassey exponent p_G(1, mu) = 1 + 2/mu, the 1-D blow-up range endpoint.
inline double glassey_exponent(double mu) {
    if (mu <= 0.0) throw DomainError("no finite Glassey exponent for mu <= 0");
    return 1.0 + 2.0 / mu;
}

enum class CorrectorMode { Explicit, FixedPoint };

struct ProblemConfig {
    double p = 2.0;
    double mu = 1.0;
    double gamma1 = 5.0;
    double gamma2 = 5.0;
    double r_star = 0.7;   // base ball half-width R*
    double t_star = 0.3;   // time horizon T*
    double eps0 = 1.0;
    double eps1 = 1.0;

    // numerics
    double h = 1e-3;
    double v_max = 1e8;
    std::vector<double> thresholds;  // level ladder for curve extraction
    CorrectorMode corrector = CorrectorMode::Explicit;
    int corrector_passes = 0;        // extra corrector sweeps in FixedPoint mode
    int picard_iterations = 10;
    int assumption_samples_per_h = 10;

    double gamma_sum() const { return gamma1 + gamma2; }
    double cone_radius() const { return r_star + t_star; }

    /// Default ladder {50, 100, 200, 400} * (gamma1 + gamma2): deep in the
    /// power-law regime yet well below v_max.
    void apply_default_thresholds() {
        thresholds = {50.0 * gamma_sum(), 100.0 * gamma_sum(), 200.0 * gamma_sum(),
                      400.0 * gamma_sum()};
    }

    /// Structural invariants that make the lattice and ladder well defined.
    /// condgam and the data assumptions are the checker's job, not a
    /// construction error: a config that fails them must still load so the
    /// report can show the negative margin.
    void check_structural() const {
        if (!(p > 1.0)) throw ConfigError("p must be > 1");
        if (!(h > 0.0)) throw ConfigError("h must be > 0");
        if (!(gamma1 > 0.0) || !(gamma2 > 0.0)) throw ConfigError("gamma1, gamma2 must be > 0");
        if (!(r_star > 0.0) || !(t_star > 0.0)) throw ConfigError("r_star, t_star must be > 0");
        if (mu < 0.0) throw ConfigError("mu must be >= 0");
        if (mu > 0.0 && !(p < glassey_exponent(mu)))
            throw ConfigError("p outside the Glassey range p < 1 + 2/mu");
        if (thresholds.size() < 2) throw ConfigError("need at least two threshold levels");
        for (std::size_t i = 0; i < thresholds.size(); ++i) {
            if (thresholds[i] < 2.0) throw ConfigError("thresholds must be >= 2");
            if (i > 0 && thresholds[i] <= thresholds[i - 1])
                throw ConfigError("thresholds must be strictly increasing");
        }
        if (!(v_max > std::max(gamma_sum(), thresholds.back())))
            throw ConfigError("v_max must exceed gamma1 + gamma2 and every threshold");
        if (eps0 <= 0.0) throw ConfigError("eps0 must be > 0");
        if (eps1 == -1.0) throw ConfigError("eps1 = -1 is excluded");
        if (!nearly_integer(cone_radius() / h))
            throw ConfigError("h must divide r_star + t_star");
        if (corrector_passes < 0) throw ConfigError("corrector passes must be >= 0");
    }
};

/// Riemann invariants of the initial data: f = u1 + u0', g = u1 - u0'.
inline std::pair<Expr, Expr> riemann_invariants(const Expr& u0_prime, const Expr& u1) {
    return {u1 + u0_prime, u1 - u0_prime};
}

struct InitialData {
    Expr f, g;
    Expr f_prime, g_prime;

    static InitialData from_riemann(const Expr& u0_prime, const Expr& u1) {
        auto [f, g] = riemann_invariants(u0_prime, u1);
        return from_fg(f, g);
    }

    static InitialData from_fg(const Expr& f, const Expr& g) {
        return {f, g, f.derivative(), g.derivative()};
    }
};

struct AssumptionRecord {
    std::string id;
    bool satisfied = false;
    double margin = 0.0;
    std::string details;
};

struct AssumptionReport {
    std::vector<AssumptionRecord> records;  // condgam, A1, A2, A4, A5
    bool a5_feasible = false;               // structural inequality at the eps1 -> inf limit
    std::string a3_note = "satisfied (by grammar)";

    const AssumptionRecord& at(const std::string& id) const {
        for (const auto& r : records)
            if (r.id == id) return r;
        throw Error("no assumption record '" + id + "'");
    }

    /// condgam and A2 are hard prerequisites of the solver; A1/A4/A5 only
    /// downgrade dependent diagnostics.
    bool hard_ok() const { return at("condgam").satisfied && at("A2").satisfied; }

    bool all_satisfied() const {
        return std::all_of(records.begin(), records.end(),
                           [](const AssumptionRecord& r) { return r.satisfied; });
    }
};

/// condgam threshold max(1, (mu p 2^p)^{1/(p-1)}).
inline double condgam_threshold(double p, double mu) {
    if (mu == 0.0) return 1.0;
    return std::max(1.0, std::pow(mu * p * std::pow(2.0, p), 1.0 / (p - 1.0)));
}

/// Left side of A4/A5's data inequality: 2^{-p} gamma^p - mu/2 gamma.
inline double data_inequality_lhs(double p, double mu, double gamma_sum) {
    return std::pow(2.0, -p) * pow_pos(gamma_sum, p) - 0.5 * mu * gamma_sum;
}

/// A5's structural expression in eps1; must be positive for some admissible
/// eps1.  The factor (1 + eps1/(2(1+eps1))) increases to 3/2 as eps1 -> inf.
inline double a5_structural(double p, double mu, double eps1) {
    const double factor = 1.0 + eps1 / (2.0 * (1.0 + eps1));
    return std::pow(2.0, -p) * (2.0 * p - 1.0) * factor * (1.0 - 1.0 / (2.0 * p)) -
           std::pow(2.0, -p + 1.0) * p - mu;
}

inline bool a5_feasible(double p, double mu) {
    const double sup_factor = 1.5;
    return std::pow(2.0, -p) * (2.0 * p - 1.0) * sup_factor * (1.0 - 1.0 / (2.0 * p)) -
               std::pow(2.0, -p + 1.0) * p - mu >
           0.0;
}

/// Checks condgam and A1-A5 and reports a signed margin per assumption
/// (margin > 0 iff satisfied).  A2/A4/A5 extrema are taken over a uniform
/// sampling of B_{R*+T*} with assumption_samples_per_h points per h.
inline AssumptionReport validate_assumptions(const ProblemConfig& cfg, const InitialData& data) {
    if (cfg.eps1 == -1.0) throw DomainError("eps1 = -1 is excluded");
    AssumptionReport rep;
    const double gamma = cfg.gamma_sum();

    // condgam
    {
        const double thr = condgam_threshold(cfg.p, cfg.mu);
        const double margin = gamma - thr;
        rep.records.push_back({"condgam", margin > 0.0, margin,
                               "gamma1+gamma2 = " + format_g17(gamma) + " vs threshold " +
                                   format_g17(thr)});
    }

    // A1: ODE blow-up before the horizon, via the closed form.
    {
        AssumptionRecord r;
        r.id = "A1";
        try {
            const double t1 = closed_form_T1(cfg.p, cfg.mu, gamma);
            r.margin = cfg.t_star - t1;
            r.satisfied = r.margin > 0.0;
            r.details = "T1 = " + format_g17(t1) + ", T* = " + format_g17(cfg.t_star);
        } catch (const NoBlowupError&) {
            r.margin = -std::numeric_limits<double>::infinity();
            r.satisfied = false;
            r.details = "ODE does not blow up for this gamma";
        }
        rep.records.push_back(std::move(r));
    }

    // Sampling lattice over B_{R*+T*} for the data assumptions.
    const double radius = cfg.cone_radius();
    const double dx = cfg.h / static_cast<double>(std::max(1, cfg.assumption_samples_per_h));
    const long n = std::lround(2.0 * radius / dx);
    double a2_margin = std::numeric_limits<double>::infinity();
    double grad_max = 0.0;
    for (long i = 0; i <= n; ++i) {
        const double x = -radius + static_cast<double>(i) * dx;
        double fv, gv, fp, gp;
        try {
            fv = data.f.eval(x);
            gv = data.g.eval(x);
            fp = data.f_prime.eval(x);
            gp = data.g_prime.eval(x);
        } catch (const EvalError& e) {
            throw DataError(std::string("initial data not finite: ") + e.what());
        }
        a2_margin = std::min(a2_margin, std::min(fv - cfg.gamma1, gv - cfg.gamma2));
        grad_max = std::max(grad_max, std::fabs(fp) + std::fabs(gp));
    }

    // A2 is non-strict (f >= gamma1, g >= gamma2): data sitting exactly on
    // the floor, e.g. constant (gamma1, gamma2), is admissible.
    rep.records.push_back({"A2", a2_margin >= 0.0, a2_margin,
                           "min over B_{R*+T*} of min(f - gamma1, g - gamma2)"});

    const double lhs = data_inequality_lhs(cfg.p, cfg.mu, gamma);
    {
        const double margin = lhs - (2.0 + cfg.eps0) * grad_max;
        rep.records.push_back({"A4", margin > 0.0, margin,
                               "2^{-p} gamma^p - mu/2 gamma = " + format_g17(lhs) +
                                   ", max(|f'|+|g'|) = " + format_g17(grad_max)});
    }

    // A5 couples the structural inequality in eps1 with the data inequality.
    {
        const double structural = a5_structural(cfg.p, cfg.mu, cfg.eps1);
        const double data_margin = lhs - (2.0 + cfg.eps1) * grad_max;
        AssumptionRecord r;
        r.id = "A5";
        r.margin = std::min(structural, data_margin);
        if (cfg.eps1 <= 0.0) {
            // eps1 in (-1, 0] keeps (2 + eps1) positive but the paper's
            // procedure assumes a positive margin parameter; flagged rather
            // than guessed around.
            r.satisfied = false;
            r.details = "paper-ambiguous: eps1 <= 0 (structural margin " +
                        format_g17(structural) + ")";
        } else {
            r.satisfied = r.margin > 0.0;
            r.details = "structural margin " + format_g17(structural) + ", data margin " +
                        format_g17(data_margin);
        }
        rep.records.push_back(std::move(r));
    }

    rep.a5_feasible = a5_feasible(cfg.p, cfg.mu);
    return rep;
}

}  // namespace blowup

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "blowup/curve.hpp"

namespace blowup {

// ---------------------------------------------------------------------------
// Exact similarity profiles of the undamped limiting system
//   D_- V_phi = D_+ V_psi = 2^{-p} (V_phi + V_psi)^p
// with a straight blow-up line s = alpha y:
//   V_{phi,alpha} = C_phi (alpha y - s)^{-q},  C_phi = (1-alpha)/2 A,
//   V_{psi,alpha} = C_psi (alpha y - s)^{-q},  C_psi = (1+alpha)/2 A,
//   A^{p-1} = 2^{p-1} q (1 - alpha^2),  q = 1/(p-1),
// and the rescaling experiment that compares solver output against them.
// ---------------------------------------------------------------------------

struct SimilarityProfile {
    double p = 0.0;
    double alpha = 0.0;
    double q = 0.0;
    double amplitude = 0.0;  // A
    double c_phi = 0.0;
    double c_psi = 0.0;
};

inline SimilarityProfile profile_constants(double p, double alpha) {
    if (!(p > 1.0)) throw DomainError("profile requires p > 1");
    if (!(std::fabs(alpha) < 1.0)) throw DomainError("profile requires |alpha| < 1");
    SimilarityProfile prof;
    prof.p = p;
    prof.alpha = alpha;
    prof.q = 1.0 / (p - 1.0);
    prof.amplitude =
        std::pow(std::pow(2.0, p - 1.0) * prof.q * (1.0 - alpha * alpha), 1.0 / (p - 1.0));
    prof.c_phi = 0.5 * (1.0 - alpha) * prof.amplitude;
    prof.c_psi = 0.5 * (1.0 + alpha) * prof.amplitude;
    return prof;
}

/// Profile values at (y, s); defined for s < alpha y only.
inline std::pair<double, double> profile_eval(const SimilarityProfile& prof, double y, double s) {
    const double rho = prof.alpha * y - s;
    if (!(rho > 0.0)) throw OutsideDomainError("profile undefined on or past the blow-up line");
    const double r = std::pow(rho, -prof.q);
    return {prof.c_phi * r, prof.c_psi * r};
}

/// Max relative residual of the limiting system over the samples, with the
/// characteristic derivatives computed in closed form:
///   D_- V_phi = q (1+alpha) C_phi rho^{-q-1},  D_+ V_psi = q (1-alpha) C_psi rho^{-q-1}.
inline double profile_residual(const SimilarityProfile& prof,
                               std::span<const std::pair<double, double>> samples) {
    if (samples.empty()) throw DomainError("empty sample set");
    double worst = 0.0;
    for (const auto& [y, s] : samples) {
        const double rho = prof.alpha * y - s;
        if (!(rho > 0.0)) throw OutsideDomainError("sample on or past the blow-up line");
        const double rq1 = std::pow(rho, -prof.q - 1.0);
        const double dminus_vphi = prof.q * (1.0 + prof.alpha) * prof.c_phi * rq1;
        const double dplus_vpsi = prof.q * (1.0 - prof.alpha) * prof.c_psi * rq1;
        const double rhs =
            std::pow(2.0, -prof.p) * pow_pos(prof.amplitude * std::pow(rho, -prof.q), prof.p);
        worst = std::max(worst, std::fabs(dminus_vphi - rhs) / rhs);
        worst = std::max(worst, std::fabs(dplus_vpsi - rhs) / rhs);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Rescaled views: phi_l(y,s) = lambda^q phi(x0 + lambda y, T(x0) + lambda s).
// ---------------------------------------------------------------------------

struct RescaledView {
    double x0 = 0.0;
    double lambda = 0.0;
    double q = 0.0;
    double t_center = 0.0;  // T_hat(x0)
    const FieldSolution* sol = nullptr;
    const BlowupCurve* curve = nullptr;

    /// Rescaled field sample; empty when the mapped point leaves the cone or
    /// the unmasked region.
    std::optional<std::pair<double, double>> sample(double y, double s) const {
        const auto v = sol->interpolate(x0 + lambda * y, t_center + lambda * s);
        if (!v) return std::nullopt;
        const double scale = std::pow(lambda, q);
        return std::make_pair(scale * v->first, scale * v->second);
    }

    /// Rescaled curve T_l(y) = (T_hat(x0 + lambda y) - T_hat(x0)) / lambda;
    /// T_l(0) = 0 by construction.
    double t_rescaled(double y) const {
        return (curve->value_at(x0 + lambda * y) - t_center) / lambda;
    }
};

inline RescaledView rescale(const FieldSolution& sol, const BlowupCurve& curve, double x0,
                            double lambda, double p) {
    if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
    RescaledView view;
    view.x0 = x0;
    view.lambda = lambda;
    view.q = 1.0 / (p - 1.0);
    view.t_center = curve.value_at(x0);  // throws if x0 outside the support
    view.sol = &sol;
    view.curve = &curve;
    return view;
}

struct ProfileLadderRow {
    double lambda = 0.0;
    double sup_error = 0.0;             // sup |phi_l - V_phi| + |psi_l - V_psi| over S
    double damping_contribution = 0.0;  // sup of the residual damping term in (fk)
    double coverage = 0.0;              // fraction of probe points inside the cone
};

struct ProfileConvergence {
    double alpha = 0.0;  // centered T_hat'(x0)
    double alpha_left = 0.0;
    double alpha_right = 0.0;
    SimilarityProfile profile;
    std::vector<ProfileLadderRow> rows;
};

/// Rescales around (x0, T_hat(x0)) across a decreasing lambda ladder and
/// reports the sup distance to the similarity profile with alpha = T_hat'(x0)
/// over the fixed probe set S = {|y| <= 1, -2 <= s <= alpha y - 1/4}.
/// The damped system keeps a mu/(1+t) term of order lambda; its sup over S is
/// reported alongside.
inline ProfileConvergence profile_convergence(const FieldSolution& sol, const BlowupCurve& curve,
                                              const ProblemConfig& cfg, double x0,
                                              std::span<const double> lambdas) {
    for (double l : lambdas)
        if (l < 10.0 * sol.lattice.h)
            throw DomainError("lambda below lattice resolution (need lambda >= 10h)");

    ProfileConvergence out;
    const auto slopes = curve.slope_at(x0);
    out.alpha = slopes.centered;
    out.alpha_left = slopes.left;
    out.alpha_right = slopes.right;
    out.profile = profile_constants(cfg.p, out.alpha);

    const int ny = 21, ns = 36;
    for (double lambda : lambdas) {
        const RescaledView view = rescale(sol, curve, x0, lambda, cfg.p);
        ProfileLadderRow row;
        row.lambda = lambda;
        std::size_t total = 0, inside = 0;
        for (int iy = 0; iy < ny; ++iy) {
            const double y = -1.0 + 2.0 * iy / (ny - 1);
            const double s_hi = out.alpha * y - 0.25;
            for (int is = 0; is < ns; ++is) {
                const double s = -2.0 + (s_hi + 2.0) * is / (ns - 1);
                ++total;
                const auto v = view.sample(y, s);
                if (!v) continue;
                ++inside;
                const auto [vphi, vpsi] = profile_eval(out.profile, y, s);
                row.sup_error = std::max(
                    row.sup_error, std::fabs(v->first - vphi) + std::fabs(v->second - vpsi));
                const double t_orig = view.t_center + lambda * s;
                const double damp =
                    lambda * cfg.mu / (1.0 + t_orig) * 0.5 * (v->first + v->second);
                row.damping_contribution = std::max(row.damping_contribution, damp);
            }
        }
        row.coverage = total > 0 ? static_cast<double>(inside) / total : 0.0;
        if (row.coverage < 0.9)
            throw InsufficientCoverageError("probe set leaves the cone at lambda = " +
                                            format_g17(lambda));
        out.rows.push_back(row);
    }
    return out;
}

}  // namespace blowup

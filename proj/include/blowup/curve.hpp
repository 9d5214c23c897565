#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "blowup/solver.hpp"

namespace blowup {

// ---------------------------------------------------------------------------
// Blow-up curve extraction.
//
// For each abscissa, E_M(x) is the first time phi+psi crosses the level M
// (linear interpolation between the bracketing rows).  The rate law
// (phi+psi) ~ (T-t)^{-q} inverts to T - E_M ~ K M^{-(p-1)}, so a least-squares
// fit over the threshold ladder, linear in the regressor M^{-(p-1)},
// extrapolates T without ever touching masked rows.
// ---------------------------------------------------------------------------

struct LadderPoint {
    double level = 0.0;  // M
    double time = 0.0;   // E_M
};

struct BlowupCurve {
    std::vector<double> xs;
    std::vector<double> t_hat;
    std::vector<double> k_hat;
    std::vector<double> t_prime;
    std::vector<double> fit_residual;  // max |E_fit - E_M| over the ladder
    std::vector<std::vector<LadderPoint>> ladders;
    double lipschitz_hat = 0.0;
    double dx = 0.0;  // abscissa spacing (= lattice h)

    std::size_t size() const { return xs.size(); }

    /// Linear interpolation of T_hat at x; throws outside the support.
    double value_at(double x) const {
        if (xs.empty()) throw OutsideDomainError("empty curve");
        if (x < xs.front() - 1e-12 || x > xs.back() + 1e-12)
            throw OutsideDomainError("x outside curve support");
        if (xs.size() == 1) return t_hat.front();
        const auto it = std::upper_bound(xs.begin(), xs.end(), x);
        std::size_t j = static_cast<std::size_t>(it - xs.begin());
        if (j == 0) j = 1;
        if (j >= xs.size()) j = xs.size() - 1;
        const double w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
        return t_hat[j - 1] * (1.0 - w) + t_hat[j] * w;
    }

    /// Centered derivative estimate at the sample nearest to x; the one-sided
    /// left/right slopes at that sample come with it (they may differ by
    /// O(h) near a kink, so both are exposed).
    struct SlopeProbe {
        double centered = 0.0;
        double left = 0.0;
        double right = 0.0;
    };
    SlopeProbe slope_at(double x) const {
        if (xs.size() < 2) throw OutsideDomainError("curve too short for slopes");
        std::size_t j = 0;
        double best = 1e300;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double d = std::fabs(xs[i] - x);
            if (d < best) {
                best = d;
                j = i;
            }
        }
        SlopeProbe s;
        const std::size_t lo = j == 0 ? 0 : j - 1;
        const std::size_t hi = j + 1 >= xs.size() ? xs.size() - 1 : j + 1;
        s.left = j == 0 ? (t_hat[1] - t_hat[0]) / (xs[1] - xs[0])
                        : (t_hat[j] - t_hat[j - 1]) / (xs[j] - xs[j - 1]);
        s.right = j + 1 >= xs.size()
                      ? (t_hat[j] - t_hat[j - 1]) / (xs[j] - xs[j - 1])
                      : (t_hat[j + 1] - t_hat[j]) / (xs[j + 1] - xs[j]);
        s.centered = (t_hat[hi] - t_hat[lo]) / (xs[hi] - xs[lo]);
        return s;
    }
};

/// First time phi+psi reaches level M at abscissa x (row-0 node), linearly
/// interpolated between the bracketing rows.  Throws NotReachedError when the
/// level is not crossed before masking or the cone boundary.
inline double level_time(const FieldSolution& sol, double x, double M) {
    const ConeLattice& lat = sol.lattice;
    const int i0 = lat.index_of(0, x);
    if (i0 < 0) throw OutsideDomainError("abscissa outside the lattice base");
    double prev = sol.sum_at(0, i0);
    if (prev >= M) return 0.0;
    for (int k = 1; k < lat.rows; ++k) {
        const int i = i0 - k;
        if (i < 0 || i >= lat.row_size(k)) break;
        if (sol.blown_at(k, i)) break;
        const double cur = sol.sum_at(k, i);
        if (cur >= M) {
            const double w = (M - prev) / (cur - prev);
            return lat.t_of(k - 1) + w * lat.h;
        }
        prev = cur;
    }
    throw NotReachedError("level " + format_g17(M) + " not reached before mask at x = " +
                          format_g17(x));
}

/// Least-squares fit of E_M = T - K M^{-(p-1)}; returns (T_hat, K_hat).
/// With two points this reduces to the two-point extrapolation formula.
inline std::pair<double, double> extrapolate_blowup_time(const std::vector<LadderPoint>& ladder,
                                                         double p) {
    if (ladder.size() < 2) throw IllConditionedError("need at least two ladder points");
    double mmin = 1e300, mmax = 0.0;
    for (const auto& lp : ladder) {
        mmin = std::min(mmin, lp.level);
        mmax = std::max(mmax, lp.level);
    }
    if (mmax / mmin < 1.5)
        throw IllConditionedError("ladder spread too small: max/min M = " +
                                  format_g17(mmax / mmin));
    // regress E on r = M^{-(p-1)}: E = T - K r
    double sr = 0.0, se = 0.0, srr = 0.0, sre = 0.0;
    const double n = static_cast<double>(ladder.size());
    for (const auto& lp : ladder) {
        const double r = std::pow(lp.level, -(p - 1.0));
        sr += r;
        se += lp.time;
        srr += r * r;
        sre += r * lp.time;
    }
    const double denom = n * srr - sr * sr;
    if (denom == 0.0) throw IllConditionedError("degenerate ladder regressor");
    const double slope = (n * sre - sr * se) / denom;  // = -K
    const double intercept = (se - slope * sr) / n;    // = T
    return {intercept, -slope};
}

namespace detail {

/// Fits ladders into curve points and fills the derivative and Lipschitz
/// diagnostics; drops abscissas with fewer than two reachable levels.
inline BlowupCurve assemble_curve(double p, double dx,
                                  const std::vector<std::pair<double, std::vector<LadderPoint>>>&
                                      per_abscissa) {
    BlowupCurve curve;
    curve.dx = dx;
    for (const auto& [x, ladder] : per_abscissa) {
        if (ladder.size() < 2) continue;
        try {
            auto [t, k] = extrapolate_blowup_time(ladder, p);
            double res = 0.0;
            for (const auto& lp : ladder)
                res = std::max(res,
                               std::fabs(t - k * std::pow(lp.level, -(p - 1.0)) - lp.time));
            curve.xs.push_back(x);
            curve.t_hat.push_back(t);
            curve.k_hat.push_back(k);
            curve.fit_residual.push_back(res);
            curve.ladders.push_back(ladder);
        } catch (const IllConditionedError&) {
        }
    }
    if (curve.xs.size() < 3)
        throw InsufficientCoverageError("fewer than 3 abscissas with blow-up estimates");

    const std::size_t n = curve.xs.size();
    curve.t_prime.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i == 0 ? 0 : i - 1;
        const std::size_t hi = i + 1 >= n ? n - 1 : i + 1;
        curve.t_prime[i] = (curve.t_hat[hi] - curve.t_hat[lo]) / (curve.xs[hi] - curve.xs[lo]);
    }
    for (std::size_t i = 1; i < n; ++i) {
        const double slope =
            std::fabs((curve.t_hat[i] - curve.t_hat[i - 1]) / (curve.xs[i] - curve.xs[i - 1]));
        curve.lipschitz_hat = std::max(curve.lipschitz_hat, slope);
    }
    return curve;
}

}  // namespace detail

/// Extracts the blow-up curve over the abscissas of B_{R*} that reach at
/// least two ladder levels.  T' by centered differences (one-sided at the
/// ends); lipschitz_hat is the max adjacent slope magnitude.
inline BlowupCurve curve_extract(const FieldSolution& sol, const ProblemConfig& cfg) {
    const ConeLattice& lat = sol.lattice;
    std::vector<std::pair<double, std::vector<LadderPoint>>> table;
    const int n0 = lat.row_size(0);
    for (int i0 = 0; i0 < n0; ++i0) {
        const double x = lat.x_of(0, i0);
        if (std::fabs(x) > cfg.r_star + 1e-12) continue;
        std::vector<LadderPoint> ladder;
        for (double M : cfg.thresholds) {
            try {
                ladder.push_back({M, level_time(sol, x, M)});
            } catch (const NotReachedError&) {
                // drop this (x, M) pair
            }
        }
        table.emplace_back(x, std::move(ladder));
    }
    return detail::assemble_curve(cfg.p, lat.h, table);
}

/// Euclidean distance from (x, t) to the sampled curve, with segmentwise
/// projection between samples.  Requires t below the curve at x.
inline double distance_to_curve(const BlowupCurve& curve, double x, double t) {
    if (curve.size() == 0) throw OutsideDomainError("empty curve");
    const double tx = curve.value_at(x);  // also validates the support
    if (!(t < tx)) throw OutsideDomainError("point not below the curve");
    double best = 1e300;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const double dx = curve.xs[i] - x;
        const double dt = curve.t_hat[i] - t;
        best = std::min(best, std::sqrt(dx * dx + dt * dt));
        if (i + 1 < curve.size()) {
            // project onto the segment (x_i, T_i) -> (x_{i+1}, T_{i+1})
            const double ex = curve.xs[i + 1] - curve.xs[i];
            const double et = curve.t_hat[i + 1] - curve.t_hat[i];
            const double len2 = ex * ex + et * et;
            if (len2 > 0.0) {
                double u = ((x - curve.xs[i]) * ex + (t - curve.t_hat[i]) * et) / len2;
                u = std::clamp(u, 0.0, 1.0);
                const double px = curve.xs[i] + u * ex - x;
                const double pt = curve.t_hat[i] + u * et - t;
                best = std::min(best, std::sqrt(px * px + pt * pt));
            }
        }
    }
    return best;
}

struct ModulusReport {
    double modulus = 0.0;  // max |T'(x_{i+1}) - T'(x_i)|
    double at_x = 0.0;
};

/// C^1 diagnostic: the maximal jump of the discrete derivative.  A C^1 curve
/// shows modulus -> 0 under grid refinement.
inline ModulusReport derivative_continuity(const BlowupCurve& curve) {
    if (curve.size() < 5) throw ShapeError("need at least 5 abscissas for the modulus");
    ModulusReport rep;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const double jump = std::fabs(curve.t_prime[i] - curve.t_prime[i - 1]);
        if (jump > rep.modulus) {
            rep.modulus = jump;
            rep.at_x = curve.xs[i];
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Streaming variant: level crossings recorded row by row, so the blow-up
// curve of a fine lattice can be extracted without storing the field.
// ---------------------------------------------------------------------------

inline BlowupCurve curve_extract_streaming(const ProblemConfig& cfg, const InitialData& data) {
    const ConeLattice lat = ConeLattice::make(cfg);
    const int n0 = lat.row_size(0);
    const std::size_t levels = cfg.thresholds.size();

    std::vector<double> prev_row;
    std::vector<double> crossing(static_cast<std::size_t>(n0) * levels, -1.0);
    std::vector<std::uint8_t> dead(static_cast<std::size_t>(n0), 0);

    stream_characteristic(cfg, data, [&](int k, const std::vector<double>& phi,
                                         const std::vector<double>& psi,
                                         const std::vector<std::uint8_t>& blown) {
        const int n = lat.row_size(k);
        parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
            const int i0 = static_cast<int>(i) + k;  // row-0 abscissa index
            if (dead[i0]) return;
            if (blown[i]) {
                dead[i0] = 1;
                return;
            }
            const double cur = phi[i] + psi[i];
            const double prv = k == 0 ? cur : prev_row[i + 1];
            for (std::size_t l = 0; l < levels; ++l) {
                const std::size_t slot = static_cast<std::size_t>(i0) * levels + l;
                if (crossing[slot] >= 0.0) continue;
                const double M = cfg.thresholds[l];
                if (cur >= M) {
                    if (k == 0) {
                        crossing[slot] = 0.0;
                    } else {
                        const double w = (M - prv) / (cur - prv);
                        crossing[slot] = lat.t_of(k - 1) + w * lat.h;
                    }
                }
            }
        });
        prev_row = phi;
        for (int i = 0; i < n; ++i) prev_row[static_cast<std::size_t>(i)] += psi[i];
        return true;
    });

    std::vector<std::pair<double, std::vector<LadderPoint>>> table;
    for (int i0 = 0; i0 < n0; ++i0) {
        const double x = lat.x_of(0, i0);
        if (std::fabs(x) > cfg.r_star + 1e-12) continue;
        std::vector<LadderPoint> ladder;
        for (std::size_t l = 0; l < levels; ++l) {
            const double e = crossing[static_cast<std::size_t>(i0) * levels + l];
            if (e >= 0.0) ladder.push_back({cfg.thresholds[l], e});
        }
        table.emplace_back(x, std::move(ladder));
    }
    return detail::assemble_curve(cfg.p, lat.h, table);
}

}  // namespace blowup

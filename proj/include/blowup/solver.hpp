#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "blowup/model.hpp"

namespace blowup {

// ---------------------------------------------------------------------------
// Characteristic solver on the cone of dependence K_{R*,T*}.
//
// Unit CFL (dt = dx = h) makes the transport exact: phi rides the lines
// x + t = const (updated from the node one step to the right), psi rides
// x - t = const (from one step to the left).  All discretization error lives
// in the source quadrature: explicit Euler predictor followed by a
// trapezoidal corrector, optionally iterated (FixedPoint mode).
// ---------------------------------------------------------------------------

struct ConeLattice {
    double h = 0.0;
    int base_half = 0;  // N = (R* + T*)/h; row 0 holds 2N+1 nodes
    int rows = 0;       // number of time levels = min(T*/h, N) + 1

    static ConeLattice make(const ProblemConfig& cfg) {
        ConeLattice lat;
        lat.h = cfg.h;
        const double radius = cfg.cone_radius();
        if (!nearly_integer(radius / cfg.h)) throw ConfigError("h must divide r_star + t_star");
        lat.base_half = static_cast<int>(std::llround(radius / cfg.h));
        const int time_rows = static_cast<int>(std::floor(cfg.t_star / cfg.h + 1e-9));
        lat.rows = std::min(time_rows, lat.base_half) + 1;
        return lat;
    }

    int row_size(int k) const { return 2 * (base_half - k) + 1; }
    double t_of(int k) const { return static_cast<double>(k) * h; }
    double x_of(int k, int i) const { return static_cast<double>(i - (base_half - k)) * h; }

    /// Index within row k of spatial position x (nearest node), or -1.
    int index_of(int k, double x) const {
        const long i = std::lround(x / h) + static_cast<long>(base_half - k);
        if (i < 0 || i >= row_size(k)) return -1;
        return static_cast<int>(i);
    }

    std::size_t row_offset(int k) const {
        // sum of the k earlier row sizes: k(2N+1) - k(k-1) = k(2N+2-k)
        const std::size_t n = static_cast<std::size_t>(base_half);
        const std::size_t kk = static_cast<std::size_t>(k);
        return kk * (2 * n + 2 - kk);
    }

    std::size_t node_count() const {
        return row_offset(rows - 1) + static_cast<std::size_t>(row_size(rows - 1));
    }

    std::size_t flat(int k, int i) const { return row_offset(k) + static_cast<std::size_t>(i); }
};

/// Right-hand side of the characteristic system:
///   N = 2^{-p} (phi+psi)^p - mu/(1+t) (phi+psi)/2.
/// The positive regime is part of the contract.
inline double source_term(double phi, double psi, double t, double p, double mu) {
    const double y = phi + psi;
    if (!(y > 0.0)) throw RegimeError("phi + psi must stay positive (got " + format_g17(y) + ")");
    return std::pow(2.0, -p) * pow_pos(y, p) - mu / (1.0 + t) * 0.5 * y;
}

struct FieldSolution {
    ConeLattice lattice;
    std::vector<double> phi, psi;
    std::vector<std::uint8_t> blown;
    std::vector<int> first_blow_row;  // per row-0 abscissa; -1 if never masked

    double phi_at(int k, int i) const { return phi[lattice.flat(k, i)]; }
    double psi_at(int k, int i) const { return psi[lattice.flat(k, i)]; }
    bool blown_at(int k, int i) const { return blown[lattice.flat(k, i)] != 0; }
    double sum_at(int k, int i) const {
        const std::size_t f = lattice.flat(k, i);
        return phi[f] + psi[f];
    }

    /// Row index of the same abscissa one level up (rows lose one node per
    /// side, so index shifts by -1 per row).
    static int lift_index(int i, int dk) { return i - dk; }

    /// Bilinear interpolation of (phi, psi) at an off-lattice point; empty if
    /// the four surrounding corners are not all inside and unmasked.
    std::optional<std::pair<double, double>> interpolate(double x, double t) const;
};

namespace detail {

struct StepWorkspace {
    std::vector<double> src;  // source at the current row
};

// Advances one row of the characteristic scheme.  Nodes whose stencil touches
// a masked node are masked, which keeps the unmasked set a valid numerical
// domain of determinacy.
inline void advance_row(const ProblemConfig& cfg, int k, const ConeLattice& lat,
                        const std::vector<double>& phi0, const std::vector<double>& psi0,
                        const std::vector<std::uint8_t>& blown0, StepWorkspace& ws,
                        std::vector<double>& phi1, std::vector<double>& psi1,
                        std::vector<std::uint8_t>& blown1) {
    const double h = cfg.h;
    const double t0 = lat.t_of(k);
    const double t1 = lat.t_of(k + 1);
    const double p = cfg.p;
    const double mu = cfg.mu;
    const int n1 = lat.row_size(k + 1);
    const int passes = cfg.corrector == CorrectorMode::FixedPoint ? cfg.corrector_passes : 0;

    // source at every unmasked node of the current row (phi and psi share it)
    const int n0 = lat.row_size(k);
    ws.src.resize(static_cast<std::size_t>(n0));
    parallel_for(static_cast<std::size_t>(n0), [&](std::size_t i) {
        ws.src[i] = blown0[i] ? 0.0 : source_term(phi0[i], psi0[i], t0, p, mu);
    });

    phi1.resize(static_cast<std::size_t>(n1));
    psi1.resize(static_cast<std::size_t>(n1));
    blown1.resize(static_cast<std::size_t>(n1));

    parallel_for(static_cast<std::size_t>(n1), [&](std::size_t j) {
        // parents in row k: phi from x+h (index j+2), psi from x-h (index j)
        const std::size_t jphi = j + 2, jpsi = j;
        if (blown0[jphi] || blown0[jpsi]) {
            phi1[j] = psi1[j] = 0.0;
            blown1[j] = 1;
            return;
        }
        const double nphi0 = ws.src[jphi];
        const double npsi0 = ws.src[jpsi];
        double ph = phi0[jphi] + h * nphi0;  // Euler predictor
        double ps = psi0[jpsi] + h * npsi0;
        double nend = std::pow(2.0, -p) * pow_pos(ph + ps, p) - mu / (1.0 + t1) * 0.5 * (ph + ps);
        ph = phi0[jphi] + 0.5 * h * (nphi0 + nend);  // trapezoidal corrector
        ps = psi0[jpsi] + 0.5 * h * (npsi0 + nend);
        for (int pass = 0; pass < passes; ++pass) {
            nend = std::pow(2.0, -p) * pow_pos(ph + ps, p) - mu / (1.0 + t1) * 0.5 * (ph + ps);
            ph = phi0[jphi] + 0.5 * h * (nphi0 + nend);
            ps = psi0[jpsi] + 0.5 * h * (npsi0 + nend);
        }
        if (!std::isfinite(ph) || !std::isfinite(ps) || ph > cfg.v_max || ps > cfg.v_max) {
            phi1[j] = psi1[j] = 0.0;
            blown1[j] = 1;
        } else {
            phi1[j] = ph;
            psi1[j] = ps;
            blown1[j] = 0;
        }
    });
}

}  // namespace detail

/// Streams the characteristic solution row by row without storing the field.
/// `on_row(k, phi, psi, blown)` sees each completed row in order; return
/// false from it to stop early.
template <typename RowFn>
void stream_characteristic(const ProblemConfig& cfg, const InitialData& data, RowFn&& on_row) {
    cfg.check_structural();
    const ConeLattice lat = ConeLattice::make(cfg);

    std::vector<double> phi0, psi0, phi1, psi1;
    std::vector<std::uint8_t> blown0, blown1;
    detail::StepWorkspace ws;

    const int n0 = lat.row_size(0);
    phi0.resize(n0);
    psi0.resize(n0);
    blown0.resize(n0);
    for (int i = 0; i < n0; ++i) {
        const double x = lat.x_of(0, i);
        const double fv = data.f.eval(x);
        const double gv = data.g.eval(x);
        const bool bad = !std::isfinite(fv) || !std::isfinite(gv) || fv > cfg.v_max || gv > cfg.v_max;
        phi0[i] = bad ? 0.0 : fv;
        psi0[i] = bad ? 0.0 : gv;
        blown0[i] = bad ? 1 : 0;
    }
    if (!on_row(0, phi0, psi0, blown0)) return;

    for (int k = 0; k + 1 < lat.rows; ++k) {
        detail::advance_row(cfg, k, lat, phi0, psi0, blown0, ws, phi1, psi1, blown1);
        phi0.swap(phi1);
        psi0.swap(psi1);
        blown0.swap(blown1);
        if (!on_row(k + 1, phi0, psi0, blown0)) return;
    }
}

/// Full solve over the cone with the entire field retained.
/// Preconditions (checked): structural config invariants plus the hard
/// assumptions condgam and A2.
inline FieldSolution solve_characteristic(const ProblemConfig& cfg, const InitialData& data) {
    {
        const AssumptionReport rep = validate_assumptions(cfg, data);
        if (!rep.at("condgam").satisfied)
            throw ConfigError("condgam fails: margin " + format_g17(rep.at("condgam").margin));
        if (!rep.at("A2").satisfied)
            throw ConfigError("A2 fails: margin " + format_g17(rep.at("A2").margin));
    }
    FieldSolution sol;
    sol.lattice = ConeLattice::make(cfg);
    const std::size_t total = sol.lattice.node_count();
    sol.phi.resize(total);
    sol.psi.resize(total);
    sol.blown.resize(total);
    sol.first_blow_row.assign(static_cast<std::size_t>(sol.lattice.row_size(0)), -1);

    stream_characteristic(cfg, data, [&](int k, const std::vector<double>& phi,
                                         const std::vector<double>& psi,
                                         const std::vector<std::uint8_t>& blown) {
        const std::size_t off = sol.lattice.row_offset(k);
        std::copy(phi.begin(), phi.end(), sol.phi.begin() + off);
        std::copy(psi.begin(), psi.end(), sol.psi.begin() + off);
        std::copy(blown.begin(), blown.end(), sol.blown.begin() + off);
        for (int i = 0; i < sol.lattice.row_size(k); ++i) {
            if (blown[static_cast<std::size_t>(i)]) {
                const int i0 = i + k;  // same abscissa in row 0
                if (sol.first_blow_row[static_cast<std::size_t>(i0)] < 0)
                    sol.first_blow_row[static_cast<std::size_t>(i0)] = k;
            }
        }
        return true;
    });
    return sol;
}

inline std::optional<std::pair<double, double>> FieldSolution::interpolate(double x,
                                                                           double t) const {
    const ConeLattice& lat = lattice;
    if (t < 0.0) return std::nullopt;
    const int k = static_cast<int>(std::floor(t / lat.h));
    if (k < 0 || k + 1 >= lat.rows) return std::nullopt;
    const double wt = (t - lat.t_of(k)) / lat.h;

    const double xr = x / lat.h + static_cast<double>(lat.base_half - k);
    const int i = static_cast<int>(std::floor(xr));
    if (i < 0 || i + 1 >= lat.row_size(k)) return std::nullopt;
    const double wx = xr - static_cast<double>(i);
    // same abscissas one row up sit at index i-1, i
    const int j = i - 1;
    if (j < 0 || j + 1 >= lat.row_size(k + 1)) return std::nullopt;

    const std::size_t a00 = lat.flat(k, i), a01 = lat.flat(k, i + 1);
    const std::size_t a10 = lat.flat(k + 1, j), a11 = lat.flat(k + 1, j + 1);
    if (blown[a00] || blown[a01] || blown[a10] || blown[a11]) return std::nullopt;

    auto lerp2 = [&](const std::vector<double>& v) {
        const double lo = v[a00] * (1.0 - wx) + v[a01] * wx;
        const double hi = v[a10] * (1.0 - wx) + v[a11] * wx;
        return lo * (1.0 - wt) + hi * wt;
    };
    return std::make_pair(lerp2(phi), lerp2(psi));
}

// ---------------------------------------------------------------------------
// Picard iteration (successive approximations): the integral form
//   phi_{n+1}(x,t) = f(x+t) + int_0^t N_n(x+t-s, s) ds,
//   psi_{n+1}(x,t) = g(x-t) + int_0^t N_n(x-t+s, s) ds,
// with composite trapezoidal quadrature along the characteristic segments.
// Iterate 0 is the constant pair (gamma1, gamma2).
// ---------------------------------------------------------------------------

inline FieldSolution picard_initial(const ProblemConfig& cfg) {
    cfg.check_structural();
    FieldSolution it;
    it.lattice = ConeLattice::make(cfg);
    const std::size_t total = it.lattice.node_count();
    it.phi.assign(total, cfg.gamma1);
    it.psi.assign(total, cfg.gamma2);
    it.blown.assign(total, 0);
    it.first_blow_row.assign(static_cast<std::size_t>(it.lattice.row_size(0)), -1);
    return it;
}

inline FieldSolution picard_sweep(const FieldSolution& prev, const ProblemConfig& cfg,
                                  const InitialData& data) {
    const ConeLattice& lat = prev.lattice;
    if (lat.node_count() != prev.phi.size())
        throw ShapeError("iterate does not cover the cone lattice");

    FieldSolution next;
    next.lattice = lat;
    next.phi.resize(lat.node_count());
    next.psi.resize(lat.node_count());
    next.blown.assign(lat.node_count(), 0);
    next.first_blow_row.assign(static_cast<std::size_t>(lat.row_size(0)), -1);

    // source of the previous iterate at every node
    std::vector<double> src(lat.node_count());
    std::vector<std::uint8_t> src_bad(lat.node_count());
    for (int k = 0; k < lat.rows; ++k) {
        const std::size_t off = lat.row_offset(k);
        const double t = lat.t_of(k);
        const int n = lat.row_size(k);
        parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
            const std::size_t a = off + i;
            if (prev.blown[a]) {
                src[a] = 0.0;
                src_bad[a] = 1;
            } else {
                src[a] = source_term(prev.phi[a], prev.psi[a], t, cfg.p, cfg.mu);
                src_bad[a] = 0;
            }
        });
    }

    // Cumulative trapezoid along each characteristic family, advanced row by
    // row:  C_phi(k,i) = C_phi(k-1,i+2) + h/2 (src(k-1,i+2) + src(k,i)),
    //       C_psi(k,i) = C_psi(k-1,i)  + h/2 (src(k-1,i)  + src(k,i)).
    // Accumulation order is fixed, which keeps the iteration monotone in
    // floating point as well.
    std::vector<double> cphi_prev, cpsi_prev, cphi, cpsi;
    std::vector<std::uint8_t> mphi_prev, mpsi_prev, mphi, mpsi;

    for (int k = 0; k < lat.rows; ++k) {
        const std::size_t off = lat.row_offset(k);
        const int n = lat.row_size(k);
        cphi.resize(n);
        cpsi.resize(n);
        mphi.resize(n);
        mpsi.resize(n);
        if (k == 0) {
            for (int i = 0; i < n; ++i) {
                cphi[i] = cpsi[i] = 0.0;
                mphi[i] = mpsi[i] = src_bad[off + i];
            }
        } else {
            const std::size_t offp = lat.row_offset(k - 1);
            const double half_h = 0.5 * cfg.h;
            parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
                const std::size_t here = off + i;
                const std::size_t par_phi = offp + i + 2;
                const std::size_t par_psi = offp + i;
                mphi[i] = static_cast<std::uint8_t>(mphi_prev[i + 2] | src_bad[here] |
                                                    src_bad[par_phi]);
                mpsi[i] =
                    static_cast<std::uint8_t>(mpsi_prev[i] | src_bad[here] | src_bad[par_psi]);
                cphi[i] = cphi_prev[i + 2] + half_h * (src[par_phi] + src[here]);
                cpsi[i] = cpsi_prev[i] + half_h * (src[par_psi] + src[here]);
            });
        }
        const double t = lat.t_of(k);
        for (int i = 0; i < n; ++i) {
            const std::size_t a = off + i;
            const double x = lat.x_of(k, i);
            bool bad = mphi[i] || mpsi[i];
            double ph = 0.0, ps = 0.0;
            if (!bad) {
                ph = data.f.eval(x + t) + cphi[i];
                ps = data.g.eval(x - t) + cpsi[i];
                bad = !std::isfinite(ph) || !std::isfinite(ps) || ph > cfg.v_max ||
                      ps > cfg.v_max;
            }
            next.phi[a] = bad ? 0.0 : ph;
            next.psi[a] = bad ? 0.0 : ps;
            next.blown[a] = bad ? 1 : 0;
            if (bad) {
                const int i0 = i + k;
                if (next.first_blow_row[static_cast<std::size_t>(i0)] < 0)
                    next.first_blow_row[static_cast<std::size_t>(i0)] = k;
            }
        }
        cphi_prev.swap(cphi);
        cpsi_prev.swap(cpsi);
        mphi_prev.swap(mphi);
        mpsi_prev.swap(mpsi);
    }
    return next;
}

// ---------------------------------------------------------------------------
// Reconstruction of u:  u(x,t) = u0(x) + 1/2 int_0^t (phi+psi)(x,s) ds,
// composite trapezoid in t over the unmasked prefix of each abscissa.
// ---------------------------------------------------------------------------

/// Returns u on the same flat node layout as `sol`; masked or unreachable
/// nodes hold NaN.
inline std::vector<double> reconstruct_u(const FieldSolution& sol, const Expr& u0) {
    const ConeLattice& lat = sol.lattice;
    std::vector<double> u(lat.node_count(), std::numeric_limits<double>::quiet_NaN());
    const int n0 = lat.row_size(0);
    for (int i0 = 0; i0 < n0; ++i0) {
        const double x = lat.x_of(0, i0);
        const double base = u0.eval(x);
        double acc = 0.0;
        double prev_sum = 0.0;
        for (int k = 0; k < lat.rows; ++k) {
            const int i = i0 - k;  // same abscissa at row k
            if (i < 0 || i >= lat.row_size(k)) break;
            if (sol.blown_at(k, i)) break;
            const double s = sol.sum_at(k, i);
            if (k > 0) acc += 0.25 * lat.h * (prev_sum + s);  // 1/2 * trapezoid
            prev_sum = s;
            u[lat.flat(k, i)] = base + acc;
        }
    }
    return u;
}

}  // namespace blowup

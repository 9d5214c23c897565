#pragma once

#include <cassert>
#include <cmath>
#include <vector>

#include "blowup/common.hpp"

namespace blowup {

// ---------------------------------------------------------------------------
// Spatially homogeneous companion ODE
//
//   phi_hat' = psi_hat' = 2^{-p} (phi_hat + psi_hat)^p - mu/2 (phi_hat + psi_hat)
//
// Both right-hand sides coincide, so phi_hat - psi_hat is conserved and the
// sum y = phi_hat + psi_hat obeys the Bernoulli equation
//   y' = 2^{1-p} y^p - mu y,
// solved in closed form via v = y^{1-p}.  This module is the ground-truth
// oracle for blow-up times and trajectories.
// ---------------------------------------------------------------------------

struct OdeState {
    double t = 0.0;
    double y = 0.0;  // phi_hat + psi_hat
    double phi_hat = 0.0;
    double psi_hat = 0.0;
};

/// Blow-up threshold of the Bernoulli equation: y(0) must exceed 2 mu^{1/(p-1)}.
inline double bernoulli_threshold(double p, double mu) {
    if (mu == 0.0) return 0.0;
    return 2.0 * std::pow(mu, 1.0 / (p - 1.0));
}

/// Finite blow-up time of y' = 2^{1-p} y^p - mu y from y(0) = gamma_sum.
inline double closed_form_T1(double p, double mu, double gamma_sum) {
    if (p <= 1.0) throw DomainError("closed_form_T1 requires p > 1");
    if (gamma_sum <= 0.0) throw DomainError("closed_form_T1 requires gamma_sum > 0");
    const double a = std::pow(2.0, 1.0 - p);
    if (mu == 0.0) {
        // undamped limit: y^{1-p} decreases linearly at rate (p-1) 2^{1-p}
        return std::pow(gamma_sum, 1.0 - p) / ((p - 1.0) * a);
    }
    if (gamma_sum <= bernoulli_threshold(p, mu))
        throw NoBlowupError("gamma_1 + gamma_2 below the ODE blow-up threshold 2 mu^{1/(p-1)}");
    const double denom = a - mu * std::pow(gamma_sum, 1.0 - p);
    return std::log(a / denom) / ((p - 1.0) * mu);
}

/// Closed-form state at time t; components recovered from the conserved
/// difference gamma1 - gamma2.  Throws BlowupPassedError for t >= T1.
inline OdeState closed_form_state(double p, double mu, double gamma1, double gamma2, double t) {
    const double gamma = gamma1 + gamma2;
    const double t1 = closed_form_T1(p, mu, gamma);
    if (t >= t1) throw BlowupPassedError("time at or past ODE blow-up T1 = " + format_g17(t1), t1);
    if (t < 0.0) throw DomainError("closed_form_state requires t >= 0");
    const double a = std::pow(2.0, 1.0 - p);
    double y;
    if (mu == 0.0) {
        y = std::pow(std::pow(gamma, 1.0 - p) - (p - 1.0) * a * t, 1.0 / (1.0 - p));
    } else {
        const double v =
            (std::pow(gamma, 1.0 - p) - a / mu) * std::exp(-(1.0 - p) * mu * t) + a / mu;
        y = std::pow(v, 1.0 / (1.0 - p));
    }
    return {t, y, (y + gamma1 - gamma2) / 2.0, (y - gamma1 + gamma2) / 2.0};
}

struct OdeTrajectory {
    std::vector<OdeState> states;
    double detected_T1 = 0.0;
    double dt_used = 0.0;
};

namespace detail {

// One RK4 run of y' = 2^{1-p} y^p - damping(t) y; stops once y exceeds cap.
// Returns (t_stop, y_stop) at the first capped state and fills states if asked.
template <typename Damping>
std::pair<double, double> rk4_capped(double p, Damping damping, double y0, double dt, double cap,
                                     std::vector<double>* ys) {
    const double a = std::pow(2.0, 1.0 - p);
    auto rhs = [&](double t, double y) {
        assert(y > 0.0 && "positivity lost in ODE integration");
        return a * pow_pos(y, p) - damping(t) * y;
    };
    double t = 0.0, y = y0;
    if (ys != nullptr) ys->push_back(y);
    // hard iteration bound keeps malformed parameter sets from spinning
    const std::size_t max_steps = 400000000;
    for (std::size_t step = 0; step < max_steps; ++step) {
        const double k1 = rhs(t, y);
        if (k1 <= 0.0) throw NumericalError("ODE right-hand side not positive; no blow-up ahead");
        const double k2 = rhs(t + dt / 2.0, y + dt / 2.0 * k1);
        const double k3 = rhs(t + dt / 2.0, y + dt / 2.0 * k2);
        const double k4 = rhs(t + dt, y + dt * k3);
        const double yn = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += dt;
        if (!std::isfinite(yn)) {
            if (y > cap * 1e-3) return {t, y};  // already deep in the blow-up regime
            throw NumericalError("non-finite ODE state before reaching the cap");
        }
        y = yn;
        if (y > cap) return {t, y};
        if (ys != nullptr) ys->push_back(y);
    }
    throw NumericalError("ODE integration exceeded the step budget without blow-up");
}

// Capped trajectory plus the leading-order singularity extrapolation
//   T ~ t_stop + (p-1)^{-1} 2^{p-1} y_stop^{1-p},
// refined by halving dt until the detected time moves by < 1e-4 relative.
template <typename Damping>
OdeTrajectory rk4_generic(double p, double mu, Damping damping, double gamma1, double gamma2,
                          double dt, double cap, bool check_monotone) {
    if (dt <= 0.0) throw DomainError("rk4 requires dt > 0");
    const double gamma = gamma1 + gamma2;
    if (cap <= gamma) throw DomainError("rk4 requires cap > gamma1 + gamma2");
    (void)mu;

    auto detect = [&](double step, std::vector<double>* ys) {
        auto [ts, ystop] = rk4_capped(p, damping, gamma, step, cap, ys);
        return ts + std::pow(2.0, p - 1.0) / (p - 1.0) * std::pow(ystop, 1.0 - p);
    };

    OdeTrajectory out;
    std::vector<double> ys;
    double T = detect(dt, &ys);
    double step = dt;
    for (int halvings = 0; halvings < 24; ++halvings) {
        const double T_next = detect(step / 2.0, nullptr);
        const double change = std::fabs(T_next - T);
        T = T_next;
        step /= 2.0;
        if (change < 1e-4 * T) break;
    }
    out.detected_T1 = T;
    out.dt_used = dt;
    out.states.reserve(ys.size());
    const double diff = gamma1 - gamma2;  // conserved: both RHS are identical
    double prev = -1.0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        const double y = ys[i];
        if (check_monotone && y <= prev)
            throw NumericalError("ODE trajectory lost monotonicity");
        prev = y;
        out.states.push_back({static_cast<double>(i) * dt, y, (y + diff) / 2.0, (y - diff) / 2.0});
    }
    return out;
}

}  // namespace detail

/// RK4 trajectory of the autonomous system (constant damping mu/2 per
/// component).  The recorded states use the initial step dt; blow-up
/// detection is refined internally on halved steps.
inline OdeTrajectory rk4_trajectory(double p, double mu, double gamma1, double gamma2, double dt,
                                    double cap) {
    return detail::rk4_generic(
        p, mu, [mu](double) { return mu; }, gamma1, gamma2, dt, cap, true);
}

/// RK4 trajectory of y' = 2^{1-p} y^p - mu/(1+t) y, the x-independent
/// reduction of the PDE system (damping decays like the wave scaling).
inline OdeTrajectory rk4_trajectory_scaled_damping(double p, double mu, double gamma1,
                                                   double gamma2, double dt, double cap) {
    return detail::rk4_generic(
        p, mu, [mu](double t) { return mu / (1.0 + t); }, gamma1, gamma2, dt, cap, true);
}

}  // namespace blowup

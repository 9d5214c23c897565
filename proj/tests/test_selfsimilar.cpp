#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "blowup/selfsimilar.hpp"

using namespace blowup;

namespace {

ProblemConfig reference_config(double h = 1e-3) {
    ProblemConfig cfg;
    cfg.p = 2.0;
    cfg.mu = 1.0;
    cfg.gamma1 = cfg.gamma2 = 5.0;
    cfg.r_star = 0.7;
    cfg.t_star = 0.3;
    cfg.eps0 = 1.0;
    cfg.eps1 = 1.0;
    cfg.h = h;
    cfg.v_max = 1e8;
    cfg.apply_default_thresholds();
    return cfg;
}

BlowupCurve synthetic_line(double a, double b, double x_lo, double x_hi, int n) {
    BlowupCurve c;
    c.dx = (x_hi - x_lo) / (n - 1);
    for (int i = 0; i < n; ++i) {
        const double x = x_lo + c.dx * i;
        c.xs.push_back(x);
        c.t_hat.push_back(a + b * x);
        c.k_hat.push_back(1.0);
        c.fit_residual.push_back(0.0);
        c.ladders.push_back({});
    }
    c.t_prime.assign(n, b);
    return c;
}

// Field equal to the alpha = 0 profile: phi = C_phi (T0 - t)^{-q}, with the
// lattice chosen so the probe points of the convergence experiment land on
// nodes (T0 and lambda * probe spacings are multiples of h).
FieldSolution profile_fixpoint_field(double p, double T0, double h) {
    ProblemConfig cfg = reference_config(h);
    cfg.p = p;
    FieldSolution sol;
    sol.lattice = ConeLattice::make(cfg);
    const SimilarityProfile prof = profile_constants(p, 0.0);
    const std::size_t total = sol.lattice.node_count();
    sol.phi.resize(total);
    sol.psi.resize(total);
    sol.blown.assign(total, 0);
    sol.first_blow_row.assign(static_cast<std::size_t>(sol.lattice.row_size(0)), -1);
    for (int k = 0; k < sol.lattice.rows; ++k) {
        const double t = sol.lattice.t_of(k);
        for (int i = 0; i < sol.lattice.row_size(k); ++i) {
            const std::size_t a = sol.lattice.flat(k, i);
            if (t >= T0 - 1e-9) {
                sol.blown[a] = 1;
                continue;
            }
            const double r = std::pow(T0 - t, -prof.q);
            sol.phi[a] = prof.c_phi * r;
            sol.psi[a] = prof.c_psi * r;
        }
    }
    return sol;
}

}  // namespace

TEST_CASE("profile constants") {
    {
        const SimilarityProfile pr = profile_constants(2.0, 0.0);
        CHECK(pr.amplitude == Catch::Approx(2.0).epsilon(1e-14));
        CHECK(pr.c_phi == Catch::Approx(1.0).epsilon(1e-14));
        CHECK(pr.c_psi == Catch::Approx(1.0).epsilon(1e-14));
    }
    {
        const SimilarityProfile pr = profile_constants(2.0, 0.5);
        CHECK(pr.amplitude == Catch::Approx(1.5).epsilon(1e-14));
        CHECK(pr.c_phi == Catch::Approx(0.375).epsilon(1e-14));
        CHECK(pr.c_psi == Catch::Approx(1.125).epsilon(1e-14));
    }
    SECTION("C_phi + C_psi = A and reflection symmetry") {
        for (double p : {1.5, 2.0, 3.0})
            for (double a : {-0.9, -0.5, 0.0, 0.3, 0.8}) {
                const SimilarityProfile pr = profile_constants(p, a);
                const SimilarityProfile mr = profile_constants(p, -a);
                CHECK(pr.c_phi + pr.c_psi == Catch::Approx(pr.amplitude).epsilon(1e-14));
                CHECK(pr.c_phi == Catch::Approx(mr.c_psi).epsilon(1e-14));
                CHECK(pr.c_phi > 0.0);
                CHECK(pr.c_psi > 0.0);
            }
    }
    CHECK_THROWS_AS(profile_constants(2.0, 1.0), DomainError);
    CHECK_THROWS_AS(profile_constants(2.0, -1.3), DomainError);
}

TEST_CASE("profile evaluation") {
    {
        const auto [vp, vq] = profile_eval(profile_constants(2.0, 0.0), 0.0, -1.0);
        CHECK(vp == Catch::Approx(1.0).epsilon(1e-14));
        CHECK(vq == Catch::Approx(1.0).epsilon(1e-14));
    }
    {
        const auto [vp, vq] = profile_eval(profile_constants(2.0, 0.5), 0.0, -1.0);
        CHECK(vp == Catch::Approx(0.375).epsilon(1e-14));
        CHECK(vq == Catch::Approx(1.125).epsilon(1e-14));
    }
    const SimilarityProfile pr = profile_constants(2.0, 0.5);
    CHECK_THROWS_AS(profile_eval(pr, 1.0, 0.5), OutsideDomainError);   // s = alpha y
    CHECK_THROWS_AS(profile_eval(pr, 1.0, 0.7), OutsideDomainError);
}

TEST_CASE("profile residual at machine precision") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> uy(-3.0, 3.0);
    for (double p : {1.5, 2.0, 3.0}) {
        for (double alpha : {-0.5, 0.0, 0.5}) {
            const SimilarityProfile prof = profile_constants(p, alpha);
            std::vector<std::pair<double, double>> samples;
            while (samples.size() < 100) {
                const double y = uy(rng);
                const double s = alpha * y - std::uniform_real_distribution<double>(
                                                 0.05, 4.0)(rng);
                samples.emplace_back(y, s);
            }
            INFO("p=" << p << " alpha=" << alpha);
            CHECK(profile_residual(prof, samples) <= 1e-12);
        }
    }
}

TEST_CASE("perturbed constants are detected") {
    SimilarityProfile prof = profile_constants(2.0, 0.5);
    // the closed-form residual uses the amplitude consistently, so perturb
    // one component constant
    prof.c_phi *= 1.01;
    std::vector<std::pair<double, double>> samples = {{0.0, -1.0}, {0.5, -0.5}, {-1.0, -2.0}};
    CHECK(profile_residual(prof, samples) > 1e-3);
}

TEST_CASE("analytic residual spot check at (0, -1), p=2, alpha=0.5") {
    // D_- V_phi = q (1+alpha) C_phi rho^{-q-1} = 1.5 * 0.375 = 0.5625
    // RHS = 2^{-2} (V_phi + V_psi)^2 = 0.25 * 1.5^2 = 0.5625
    const SimilarityProfile prof = profile_constants(2.0, 0.5);
    const double dminus = prof.q * (1.0 + prof.alpha) * prof.c_phi;
    CHECK(dminus == Catch::Approx(0.5625).epsilon(1e-14));
    const auto [vp, vq] = profile_eval(prof, 0.0, -1.0);
    CHECK(0.25 * (vp + vq) * (vp + vq) == Catch::Approx(0.5625).epsilon(1e-14));
}

TEST_CASE("scaling covariance of the profile") {
    // lambda^q V(lambda y, lambda s) = V(y, s)
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> uy(-2.0, 2.0), ul(0.1, 10.0);
    const SimilarityProfile prof = profile_constants(2.5, -0.3);
    int done = 0;
    while (done < 50) {
        const double y = uy(rng);
        const double s = prof.alpha * y - std::uniform_real_distribution<double>(0.1, 3.0)(rng);
        const double lambda = ul(rng);
        const auto [v1p, v1q] = profile_eval(prof, lambda * y, lambda * s);
        const auto [v0p, v0q] = profile_eval(prof, y, s);
        const double scale = std::pow(lambda, prof.q);
        CHECK(scale * v1p == Catch::Approx(v0p).epsilon(1e-12));
        CHECK(scale * v1q == Catch::Approx(v0q).epsilon(1e-12));
        ++done;
    }
}

TEST_CASE("rescaled curve identities") {
    SECTION("affine curve rescales to an exact line") {
        const BlowupCurve c = synthetic_line(0.5, 0.1, -1.0, 1.0, 201);
        const FieldSolution dummy = profile_fixpoint_field(2.0, 0.2, 1e-3);
        const RescaledView v = rescale(dummy, c, 0.0, 0.1, 2.0);
        for (double y : {-1.0, -0.3, 0.0, 0.4, 1.0})
            CHECK(v.t_rescaled(y) == Catch::Approx(0.1 * y).margin(1e-12));
    }
    SECTION("T_l(0) = 0 for every center and scale") {
        const BlowupCurve c = synthetic_line(0.4, -0.07, -1.0, 1.0, 201);
        const FieldSolution dummy = profile_fixpoint_field(2.0, 0.2, 1e-3);
        for (double x0 : {-0.5, 0.0, 0.3})
            for (double lambda : {1.0, 0.25, 0.05})
                CHECK(rescale(dummy, c, x0, lambda, 2.0).t_rescaled(0.0) == 0.0);
    }
    SECTION("unit scale is the identity view") {
        const double T0 = 0.2;
        const FieldSolution sol = profile_fixpoint_field(2.0, T0, 1e-3);
        const BlowupCurve c = synthetic_line(T0, 0.0, -0.9, 0.9, 181);
        const RescaledView v = rescale(sol, c, 0.0, 1.0, 2.0);
        const auto s = v.sample(0.05, -0.1);
        REQUIRE(s.has_value());
        const auto direct = sol.interpolate(0.05, T0 - 0.1);
        REQUIRE(direct.has_value());
        CHECK(s->first == Catch::Approx(direct->first).epsilon(1e-14));
    }
    SECTION("lambda must be positive and x0 in support") {
        const BlowupCurve c = synthetic_line(0.5, 0.1, -1.0, 1.0, 201);
        const FieldSolution dummy = profile_fixpoint_field(2.0, 0.2, 1e-3);
        CHECK_THROWS_AS(rescale(dummy, c, 0.0, -0.1, 2.0), DomainError);
        CHECK_THROWS_AS(rescale(dummy, c, 5.0, 0.1, 2.0), OutsideDomainError);
    }
}

TEST_CASE("profile convergence on the exact fixpoint field") {
    // With the field equal to V_{.,0} and lattice-aligned probes, the
    // rescaling reproduces the profile exactly at every lambda.
    const double h = 2.5e-4, T0 = 0.2;
    const FieldSolution sol = profile_fixpoint_field(2.0, T0, h);
    const BlowupCurve curve = synthetic_line(T0, 0.0, -0.9, 0.9, 181);
    ProblemConfig cfg = reference_config(h);
    const std::vector<double> lambdas = {0.1, 0.05, 0.025};
    const ProfileConvergence table = profile_convergence(sol, curve, cfg, 0.0, lambdas);
    CHECK(table.alpha == 0.0);
    REQUIRE(table.rows.size() == 3);
    for (const auto& row : table.rows) {
        CHECK(row.sup_error <= 1e-10);
        CHECK(row.coverage >= 0.99);
    }
}

TEST_CASE("profile convergence rejects sub-resolution lambda") {
    const double h = 1e-3, T0 = 0.2;
    const FieldSolution sol = profile_fixpoint_field(2.0, T0, h);
    const BlowupCurve curve = synthetic_line(T0, 0.0, -0.9, 0.9, 181);
    ProblemConfig cfg = reference_config(h);
    const std::vector<double> lambdas = {0.005};
    CHECK_THROWS_AS(profile_convergence(sol, curve, cfg, 0.0, lambdas), DomainError);
}

TEST_CASE("flat curve slope probe reports symmetric alphas") {
    const BlowupCurve c = synthetic_line(0.3, 0.0, -1.0, 1.0, 201);
    const auto s = c.slope_at(0.0);
    CHECK(s.centered == 0.0);
    CHECK(s.left == 0.0);
    CHECK(s.right == 0.0);
}

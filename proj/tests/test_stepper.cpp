/// Unit tests for the projection scheme: per-step identities, reductions and
/// the dense Helmholtz-decomposition oracle.

#include <catch2/catch_amalgamated.hpp>

#include "macflow/commands.hpp"
#include "macflow/manufactured.hpp"
#include "macflow/operators.hpp"
#include "macflow/random_fields.hpp"
#include "macflow/stepper.hpp"

using namespace macflow;

namespace {

StepperConfig basic_config(const StaggeredGrid& g, double dt = 0.01, double chi0 = 1.0) {
    StepperConfig cfg;
    cfg.dt = dt;
    cfg.nu = 0.05;
    cfg.filter =
        FilterSpec::mesh_scaled(g, IndicatorKind::of(IndicatorType::NormalizedGradient), 1.0);
    cfg.filter.chi0 = chi0;
    cfg.filter.solver = cfg.solver;
    return cfg;
}

/// Divergence-free field from a stream function on the grid nodes. With
/// power-of-two mesh widths and lattice-valued psi every difference and
/// scaling below is exact in floating point, so the discrete divergence is
/// exactly zero, not just zero to round-off.
FaceVectorField stream_function_field(const StaggeredGrid& g, Rng& rng) {
    std::vector<std::vector<double>> psi(g.nx + 1, std::vector<double>(g.ny + 1, 0.0));
    for (int i = 1; i < g.nx; ++i)
        for (int j = 1; j < g.ny; ++j)
            psi[i][j] = std::round(rng.symmetric() * 1048576.0) * 0x1.0p-20;
    FaceVectorField w(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) w.u(i, j) = (psi[i][j + 1] - psi[i][j]) / g.hy;
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) w.v(i, j) = -(psi[i + 1][j] - psi[i][j]) / g.hx;
    return w;
}

bool states_identical(const FlowState& a, const FlowState& b) {
    return a.u.u.data() == b.u.u.data() && a.u.v.data() == b.u.v.data() &&
           a.w.u.data() == b.w.u.data() && a.w.v.data() == b.w.v.data() &&
           a.p.data() == b.p.data();
}

} // namespace

TEST_CASE("momentum step: zero data stays zero") {
    const StaggeredGrid g = make_grid(8, 8, 1.0, 1.0);
    const StepperConfig cfg = basic_config(g);
    FlowState state(g);
    const FaceVectorField wt = momentum_step(state, cfg, g, cfg.dt);
    CHECK(wt.max_abs() == 0.0);
}

TEST_CASE("momentum step approaches the Stokes balance for large viscosity") {
    const StaggeredGrid g = make_grid(8, 8, 1.0, 1.0);
    StepperConfig cfg = basic_config(g, 1.0);
    cfg.nu = 1e5;
    cfg.solver.rel_tol = 1e-13;
    const double nu = cfg.nu;
    cfg.forcing = [&g, nu](double) {
        FaceVectorField f(g);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i <= g.nx; ++i) f.u(i, j) = nu; // f scales with nu
        return f;
    };
    FlowState state(g);
    const FaceVectorField wt = momentum_step(state, cfg, g, cfg.dt);

    // dense Stokes oracle: nu * var_diffusion x = f
    LinOp stokes = [&g, nu](const std::vector<double>& in, std::vector<double>& out) {
        ScalarField x(g, Loc::UFace);
        unpack_interior(in, g, x);
        ScalarField lx = var_diffusion(x, unit_coefficient(g), g);
        out.resize(in.size());
        pack_interior(lx, g, out, 0);
        for (double& t : out) t *= nu;
    };
    std::vector<double> f(n_interior(Loc::UFace, g), nu);
    const std::vector<double> xs = dense_solve(stokes, f);
    ScalarField ws(g, Loc::UFace);
    unpack_interior(xs, g, ws);
    axpy(-1.0, wt.u, ws);
    CHECK(ws.max_abs() <= 1e-3 * wt.u.max_abs());
}

TEST_CASE("momentum residual on exact samples is O(dt) above the O(h^2) floor") {
    const double nu = 0.05, t0 = 0.2;
    auto defect = [&](int n, double dt) {
        const StaggeredGrid g = make_grid(n, n, 1.0, 1.0);
        const FaceVectorField u0 = exact_velocity(t0, g);
        const FaceVectorField u1 = exact_velocity(t0 + dt, g);
        FaceVectorField r = u1;
        scale(1.0 / dt, r);
        axpy(-1.0 / dt, u0, r);
        axpy(1.0, advect(u0, u1, g), r);
        axpy(nu, var_diffusion(u1, unit_coefficient(g), g), r);
        ScalarField pex(g, Loc::Cell);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                pex(i, j) = manufactured::pressure(g.xc(i), g.yc(j), t0 + dt);
        axpy(1.0, gradient_p(pex, g), r);
        axpy(-1.0, forcing(t0 + dt, nu, g), r);
        // interior DOFs only: boundary faces carry Dirichlet data, no equation
        std::vector<double> packed(n_interior(Loc::UFace, g) + n_interior(Loc::VFace, g));
        pack_interior(r.u, g, packed, 0);
        pack_interior(r.v, g, packed, n_interior(Loc::UFace, g));
        double s = 0.0;
        for (double t : packed) s += t * t;
        return std::sqrt(s * g.hx * g.hy);
    };
    // first order in dt while dt dominates
    const double d16 = defect(64, 0.16);
    const double d08 = defect(64, 0.08);
    CHECK(d16 / d08 > 1.7);
    CHECK(d16 / d08 < 3.2);
    // spatial floor is O(h^2)
    const StaggeredGrid g64 = make_grid(64, 64, 1.0, 1.0);
    CHECK(defect(64, 0.005) < 30.0 * g64.hx * g64.hx);
}

TEST_CASE("projection leaves an exactly divergence-free field untouched") {
    const StaggeredGrid g = make_grid(16, 16, 1.0, 1.0); // h = 1/16: exact arithmetic
    const StepperConfig cfg = basic_config(g);
    Rng rng(3);
    const FaceVectorField w = stream_function_field(g, rng);
    REQUIRE(divergence(w, g).max_abs() == 0.0);
    auto [wp, p] = projection_step(w, cfg, g);
    CHECK(p.max_abs() == 0.0);
    CHECK(wp.u.data() == w.u.data());
    CHECK(wp.v.data() == w.v.data());
}

TEST_CASE("projection annihilates gradients: Helmholtz decomposition") {
    const StaggeredGrid g = make_grid(8, 8, 1.0, 1.0);
    const StepperConfig cfg = basic_config(g, 0.02);
    Rng rng(9);
    ScalarField q = random_scalar_field(g, Loc::Cell, rng);
    remove_mean(q);
    const FaceVectorField wt = gradient_p(q, g);

    auto [w, p] = projection_step(wt, cfg, g);
    CHECK(l2_norm(w, g) <= 1e-8 * l2_norm(wt, g));

    // p recovers q/dt up to the mean
    ScalarField diff = p;
    scale(cfg.dt, diff);
    axpy(-1.0, q, diff);
    remove_mean(diff);
    CHECK(l2_norm(diff, g) <= 1e-8 * l2_norm(q, g));
}

TEST_CASE("projection Pythagoras identity") {
    const StaggeredGrid g = make_grid(16, 16, 1.0, 1.0);
    const StepperConfig cfg = basic_config(g);
    Rng rng(15);
    for (int rep = 0; rep < 5; ++rep) {
        const FaceVectorField wt = random_face_field(g, rng);
        auto [w, p] = projection_step(wt, cfg, g);
        const double a = inner(w, w, g);
        FaceVectorField d = w;
        axpy(-1.0, wt, d);
        const double b = inner(d, d, g);
        const double c = inner(wt, wt, g);
        CHECK(std::abs(a + b - c) <= 1e-12 * c);
        CHECK(l2_norm(divergence(w, g), g) <=
              std::max(cfg.solver.rel_tol * l2_norm(divergence(wt, g), g), cfg.solver.abs_tol));
    }
}

TEST_CASE("filter-relax: chi = 0 and the identity filter return w bitwise") {
    const StaggeredGrid g = make_grid(10, 10, 1.0, 1.0);
    Rng rng(19);
    const FaceVectorField w = random_face_field(g, rng);

    StepperConfig cfg = basic_config(g, 0.01, 0.0); // chi0 = 0
    FilterRelaxResult r0 = filter_relax_step(w, cfg, g);
    CHECK(r0.u.u.data() == w.u.data());
    CHECK(r0.model_dissipation_increment == 0.0);

    StepperConfig cfg1 = basic_config(g, 0.01, 1.0);
    cfg1.filter = FilterSpec::uniform(g, IndicatorKind::constant(), 0.0); // delta = 0
    cfg1.filter.chi0 = 1.0;
    FilterRelaxResult r1 = filter_relax_step(w, cfg1, g);
    CHECK(r1.u.u.data() == w.u.data());
    CHECK(r1.u.v.data() == w.v.data());
}

TEST_CASE("filter-relax keeps the norm ordering, with and without re-projection") {
    const StaggeredGrid g = make_grid(16, 16, 1.0, 1.0);
    Rng rng(23);
    StepperConfig cfg = basic_config(g, 0.5, 1.0); // chi = 0.5, strong blend
    for (bool reproject : {false, true}) {
        cfg.reproject = reproject;
        for (int rep = 0; rep < 5; ++rep) {
            const FaceVectorField w = random_face_field(g, rng);
            const FilterRelaxResult r = filter_relax_step(w, cfg, g);
            CHECK(l2_norm(r.u, g) <= l2_norm(w, g) * (1.0 + 1e-12));
            CHECK(r.norm_u_pre_reproject <= l2_norm(w, g) * (1.0 + 1e-12));
            if (reproject)
                CHECK(l2_norm(r.u, g) <= r.norm_u_pre_reproject * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("chi clamping") {
    const StaggeredGrid g = make_grid(8, 8, 1.0, 1.0);
    StepperConfig cfg = basic_config(g, 0.5, 5.0); // chi0 dt = 2.5
    bool clamped = false;
    CHECK(cfg.chi(&clamped) == 1.0);
    CHECK(clamped);
}

TEST_CASE("advance: zero state with zero forcing stays zero") {
    const StaggeredGrid g = make_grid(8, 8, 1.0, 1.0);
    const StepperConfig cfg = basic_config(g);
    FlowState state(g);
    auto [next, rep] = advance(state, cfg, g);
    CHECK(next.u.max_abs() == 0.0);
    CHECK(next.w.max_abs() == 0.0);
    CHECK(next.p.max_abs() == 0.0);
    CHECK(rep.kinetic_energy == 0.0);
    CHECK(rep.viscous_dissipation == 0.0);
    CHECK(rep.model_dissipation_increment == 0.0);
    CHECK(rep.div_residual == 0.0);
    CHECK(rep.t == Catch::Approx(cfg.dt));
}

TEST_CASE("advance with chi0 = 0 is bitwise the plain Chorin step") {
    const StaggeredGrid g = make_grid(16, 16, 1.0, 1.0);
    StepperConfig cfg = basic_config(g, 0.01, 0.0);
    FlowState state(g);
    state.w = random_divfree_field(g, 7u, cfg.solver);
    state.u = state.w;

    FlowState chorin = state;
    FlowState filtered = state;
    for (int n = 0; n < 5; ++n) {
        auto [next, rep] = advance(filtered, cfg, g);
        filtered = next;

        const FaceVectorField wt = momentum_step(chorin, cfg, g, chorin.t + cfg.dt);
        auto [w, p] = projection_step(wt, cfg, g);
        chorin.t += cfg.dt;
        chorin.w = w;
        chorin.u = std::move(w);
        chorin.p = std::move(p);

        REQUIRE(states_identical(filtered, chorin));
    }
}

TEST_CASE("run of one step equals a single advance") {
    const StaggeredGrid g = make_grid(12, 12, 1.0, 1.0);
    const StepperConfig cfg = basic_config(g);
    FlowState state(g);
    state.w = random_divfree_field(g, 11u, cfg.solver);
    state.u = state.w;

    auto [next, rep] = advance(state, cfg, g);
    const RunResult rr = run(state, cfg, g, 1);
    CHECK(states_identical(rr.final_state, next));
    CHECK(rr.reports.size() == 1);
    CHECK(rr.reports[0].norm_w == rep.norm_w);
    CHECK_THROWS_AS(run(state, cfg, g, 0), std::invalid_argument);
}

TEST_CASE("zero-forcing decay: energy monotone, invariants hold each step") {
    const StaggeredGrid g = make_grid(16, 16, 1.0, 1.0);
    const StepperConfig cfg = basic_config(g);
    FlowState state(g);
    state.w = random_divfree_field(g, 13u, cfg.solver);
    state.u = state.w;

    const RunResult rr = run(state, cfg, g, 50);
    CHECK(rr.stability_ok);
    double prev_ke = std::numeric_limits<double>::infinity();
    for (const auto& rep : rr.reports) {
        CHECK(rep.stability_ok);
        CHECK(rep.kinetic_energy <= prev_ke * (1.0 + 1e-12));
        CHECK(rep.norm_u <= rep.norm_w * (1.0 + 1e-12));
        CHECK(rep.norm_w <= rep.norm_wtilde * (1.0 + 1e-12));
        CHECK(rep.model_dissipation_increment >= 0.0);
        prev_ke = rep.kinetic_energy;
    }
}

TEST_CASE("doubling chi0 keeps model dissipation increments non-negative") {
    const StaggeredGrid g = make_grid(16, 16, 1.0, 1.0);
    FlowState state(g);
    state.w = random_divfree_field(g, 17u, SolverConfig{});
    state.u = state.w;

    for (double chi0 : {1.0, 2.0}) {
        const StepperConfig cfg = basic_config(g, 0.01, chi0);
        const RunResult rr = run(state, cfg, g, 20);
        double total = 0.0;
        for (const auto& rep : rr.reports) {
            CHECK(rep.model_dissipation_increment >= 0.0);
            total += rep.model_dissipation_increment;
        }
        CHECK(total >= 0.0);
    }
}

TEST_CASE("filter-before-projection mode leaves a divergence-free relaxed state") {
    const StaggeredGrid g = make_grid(16, 16, 1.0, 1.0);
    StepperConfig cfg = basic_config(g);
    cfg.mode = FilterMode::FilterBeforeProjection;
    FlowState state(g);
    state.w = random_divfree_field(g, 19u, cfg.solver);
    state.u = state.w;

    const RunResult rr = run(state, cfg, g, 10);
    CHECK(rr.stability_ok);
    for (const auto& rep : rr.reports) {
        CHECK(rep.stability_ok);
        CHECK(rep.norm_u == rep.norm_w); // u and w coincide in this mode
    }
    CHECK(l2_norm(divergence(rr.final_state.u, g), g) < 1e-8);
}

TEST_CASE("stepper config validation") {
    const StaggeredGrid g = make_grid(8, 8, 1.0, 1.0);
    StepperConfig cfg = basic_config(g);
    cfg.dt = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.dt = 0.01;
    cfg.nu = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

/// @file manufactured.hpp
/// @brief Closed-form manufactured solution on the unit square and the
/// forcing that makes it solve the Navier-Stokes system exactly.
///
///   u(x,y,t) = cos(t) * ( sin^2(pi x) sin(2 pi y), -sin(2 pi x) sin^2(pi y) )
///   p(x,y,t) = cos(t) * cos(pi x) cos(pi y)
///
/// div u = 0 analytically, u vanishes on the boundary, p has zero mean, and
/// the tangential second derivatives of u vanish at the walls, so the
/// reflection-ghost stencils keep their second-order consistency up to the
/// boundary layer of faces.

#pragma once

#include <cmath>

#include "macflow/grid.hpp"
#include "macflow/operators.hpp"
#include "macflow/stepper.hpp"

namespace macflow {

namespace manufactured {

constexpr double pi = 3.14159265358979323846;

inline double g_of_t(double t) { return std::cos(t); }
inline double gdot_of_t(double t) { return -std::sin(t); }

inline double u1_spatial(double x, double y) {
    const double s = std::sin(pi * x);
    return s * s * std::sin(2.0 * pi * y);
}
inline double u2_spatial(double x, double y) {
    const double s = std::sin(pi * y);
    return -std::sin(2.0 * pi * x) * s * s;
}
inline double p_spatial(double x, double y) { return std::cos(pi * x) * std::cos(pi * y); }

inline double u1(double x, double y, double t) { return g_of_t(t) * u1_spatial(x, y); }
inline double u2(double x, double y, double t) { return g_of_t(t) * u2_spatial(x, y); }
inline double pressure(double x, double y, double t) { return g_of_t(t) * p_spatial(x, y); }

/// f = u_t + (u.grad)u - nu Lap u + grad p, evaluated from the closed forms.
/// Validated against the discrete residual oracle in the test suite before
/// being trusted anywhere else.
inline double f1(double x, double y, double t, double nu) {
    const double g = g_of_t(t), gd = gdot_of_t(t);
    const double sx = std::sin(pi * x), s2x = std::sin(2.0 * pi * x), c2x = std::cos(2.0 * pi * x);
    const double sy = std::sin(pi * y), cy = std::cos(pi * y);
    const double s2y = std::sin(2.0 * pi * y), c2y = std::cos(2.0 * pi * y);

    const double ut = gd * sx * sx * s2y;
    const double conv = g * g * pi * s2x * sx * sx * (s2y * s2y - 2.0 * sy * sy * c2y);
    const double lap = g * 2.0 * pi * pi * (c2x * s2y - 2.0 * sx * sx * s2y);
    const double px = -g * pi * sx * cy;
    return ut + conv - nu * lap + px;
}

inline double f2(double x, double y, double t, double nu) {
    const double g = g_of_t(t), gd = gdot_of_t(t);
    const double sx = std::sin(pi * x), cx = std::cos(pi * x);
    const double s2x = std::sin(2.0 * pi * x), c2x = std::cos(2.0 * pi * x);
    const double sy = std::sin(pi * y), s2y = std::sin(2.0 * pi * y), c2y = std::cos(2.0 * pi * y);

    const double ut = -gd * s2x * sy * sy;
    const double conv = g * g * pi * s2y * sy * sy * (s2x * s2x - 2.0 * sx * sx * c2x);
    const double lap = -g * 2.0 * pi * pi * (c2y * s2x - 2.0 * sy * sy * s2x);
    const double py = -g * pi * cx * sy;
    return ut + conv - nu * lap + py;
}

} // namespace manufactured

/// Samples of the exact velocity and mean-zero pressure at time t. Boundary
/// faces are set to exact zeros to match the solver's Dirichlet convention.
inline std::pair<FaceVectorField, ScalarField> exact_fields(double t, const StaggeredGrid& g) {
    FaceVectorField vel(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i)
            vel.u(i, j) = manufactured::u1(g.xu(i), g.yu(j), t);
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            vel.v(i, j) = manufactured::u2(g.xv(i), g.yv(j), t);

    ScalarField p(g, Loc::Cell);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) p(i, j) = manufactured::pressure(g.xc(i), g.yc(j), t);
    remove_mean(p);
    return {std::move(vel), std::move(p)};
}

inline FaceVectorField exact_velocity(double t, const StaggeredGrid& g) {
    return exact_fields(t, g).first;
}

/// Face samples of the manufactured forcing at time t.
inline FaceVectorField forcing(double t, double nu, const StaggeredGrid& g) {
    FaceVectorField f(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
            f.u(i, j) = manufactured::f1(g.xu(i), g.yu(j), t, nu);
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            f.v(i, j) = manufactured::f2(g.xv(i), g.yv(j), t, nu);
    return f;
}

/// The error quantities of the convergence analysis at one time level.
struct ErrorRecord {
    double t = 0.0;
    double eps_tilde = 0.0; ///< ||u(t) - w~||
    double eps = 0.0;       ///< ||u(t) - w||
    double e = 0.0;         ///< ||u(t) - u||
    double q = 0.0;         ///< ||p - p(t)||, both mean-zero
    double eps_tilde_h1 = 0.0;
    double e_h1 = 0.0;
};

inline ErrorRecord measure_errors(const FlowState& state, const FaceVectorField& w_tilde,
                                  const StaggeredGrid& g) {
    auto [ue, pe] = exact_fields(state.t, g);

    ErrorRecord r;
    r.t = state.t;

    FaceVectorField d = ue;
    axpy(-1.0, w_tilde, d);
    r.eps_tilde = l2_norm(d, g);
    r.eps_tilde_h1 = h1_seminorm(d, g);

    d = ue;
    axpy(-1.0, state.w, d);
    r.eps = l2_norm(d, g);

    d = ue;
    axpy(-1.0, state.u, d);
    r.e = l2_norm(d, g);
    r.e_h1 = h1_seminorm(d, g);

    ScalarField q = state.p;
    remove_mean(q);
    axpy(-1.0, pe, q);
    remove_mean(q);
    r.q = l2_norm(q, g);
    return r;
}

} // namespace macflow

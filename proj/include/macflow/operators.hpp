/// @file operators.hpp
/// @brief Second-order MAC stencil operators, inner products and the three
/// norms (L2, discrete H1 seminorm, discrete H^-1) used by the estimates.
///
/// Discrete duality holds exactly by construction:
///   (gradient_p(p), w) + (p, divergence(w)) = 0
/// for any p and any w with zero normal boundary faces, which is what makes
/// the projection step an exact L2-orthogonal splitting.

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "macflow/grid.hpp"
#include "macflow/solvers.hpp"

namespace macflow {

// ---- inner products and plain norms -----------------------------------------

/// L2 scalar product with uniform area weights (midpoint quadrature).
inline double inner(const ScalarField& f, const ScalarField& g, const StaggeredGrid& grid) {
    if (!f.same_shape(g)) throw std::invalid_argument("inner: shape mismatch");
    return grid.cell_area() * detail::pairwise_dot(f.data().data(), g.data().data(), f.size());
}

inline double inner(const FaceVectorField& a, const FaceVectorField& b,
                    const StaggeredGrid& grid) {
    return inner(a.u, b.u, grid) + inner(a.v, b.v, grid);
}

inline double l2_norm(const ScalarField& f, const StaggeredGrid& grid) {
    return std::sqrt(inner(f, f, grid));
}

inline double l2_norm(const FaceVectorField& f, const StaggeredGrid& grid) {
    return std::sqrt(inner(f, f, grid));
}

// ---- first-order operators ---------------------------------------------------

/// Cellwise MAC divergence (u_{i+1,j}-u_{i,j})/hx + (v_{i,j+1}-v_{i,j})/hy.
inline ScalarField divergence(const FaceVectorField& w, const StaggeredGrid& g) {
    ScalarField d(g, Loc::Cell);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            d(i, j) = (w.u(i + 1, j) - w.u(i, j)) / g.hx + (w.v(i, j + 1) - w.v(i, j)) / g.hy;
    return d;
}

/// Pressure gradient onto interior faces; boundary normal faces stay zero
/// (homogeneous Neumann for pressure).
inline FaceVectorField gradient_p(const ScalarField& p, const StaggeredGrid& g) {
    if (p.loc() != Loc::Cell) throw std::invalid_argument("gradient_p: pressure must be cellwise");
    FaceVectorField r(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i)
            r.u(i, j) = (p(i, j) - p(i - 1, j)) / g.hx;
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            r.v(i, j) = (p(i, j) - p(i, j - 1)) / g.hy;
    return r;
}

// ---- variable-coefficient diffusion ------------------------------------------

namespace detail {

/// Arithmetic mean of the (up to four) cells around a grid node, with index
/// clamping at the walls.
inline double node_coeff(const ScalarField& c, int ni, int nj, const StaggeredGrid& g) {
    const int iw = std::max(ni - 1, 0), ie = std::min(ni, g.nx - 1);
    const int js = std::max(nj - 1, 0), jn = std::min(nj, g.ny - 1);
    return 0.25 * (c(iw, js) + c(ie, js) + c(iw, jn) + c(ie, jn));
}

/// Mean of the two cells straddling a cell-grid edge, clamped at walls.
inline double edge_coeff_x(const ScalarField& c, int i, int j, const StaggeredGrid& g) {
    const int iw = std::max(i - 1, 0), ie = std::min(i, g.nx - 1);
    return 0.5 * (c(iw, j) + c(ie, j));
}
inline double edge_coeff_y(const ScalarField& c, int i, int j, const StaggeredGrid& g) {
    const int js = std::max(j - 1, 0), jn = std::min(j, g.ny - 1);
    return 0.5 * (c(i, js) + c(i, jn));
}

} // namespace detail

/// Discrete -div(c grad w) on the sub-grid of w, with homogeneous Dirichlet
/// walls (stored boundary entries for the normal direction, odd-reflection
/// ghosts tangentially). Symmetric positive semidefinite 5-point stencil;
/// the cell-centered coefficient is averaged arithmetically onto the stencil
/// edges of each component grid.
inline ScalarField var_diffusion(const ScalarField& w, const ScalarField& c,
                                 const StaggeredGrid& g) {
    if (c.loc() != Loc::Cell) throw std::invalid_argument("var_diffusion: coefficient must be cellwise");
    if (c.min() < 0.0) throw std::invalid_argument("var_diffusion: negative coefficient entry");

    ScalarField r(g, w.loc());
    const double ihx2 = 1.0 / (g.hx * g.hx), ihy2 = 1.0 / (g.hy * g.hy);

    switch (w.loc()) {
    case Loc::UFace:
        // x-fluxes live at cell centers, y-fluxes at grid nodes
        for (int j = 0; j < g.ny; ++j)
            for (int i = 1; i < g.nx; ++i) {
                const double cw = c(i - 1, j), ce = c(i, j);
                const double cs = detail::node_coeff(c, i, j, g);
                const double cn = detail::node_coeff(c, i, j + 1, g);
                r(i, j) = ihx2 * (ce * (w(i, j) - w(i + 1, j)) + cw * (w(i, j) - w(i - 1, j))) +
                          ihy2 * (cn * (w(i, j) - w.refl(i, j + 1)) +
                                  cs * (w(i, j) - w.refl(i, j - 1)));
            }
        break;
    case Loc::VFace:
        for (int j = 1; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const double cs = c(i, j - 1), cn = c(i, j);
                const double cw = detail::node_coeff(c, i, j, g);
                const double ce = detail::node_coeff(c, i + 1, j, g);
                r(i, j) = ihy2 * (cn * (w(i, j) - w(i, j + 1)) + cs * (w(i, j) - w(i, j - 1))) +
                          ihx2 * (ce * (w(i, j) - w.refl(i + 1, j)) +
                                  cw * (w(i, j) - w.refl(i - 1, j)));
            }
        break;
    case Loc::Cell:
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const double cw = detail::edge_coeff_x(c, i, j, g);
                const double ce = detail::edge_coeff_x(c, i + 1, j, g);
                const double cs = detail::edge_coeff_y(c, i, j, g);
                const double cn = detail::edge_coeff_y(c, i, j + 1, g);
                r(i, j) = ihx2 * (ce * (w(i, j) - w.refl(i + 1, j)) +
                                  cw * (w(i, j) - w.refl(i - 1, j))) +
                          ihy2 * (cn * (w(i, j) - w.refl(i, j + 1)) +
                                  cs * (w(i, j) - w.refl(i, j - 1)));
            }
        break;
    }
    return r;
}

/// Componentwise -div(c grad .) of a velocity field.
inline FaceVectorField var_diffusion(const FaceVectorField& w, const ScalarField& c,
                                     const StaggeredGrid& g) {
    FaceVectorField r(g);
    r.u = var_diffusion(w.u, c, g);
    r.v = var_diffusion(w.v, c, g);
    return r;
}

inline ScalarField unit_coefficient(const StaggeredGrid& g) {
    ScalarField c(g, Loc::Cell);
    c.fill(1.0);
    return c;
}

/// sqrt((var_diffusion(w,1), w)): the discrete H1 seminorm of the Dirichlet
/// velocity field, summed over components.
inline double h1_seminorm(const FaceVectorField& w, const StaggeredGrid& g) {
    const ScalarField one = unit_coefficient(g);
    const double q = inner(var_diffusion(w.u, one, g), w.u, g) +
                     inner(var_diffusion(w.v, one, g), w.v, g);
    return std::sqrt(std::max(q, 0.0));
}

inline double h1_seminorm(const ScalarField& w, const StaggeredGrid& g) {
    const double q = inner(var_diffusion(w, unit_coefficient(g), g), w, g);
    return std::sqrt(std::max(q, 0.0));
}

// ---- advection ----------------------------------------------------------------

/// Skew-symmetric advection 1/2[(w*.grad)w + div(w* x w)] evaluated at faces,
/// with the advecting velocity interpolated by two-point averages. The
/// combined form reduces per direction to (U_e w_e - U_w w_w)/(2h), which
/// telescopes in the energy sum: (advect(w*,w), w) vanishes to round-off.
inline FaceVectorField advect(const FaceVectorField& wstar, const FaceVectorField& w,
                              const StaggeredGrid& g) {
    FaceVectorField r(g);

    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i) {
            const double ue = 0.5 * (wstar.u(i, j) + wstar.u(i + 1, j));
            const double uw = 0.5 * (wstar.u(i - 1, j) + wstar.u(i, j));
            const double vn = 0.5 * (wstar.v(i - 1, j + 1) + wstar.v(i, j + 1));
            const double vs = 0.5 * (wstar.v(i - 1, j) + wstar.v(i, j));
            r.u(i, j) = 0.5 * ((ue * w.u(i + 1, j) - uw * w.u(i - 1, j)) / g.hx +
                               (vn * w.u.refl(i, j + 1) - vs * w.u.refl(i, j - 1)) / g.hy);
        }

    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double vn = 0.5 * (wstar.v(i, j) + wstar.v(i, j + 1));
            const double vs = 0.5 * (wstar.v(i, j - 1) + wstar.v(i, j));
            const double ue = 0.5 * (wstar.u(i + 1, j - 1) + wstar.u(i + 1, j));
            const double uw = 0.5 * (wstar.u(i, j - 1) + wstar.u(i, j));
            r.v(i, j) = 0.5 * ((ue * w.v.refl(i + 1, j) - uw * w.v.refl(i - 1, j)) / g.hx +
                               (vn * w.v(i, j + 1) - vs * w.v(i, j - 1)) / g.hy);
        }

    return r;
}

// ---- velocity gradient tensor ---------------------------------------------------

/// Gradient tensor at cell centers. The in-line derivatives (du/dx, dv/dy)
/// are exact MAC differences; the cross derivatives use centered averaging
/// inside and one-sided differences at wall cells so that linear shear
/// fields are reproduced exactly.
inline CellTensorField grad_tensor(const FaceVectorField& w, const StaggeredGrid& g) {
    CellTensorField t(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            t.dudx(i, j) = (w.u(i + 1, j) - w.u(i, j)) / g.hx;
            t.dvdy(i, j) = (w.v(i, j + 1) - w.v(i, j)) / g.hy;

            auto ubar = [&](int jj) { return 0.5 * (w.u(i, jj) + w.u(i + 1, jj)); };
            if (j == 0)
                t.dudy(i, j) = (ubar(1) - ubar(0)) / g.hy;
            else if (j == g.ny - 1)
                t.dudy(i, j) = (ubar(g.ny - 1) - ubar(g.ny - 2)) / g.hy;
            else
                t.dudy(i, j) = (ubar(j + 1) - ubar(j - 1)) / (2.0 * g.hy);

            auto vbar = [&](int ii) { return 0.5 * (w.v(ii, j) + w.v(ii, j + 1)); };
            if (i == 0)
                t.dvdx(i, j) = (vbar(1) - vbar(0)) / g.hx;
            else if (i == g.nx - 1)
                t.dvdx(i, j) = (vbar(g.nx - 1) - vbar(g.nx - 2)) / g.hx;
            else
                t.dvdx(i, j) = (vbar(i + 1) - vbar(i - 1)) / (2.0 * g.hx);
        }
    return t;
}

// ---- interior DOF packing --------------------------------------------------------

/// Number of true unknowns on a sub-grid under Dirichlet walls.
inline std::size_t n_interior(Loc loc, const StaggeredGrid& g) {
    switch (loc) {
    case Loc::UFace: return static_cast<std::size_t>(g.nx - 1) * g.ny;
    case Loc::VFace: return static_cast<std::size_t>(g.nx) * (g.ny - 1);
    case Loc::Cell: return static_cast<std::size_t>(g.nx) * g.ny;
    }
    return 0;
}

inline void pack_interior(const ScalarField& f, const StaggeredGrid& g,
                          std::vector<double>& out, std::size_t offset = 0) {
    std::size_t k = offset;
    switch (f.loc()) {
    case Loc::UFace:
        for (int j = 0; j < g.ny; ++j)
            for (int i = 1; i < g.nx; ++i) out[k++] = f(i, j);
        break;
    case Loc::VFace:
        for (int j = 1; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) out[k++] = f(i, j);
        break;
    case Loc::Cell:
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) out[k++] = f(i, j);
        break;
    }
}

/// Scatters interior DOFs back; boundary entries are reset to zero.
inline void unpack_interior(const std::vector<double>& in, const StaggeredGrid& g,
                            ScalarField& f, std::size_t offset = 0) {
    f.fill(0.0);
    std::size_t k = offset;
    switch (f.loc()) {
    case Loc::UFace:
        for (int j = 0; j < g.ny; ++j)
            for (int i = 1; i < g.nx; ++i) f(i, j) = in[k++];
        break;
    case Loc::VFace:
        for (int j = 1; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) f(i, j) = in[k++];
        break;
    case Loc::Cell:
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) f(i, j) = in[k++];
        break;
    }
}

inline std::vector<double> pack_interior(const ScalarField& f, const StaggeredGrid& g) {
    std::vector<double> out(n_interior(f.loc(), g));
    pack_interior(f, g, out, 0);
    return out;
}

// ---- discrete negative norm --------------------------------------------------------

/// Matrix-free application of the Dirichlet operator var_diffusion(., 1) on
/// packed interior DOFs of one sub-grid.
inline LinOp dirichlet_laplacian_op(Loc loc, StaggeredGrid g) {
    return [loc, g](const std::vector<double>& in, std::vector<double>& out) {
        ScalarField w(g, loc);
        unpack_interior(in, g, w);
        const ScalarField Lw = var_diffusion(w, unit_coefficient(g), g);
        out.resize(in.size());
        pack_interior(Lw, g, out, 0);
    };
}

/// Discrete negative norm sqrt((f, K^-1 f)) with K = var_diffusion(., 1)
/// under homogeneous Dirichlet walls; K^-1 is applied by CG to 1e-12
/// relative residual. Stands in for both dual norms of the error analysis.
inline double hneg1_norm(const ScalarField& f, const StaggeredGrid& g) {
    SolverConfig cfg;
    cfg.rel_tol = 1e-12;
    cfg.abs_tol = 0.0;
    std::vector<double> b = pack_interior(f, g);
    if (detail::vec_norm(b) == 0.0) return 0.0;
    std::vector<double> x;
    const SolveStats stats = cg_solve(dirichlet_laplacian_op(f.loc(), g), b, x, cfg);
    if (!stats.converged)
        throw SolveFailure("hneg1_norm: CG did not converge (residual " +
                               std::to_string(stats.final_residual) + ")",
                           stats);
    ScalarField kf(g, f.loc());
    unpack_interior(x, g, kf);
    return std::sqrt(std::max(inner(f, kf, g), 0.0));
}

inline double hneg1_norm(const FaceVectorField& f, const StaggeredGrid& g) {
    const double nu = hneg1_norm(f.u, g);
    const double nv = hneg1_norm(f.v, g);
    return std::sqrt(nu * nu + nv * nv);
}

} // namespace macflow

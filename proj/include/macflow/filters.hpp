/// @file filters.hpp
/// @brief Indicator functionals, the nonlinear differential filter F and the
/// fluctuation operator G = I - F, plus the dissipation diagnostics.
///
/// The filter solves, per velocity component,
///     (I + var_diffusion(., delta^2 max(a, eps))) Fw = w
/// with homogeneous Dirichlet walls. Within one application the indicator
/// a(u_ind) is evaluated once and frozen, so F is a linear SPD solve per
/// call; G inherits symmetry and 0 <= (Gw,w) <= min(||w||^2, (c grad w, grad w)).

#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "macflow/grid.hpp"
#include "macflow/operators.hpp"
#include "macflow/random_fields.hpp"
#include "macflow/solvers.hpp"

namespace macflow {

enum class IndicatorType {
    Constant,           ///< a = 1: linear Helmholtz filter
    RawSmagorinsky,     ///< a = |grad w| (unbounded, upper bound only)
    NormalizedGradient, ///< a = |grad w| / (max |grad w| + eta)
    QCriterion,         ///< strain/rotation balance, ~0 in vortex cores
    Vreman,             ///< sqrt(B_beta) / (alpha:alpha + eta)
    GeometricMean       ///< (prod a_i)^(1/N)
};

struct IndicatorKind {
    IndicatorType type = IndicatorType::Constant;
    double eta = 1e-10;               ///< regularizer in normalizations
    std::vector<IndicatorKind> parts; ///< members of a geometric mean

    /// True when a <= 1 holds by construction. The raw Smagorinsky indicator
    /// is the one unbounded case; only the upper dissipation bound is
    /// guaranteed for it, so two-sided equivalence checks are gated on this.
    bool bounded() const {
        if (type == IndicatorType::RawSmagorinsky) return false;
        if (type == IndicatorType::GeometricMean) {
            for (const auto& p : parts)
                if (!p.bounded()) return false;
        }
        return true;
    }

    void validate() const {
        if (eta < 0.0) throw std::invalid_argument("indicator: eta must be >= 0");
        if (type == IndicatorType::GeometricMean) {
            if (parts.empty())
                throw std::invalid_argument("indicator: geometric mean needs at least one part");
            for (const auto& p : parts) p.validate();
        }
    }

    static IndicatorKind constant() { return {}; }
    static IndicatorKind of(IndicatorType t, double eta = 1e-10) {
        IndicatorKind k;
        k.type = t;
        k.eta = eta;
        return k;
    }
    static IndicatorKind geometric_mean(std::vector<IndicatorKind> members) {
        IndicatorKind k;
        k.type = IndicatorType::GeometricMean;
        k.parts = std::move(members);
        return k;
    }
};

/// Per-cell indicator value from the velocity gradient tensor.
inline ScalarField eval_indicator(const IndicatorKind& kind, const FaceVectorField& w,
                                  const StaggeredGrid& g) {
    kind.validate();
    ScalarField a(g, Loc::Cell);

    if (kind.type == IndicatorType::Constant) {
        a.fill(1.0);
        return a;
    }
    if (kind.type == IndicatorType::GeometricMean) {
        a.fill(1.0);
        for (const auto& part : kind.parts) {
            const ScalarField ap = eval_indicator(part, w, g);
            for (std::size_t k = 0; k < a.size(); ++k) a.data()[k] *= ap.data()[k];
        }
        const double inv_n = 1.0 / static_cast<double>(kind.parts.size());
        for (double& t : a.data()) t = std::pow(t, inv_n);
        return a;
    }

    const CellTensorField t = grad_tensor(w, g);
    switch (kind.type) {
    case IndicatorType::RawSmagorinsky:
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const double gxx = t.dudx(i, j), gxy = t.dudy(i, j);
                const double gyx = t.dvdx(i, j), gyy = t.dvdy(i, j);
                a(i, j) = std::sqrt(gxx * gxx + gxy * gxy + gyx * gyx + gyy * gyy);
            }
        break;
    case IndicatorType::NormalizedGradient: {
        ScalarField mag(g, Loc::Cell);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const double gxx = t.dudx(i, j), gxy = t.dudy(i, j);
                const double gyx = t.dvdx(i, j), gyy = t.dvdy(i, j);
                mag(i, j) = std::sqrt(gxx * gxx + gxy * gxy + gyx * gyx + gyy * gyy);
            }
        const double denom = mag.max() + kind.eta;
        for (std::size_t k = 0; k < a.size(); ++k)
            a.data()[k] = denom > 0.0 ? mag.data()[k] / denom : 0.0;
        break;
    }
    case IndicatorType::QCriterion:
        // strain fraction |S|^2 / (|S|^2 + |Omega|^2 + eta), i.e. the
        // normalized Q = (|Omega|^2 - |S|^2)/2 mapped through (1 - Q~)/2:
        // ~0 for rigid rotation and at rest, ~1 where strain dominates.
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const double sxx = t.dudx(i, j), syy = t.dvdy(i, j);
                const double sxy = 0.5 * (t.dudy(i, j) + t.dvdx(i, j));
                const double oxy = 0.5 * (t.dudy(i, j) - t.dvdx(i, j));
                const double s2 = sxx * sxx + syy * syy + 2.0 * sxy * sxy;
                const double o2 = 2.0 * oxy * oxy;
                a(i, j) = std::clamp(s2 / (s2 + o2 + kind.eta), 0.0, 1.0);
            }
        break;
    case IndicatorType::Vreman:
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const double a11 = t.dudx(i, j), a12 = t.dudy(i, j);
                const double a21 = t.dvdx(i, j), a22 = t.dvdy(i, j);
                // beta = alpha^T alpha, B_beta its 2D second invariant
                const double b11 = a11 * a11 + a21 * a21;
                const double b12 = a11 * a12 + a21 * a22;
                const double b22 = a12 * a12 + a22 * a22;
                const double bb = std::max(b11 * b22 - b12 * b12, 0.0);
                const double aa = b11 + b22;
                a(i, j) = std::clamp(std::sqrt(bb) / (aa + kind.eta), 0.0, 1.0);
            }
        break;
    default:
        break;
    }
    return a;
}

struct FilterSpec {
    IndicatorKind kind;
    ScalarField delta;      ///< filtering radius per cell (length units)
    double eps_floor = 0.0; ///< coefficient floor: delta^2 * max(a, eps)
    double chi0 = 1.0;      ///< relaxation scale, chi = chi0 * dt
    SolverConfig solver;

    void validate() const {
        kind.validate();
        solver.validate();
        if (delta.loc() != Loc::Cell)
            throw std::invalid_argument("FilterSpec: delta must be a cell field");
        if (delta.min() < 0.0) throw std::invalid_argument("FilterSpec: delta must be >= 0");
        if (eps_floor < 0.0 || eps_floor >= 1.0)
            throw std::invalid_argument("FilterSpec: eps_floor must be in [0,1)");
        if (chi0 < 0.0) throw std::invalid_argument("FilterSpec: chi0 must be >= 0");
    }

    double delta_max() const { return delta.max_abs(); }

    /// delta = value everywhere.
    static FilterSpec uniform(const StaggeredGrid& g, IndicatorKind kind, double delta_value) {
        FilterSpec s;
        s.kind = std::move(kind);
        s.delta = ScalarField(g, Loc::Cell);
        s.delta.fill(delta_value);
        return s;
    }

    /// delta = c_delta * h with h = max(hx, hy).
    static FilterSpec mesh_scaled(const StaggeredGrid& g, IndicatorKind kind, double c_delta) {
        return uniform(g, std::move(kind), c_delta * std::max(g.hx, g.hy));
    }
};

/// The differential filter with the indicator coefficient frozen from one
/// velocity field: a linear, self-adjoint operator pair (F, G).
class FilterOperator {
  public:
    FilterOperator(const FaceVectorField& u_ind, const FilterSpec& spec, const StaggeredGrid& g)
        : grid_(g), solver_(spec.solver), coeff_(g, Loc::Cell) {
        spec.validate();
        const ScalarField a = eval_indicator(spec.kind, u_ind, g);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const double d = spec.delta(i, j);
                coeff_(i, j) = d * d * std::max(a(i, j), spec.eps_floor);
            }
        identity_ = coeff_.max_abs() == 0.0;
    }

    const ScalarField& coefficient() const { return coeff_; }
    bool is_identity() const { return identity_; }

    /// F w: one SPD solve per component. Exact identity when the coefficient
    /// vanishes, so delta = 0 reproduces w bitwise.
    FaceVectorField filter(const FaceVectorField& w, SolveStats* stats_u = nullptr,
                           SolveStats* stats_v = nullptr) const {
        if (identity_) {
            if (stats_u) *stats_u = SolveStats{0, 0.0, true, {}};
            if (stats_v) *stats_v = SolveStats{0, 0.0, true, {}};
            return w;
        }
        FaceVectorField fw(grid_);
        fw.u = solve_component(w.u, stats_u);
        fw.v = solve_component(w.v, stats_v);
        return fw;
    }

    /// G w = w - F w.
    FaceVectorField fluctuation(const FaceVectorField& w) const {
        FaceVectorField gw = w;
        axpy(-1.0, filter(w), gw);
        return gw;
    }

  private:
    ScalarField solve_component(const ScalarField& w, SolveStats* stats_out) const {
        const StaggeredGrid g = grid_;
        const ScalarField c = coeff_;
        const Loc loc = w.loc();
        LinOp op = [g, c, loc](const std::vector<double>& in, std::vector<double>& out) {
            ScalarField x(g, loc);
            unpack_interior(in, g, x);
            ScalarField lx = var_diffusion(x, c, g);
            out.resize(in.size());
            pack_interior(lx, g, out, 0);
            for (std::size_t k = 0; k < out.size(); ++k) out[k] += in[k];
        };
        std::vector<double> b = pack_interior(w, g);
        std::vector<double> x;
        const SolveStats stats = cg_solve(op, b, x, solver_);
        if (stats_out) *stats_out = stats;
        if (!stats.converged)
            throw SolveFailure("filter solve did not converge (residual " +
                                   std::to_string(stats.final_residual) + ")",
                               stats);
        ScalarField fw(g, loc);
        unpack_interior(x, g, fw);
        return fw;
    }

    StaggeredGrid grid_;
    SolverConfig solver_;
    ScalarField coeff_;
    bool identity_ = false;
};

/// F(u_ind) w per the elliptic definition above.
inline FaceVectorField apply_filter(const FaceVectorField& w, const FaceVectorField& u_ind,
                                    const FilterSpec& spec, const StaggeredGrid& g) {
    return FilterOperator(u_ind, spec, g).filter(w);
}

/// G(u_ind) w = w - F(u_ind) w.
inline FaceVectorField apply_G(const FaceVectorField& w, const FaceVectorField& u_ind,
                               const FilterSpec& spec, const StaggeredGrid& g) {
    return FilterOperator(u_ind, spec, g).fluctuation(w);
}

struct DissipationPair {
    double g_ww = 0.0;    ///< (G w, w): dissipation of the filter-relax mechanism
    double visc_ww = 0.0; ///< (c grad w, grad w): the eddy-viscosity closure
};

/// Both quadratic forms with the same frozen coefficient. The two-sided
/// equivalence c~ * visc_ww <= g_ww <= visc_ww is the LES-model statement;
/// the upper bound holds for any indicator, the lower constant only for
/// bounded ones with delta of mesh size.
inline DissipationPair dissipation_pair(const FaceVectorField& w, const FaceVectorField& u_ind,
                                        const FilterSpec& spec, const StaggeredGrid& g) {
    const FilterOperator op(u_ind, spec, g);
    DissipationPair d;
    FaceVectorField gw = op.fluctuation(w);
    d.g_ww = inner(gw, w, g);
    d.visc_ww = inner(var_diffusion(w, op.coefficient(), g), w, g);
    return d;
}

struct StabilityReport {
    double chi = 0.0;
    double cond2_lhs = 0.0, cond2_rhs = 0.0;   ///< chi (Gw,w) vs ||w||^2
    double cond_lhs = 0.0, cond_rhs = 0.0;     ///< chi (Gw,Gw) vs (Gw,w)
    double selfadj_defect_rel = 0.0;           ///< |(Gx,y)-(x,Gy)| / (||x|| ||y||)
    bool cond2_ok = false, cond_ok = false, selfadj_ok = false;
    bool pass() const { return cond2_ok && cond_ok && selfadj_ok; }
};

/// Evaluates both energy-stability inequalities and the self-adjointness
/// defect on the given field plus a deterministic paired random field.
inline StabilityReport check_stability_conditions(const FaceVectorField& w,
                                                  const FaceVectorField& u_ind,
                                                  const FilterSpec& spec, const StaggeredGrid& g,
                                                  double chi, double rel_slack = 1e-10) {
    if (chi < 0.0 || chi > 1.0)
        throw std::invalid_argument("check_stability_conditions: chi must be in [0,1]");
    const FilterOperator op(u_ind, spec, g);

    StabilityReport rep;
    rep.chi = chi;

    const FaceVectorField gw = op.fluctuation(w);
    const double gww = inner(gw, w, g);
    const double ww = inner(w, w, g);
    rep.cond2_lhs = chi * gww;
    rep.cond2_rhs = ww;
    rep.cond2_ok = rep.cond2_lhs <= rep.cond2_rhs * (1.0 + rel_slack);

    rep.cond_lhs = chi * inner(gw, gw, g);
    rep.cond_rhs = gww;
    rep.cond_ok = rep.cond_lhs <= rep.cond_rhs * (1.0 + rel_slack) + rel_slack * ww;

    Rng rng(0x5eedf1e1dULL);
    const FaceVectorField y = random_face_field(g, rng);
    const FaceVectorField gy = op.fluctuation(y);
    const double gxy = inner(gw, y, g);
    const double xgy = inner(w, gy, g);
    const double scale = l2_norm(w, g) * l2_norm(y, g);
    rep.selfadj_defect_rel = scale > 0.0 ? std::abs(gxy - xgy) / scale : 0.0;
    rep.selfadj_ok = rep.selfadj_defect_rel <= 1e-9;

    return rep;
}

} // namespace macflow

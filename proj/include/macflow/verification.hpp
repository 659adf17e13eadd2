/// @file verification.hpp
/// @brief Temporal convergence studies against the manufactured solution and
/// the seeded property suite that checks every provable inequality of the
/// filter and the stepper.

#pragma once

#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <string>
#include <vector>

#include "macflow/filters.hpp"
#include "macflow/grid.hpp"
#include "macflow/manufactured.hpp"
#include "macflow/operators.hpp"
#include "macflow/random_fields.hpp"
#include "macflow/stepper.hpp"

namespace macflow {

// ---- rate estimation -------------------------------------------------------

/// Observed order between consecutive refinement rows:
/// rate_k = log(E_{k-1}/E_k) / log(dt_{k-1}/dt_k). First entry is NaN.
inline std::vector<double> estimate_rates(const std::vector<double>& dts,
                                          const std::vector<double>& errors) {
    std::vector<double> rates(errors.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 1; k < errors.size(); ++k) {
        if (errors[k] > 0.0 && errors[k - 1] > 0.0 && dts[k] != dts[k - 1])
            rates[k] = std::log(errors[k - 1] / errors[k]) / std::log(dts[k - 1] / dts[k]);
    }
    return rates;
}

// ---- convergence study -------------------------------------------------------

struct ConvergenceRow {
    double dt = 0.0;
    double delta_max = 0.0;
    double h = 0.0;
    double E_v = 0.0; ///< sqrt(dt sum ||e^n||^2)
    double E_p = 0.0; ///< sqrt(dt sum ||q^n||^2)
    double rate_v = std::numeric_limits<double>::quiet_NaN();
    double rate_p = std::numeric_limits<double>::quiet_NaN();
    bool floored = false;        ///< E_v stopped decreasing: spatial floor
    double sup_eps_tilde = 0.0;  ///< max_n ||u(t_n) - w~^n||
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
};

struct StudyConfig {
    int n = 128;          ///< fixed fine grid n x n on the unit square
    double t_final = 1.0;
    double nu = 0.05;
    double chi0 = 1.0;
    IndicatorKind kind = IndicatorKind::of(IndicatorType::NormalizedGradient);
    double c_delta = 1.0; ///< delta = min(c_delta h, dt^(1/4)), keeps delta^4 <= dt
    double eps_floor = 0.0;
    FilterMode mode = FilterMode::FilterAfterProjection;
    bool reproject = false;
    SolverConfig solver;
    std::vector<double> dt_list; ///< strictly decreasing
};

namespace detail {

inline ConvergenceRow study_row(const StudyConfig& sc, double dt) {
    const StaggeredGrid g = make_grid(sc.n, sc.n, 1.0, 1.0);
    const double h = std::max(g.hx, g.hy);
    const double delta = std::min(sc.c_delta * h, std::pow(dt, 0.25));

    StepperConfig cfg;
    cfg.dt = dt;
    cfg.nu = sc.nu;
    cfg.mode = sc.mode;
    cfg.reproject = sc.reproject;
    cfg.solver = sc.solver;
    cfg.filter = FilterSpec::uniform(g, sc.kind, delta);
    cfg.filter.chi0 = sc.chi0;
    cfg.filter.eps_floor = sc.eps_floor;
    cfg.filter.solver = sc.solver;
    const double nu = sc.nu;
    cfg.forcing = [nu, g](double t) { return forcing(t, nu, g); };

    FlowState state(g);
    auto [u0, p0] = exact_fields(0.0, g);
    state.u = u0;
    state.w = u0;
    state.p = p0;

    const int n_steps = static_cast<int>(std::lround(sc.t_final / dt));
    double sum_e2 = 0.0, sum_q2 = 0.0, sup_eps_tilde = 0.0;

    for (int n = 0; n < n_steps; ++n) {
        const double t_next = state.t + dt;
        const FaceVectorField w_tilde = momentum_step(state, cfg, g, t_next);

        FlowState next(g);
        next.t = t_next;
        if (cfg.mode == FilterMode::FilterAfterProjection) {
            auto [w, p] = projection_step(w_tilde, cfg, g);
            FilterRelaxResult fr = filter_relax_step(w, cfg, g);
            next.w = std::move(w);
            next.p = std::move(p);
            next.u = std::move(fr.u);
        } else {
            FilterRelaxResult fr = filter_relax_step(w_tilde, cfg, g);
            auto [w, p] = projection_step(fr.u, cfg, g);
            next.w = w;
            next.u = std::move(w);
            next.p = std::move(p);
        }
        state = std::move(next);

        const ErrorRecord err = measure_errors(state, w_tilde, g);
        sum_e2 += dt * err.e * err.e;
        sum_q2 += dt * err.q * err.q;
        sup_eps_tilde = std::max(sup_eps_tilde, err.eps_tilde);
    }

    ConvergenceRow row;
    row.dt = dt;
    row.delta_max = delta;
    row.h = h;
    row.E_v = std::sqrt(sum_e2);
    row.E_p = std::sqrt(sum_q2);
    row.sup_eps_tilde = sup_eps_tilde;
    return row;
}

} // namespace detail

/// Runs the stepper once per dt (rows in parallel, assembled in order),
/// aggregates the time-integrated velocity and pressure errors and the
/// observed rates between consecutive rows. Rows where E_v stops decreasing
/// are flagged as floored (spatial error floor of the fixed grid).
inline ConvergenceTable convergence_study(const StudyConfig& sc) {
    for (std::size_t k = 1; k < sc.dt_list.size(); ++k)
        if (!(sc.dt_list[k] < sc.dt_list[k - 1]))
            throw std::invalid_argument("convergence_study: dt_list must be strictly decreasing");

    std::vector<std::future<ConvergenceRow>> futures;
    futures.reserve(sc.dt_list.size());
    for (double dt : sc.dt_list)
        futures.push_back(std::async(std::launch::async, detail::study_row, sc, dt));

    ConvergenceTable table;
    for (auto& f : futures) table.rows.push_back(f.get());

    std::vector<double> dts, evs, eps;
    for (const auto& r : table.rows) {
        dts.push_back(r.dt);
        evs.push_back(r.E_v);
        eps.push_back(r.E_p);
    }
    const std::vector<double> rv = estimate_rates(dts, evs);
    const std::vector<double> rp = estimate_rates(dts, eps);
    for (std::size_t k = 0; k < table.rows.size(); ++k) {
        table.rows[k].rate_v = rv[k];
        table.rows[k].rate_p = rp[k];
        if (k > 0) table.rows[k].floored = !(rv[k] >= 0.25);
    }
    return table;
}

// ---- property suite ------------------------------------------------------------

struct PropertyCheck {
    std::string name;
    std::string indicator;
    int size = 0;
    double margin = 0.0; ///< worst-case slack, negative means violated
    bool pass = false;
    bool skipped = false;
    std::string note;
};

struct PropertyReport {
    std::uint64_t seed = 0;
    std::vector<int> sizes;
    std::vector<PropertyCheck> checks;

    bool pass() const {
        for (const auto& c : checks)
            if (!c.skipped && !c.pass) return false;
        return true;
    }
};

inline std::vector<std::pair<std::string, IndicatorKind>> default_indicator_set() {
    using IT = IndicatorType;
    return {
        {"constant", IndicatorKind::of(IT::Constant)},
        {"normalized-gradient", IndicatorKind::of(IT::NormalizedGradient)},
        {"q-criterion", IndicatorKind::of(IT::QCriterion)},
        {"vreman", IndicatorKind::of(IT::Vreman)},
        {"geometric-mean",
         IndicatorKind::geometric_mean({IndicatorKind::of(IT::NormalizedGradient),
                                        IndicatorKind::of(IT::QCriterion),
                                        IndicatorKind::of(IT::Vreman)})},
    };
}

/// Runs every filter/stepper invariant over deterministic pseudo-random
/// fields and reports the worst margin of each. For an unbounded indicator
/// (raw Smagorinsky) the two-sided dissipation equivalence degenerates: only
/// the upper bound is guaranteed, so the lower-bound check is skipped with a
/// notice.
inline PropertyReport property_suite(
    std::uint64_t seed, const std::vector<int>& sizes,
    std::vector<std::pair<std::string, IndicatorKind>> kinds = default_indicator_set(),
    int n_fields = 20) {
    for (int s : sizes)
        if (s != 8 && s != 16 && s != 32 && s != 64)
            throw std::invalid_argument("property_suite: sizes must be among {8,16,32,64}");

    PropertyReport report;
    report.seed = seed;
    report.sizes = sizes;

    const double tol = 1e-10;
    std::uint64_t salt = 0;

    for (int n : sizes) {
        const StaggeredGrid g = make_grid(n, n, 1.0, 1.0);
        const double h = std::max(g.hx, g.hy);

        for (const auto& [label, kind] : kinds) {
            FilterSpec spec = FilterSpec::uniform(g, kind, h);
            spec.solver.rel_tol = 1e-12;

            double m_contract = std::numeric_limits<double>::infinity();
            double m_est1 = m_contract, m_est2 = m_contract;
            double m_glow = m_contract, m_gupper = m_contract, m_gl2 = m_contract;
            double m_cond = m_contract, m_selfadj = m_contract, m_lin = m_contract;

            for (int f = 0; f < n_fields; ++f) {
                Rng rng(Rng::mix(seed, salt++));
                const FaceVectorField w = random_face_field(g, rng);
                const FilterOperator op(w, spec, g);

                const FaceVectorField fw = op.filter(w);
                FaceVectorField e = w;
                axpy(-1.0, fw, e);

                const double wn = l2_norm(w, g);
                const double h1w = h1_seminorm(w, g);

                m_contract = std::min(m_contract, (wn - l2_norm(fw, g)) / wn);

                // ||w - Fw|| <= delta_max ||grad w||, slack only for the solve
                const double est1_rhs = spec.delta_max() * h1w + 10.0 * spec.solver.rel_tol * wn;
                m_est1 = std::min(m_est1, (est1_rhs - l2_norm(e, g)) / est1_rhs);

                const double dmax2 = spec.delta_max() * spec.delta_max();
                const double est2_rhs = 1.1 * dmax2 * h1w + 10.0 * spec.solver.rel_tol * wn;
                m_est2 = std::min(m_est2, (est2_rhs - hneg1_norm(e, g)) / est2_rhs);

                const double gww = inner(e, w, g);
                const double visc = inner(var_diffusion(w, op.coefficient(), g), w, g);
                m_glow = std::min(m_glow, gww / (wn * wn) + tol);
                m_gl2 = std::min(m_gl2, (wn * wn - gww) / (wn * wn) + tol);
                if (kind.bounded())
                    m_gupper = std::min(m_gupper, (visc - gww) / std::max(visc, tol) + tol);

                m_cond = std::min(m_cond, (gww - inner(e, e, g)) / std::max(gww, tol) + tol);

                // self-adjointness and linearity of the frozen operator
                Rng rng2(Rng::mix(seed, salt++));
                const FaceVectorField y = random_face_field(g, rng2);
                const FaceVectorField gy = op.fluctuation(y);
                const double defect =
                    std::abs(inner(e, y, g) - inner(w, gy, g)) / (wn * l2_norm(y, g));
                m_selfadj = std::min(m_selfadj, 1e-9 - defect);

                const double alpha = 0.7, beta = -1.3;
                const FaceVectorField gz = op.fluctuation(lin_comb(alpha, w, beta, y));
                FaceVectorField lin = lin_comb(alpha, e, beta, gy);
                axpy(-1.0, gz, lin);
                m_lin = std::min(m_lin, 1e-9 - l2_norm(lin, g) / (wn + l2_norm(y, g)));
            }

            auto push = [&](const std::string& name, double margin, bool skipped = false,
                            std::string note = "") {
                PropertyCheck c;
                c.name = name;
                c.indicator = label;
                c.size = n;
                c.margin = margin;
                c.pass = margin >= 0.0;
                c.skipped = skipped;
                c.note = std::move(note);
                report.checks.push_back(std::move(c));
            };

            push("filter_contraction", m_contract);
            push("filter_error_l2", m_est1);
            push("filter_error_dual", m_est2);
            push("g_form_nonnegative", m_glow);
            push("g_form_below_l2", m_gl2);
            if (kind.bounded())
                push("g_form_below_viscosity", m_gupper);
            else
                push("g_form_below_viscosity", 0.0, true,
                     "unbounded indicator: only the upper dissipation bound is guaranteed; "
                     "two-sided equivalence check skipped");
            push("fluctuation_energy_bound", m_cond);
            push("self_adjointness", m_selfadj);
            push("frozen_linearity", m_lin);
        }

        // eigenmode damping for the linear (a = 1) filter: gains 1/(1+d^2 lambda)
        // must be in (0,1] and decreasing in lambda
        {
            FilterSpec spec = FilterSpec::uniform(g, IndicatorKind::constant(), h);
            spec.solver.rel_tol = 1e-12;
            double margin = std::numeric_limits<double>::infinity();
            double prev_gain = 1.0 + 1e-12;
            for (int k = 1; k <= std::min(n - 1, 4); ++k) {
                FaceVectorField mode(g);
                for (int j = 0; j < g.ny; ++j)
                    for (int i = 1; i < g.nx; ++i)
                        mode.u(i, j) = std::sin(k * manufactured::pi * g.xu(i)) *
                                       std::sin(k * manufactured::pi * g.yu(j));
                const FaceVectorField fm = apply_filter(mode, mode, spec, g);
                const double gain = l2_norm(fm, g) / l2_norm(mode, g);
                margin = std::min({margin, gain, 1.0 + 1e-12 - gain, prev_gain - gain});
                prev_gain = gain;
            }
            PropertyCheck c;
            c.name = "eigenmode_damping_monotone";
            c.indicator = "constant";
            c.size = n;
            c.margin = margin;
            c.pass = margin >= 0.0;
            report.checks.push_back(std::move(c));
        }

        // stepper invariants over a short zero-forcing run
        {
            Rng rng(Rng::mix(seed, salt++));
            StepperConfig cfg;
            cfg.dt = 0.01;
            cfg.nu = 0.05;
            cfg.filter = FilterSpec::uniform(g, IndicatorKind::of(IndicatorType::NormalizedGradient), h);
            cfg.filter.chi0 = 1.0;
            cfg.solver.rel_tol = 1e-10;
            cfg.filter.solver = cfg.solver;

            FlowState init(g);
            FaceVectorField noise = random_face_field(g, rng);
            auto [w0, p0] = projection_step(noise, cfg, g);
            init.u = w0;
            init.w = std::move(w0);

            const RunResult rr = run(init, cfg, g, 20);
            double margin = std::numeric_limits<double>::infinity();
            for (const auto& rep : rr.reports) {
                margin = std::min(margin, rep.norm_w * (1.0 + 1e-12) - rep.norm_u);
                margin = std::min(margin, rep.norm_wtilde * (1.0 + 1e-12) - rep.norm_w);
                margin = std::min(margin, rep.model_dissipation_increment + 1e-12);
                margin = std::min(
                    margin, std::max(cfg.solver.rel_tol * rep.div_input_norm, cfg.solver.abs_tol) -
                                rep.div_residual);
                if (!rep.stability_ok) margin = std::min(margin, -1.0);
            }
            PropertyCheck c;
            c.name = "stepper_run_invariants";
            c.indicator = "normalized-gradient";
            c.size = n;
            c.margin = margin;
            c.pass = margin >= 0.0;
            report.checks.push_back(std::move(c));
        }
    }

    // dense-oracle agreement for the filter solve at the smallest size
    {
        const StaggeredGrid g = make_grid(8, 8, 1.0, 1.0);
        Rng rng(Rng::mix(seed, salt++));
        const FaceVectorField w = random_face_field(g, rng);
        FilterSpec spec = FilterSpec::mesh_scaled(g, IndicatorKind::constant(), 1.0);
        spec.solver.rel_tol = 1e-12;
        const FilterOperator op(w, spec, g);
        const FaceVectorField fw = op.filter(w);

        double worst = 0.0;
        for (Loc loc : {Loc::UFace, Loc::VFace}) {
            const ScalarField& comp = loc == Loc::UFace ? w.u : w.v;
            const ScalarField& fcomp = loc == Loc::UFace ? fw.u : fw.v;
            const ScalarField c = op.coefficient();
            LinOp aop = [&g, &c, loc](const std::vector<double>& in, std::vector<double>& out) {
                ScalarField x(g, loc);
                unpack_interior(in, g, x);
                ScalarField lx = var_diffusion(x, c, g);
                out.resize(in.size());
                pack_interior(lx, g, out, 0);
                for (std::size_t k = 0; k < out.size(); ++k) out[k] += in[k];
            };
            const std::vector<double> xd = dense_solve(aop, pack_interior(comp, g));
            const std::vector<double> xi = pack_interior(fcomp, g);
            double diff = 0.0, scale = 0.0;
            for (std::size_t k = 0; k < xd.size(); ++k) {
                diff = std::max(diff, std::abs(xd[k] - xi[k]));
                scale = std::max(scale, std::abs(xd[k]));
            }
            worst = std::max(worst, diff / std::max(scale, 1e-300));
        }
        PropertyCheck c;
        c.name = "dense_oracle_agreement";
        c.indicator = "constant";
        c.size = 8;
        c.margin = 1e-8 - worst;
        c.pass = c.margin >= 0.0;
        report.checks.push_back(std::move(c));
    }

    return report;
}

} // namespace macflow

/// @file commands.hpp
/// @brief Implementations behind the CLI subcommands, reusable from tests.
///
/// Exit code contract: 0 success, 2 config error, 3 solver failure,
/// 4 property or stability violation.

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "macflow/config.hpp"
#include "macflow/field_io.hpp"
#include "macflow/manufactured.hpp"
#include "macflow/operators.hpp"
#include "macflow/random_fields.hpp"
#include "macflow/stepper.hpp"
#include "macflow/verification.hpp"

namespace macflow {

inline constexpr int exit_ok = 0;
inline constexpr int exit_config_error = 2;
inline constexpr int exit_solver_failure = 3;
inline constexpr int exit_violation = 4;

namespace detail {

inline void ensure_out_dir(const std::string& dir) {
    std::filesystem::create_directories(dir);
}

inline void dump_state(const FlowState& s, const StaggeredGrid& g, const std::string& dir,
                       const std::string& tag) {
    write_field(dir + "/" + tag + "_u.csv", s.u.u, g);
    write_field(dir + "/" + tag + "_v.csv", s.u.v, g);
    write_field(dir + "/" + tag + "_p.csv", s.p, g);
}

} // namespace detail

/// Seeded divergence-free initial data: white noise on the faces followed by
/// one exact L2 projection.
inline FaceVectorField random_divfree_field(const StaggeredGrid& g, std::uint64_t seed,
                                            const SolverConfig& solver) {
    Rng rng(seed);
    FaceVectorField noise = random_face_field(g, rng);
    StepperConfig proj;
    proj.dt = 1.0;
    proj.nu = 1.0;
    proj.solver = solver;
    proj.filter = FilterSpec::uniform(g, IndicatorKind::constant(), 0.0);
    return projection_step(noise, proj, g).first;
}

/// Zero-forcing decay run from seeded divergence-free initial data. Writes
/// the per-step report CSV and final field snapshots.
inline int cmd_run(const RunConfig& c, bool quiet = false) {
    // validate everything before touching the filesystem or allocating fields
    const StaggeredGrid g = make_grid(c.nx, c.ny, c.lx, c.ly);
    const StepperConfig cfg = make_stepper_config(c, g);
    cfg.validate();
    detail::ensure_out_dir(c.out_dir);

    FlowState state(g);
    state.w = random_divfree_field(g, c.seed, cfg.solver);
    state.u = state.w;

    const int n_steps = std::max(1, static_cast<int>(std::lround(c.t_final / c.dt)));
    try {
        const RunResult rr = run(state, cfg, g, n_steps);
        write_step_csv(c.out_dir + "/steps.csv", rr.reports);
        write_field(c.out_dir + "/final_u.csv", rr.final_state.u.u, g);
        write_field(c.out_dir + "/final_v.csv", rr.final_state.u.v, g);
        write_field(c.out_dir + "/final_p.csv", rr.final_state.p, g);
        write_field(c.out_dir + "/final_a.csv",
                    eval_indicator(cfg.filter.kind, rr.final_state.u, g), g);
        if (!quiet)
            std::printf("run: %d steps to t=%.6g, final ||u|| = %.12g, reports in %s\n", n_steps,
                        rr.final_state.t, l2_norm(rr.final_state.u, g), c.out_dir.c_str());
        if (!rr.stability_ok) {
            if (!quiet) std::printf("run: stability budget violated (see warnings)\n");
            return exit_violation;
        }
        return exit_ok;
    } catch (const StabilityViolation& e) {
        std::fprintf(stderr, "run aborted: %s\n", e.what());
        return exit_violation;
    } catch (const StepperAbort& e) {
        std::fprintf(stderr, "run aborted: %s\n", e.what());
        detail::dump_state(e.state_at_failure, g, c.out_dir, "abort");
        return exit_solver_failure;
    } catch (const SolveFailure& e) {
        std::fprintf(stderr, "run aborted: %s\n", e.what());
        return exit_solver_failure;
    }
}

/// Temporal convergence study against the manufactured solution; emits the
/// table CSV and a one-line verdict on the observed rates.
inline int cmd_convergence(const RunConfig& c, bool quiet = false) {
    detail::ensure_out_dir(c.out_dir);

    StudyConfig sc;
    sc.n = c.nx;
    sc.t_final = c.t_final;
    sc.nu = c.nu;
    sc.chi0 = c.chi0;
    sc.kind = parse_indicator(c.indicator, c.eta);
    sc.c_delta = c.c_delta;
    sc.eps_floor = c.eps_floor;
    sc.mode = c.mode == "before-projection" ? FilterMode::FilterBeforeProjection
                                            : FilterMode::FilterAfterProjection;
    sc.reproject = c.reproject;
    sc.solver.rel_tol = c.rel_tol;
    sc.solver.abs_tol = c.abs_tol;
    sc.solver.max_iter = c.max_iter;
    sc.dt_list = c.dt_list.empty()
                     ? std::vector<double>{1.0 / 40, 1.0 / 80, 1.0 / 160, 1.0 / 320}
                     : c.dt_list;

    try {
        const ConvergenceTable table = convergence_study(sc);
        write_convergence_csv(c.out_dir + "/convergence.csv", table);

        if (table.rows.size() < 2) {
            if (!quiet) std::printf("convergence: insufficient rows\n");
            return exit_ok;
        }
        bool rates_ok = true;
        int usable = 0;
        double last_rate_p = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t k = 1; k < table.rows.size(); ++k) {
            const auto& r = table.rows[k];
            if (!r.floored) {
                rates_ok = rates_ok && r.rate_v >= 0.7 && r.rate_v <= 1.3;
                last_rate_p = r.rate_p;
                ++usable;
            }
        }
        if (usable == 0) {
            if (!quiet)
                std::printf("convergence: FAIL (every refinement row sits on the spatial "
                            "error floor); table in %s/convergence.csv\n",
                            c.out_dir.c_str());
            return exit_violation;
        }
        rates_ok = rates_ok && last_rate_p >= 0.4;
        if (!quiet) {
            std::printf("convergence: %s (velocity rate band [0.7,1.3], pressure rate >= 0.4); "
                        "table in %s/convergence.csv\n",
                        rates_ok ? "PASS" : "FAIL", c.out_dir.c_str());
            for (const auto& r : table.rows)
                std::printf("  dt=%-10.6g E_v=%-12.6g E_p=%-12.6g rate_v=%-8.3g rate_p=%-8.3g%s\n",
                            r.dt, r.E_v, r.E_p, r.rate_v, r.rate_p, r.floored ? " [floored]" : "");
        }
        return rates_ok ? exit_ok : exit_violation;
    } catch (const StepperAbort& e) {
        std::fprintf(stderr, "convergence aborted: %s\n", e.what());
        return exit_solver_failure;
    } catch (const SolveFailure& e) {
        std::fprintf(stderr, "convergence aborted: %s\n", e.what());
        return exit_solver_failure;
    }
}

inline nlohmann::ordered_json property_report_json(const PropertyReport& rep) {
    nlohmann::ordered_json j;
    j["seed"] = rep.seed;
    j["sizes"] = rep.sizes;
    j["pass"] = rep.pass();
    j["checks"] = nlohmann::ordered_json::array();
    for (const auto& c : rep.checks) {
        nlohmann::ordered_json cj;
        cj["name"] = c.name;
        cj["indicator"] = c.indicator;
        cj["size"] = c.size;
        cj["margin"] = c.margin;
        cj["pass"] = c.pass;
        cj["skipped"] = c.skipped;
        if (!c.note.empty()) cj["note"] = c.note;
        j["checks"].push_back(std::move(cj));
    }
    return j;
}

/// Property suite across the configured sizes and indicators; JSON report
/// with the seed echoed in its header. Nonzero exit on any violation.
inline int cmd_filter_props(const RunConfig& c, bool quiet = false,
                            bool indicator_specified = false) {
    detail::ensure_out_dir(c.out_dir);

    std::vector<std::pair<std::string, IndicatorKind>> kinds;
    if (indicator_specified)
        kinds.push_back({c.indicator, parse_indicator(c.indicator, c.eta)});
    else
        kinds = default_indicator_set();

    try {
        const PropertyReport rep = property_suite(c.seed, c.sizes, kinds);
        const nlohmann::ordered_json j = property_report_json(rep);
        std::ofstream out(c.out_dir + "/properties.json");
        out << j.dump(2) << "\n";

        if (!quiet) {
            std::printf("filter-props: seed=%llu sizes=", static_cast<unsigned long long>(c.seed));
            for (int s : c.sizes) std::printf("%d ", s);
            std::printf("\n");
            for (const auto& chk : rep.checks) {
                if (chk.skipped)
                    std::printf("  SKIP %-28s %-20s n=%-3d (%s)\n", chk.name.c_str(),
                                chk.indicator.c_str(), chk.size, chk.note.c_str());
                else
                    std::printf("  %-4s %-28s %-20s n=%-3d margin=%.3e\n",
                                chk.pass ? "ok" : "FAIL", chk.name.c_str(), chk.indicator.c_str(),
                                chk.size, chk.margin);
            }
            std::printf("filter-props: %s, report in %s/properties.json\n",
                        rep.pass() ? "PASS" : "FAIL", c.out_dir.c_str());
        }
        return rep.pass() ? exit_ok : exit_violation;
    } catch (const SolveFailure& e) {
        std::fprintf(stderr, "filter-props aborted: %s\n", e.what());
        return exit_solver_failure;
    }
}

} // namespace macflow

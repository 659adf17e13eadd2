/// @file field_io.hpp
/// @brief Snapshot and report serialization.
///
/// Field snapshot format: a header line
///   # mac-field kind=<u|v|p> nx=<> ny=<> lx=<> ly=<>
/// followed by the values row-major, one per line. All floating point output
/// uses %.17g so repeated runs are byte-identical and round-trips are exact.

#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "macflow/grid.hpp"
#include "macflow/stepper.hpp"
#include "macflow/verification.hpp"

namespace macflow {

namespace detail {

inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline char kind_char(Loc loc) {
    switch (loc) {
    case Loc::UFace: return 'u';
    case Loc::VFace: return 'v';
    case Loc::Cell: return 'p';
    }
    return '?';
}

} // namespace detail

inline void write_field(const std::string& path, const ScalarField& f, const StaggeredGrid& g) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_field: cannot open " + path);
    out << "# mac-field kind=" << detail::kind_char(f.loc()) << " nx=" << g.nx << " ny=" << g.ny
        << " lx=" << detail::fmt_double(g.lx) << " ly=" << detail::fmt_double(g.ly) << "\n";
    for (int j = 0; j < f.npy(); ++j)
        for (int i = 0; i < f.npx(); ++i) out << detail::fmt_double(f(i, j)) << "\n";
}

struct FieldSnapshot {
    StaggeredGrid grid;
    ScalarField field;
};

inline FieldSnapshot read_field(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_field: cannot open " + path);
    std::string header;
    std::getline(in, header);
    char kind = 0;
    int nx = 0, ny = 0;
    double lx = 0.0, ly = 0.0;
    if (std::sscanf(header.c_str(), "# mac-field kind=%c nx=%d ny=%d lx=%lf ly=%lf", &kind, &nx,
                    &ny, &lx, &ly) != 5)
        throw std::runtime_error("read_field: malformed header in " + path);

    FieldSnapshot snap{make_grid(nx, ny, lx, ly), ScalarField()};
    Loc loc;
    switch (kind) {
    case 'u': loc = Loc::UFace; break;
    case 'v': loc = Loc::VFace; break;
    case 'p': loc = Loc::Cell; break;
    default: throw std::runtime_error("read_field: unknown kind in " + path);
    }
    snap.field = ScalarField(snap.grid, loc);
    for (int j = 0; j < snap.field.npy(); ++j)
        for (int i = 0; i < snap.field.npx(); ++i) {
            double x;
            if (!(in >> x)) throw std::runtime_error("read_field: truncated data in " + path);
            snap.field(i, j) = x;
        }
    return snap;
}

// ---- CSV reports -------------------------------------------------------------

inline void write_step_csv(const std::string& path, const std::vector<StepReport>& reports) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_step_csv: cannot open " + path);
    out << "t,ke,visc_diss,model_diss_inc,norm_u,norm_w,div_res,"
           "iters_momentum,iters_poisson,iters_filter\n";
    for (const auto& r : reports) {
        out << detail::fmt_double(r.t) << ',' << detail::fmt_double(r.kinetic_energy) << ','
            << detail::fmt_double(r.viscous_dissipation) << ','
            << detail::fmt_double(r.model_dissipation_increment) << ','
            << detail::fmt_double(r.norm_u) << ',' << detail::fmt_double(r.norm_w) << ','
            << detail::fmt_double(r.div_residual) << ',' << r.iters_momentum << ','
            << r.iters_poisson << ',' << r.iters_filter << "\n";
    }
}

inline void write_convergence_csv(const std::string& path, const ConvergenceTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_convergence_csv: cannot open " + path);
    out << "dt, delta_max, h, E_v, E_p, rate_v, rate_p, floored\n";
    for (const auto& r : table.rows) {
        out << detail::fmt_double(r.dt) << ", " << detail::fmt_double(r.delta_max) << ", "
            << detail::fmt_double(r.h) << ", " << detail::fmt_double(r.E_v) << ", "
            << detail::fmt_double(r.E_p) << ", "
            << (std::isnan(r.rate_v) ? std::string() : detail::fmt_double(r.rate_v)) << ", "
            << (std::isnan(r.rate_p) ? std::string() : detail::fmt_double(r.rate_p)) << ", "
            << (r.floored ? 1 : 0) << "\n";
    }
}

} // namespace macflow

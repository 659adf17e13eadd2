/// @file solvers.hpp
/// @brief Matrix-free Krylov solvers (CG, BiCGStab) and a dense direct
/// oracle for small systems.
///
/// All solvers work on flat DOF vectors with a caller-supplied operator
/// application. Convergence contract: ||b - A x|| <= max(rel_tol*||b||,
/// abs_tol), verified against the recomputed true residual, not just the
/// recursion residual. A Neumann-type constant null space is handled by
/// mean-projection of the right-hand side and of every iterate.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "macflow/grid.hpp"

namespace macflow {

/// Applies a square linear operator: out = A * in. Must be reentrant.
using LinOp = std::function<void(const std::vector<double>&, std::vector<double>&)>;

struct SolverConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-14;
    int max_iter = 0; ///< 0 means 10 * n_unknowns

    int effective_max_iter(std::size_t n) const {
        return max_iter > 0 ? max_iter : static_cast<int>(10 * n);
    }

    void validate() const {
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
            throw std::invalid_argument("SolverConfig: tolerances must be positive");
        if (max_iter < 0) throw std::invalid_argument("SolverConfig: max_iter must be >= 0");
    }
};

struct SolveStats {
    int iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
    std::vector<double> restart_residuals; ///< true residual at each restart
};

struct SolveFailure : std::runtime_error {
    SolveStats stats;
    SolveFailure(const std::string& what, SolveStats s)
        : std::runtime_error(what), stats(std::move(s)) {}
};

namespace detail {

inline double vec_dot(const std::vector<double>& a, const std::vector<double>& b) {
    return pairwise_dot(a.data(), b.data(), a.size());
}

inline double vec_norm(const std::vector<double>& a) {
    return std::sqrt(vec_dot(a, a));
}

inline double vec_mean(const std::vector<double>& a) {
    return pairwise_sum(a.data(), a.size()) / static_cast<double>(a.size());
}

inline void vec_shift(std::vector<double>& a, double s) {
    for (double& t : a) t += s;
}

inline void project_out_mean(std::vector<double>& a) { vec_shift(a, -vec_mean(a)); }

} // namespace detail

/// Conjugate gradients for SPD (or semidefinite, see project_mean) systems.
///
/// With project_mean the system may carry the constant null space of the
/// Neumann Poisson problem: the right-hand side is mean-corrected up front
/// and the iterate is mean-corrected each iteration.
inline SolveStats cg_solve(const LinOp& apply_A, const std::vector<double>& b,
                           std::vector<double>& x, const SolverConfig& cfg = {},
                           bool project_mean = false) {
    using namespace detail;
    const std::size_t n = b.size();
    x.assign(n, 0.0);
    SolveStats stats;

    std::vector<double> rhs = b;
    if (project_mean) project_out_mean(rhs);

    const double bnorm = vec_norm(rhs);
    const double tol = std::max(cfg.rel_tol * bnorm, cfg.abs_tol);
    if (bnorm == 0.0) {
        stats.converged = true;
        return stats;
    }

    std::vector<double> r = rhs;
    std::vector<double> p = r;
    std::vector<double> Ap(n);
    double rr = vec_dot(r, r);

    auto true_residual = [&](std::vector<double>& out) {
        apply_A(x, out);
        if (project_mean) project_out_mean(out);
        for (std::size_t k = 0; k < n; ++k) out[k] = rhs[k] - out[k];
        return vec_norm(out);
    };

    const int max_iter = cfg.effective_max_iter(n);
    std::vector<double> scratch(n);
    for (int it = 1; it <= max_iter; ++it) {
        apply_A(p, Ap);
        if (project_mean) project_out_mean(Ap);
        const double pAp = vec_dot(p, Ap);
        if (!(pAp > 0.0)) break; // operator not SPD on this subspace
        const double alpha = rr / pAp;
        for (std::size_t k = 0; k < n; ++k) x[k] += alpha * p[k];
        for (std::size_t k = 0; k < n; ++k) r[k] -= alpha * Ap[k];
        if (project_mean) {
            project_out_mean(x);
            project_out_mean(r);
        }
        stats.iterations = it;
        const double rr_new = vec_dot(r, r);
        if (std::sqrt(rr_new) <= tol) {
            const double tres = true_residual(scratch);
            if (tres <= tol) {
                stats.final_residual = tres;
                stats.converged = true;
                return stats;
            }
            // recursion residual drifted from the true one: restart
            stats.restart_residuals.push_back(tres);
            r = scratch;
            p = r;
            rr = vec_dot(r, r);
            continue;
        }
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t k = 0; k < n; ++k) p[k] = r[k] + beta * p[k];
    }

    stats.final_residual = true_residual(scratch);
    stats.converged = stats.final_residual <= tol;
    return stats;
}

/// BiCGStab for nonsymmetric systems (the linearized momentum solve).
inline SolveStats bicgstab_solve(const LinOp& apply_A, const std::vector<double>& b,
                                 std::vector<double>& x, const SolverConfig& cfg = {}) {
    using namespace detail;
    const std::size_t n = b.size();
    x.assign(n, 0.0);
    SolveStats stats;

    const double bnorm = vec_norm(b);
    const double tol = std::max(cfg.rel_tol * bnorm, cfg.abs_tol);
    if (bnorm == 0.0) {
        stats.converged = true;
        return stats;
    }

    std::vector<double> r = b; // x0 = 0
    std::vector<double> r0 = r;
    std::vector<double> p = r;
    std::vector<double> v(n, 0.0), s(n), t(n), scratch(n);
    double rho = vec_dot(r0, r);

    auto true_residual = [&](std::vector<double>& out) {
        apply_A(x, out);
        for (std::size_t k = 0; k < n; ++k) out[k] = b[k] - out[k];
        return vec_norm(out);
    };

    auto restart = [&]() {
        const double tres = true_residual(scratch);
        stats.restart_residuals.push_back(tres);
        r = scratch;
        r0 = r;
        p = r;
        rho = vec_dot(r0, r);
        return tres;
    };

    const int max_iter = cfg.effective_max_iter(n);
    for (int it = 1; it <= max_iter; ++it) {
        stats.iterations = it;
        apply_A(p, v);
        const double r0v = vec_dot(r0, v);
        if (r0v == 0.0) {
            if (restart() <= tol) break;
            continue;
        }
        const double alpha = rho / r0v;
        for (std::size_t k = 0; k < n; ++k) s[k] = r[k] - alpha * v[k];
        if (vec_norm(s) <= tol) {
            for (std::size_t k = 0; k < n; ++k) x[k] += alpha * p[k];
            if (true_residual(scratch) <= tol) break;
            if (restart() <= tol) break;
            continue;
        }
        apply_A(s, t);
        const double tt = vec_dot(t, t);
        if (tt == 0.0) {
            if (restart() <= tol) break;
            continue;
        }
        const double omega = vec_dot(t, s) / tt;
        for (std::size_t k = 0; k < n; ++k) x[k] += alpha * p[k] + omega * s[k];
        for (std::size_t k = 0; k < n; ++k) r[k] = s[k] - omega * t[k];
        if (vec_norm(r) <= tol) {
            if (true_residual(scratch) <= tol) break;
            if (restart() <= tol) break;
            continue;
        }
        const double rho_new = vec_dot(r0, r);
        if (rho_new == 0.0 || omega == 0.0) {
            if (restart() <= tol) break;
            continue;
        }
        const double beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for (std::size_t k = 0; k < n; ++k) p[k] = r[k] + beta * (p[k] - omega * v[k]);
    }

    stats.final_residual = true_residual(scratch);
    stats.converged = stats.final_residual <= tol;
    return stats;
}

struct DenseSolveInfo {
    int nullspace_dimension = 0;
};

/// Direct dense solve of the operator assembled column by column.
///
/// Serves as the independent oracle for the iterative paths. Handles the
/// rank-deficient Neumann Poisson case: a one-dimensional null space is
/// reported, the right-hand side is checked for compatibility, and the
/// mean-zero restricted system is solved through a bordered matrix.
inline std::vector<double> dense_solve(const LinOp& apply_A, const std::vector<double>& b,
                                       DenseSolveInfo* info = nullptr) {
    const std::size_t n = b.size();
    if (n == 0) throw std::invalid_argument("dense_solve: empty system");
    if (n > 4096) throw std::invalid_argument("dense_solve: system too large (n > 4096)");

    Eigen::MatrixXd A(n, n);
    std::vector<double> e(n, 0.0), col(n);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        apply_A(e, col);
        e[j] = 0.0;
        for (std::size_t i = 0; i < n; ++i) A(i, j) = col[i];
    }
    Eigen::Map<const Eigen::VectorXd> bv(b.data(), n);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    lu.setThreshold(1e-10);
    const auto rank = lu.rank();
    if (info) info->nullspace_dimension = static_cast<int>(n) - static_cast<int>(rank);

    if (rank == static_cast<Eigen::Index>(n)) {
        Eigen::VectorXd xv = lu.solve(bv);
        // one refinement pass keeps the 1e-12 relative residual contract
        Eigen::VectorXd res = bv - A * xv;
        xv += lu.solve(res);
        return std::vector<double>(xv.data(), xv.data() + n);
    }

    if (rank != static_cast<Eigen::Index>(n) - 1)
        throw std::runtime_error("dense_solve: singular matrix with null-space dimension " +
                                 std::to_string(n - rank) + " (only dimension 1 is supported)");

    Eigen::VectorXd kernel = lu.kernel().col(0);
    kernel.normalize();
    const double incompat = std::abs(kernel.dot(bv));
    if (incompat > 1e-10 * std::max(1.0, bv.norm()))
        throw std::runtime_error(
            "dense_solve: singular system (null-space dimension 1), right-hand side violates "
            "the compatibility condition: |<b, kernel>| = " +
            std::to_string(incompat));

    // bordered system enforces kernel-orthogonality of the solution
    Eigen::MatrixXd M(n + 1, n + 1);
    M.setZero();
    M.topLeftCorner(n, n) = A;
    M.topRightCorner(n, 1) = kernel;
    M.bottomLeftCorner(1, n) = kernel.transpose();
    Eigen::VectorXd rhs(n + 1);
    rhs.head(n) = bv;
    rhs(n) = 0.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> blu(M);
    Eigen::VectorXd xz = blu.solve(rhs);
    Eigen::VectorXd resz = rhs - M * xz;
    xz += blu.solve(resz);
    return std::vector<double>(xz.data(), xz.data() + n);
}

} // namespace macflow

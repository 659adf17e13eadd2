/// @file grid.hpp
/// @brief MAC staggered grid and the discrete fields living on it.
///
/// Variable layout on one cell (i,j):
///
///         v(i,j+1)
///            |
///   u(i,j) --p(i,j)-- u(i+1,j)
///            |
///         v(i,j)
///
/// Index ranges (no ghost storage; walls are handled by reflection):
///   p : [0,nx) x [0,ny)    cell centers  ((i+1/2)hx, (j+1/2)hy)
///   u : [0,nx] x [0,ny)    vertical faces (i hx, (j+1/2)hy)
///   v : [0,nx) x [0,ny]    horizontal faces ((i+1/2)hx, j hy)
///
/// Homogeneous Dirichlet walls: normal velocity components are stored as
/// zeros on the boundary faces (u at i=0,nx; v at j=0,ny); tangential
/// components are extended one layer past the wall by odd reflection
/// (ghost = -interior), which pins the wall value to zero at second order.

#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace macflow {

struct StaggeredGrid {
    int nx = 0;      ///< cells in x
    int ny = 0;      ///< cells in y
    double lx = 0.0; ///< domain length in x
    double ly = 0.0; ///< domain length in y
    double hx = 0.0; ///< mesh width lx/nx
    double hy = 0.0; ///< mesh width ly/ny

    double cell_area() const { return hx * hy; }

    // sample locations
    double xc(int i) const { return (i + 0.5) * hx; }
    double yc(int j) const { return (j + 0.5) * hy; }
    double xu(int i) const { return i * hx; }
    double yu(int j) const { return (j + 0.5) * hy; }
    double xv(int i) const { return (i + 0.5) * hx; }
    double yv(int j) const { return j * hy; }
};

/// Builds a grid; rejects degenerate dimensions.
inline StaggeredGrid make_grid(int nx, int ny, double lx, double ly) {
    if (nx < 2 || ny < 2)
        throw std::invalid_argument("make_grid: need nx >= 2 and ny >= 2, got nx=" +
                                    std::to_string(nx) + " ny=" + std::to_string(ny));
    if (!(lx > 0.0) || !(ly > 0.0))
        throw std::invalid_argument("make_grid: domain lengths must be positive");
    StaggeredGrid g;
    g.nx = nx;
    g.ny = ny;
    g.lx = lx;
    g.ly = ly;
    g.hx = lx / nx;
    g.hy = ly / ny;
    return g;
}

/// Which of the three MAC sub-grids a scalar array is sampled on.
enum class Loc { Cell, UFace, VFace };

inline int loc_npx(Loc loc, const StaggeredGrid& g) {
    return loc == Loc::UFace ? g.nx + 1 : g.nx;
}
inline int loc_npy(Loc loc, const StaggeredGrid& g) {
    return loc == Loc::VFace ? g.ny + 1 : g.ny;
}

namespace detail {

/// Fixed-order pairwise dot product: deterministic and accurate for the
/// long reductions behind the 1e-12-level identity checks.
inline double pairwise_dot(const double* a, const double* b, std::size_t n) {
    if (n <= 32) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_dot(a, b, half) + pairwise_dot(a + half, b + half, n - half);
}

inline double pairwise_sum(const double* a, std::size_t n) {
    if (n <= 32) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(a, half) + pairwise_sum(a + half, n - half);
}

} // namespace detail

/// Scalar samples on one MAC sub-grid (row-major, x fastest).
class ScalarField {
  public:
    ScalarField() = default;
    ScalarField(const StaggeredGrid& g, Loc loc)
        : loc_(loc), npx_(loc_npx(loc, g)), npy_(loc_npy(loc, g)),
          v_(static_cast<std::size_t>(npx_) * npy_, 0.0) {}

    Loc loc() const { return loc_; }
    int npx() const { return npx_; }
    int npy() const { return npy_; }
    std::size_t size() const { return v_.size(); }

    double& operator()(int i, int j) {
        assert(i >= 0 && i < npx_ && j >= 0 && j < npy_);
        return v_[static_cast<std::size_t>(j) * npx_ + i];
    }
    double operator()(int i, int j) const {
        assert(i >= 0 && i < npx_ && j >= 0 && j < npy_);
        return v_[static_cast<std::size_t>(j) * npx_ + i];
    }

    /// Access with the wall ghost convention: indices one layer outside the
    /// stored range return the odd reflection of the first interior value
    /// (ghost = -interior), in the directions where this location has no
    /// stored boundary entry.
    double refl(int i, int j) const { return refl_impl(i, j); }

    const std::vector<double>& data() const { return v_; }
    std::vector<double>& data() { return v_; }

    void fill(double value) { std::fill(v_.begin(), v_.end(), value); }

    double max_abs() const {
        double m = 0.0;
        for (double x : v_) m = std::max(m, std::abs(x));
        return m;
    }
    double max() const {
        double m = -std::numeric_limits<double>::infinity();
        for (double x : v_) m = std::max(m, x);
        return m;
    }
    double min() const {
        double m = std::numeric_limits<double>::infinity();
        for (double x : v_) m = std::min(m, x);
        return m;
    }

    bool same_shape(const ScalarField& o) const {
        return loc_ == o.loc_ && npx_ == o.npx_ && npy_ == o.npy_;
    }

  private:
    double refl_impl(int i, int j) const {
        // UFace stores x-boundary faces, reflects in y; VFace the opposite;
        // Cell reflects in both.
        if (i < 0) {
            assert(i == -1 && loc_ != Loc::UFace);
            return -refl_impl(0, j);
        }
        if (i >= npx_) {
            assert(i == npx_ && loc_ != Loc::UFace);
            return -refl_impl(npx_ - 1, j);
        }
        if (j < 0) {
            assert(j == -1 && loc_ != Loc::VFace);
            return -(*this)(i, 0);
        }
        if (j >= npy_) {
            assert(j == npy_ && loc_ != Loc::VFace);
            return -(*this)(i, npy_ - 1);
        }
        return (*this)(i, j);
    }

    Loc loc_ = Loc::Cell;
    int npx_ = 0;
    int npy_ = 0;
    std::vector<double> v_;
};

/// Staggered velocity field: u on vertical faces, v on horizontal faces.
struct FaceVectorField {
    ScalarField u; ///< Loc::UFace, (nx+1) x ny
    ScalarField v; ///< Loc::VFace, nx x (ny+1)

    FaceVectorField() = default;
    explicit FaceVectorField(const StaggeredGrid& g)
        : u(g, Loc::UFace), v(g, Loc::VFace) {}

    void fill(double value) {
        u.fill(value);
        v.fill(value);
    }
    double max_abs() const { return std::max(u.max_abs(), v.max_abs()); }
};

/// Velocity gradient tensor sampled at cell centers.
struct CellTensorField {
    ScalarField dudx, dudy, dvdx, dvdy; // all Loc::Cell

    explicit CellTensorField(const StaggeredGrid& g)
        : dudx(g, Loc::Cell), dudy(g, Loc::Cell), dvdx(g, Loc::Cell), dvdy(g, Loc::Cell) {}
};

// ---- small field arithmetic ------------------------------------------------

inline void axpy(double a, const ScalarField& x, ScalarField& y) {
    assert(x.same_shape(y));
    const double* xp = x.data().data();
    double* yp = y.data().data();
    for (std::size_t k = 0; k < x.size(); ++k) yp[k] += a * xp[k];
}

inline void axpy(double a, const FaceVectorField& x, FaceVectorField& y) {
    axpy(a, x.u, y.u);
    axpy(a, x.v, y.v);
}

inline void scale(double a, ScalarField& x) {
    for (double& t : x.data()) t *= a;
}

inline void scale(double a, FaceVectorField& x) {
    scale(a, x.u);
    scale(a, x.v);
}

/// a*X + b*Y, elementwise.
inline FaceVectorField lin_comb(double a, const FaceVectorField& x, double b,
                                const FaceVectorField& y) {
    FaceVectorField r = x;
    scale(a, r);
    axpy(b, y, r);
    return r;
}

inline double field_mean(const ScalarField& f) {
    return detail::pairwise_sum(f.data().data(), f.size()) / static_cast<double>(f.size());
}

/// Shifts a cell scalar to zero mean (the L2(Omega)/R representative).
inline void remove_mean(ScalarField& f) {
    const double m = field_mean(f);
    for (double& t : f.data()) t -= m;
}

} // namespace macflow

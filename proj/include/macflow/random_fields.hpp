/// @file random_fields.hpp
/// @brief Seeded pseudo-random test fields. Everything here is fully
/// deterministic for a given seed so property reports are reproducible
/// byte for byte.

#pragma once

#include <cstdint>
#include <random>

#include "macflow/grid.hpp"

namespace macflow {

/// Thin deterministic wrapper: mt19937_64 with explicit mapping to [0,1)
/// (the standard distributions are implementation-defined, the engine is not).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// uniform in [-1, 1)
    double symmetric() { return 2.0 * uniform01() - 1.0; }

    std::uint64_t raw() { return eng_(); }

    /// Deterministic derived seed for sub-streams.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

  private:
    std::mt19937_64 eng_;
};

/// Uniform noise on the interior of one sub-grid; walls stay zero.
inline ScalarField random_scalar_field(const StaggeredGrid& g, Loc loc, Rng& rng,
                                       double amplitude = 1.0) {
    ScalarField f(g, loc);
    const int i0 = loc == Loc::UFace ? 1 : 0;
    const int i1 = loc == Loc::UFace ? g.nx - 1 : f.npx() - 1;
    const int j0 = loc == Loc::VFace ? 1 : 0;
    const int j1 = loc == Loc::VFace ? g.ny - 1 : f.npy() - 1;
    for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) f(i, j) = amplitude * rng.symmetric();
    return f;
}

inline FaceVectorField random_face_field(const StaggeredGrid& g, Rng& rng,
                                         double amplitude = 1.0) {
    FaceVectorField f(g);
    f.u = random_scalar_field(g, Loc::UFace, rng, amplitude);
    f.v = random_scalar_field(g, Loc::VFace, rng, amplitude);
    return f;
}

} // namespace macflow

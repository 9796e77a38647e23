#pragma once

// Reproducible sampling. The engine is std::mt19937_64 (fully specified by the
// standard); doubles are formed from the top 53 bits so that outputs do not
// depend on the standard library's distribution implementations.

#include <cstdint>
#include <random>

#include "ape/orthogonal.hpp"

namespace ape {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1).
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    /// Uniform integer in [lo, hi].
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(engine_() % span);
    }

    Matrix matrix(Index rows, Index cols, double scale = 1.0) {
        Matrix m(rows, cols);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) m(i, j) = uniform(-scale, scale);
        return m;
    }

private:
    std::mt19937_64 engine_;
};

inline GeneratorParam random_param(Index dim, Rng& rng, double scale = 1.0) {
    return GeneratorParam(rng.matrix(dim, dim, scale));
}

inline OrthogonalMatrix random_special_orthogonal(Index dim, Rng& rng, double scale = 1.0) {
    return generator_from_param(random_param(dim, rng, scale));
}

/// Orthogonal with determinant -1: a rotation followed by a single reflection.
inline OrthogonalMatrix random_reflection(Index dim, Rng& rng, double scale = 1.0) {
    Matrix m = random_special_orthogonal(dim, rng, scale).entries();
    m.col(0) *= -1.0;
    return OrthogonalMatrix(std::move(m));
}

}  // namespace ape

#pragma once

#include <Eigen/Dense>

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace kbse {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// Argument/contract violations (dimension mismatches, empty inputs, bad ranges).
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Numerical failures that survive all recovery attempts (e.g. factorization at jitter cap).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoUnsafeSamples : std::runtime_error {
    NoUnsafeSamples() : std::runtime_error("no unsafe-labeled samples; barrier level nu is undefined") {}
};

struct NoSafeSamples : std::runtime_error {
    NoSafeSamples() : std::runtime_error("no safe-labeled samples; barrier regression is degenerate") {}
};

struct InvalidBarrier : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Axis-aligned box, used for state and action spaces.
struct Box {
    Vec lo;
    Vec hi;

    Eigen::Index dim() const { return lo.size(); }

    Vec clip(const Vec& x) const {
        return x.cwiseMax(lo).cwiseMin(hi);
    }

    bool contains(const Vec& x, double tol = 0.0) const {
        return (x.array() >= lo.array() - tol).all() && (x.array() <= hi.array() + tol).all();
    }

    Vec center() const { return 0.5 * (lo + hi); }
    Vec half_width() const { return 0.5 * (hi - lo); }

    Vec sample(Rng& rng) const {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Vec x(dim());
        for (Eigen::Index i = 0; i < dim(); ++i) x[i] = lo[i] + u(rng) * (hi[i] - lo[i]);
        return x;
    }
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ArgumentError(msg);
}

// Per-coordinate normalization used by the kernel layers; an empty scale
// means identity.
inline Vec normalize_by(const Vec& x, const Vec& scale) {
    if (scale.size() == 0) return x;
    return x.cwiseQuotient(scale);
}

}  // namespace kbse

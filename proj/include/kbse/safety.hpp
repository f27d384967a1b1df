#pragma once

#include <functional>
#include <limits>
#include <string>

#include "kbse/common.hpp"

namespace kbse {

// One scalar safety channel derived from the state, with an inclusive safe
// interval. A state is safe on this channel iff lower <= value(s) <= upper;
// the boundary itself is safe.
struct SafetyConstraint {
    std::string name;
    std::function<double(const Vec&)> value;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();

    bool violated(const Vec& s) const {
        const double v = value(s);
        return v < lower || v > upper;
    }
};

// Safety specification <S_u, T>: a state is unsafe iff at least one
// constraint is violated; T is the certification horizon.
struct SafetySpec {
    std::vector<SafetyConstraint> constraints;
    int horizon_T = 1;

    // Draws one full state uniformly on the boundary of the unsafe set.
    // Supplied by the environment that owns this spec.
    std::function<Vec(Rng&)> sample_unsafe_boundary;
};

inline bool is_unsafe(const SafetySpec& spec, const Vec& s) {
    for (const auto& c : spec.constraints)
        if (c.violated(s)) return true;
    return false;
}

// Constraint on a raw state coordinate: safe iff s[index] >= lower.
inline SafetyConstraint coordinate_above(std::string name, int index, double lower) {
    SafetyConstraint c;
    c.name = std::move(name);
    c.value = [index](const Vec& s) { return s[index]; };
    c.lower = lower;
    return c;
}

// Constraint on a raw state coordinate: safe iff |s[index]| <= bound.
inline SafetyConstraint coordinate_abs_below(std::string name, int index, double bound) {
    SafetyConstraint c;
    c.name = std::move(name);
    c.value = [index](const Vec& s) { return s[index]; };
    c.lower = -bound;
    c.upper = bound;
    return c;
}

}  // namespace kbse

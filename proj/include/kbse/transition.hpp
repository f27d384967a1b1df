#pragma once

#include "kbse/common.hpp"

namespace kbse {

// One environment step <s, a, r, s+>.
struct Transition {
    Vec s;
    Vec a;
    double r = 0.0;
    Vec s_plus;

    bool finite() const {
        return s.allFinite() && a.allFinite() && std::isfinite(r) && s_plus.allFinite();
    }
};

// Uniform iid draw of n transitions: without replacement when the pool has at
// least n elements, otherwise the whole pool plus uniform redraws.
std::vector<Transition> sample_transitions(const std::vector<Transition>& pool, std::size_t n,
                                           Rng& rng);

}  // namespace kbse

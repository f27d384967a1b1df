#pragma once

#include "kbse/kernel.hpp"
#include "kbse/transition.hpp"

namespace kbse {

// Empirical conditional mean embedding of the transition kernel: the training
// pairs (s_i, a_i), their successors, and the factor of (K + lambda*N*I) over
// the joint inputs.
struct CmeModel {
    std::vector<Vec> inputs;      // concatenated (s, a) pairs, raw coordinates
    std::vector<Vec> successors;  // s+ for each input
    GramFactor factor;
    KernelSpec kernel;  // with the bandwidth actually used
    Vec input_scale;    // per-coordinate kernel normalization; empty = identity

    Eigen::Index size() const { return static_cast<Eigen::Index>(inputs.size()); }
    Eigen::Index state_dim() const { return successors.empty() ? 0 : successors[0].size(); }
};

// Confidence bookkeeping for the MMD ambiguity radius.
struct MmdBounds {
    double epsilon = 0.0;
    double zeta = 0.0;
    std::size_t sample_count = 0;
    double kernel_bound_c = 1.0;
};

// Fits the embedding on an iid sample. A zero state-action bandwidth in the
// spec is resolved by the median heuristic over the (normalized) joint
// inputs. input_scale, when given, normalizes each joint coordinate before
// any kernel evaluation (state-box/action-box half-widths in production).
CmeModel fit_cme(const std::vector<Transition>& sample, KernelSpec kernel,
                 const Vec& input_scale = Vec());

// k((s,a), inputs[i]) for all i, in the model's normalized metric.
Vec cme_kernel_vector(const CmeModel& model, const Vec& s, const Vec& a);

// W(s,a) = solve(K + lambda*N*I, k((s,a), inputs)).
Vec cme_weights(const CmeModel& model, const Vec& s, const Vec& a);

// Empirical estimate of E[f(s+) | s, a] where f_on_successors[i] = f(s+_i).
double expected_value(const CmeModel& model, const Vec& f_on_successors, const Vec& s,
                      const Vec& a);

// sqrt(C/n) * (1 + sqrt(2*ln(1/zeta))): the MMD radius at confidence 1-zeta.
double epsilon_bound(std::size_t n, double c, double zeta);

// exp(-0.5*(eps*sqrt(n/C) - 1)^2), clamped to (0, 1]. Vacuous regime
// (eps*sqrt(n/C) < 1) returns 1.
double zeta_bound(double epsilon, std::size_t n, double c);

inline MmdBounds mmd_bounds(std::size_t n, double c, double zeta) {
    return MmdBounds{epsilon_bound(n, c, zeta), zeta, n, c};
}

}  // namespace kbse

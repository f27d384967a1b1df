#pragma once

#include "kbse/barrier.hpp"
#include "kbse/transition.hpp"

namespace kbse {

// Local linear model s+ ~= P*s + Q*a fit on a window of recent transitions.
struct LocalLinearModel {
    Mat P;  // p x p
    Mat Q;  // p x q
    int window_H = 500;
    double residual = 0.0;  // RMS one-step prediction error on the fit window

    Vec predict(const Vec& s, const Vec& a) const { return P * s + Q * a; }
};

// Least squares over the last min(H, |recent|) transitions. Normal equations
// with 1e-8 Tikhonov damping plus iterative refinement; underdetermined
// systems give the minimum-norm solution.
LocalLinearModel fit_local_dynamics(const std::vector<Transition>& recent, int H);

struct SafeActionResult {
    Vec action;
    bool modified = false;             // the constraint was active
    bool degenerate_gradient = false;  // |Q'grad B| below threshold at the linearization point
    bool fallback_sampled = false;     // best-of-sampled-actions path taken
    int backtrack_steps = 0;
    double predicted_barrier = 0.0;    // B at the predicted successor of the returned action
};

// Returns the action closest to `a` whose predicted successor keeps the
// barrier below nu*(1-margin). The constraint is linearized once at the
// nominal successor, giving a closed-form half-space projection; if the
// re-evaluated barrier still violates, the projection magnitude doubles up to
// 8 times, and the final fallback returns the lowest-predicted-barrier action
// among 128 uniform box samples. The returned action is always inside
// action_box.
SafeActionResult safe_action(const BarrierModel& barrier, const LocalLinearModel& dyn,
                             const Vec& s, const Vec& a, const Box& action_box, Rng& rng,
                             double margin = 0.05);

}  // namespace kbse

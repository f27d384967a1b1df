#include "kbse/shield.hpp"

#include <cmath>

#include "kbse/log.hpp"

namespace kbse {

LocalLinearModel fit_local_dynamics(const std::vector<Transition>& recent, int H) {
    require(!recent.empty(), "fit_local_dynamics: empty window");
    require(H >= 1, "fit_local_dynamics: H must be positive");

    const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(H), recent.size());
    const std::size_t first = recent.size() - m;
    const Eigen::Index p = recent[first].s.size();
    const Eigen::Index q = recent[first].a.size();

    Mat x(static_cast<Eigen::Index>(m), p + q);
    Mat y(static_cast<Eigen::Index>(m), p);
    for (std::size_t i = 0; i < m; ++i) {
        const Transition& t = recent[first + i];
        require(t.s.size() == p && t.a.size() == q && t.s_plus.size() == p,
                "fit_local_dynamics: inconsistent transition dimensions");
        x.row(static_cast<Eigen::Index>(i)) << t.s.transpose(), t.a.transpose();
        y.row(static_cast<Eigen::Index>(i)) = t.s_plus.transpose();
    }

    Mat gram = x.transpose() * x;
    gram.diagonal().array() += 1e-8;
    Eigen::LLT<Mat> llt(gram);
    if (llt.info() != Eigen::Success)
        throw NumericError("fit_local_dynamics: damped normal equations failed to factorize");

    // Damped solve, then refinement toward the undamped least-squares
    // solution. Corrections stay in the row space of x, which preserves the
    // minimum-norm property on rank-deficient windows.
    Mat theta = llt.solve(x.transpose() * y);
    for (int it = 0; it < 3; ++it) {
        theta += llt.solve(x.transpose() * (y - x * theta));
    }

    LocalLinearModel model;
    model.window_H = H;
    model.P = theta.topRows(p).transpose();
    model.Q = theta.bottomRows(q).transpose();
    model.residual =
        std::sqrt((y - x * theta).rowwise().squaredNorm().mean());
    return model;
}

SafeActionResult safe_action(const BarrierModel& barrier, const LocalLinearModel& dyn,
                             const Vec& s, const Vec& a, const Box& action_box, Rng& rng,
                             double margin) {
    require(barrier.valid, "safe_action: barrier must be valid");
    require(s.size() == dyn.P.cols(), "safe_action: state dimension mismatch");
    require(a.size() == dyn.Q.cols(), "safe_action: action dimension mismatch");
    require(margin >= 0.0 && margin < 1.0, "safe_action: margin must lie in [0,1)");

    SafeActionResult res;
    res.action = action_box.clip(a);

    const double tau = barrier.nu * (1.0 - margin);
    const double slack = 1e-9 * (1.0 + std::abs(barrier.nu));  // roundoff guard

    Vec pred = dyn.predict(s, res.action);
    res.predicted_barrier = eval_barrier(barrier, pred);
    if (res.predicted_barrier <= tau) return res;  // constraint inactive

    res.modified = true;
    const Vec g = barrier_gradient(barrier, pred);
    const Vec w = dyn.Q.transpose() * g;
    const double wn2 = w.squaredNorm();

    auto sample_fallback = [&]() {
        res.fallback_sampled = true;
        Vec best = action_box.sample(rng);
        double best_b = eval_barrier(barrier, dyn.predict(s, best));
        for (int i = 1; i < 128; ++i) {
            const Vec cand = action_box.sample(rng);
            const double b = eval_barrier(barrier, dyn.predict(s, cand));
            if (b < best_b) {
                best_b = b;
                best = cand;
            }
        }
        res.action = best;
        res.predicted_barrier = best_b;
    };

    if (wn2 < 1e-10 * 1e-10) {
        res.degenerate_gradient = true;
        log_debug("safe_action: degenerate constraint gradient, sampling fallback");
        sample_fallback();
        return res;
    }

    // Closest point on the half-space g'Q(a_bar - a) <= tau - B(pred).
    const double excess = res.predicted_barrier - tau;
    const Vec step = -(w * excess / wn2);

    double scale = 1.0;
    for (int k = 0; k <= 8; ++k) {
        const Vec cand = action_box.clip(res.action + scale * step);
        const Vec cand_pred = dyn.predict(s, cand);
        const double b = eval_barrier(barrier, cand_pred);
        if (b <= tau + slack) {
            res.action = cand;
            res.predicted_barrier = b;
            res.backtrack_steps = k;
            return res;
        }
        scale *= 2.0;
    }

    sample_fallback();
    return res;
}

}  // namespace kbse

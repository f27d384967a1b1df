#include "kbse/eval.hpp"

#include <cmath>

#include "kbse/shield.hpp"

namespace kbse {

std::pair<double, double> wilson_interval(long successes, long trials) {
    if (trials <= 0) return {0.0, 1.0};
    const double z = 1.959963984540054;
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

EvalReport evaluate_policy(const EnvModel& env, const PolicyParams& policy,
                           const BarrierModel* barrier, const EvalConfig& cfg) {
    require(cfg.episodes >= 0, "evaluate_policy: negative episode count");

    EvalReport report;
    report.episodes = cfg.episodes;
    report.shielded = cfg.shielded && barrier != nullptr && barrier->valid;
    report.barrier_delta = barrier != nullptr ? barrier->delta : 1.0;
    if (cfg.episodes == 0) return report;

    const int n = cfg.episodes;
    std::vector<double> rewards(static_cast<std::size_t>(n), 0.0);
    std::vector<long> costs(static_cast<std::size_t>(n), 0);
    std::vector<long> lengths(static_cast<std::size_t>(n), 0);
    std::vector<int> unsafe_flags(static_cast<std::size_t>(n), 0);

    const bool use_shield = report.shielded;

#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        Rng rng(cfg.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1));
        std::vector<Transition> window;
        Vec s = env_reset(env, rng);
        double ep_reward = 0.0;
        long ep_cost = 0;
        long steps = 0;
        for (; steps < env.episode_length; ++steps) {
            Vec a = act(policy, s, /*explore=*/false, rng);
            if (is_unsafe(env.spec, s)) {
                ep_cost += 1;
                if (use_shield && !window.empty()) {
                    const LocalLinearModel dyn = fit_local_dynamics(
                        window, cfg.local_window_h);
                    a = safe_action(*barrier, dyn, s, a, env.action_box, rng,
                                    cfg.shield_margin)
                            .action;
                }
            }
            auto [s_plus, r] = env_step(env, s, a, rng);
            window.push_back(Transition{s, a, r, s_plus});
            if (window.size() > static_cast<std::size_t>(cfg.local_window_h))
                window.erase(window.begin());
            ep_reward += r;
            const bool over = env_terminal(env, s_plus);
            s = s_plus;
            if (over) {
                ++steps;
                break;
            }
        }
        rewards[static_cast<std::size_t>(i)] = ep_reward;
        costs[static_cast<std::size_t>(i)] = ep_cost;
        lengths[static_cast<std::size_t>(i)] = steps;
        unsafe_flags[static_cast<std::size_t>(i)] = ep_cost > 0 ? 1 : 0;
    }

    double sum_r = 0.0;
    long sum_c = 0, sum_l = 0, unsafe = 0;
    for (int i = 0; i < n; ++i) {
        sum_r += rewards[static_cast<std::size_t>(i)];
        sum_c += costs[static_cast<std::size_t>(i)];
        sum_l += lengths[static_cast<std::size_t>(i)];
        unsafe += unsafe_flags[static_cast<std::size_t>(i)];
    }
    report.mean_reward = sum_r / n;
    report.mean_cost = static_cast<double>(sum_c) / n;
    report.mean_length = static_cast<double>(sum_l) / n;
    report.unsafe_episode_frequency = static_cast<double>(unsafe) / n;
    const auto [lo, hi] = wilson_interval(unsafe, n);
    report.unsafe_ci_low = lo;
    report.unsafe_ci_high = hi;
    return report;
}

}  // namespace kbse

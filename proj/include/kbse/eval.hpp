#pragma once

#include "kbse/agent.hpp"
#include "kbse/barrier.hpp"
#include "kbse/envs.hpp"

namespace kbse {

struct EvalConfig {
    int episodes = 100;
    std::uint64_t seed = 0;
    bool shielded = true;
    double shield_margin = 0.05;
    int local_window_h = 500;
};

struct EvalReport {
    int episodes = 0;
    double mean_reward = 0.0;
    double mean_cost = 0.0;
    double mean_length = 0.0;
    double unsafe_episode_frequency = 0.0;
    double unsafe_ci_low = 0.0;   // Wilson 95% interval
    double unsafe_ci_high = 0.0;
    double barrier_delta = 1.0;
    bool shielded = false;
};

// Runs greedy episodes (shielded when a valid barrier is given). Episodes use
// independent per-episode RNG streams and may run in parallel; aggregation is
// deterministic.
EvalReport evaluate_policy(const EnvModel& env, const PolicyParams& policy,
                           const BarrierModel* barrier, const EvalConfig& cfg);

// Wilson score interval for a binomial proportion at 95% confidence.
std::pair<double, double> wilson_interval(long successes, long trials);

}  // namespace kbse

#pragma once

#include <atomic>

#include "kbse/agent.hpp"
#include "kbse/barrier.hpp"
#include "kbse/envs.hpp"
#include "kbse/shield.hpp"

namespace kbse {

struct RunConfig {
    std::string env_name = "pendulum";
    double noise_sigma = 0.01;
    long training_horizon = 50000;  // total environment steps
    long epoch_length = 10000;      // barrier refit cadence, in steps
    int barrier_sample_size = 500;  // N
    double zeta = 1e-5;
    std::uint64_t seed = 0;

    KernelSpec kernel;  // zero bandwidths resolve to the median heuristic
    double ridge_lambda = 1e-3;

    std::vector<int> hidden = {64, 64};
    double learning_rate = 1e-3;
    double exploration_sigma = 0.2;
    double discount_gamma = 0.99;
    double polyak = 0.005;
    int batch_size = 128;

    double shield_margin = 0.05;
    int local_window_h = 500;
    bool preemptive_shield = false;

    // When set, the loop stops early at the next step boundary (checkpoints
    // still get flushed by the caller).
    const std::atomic<bool>* stop_flag = nullptr;

    void validate(const EnvModel& env) const;
};

struct EpisodeRecord {
    long index = 0;
    long end_step = 0;  // training step at which the episode ended
    double reward = 0.0;
    long cost = 0;  // unsafe steps in the episode
    long length = 0;
};

struct EpochRecord {
    long index = 0;
    long end_step = 0;
    double eta = 0, nu = 0, c = 0, c_minmax = 0, b_bar = 0, epsilon = 0;
    double delta = 1.0, delta_minmax = 1.0;
    bool valid = false;
    bool accepted = false;  // replaced the previous barrier
};

struct RunMetrics {
    std::vector<EpisodeRecord> episodes;
    std::vector<EpochRecord> epochs;
    std::vector<long> violation_steps;
    long total_violations = 0;
    long steps = 0;
    double wall_clock_sec = 0.0;
};

struct RunResult {
    PolicyParams policy;
    BarrierModel barrier;
    RunMetrics metrics;
    ReplayBuffer buffer;
    bool barrier_ever_valid = false;
    double final_epsilon = 0.0;
    double zeta = 0.0;
};

// Runs the randomly initialized exploring policy until at least
// min_transitions are collected, resetting episodes as needed.
std::vector<Transition> initial_rollout(const EnvModel& env, const PolicyParams& policy,
                                        long min_transitions, Rng& rng);

// MMD radius refresh: epsilon_bound with the RBF kernel bound C = 1.
double update_epsilon(std::size_t n, double zeta);

// RKHS-norm bound refresh on the current barrier expansion.
double update_upper_bound(const BarrierModel& barrier);

// Step at which 90% of the violations had occurred, as a percentage of the
// horizon; 0 when there were no violations.
double violation_p90_percent(const RunMetrics& metrics, long horizon);

// The full training loop: initial rollout, barrier synthesis, shielded
// exploration with per-step policy updates, episode-end bound refreshes,
// epoch-end barrier refits, and the final certificate.
RunResult run_kbse(const RunConfig& config);

}  // namespace kbse

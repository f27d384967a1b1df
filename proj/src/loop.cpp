#include "kbse/loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "kbse/log.hpp"

namespace kbse {

void RunConfig::validate(const EnvModel& env) const {
    require(training_horizon >= 0, "config: training_horizon must be non-negative");
    require(epoch_length > 0, "config: epoch_length must be positive");
    require(epoch_length % env.episode_length == 0,
            "config: epoch_length must be a multiple of the episode length");
    require(barrier_sample_size >= 1, "config: barrier_sample_size must be positive");
    require(zeta > 0.0 && zeta < 1.0, "config: zeta must lie in (0,1)");
    require(batch_size >= 1, "config: batch_size must be positive");
    require(local_window_h >= 1, "config: local window H must be positive");
    kernel.validate();
}

std::vector<Transition> initial_rollout(const EnvModel& env, const PolicyParams& policy,
                                        long min_transitions, Rng& rng) {
    std::vector<Transition> out;
    if (min_transitions <= 0) return out;
    out.reserve(static_cast<std::size_t>(min_transitions));

    Vec s = env_reset(env, rng);
    long in_episode = 0;
    while (static_cast<long>(out.size()) < min_transitions) {
        const Vec a = act(policy, s, /*explore=*/true, rng);
        auto [s_plus, r] = env_step(env, s, a, rng);
        out.push_back(Transition{s, a, r, s_plus});
        ++in_episode;
        if (in_episode >= env.episode_length || env_terminal(env, s_plus)) {
            s = env_reset(env, rng);
            in_episode = 0;
        } else {
            s = s_plus;
        }
    }
    return out;
}

double update_epsilon(std::size_t n, double zeta) {
    return epsilon_bound(n, /*c=*/1.0, zeta);
}

double update_upper_bound(const BarrierModel& barrier) {
    if (barrier.centers.empty() || barrier.alpha.size() == 0) return 0.0;
    return rkhs_norm(barrier.alpha, barrier_center_gram(barrier));
}

double violation_p90_percent(const RunMetrics& metrics, long horizon) {
    if (metrics.violation_steps.empty() || horizon <= 0) return 0.0;
    std::vector<long> steps = metrics.violation_steps;
    std::sort(steps.begin(), steps.end());
    const std::size_t idx = static_cast<std::size_t>(
        std::ceil(0.9 * static_cast<double>(steps.size()))) - 1;
    return 100.0 * static_cast<double>(steps[idx]) / static_cast<double>(horizon);
}

RunResult run_kbse(const RunConfig& config) {
    const auto t_start = std::chrono::steady_clock::now();

    EnvModel env = make_env(config.env_name, config.noise_sigma, config.seed);
    config.validate(env);
    Rng rng(config.seed);

    RunResult result;
    result.zeta = config.zeta;

    PolicyParams policy = make_policy(env.state_dim, env.action_box, config.hidden, rng);
    policy.exploration_sigma = config.exploration_sigma;
    policy.learning_rate = config.learning_rate;
    policy.discount_gamma = config.discount_gamma;
    policy.polyak = config.polyak;
    policy.env_name = env.name;
    policy.env_noise_sigma = config.noise_sigma;

    ReplayBuffer buffer;
    std::vector<Vec> initial_states;

    const std::size_t n_barrier = static_cast<std::size_t>(config.barrier_sample_size);
    double epsilon = update_epsilon(n_barrier, config.zeta);
    double b_bar = 0.0;

    auto greedy_policy = [&policy](const Vec& s) {
        Vec a = policy_actions(policy.actor, policy.action_box, s);
        return a;
    };

    auto synthesize = [&](const std::vector<Transition>& sample) {
        BarrierSynthesisInputs in;
        in.sample = &sample;
        in.spec = &env.spec;
        in.kernel = config.kernel;
        in.ridge_lambda = config.ridge_lambda;
        in.epsilon = epsilon;
        in.b_bar_hint = b_bar;
        in.initial_states = initial_states;
        in.state_box = env.state_box;
        in.action_box = env.action_box;
        in.policy_action = greedy_policy;
        in.zeta = config.zeta;
        in.rng = &rng;
        in.resample_pool = buffer.empty() ? nullptr : &buffer.transitions;
        return compute_bc(in);
    };

    // Initialization: rollout under the random exploring policy, then the
    // first barrier synthesis.
    {
        Rng probe = rng;  // initial-state pool for eta before any resets are seen
        for (int i = 0; i < 32; ++i) initial_states.push_back(env_reset(env, probe));
    }
    std::vector<Transition> warmup =
        initial_rollout(env, policy, config.barrier_sample_size, rng);

    BarrierModel barrier;
    barrier.valid = false;
    if (!warmup.empty()) {
        std::vector<Transition> w = sample_transitions(warmup, n_barrier, rng);
        try {
            barrier = synthesize(w);
            result.barrier_ever_valid = barrier.valid;
            if (barrier.valid) b_bar = barrier.b_bar;
        } catch (const NoUnsafeSamples&) {
            log_warn("initial rollout produced no unsafe samples; "
                     "running unshielded until unsafe data appears");
        }
    }
    for (auto& t : warmup) buffer.push(std::move(t));

    // Main loop.
    RunMetrics& metrics = result.metrics;
    Vec s;
    if (config.training_horizon > 0) {
        s = env_reset(env, rng);
        initial_states.push_back(s);
    }
    long episode_index = 0, epoch_index = 0;
    long episode_steps = 0;
    double episode_reward = 0.0;
    long episode_cost = 0;
    bool warned_unshielded = false;

    long executed = 0;
    for (long t = 0; t < config.training_horizon; ++t) {
        if (config.stop_flag && config.stop_flag->load()) break;
        executed = t + 1;
        Vec a = act(policy, s, /*explore=*/true, rng);

        if (is_unsafe(env.spec, s)) {
            metrics.total_violations += 1;
            metrics.violation_steps.push_back(t);
            episode_cost += 1;
            if (barrier.valid) {
                const LocalLinearModel dyn =
                    fit_local_dynamics(buffer.last(static_cast<std::size_t>(config.local_window_h)),
                                       config.local_window_h);
                a = safe_action(barrier, dyn, s, a, env.action_box, rng, config.shield_margin)
                        .action;
            } else if (!warned_unshielded) {
                warned_unshielded = true;
                log_warn("unsafe state visited before a valid barrier exists; unshielded");
            }
        } else if (config.preemptive_shield && barrier.valid) {
            const LocalLinearModel dyn =
                fit_local_dynamics(buffer.last(static_cast<std::size_t>(config.local_window_h)),
                                   config.local_window_h);
            if (eval_barrier(barrier, dyn.predict(s, a)) >
                barrier.nu * (1.0 - config.shield_margin)) {
                a = safe_action(barrier, dyn, s, a, env.action_box, rng, config.shield_margin)
                        .action;
            }
        }

        auto [s_plus, r] = env_step(env, s, a, rng);
        buffer.push(Transition{s, a, r, s_plus});
        episode_reward += r;
        episode_steps += 1;

        if (buffer.size() >= static_cast<std::size_t>(config.batch_size)) {
            update_policy(policy, buffer.sample(static_cast<std::size_t>(config.batch_size), rng));
        }

        const bool episode_over =
            episode_steps >= env.episode_length || env_terminal(env, s_plus);
        if (episode_over) {
            metrics.episodes.push_back(
                EpisodeRecord{episode_index, t, episode_reward, episode_cost, episode_steps});
            episode_index += 1;
            episode_steps = 0;
            episode_reward = 0.0;
            episode_cost = 0;

            // episode-end refresh of the norm bound and the MMD radius
            std::vector<Transition> w = buffer.sample(n_barrier, rng);
            if (barrier.valid) {
                b_bar = update_upper_bound(barrier);
                barrier.b_bar = b_bar;
            }
            epsilon = update_epsilon(w.size(), config.zeta);

            s = env_reset(env, rng);
            initial_states.push_back(s);
        } else {
            s = s_plus;
        }

        if ((t + 1) % config.epoch_length == 0) {
            std::vector<Transition> w = buffer.sample(n_barrier, rng);
            try {
                BarrierModel candidate = synthesize(w);
                EpochRecord rec;
                rec.index = epoch_index;
                rec.end_step = t;
                rec.eta = candidate.eta;
                rec.nu = candidate.nu;
                rec.c = candidate.c;
                rec.c_minmax = candidate.c_minmax;
                rec.b_bar = candidate.b_bar;
                rec.epsilon = candidate.epsilon;
                rec.delta = candidate.delta;
                rec.delta_minmax = candidate.delta_minmax;
                rec.valid = candidate.valid;
                if (candidate.valid) {
                    barrier = candidate;
                    b_bar = barrier.b_bar;
                    result.barrier_ever_valid = true;
                    rec.accepted = true;
                } else {
                    log_info("epoch " + std::to_string(epoch_index) +
                             ": synthesis invalid, keeping previous barrier");
                }
                metrics.epochs.push_back(rec);
            } catch (const NoUnsafeSamples&) {
                log_info("epoch " + std::to_string(epoch_index) +
                         ": no unsafe samples yet, keeping previous barrier");
            }
            epoch_index += 1;
        }
    }

    metrics.steps = executed;
    result.policy = std::move(policy);
    result.barrier = std::move(barrier);
    result.buffer = std::move(buffer);
    result.final_epsilon = epsilon;

    const auto t_end = std::chrono::steady_clock::now();
    result.metrics.wall_clock_sec =
        std::chrono::duration<double>(t_end - t_start).count();
    return result;
}

}  // namespace kbse

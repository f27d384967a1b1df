#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "kbse/safety.hpp"

namespace kbse {

enum class EnvKind { Pendulum, MountainCar, InvertedPendulum };

// A stochastic classical-control benchmark: box-bounded state and action
// spaces, additive Gaussian transition noise, and a safety specification.
struct EnvModel {
    std::string name;
    EnvKind kind = EnvKind::Pendulum;
    int state_dim = 0;
    int action_dim = 0;
    Box state_box;
    Box action_box;
    // Per-coordinate noise std in the latent dynamical coordinates (the
    // pendulum integrates (theta, theta_dot) behind its 3-d observation).
    Vec noise_sigma;
    int episode_length = 0;
    SafetySpec spec;
    std::uint64_t seed = 0;
};

// Supported names: pendulum, mountain_car, inverted_pendulum.
EnvModel make_env(const std::string& name, double noise_sigma, std::uint64_t seed);

// Draws an initial state.
Vec env_reset(const EnvModel& env, Rng& rng);

// One dynamics step with additive Gaussian noise and state-box clipping.
// The action is clipped to the action box first.
std::pair<Vec, double> env_step(const EnvModel& env, const Vec& s, const Vec& a, Rng& rng);

// Task-level termination (goal reached / balance lost); length limits are the
// caller's concern.
bool env_terminal(const EnvModel& env, const Vec& s);

}  // namespace kbse

#include "kbse/envs.hpp"

#include <cmath>

namespace kbse {

namespace {

constexpr double kPi = 3.14159265358979323846;

double wrap_angle(double theta) {
    // into (-pi, pi]
    theta = std::fmod(theta + kPi, 2.0 * kPi);
    if (theta < 0.0) theta += 2.0 * kPi;
    return theta - kPi;
}

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

Vec vec3(double a, double b, double c) {
    Vec v(3);
    v << a, b, c;
    return v;
}

Vec vec4(double a, double b, double c, double d) {
    Vec v(4);
    v << a, b, c, d;
    return v;
}

double gauss(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return n(rng);
}

EnvModel make_pendulum(double noise, std::uint64_t seed) {
    EnvModel e;
    e.name = "pendulum";
    e.kind = EnvKind::Pendulum;
    e.state_dim = 3;  // (cos th, sin th, th_dot)
    e.action_dim = 1;
    e.state_box = {vec3(-1.0, -1.0, -8.0), vec3(1.0, 1.0, 8.0)};
    e.action_box = {Vec::Constant(1, -2.0), Vec::Constant(1, 2.0)};
    e.noise_sigma = vec2(noise, noise);  // on (theta, theta_dot)
    e.episode_length = 200;
    e.seed = seed;

    SafetyConstraint theta;
    theta.name = "theta";
    theta.value = [](const Vec& s) { return std::atan2(s[1], s[0]); };
    theta.lower = -0.8;
    e.spec.constraints = {theta};
    e.spec.horizon_T = 200;
    e.spec.sample_unsafe_boundary = [](Rng& rng) {
        std::uniform_real_distribution<double> u(-8.0, 8.0);
        return vec3(std::cos(-0.8), std::sin(-0.8), u(rng));
    };
    return e;
}

EnvModel make_mountain_car(double noise, std::uint64_t seed) {
    EnvModel e;
    e.name = "mountain_car";
    e.kind = EnvKind::MountainCar;
    e.state_dim = 2;  // (position, velocity)
    e.action_dim = 1;
    e.state_box = {vec2(-1.2, -0.07), vec2(0.6, 0.07)};
    e.action_box = {Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)};
    e.noise_sigma = vec2(noise, 0.01 * noise);  // velocity scale is two orders smaller
    e.episode_length = 1000;
    e.seed = seed;

    e.spec.constraints = {coordinate_above("position", 0, -1.0)};
    e.spec.horizon_T = 1000;
    e.spec.sample_unsafe_boundary = [](Rng& rng) {
        std::uniform_real_distribution<double> u(-0.07, 0.07);
        return vec2(-1.0, u(rng));
    };
    return e;
}

EnvModel make_inverted_pendulum(double noise, std::uint64_t seed) {
    EnvModel e;
    e.name = "inverted_pendulum";
    e.kind = EnvKind::InvertedPendulum;
    e.state_dim = 4;  // (cart position, pole angle, cart velocity, pole angular velocity)
    e.action_dim = 1;
    e.state_box = {vec4(-1.0, -0.6, -3.0, -3.0), vec4(1.0, 0.6, 3.0, 3.0)};
    e.action_box = {Vec::Constant(1, -3.0), Vec::Constant(1, 3.0)};
    e.noise_sigma = vec4(0.1 * noise, 0.1 * noise, noise, noise);
    e.episode_length = 1000;
    e.seed = seed;

    e.spec.constraints = {coordinate_abs_below("position", 0, 0.3)};
    e.spec.horizon_T = 1000;
    e.spec.sample_unsafe_boundary = [](Rng& rng) {
        std::uniform_real_distribution<double> sign(0.0, 1.0);
        std::uniform_real_distribution<double> ang(-0.2, 0.2);
        std::uniform_real_distribution<double> vel(-1.0, 1.0);
        const double x = sign(rng) < 0.5 ? -0.3 : 0.3;
        return vec4(x, ang(rng), vel(rng), vel(rng));
    };
    return e;
}

}  // namespace

EnvModel make_env(const std::string& name, double noise_sigma, std::uint64_t seed) {
    require(noise_sigma >= 0.0, "make_env: noise_sigma must be non-negative");
    if (name == "pendulum") return make_pendulum(noise_sigma, seed);
    if (name == "mountain_car") return make_mountain_car(noise_sigma, seed);
    if (name == "inverted_pendulum") return make_inverted_pendulum(noise_sigma, seed);
    throw ArgumentError("make_env: unknown environment '" + name + "'");
}

Vec env_reset(const EnvModel& env, Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    switch (env.kind) {
        case EnvKind::Pendulum: {
            const double th = 0.6 * u(rng);
            const double thdot = 0.5 * u(rng);
            return vec3(std::cos(th), std::sin(th), thdot);
        }
        case EnvKind::MountainCar: {
            const double pos = -0.5 + 0.1 * u(rng);
            return vec2(pos, 0.0);
        }
        case EnvKind::InvertedPendulum: {
            return vec4(0.01 * u(rng), 0.01 * u(rng), 0.01 * u(rng), 0.01 * u(rng));
        }
    }
    throw ArgumentError("env_reset: unknown environment kind");
}

std::pair<Vec, double> env_step(const EnvModel& env, const Vec& s, const Vec& a, Rng& rng) {
    require(s.allFinite() && a.allFinite(), "env_step: non-finite state or action");
    require(s.size() == env.state_dim, "env_step: state dimension mismatch");
    require(a.size() == env.action_dim, "env_step: action dimension mismatch");

    const Vec act = env.action_box.clip(a);
    const bool noisy = env.noise_sigma.size() > 0 && env.noise_sigma.maxCoeff() > 0.0;

    switch (env.kind) {
        case EnvKind::Pendulum: {
            const double g = 10.0, m = 1.0, l = 1.0, dt = 0.05;
            const double th = std::atan2(s[1], s[0]);
            const double thdot = s[2];
            const double u_t = act[0];

            const double reward = -(th * th + 0.1 * thdot * thdot + 0.001 * u_t * u_t);

            double new_thdot =
                thdot + (3.0 * g / (2.0 * l) * std::sin(th) + 3.0 / (m * l * l) * u_t) * dt;
            double new_th = th + new_thdot * dt;
            if (noisy) {
                new_th += env.noise_sigma[0] * gauss(rng);
                new_thdot += env.noise_sigma[1] * gauss(rng);
            }
            new_th = wrap_angle(new_th);
            new_thdot = std::clamp(new_thdot, -8.0, 8.0);
            return {vec3(std::cos(new_th), std::sin(new_th), new_thdot), reward};
        }
        case EnvKind::MountainCar: {
            const double force = act[0];
            double vel = s[1] + force * 0.0015 - 0.0025 * std::cos(3.0 * s[0]);
            double pos = s[0] + vel;
            if (noisy) {
                pos += env.noise_sigma[0] * gauss(rng);
                vel += env.noise_sigma[1] * gauss(rng);
            }
            vel = std::clamp(vel, -0.07, 0.07);
            pos = std::clamp(pos, -1.2, 0.6);
            if (pos <= -1.2 && vel < 0.0) vel = 0.0;  // inelastic left wall

            double reward = -0.1 * force * force;
            if (pos >= 0.45) reward += 100.0;  // goal bonus; terminal state
            return {vec2(pos, vel), reward};
        }
        case EnvKind::InvertedPendulum: {
            const double g = 9.8, mc = 1.0, mp = 0.1, l = 0.5, dt = 0.02;
            const double total = mc + mp;
            const double force = act[0];
            const double x = s[0], th = s[1], xdot = s[2], thdot = s[3];

            const double costh = std::cos(th), sinth = std::sin(th);
            const double temp = (force + mp * l * thdot * thdot * sinth) / total;
            const double thacc =
                (g * sinth - costh * temp) / (l * (4.0 / 3.0 - mp * costh * costh / total));
            const double xacc = temp - mp * l * thacc * costh / total;

            double nx = x + dt * xdot;
            double nxdot = xdot + dt * xacc;
            double nth = th + dt * thdot;
            double nthdot = thdot + dt * thacc;
            if (noisy) {
                nx += env.noise_sigma[0] * gauss(rng);
                nth += env.noise_sigma[1] * gauss(rng);
                nxdot += env.noise_sigma[2] * gauss(rng);
                nthdot += env.noise_sigma[3] * gauss(rng);
            }
            Vec out = env.state_box.clip(vec4(nx, nth, nxdot, nthdot));
            return {out, 1.0};  // alive bonus
        }
    }
    throw ArgumentError("env_step: unknown environment kind");
}

bool env_terminal(const EnvModel& env, const Vec& s) {
    switch (env.kind) {
        case EnvKind::Pendulum:
            return false;
        case EnvKind::MountainCar:
            return s[0] >= 0.45;
        case EnvKind::InvertedPendulum:
            return std::abs(s[1]) > 0.2;
    }
    return false;
}

}  // namespace kbse

#pragma once

#include <string>
#include <utility>

#include "kbse/common.hpp"
#include "kbse/transition.hpp"

namespace kbse {

// Append-only transition store with uniform iid sampling and an
// insertion-order window for local dynamics fits.
struct ReplayBuffer {
    std::vector<Transition> transitions;
    std::size_t capacity = 0;  // 0 = unbounded

    void push(Transition t);
    std::size_t size() const { return transitions.size(); }
    bool empty() const { return transitions.empty(); }
    std::vector<Transition> sample(std::size_t n, Rng& rng) const;
    std::vector<Transition> last(std::size_t h) const;
};

// Lossless 64-bit round-trip, one JSON object per line.
void save_transitions_jsonl(const std::vector<Transition>& transitions, const std::string& path);
std::vector<Transition> load_transitions_jsonl(const std::string& path);

// Fully-connected network: tanh on hidden layers, linear output.
struct Mlp {
    std::vector<Mat> w;
    std::vector<Vec> b;

    static Mlp zeros(const std::vector<int>& dims);
    static Mlp random(const std::vector<int>& dims, Rng& rng);

    int layers() const { return static_cast<int>(w.size()); }
    Eigen::Index param_count() const;
    Vec flat() const;
    void set_flat(const Vec& theta);
    Mat forward(const Mat& x) const;  // columns are samples
};

struct MlpTape {
    std::vector<Mat> act;  // act[0] = input, act[l+1] = output of layer l
};

Mat mlp_forward(const Mlp& net, const Mat& x, MlpTape* tape);

struct MlpGrad {
    std::vector<Mat> w;
    std::vector<Vec> b;

    Vec flat() const;
    bool finite() const;
};

// dout is dL/d(network output); returns parameter gradients and optionally
// dL/d(input).
MlpGrad mlp_backward(const Mlp& net, const MlpTape& tape, const Mat& dout, Mat* dinput);

struct AdamState {
    std::vector<Mat> mw, vw;
    std::vector<Vec> mb, vb;
    long step = 0;
};

AdamState make_adam(const Mlp& net);
void adam_step(Mlp& net, AdamState& state, const MlpGrad& grad, double lr);

// Deterministic actor-critic pair with target copies. The actor output is
// tanh-squashed and scaled into the action box.
struct PolicyParams {
    Mlp actor, critic, actor_target, critic_target;
    AdamState actor_opt, critic_opt;
    Box action_box;
    int state_dim = 0;
    int action_dim = 0;
    std::vector<int> hidden = {64, 64};
    double exploration_sigma = 0.2;
    double learning_rate = 1e-3;
    double discount_gamma = 0.99;
    double polyak = 0.005;
    // run metadata carried in checkpoints
    std::string env_name;
    double env_noise_sigma = 0.0;
};

PolicyParams make_policy(int state_dim, const Box& action_box, const std::vector<int>& hidden,
                         Rng& rng);

// Greedy network action, plus exploration noise and box clipping when asked.
Vec act(const PolicyParams& policy, const Vec& s, bool explore, Rng& rng);

// Batch of greedy actions (columns), tanh-scaled into the box.
Mat policy_actions(const Mlp& actor, const Box& action_box, const Mat& states);

struct UpdateStats {
    double critic_loss = 0.0;
    double actor_value = 0.0;
    bool skipped = false;
};

// One off-policy step: TD-target critic regression, actor ascent on the
// critic, Polyak-averaged targets. Non-finite gradients skip the step.
UpdateStats update_policy(PolicyParams& policy, const std::vector<Transition>& batch);

// Loss/gradient routes used by update_policy, exposed for verification.
std::pair<double, MlpGrad> critic_loss_grad(const Mlp& critic, const Mat& sa,
                                            const Eigen::RowVectorXd& targets);
std::pair<double, MlpGrad> actor_objective_grad(const Mlp& actor, const Mlp& critic,
                                                const Mat& states, const Box& action_box);

void save_policy(const PolicyParams& policy, const std::string& path);
PolicyParams load_policy(const std::string& path);

}  // namespace kbse

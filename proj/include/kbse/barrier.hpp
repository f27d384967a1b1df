#pragma once

#include <functional>
#include <iosfwd>
#include <optional>

#include "kbse/cme.hpp"
#include "kbse/safety.hpp"

namespace kbse {

// Kernel-expansion barrier with its certificate constants.
// delta = min(1, (eta + c*T)/nu) bounds the T-horizon unsafe-reach
// probability with confidence 1 - zeta (for a valid model).
struct BarrierModel {
    std::vector<Vec> centers;   // raw state coordinates
    Vec alpha;
    double bandwidth = 1.0;     // state-kernel bandwidth of the expansion
    double ridge_lambda = 0.0;  // ridge used in the fit
    Vec state_scale;            // per-coordinate kernel normalization; empty = identity

    double eta = 0.0;
    double nu = 0.0;
    double c = 0.0;         // decrease slack at the policy's actions, clamped at 0
    double c_minmax = 0.0;  // diagnostic: literal min over states of max over actions
    double b_bar = 0.0;
    double epsilon = 0.0;
    double zeta = 0.0;
    int horizon_T = 1;
    double delta = 1.0;
    double delta_minmax = 1.0;  // diagnostic certificate from max(0, c_minmax)
    double min_raw_eval = 0.0;  // smallest un-clamped evaluation seen during synthesis
    bool valid = false;
};

struct BarrierFit {
    std::vector<Vec> centers;
    Vec alpha;
};

// Ridge regression of binary labels (1 = unsafe) onto the kernel expansion:
// alpha = (K'K + ridge*I)^-1 K'Y. Throws NoUnsafeSamples / NoSafeSamples when
// a class is missing.
BarrierFit fit_barrier(const std::vector<Vec>& sample, const std::vector<int>& labels,
                       const KernelSpec& kernel, double ridge_lambda);

// Same objective restricted to alpha >= 0, solved by projected gradient.
// Non-negative weights make the expansion non-negative everywhere, which the
// validity check needs when the unconstrained fit undershoots zero.
BarrierFit fit_barrier_nonneg(const std::vector<Vec>& sample, const std::vector<int>& labels,
                              const KernelSpec& kernel, double ridge_lambda);

// Un-clamped kernel expansion sum(alpha_i * k(s, center_i)).
double eval_barrier_raw(const BarrierModel& model, const Vec& s);

// max(0, raw): the certified barrier is non-negative by clamping.
double eval_barrier(const BarrierModel& model, const Vec& s);

// Un-clamped values for a batch of states; OpenMP, thread-count independent.
Vec eval_barrier_raw_many(const BarrierModel& model, const std::vector<Vec>& states);
Vec eval_barrier_raw_many_serial(const BarrierModel& model, const std::vector<Vec>& states);

// Analytic gradient of the raw expansion (includes the normalization chain
// rule).
Vec barrier_gradient(const BarrierModel& model, const Vec& s);

// Gram of the centers in the model's normalized metric: the matrix behind
// the RKHS norm of the expansion.
Mat barrier_center_gram(const BarrierModel& model);

// eta = max B over initial states, nu = min B over unsafe samples (clamped
// evaluations). unsafe_samples must be non-empty.
std::pair<double, double> compute_levels(const BarrierModel& model,
                                         const std::vector<Vec>& initial_states,
                                         const std::vector<Vec>& unsafe_samples);

struct DecreaseScan {
    double c = 0.0;          // max over states at the policy action, clamped at 0
    double c_policy = 0.0;   // same, before clamping
    double c_minmax = 0.0;   // min over states of max over grid actions
    double penalty = 0.0;    // epsilon * sqrt(k((s,a),(s,a))) * b_bar contribution
};

// Evaluates W(s,a)'B(S+) - B(s) + epsilon*sqrt(k((s,a),(s,a)))*b_bar on the
// candidate grid. The certificate constant takes the per-state value at the
// policy's action and the maximum over states; the literal min-max value is
// returned alongside for diagnostics. OpenMP over states with order-free
// min/max reductions, so results do not depend on the thread count.
DecreaseScan compute_c(const BarrierModel& model, const CmeModel& cme,
                       const std::vector<Vec>& candidate_states,
                       const std::vector<Vec>& candidate_actions,
                       const std::function<Vec(const Vec&)>& policy_action);
DecreaseScan compute_c_serial(const BarrierModel& model, const CmeModel& cme,
                              const std::vector<Vec>& candidate_states,
                              const std::vector<Vec>& candidate_actions,
                              const std::function<Vec(const Vec&)>& policy_action);

// min(1, (eta + c*T)/nu). Throws InvalidBarrier unless nu > eta >= 0 and
// c >= 0.
double certify(const BarrierModel& model);

// Everything compute_bc needs besides the transition sample itself.
struct BarrierSynthesisInputs {
    const std::vector<Transition>* sample = nullptr;
    const SafetySpec* spec = nullptr;
    KernelSpec kernel;
    double ridge_lambda = 1e-3;
    double epsilon = 0.0;
    double b_bar_hint = 0.0;
    std::vector<Vec> initial_states;
    Box state_box;
    Box action_box;
    std::function<Vec(const Vec&)> policy_action;
    double zeta = 1e-5;
    Rng* rng = nullptr;
    // Pool for the resample retry; when null the original sample is reused.
    const std::vector<Transition>* resample_pool = nullptr;
    int boundary_sample_count = 256;
    int state_candidate_count = 512;
    int action_candidate_count = 64;
    int max_attempts = 5;
};

// Full synthesis: label, fit, levels, norm bound, decrease constant,
// certificate; retries with adjusted ridge/bandwidth/data when validity
// fails. Returns the lowest-delta valid model, or the last attempt with
// valid=false.
BarrierModel compute_bc(const BarrierSynthesisInputs& inputs);

// Versioned JSON round-trip. Loading validates structure and names the
// offending field on failure.
std::string barrier_to_json(const BarrierModel& model);
BarrierModel barrier_from_json(const std::string& text);
void save_barrier(const BarrierModel& model, const std::string& path);
BarrierModel load_barrier(const std::string& path);

}  // namespace kbse

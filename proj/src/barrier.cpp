#include "kbse/barrier.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "kbse/log.hpp"

namespace kbse {

namespace {

constexpr double kRawEvalTolerance = 1e-6;

}  // namespace

BarrierFit fit_barrier(const std::vector<Vec>& sample, const std::vector<int>& labels,
                       const KernelSpec& kernel, double ridge_lambda) {
    require(!sample.empty(), "fit_barrier: empty sample");
    require(sample.size() == labels.size(), "fit_barrier: sample/label length mismatch");
    require(ridge_lambda > 0.0, "fit_barrier: ridge_lambda must be positive");
    require(kernel.bandwidth_state > 0.0, "fit_barrier: bandwidth must be resolved and positive");

    bool any_unsafe = false, any_safe = false;
    for (int y : labels) {
        require(y == 0 || y == 1, "fit_barrier: labels must be 0 (safe) or 1 (unsafe)");
        (y == 1 ? any_unsafe : any_safe) = true;
    }
    if (!any_unsafe) throw NoUnsafeSamples();
    if (!any_safe) throw NoSafeSamples();

    const Eigen::Index n = static_cast<Eigen::Index>(sample.size());
    Vec y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = static_cast<double>(labels[i]);

    const Mat k = gram_matrix(sample, kernel.bandwidth_state);
    Mat normal = k * k;
    normal.diagonal().array() += ridge_lambda;
    Eigen::LLT<Mat> llt(normal);
    if (llt.info() != Eigen::Success)
        throw NumericError("fit_barrier: normal-equation factorization failed");

    BarrierFit fit;
    fit.centers = sample;
    fit.alpha = llt.solve(k * y);
    return fit;
}

BarrierFit fit_barrier_nonneg(const std::vector<Vec>& sample, const std::vector<int>& labels,
                              const KernelSpec& kernel, double ridge_lambda) {
    BarrierFit fit = fit_barrier(sample, labels, kernel, ridge_lambda);

    const Eigen::Index n = static_cast<Eigen::Index>(sample.size());
    Vec y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = static_cast<double>(labels[i]);
    const Mat k = gram_matrix(sample, kernel.bandwidth_state);

    // Lipschitz constant of the gradient: sigma_max(K)^2 + ridge, with
    // sigma_max from a short power iteration.
    Vec v = Vec::Ones(n) / std::sqrt(static_cast<double>(n));
    double sigma = 1.0;
    for (int it = 0; it < 50; ++it) {
        v = k * v;
        sigma = v.norm();
        if (sigma <= 0.0) break;
        v /= sigma;
    }
    const double step = 1.0 / (sigma * sigma + ridge_lambda);

    // FISTA on 0.5*|K a - y|^2 + 0.5*ridge*|a|^2 over a >= 0
    Vec alpha = fit.alpha.cwiseMax(0.0);
    Vec momentum = alpha;
    double t_acc = 1.0;
    for (int it = 0; it < 1000; ++it) {
        const Vec grad = k * (k * momentum - y) + ridge_lambda * momentum;
        const Vec next = (momentum - step * grad).cwiseMax(0.0);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_acc * t_acc));
        momentum = next + ((t_acc - 1.0) / t_next) * (next - alpha);
        alpha = next;
        t_acc = t_next;
    }
    fit.alpha = alpha;
    return fit;
}

double eval_barrier_raw(const BarrierModel& model, const Vec& s) {
    require(!model.centers.empty(), "eval_barrier: model has no centers");
    require(s.size() == model.centers[0].size(), "eval_barrier: state dimension mismatch");
    const Vec z = normalize_by(s, model.state_scale);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < model.alpha.size(); ++i)
        acc += model.alpha[i] *
               rbf_eval(z, normalize_by(model.centers[static_cast<std::size_t>(i)],
                                        model.state_scale),
                        model.bandwidth);
    return acc;
}

double eval_barrier(const BarrierModel& model, const Vec& s) {
    return std::max(0.0, eval_barrier_raw(model, s));
}

Vec eval_barrier_raw_many_serial(const BarrierModel& model, const std::vector<Vec>& states) {
    Vec out(static_cast<Eigen::Index>(states.size()));
    for (std::size_t i = 0; i < states.size(); ++i)
        out[static_cast<Eigen::Index>(i)] = eval_barrier_raw(model, states[i]);
    return out;
}

Vec eval_barrier_raw_many(const BarrierModel& model, const std::vector<Vec>& states) {
    const Eigen::Index n = static_cast<Eigen::Index>(states.size());
    Vec out(n);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i)
        out[i] = eval_barrier_raw(model, states[static_cast<std::size_t>(i)]);
    return out;
}

Vec barrier_gradient(const BarrierModel& model, const Vec& s) {
    require(!model.centers.empty(), "barrier_gradient: model has no centers");
    require(s.size() == model.centers[0].size(), "barrier_gradient: state dimension mismatch");
    const double inv_s2 = 1.0 / (model.bandwidth * model.bandwidth);
    const Vec z = normalize_by(s, model.state_scale);
    Vec g = Vec::Zero(s.size());
    for (Eigen::Index i = 0; i < model.alpha.size(); ++i) {
        const Vec zc = normalize_by(model.centers[static_cast<std::size_t>(i)],
                                    model.state_scale);
        const double k = rbf_eval(z, zc, model.bandwidth);
        g += model.alpha[i] * k * inv_s2 * (zc - z);
    }
    // chain rule through the per-coordinate normalization
    return normalize_by(g, model.state_scale);
}

Mat barrier_center_gram(const BarrierModel& model) {
    require(!model.centers.empty(), "barrier_center_gram: model has no centers");
    std::vector<Vec> scaled;
    scaled.reserve(model.centers.size());
    for (const auto& c : model.centers) scaled.push_back(normalize_by(c, model.state_scale));
    return gram_matrix(scaled, model.bandwidth);
}

std::pair<double, double> compute_levels(const BarrierModel& model,
                                         const std::vector<Vec>& initial_states,
                                         const std::vector<Vec>& unsafe_samples) {
    require(!initial_states.empty(), "compute_levels: empty initial-state set");
    if (unsafe_samples.empty()) throw NoUnsafeSamples();

    double eta = 0.0;
    for (const auto& s : initial_states) eta = std::max(eta, eval_barrier(model, s));
    double nu = std::numeric_limits<double>::infinity();
    for (const auto& s : unsafe_samples) nu = std::min(nu, eval_barrier(model, s));
    return {eta, nu};
}

namespace {

DecreaseScan scan_impl(const BarrierModel& model, const CmeModel& cme,
                       const std::vector<Vec>& candidate_states,
                       const std::vector<Vec>& candidate_actions,
                       const std::function<Vec(const Vec&)>& policy_action, bool parallel) {
    require(!candidate_states.empty(), "compute_c: empty candidate-state set");
    require(policy_action != nullptr, "compute_c: policy action callback is required");

    // One factor solve turns every W(s,a)'B(S+) query into a kernel-vector
    // dot product.
    Vec b_succ(cme.size());
    for (Eigen::Index i = 0; i < cme.size(); ++i)
        b_succ[i] = eval_barrier_raw(model, cme.successors[static_cast<std::size_t>(i)]);
    const Vec solved = cme.factor.solve(b_succ);

    const double self_k = 1.0;  // RBF: k(z,z) = exp(0)
    const double penalty = model.epsilon * std::sqrt(self_k) * model.b_bar;

    const Eigen::Index n = static_cast<Eigen::Index>(candidate_states.size());
    Vec at_policy(n);
    Vec per_state_max(n);

    auto expr = [&](const Vec& s, const Vec& a, double b_raw_s) {
        const Vec k = cme_kernel_vector(cme, s, a);
        return k.dot(solved) - b_raw_s + penalty;
    };

    auto scan_state = [&](Eigen::Index i) {
        const Vec& s = candidate_states[static_cast<std::size_t>(i)];
        const double b_raw_s = eval_barrier_raw(model, s);
        const Vec a_pol = policy_action(s);
        const double v_pol = expr(s, a_pol, b_raw_s);
        double v_max = v_pol;
        for (const auto& a : candidate_actions) v_max = std::max(v_max, expr(s, a, b_raw_s));
        at_policy[i] = v_pol;
        per_state_max[i] = v_max;
    };

    if (parallel) {
#pragma omp parallel for schedule(dynamic, 4)
        for (Eigen::Index i = 0; i < n; ++i) scan_state(i);
    } else {
        for (Eigen::Index i = 0; i < n; ++i) scan_state(i);
    }

    DecreaseScan out;
    out.c_policy = at_policy.maxCoeff();
    out.c = std::max(0.0, out.c_policy);
    out.c_minmax = per_state_max.minCoeff();
    out.penalty = penalty;
    return out;
}

}  // namespace

DecreaseScan compute_c(const BarrierModel& model, const CmeModel& cme,
                       const std::vector<Vec>& candidate_states,
                       const std::vector<Vec>& candidate_actions,
                       const std::function<Vec(const Vec&)>& policy_action) {
    return scan_impl(model, cme, candidate_states, candidate_actions, policy_action, true);
}

DecreaseScan compute_c_serial(const BarrierModel& model, const CmeModel& cme,
                              const std::vector<Vec>& candidate_states,
                              const std::vector<Vec>& candidate_actions,
                              const std::function<Vec(const Vec&)>& policy_action) {
    return scan_impl(model, cme, candidate_states, candidate_actions, policy_action, false);
}

double certify(const BarrierModel& model) {
    if (!(model.nu > model.eta) || !(model.eta >= 0.0) || !(model.nu > 0.0))
        throw InvalidBarrier("certify: requires nu > eta >= 0");
    if (!(model.c >= 0.0)) throw InvalidBarrier("certify: requires c >= 0");
    return std::min(1.0, (model.eta + model.c * static_cast<double>(model.horizon_T)) / model.nu);
}

namespace {

struct AttemptSettings {
    double ridge;
    double sigma;
    bool resample;
};

BarrierModel synthesize_once(const BarrierSynthesisInputs& in,
                             const std::vector<Transition>& data, const CmeModel& cme,
                             double sigma, double ridge, const Vec& state_scale,
                             const std::vector<Vec>& boundary_states,
                             const std::vector<Vec>& box_states,
                             const std::vector<Vec>& action_grid) {
    std::vector<Vec> states;
    std::vector<int> labels;
    std::vector<Vec> unsafe_states;
    states.reserve(data.size());
    labels.reserve(data.size());
    bool any_unsafe = false, any_safe = false;
    for (const auto& t : data) {
        states.push_back(t.s);
        const bool unsafe = is_unsafe(*in.spec, t.s);
        labels.push_back(unsafe ? 1 : 0);
        (unsafe ? any_unsafe : any_safe) = true;
        if (unsafe) unsafe_states.push_back(t.s);
    }
    // class presence is judged on the exploration data alone
    if (!any_unsafe) throw NoUnsafeSamples();
    if (!any_safe) throw NoSafeSamples();

    // The unsafe set is given, not learned: its boundary samples join the fit
    // as unsafe targets so the expansion reaches the full boundary strip, not
    // just the visited part.
    for (const auto& b : boundary_states) {
        states.push_back(b);
        labels.push_back(1);
    }

    std::vector<Vec> scaled_states;
    scaled_states.reserve(states.size());
    for (const auto& s : states) scaled_states.push_back(normalize_by(s, state_scale));

    KernelSpec ks = in.kernel;
    ks.bandwidth_state = sigma;
    BarrierFit fit = fit_barrier(scaled_states, labels, ks, ridge);

    BarrierModel model;
    model.centers = std::move(states);  // raw coordinates; the scale is stored alongside
    model.alpha = std::move(fit.alpha);
    model.bandwidth = sigma;
    model.ridge_lambda = ridge;
    model.state_scale = state_scale;
    model.epsilon = in.epsilon;
    model.zeta = in.zeta;
    model.horizon_T = in.spec->horizon_T;

    std::vector<Vec> candidates = model.centers;
    candidates.insert(candidates.end(), box_states.begin(), box_states.end());

    std::vector<Vec> eval_set = candidates;
    eval_set.insert(eval_set.end(), boundary_states.begin(), boundary_states.end());
    eval_set.insert(eval_set.end(), in.initial_states.begin(), in.initial_states.end());
    for (const auto& t : data) eval_set.push_back(t.s_plus);

    model.min_raw_eval = eval_barrier_raw_many(model, eval_set).minCoeff();
    if (model.min_raw_eval < -kRawEvalTolerance) {
        // Validity iteration: the signed fit undershoots zero, so refit with
        // non-negative weights (the clamp then never disagrees with the raw
        // expansion).
        BarrierFit repaired = fit_barrier_nonneg(scaled_states, labels, ks, ridge);
        model.alpha = std::move(repaired.alpha);
        model.min_raw_eval = eval_barrier_raw_many(model, eval_set).minCoeff();
    }

    model.b_bar = rkhs_norm(model.alpha, barrier_center_gram(model));

    std::vector<Vec> unsafe_eval = unsafe_states;
    unsafe_eval.insert(unsafe_eval.end(), boundary_states.begin(), boundary_states.end());
    const auto [eta, nu] = compute_levels(model, in.initial_states, unsafe_eval);
    model.eta = eta;
    model.nu = nu;

    const DecreaseScan scan =
        compute_c(model, cme, candidates, action_grid, in.policy_action);
    model.c = scan.c;
    model.c_minmax = scan.c_minmax;

    model.valid = (model.nu > model.eta) && (model.min_raw_eval >= -kRawEvalTolerance);
    if (model.valid) {
        model.delta = certify(model);
        model.delta_minmax = std::min(
            1.0, (model.eta + std::max(0.0, model.c_minmax) * model.horizon_T) / model.nu);
    } else {
        model.delta = 1.0;
        model.delta_minmax = 1.0;
    }
    return model;
}

}  // namespace

BarrierModel compute_bc(const BarrierSynthesisInputs& in) {
    require(in.sample != nullptr && !in.sample->empty(), "compute_bc: empty sample");
    require(in.spec != nullptr, "compute_bc: missing safety spec");
    require(in.rng != nullptr, "compute_bc: missing rng");
    require(!in.initial_states.empty(), "compute_bc: missing initial states");
    require(in.policy_action != nullptr, "compute_bc: missing policy");
    require(in.epsilon >= 0.0, "compute_bc: epsilon must be non-negative");

    const Eigen::Index p = (*in.sample)[0].s.size();
    const Eigen::Index q = (*in.sample)[0].a.size();

    // Kernel metric normalization from the box geometry, when available.
    Vec state_scale;
    if (in.state_box.dim() == p)
        state_scale = in.state_box.half_width().cwiseMax(1e-9);
    Vec input_scale;
    if (state_scale.size() == p && in.action_box.dim() == q) {
        input_scale.resize(p + q);
        input_scale << state_scale, in.action_box.half_width().cwiseMax(1e-9);
    }

    std::vector<Vec> sample_states;
    sample_states.reserve(in.sample->size());
    for (const auto& t : *in.sample) sample_states.push_back(normalize_by(t.s, state_scale));

    const double base_sigma = in.kernel.bandwidth_state > 0.0
                                  ? in.kernel.bandwidth_state
                                  : (sample_states.size() >= 2 ? median_bandwidth(sample_states)
                                                               : 1.0);

    std::vector<Vec> boundary_states;
    if (in.spec->sample_unsafe_boundary) {
        boundary_states.reserve(static_cast<std::size_t>(in.boundary_sample_count));
        for (int i = 0; i < in.boundary_sample_count; ++i)
            boundary_states.push_back(in.spec->sample_unsafe_boundary(*in.rng));
    }
    std::vector<Vec> box_states;
    if (in.state_box.dim() > 0) {
        box_states.reserve(static_cast<std::size_t>(in.state_candidate_count));
        for (int i = 0; i < in.state_candidate_count; ++i)
            box_states.push_back(in.state_box.sample(*in.rng));
    }
    std::vector<Vec> action_grid;
    if (in.action_box.dim() > 0) {
        action_grid.reserve(static_cast<std::size_t>(in.action_candidate_count));
        for (int i = 0; i < in.action_candidate_count; ++i)
            action_grid.push_back(in.action_box.sample(*in.rng));
    }

    CmeModel cme = fit_cme(*in.sample, in.kernel, input_scale);

    std::optional<BarrierModel> best;
    BarrierModel last;
    std::vector<Transition> resampled;
    for (int attempt = 1; attempt <= in.max_attempts; ++attempt) {
        double ridge = in.ridge_lambda;
        double sigma = base_sigma;
        const std::vector<Transition>* data = in.sample;
        switch (attempt) {
            case 2: ridge /= 10.0; break;
            case 3: sigma *= 0.5; break;
            case 4: sigma *= 2.0; break;
            case 5:
                if (in.resample_pool != nullptr && !in.resample_pool->empty()) {
                    resampled =
                        sample_transitions(*in.resample_pool, in.sample->size(), *in.rng);
                    data = &resampled;
                    cme = fit_cme(*data, in.kernel, input_scale);
                }
                break;
            default: break;
        }

        last = synthesize_once(in, *data, cme, sigma, ridge, state_scale, boundary_states,
                               box_states, action_grid);
        log_debug("compute_bc attempt " + std::to_string(attempt) +
                  ": valid=" + std::to_string(last.valid) + " eta=" + std::to_string(last.eta) +
                  " nu=" + std::to_string(last.nu) + " c=" + std::to_string(last.c) +
                  " delta=" + std::to_string(last.delta) +
                  " min_raw=" + std::to_string(last.min_raw_eval) +
                  " b_bar=" + std::to_string(last.b_bar));
        if (last.valid && (!best || last.delta < best->delta)) best = last;
        if (last.valid && last.delta < 1.0) break;
    }
    return best.value_or(last);
}

// ---------------------------------------------------------------------------
// Serialization

std::string barrier_to_json(const BarrierModel& model) {
    nlohmann::json j;
    j["version"] = 1;
    j["kernel"] = {{"bandwidth", model.bandwidth}, {"lambda", model.ridge_lambda}};
    nlohmann::json centers = nlohmann::json::array();
    for (const auto& c : model.centers) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index i = 0; i < c.size(); ++i) row.push_back(c[i]);
        centers.push_back(std::move(row));
    }
    j["centers"] = std::move(centers);
    nlohmann::json alpha = nlohmann::json::array();
    for (Eigen::Index i = 0; i < model.alpha.size(); ++i) alpha.push_back(model.alpha[i]);
    j["alpha"] = std::move(alpha);
    if (model.state_scale.size() > 0) {
        nlohmann::json scale = nlohmann::json::array();
        for (Eigen::Index i = 0; i < model.state_scale.size(); ++i)
            scale.push_back(model.state_scale[i]);
        j["state_scale"] = std::move(scale);
    }
    j["eta"] = model.eta;
    j["nu"] = model.nu;
    j["c"] = model.c;
    j["c_minmax"] = model.c_minmax;
    j["b_bar"] = model.b_bar;
    j["epsilon"] = model.epsilon;
    j["zeta"] = model.zeta;
    j["horizon_T"] = model.horizon_T;
    j["delta"] = model.delta;
    j["delta_minmax"] = model.delta_minmax;
    j["valid"] = model.valid;
    return j.dump(2);
}

namespace {

const nlohmann::json& field(const nlohmann::json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end())
        throw std::runtime_error(std::string("barrier JSON: missing field '") + name + "'");
    return *it;
}

double number_field(const nlohmann::json& j, const char* name) {
    const auto& f = field(j, name);
    if (!f.is_number())
        throw std::runtime_error(std::string("barrier JSON: field '") + name +
                                 "' is not a number");
    return f.get<double>();
}

}  // namespace

BarrierModel barrier_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(std::string("barrier JSON: parse error: ") + e.what());
    }

    BarrierModel m;
    const int version = static_cast<int>(number_field(j, "version"));
    if (version != 1)
        throw std::runtime_error("barrier JSON: field 'version' has unsupported value");

    const auto& kernel = field(j, "kernel");
    m.bandwidth = number_field(kernel, "bandwidth");
    m.ridge_lambda = number_field(kernel, "lambda");

    const auto& centers = field(j, "centers");
    if (!centers.is_array() || centers.empty())
        throw std::runtime_error("barrier JSON: field 'centers' must be a non-empty array");
    for (const auto& row : centers) {
        if (!row.is_array() || row.empty())
            throw std::runtime_error("barrier JSON: field 'centers' rows must be arrays");
        Vec c(static_cast<Eigen::Index>(row.size()));
        for (std::size_t i = 0; i < row.size(); ++i) c[static_cast<Eigen::Index>(i)] = row[i];
        m.centers.push_back(std::move(c));
    }

    const auto& alpha = field(j, "alpha");
    if (!alpha.is_array() || alpha.size() != m.centers.size())
        throw std::runtime_error("barrier JSON: field 'alpha' length must match centers");
    m.alpha.resize(static_cast<Eigen::Index>(alpha.size()));
    for (std::size_t i = 0; i < alpha.size(); ++i)
        m.alpha[static_cast<Eigen::Index>(i)] = alpha[i];

    if (j.contains("state_scale")) {
        const auto& scale = j["state_scale"];
        if (!scale.is_array() || scale.size() != static_cast<std::size_t>(m.centers[0].size()))
            throw std::runtime_error(
                "barrier JSON: field 'state_scale' length must match the state dimension");
        m.state_scale.resize(static_cast<Eigen::Index>(scale.size()));
        for (std::size_t i = 0; i < scale.size(); ++i)
            m.state_scale[static_cast<Eigen::Index>(i)] = scale[i];
    }

    m.eta = number_field(j, "eta");
    m.nu = number_field(j, "nu");
    m.c = number_field(j, "c");
    m.c_minmax = j.contains("c_minmax") ? number_field(j, "c_minmax") : 0.0;
    m.b_bar = number_field(j, "b_bar");
    m.epsilon = number_field(j, "epsilon");
    m.zeta = number_field(j, "zeta");
    m.horizon_T = static_cast<int>(number_field(j, "horizon_T"));
    m.delta = number_field(j, "delta");
    m.delta_minmax = j.contains("delta_minmax") ? number_field(j, "delta_minmax") : 1.0;
    const auto& valid = field(j, "valid");
    if (!valid.is_boolean())
        throw std::runtime_error("barrier JSON: field 'valid' is not a boolean");
    m.valid = valid.get<bool>();
    return m;
}

void save_barrier(const BarrierModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_barrier: cannot open " + path);
    out << barrier_to_json(model) << "\n";
}

BarrierModel load_barrier(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_barrier: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return barrier_from_json(ss.str());
}

}  // namespace kbse

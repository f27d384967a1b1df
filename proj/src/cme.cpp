#include "kbse/cme.hpp"

#include <cmath>
#include <limits>

namespace kbse {

namespace {

Vec concat(const Vec& s, const Vec& a) {
    Vec z(s.size() + a.size());
    z << s, a;
    return z;
}

}  // namespace

CmeModel fit_cme(const std::vector<Transition>& sample, KernelSpec kernel,
                 const Vec& input_scale) {
    require(!sample.empty(), "fit_cme: empty sample");
    kernel.validate();

    CmeModel m;
    m.inputs.reserve(sample.size());
    m.successors.reserve(sample.size());
    for (const auto& t : sample) {
        require(t.finite(), "fit_cme: non-finite transition");
        m.inputs.push_back(concat(t.s, t.a));
        m.successors.push_back(t.s_plus);
    }
    if (input_scale.size() > 0) {
        require(input_scale.size() == m.inputs[0].size(),
                "fit_cme: input_scale dimension mismatch");
        require((input_scale.array() > 0.0).all(), "fit_cme: input_scale must be positive");
        m.input_scale = input_scale;
    }

    std::vector<Vec> scaled;
    scaled.reserve(m.inputs.size());
    for (const auto& z : m.inputs) scaled.push_back(normalize_by(z, m.input_scale));

    if (kernel.bandwidth_state_action <= 0.0) {
        kernel.bandwidth_state_action = scaled.size() >= 2 ? median_bandwidth(scaled) : 1.0;
    }
    m.kernel = kernel;

    const Mat k = gram_matrix(scaled, kernel.bandwidth_state_action);
    m.factor = factorize(k, kernel.regularization_lambda, m.size());
    return m;
}

Vec cme_kernel_vector(const CmeModel& model, const Vec& s, const Vec& a) {
    require(model.size() >= 1, "cme_kernel_vector: model is empty");
    require(s.size() + a.size() == model.inputs[0].size(),
            "cme_kernel_vector: query dimension mismatch");
    const Vec z = normalize_by(concat(s, a), model.input_scale);
    const double bw = model.kernel.bandwidth_state_action;
    Vec k(model.size());
    for (Eigen::Index i = 0; i < model.size(); ++i)
        k[i] = rbf_eval(z, normalize_by(model.inputs[static_cast<std::size_t>(i)],
                                        model.input_scale),
                        bw);
    return k;
}

Vec cme_weights(const CmeModel& model, const Vec& s, const Vec& a) {
    return model.factor.solve(cme_kernel_vector(model, s, a));
}

double expected_value(const CmeModel& model, const Vec& f_on_successors, const Vec& s,
                      const Vec& a) {
    require(f_on_successors.size() == model.size(),
            "expected_value: f_on_successors length mismatch");
    return cme_weights(model, s, a).dot(f_on_successors);
}

double epsilon_bound(std::size_t n, double c, double zeta) {
    require(n >= 1, "epsilon_bound: n must be at least 1");
    require(c > 0.0, "epsilon_bound: kernel bound C must be positive");
    require(zeta > 0.0 && zeta < 1.0, "epsilon_bound: zeta must lie in (0,1)");
    return std::sqrt(c / static_cast<double>(n)) * (1.0 + std::sqrt(2.0 * std::log(1.0 / zeta)));
}

double zeta_bound(double epsilon, std::size_t n, double c) {
    require(n >= 1, "zeta_bound: n must be at least 1");
    require(c > 0.0, "zeta_bound: kernel bound C must be positive");
    require(epsilon >= 0.0, "zeta_bound: epsilon must be non-negative");
    const double t = epsilon * std::sqrt(static_cast<double>(n) / c);
    if (t < 1.0) return 1.0;  // bound is vacuous below the threshold
    const double z = std::exp(-0.5 * (t - 1.0) * (t - 1.0));
    if (z <= 0.0) return std::numeric_limits<double>::min();
    return std::min(z, 1.0);
}

}  // namespace kbse

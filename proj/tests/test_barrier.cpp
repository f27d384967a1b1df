#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kbse/barrier.hpp"

using namespace kbse;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

KernelSpec state_kernel(double bw, double lambda = 1e-3) {
    KernelSpec k;
    k.bandwidth_state = bw;
    k.bandwidth_state_action = bw;
    k.regularization_lambda = lambda;
    return k;
}

// Two far-apart centers, one safe one unsafe.
BarrierModel two_center_model(double ridge = 1e-6) {
    std::vector<Vec> sample = {v1(0.0), v1(100.0)};
    std::vector<int> labels = {0, 1};
    const BarrierFit fit = fit_barrier(sample, labels, state_kernel(1.0), ridge);
    BarrierModel m;
    m.centers = fit.centers;
    m.alpha = fit.alpha;
    m.bandwidth = 1.0;
    return m;
}

SafetySpec upper_bound_spec(double safe_max, int horizon) {
    SafetyConstraint c;
    c.name = "x";
    c.value = [](const Vec& s) { return s[0]; };
    c.upper = safe_max;
    SafetySpec spec;
    spec.constraints = {c};
    spec.horizon_T = horizon;
    spec.sample_unsafe_boundary = [safe_max](Rng&) { return Vec::Constant(1, safe_max); };
    return spec;
}

}  // namespace

TEST_CASE("fit_barrier label degeneracies") {
    std::vector<Vec> sample = {v1(0.0), v1(1.0)};
    CHECK_THROWS_AS(fit_barrier(sample, {0, 0}, state_kernel(1.0), 1e-6), NoUnsafeSamples);
    CHECK_THROWS_AS(fit_barrier(sample, {1, 1}, state_kernel(1.0), 1e-6), NoSafeSamples);
}

TEST_CASE("fit_barrier separates two far centers") {
    const BarrierModel m = two_center_model();
    const double b_unsafe = eval_barrier(m, v1(100.0));
    const double b_safe = eval_barrier(m, v1(0.0));
    CHECK(b_unsafe >= 0.99);
    CHECK(b_unsafe <= 1.0);
    CHECK(b_safe >= 0.0);
    CHECK(b_safe <= 0.01);
}

TEST_CASE("fit_barrier heavy shrinkage drives alpha to zero") {
    std::vector<Vec> sample = {v1(0.0), v1(3.0)};
    const BarrierFit fit = fit_barrier(sample, {0, 1}, state_kernel(1.0), 1e6);
    CHECK(fit.alpha.lpNorm<Eigen::Infinity>() < 1e-3);
}

TEST_CASE("eval_barrier zero weights and isolated center") {
    BarrierModel m;
    m.centers = {v1(0.0), v1(50.0)};
    m.alpha = Vec::Zero(2);
    m.bandwidth = 1.0;
    CHECK(eval_barrier(m, v1(0.3)) == 0.0);
    CHECK(eval_barrier(m, v1(17.0)) == 0.0);

    m.alpha << 0.7, 0.4;
    CHECK(eval_barrier(m, v1(50.0)) == doctest::Approx(0.4).epsilon(1e-9));
}

TEST_CASE("eval_barrier matches the direct-sum oracle before clamping") {
    Rng rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    BarrierModel m;
    for (int i = 0; i < 10; ++i) m.centers.push_back(v1(u(rng)));
    m.alpha = Vec::NullaryExpr(10, [&](Eigen::Index) { return u(rng); });
    m.bandwidth = 0.7;
    for (int k = 0; k < 100; ++k) {
        const Vec s = v1(u(rng));
        double oracle = 0.0;
        for (int i = 0; i < 10; ++i)
            oracle += m.alpha[i] * rbf_eval(s, m.centers[static_cast<std::size_t>(i)], 0.7);
        CHECK(eval_barrier_raw(m, s) == doctest::Approx(oracle).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("eval_barrier dimension mismatch") {
    BarrierModel m = two_center_model();
    Vec s2(2);
    s2.setZero();
    CHECK_THROWS_AS(eval_barrier(m, s2), ArgumentError);
}

TEST_CASE("batch evaluation matches the serial reference bitwise") {
    Rng rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    BarrierModel m;
    for (int i = 0; i < 30; ++i) m.centers.push_back(v1(u(rng)));
    m.alpha = Vec::NullaryExpr(30, [&](Eigen::Index) { return u(rng); });
    m.bandwidth = 0.5;
    std::vector<Vec> states;
    for (int i = 0; i < 200; ++i) states.push_back(v1(u(rng)));
    const Vec a = eval_barrier_raw_many(m, states);
    const Vec b = eval_barrier_raw_many_serial(m, states);
    CHECK(a == b);
}

TEST_CASE("barrier_gradient matches central finite differences") {
    Rng rng(7);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    BarrierModel m;
    for (int i = 0; i < 6; ++i) {
        Vec c(2);
        c << u(rng), u(rng);
        m.centers.push_back(std::move(c));
    }
    m.alpha = Vec::NullaryExpr(6, [&](Eigen::Index) { return u(rng); });
    m.bandwidth = 0.8;

    const double h = 1e-6;
    for (int k = 0; k < 20; ++k) {
        Vec s(2);
        s << u(rng), u(rng);
        const Vec g = barrier_gradient(m, s);
        for (int d = 0; d < 2; ++d) {
            Vec sp = s, sm = s;
            sp[d] += h;
            sm[d] -= h;
            const double fd = (eval_barrier_raw(m, sp) - eval_barrier_raw(m, sm)) / (2.0 * h);
            CHECK(g[d] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
        }
    }
}

TEST_CASE("compute_levels on the two-center fit") {
    const BarrierModel m = two_center_model();
    const auto [eta, nu] = compute_levels(m, {v1(0.0)}, {v1(100.0)});
    CHECK(eta <= 0.01);
    CHECK(nu >= 0.99);

    // all unsafe samples identical
    const auto [eta2, nu2] = compute_levels(m, {v1(0.0)}, {v1(90.0), v1(90.0)});
    CHECK(nu2 == eval_barrier(m, v1(90.0)));

    std::vector<Vec> none;
    CHECK_THROWS_AS(compute_levels(m, {v1(0.0)}, none), NoUnsafeSamples);
}

TEST_CASE("certify formula, clamp, and ordering error") {
    BarrierModel m;
    m.centers = {v1(0.0)};
    m.alpha = Vec::Ones(1);
    m.horizon_T = 200;

    m.eta = 0.0;
    m.nu = 1.0;
    m.c = 0.0;
    CHECK(certify(m) == 0.0);

    m.eta = 0.1;
    m.c = 0.001;
    CHECK(certify(m) == doctest::Approx(0.3).epsilon(1e-12));

    m.eta = 0.9;
    m.c = 0.01;
    CHECK(certify(m) == 1.0);  // clamped, vacuous

    m.eta = 1.2;  // nu <= eta
    CHECK_THROWS_AS(certify(m), InvalidBarrier);
    m.eta = 0.1;
    m.nu = 0.0;
    CHECK_THROWS_AS(certify(m), InvalidBarrier);
}

TEST_CASE("certify monotonicity") {
    BarrierModel m;
    m.centers = {v1(0.0)};
    m.alpha = Vec::Ones(1);
    m.horizon_T = 50;
    m.eta = 0.05;
    m.nu = 1.0;
    m.c = 0.002;
    const double base = certify(m);

    BarrierModel worse_c = m;
    worse_c.c = 0.004;
    CHECK(certify(worse_c) >= base);

    BarrierModel worse_eta = m;
    worse_eta.eta = 0.2;
    CHECK(certify(worse_eta) >= base);

    BarrierModel better_nu = m;
    better_nu.nu = 2.0;
    CHECK(certify(better_nu) <= base);
}

namespace {

// Identity-dynamics training set over well-separated states; the policy
// replays each state's training action so queries sit exactly on training
// pairs.
struct IdentityWorld {
    std::vector<Transition> transitions;
    std::vector<Vec> states;
    CmeModel cme;
    std::function<Vec(const Vec&)> policy;
};

IdentityWorld make_identity_world(int n, double spacing, Rng& rng) {
    IdentityWorld w;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < n; ++i) {
        Vec s = v1(spacing * i);
        Vec a = v1(u(rng));
        w.transitions.push_back({s, a, 0.0, s});
        w.states.push_back(s);
    }
    KernelSpec k;
    k.bandwidth_state_action = 0.4;
    k.regularization_lambda = 0.0;
    w.cme = fit_cme(w.transitions, k);
    auto transitions = w.transitions;
    w.policy = [transitions, spacing](const Vec& s) {
        const auto idx = static_cast<std::size_t>(std::lround(s[0] / spacing));
        return transitions[idx].a;
    };
    return w;
}

}  // namespace

TEST_CASE("compute_c is zero under identity dynamics with epsilon 0") {
    Rng rng(11);
    IdentityWorld w = make_identity_world(10, 0.5, rng);

    BarrierModel m;
    m.centers = w.states;
    m.alpha = Vec::NullaryExpr(10, [&](Eigen::Index i) { return 0.1 * double(i); });
    m.bandwidth = 0.4;
    m.epsilon = 0.0;
    m.b_bar = rkhs_norm(m.alpha, gram_matrix(m.centers, m.bandwidth));

    const DecreaseScan scan = compute_c(m, w.cme, w.states, {}, w.policy);
    CHECK(std::abs(scan.c_policy) <= 1e-7);
    CHECK(scan.c <= 1e-7);
}

TEST_CASE("compute_c penalty term is epsilon times b_bar") {
    Rng rng(13);
    IdentityWorld w = make_identity_world(6, 0.5, rng);

    BarrierModel m;
    m.centers = w.states;
    m.alpha = Vec::Zero(6);  // B identically zero, expression reduces to the penalty
    m.bandwidth = 0.4;
    m.epsilon = 0.5;
    m.b_bar = 2.0;

    const DecreaseScan scan = compute_c(m, w.cme, w.states, {}, w.policy);
    CHECK(scan.penalty == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(scan.c == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("compute_c is zero for a function constant on the candidates") {
    Rng rng(17);
    IdentityWorld w = make_identity_world(8, 0.5, rng);

    const double beta = 0.75;
    const Mat k = gram_matrix(w.states, 0.4);
    BarrierModel m;
    m.centers = w.states;
    m.alpha = k.llt().solve(Vec::Constant(8, beta));  // B == beta at every candidate
    m.bandwidth = 0.4;
    m.epsilon = 0.0;
    m.b_bar = rkhs_norm(m.alpha, k);

    const DecreaseScan scan = compute_c(m, w.cme, w.states, {}, w.policy);
    CHECK(std::abs(scan.c_policy) <= 1e-7);
    CHECK(scan.c <= 1e-7);
}

TEST_CASE("compute_c is monotone non-decreasing in epsilon") {
    Rng rng(19);
    IdentityWorld w = make_identity_world(10, 0.5, rng);

    BarrierModel m;
    m.centers = w.states;
    m.alpha = Vec::NullaryExpr(10, [&](Eigen::Index i) { return 0.05 * double(i % 3); });
    m.bandwidth = 0.4;
    m.b_bar = rkhs_norm(m.alpha, gram_matrix(m.centers, m.bandwidth));

    double prev = -1.0;
    for (double eps : {0.0, 0.05, 0.1, 0.5, 1.0}) {
        m.epsilon = eps;
        const DecreaseScan scan = compute_c(m, w.cme, w.states, {}, w.policy);
        CHECK(scan.c >= prev);
        prev = scan.c;
    }
}

TEST_CASE("compute_c parallel scan equals the serial reference bitwise") {
    Rng rng(23);
    IdentityWorld w = make_identity_world(12, 0.5, rng);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    BarrierModel m;
    m.centers = w.states;
    m.alpha = Vec::NullaryExpr(12, [&](Eigen::Index) { return u(rng); });
    m.bandwidth = 0.4;
    m.epsilon = 0.2;
    m.b_bar = rkhs_norm(m.alpha, gram_matrix(m.centers, m.bandwidth));

    std::vector<Vec> actions;
    for (int i = 0; i < 16; ++i) actions.push_back(v1(u(rng)));

    const DecreaseScan a = compute_c(m, w.cme, w.states, actions, w.policy);
    const DecreaseScan b = compute_c_serial(m, w.cme, w.states, actions, w.policy);
    CHECK(a.c == b.c);
    CHECK(a.c_policy == b.c_policy);
    CHECK(a.c_minmax == b.c_minmax);
}

TEST_CASE("compute_c rejects empty candidates") {
    Rng rng(29);
    IdentityWorld w = make_identity_world(4, 0.5, rng);
    BarrierModel m;
    m.centers = w.states;
    m.alpha = Vec::Zero(4);
    m.bandwidth = 0.4;
    CHECK_THROWS_AS(compute_c(m, w.cme, {}, {}, w.policy), ArgumentError);
}

TEST_CASE("delta is invariant to rescaling alpha when c is recomputed") {
    Rng rng(31);
    IdentityWorld w = make_identity_world(10, 0.5, rng);

    // positive expansion so that clamping stays inactive everywhere
    BarrierModel m;
    m.centers = w.states;
    m.alpha = Vec::NullaryExpr(10, [&](Eigen::Index i) { return 0.2 + 0.1 * double(i); });
    m.bandwidth = 0.4;
    m.horizon_T = 7;
    m.epsilon = 0.05;

    auto finish = [&](BarrierModel& model) {
        model.b_bar = rkhs_norm(model.alpha, gram_matrix(model.centers, model.bandwidth));
        const auto [eta, nu] =
            compute_levels(model, {w.states[0]}, {w.states[8], w.states[9]});
        model.eta = eta;
        model.nu = nu;
        model.c = compute_c(model, w.cme, w.states, {}, w.policy).c;
        return certify(model);
    };

    const double delta1 = finish(m);
    REQUIRE(delta1 < 1.0);  // clamp must stay inactive for the covariance to be exact

    BarrierModel scaled = m;
    const double factor = 2.5;
    scaled.alpha = factor * m.alpha;
    const double delta2 = finish(scaled);

    CHECK(scaled.eta == doctest::Approx(factor * m.eta).epsilon(1e-9));
    CHECK(scaled.nu == doctest::Approx(factor * m.nu).epsilon(1e-9));
    CHECK(scaled.b_bar == doctest::Approx(factor * m.b_bar).epsilon(1e-9));
    CHECK(delta2 == doctest::Approx(delta1).epsilon(1e-9));
}

namespace {

BarrierSynthesisInputs toy_inputs(const std::vector<Transition>& sample, const SafetySpec& spec,
                                  std::vector<Vec>& initial_states, Rng& rng,
                                  std::function<Vec(const Vec&)> policy) {
    BarrierSynthesisInputs in;
    in.sample = &sample;
    in.spec = &spec;
    in.kernel.regularization_lambda = 1e-3;
    in.ridge_lambda = 1e-4;
    in.epsilon = 0.01;
    in.initial_states = initial_states;
    in.state_box = Box{v1(0.0), v1(1.2)};
    in.action_box = Box{v1(-1.0), v1(1.0)};
    in.policy_action = std::move(policy);
    in.zeta = 0.05;
    in.rng = &rng;
    in.boundary_sample_count = 32;
    in.state_candidate_count = 64;
    in.action_candidate_count = 8;
    return in;
}

}  // namespace

TEST_CASE("compute_bc produces a valid barrier on well-separated data") {
    // Two tight clusters far apart relative to the kernel bandwidth, identity
    // dynamics: the certificate constants come out clean.
    Rng rng(37);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const SafetySpec spec = upper_bound_spec(1.7, 10);

    std::vector<Transition> sample;
    for (int i = 0; i < 30; ++i) {
        Vec s = v1(0.15 + 0.02 * u(rng));  // safe cluster
        sample.push_back({s, v1(u(rng)), 0.0, s});
    }
    for (int i = 0; i < 30; ++i) {
        Vec s = v1(1.85 + 0.02 * u(rng));  // unsafe cluster
        sample.push_back({s, v1(u(rng)), 0.0, s});
    }
    std::vector<Vec> init = {v1(0.15), v1(0.17)};
    auto policy = [](const Vec&) { return Vec::Zero(1); };
    BarrierSynthesisInputs in = toy_inputs(sample, spec, init, rng, policy);
    in.state_box = Box{v1(0.0), v1(2.0)};
    in.kernel.bandwidth_state = 0.25;
    in.kernel.bandwidth_state_action = 0.25;
    in.epsilon = 1e-3;
    in.ridge_lambda = 1e-3;

    const BarrierModel m = compute_bc(in);
    CHECK(m.valid);
    CHECK(m.nu > m.eta);
    CHECK(m.delta < 1.0);
    CHECK(m.min_raw_eval >= -1e-6);
    CHECK(m.b_bar >= rkhs_norm(m.alpha, barrier_center_gram(m)) - 1e-9);
    CHECK(m.delta == doctest::Approx(std::min(
                         1.0, (m.eta + m.c * m.horizon_T) / m.nu)).epsilon(1e-12));
}

TEST_CASE("compute_bc propagates NoUnsafeSamples") {
    Rng rng(41);
    const SafetySpec spec = upper_bound_spec(0.8, 10);
    std::vector<Transition> sample;
    for (int i = 0; i < 20; ++i) {
        Vec s = v1(0.7 * (i + 0.5) / 20.0);  // all safe
        sample.push_back({s, v1(0.0), 0.0, s});
    }
    std::vector<Vec> init = {v1(0.1)};
    auto policy = [](const Vec&) { return Vec::Zero(1); };
    const BarrierSynthesisInputs in = toy_inputs(sample, spec, init, rng, policy);
    CHECK_THROWS_AS(compute_bc(in), NoUnsafeSamples);
}

TEST_CASE("compute_bc flags inseparable labels invalid after retries") {
    Rng rng(43);
    const SafetySpec spec = upper_bound_spec(0.8, 10);
    std::vector<Transition> sample;
    for (int i = 0; i < 30; ++i) {
        // states straddle the boundary within a hair: labels are effectively
        // contradictory at one location
        const double x = 0.8 + ((i % 2 == 0) ? 1e-9 : -1e-9);
        Vec s = v1(x);
        sample.push_back({s, v1(0.0), 0.0, s});
    }
    // initial state placed on an unsafe sample: eta >= nu by construction
    std::vector<Vec> init = {v1(0.8 + 1e-9)};
    auto policy = [](const Vec&) { return Vec::Zero(1); };
    const BarrierSynthesisInputs in = toy_inputs(sample, spec, init, rng, policy);

    const BarrierModel m = compute_bc(in);
    CHECK_FALSE(m.valid);
}

TEST_CASE("barrier JSON round-trip preserves evaluation") {
    Rng rng(47);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    BarrierModel m;
    for (int i = 0; i < 12; ++i) m.centers.push_back(v1(u(rng)));
    m.alpha = Vec::NullaryExpr(12, [&](Eigen::Index) { return u(rng); });
    m.bandwidth = 0.63;
    m.ridge_lambda = 1e-4;
    m.state_scale = Vec::Constant(1, 1.7);
    m.eta = 0.12;
    m.nu = 0.9;
    m.c = 0.003;
    m.c_minmax = -0.01;
    m.b_bar = 1.7;
    m.epsilon = 0.2;
    m.zeta = 1e-5;
    m.horizon_T = 200;
    m.delta = 0.8;
    m.delta_minmax = 0.2;
    m.valid = true;

    const BarrierModel back = barrier_from_json(barrier_to_json(m));
    CHECK(back.valid == m.valid);
    CHECK(back.horizon_T == m.horizon_T);
    for (int k = 0; k < 50; ++k) {
        const Vec s = v1(u(rng));
        CHECK(eval_barrier(back, s) ==
              doctest::Approx(eval_barrier(m, s)).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("barrier JSON loader names the offending field") {
    BarrierModel m = two_center_model();
    m.horizon_T = 5;
    std::string text = barrier_to_json(m);

    // remove a required field
    const auto pos = text.find("\"nu\"");
    REQUIRE(pos != std::string::npos);
    std::string broken = text;
    broken.erase(pos, broken.find(',', pos) - pos + 1);
    try {
        barrier_from_json(broken);
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("'nu'") != std::string::npos);
    }
}

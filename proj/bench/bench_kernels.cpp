// Compares the OpenMP kernels against their serial reference implementations
// and reports speedups. Also cross-checks that both produce identical output.

#include <chrono>
#include <cstdio>
#include <random>

#include "kbse/barrier.hpp"
#include "kbse/cme.hpp"
#include "kbse/kernel.hpp"

using namespace kbse;

namespace {

double seconds(const std::chrono::steady_clock::time_point& a,
               const std::chrono::steady_clock::time_point& b) {
    return std::chrono::duration<double>(b - a).count();
}

std::vector<Vec> random_points(int n, int dim, Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vec> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Vec p(dim);
        for (int d = 0; d < dim; ++d) p[d] = u(rng);
        pts.push_back(std::move(p));
    }
    return pts;
}

template <typename F>
double time_best_of(int reps, F&& f) {
    double best = 1e99;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, seconds(t0, t1));
    }
    return best;
}

}  // namespace

int main() {
    Rng rng(42);

    std::printf("%-28s %8s %12s %12s %8s\n", "kernel", "n", "serial (s)", "openmp (s)",
                "speedup");

    for (int n : {256, 512, 1024, 2048}) {
        const auto pts = random_points(n, 4, rng);
        Mat serial_out, parallel_out;
        const double ts = time_best_of(3, [&] { serial_out = gram_matrix_serial(pts, 0.7); });
        const double tp = time_best_of(3, [&] { parallel_out = gram_matrix(pts, 0.7); });
        const bool same = serial_out == parallel_out;
        std::printf("%-28s %8d %12.5f %12.5f %7.2fx%s\n", "gram_matrix", n, ts, tp, ts / tp,
                    same ? "" : "  MISMATCH");
    }

    // barrier batch evaluation and the decrease-condition grid scan
    {
        const int n_centers = 400;
        const auto centers = random_points(n_centers, 3, rng);
        BarrierModel model;
        model.centers = centers;
        model.alpha = Vec::Random(n_centers);
        model.bandwidth = 0.8;
        model.epsilon = 0.1;
        model.b_bar = 1.0;
        model.nu = 1.0;
        model.valid = true;

        const auto states = random_points(4000, 3, rng);
        Vec ev_s, ev_p;
        const double ts =
            time_best_of(3, [&] { ev_s = eval_barrier_raw_many_serial(model, states); });
        const double tp = time_best_of(3, [&] { ev_p = eval_barrier_raw_many(model, states); });
        std::printf("%-28s %8zu %12.5f %12.5f %7.2fx%s\n", "eval_barrier_raw_many",
                    states.size(), ts, tp, ts / tp, ev_s == ev_p ? "" : "  MISMATCH");

        std::vector<Transition> transitions;
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int i = 0; i < 400; ++i) {
            Transition t;
            t.s = centers[static_cast<std::size_t>(i)];
            t.a = Vec::Constant(1, u(rng));
            t.r = 0.0;
            t.s_plus = centers[static_cast<std::size_t>(i)];
            transitions.push_back(std::move(t));
        }
        KernelSpec ks;
        ks.regularization_lambda = 1e-3;
        const CmeModel cme = fit_cme(transitions, ks);

        const auto cand_states = random_points(600, 3, rng);
        const auto cand_actions = random_points(64, 1, rng);
        auto policy = [](const Vec&) { return Vec::Zero(1); };

        DecreaseScan scan_s, scan_p;
        const double tcs = time_best_of(3, [&] {
            scan_s = compute_c_serial(model, cme, cand_states, cand_actions, policy);
        });
        const double tcp = time_best_of(3, [&] {
            scan_p = compute_c(model, cme, cand_states, cand_actions, policy);
        });
        const bool same = scan_s.c == scan_p.c && scan_s.c_minmax == scan_p.c_minmax;
        std::printf("%-28s %8zu %12.5f %12.5f %7.2fx%s\n", "compute_c grid scan",
                    cand_states.size(), tcs, tcp, tcs / tcp, same ? "" : "  MISMATCH");
    }
    return 0;
}

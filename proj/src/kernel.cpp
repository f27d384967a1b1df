#include "kbse/kernel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kbse {

void KernelSpec::validate() const {
    require(bandwidth_state >= 0.0, "bandwidth_state must be positive (or 0 for median heuristic)");
    require(bandwidth_state_action >= 0.0,
            "bandwidth_state_action must be positive (or 0 for median heuristic)");
    require(regularization_lambda >= 0.0, "regularization_lambda must be non-negative");
    require(kernel_bound_c > 0.0, "kernel_bound_c must be positive");
}

double rbf_eval(const Vec& x, const Vec& y, double bandwidth) {
    require(x.size() == y.size(), "rbf_eval: dimension mismatch");
    require(bandwidth > 0.0, "rbf_eval: bandwidth must be positive");
    const double d2 = (x - y).squaredNorm();
    return std::exp(-d2 / (2.0 * bandwidth * bandwidth));
}

namespace {

Mat gram_matrix_impl(const std::vector<Vec>& points, double bandwidth, bool parallel) {
    require(!points.empty(), "gram_matrix: empty point list");
    require(bandwidth > 0.0, "gram_matrix: bandwidth must be positive");
    const Eigen::Index n = static_cast<Eigen::Index>(points.size());
    for (const auto& p : points)
        require(p.size() == points[0].size(), "gram_matrix: inconsistent point dimensions");
    Mat k(n, n);
    const double inv_2s2 = 1.0 / (2.0 * bandwidth * bandwidth);

    auto fill_row = [&](Eigen::Index i) {
        k(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d2 = (points[i] - points[j]).squaredNorm();
            const double v = std::exp(-d2 * inv_2s2);
            k(i, j) = v;
            k(j, i) = v;
        }
    };

    if (parallel) {
#pragma omp parallel for schedule(dynamic, 8)
        for (Eigen::Index i = 0; i < n; ++i) fill_row(i);
    } else {
        for (Eigen::Index i = 0; i < n; ++i) fill_row(i);
    }
    return k;
}

}  // namespace

Mat gram_matrix_serial(const std::vector<Vec>& points, double bandwidth) {
    return gram_matrix_impl(points, bandwidth, false);
}

Mat gram_matrix(const std::vector<Vec>& points, double bandwidth) {
    return gram_matrix_impl(points, bandwidth, true);
}

Vec kernel_vector(const std::vector<Vec>& points, const Vec& q, double bandwidth) {
    require(!points.empty(), "kernel_vector: empty point list");
    const Eigen::Index n = static_cast<Eigen::Index>(points.size());
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rbf_eval(q, points[i], bandwidth);
    return v;
}

Vec GramFactor::solve(const Vec& b) const {
    require(b.size() == n, "GramFactor::solve: dimension mismatch");
    return chol.solve(b);
}

Mat GramFactor::solve(const Mat& b) const {
    require(b.rows() == n, "GramFactor::solve: dimension mismatch");
    return chol.solve(b);
}

Mat GramFactor::regularized() const {
    Mat m = gram;
    m.diagonal().array() += lambda * static_cast<double>(n) + jitter_used;
    return m;
}

GramFactor factorize(const Mat& gram, double lambda, Eigen::Index n) {
    require(gram.rows() == gram.cols(), "factorize: gram must be square");
    require(lambda >= 0.0, "factorize: lambda must be non-negative");
    require(n >= 1, "factorize: n must be positive");

    GramFactor f;
    f.n = gram.rows();
    f.gram = gram;
    f.lambda = lambda;

    const double ridge = lambda * static_cast<double>(n);
    Mat reg = gram;
    reg.diagonal().array() += ridge;

    f.chol.compute(reg);
    if (f.chol.info() == Eigen::Success) {
        f.jitter_used = 0.0;
        return f;
    }

    double jitter = 1e-10;
    while (jitter <= 1e-4) {
        Mat jittered = reg;
        jittered.diagonal().array() += jitter;
        f.chol.compute(jittered);
        if (f.chol.info() == Eigen::Success) {
            f.jitter_used = jitter;
            return f;
        }
        jitter *= 2.0;
    }

    Eigen::SelfAdjointEigenSolver<Mat> es(reg, Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "factorize: Cholesky failed at jitter cap 1e-4; eigenvalue range ["
        << es.eigenvalues().minCoeff() << ", " << es.eigenvalues().maxCoeff() << "]";
    throw NumericError(msg.str());
}

double rkhs_norm(const Vec& alpha, const Mat& gram) {
    require(gram.rows() == gram.cols(), "rkhs_norm: gram must be square");
    require(alpha.size() == gram.rows(), "rkhs_norm: dimension mismatch");
    const double q = alpha.dot(gram * alpha);
    return std::sqrt(std::max(0.0, q));
}

double median_bandwidth(const std::vector<Vec>& points) {
    const std::size_t n = points.size();
    require(n >= 2, "median_bandwidth: need at least 2 points");

    const std::size_t total_pairs = n * (n - 1) / 2;
    constexpr std::size_t kMaxPairs = 1000;

    std::vector<double> dists;
    if (total_pairs <= kMaxPairs) {
        dists.reserve(total_pairs);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                dists.push_back((points[i] - points[j]).norm());
    } else {
        // Fixed seed: the heuristic must be deterministic across runs.
        Rng rng(0x9e3779b97f4a7c15ULL);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        dists.reserve(kMaxPairs);
        while (dists.size() < kMaxPairs) {
            std::size_t i = pick(rng);
            std::size_t j = pick(rng);
            if (i == j) continue;
            dists.push_back((points[i] - points[j]).norm());
        }
    }

    std::sort(dists.begin(), dists.end());
    const std::size_t m = dists.size();
    double med = (m % 2 == 1) ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
    if (med <= 0.0) return 1.0;
    return med;
}

}  // namespace kbse

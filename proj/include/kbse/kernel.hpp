#pragma once

#include <Eigen/Cholesky>

#include "kbse/common.hpp"

namespace kbse {

// RBF kernel parameters shared by the embedding and barrier fits.
// A bandwidth of 0 means "choose by the median heuristic when data is available".
struct KernelSpec {
    double bandwidth_state = 0.0;
    double bandwidth_state_action = 0.0;
    double regularization_lambda = 1e-3;
    double kernel_bound_c = 1.0;  // sup_x k(x,x); exactly 1 for the RBF kernel

    void validate() const;
};

// k(x,y) = exp(-|x-y|^2 / (2*bandwidth^2)), in (0,1] for finite inputs.
double rbf_eval(const Vec& x, const Vec& y, double bandwidth);

// Pairwise kernel matrix. Exactly symmetric as stored: each (i,j) is computed
// once and mirrored. OpenMP over rows; output is independent of thread count.
Mat gram_matrix(const std::vector<Vec>& points, double bandwidth);

// Serial reference implementation, kept for tests and the benchmark target.
Mat gram_matrix_serial(const std::vector<Vec>& points, double bandwidth);

// k(q, points[i]) for all i.
Vec kernel_vector(const std::vector<Vec>& points, const Vec& q, double bandwidth);

// Cholesky factor of (gram + lambda*n*I + jitter*I).
struct GramFactor {
    Eigen::Index n = 0;
    Mat gram;
    Eigen::LLT<Mat> chol;
    double lambda = 0.0;
    double jitter_used = 0.0;

    Vec solve(const Vec& b) const;
    Mat solve(const Mat& b) const;
    Mat chol_lower() const { return chol.matrixL(); }
    Mat regularized() const;  // the matrix that was factorized
};

// Factorizes gram + lambda*n*I. If the factorization fails, jitter starts at
// 1e-10 and doubles until success or the 1e-4 cap.
GramFactor factorize(const Mat& gram, double lambda, Eigen::Index n);

// sqrt(max(0, alpha' * gram * alpha)).
double rkhs_norm(const Vec& alpha, const Mat& gram);

// Median of pairwise Euclidean distances, over at most 1000 deterministically
// subsampled pairs. Falls back to 1.0 when all points coincide.
double median_bandwidth(const std::vector<Vec>& points);

}  // namespace kbse

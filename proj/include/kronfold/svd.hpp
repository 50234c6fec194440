#pragma once

#include "kronfold/dataset.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace kronfold {

/// Truncated-SVD reducer over vectorized samples.
struct SvdModel {
    Eigen::MatrixXd W;  // n x d, orthonormal columns (n = n1*n2)
    std::optional<Eigen::VectorXd> mean;  // present iff fitted centered
    Eigen::VectorXd singular_values;      // length d, descending
    double fit_error = 0.0;               // sum of squared residuals on the training set
    Eigen::Index n1 = 0;
    Eigen::Index n2 = 0;
};

/// Fit the top-d left singular subspace of the (optionally centered) n x N
/// matrix of vectorized samples. Uses the Gram eigendecomposition of the
/// smaller side when min(n, N) <= 512, a direct thin SVD otherwise.
SvdModel svd_fit(const MatrixDataset& dataset, Eigen::Index d, bool centered = false);

/// y_i = W^T (vec(A_i) - mean).
std::vector<Eigen::VectorXd> svd_project(const SvdModel& model, const MatrixDataset& dataset);

/// A_i = unvec(W y_i + mean).
std::vector<Eigen::MatrixXd> svd_reconstruct(const SvdModel& model,
                                             const std::vector<Eigen::VectorXd>& projected);

}  // namespace kronfold

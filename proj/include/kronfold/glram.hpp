#pragma once

#include "kronfold/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace kronfold {

/// Converged single-pair model: orthonormal (L, R) and per-sample cores.
struct GlramModel {
    Eigen::MatrixXd L;  // n1 x k1, orthonormal columns
    Eigen::MatrixXd R;  // n2 x k2, orthonormal columns
    std::vector<Eigen::MatrixXd> cores;
    std::vector<double> objective_history;  // one entry per outer iteration
    int iterations = 0;
};

enum class GlramInit { IdentityBlock, RandomOrthonormal };

struct FitConfig {
    Eigen::Index k1 = 1;
    Eigen::Index k2 = 1;
    int max_iter = 100;
    double tol = 1e-6;  // relative objective-decrease stopping threshold
    std::uint64_t seed = 0;
    GlramInit init_mode = GlramInit::IdentityBlock;
};

/// sum_i A_i^T L L^T A_i, accumulated in sample order.
Eigen::MatrixXd form_mr(const MatrixDataset& dataset, const Eigen::MatrixXd& L);

/// sum_i A_i R R^T A_i^T, accumulated in sample order.
Eigen::MatrixXd form_ml(const MatrixDataset& dataset, const Eigen::MatrixXd& R);

/// Top-t eigenvectors of a symmetric matrix, descending eigenvalue order, each
/// column gauged so its largest-magnitude entry is positive. Throws
/// std::invalid_argument when the input is asymmetric beyond tolerance.
Eigen::MatrixXd top_eigvecs(const Eigen::MatrixXd& s, Eigen::Index t);

/// Alternating eigenvector fit of min sum_i ||A_i - L D_i R^T||_F^2.
GlramModel glram_fit(const MatrixDataset& dataset, const FitConfig& config);

/// (min_form, max_form): residual energy and captured energy. The two sum to
/// the total sample energy for any orthonormal (L, R).
std::pair<double, double> glram_objective(const MatrixDataset& dataset, const GlramModel& model);

/// Cores D_i = L^T A_i R.
std::vector<Eigen::MatrixXd> glram_project(const GlramModel& model, const MatrixDataset& dataset);

/// Reconstructions L D_i R^T.
std::vector<Eigen::MatrixXd> glram_reconstruct(const GlramModel& model,
                                               const std::vector<Eigen::MatrixXd>& cores);

}  // namespace kronfold

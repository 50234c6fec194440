#pragma once

#include "kronfold/dataset.hpp"
#include "kronfold/glram.hpp"
#include "kronfold/kronecker.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace kronfold {

enum class MpglramInit { GlramWarm, Random, PairsWarm };
enum class UpdateOrder { LThenR, RThenL };

struct MpglramConfig {
    std::size_t k = 1;  // pair count
    Eigen::Index k1 = 1;
    Eigen::Index k2 = 1;
    int outer_iters = 30;
    double tol = 1e-6;  // relative decrease over a full sweep
    std::uint64_t seed = 0;
    MpglramInit init_mode = MpglramInit::GlramWarm;
    double ridge_rel = 0.0;  // relative Tikhonov floor for the PSD solves
    UpdateOrder order = UpdateOrder::LThenR;
};

/// k unconstrained pairs with shared per-sample cores. objective_history holds
/// one entry per variable-block update and is non-increasing.
struct MpglramModel {
    KronPairList pairs;
    std::vector<Eigen::MatrixXd> cores;
    std::vector<double> objective_history;
    MpglramConfig config;
    int sweeps = 0;

    std::size_t factor_parameter_count() const { return pairs.parameter_count(); }
};

/// B^T B with B = sum_j R_j (x) L_j, built structurally as
/// sum_{j,j'} (R_j^T R_j') (x) (L_j^T L_j') without forming B.
Eigen::MatrixXd gram_of_pairs(const KronPairList& pairs);

/// Least-squares cores: each vec(D_i) solves min ||vec(A_i) - B d||_2 through
/// the normal equations, pseudo-inverted when singular; ridge_rel > 0 adds a
/// relative Tikhonov term.
std::vector<Eigen::MatrixXd> update_cores(const MatrixDataset& dataset, const KronPairList& pairs,
                                          double ridge_rel = 0.0);

/// Abar_i = A_i - sum_{j != j'} L_j D_i R_j^T.
std::vector<Eigen::MatrixXd> residual_excluding(const MatrixDataset& dataset,
                                                const KronPairList& pairs,
                                                const std::vector<Eigen::MatrixXd>& cores,
                                                std::size_t j_prime);
std::vector<Eigen::MatrixXd> residual_excluding(const MatrixDataset& dataset,
                                                const MpglramModel& model, std::size_t j_prime);

/// Closed-form minimizer over R of sum_i ||Abar_i - (L D_i) R^T||_F^2,
/// i.e. R = N_R B_R^{-1} with N_R = sum Abar_i^T M_i, B_R = sum M_i^T M_i.
Eigen::MatrixXd update_r_pair(const std::vector<Eigen::MatrixXd>& abar, const Eigen::MatrixXd& L,
                              const std::vector<Eigen::MatrixXd>& cores, double ridge_rel = 0.0);

/// Closed-form minimizer over L, the transpose-symmetric counterpart.
Eigen::MatrixXd update_l_pair(const std::vector<Eigen::MatrixXd>& abar, const Eigen::MatrixXd& R,
                              const std::vector<Eigen::MatrixXd>& cores, double ridge_rel = 0.0);

/// Coordinate-descent fit. warm_pairs seeds PairsWarm (missing pairs are
/// padded with small seeded noise); warm_glram, when given, seeds GlramWarm
/// without refitting.
MpglramModel mpglram_fit(const MatrixDataset& dataset, const MpglramConfig& config,
                         const KronPairList* warm_pairs = nullptr,
                         const GlramModel* warm_glram = nullptr);

/// sum_i ||A_i - sum_j L_j D_i R_j^T||_F^2.
double mpglram_objective(const MatrixDataset& dataset, const MpglramModel& model);
double mpglram_objective(const MatrixDataset& dataset, const KronPairList& pairs,
                         const std::vector<Eigen::MatrixXd>& cores);

}  // namespace kronfold

#pragma once

#include "kronfold/dataset.hpp"
#include "kronfold/glram.hpp"
#include "kronfold/mpglram.hpp"
#include "kronfold/svd.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kronfold {

enum class Method { Svd, Glram, Mpglram };

std::string method_name(Method method);
Method method_from_name(const std::string& name);

/// One reducer configuration at grid value d: GLRAM/MPGLRAM reduce samples to
/// d x d cores, SVD projects vectorized samples to d*d dimensions, so feature
/// dimension matches across methods.
struct MethodSpec {
    Method method = Method::Svd;
    int d = 1;
    std::size_t k_pairs = 2;  // mpglram only
    bool centered = false;    // svd only
    std::uint64_t seed = 0;
    int max_iter = 100;  // glram iterations / mpglram sweeps
    double tol = 1e-6;
    MpglramInit init = MpglramInit::GlramWarm;
};

struct KnnSpec {
    int k_neighbors = 1;
};

struct EvalRecord {
    std::string method;
    int d = 0;
    std::size_t k_pairs = 0;
    int fold_count = 0;   // 0 for reconstruction records
    int fold_index = -1;  // -1 denotes the aggregate row
    std::string metric;   // "rmsre" | "accuracy"
    double value = 0.0;
    std::uint64_t seed = 0;
    double wall_time_ms = 0.0;
    int knn = 1;  // not part of the serialized schema; row order carries it
};

struct EvalReport {
    std::vector<EvalRecord> records;
    std::vector<std::string> warnings;
};

/// One fitted reducer, whichever variant the spec selected.
struct FittedReducer {
    Method method = Method::Svd;
    std::optional<SvdModel> svd;
    std::optional<GlramModel> glram;
    std::optional<MpglramModel> mpglram;
};

/// sqrt((1/N) sum_i ||A_i - Ahat_i||_F^2).
double rmsre(const MatrixDataset& dataset, const std::vector<Eigen::MatrixXd>& reconstructed);

/// Euclidean k-NN with majority vote. Vote ties break to the class with the
/// smaller summed distance, then the smaller label id; neighbor-distance ties
/// break to the lower training index.
std::vector<std::uint32_t> knn_classify(const std::vector<Eigen::VectorXd>& train_features,
                                        const std::vector<std::uint32_t>& train_labels,
                                        const std::vector<Eigen::VectorXd>& test_features,
                                        int k_neighbors);

/// Fit the reducer described by spec on a training set. Exposed so callers
/// can inspect exactly what cross_validate trains per fold.
FittedReducer fit_reducer(const MatrixDataset& train, const MethodSpec& spec);

/// Vectorized reduced features (cores for GLRAM/MPGLRAM, projections for SVD).
std::vector<Eigen::VectorXd> reduce_features(const FittedReducer& reducer,
                                             const MatrixDataset& dataset);

/// Per-fold fit/classify loop; records per-fold and mean accuracy in percent.
EvalReport cross_validate(const MatrixDataset& dataset, const MethodSpec& spec,
                          const FoldPlan& plan, const KnnSpec& classifier);

/// Full experiment grid: reconstruction error per (method, d[, k]) on the
/// whole dataset plus k-fold accuracy per fold count. MPGLRAM cells chain
/// pairs-warm initialization across the ascending k grid. Cells for distinct
/// d values run on worker threads (capped by KRONFOLD_THREADS); records merge
/// in configuration order regardless of thread count.
EvalReport sweep(const MatrixDataset& dataset, const std::vector<Method>& methods,
                 const std::vector<int>& d_grid, const std::vector<std::size_t>& k_grid,
                 const std::vector<int>& fold_counts, const std::vector<int>& knn_grid,
                 std::uint64_t seed, int max_iter = 100, double tol = 1e-6);

/// CSV with the exact header
/// method,d,k_pairs,fold_count,fold_index,metric,value,seed,wall_time_ms.
/// Accuracy values round to two decimals; wall time is written as zero unless
/// include_timing is set, keeping seeded runs byte-identical.
std::string report_to_csv(const EvalReport& report, bool include_timing = false);

/// JSON mirror with identical per-record field names.
std::string report_to_json(const EvalReport& report, bool include_timing = false);

void write_report(const EvalReport& report, const std::optional<std::string>& csv_path,
                  const std::optional<std::string>& json_path, bool include_timing = false);

/// Worker cap from KRONFOLD_THREADS (0 or unset means hardware concurrency).
unsigned worker_count();

}  // namespace kronfold

#pragma once

#include "kronfold/kronecker.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kronfold {

/// File/format problems; mapped to exit code 3 by the CLI.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Solver breakdowns; mapped to exit code 4 by the CLI.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// N samples, each an n1 x n2 real matrix, with optional class labels.
/// Immutable by convention once constructed; safe to share across threads.
struct MatrixDataset {
    Eigen::Index n1 = 0;
    Eigen::Index n2 = 0;
    std::vector<Eigen::MatrixXd> samples;
    std::optional<std::vector<std::uint32_t>> labels;
    std::optional<std::uint32_t> class_count;

    std::size_t size() const { return samples.size(); }
    /// throws std::invalid_argument on any violated structural invariant
    void validate() const;
};

/// Assignment of each sample to one of K folds.
struct FoldPlan {
    int K = 0;
    std::vector<int> assignment;  // length N, values in [0, K)
};

/// Parameters of the seeded sum-of-pairs generator.
struct SyntheticSpec {
    Eigen::Index n1 = 16;
    Eigen::Index n2 = 16;
    std::size_t N = 50;
    std::size_t kron_rank = 2;   // number of generating pairs
    Eigen::Index k1 = 4;         // core rows
    Eigen::Index k2 = 4;         // core cols
    double noise_sigma = 0.0;
    std::uint32_t class_count = 5;
    std::uint64_t seed = 0;
};

struct SyntheticData {
    MatrixDataset dataset;
    KronPairList pairs;                 // generating factors
    std::vector<Eigen::MatrixXd> cores; // generating cores D_i
};

/// Read a dataset from the MDS1 binary format. Distinct diagnostics for bad
/// magic, truncated payload, and out-of-range labels.
MatrixDataset load_mds(const std::filesystem::path& path);

/// Write the bit-exact MDS1 encoding. load_mds(save_mds(x)) == x.
void save_mds(const MatrixDataset& dataset, const std::filesystem::path& path);

/// MDS1 encoding in memory; save_mds writes exactly these bytes.
std::vector<unsigned char> encode_mds(const MatrixDataset& dataset);

/// FNV-1a hash of the MDS1 encoding, as 16 lowercase hex digits.
std::string fingerprint(const MatrixDataset& dataset);

/// Load every PGM (P2/P5, maxval <= 65535) in a directory, lexicographic by
/// filename, pixels scaled to [0,1]. The filename prefix before the first
/// underscore is parsed as an integer class tag; tags are remapped to dense
/// ids 0..C-1 in ascending tag order.
MatrixDataset load_pgm_dir(const std::filesystem::path& dir);

/// Write one matrix as a PGM image, values clamped to [0,1] and quantized to
/// maxval levels. binary selects P5 over P2.
void save_pgm(const Eigen::MatrixXd& image, const std::filesystem::path& path,
              unsigned maxval = 255, bool binary = true);

/// Subtract the elementwise mean matrix from every sample.
std::pair<MatrixDataset, Eigen::MatrixXd> center(const MatrixDataset& dataset);

/// Stratified K-fold assignment: per class, members are seeded-shuffled and
/// dealt round-robin across folds through one global cursor, so fold sizes
/// differ by at most one overall and per class.
FoldPlan kfold_split(const MatrixDataset& dataset, int K, std::uint64_t seed);

/// Seeded generator: A_i = sum_j L_j D_i R_j^T + noise, factors orthonormalized
/// per pair, per-sample cores drawn around per-class means.
SyntheticData synth_kron(const SyntheticSpec& spec);

}  // namespace kronfold

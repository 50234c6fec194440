#pragma once

#include "kronfold/glram.hpp"
#include "kronfold/kronecker.hpp"
#include "kronfold/mpglram.hpp"
#include "kronfold/svd.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace kronfold {

/// Self-describing JSON persistence for fitted models: dims, flags, factor
/// arrays (row-major), spectrum or objective history, seed, and a fingerprint
/// of the training data. Cores are not stored; they are recomputed by
/// projecting the data through the factors.
struct ModelFile {
    int schema_version = 1;
    std::string method;  // "svd" | "glram" | "mpglram" | "kron-pairs"
    Eigen::Index n1 = 0, n2 = 0, k1 = 0, k2 = 0;
    std::size_t k_pairs = 0;
    Eigen::Index d = 0;
    bool centered = false;
    std::uint64_t seed = 0;
    std::string fingerprint;

    Eigen::MatrixXd svd_w;                    // svd
    Eigen::VectorXd mean;                     // svd, size 0 when uncentered
    std::vector<double> singular_values;      // svd
    Eigen::MatrixXd L, R;                     // glram
    KronPairList pairs;                       // mpglram / kron-pairs
    std::vector<double> objective_history;    // glram / mpglram
};

ModelFile make_model_file(const SvdModel& model, std::uint64_t seed,
                          const std::string& fingerprint);
ModelFile make_model_file(const GlramModel& model, std::uint64_t seed,
                          const std::string& fingerprint);
ModelFile make_model_file(const MpglramModel& model, std::uint64_t seed,
                          const std::string& fingerprint);
/// Pair listing, e.g. from the decompose command; fingerprint and seed carry
/// over from whatever model or dataset the pairs came from.
ModelFile make_model_file(const KronPairList& pairs, std::uint64_t seed = 0,
                          const std::string& fingerprint = "");

void save_model(const ModelFile& model, const std::filesystem::path& path);

/// Throws DataError on malformed documents or array/dim mismatches.
ModelFile load_model(const std::filesystem::path& path);

SvdModel to_svd_model(const ModelFile& file);
GlramModel to_glram_model(const ModelFile& file);
MpglramModel to_mpglram_model(const ModelFile& file);

}  // namespace kronfold

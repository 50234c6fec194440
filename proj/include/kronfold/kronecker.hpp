#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace kronfold {

/// One (L_j, R_j) term of a sum-of-Kronecker-products projector.
struct KronPair {
    Eigen::MatrixXd L;  // n1 x k1
    Eigen::MatrixXd R;  // n2 x k2
};

/// Ordered list of pairs sharing the shapes (n1 x k1, n2 x k2).
/// Represents W = sum_j L_j (x) R_j without materializing it.
struct KronPairList {
    std::vector<KronPair> pairs;
    Eigen::Index n1 = 0;
    Eigen::Index n2 = 0;
    Eigen::Index k1 = 0;
    Eigen::Index k2 = 0;

    std::size_t size() const { return pairs.size(); }
    /// throws std::invalid_argument when a pair deviates from the shared shape
    void validate() const;
    /// total factor entries, k * (n1*k1 + n2*k2)
    std::size_t parameter_count() const;
};

/// Rearrangement of a (p*r) x (q*s) matrix into the (p*q) x (r*s) form whose
/// rank equals the Kronecker rank of the source.
struct RearrangedMatrix {
    Eigen::MatrixXd matrix;  // (p*q) x (r*s)
    Eigen::Index p = 0, q = 0, r = 0, s = 0;
};

/// Column-stacking of a matrix into a vector.
Eigen::VectorXd vec(const Eigen::MatrixXd& m);

/// Inverse of vec. Throws std::invalid_argument when sizes do not factor.
Eigen::MatrixXd unvec(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols);

/// Dense Kronecker product; block (i, j) equals a(i, j) * b.
Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Partition w into a p x q grid of r x s blocks and stack vec(block)^T rows,
/// block-column major. Frobenius-norm preserving; rank of the result is the
/// Kronecker rank of w.
RearrangedMatrix rearrange(const Eigen::MatrixXd& w, Eigen::Index p, Eigen::Index q,
                           Eigen::Index r, Eigen::Index s);

/// Decompose w (shape (p*r) x (q*s)) into pairs (L_j: p x q, R_j: r x s) with
/// w == sum_j L_j (x) R_j, via the SVD of the rearranged matrix. The number of
/// pairs is the numerical rank of the rearrangement, capped at max_pairs when
/// given. Truncation to the leading t pairs is the best Kronecker-rank-t
/// approximation in Frobenius norm.
KronPairList kron_rank_decompose(const Eigen::MatrixXd& w, Eigen::Index p, Eigen::Index q,
                                 Eigen::Index r, Eigen::Index s,
                                 std::optional<std::size_t> max_pairs = std::nullopt);

/// Singular values of the rearrangement of w, descending, all of them.
Eigen::VectorXd kron_spectrum(const Eigen::MatrixXd& w, Eigen::Index p, Eigen::Index q,
                              Eigen::Index r, Eigen::Index s);

/// sum_j L_j * d * R_j^T without forming any Kronecker product.
Eigen::MatrixXd apply_pairs(const KronPairList& pairs, const Eigen::MatrixXd& d);

/// Dense reassembly sum_j L_j (x) R_j. Intended for small projectors.
Eigen::MatrixXd assemble_pairs(const KronPairList& pairs);

}  // namespace kronfold

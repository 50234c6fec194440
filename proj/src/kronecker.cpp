#include "kronfold/kronecker.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace kronfold {

void KronPairList::validate() const {
    if (pairs.empty()) throw std::invalid_argument("KronPairList: at least one pair required");
    for (const auto& p : pairs) {
        if (p.L.rows() != n1 || p.L.cols() != k1 || p.R.rows() != n2 || p.R.cols() != k2)
            throw std::invalid_argument("KronPairList: pair shape deviates from (n1 x k1, n2 x k2)");
    }
}

std::size_t KronPairList::parameter_count() const {
    return pairs.size() * static_cast<std::size_t>(n1 * k1 + n2 * k2);
}

Eigen::VectorXd vec(const Eigen::MatrixXd& m) {
    return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

Eigen::MatrixXd unvec(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
    if (rows * cols != v.size()) throw std::invalid_argument("unvec: size does not factor as rows*cols");
    return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

RearrangedMatrix rearrange(const Eigen::MatrixXd& w, Eigen::Index p, Eigen::Index q,
                           Eigen::Index r, Eigen::Index s) {
    if (p < 1 || q < 1 || r < 1 || s < 1 || w.rows() != p * r || w.cols() != q * s)
        throw std::invalid_argument("rearrange: dimensions do not factor as (p*r) x (q*s)");
    RearrangedMatrix out;
    out.p = p;
    out.q = q;
    out.r = r;
    out.s = s;
    out.matrix.resize(p * q, r * s);
    // row for block (i, j) is vec(W_ij)^T, rows ordered block-column major so
    // that the row index follows vec() over the p x q block grid
    for (Eigen::Index j = 0; j < q; ++j)
        for (Eigen::Index i = 0; i < p; ++i)
            out.matrix.row(j * p + i) = vec(w.block(i * r, j * s, r, s)).transpose();
    return out;
}

KronPairList kron_rank_decompose(const Eigen::MatrixXd& w, Eigen::Index p, Eigen::Index q,
                                 Eigen::Index r, Eigen::Index s,
                                 std::optional<std::size_t> max_pairs) {
    const RearrangedMatrix rearranged = rearrange(w, p, q, r, s);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(rearranged.matrix,
                                          Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sigma = svd.singularValues();

    const double sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;
    const double cutoff = static_cast<double>(std::max(p * q, r * s)) *
                          std::numeric_limits<double>::epsilon() * sigma_max;
    Eigen::Index rank = 0;
    while (rank < sigma.size() && sigma(rank) > cutoff) ++rank;
    if (max_pairs) rank = std::min<Eigen::Index>(rank, static_cast<Eigen::Index>(*max_pairs));

    KronPairList out;
    out.n1 = p;
    out.k1 = q;
    out.n2 = r;
    out.k2 = s;
    out.pairs.reserve(static_cast<std::size_t>(rank));
    for (Eigen::Index j = 0; j < rank; ++j) {
        const double scale = std::sqrt(sigma(j));
        out.pairs.push_back({unvec(scale * svd.matrixU().col(j), p, q),
                             unvec(scale * svd.matrixV().col(j), r, s)});
    }
    if (out.pairs.empty())  // w == 0: represent it with one zero pair
        out.pairs.push_back({Eigen::MatrixXd::Zero(p, q), Eigen::MatrixXd::Zero(r, s)});
    return out;
}

Eigen::VectorXd kron_spectrum(const Eigen::MatrixXd& w, Eigen::Index p, Eigen::Index q,
                              Eigen::Index r, Eigen::Index s) {
    const RearrangedMatrix rearranged = rearrange(w, p, q, r, s);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(rearranged.matrix);
    return svd.singularValues();
}

Eigen::MatrixXd apply_pairs(const KronPairList& pairs, const Eigen::MatrixXd& d) {
    if (d.rows() != pairs.k1 || d.cols() != pairs.k2)
        throw std::invalid_argument("apply_pairs: core shape does not match pair dims");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(pairs.n1, pairs.n2);
    for (const auto& pair : pairs.pairs) out.noalias() += pair.L * d * pair.R.transpose();
    return out;
}

Eigen::MatrixXd assemble_pairs(const KronPairList& pairs) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(pairs.n1 * pairs.n2, pairs.k1 * pairs.k2);
    for (const auto& pair : pairs.pairs) out += kron(pair.L, pair.R);
    return out;
}

}  // namespace kronfold

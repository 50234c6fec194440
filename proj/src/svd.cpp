#include "kronfold/svd.hpp"

#include "kronfold/kronecker.hpp"

#include <cmath>
#include <stdexcept>

namespace kronfold {

namespace {

constexpr Eigen::Index kGramThreshold = 512;

void fix_column_signs(Eigen::MatrixXd& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        Eigen::Index best = 0;
        for (Eigen::Index r = 1; r < m.rows(); ++r)
            if (std::abs(m(r, c)) > std::abs(m(best, c))) best = r;
        if (m(best, c) < 0.0) m.col(c) = -m.col(c);
    }
}

}  // namespace

SvdModel svd_fit(const MatrixDataset& dataset, Eigen::Index d, bool centered) {
    dataset.validate();
    const Eigen::Index n = dataset.n1 * dataset.n2;
    const Eigen::Index count = static_cast<Eigen::Index>(dataset.size());
    if (d < 1 || d > std::min(n, count))
        throw std::invalid_argument("svd_fit: d out of range [1, min(n, N)]");

    Eigen::MatrixXd x(n, count);
    for (Eigen::Index i = 0; i < count; ++i)
        x.col(i) = vec(dataset.samples[static_cast<std::size_t>(i)]);

    SvdModel model;
    model.n1 = dataset.n1;
    model.n2 = dataset.n2;
    if (centered) {
        const Eigen::VectorXd mu = x.rowwise().mean();
        x.colwise() -= mu;
        model.mean = mu;
    }

    Eigen::VectorXd sigma;
    if (std::min(n, count) > kGramThreshold) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU);
        model.W = svd.matrixU().leftCols(d);
        sigma = svd.singularValues().head(d);
    } else if (n <= count) {
        // eigenvectors of X X^T are the left singular vectors directly
        const Eigen::MatrixXd gram = x * x.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        if (eig.info() != Eigen::Success) throw NumericalError("svd_fit: eigensolver failed");
        model.W.resize(n, d);
        sigma.resize(d);
        for (Eigen::Index c = 0; c < d; ++c) {
            model.W.col(c) = eig.eigenvectors().col(n - 1 - c);
            sigma(c) = std::sqrt(std::max(0.0, eig.eigenvalues()(n - 1 - c)));
        }
    } else {
        // N < n: right singular vectors from X^T X, mapped through X
        const Eigen::MatrixXd gram = x.transpose() * x;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        if (eig.info() != Eigen::Success) throw NumericalError("svd_fit: eigensolver failed");
        Eigen::MatrixXd raw(n, d);
        sigma.resize(d);
        const double sigma_max = std::sqrt(std::max(0.0, eig.eigenvalues()(count - 1)));
        for (Eigen::Index c = 0; c < d; ++c) {
            sigma(c) = std::sqrt(std::max(0.0, eig.eigenvalues()(count - 1 - c)));
            if (sigma(c) > 1e-13 * sigma_max)
                raw.col(c) = x * eig.eigenvectors().col(count - 1 - c) / sigma(c);
            else
                raw.col(c).setZero();  // null direction, completed by the QR below
        }
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
        model.W = qr.householderQ() * Eigen::MatrixXd::Identity(n, d);
    }
    fix_column_signs(model.W);
    model.singular_values = sigma;
    // residual of the training data under the fitted projector; equals the
    // tail singular-value energy up to rounding
    const Eigen::MatrixXd projected = model.W.transpose() * x;
    model.fit_error = (x - model.W * projected).squaredNorm();
    return model;
}

std::vector<Eigen::VectorXd> svd_project(const SvdModel& model, const MatrixDataset& dataset) {
    if (dataset.n1 != model.n1 || dataset.n2 != model.n2)
        throw std::invalid_argument("svd_project: dataset shape does not match model");
    std::vector<Eigen::VectorXd> out;
    out.reserve(dataset.size());
    for (const auto& a : dataset.samples) {
        Eigen::VectorXd v = vec(a);
        if (model.mean) v -= *model.mean;
        out.push_back(model.W.transpose() * v);
    }
    return out;
}

std::vector<Eigen::MatrixXd> svd_reconstruct(const SvdModel& model,
                                             const std::vector<Eigen::VectorXd>& projected) {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(projected.size());
    for (const auto& y : projected) {
        if (y.size() != model.W.cols())
            throw std::invalid_argument("svd_reconstruct: projection length does not match model");
        Eigen::VectorXd v = model.W * y;
        if (model.mean) v += *model.mean;
        out.push_back(unvec(v, model.n1, model.n2));
    }
    return out;
}

}  // namespace kronfold

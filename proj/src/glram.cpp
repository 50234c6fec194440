#include "kronfold/glram.hpp"

#include "kronfold/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace kronfold {

namespace {

void check_shapes(const MatrixDataset& dataset, Eigen::Index rows, Eigen::Index expected,
                  const char* what) {
    if (rows != expected) throw std::invalid_argument(std::string(what) + ": shape mismatch");
    if (dataset.samples.empty()) throw std::invalid_argument(std::string(what) + ": empty dataset");
}

// deterministic sign gauge: make each column's largest-magnitude entry positive
void fix_column_signs(Eigen::MatrixXd& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        Eigen::Index best = 0;
        for (Eigen::Index r = 1; r < m.rows(); ++r)
            if (std::abs(m(r, c)) > std::abs(m(best, c))) best = r;
        if (m(best, c) < 0.0) m.col(c) = -m.col(c);
    }
}

double residual_energy(const MatrixDataset& dataset, const Eigen::MatrixXd& L,
                       const Eigen::MatrixXd& R) {
    double total = 0.0;
    for (const auto& a : dataset.samples) {
        const Eigen::MatrixXd core = L.transpose() * a * R;
        total += (a - L * core * R.transpose()).squaredNorm();
    }
    return total;
}

}  // namespace

Eigen::MatrixXd form_mr(const MatrixDataset& dataset, const Eigen::MatrixXd& L) {
    check_shapes(dataset, L.rows(), dataset.n1, "form_mr");
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dataset.n2, dataset.n2);
    for (const auto& a : dataset.samples) {
        const Eigen::MatrixXd t = L.transpose() * a;  // k1 x n2
        m.noalias() += t.transpose() * t;
    }
    return m;
}

Eigen::MatrixXd form_ml(const MatrixDataset& dataset, const Eigen::MatrixXd& R) {
    check_shapes(dataset, R.rows(), dataset.n2, "form_ml");
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dataset.n1, dataset.n1);
    for (const auto& a : dataset.samples) {
        const Eigen::MatrixXd t = a * R;  // n1 x k2
        m.noalias() += t * t.transpose();
    }
    return m;
}

Eigen::MatrixXd top_eigvecs(const Eigen::MatrixXd& s, Eigen::Index t) {
    if (s.rows() != s.cols()) throw std::invalid_argument("top_eigvecs: matrix not square");
    if (t < 1 || t > s.rows()) throw std::invalid_argument("top_eigvecs: t out of range");
    const double asym = (s - s.transpose()).norm();
    if (asym > 1e-10 * std::max(1.0, s.norm()))
        throw std::invalid_argument("top_eigvecs: matrix asymmetric beyond tolerance");

    const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success) throw NumericalError("top_eigvecs: eigensolver failed");

    // Eigen orders ascending; take the trailing t columns reversed
    Eigen::MatrixXd w(s.rows(), t);
    for (Eigen::Index c = 0; c < t; ++c) w.col(c) = eig.eigenvectors().col(s.rows() - 1 - c);
    fix_column_signs(w);
    return w;
}

GlramModel glram_fit(const MatrixDataset& dataset, const FitConfig& config) {
    dataset.validate();
    if (config.k1 < 1 || config.k1 > dataset.n1 || config.k2 < 1 || config.k2 > dataset.n2)
        throw std::invalid_argument("glram_fit: (k1, k2) out of range");
    if (config.tol <= 0.0) throw std::invalid_argument("glram_fit: tol must be positive");

    GlramModel model;
    if (config.init_mode == GlramInit::IdentityBlock) {
        model.L = Eigen::MatrixXd::Identity(dataset.n1, config.k1);
    } else {
        Rng rng(Rng::derive(config.seed, 0x676c72616dull));  // "glram"
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(rng.gaussian_matrix(dataset.n1, config.k1));
        model.L = qr.householderQ() * Eigen::MatrixXd::Identity(dataset.n1, config.k1);
    }

    const double tiny = std::numeric_limits<double>::min();
    for (int iter = 0; iter < config.max_iter; ++iter) {
        model.R = top_eigvecs(form_mr(dataset, model.L), config.k2);
        model.L = top_eigvecs(form_ml(dataset, model.R), config.k1);
        model.objective_history.push_back(residual_energy(dataset, model.L, model.R));
        const std::size_t t = model.objective_history.size();
        if (t >= 2) {
            const double prev = model.objective_history[t - 2];
            const double cur = model.objective_history[t - 1];
            if ((prev - cur) / std::max(model.objective_history.front(), tiny) < config.tol) break;
        }
    }
    model.iterations = static_cast<int>(model.objective_history.size());
    model.cores = glram_project(model, dataset);
    return model;
}

std::pair<double, double> glram_objective(const MatrixDataset& dataset, const GlramModel& model) {
    check_shapes(dataset, model.L.rows(), dataset.n1, "glram_objective");
    if (model.R.rows() != dataset.n2) throw std::invalid_argument("glram_objective: shape mismatch");
    double min_form = 0.0;
    double max_form = 0.0;
    for (const auto& a : dataset.samples) {
        const Eigen::MatrixXd core = model.L.transpose() * a * model.R;
        min_form += (a - model.L * core * model.R.transpose()).squaredNorm();
        max_form += core.squaredNorm();
    }
    return {min_form, max_form};
}

std::vector<Eigen::MatrixXd> glram_project(const GlramModel& model, const MatrixDataset& dataset) {
    check_shapes(dataset, model.L.rows(), dataset.n1, "glram_project");
    if (model.R.rows() != dataset.n2) throw std::invalid_argument("glram_project: shape mismatch");
    std::vector<Eigen::MatrixXd> cores;
    cores.reserve(dataset.size());
    for (const auto& a : dataset.samples) cores.push_back(model.L.transpose() * a * model.R);
    return cores;
}

std::vector<Eigen::MatrixXd> glram_reconstruct(const GlramModel& model,
                                               const std::vector<Eigen::MatrixXd>& cores) {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(cores.size());
    for (const auto& d : cores) {
        if (d.rows() != model.L.cols() || d.cols() != model.R.cols())
            throw std::invalid_argument("glram_reconstruct: core shape mismatch");
        out.push_back(model.L * d * model.R.transpose());
    }
    return out;
}

}  // namespace kronfold

#include "kronfold/mpglram.hpp"

#include "kronfold/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace kronfold {

namespace {

// symmetric-PSD solve of S X = B via eigendecomposition pseudo-inverse with
// relative cutoff; ridge adds lambda*I before inverting
Eigen::MatrixXd psd_solve(const Eigen::MatrixXd& s, const Eigen::MatrixXd& rhs, double lambda) {
    Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
    if (lambda > 0.0) sym.diagonal().array() += lambda;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success) throw NumericalError("psd_solve: eigensolver failed");
    const Eigen::VectorXd& values = eig.eigenvalues();
    const double cutoff = 1e-12 * std::max(0.0, values.cwiseAbs().maxCoeff());
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i)
        if (values(i) > cutoff) inv(i) = 1.0 / values(i);
    return eig.eigenvectors() * inv.asDiagonal() * (eig.eigenvectors().transpose() * rhs);
}

void check_cores(const std::vector<Eigen::MatrixXd>& abar,
                 const std::vector<Eigen::MatrixXd>& cores, const char* what) {
    if (abar.size() != cores.size() || abar.empty())
        throw std::invalid_argument(std::string(what) + ": residual/core counts differ");
}

KronPairList init_pairs(const MatrixDataset& dataset, const MpglramConfig& config,
                        const KronPairList* warm_pairs, const GlramModel* warm_glram) {
    KronPairList pairs;
    pairs.n1 = dataset.n1;
    pairs.n2 = dataset.n2;
    pairs.k1 = config.k1;
    pairs.k2 = config.k2;

    std::size_t have = 0;
    double pad_scale = 1e-3;
    switch (config.init_mode) {
        case MpglramInit::GlramWarm: {
            GlramModel fitted;
            const GlramModel* base = warm_glram;
            if (base == nullptr) {
                FitConfig inner;
                inner.k1 = config.k1;
                inner.k2 = config.k2;
                inner.tol = config.tol;
                inner.seed = config.seed;
                fitted = glram_fit(dataset, inner);
                base = &fitted;
            }
            if (base->L.rows() != dataset.n1 || base->L.cols() != config.k1 ||
                base->R.rows() != dataset.n2 || base->R.cols() != config.k2)
                throw std::invalid_argument("mpglram_fit: warm GLRAM model shape mismatch");
            pairs.pairs.push_back({base->L, base->R});
            have = 1;
            break;
        }
        case MpglramInit::Random:
            pad_scale = 1.0;
            break;
        case MpglramInit::PairsWarm: {
            if (warm_pairs == nullptr)
                throw std::invalid_argument("mpglram_fit: pairs-warm init requires warm pairs");
            if (!warm_pairs->pairs.empty() &&
                (warm_pairs->n1 != dataset.n1 || warm_pairs->n2 != dataset.n2 ||
                 warm_pairs->k1 != config.k1 || warm_pairs->k2 != config.k2))
                throw std::invalid_argument("mpglram_fit: warm pairs shape mismatch");
            // a padded pair must be nonzero: an exactly-zero pair is a fixed
            // point of both closed-form updates and would never move
            pad_scale = 1e-6;
            for (const auto& p : warm_pairs->pairs) {
                if (have == config.k) break;
                pairs.pairs.push_back(p);
                ++have;
            }
            break;
        }
    }

    Rng rng(Rng::derive(config.seed, 0x6d70676cull));  // "mpgl"
    for (std::size_t j = have; j < config.k; ++j)
        pairs.pairs.push_back({pad_scale * rng.gaussian_matrix(dataset.n1, config.k1),
                               pad_scale * rng.gaussian_matrix(dataset.n2, config.k2)});
    return pairs;
}

// objective restricted to pair j', i.e. the full objective evaluated through
// the residuals that exclude it
double restricted_objective(const std::vector<Eigen::MatrixXd>& abar, const KronPair& pair,
                           const std::vector<Eigen::MatrixXd>& cores) {
    double total = 0.0;
    for (std::size_t i = 0; i < abar.size(); ++i)
        total += (abar[i] - pair.L * cores[i] * pair.R.transpose()).squaredNorm();
    return total;
}

}  // namespace

Eigen::MatrixXd gram_of_pairs(const KronPairList& pairs) {
    const Eigen::Index d = pairs.k1 * pairs.k2;
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
    for (const auto& pj : pairs.pairs)
        for (const auto& pj2 : pairs.pairs)
            gram += kron(pj.R.transpose() * pj2.R, pj.L.transpose() * pj2.L);
    return gram;
}

std::vector<Eigen::MatrixXd> update_cores(const MatrixDataset& dataset, const KronPairList& pairs,
                                          double ridge_rel) {
    if (pairs.n1 != dataset.n1 || pairs.n2 != dataset.n2)
        throw std::invalid_argument("update_cores: pair dims do not match dataset");
    const Eigen::Index d = pairs.k1 * pairs.k2;
    const Eigen::MatrixXd gram = gram_of_pairs(pairs);
    const double lambda = ridge_rel > 0.0 ? ridge_rel * gram.trace() / static_cast<double>(d) : 0.0;

    Eigen::MatrixXd rhs(d, static_cast<Eigen::Index>(dataset.size()));
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(pairs.k1, pairs.k2);
        for (const auto& p : pairs.pairs)
            acc.noalias() += p.L.transpose() * dataset.samples[i] * p.R;
        rhs.col(static_cast<Eigen::Index>(i)) = vec(acc);
    }
    const Eigen::MatrixXd solved = psd_solve(gram, rhs, lambda);

    std::vector<Eigen::MatrixXd> cores;
    cores.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i)
        cores.push_back(unvec(solved.col(static_cast<Eigen::Index>(i)), pairs.k1, pairs.k2));
    return cores;
}

std::vector<Eigen::MatrixXd> residual_excluding(const MatrixDataset& dataset,
                                                const KronPairList& pairs,
                                                const std::vector<Eigen::MatrixXd>& cores,
                                                std::size_t j_prime) {
    if (j_prime >= pairs.size()) throw std::out_of_range("residual_excluding: pair index");
    if (cores.size() != dataset.size())
        throw std::invalid_argument("residual_excluding: core count differs from sample count");
    std::vector<Eigen::MatrixXd> abar;
    abar.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        Eigen::MatrixXd r = dataset.samples[i];
        for (std::size_t j = 0; j < pairs.size(); ++j) {
            if (j == j_prime) continue;
            r.noalias() -= pairs.pairs[j].L * cores[i] * pairs.pairs[j].R.transpose();
        }
        abar.push_back(std::move(r));
    }
    return abar;
}

std::vector<Eigen::MatrixXd> residual_excluding(const MatrixDataset& dataset,
                                                const MpglramModel& model, std::size_t j_prime) {
    return residual_excluding(dataset, model.pairs, model.cores, j_prime);
}

Eigen::MatrixXd update_r_pair(const std::vector<Eigen::MatrixXd>& abar, const Eigen::MatrixXd& L,
                              const std::vector<Eigen::MatrixXd>& cores, double ridge_rel) {
    check_cores(abar, cores, "update_r_pair");
    const Eigen::Index n2 = abar.front().cols();
    const Eigen::Index k2 = cores.front().cols();
    Eigen::MatrixXd n_r = Eigen::MatrixXd::Zero(n2, k2);
    Eigen::MatrixXd b_r = Eigen::MatrixXd::Zero(k2, k2);
    for (std::size_t i = 0; i < abar.size(); ++i) {
        const Eigen::MatrixXd m = L * cores[i];  // n1 x k2
        n_r.noalias() += abar[i].transpose() * m;
        b_r.noalias() += m.transpose() * m;
    }
    const double lambda =
        ridge_rel > 0.0 ? ridge_rel * b_r.trace() / static_cast<double>(k2) : 0.0;
    return psd_solve(b_r, n_r.transpose(), lambda).transpose();
}

Eigen::MatrixXd update_l_pair(const std::vector<Eigen::MatrixXd>& abar, const Eigen::MatrixXd& R,
                              const std::vector<Eigen::MatrixXd>& cores, double ridge_rel) {
    check_cores(abar, cores, "update_l_pair");
    const Eigen::Index n1 = abar.front().rows();
    const Eigen::Index k1 = cores.front().rows();
    Eigen::MatrixXd n_l = Eigen::MatrixXd::Zero(n1, k1);
    Eigen::MatrixXd b_l = Eigen::MatrixXd::Zero(k1, k1);
    for (std::size_t i = 0; i < abar.size(); ++i) {
        const Eigen::MatrixXd m = R * cores[i].transpose();  // n2 x k1
        n_l.noalias() += abar[i] * m;
        b_l.noalias() += m.transpose() * m;
    }
    const double lambda =
        ridge_rel > 0.0 ? ridge_rel * b_l.trace() / static_cast<double>(k1) : 0.0;
    return psd_solve(b_l, n_l.transpose(), lambda).transpose();
}

MpglramModel mpglram_fit(const MatrixDataset& dataset, const MpglramConfig& config,
                         const KronPairList* warm_pairs, const GlramModel* warm_glram) {
    dataset.validate();
    if (config.k < 1) throw std::invalid_argument("mpglram_fit: k must be at least 1");
    if (config.k1 < 1 || config.k1 > dataset.n1 || config.k2 < 1 || config.k2 > dataset.n2)
        throw std::invalid_argument("mpglram_fit: (k1, k2) out of range");
    if (config.tol <= 0.0) throw std::invalid_argument("mpglram_fit: tol must be positive");
    if (config.ridge_rel < 0.0) throw std::invalid_argument("mpglram_fit: ridge_rel >= 0 required");

    MpglramModel model;
    model.config = config;
    model.pairs = init_pairs(dataset, config, warm_pairs, warm_glram);

    // initial core solve, then sweeps of per-pair closed-form updates
    model.cores = update_cores(dataset, model.pairs, config.ridge_rel);
    model.objective_history.push_back(mpglram_objective(dataset, model.pairs, model.cores));

    const double tiny = std::numeric_limits<double>::min();
    double sweep_prev = model.objective_history.front();
    for (int sweep = 0; sweep < config.outer_iters; ++sweep) {
        for (std::size_t j = 0; j < model.pairs.size(); ++j) {
            const std::vector<Eigen::MatrixXd> abar =
                residual_excluding(dataset, model.pairs, model.cores, j);
            KronPair& pair = model.pairs.pairs[j];
            for (int step = 0; step < 2; ++step) {
                const bool do_l = (config.order == UpdateOrder::LThenR) == (step == 0);
                if (do_l)
                    pair.L = update_l_pair(abar, pair.R, model.cores, config.ridge_rel);
                else
                    pair.R = update_r_pair(abar, pair.L, model.cores, config.ridge_rel);
                model.objective_history.push_back(restricted_objective(abar, pair, model.cores));
            }
        }
        model.cores = update_cores(dataset, model.pairs, config.ridge_rel);
        model.objective_history.push_back(mpglram_objective(dataset, model.pairs, model.cores));
        model.sweeps = sweep + 1;

        const double sweep_cur = model.objective_history.back();
        if ((sweep_prev - sweep_cur) / std::max(model.objective_history.front(), tiny) < config.tol)
            break;
        sweep_prev = sweep_cur;
    }
    return model;
}

double mpglram_objective(const MatrixDataset& dataset, const KronPairList& pairs,
                         const std::vector<Eigen::MatrixXd>& cores) {
    if (cores.size() != dataset.size())
        throw std::invalid_argument("mpglram_objective: core count differs from sample count");
    double total = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        total += (dataset.samples[i] - apply_pairs(pairs, cores[i])).squaredNorm();
    return total;
}

double mpglram_objective(const MatrixDataset& dataset, const MpglramModel& model) {
    return mpglram_objective(dataset, model.pairs, model.cores);
}

}  // namespace kronfold

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kronfold/glram.hpp"
#include "kronfold/rng.hpp"

#include <Eigen/Dense>

using namespace kronfold;

namespace {

MatrixDataset random_dataset(std::uint64_t seed, std::size_t n, Eigen::Index n1, Eigen::Index n2) {
    Rng rng(seed);
    MatrixDataset ds;
    ds.n1 = n1;
    ds.n2 = n2;
    for (std::size_t i = 0; i < n; ++i) ds.samples.push_back(rng.gaussian_matrix(n1, n2));
    return ds;
}

MatrixDataset single(const Eigen::MatrixXd& a) {
    MatrixDataset ds;
    ds.n1 = a.rows();
    ds.n2 = a.cols();
    ds.samples.push_back(a);
    return ds;
}

double total_energy(const MatrixDataset& ds) {
    double out = 0.0;
    for (const auto& a : ds.samples) out += a.squaredNorm();
    return out;
}

}  // namespace

TEST_CASE("form_mr on an identity sample with one basis column") {
    const MatrixDataset ds = single(Eigen::MatrixXd::Identity(3, 3));
    const Eigen::MatrixXd L = Eigen::MatrixXd::Identity(3, 1);
    const Eigen::MatrixXd mr = form_mr(ds, L);
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(3, 3);
    expected(0, 0) = 1.0;
    CHECK((mr - expected).norm() <= 1e-15);
}

TEST_CASE("form_mr with zero projector is zero") {
    const MatrixDataset ds = random_dataset(3, 4, 5, 4);
    CHECK(form_mr(ds, Eigen::MatrixXd::Zero(5, 2)).isZero(0.0));
}

TEST_CASE("form_mr matches the per-sample loop oracle") {
    const MatrixDataset ds = random_dataset(5, 6, 5, 4);
    Rng rng(6);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(rng.gaussian_matrix(5, 2));
    const Eigen::MatrixXd L = qr.householderQ() * Eigen::MatrixXd::Identity(5, 2);

    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(4, 4);
    for (const auto& a : ds.samples) expected += a.transpose() * L * L.transpose() * a;

    const Eigen::MatrixXd got = form_mr(ds, L);
    CHECK((got - expected).norm() <= 1e-12 * std::max(1.0, expected.norm()));
    CHECK((got - got.transpose()).norm() <= 1e-12 * std::max(1.0, got.norm()));
}

TEST_CASE("form_ml hand-expanded diagonal case") {
    Eigen::MatrixXd a = Eigen::Vector3d(3.0, 2.0, 1.0).asDiagonal();
    const MatrixDataset ds = single(a);
    const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(3, 1);
    const Eigen::MatrixXd ml = form_ml(ds, R);
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(3, 3);
    expected(0, 0) = 9.0;
    CHECK((ml - expected).norm() <= 1e-15);
}

TEST_CASE("form_ml with a full identity R sums the sample Grams") {
    const MatrixDataset ds = random_dataset(7, 5, 4, 4);
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(4, 4);
    for (const auto& a : ds.samples) expected += a * a.transpose();
    const Eigen::MatrixXd got = form_ml(ds, Eigen::MatrixXd::Identity(4, 4));
    CHECK((got - expected).norm() <= 1e-12 * expected.norm());
}

TEST_CASE("form_ml matches the per-sample loop oracle") {
    const MatrixDataset ds = random_dataset(11, 7, 4, 6);
    Rng rng(12);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(rng.gaussian_matrix(6, 3));
    const Eigen::MatrixXd R = qr.householderQ() * Eigen::MatrixXd::Identity(6, 3);

    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(4, 4);
    for (const auto& a : ds.samples) expected += a * R * R.transpose() * a.transpose();
    CHECK((form_ml(ds, R) - expected).norm() <= 1e-12 * expected.norm());
}

TEST_CASE("top_eigvecs on a diagonal matrix") {
    const Eigen::MatrixXd s = Eigen::Vector3d(5.0, 3.0, 1.0).asDiagonal();
    const Eigen::MatrixXd w = top_eigvecs(s, 2);
    REQUIRE(w.cols() == 2);
    CHECK(std::abs(w(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(w(1, 1)) == doctest::Approx(1.0));
    CHECK(w(0, 0) > 0.0);  // sign gauge
    CHECK(w(1, 1) > 0.0);
}

TEST_CASE("top_eigvecs satisfies the eigen-residual contract") {
    SUBCASE("degenerate spectrum") {
        const Eigen::MatrixXd w = top_eigvecs(Eigen::MatrixXd::Identity(4, 4), 1);
        CHECK(std::abs(w.col(0).norm() - 1.0) <= 1e-12);
        CHECK((Eigen::MatrixXd::Identity(4, 4) * w - w).norm() <= 1e-10);
    }
    SUBCASE("random symmetric") {
        Rng rng(13);
        const Eigen::MatrixXd g = rng.gaussian_matrix(8, 8);
        const Eigen::MatrixXd s = 0.5 * (g + g.transpose());
        const Eigen::MatrixXd w = top_eigvecs(s, 3);
        const Eigen::MatrixXd lambda = w.transpose() * s * w;
        CHECK((s * w - w * lambda.diagonal().asDiagonal().toDenseMatrix()).norm() <= 1e-10);
        CHECK((w.transpose() * w - Eigen::MatrixXd::Identity(3, 3)).norm() <= 1e-12);
        // descending eigenvalues
        CHECK(lambda(0, 0) >= lambda(1, 1));
        CHECK(lambda(1, 1) >= lambda(2, 2));
    }
}

TEST_CASE("top_eigvecs rejects asymmetric input") {
    Eigen::MatrixXd s(2, 2);
    s << 1.0, 2.0, 0.0, 1.0;
    CHECK_THROWS_AS(top_eigvecs(s, 1), std::invalid_argument);
}

TEST_CASE("glram on a single diagonal sample reaches the rank-1 optimum") {
    const Eigen::MatrixXd a = Eigen::Vector3d(3.0, 2.0, 1.0).asDiagonal();
    FitConfig config;
    config.k1 = config.k2 = 1;
    const GlramModel model = glram_fit(single(a), config);
    CHECK(model.objective_history.back() == doctest::Approx(5.0).epsilon(1e-9));
    REQUIRE(model.cores.size() == 1);
    CHECK(model.cores[0](0, 0) == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("full-dimensional glram reconstructs exactly") {
    const MatrixDataset ds = random_dataset(17, 4, 4, 3);
    FitConfig config;
    config.k1 = 4;
    config.k2 = 3;
    const GlramModel model = glram_fit(ds, config);
    CHECK(model.objective_history.back() <= 1e-9 * total_energy(ds));
}

TEST_CASE("glram on one sample converges to the truncated-SVD tail") {
    const MatrixDataset ds = random_dataset(19, 1, 8, 8);
    FitConfig config;
    config.k1 = config.k2 = 3;
    config.tol = 1e-14;
    config.max_iter = 500;
    const GlramModel model = glram_fit(ds, config);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ds.samples[0]);
    double tail = 0.0;
    for (Eigen::Index i = 3; i < 8; ++i) tail += svd.singularValues()(i) * svd.singularValues()(i);
    CHECK(model.objective_history.back() == doctest::Approx(tail).epsilon(1e-6));
}

TEST_CASE("glram orthonormality and monotonic history for both init modes") {
    const MatrixDataset ds = random_dataset(23, 15, 9, 7);
    for (GlramInit init : {GlramInit::IdentityBlock, GlramInit::RandomOrthonormal}) {
        FitConfig config;
        config.k1 = 3;
        config.k2 = 2;
        config.init_mode = init;
        config.seed = 5;
        const GlramModel model = glram_fit(ds, config);
        CHECK((model.L.transpose() * model.L - Eigen::MatrixXd::Identity(3, 3)).norm() <= 1e-10);
        CHECK((model.R.transpose() * model.R - Eigen::MatrixXd::Identity(2, 2)).norm() <= 1e-10);
        for (std::size_t t = 1; t < model.objective_history.size(); ++t)
            CHECK(model.objective_history[t] <= model.objective_history[t - 1] * (1.0 + 1e-9));
    }
}

TEST_CASE("objective energy split holds for arbitrary orthonormal factors") {
    const MatrixDataset ds = random_dataset(29, 10, 6, 5);
    Rng rng(30);
    GlramModel model;
    Eigen::HouseholderQR<Eigen::MatrixXd> ql(rng.gaussian_matrix(6, 2));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(rng.gaussian_matrix(5, 3));
    model.L = ql.householderQ() * Eigen::MatrixXd::Identity(6, 2);
    model.R = qr.householderQ() * Eigen::MatrixXd::Identity(5, 3);

    const auto [min_form, max_form] = glram_objective(ds, model);
    CHECK(min_form + max_form == doctest::Approx(total_energy(ds)).epsilon(1e-9));
}

TEST_CASE("objective trivial cases") {
    MatrixDataset zeros;
    zeros.n1 = 3;
    zeros.n2 = 3;
    zeros.samples = {Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 3)};
    GlramModel model;
    model.L = Eigen::MatrixXd::Identity(3, 2);
    model.R = Eigen::MatrixXd::Identity(3, 2);
    const auto [min_zero, max_zero] = glram_objective(zeros, model);
    CHECK(min_zero == 0.0);
    CHECK(max_zero == 0.0);

    const MatrixDataset ds = random_dataset(31, 3, 3, 3);
    GlramModel full;
    full.L = Eigen::MatrixXd::Identity(3, 3);
    full.R = Eigen::MatrixXd::Identity(3, 3);
    const auto [min_full, max_full] = glram_objective(ds, full);
    CHECK(min_full <= 1e-12 * total_energy(ds));
    CHECK(max_full == doctest::Approx(total_energy(ds)).epsilon(1e-12));
}

TEST_CASE("project and reconstruct behave as an orthogonal projection") {
    const MatrixDataset ds = random_dataset(37, 8, 7, 6);
    FitConfig config;
    config.k1 = 3;
    config.k2 = 3;
    const GlramModel model = glram_fit(ds, config);

    const auto cores = glram_project(model, ds);
    const auto rebuilt = glram_reconstruct(model, cores);

    SUBCASE("in-span samples are fixed points") {
        MatrixDataset span;
        span.n1 = 7;
        span.n2 = 6;
        span.samples = rebuilt;
        const auto cores2 = glram_project(model, span);
        const auto rebuilt2 = glram_reconstruct(model, cores2);
        for (std::size_t i = 0; i < rebuilt.size(); ++i)
            CHECK((rebuilt2[i] - rebuilt[i]).norm() <= 1e-12 * std::max(1.0, rebuilt[i].norm()));
    }
    SUBCASE("zero maps to zero") {
        MatrixDataset zero;
        zero.n1 = 7;
        zero.n2 = 6;
        zero.samples = {Eigen::MatrixXd::Zero(7, 6)};
        const auto zero_cores = glram_project(model, zero);
        CHECK(zero_cores[0].isZero(0.0));
        CHECK(glram_reconstruct(model, zero_cores)[0].isZero(0.0));
    }
    SUBCASE("projection contracts norms") {
        for (std::size_t i = 0; i < ds.size(); ++i)
            CHECK(rebuilt[i].norm() <= ds.samples[i].norm() + 1e-12);
    }
}

TEST_CASE("glram_fit validates its configuration") {
    const MatrixDataset ds = random_dataset(41, 3, 4, 4);
    FitConfig config;
    config.k1 = 5;
    CHECK_THROWS_AS(glram_fit(ds, config), std::invalid_argument);
    config.k1 = 2;
    config.tol = 0.0;
    CHECK_THROWS_AS(glram_fit(ds, config), std::invalid_argument);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kronfold/eval.hpp"
#include "kronfold/kronecker.hpp"
#include "kronfold/rng.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <stdlib.h>

using namespace kronfold;

namespace {

MatrixDataset random_dataset(std::uint64_t seed, std::size_t n, Eigen::Index n1, Eigen::Index n2,
                             std::uint32_t classes = 0) {
    Rng rng(seed);
    MatrixDataset ds;
    ds.n1 = n1;
    ds.n2 = n2;
    for (std::size_t i = 0; i < n; ++i) ds.samples.push_back(rng.gaussian_matrix(n1, n2));
    if (classes > 0) {
        std::vector<std::uint32_t> labels;
        for (std::size_t i = 0; i < n; ++i)
            labels.push_back(static_cast<std::uint32_t>(i % classes));
        ds.labels = std::move(labels);
        ds.class_count = classes;
    }
    return ds;
}

// independent brute-force k-NN implementing the same tie-break contract:
// neighbors by (distance, index); votes by (count, summed distance, label id)
std::vector<std::uint32_t> knn_brute_force(const std::vector<Eigen::VectorXd>& train,
                                           const std::vector<std::uint32_t>& labels,
                                           const std::vector<Eigen::VectorXd>& test, int k) {
    std::vector<std::uint32_t> out;
    for (const auto& query : test) {
        std::vector<std::pair<double, std::size_t>> all;
        for (std::size_t i = 0; i < train.size(); ++i)
            all.emplace_back((train[i] - query).norm(), i);
        std::sort(all.begin(), all.end());
        const std::size_t k_eff = std::min<std::size_t>(static_cast<std::size_t>(k), all.size());

        std::map<std::uint32_t, std::size_t> count;
        std::map<std::uint32_t, double> dist;
        for (std::size_t i = 0; i < k_eff; ++i) {
            count[labels[all[i].second]]++;
            dist[labels[all[i].second]] += all[i].first;
        }
        std::uint32_t best = count.begin()->first;
        for (const auto& [label, c] : count) {
            if (c > count[best])
                best = label;
            else if (c == count[best] && dist[label] < dist[best])
                best = label;
        }
        out.push_back(best);
    }
    return out;
}

MatrixDataset separated_classes(std::uint64_t seed, std::size_t n, std::uint32_t classes) {
    Rng rng(seed);
    MatrixDataset ds;
    ds.n1 = 4;
    ds.n2 = 4;
    std::vector<std::uint32_t> labels;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t label = static_cast<std::uint32_t>(i % classes);
        // far-apart class centers, tiny within-class spread
        Eigen::MatrixXd sample = Eigen::MatrixXd::Constant(4, 4, 50.0 * label);
        sample += 0.01 * rng.gaussian_matrix(4, 4);
        ds.samples.push_back(sample);
        labels.push_back(label);
    }
    ds.labels = std::move(labels);
    ds.class_count = classes;
    return ds;
}

std::string factor_digest(const FittedReducer& reducer) {
    const auto digest = [](const Eigen::MatrixXd& m) {
        return std::to_string(fnv1a64(m.data(), sizeof(double) * static_cast<std::size_t>(m.size())));
    };
    switch (reducer.method) {
        case Method::Svd: return digest(reducer.svd->W);
        case Method::Glram: return digest(reducer.glram->L) + ":" + digest(reducer.glram->R);
        case Method::Mpglram: {
            std::string out;
            for (const auto& p : reducer.mpglram->pairs.pairs)
                out += digest(p.L) + ":" + digest(p.R) + ";";
            return out;
        }
    }
    return {};
}

}  // namespace

TEST_CASE("rmsre basics") {
    const MatrixDataset ds = random_dataset(3, 4, 3, 3);
    CHECK(rmsre(ds, ds.samples) == 0.0);

    MatrixDataset two;
    two.n1 = two.n2 = 2;
    two.samples = {Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)};
    std::vector<Eigen::MatrixXd> rebuilt = two.samples;
    rebuilt[0](0, 0) = 2.0;  // residual norms squared: {4, 0}
    CHECK(rmsre(two, rebuilt) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

    CHECK_THROWS_AS(rmsre(two, {Eigen::MatrixXd::Zero(2, 2)}), std::invalid_argument);
}

TEST_CASE("rmsre matches the elementwise summation oracle and permutation invariance") {
    const MatrixDataset ds = random_dataset(5, 6, 4, 3);
    Rng rng(6);
    std::vector<Eigen::MatrixXd> rebuilt;
    for (const auto& a : ds.samples) rebuilt.push_back(a + 0.1 * rng.gaussian_matrix(4, 3));

    double sum = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (Eigen::Index r = 0; r < 4; ++r)
            for (Eigen::Index c = 0; c < 3; ++c) {
                const double diff = ds.samples[i](r, c) - rebuilt[i](r, c);
                sum += diff * diff;
            }
    const double expected = std::sqrt(sum / 6.0);
    CHECK(rmsre(ds, rebuilt) == doctest::Approx(expected).epsilon(1e-12));

    MatrixDataset permuted = ds;
    std::vector<Eigen::MatrixXd> rebuilt_permuted = rebuilt;
    std::reverse(permuted.samples.begin(), permuted.samples.end());
    std::reverse(rebuilt_permuted.begin(), rebuilt_permuted.end());
    CHECK(rmsre(permuted, rebuilt_permuted) == doctest::Approx(rmsre(ds, rebuilt)));
}

TEST_CASE("knn trivial geometry") {
    std::vector<Eigen::VectorXd> train{Eigen::VectorXd::Constant(1, -1.0),
                                       Eigen::VectorXd::Constant(1, 1.0)};
    std::vector<std::uint32_t> labels{0, 1};
    std::vector<Eigen::VectorXd> test{Eigen::VectorXd::Constant(1, 0.9)};
    CHECK(knn_classify(train, labels, test, 1) == std::vector<std::uint32_t>{1});

    // identical point wins at K=1
    CHECK(knn_classify(train, labels, {train[0]}, 1) == std::vector<std::uint32_t>{0});
}

TEST_CASE("knn tie-breaking: vote count, then summed distance, then label id") {
    // K=2, one neighbor of each class: class 1 sits closer in sum
    std::vector<Eigen::VectorXd> train{Eigen::VectorXd::Constant(1, 0.5),
                                       Eigen::VectorXd::Constant(1, -0.1)};
    std::vector<std::uint32_t> labels{0, 1};
    CHECK(knn_classify(train, labels, {Eigen::VectorXd::Zero(1)}, 2) ==
          std::vector<std::uint32_t>{1});

    // symmetric distances: lowest label id wins
    std::vector<Eigen::VectorXd> sym{Eigen::VectorXd::Constant(1, 1.0),
                                     Eigen::VectorXd::Constant(1, -1.0)};
    CHECK(knn_classify(sym, {1, 0}, {Eigen::VectorXd::Zero(1)}, 2) ==
          std::vector<std::uint32_t>{0});
}

TEST_CASE("knn agrees with the brute-force oracle") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(400 + seed);
        const std::size_t n_train = 5 + rng.bounded(60);
        const std::size_t n_test = 1 + rng.bounded(20);
        const Eigen::Index dim = 1 + static_cast<Eigen::Index>(rng.bounded(6));
        const std::uint32_t classes = 2 + static_cast<std::uint32_t>(rng.bounded(4));

        std::vector<Eigen::VectorXd> train, test;
        std::vector<std::uint32_t> labels;
        for (std::size_t i = 0; i < n_train; ++i) {
            train.push_back(rng.gaussian_matrix(dim, 1));
            labels.push_back(static_cast<std::uint32_t>(rng.bounded(classes)));
        }
        for (std::size_t i = 0; i < n_test; ++i) test.push_back(rng.gaussian_matrix(dim, 1));

        for (int k : {1, 2, 3})
            CHECK(knn_classify(train, labels, test, k) == knn_brute_force(train, labels, test, k));
    }
}

TEST_CASE("knn input validation") {
    std::vector<Eigen::VectorXd> train{Eigen::VectorXd::Zero(2)};
    CHECK_THROWS_AS(knn_classify({}, {}, train, 1), std::invalid_argument);
    CHECK_THROWS_AS(knn_classify(train, {0}, train, 0), std::invalid_argument);
}

TEST_CASE("cross_validate scores separable data perfectly with every method") {
    const MatrixDataset ds = separated_classes(7, 40, 4);
    const FoldPlan plan = kfold_split(ds, 5, 11);
    for (Method method : {Method::Svd, Method::Glram, Method::Mpglram}) {
        MethodSpec spec;
        spec.method = method;
        spec.d = 2;
        spec.k_pairs = 2;
        const EvalReport report = cross_validate(ds, spec, plan, {1});
        REQUIRE(report.records.size() == 6);  // 5 folds + aggregate
        for (const auto& record : report.records) CHECK(record.value == doctest::Approx(100.0));
        CHECK(report.records.back().fold_index == -1);
    }
}

TEST_CASE("cross_validate is deterministic for a fixed seed") {
    const MatrixDataset ds = random_dataset(13, 30, 6, 5, 3);
    const FoldPlan plan = kfold_split(ds, 3, 17);
    MethodSpec spec;
    spec.method = Method::Mpglram;
    spec.d = 2;
    spec.k_pairs = 2;
    spec.seed = 23;
    const EvalReport a = cross_validate(ds, spec, plan, {1});
    const EvalReport b = cross_validate(ds, spec, plan, {1});
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i)
        CHECK(a.records[i].value == b.records[i].value);
}

TEST_CASE("cross_validate warns about unseen classes but still scores") {
    MatrixDataset ds = random_dataset(17, 8, 3, 3, 2);
    // put every class-1 sample into fold 0 so folds 1+ never train on it...
    FoldPlan plan;
    plan.K = 2;
    plan.assignment = {0, 1, 0, 1, 0, 1, 0, 1};
    ds.labels = std::vector<std::uint32_t>{0, 0, 0, 0, 1, 0, 1, 0};
    MethodSpec spec;
    spec.method = Method::Svd;
    spec.d = 1;
    const EvalReport report = cross_validate(ds, spec, plan, {1});
    CHECK(!report.warnings.empty());
    CHECK(report.records.size() == 3);
}

TEST_CASE("training-side factors ignore test-fold contents") {
    const MatrixDataset ds = random_dataset(19, 24, 5, 4, 3);
    const FoldPlan plan = kfold_split(ds, 4, 29);

    // replace the test fold with noise; the fitted factors must not move
    MatrixDataset corrupted = ds;
    Rng rng(31);
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (plan.assignment[i] == 0) corrupted.samples[i] = 100.0 * rng.gaussian_matrix(5, 4);

    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (plan.assignment[i] != 0) train_idx.push_back(i);

    const auto take = [&](const MatrixDataset& source) {
        MatrixDataset out;
        out.n1 = source.n1;
        out.n2 = source.n2;
        std::vector<std::uint32_t> labels;
        for (std::size_t idx : train_idx) {
            out.samples.push_back(source.samples[idx]);
            labels.push_back((*source.labels)[idx]);
        }
        out.labels = std::move(labels);
        out.class_count = source.class_count;
        return out;
    };

    for (Method method : {Method::Svd, Method::Glram, Method::Mpglram}) {
        MethodSpec spec;
        spec.method = method;
        spec.d = 2;
        spec.k_pairs = 2;
        spec.seed = 37;
        CHECK(factor_digest(fit_reducer(take(ds), spec)) ==
              factor_digest(fit_reducer(take(corrupted), spec)));
    }
}

TEST_CASE("shuffled labels score at chance level") {
    const std::size_t n = 80;
    const std::uint32_t classes = 4;
    double mean_accuracy = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        MatrixDataset ds = random_dataset(600 + seed, n, 4, 4, classes);
        // shuffle labels so features carry no class signal
        Rng rng(700 + seed);
        rng.shuffle(*ds.labels);
        const FoldPlan plan = kfold_split(ds, 4, 800 + seed);
        MethodSpec spec;
        spec.method = Method::Svd;
        spec.d = 2;
        const EvalReport report = cross_validate(ds, spec, plan, {1});
        mean_accuracy += report.records.back().value;
    }
    mean_accuracy /= 10.0;
    const double chance = 100.0 / classes;
    const double slack = 3.0 * std::sqrt(100.0 * 100.0 / (4.0 * n));
    CHECK(std::abs(mean_accuracy - chance) <= slack);
}

TEST_CASE("sweep emits the full grid with deterministic ordering") {
    const MatrixDataset ds = separated_classes(41, 36, 3);
    const std::vector<Method> methods{Method::Svd, Method::Glram, Method::Mpglram};
    const EvalReport report = sweep(ds, methods, {2, 3}, {2}, {2, 3}, {1}, 43, 40, 1e-6);

    // rmsre rows: 3 methods x 2 d values (singleton k grid)
    std::size_t rmsre_rows = 0;
    for (const auto& record : report.records)
        if (record.metric == "rmsre") ++rmsre_rows;
    CHECK(rmsre_rows == 6);

    // accuracy rows: per fold count, per method, per d: folds + aggregate
    std::size_t aggregate_rows = 0;
    for (const auto& record : report.records)
        if (record.metric == "accuracy" && record.fold_index == -1) ++aggregate_rows;
    CHECK(aggregate_rows == 12);  // 2 fold counts x 3 methods x 2 d

    const EvalReport again = sweep(ds, methods, {2, 3}, {2}, {2, 3}, {1}, 43, 40, 1e-6);
    CHECK(report_to_csv(report) == report_to_csv(again));
}

TEST_CASE("sweep rmsre honors the search-space ordering at each d") {
    SyntheticSpec gen;
    gen.n1 = 10;
    gen.n2 = 8;
    gen.N = 40;
    gen.kron_rank = 3;
    gen.k1 = gen.k2 = 3;
    gen.noise_sigma = 0.05;
    gen.class_count = 4;
    gen.seed = 47;
    const MatrixDataset ds = synth_kron(gen).dataset;

    const std::vector<Method> methods{Method::Svd, Method::Glram, Method::Mpglram};
    const EvalReport report = sweep(ds, methods, {2, 3}, {1, 2, 3}, {}, {1}, 51, 80, 1e-9);

    std::map<std::pair<int, std::size_t>, double> mp;
    std::map<int, double> svd_err, glram_err;
    for (const auto& record : report.records) {
        if (record.metric != "rmsre") continue;
        if (record.method == "svd") svd_err[record.d] = record.value;
        if (record.method == "glram") glram_err[record.d] = record.value;
        if (record.method == "mpglram") mp[{record.d, record.k_pairs}] = record.value;
    }
    for (int d : {2, 3}) {
        double previous = glram_err[d] + 1e-9;
        for (std::size_t k : {1, 2, 3}) {
            CHECK(svd_err[d] <= mp[{d, k}] + 1e-9);
            CHECK(mp[{d, k}] <= previous + 1e-9);  // non-increasing in k, below glram
            previous = mp[{d, k}];
        }
    }
    // rmsre non-increasing in d along each method
    CHECK(svd_err[3] <= svd_err[2] + 1e-9);
    CHECK(glram_err[3] <= glram_err[2] + 1e-9);
    CHECK(mp[{3, 2}] <= mp[{2, 2}] + 1e-9);
}

TEST_CASE("sweep output does not depend on the worker thread count") {
    const MatrixDataset ds = separated_classes(53, 24, 3);
    const std::vector<Method> methods{Method::Svd, Method::Glram, Method::Mpglram};
    ::setenv("KRONFOLD_THREADS", "1", 1);
    const EvalReport serial = sweep(ds, methods, {2, 3}, {2}, {2}, {1}, 5, 20, 1e-6);
    ::setenv("KRONFOLD_THREADS", "4", 1);
    const EvalReport threaded = sweep(ds, methods, {2, 3}, {2}, {2}, {1}, 5, 20, 1e-6);
    ::unsetenv("KRONFOLD_THREADS");
    CHECK(report_to_csv(serial) == report_to_csv(threaded));
}

TEST_CASE("a failing cell is marked and skipped without aborting the sweep") {
    // d=4 forces the svd cell to request 16 dims from 12-sample training
    // folds, which must fail per-cell while glram/mpglram still report
    const MatrixDataset ds = random_dataset(61, 18, 5, 5, 3);
    const EvalReport report =
        sweep(ds, {Method::Svd, Method::Glram, Method::Mpglram}, {2, 4}, {2}, {3}, {1}, 7, 20,
              1e-6);
    CHECK(!report.warnings.empty());
    std::set<std::pair<std::string, int>> accuracy_cells;
    for (const auto& record : report.records)
        if (record.metric == "accuracy" && record.fold_index == -1)
            accuracy_cells.insert({record.method, record.d});
    CHECK(accuracy_cells.count({"svd", 2}) == 1);
    CHECK(accuracy_cells.count({"svd", 4}) == 0);  // the failed cell
    CHECK(accuracy_cells.count({"glram", 4}) == 1);
    CHECK(accuracy_cells.count({"mpglram", 4}) == 1);
}

TEST_CASE("csv emission format") {
    EvalReport report;
    report.records.push_back({"svd", 5, 0, 2, -1, "accuracy", 97.4567, 7, 12.5, 1});
    report.records.push_back({"mpglram", 5, 3, 0, -1, "rmsre", 0.125, 7, 3.25, 1});
    const std::string csv = report_to_csv(report);
    CHECK(csv ==
          "method,d,k_pairs,fold_count,fold_index,metric,value,seed,wall_time_ms\n"
          "svd,5,0,2,-1,accuracy,97.46,7,0.000\n"
          "mpglram,5,3,0,-1,rmsre,0.125,7,0.000\n");
    const std::string timed = report_to_csv(report, true);
    CHECK(timed.find("12.500") != std::string::npos);

    const std::string json = report_to_json(report);
    CHECK(json.find("\"method\": \"svd\"") != std::string::npos);
    CHECK(json.find("\"value\": 97.46") != std::string::npos);
    CHECK(json.find("\"wall_time_ms\": 0.0") != std::string::npos);
}

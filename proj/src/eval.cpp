#include "kronfold/eval.hpp"

#include "kronfold/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <thread>

namespace kronfold {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

MatrixDataset subset(const MatrixDataset& dataset, const std::vector<std::size_t>& indices) {
    MatrixDataset out;
    out.n1 = dataset.n1;
    out.n2 = dataset.n2;
    out.samples.reserve(indices.size());
    std::vector<std::uint32_t> labels;
    for (std::size_t idx : indices) {
        out.samples.push_back(dataset.samples[idx]);
        if (dataset.labels) labels.push_back((*dataset.labels)[idx]);
    }
    if (dataset.labels) {
        out.labels = std::move(labels);
        out.class_count = dataset.class_count;
    }
    return out;
}

// run tasks 0..count-1 on up to worker_count() threads; each task must be
// independent and write only to its own slot
void run_tasks(std::size_t count, const std::function<void(std::size_t)>& task) {
    const unsigned workers =
        std::min<unsigned>(worker_count(), static_cast<unsigned>(std::max<std::size_t>(count, 1)));
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::string method_name(Method method) {
    switch (method) {
        case Method::Svd: return "svd";
        case Method::Glram: return "glram";
        case Method::Mpglram: return "mpglram";
    }
    throw std::invalid_argument("method_name: unknown method");
}

Method method_from_name(const std::string& name) {
    if (name == "svd") return Method::Svd;
    if (name == "glram") return Method::Glram;
    if (name == "mpglram") return Method::Mpglram;
    throw std::invalid_argument("unknown method: " + name);
}

double rmsre(const MatrixDataset& dataset, const std::vector<Eigen::MatrixXd>& reconstructed) {
    if (reconstructed.size() != dataset.size())
        throw std::invalid_argument("rmsre: reconstruction count differs from sample count");
    double total = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (reconstructed[i].rows() != dataset.n1 || reconstructed[i].cols() != dataset.n2)
            throw std::invalid_argument("rmsre: reconstruction shape mismatch");
        total += (dataset.samples[i] - reconstructed[i]).squaredNorm();
    }
    return std::sqrt(total / static_cast<double>(dataset.size()));
}

std::vector<std::uint32_t> knn_classify(const std::vector<Eigen::VectorXd>& train_features,
                                        const std::vector<std::uint32_t>& train_labels,
                                        const std::vector<Eigen::VectorXd>& test_features,
                                        int k_neighbors) {
    if (train_features.empty()) throw std::invalid_argument("knn_classify: empty training set");
    if (train_features.size() != train_labels.size())
        throw std::invalid_argument("knn_classify: feature/label counts differ");
    if (k_neighbors < 1) throw std::invalid_argument("knn_classify: K must be at least 1");
    const Eigen::Index dim = train_features.front().size();
    for (const auto& f : train_features)
        if (f.size() != dim) throw std::invalid_argument("knn_classify: ragged training features");

    const std::size_t k_eff = std::min<std::size_t>(static_cast<std::size_t>(k_neighbors),
                                                    train_features.size());
    std::vector<std::uint32_t> predictions;
    predictions.reserve(test_features.size());
    std::vector<std::pair<double, std::size_t>> order(train_features.size());
    for (const auto& query : test_features) {
        if (query.size() != dim) throw std::invalid_argument("knn_classify: ragged test features");
        for (std::size_t i = 0; i < train_features.size(); ++i)
            order[i] = {(train_features[i] - query).squaredNorm(), i};
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_eff),
                          order.end());  // pair ordering breaks distance ties by index

        // per-class vote count and summed (unsquared) distance among the k nearest
        std::map<std::uint32_t, std::pair<std::size_t, double>> votes;
        for (std::size_t i = 0; i < k_eff; ++i) {
            auto& entry = votes[train_labels[order[i].second]];
            entry.first += 1;
            entry.second += std::sqrt(order[i].first);
        }
        std::uint32_t best_label = votes.begin()->first;
        std::pair<std::size_t, double> best = votes.begin()->second;
        for (const auto& [label, tally] : votes) {
            if (tally.first > best.first ||
                (tally.first == best.first && tally.second < best.second)) {
                best_label = label;
                best = tally;
            }
        }
        predictions.push_back(best_label);
    }
    return predictions;
}

FittedReducer fit_reducer(const MatrixDataset& train, const MethodSpec& spec) {
    FittedReducer reducer;
    reducer.method = spec.method;
    switch (spec.method) {
        case Method::Svd:
            reducer.svd = svd_fit(train, static_cast<Eigen::Index>(spec.d) * spec.d,
                                  spec.centered);
            break;
        case Method::Glram: {
            FitConfig config;
            config.k1 = spec.d;
            config.k2 = spec.d;
            config.max_iter = spec.max_iter;
            config.tol = spec.tol;
            config.seed = spec.seed;
            reducer.glram = glram_fit(train, config);
            break;
        }
        case Method::Mpglram: {
            MpglramConfig config;
            config.k = spec.k_pairs;
            config.k1 = spec.d;
            config.k2 = spec.d;
            config.outer_iters = spec.max_iter;
            config.tol = spec.tol;
            config.seed = spec.seed;
            config.init_mode = spec.init;
            if (spec.init == MpglramInit::PairsWarm)
                throw std::invalid_argument(
                    "fit_reducer: pairs-warm needs an explicit warm model; use sweep()");
            reducer.mpglram = mpglram_fit(train, config);
            break;
        }
    }
    return reducer;
}

std::vector<Eigen::VectorXd> reduce_features(const FittedReducer& reducer,
                                             const MatrixDataset& dataset) {
    std::vector<Eigen::VectorXd> features;
    features.reserve(dataset.size());
    switch (reducer.method) {
        case Method::Svd: return svd_project(*reducer.svd, dataset);
        case Method::Glram:
            for (const auto& core : glram_project(*reducer.glram, dataset))
                features.push_back(vec(core));
            return features;
        case Method::Mpglram:
            for (const auto& core : update_cores(dataset, reducer.mpglram->pairs,
                                                 reducer.mpglram->config.ridge_rel))
                features.push_back(vec(core));
            return features;
    }
    throw std::invalid_argument("reduce_features: unknown method");
}

namespace {

struct FoldOutcome {
    double accuracy = 0.0;  // percent
    double wall_time_ms = 0.0;
};

std::vector<std::size_t> fold_indices(const FoldPlan& plan, int fold, bool complement) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < plan.assignment.size(); ++i)
        if ((plan.assignment[i] == fold) != complement) out.push_back(i);
    return out;
}

void warn_unseen_classes(const MatrixDataset& train, const MatrixDataset& test, int fold,
                         std::vector<std::string>& warnings) {
    std::set<std::uint32_t> seen(train.labels->begin(), train.labels->end());
    std::set<std::uint32_t> missing;
    for (std::uint32_t label : *test.labels)
        if (!seen.count(label)) missing.insert(label);
    for (std::uint32_t label : missing)
        warnings.push_back("fold " + std::to_string(fold) + ": class " + std::to_string(label) +
                           " has no training samples");
}

double score_fold(const std::vector<Eigen::VectorXd>& train_features,
                  const std::vector<std::uint32_t>& train_labels,
                  const std::vector<Eigen::VectorXd>& test_features,
                  const std::vector<std::uint32_t>& test_labels, int k_neighbors) {
    const std::vector<std::uint32_t> predicted =
        knn_classify(train_features, train_labels, test_features, k_neighbors);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == test_labels[i]) ++correct;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(predicted.size());
}

}  // namespace

EvalReport cross_validate(const MatrixDataset& dataset, const MethodSpec& spec,
                          const FoldPlan& plan, const KnnSpec& classifier) {
    dataset.validate();
    if (!dataset.labels) throw std::invalid_argument("cross_validate: labels required");
    if (plan.assignment.size() != dataset.size())
        throw std::invalid_argument("cross_validate: fold plan does not match dataset");

    EvalReport report;
    double accuracy_sum = 0.0;
    double time_sum = 0.0;
    for (int fold = 0; fold < plan.K; ++fold) {
        const auto start = Clock::now();
        const MatrixDataset train = subset(dataset, fold_indices(plan, fold, true));
        const MatrixDataset test = subset(dataset, fold_indices(plan, fold, false));
        warn_unseen_classes(train, test, fold, report.warnings);

        const FittedReducer reducer = fit_reducer(train, spec);
        const double accuracy =
            score_fold(reduce_features(reducer, train), *train.labels,
                       reduce_features(reducer, test), *test.labels, classifier.k_neighbors);
        const double elapsed = ms_since(start);
        accuracy_sum += accuracy;
        time_sum += elapsed;
        report.records.push_back({method_name(spec.method), spec.d,
                                  spec.method == Method::Mpglram ? spec.k_pairs : 0, plan.K, fold,
                                  "accuracy", accuracy, spec.seed, elapsed,
                                  classifier.k_neighbors});
    }
    report.records.push_back({method_name(spec.method), spec.d,
                              spec.method == Method::Mpglram ? spec.k_pairs : 0, plan.K, -1,
                              "accuracy", accuracy_sum / plan.K, spec.seed, time_sum,
                              classifier.k_neighbors});
    return report;
}

namespace {

// everything computed for one d grid value; merged in configuration order
struct DCell {
    std::map<Method, double> rmsre_value;          // svd, glram
    std::map<std::size_t, double> mpglram_rmsre;   // by k
    std::map<Method, double> rmsre_time;
    std::map<std::size_t, double> mpglram_rmsre_time;
    // accuracy[(fold_count, method, k, knn)] -> per-fold values
    std::map<std::tuple<int, Method, std::size_t, int>, std::vector<FoldOutcome>> accuracy;
    std::vector<std::string> warnings;
};

// failed fits leave their slot empty; the failure is recorded as a warning and
// the sweep carries on with the remaining cells
struct ChainedModels {
    std::optional<FittedReducer> svd;
    std::optional<FittedReducer> glram;
    std::map<std::size_t, FittedReducer> mpglram;  // pairs-warm chained over ascending k
    std::vector<std::string> errors;
};

ChainedModels fit_all(const MatrixDataset& train, int d, const std::vector<Method>& methods,
                      const std::vector<std::size_t>& k_grid, std::uint64_t seed, int max_iter,
                      double tol, const std::string& context) {
    const bool want_svd = std::count(methods.begin(), methods.end(), Method::Svd) > 0;
    const bool want_glram = std::count(methods.begin(), methods.end(), Method::Glram) > 0;
    const bool want_mp = std::count(methods.begin(), methods.end(), Method::Mpglram) > 0;

    ChainedModels models;
    if (want_svd) {
        try {
            FittedReducer reducer;
            reducer.method = Method::Svd;
            reducer.svd = svd_fit(train, static_cast<Eigen::Index>(d) * d, false);
            models.svd = std::move(reducer);
        } catch (const std::exception& e) {
            models.errors.push_back("svd cell failed (" + context + "): " + e.what());
        }
    }
    if (want_glram || want_mp) {
        try {
            FitConfig config;
            config.k1 = d;
            config.k2 = d;
            config.max_iter = max_iter;
            config.tol = tol;
            config.seed = seed;
            FittedReducer reducer;
            reducer.method = Method::Glram;
            reducer.glram = glram_fit(train, config);
            models.glram = std::move(reducer);
        } catch (const std::exception& e) {
            models.errors.push_back("glram cell failed (" + context + "): " + e.what());
        }
    }
    if (want_mp && models.glram) {
        std::vector<std::size_t> ks = k_grid;
        std::sort(ks.begin(), ks.end());
        const KronPairList* previous = nullptr;
        for (std::size_t k : ks) {
            try {
                MpglramConfig config;
                config.k = k;
                config.k1 = d;
                config.k2 = d;
                config.outer_iters = max_iter;
                config.tol = tol;
                config.seed = Rng::derive(seed, 100 + k);
                config.init_mode = previous ? MpglramInit::PairsWarm : MpglramInit::GlramWarm;
                FittedReducer reducer;
                reducer.method = Method::Mpglram;
                reducer.mpglram = mpglram_fit(train, config, previous, &*models.glram->glram);
                previous =
                    &models.mpglram.emplace(k, std::move(reducer)).first->second.mpglram->pairs;
            } catch (const std::exception& e) {
                models.errors.push_back("mpglram cell failed (" + context + ", k=" +
                                        std::to_string(k) + "): " + e.what());
                break;  // the warm chain is broken past this k
            }
        }
    } else if (want_mp) {
        models.errors.push_back("mpglram cells skipped (" + context + "): glram base fit failed");
    }
    return models;
}

}  // namespace

EvalReport sweep(const MatrixDataset& dataset, const std::vector<Method>& methods,
                 const std::vector<int>& d_grid, const std::vector<std::size_t>& k_grid,
                 const std::vector<int>& fold_counts, const std::vector<int>& knn_grid,
                 std::uint64_t seed, int max_iter, double tol) {
    dataset.validate();
    if (methods.empty() || d_grid.empty()) throw std::invalid_argument("sweep: empty grid");
    const bool want_mp = std::count(methods.begin(), methods.end(), Method::Mpglram) > 0;
    if (want_mp && k_grid.empty()) throw std::invalid_argument("sweep: empty k grid for mpglram");
    if (!fold_counts.empty() && !dataset.labels)
        throw std::invalid_argument("sweep: accuracy requested but dataset has no labels");

    std::vector<std::size_t> ks = k_grid;
    std::sort(ks.begin(), ks.end());
    std::vector<int> knns = knn_grid.empty() ? std::vector<int>{1} : knn_grid;
    std::sort(knns.begin(), knns.end());

    // fold plans are shared across methods and d values
    std::map<int, FoldPlan> plans;
    for (int fc : fold_counts)
        plans.emplace(fc, kfold_split(dataset, fc, Rng::derive(seed, static_cast<std::uint64_t>(fc))));

    std::vector<DCell> cells(d_grid.size());
    run_tasks(d_grid.size(), [&](std::size_t di) {
        const int d = d_grid[di];
        DCell& cell = cells[di];
        const std::uint64_t d_seed = Rng::derive(seed, 1000 + static_cast<std::uint64_t>(d));

        // reconstruction error on the full dataset
        {
            const auto start = Clock::now();
            ChainedModels models =
                fit_all(dataset, d, methods, ks, d_seed, max_iter, tol,
                        "rmsre, d=" + std::to_string(d));
            cell.warnings.insert(cell.warnings.end(), models.errors.begin(), models.errors.end());
            double mark = ms_since(start);
            for (Method method : methods) {
                if (method == Method::Svd && models.svd) {
                    const auto t0 = Clock::now();
                    cell.rmsre_value[method] =
                        rmsre(dataset, svd_reconstruct(*models.svd->svd,
                                                       svd_project(*models.svd->svd, dataset)));
                    cell.rmsre_time[method] = mark + ms_since(t0);
                } else if (method == Method::Glram && models.glram) {
                    const auto t0 = Clock::now();
                    cell.rmsre_value[method] = rmsre(
                        dataset, glram_reconstruct(*models.glram->glram,
                                                   models.glram->glram->cores));
                    cell.rmsre_time[method] = mark + ms_since(t0);
                } else if (method == Method::Mpglram) {
                    for (std::size_t k : ks) {
                        const auto it = models.mpglram.find(k);
                        if (it == models.mpglram.end()) continue;
                        const auto t0 = Clock::now();
                        const MpglramModel& model = *it->second.mpglram;
                        std::vector<Eigen::MatrixXd> rebuilt;
                        rebuilt.reserve(dataset.size());
                        for (const auto& core : model.cores)
                            rebuilt.push_back(apply_pairs(model.pairs, core));
                        cell.mpglram_rmsre[k] = rmsre(dataset, rebuilt);
                        cell.mpglram_rmsre_time[k] = mark + ms_since(t0);
                        mark = 0.0;  // attribute the shared fit time once
                    }
                }
                if (method != Method::Mpglram) mark = 0.0;
            }
        }

        // k-fold accuracy
        for (const auto& [fc, plan] : plans) {
            for (int fold = 0; fold < fc; ++fold) {
                const auto start = Clock::now();
                const MatrixDataset train = subset(dataset, fold_indices(plan, fold, true));
                const MatrixDataset test = subset(dataset, fold_indices(plan, fold, false));
                warn_unseen_classes(train, test, fold, cell.warnings);
                const std::uint64_t fold_seed =
                    Rng::derive(d_seed, static_cast<std::uint64_t>(fc * 1000 + fold));
                ChainedModels models =
                    fit_all(train, d, methods, ks, fold_seed, max_iter, tol,
                            "d=" + std::to_string(d) + ", fold " + std::to_string(fold) + "/" +
                                std::to_string(fc));
                cell.warnings.insert(cell.warnings.end(), models.errors.begin(),
                                     models.errors.end());
                const double fit_time = ms_since(start);

                auto score = [&](const FittedReducer& reducer, std::size_t k) {
                    const auto features_start = Clock::now();
                    const auto train_features = reduce_features(reducer, train);
                    const auto test_features = reduce_features(reducer, test);
                    const double features_time = ms_since(features_start);
                    for (int knn : knns) {
                        const auto knn_start = Clock::now();
                        const double accuracy = score_fold(train_features, *train.labels,
                                                           test_features, *test.labels, knn);
                        cell.accuracy[{fc, reducer.method, k, knn}].push_back(
                            {accuracy, fit_time + features_time + ms_since(knn_start)});
                    }
                };
                for (Method method : methods) {
                    if (method == Method::Svd && models.svd)
                        score(*models.svd, 0);
                    else if (method == Method::Glram && models.glram)
                        score(*models.glram, 0);
                    else if (method == Method::Mpglram)
                        for (std::size_t k : ks) {
                            const auto it = models.mpglram.find(k);
                            if (it != models.mpglram.end()) score(it->second, k);
                        }
                }
            }
        }
    });

    // merge in configuration order: all rmsre records, then accuracy blocks;
    // cells whose fit failed were recorded as warnings and have no rows
    EvalReport report;
    for (Method method : methods)
        for (std::size_t di = 0; di < d_grid.size(); ++di) {
            const DCell& cell = cells[di];
            if (method == Method::Mpglram) {
                for (std::size_t k : ks) {
                    const auto it = cell.mpglram_rmsre.find(k);
                    if (it == cell.mpglram_rmsre.end()) continue;
                    report.records.push_back({method_name(method), d_grid[di], k, 0, -1, "rmsre",
                                              it->second, seed, cell.mpglram_rmsre_time.at(k), 1});
                }
            } else {
                const auto it = cell.rmsre_value.find(method);
                if (it == cell.rmsre_value.end()) continue;
                report.records.push_back({method_name(method), d_grid[di], 0, 0, -1, "rmsre",
                                          it->second, seed, cell.rmsre_time.at(method), 1});
            }
        }
    for (int fc : fold_counts)
        for (Method method : methods)
            for (std::size_t di = 0; di < d_grid.size(); ++di)
                for (std::size_t k : (method == Method::Mpglram ? ks
                                                                : std::vector<std::size_t>{0}))
                    for (int knn : knns) {
                        const auto it = cells[di].accuracy.find({fc, method, k, knn});
                        if (it == cells[di].accuracy.end()) continue;
                        const auto& outcomes = it->second;
                        double sum = 0.0;
                        double time_sum = 0.0;
                        for (std::size_t fold = 0; fold < outcomes.size(); ++fold) {
                            sum += outcomes[fold].accuracy;
                            time_sum += outcomes[fold].wall_time_ms;
                            report.records.push_back({method_name(method), d_grid[di], k, fc,
                                                      static_cast<int>(fold), "accuracy",
                                                      outcomes[fold].accuracy, seed,
                                                      outcomes[fold].wall_time_ms, knn});
                        }
                        report.records.push_back({method_name(method), d_grid[di], k, fc, -1,
                                                  "accuracy",
                                                  sum / static_cast<double>(outcomes.size()), seed,
                                                  time_sum, knn});
                    }
    for (const auto& cell : cells)
        report.warnings.insert(report.warnings.end(), cell.warnings.begin(), cell.warnings.end());
    return report;
}

namespace {

std::string format_value(const EvalRecord& record) {
    char buffer[40];
    if (record.metric == "accuracy")
        std::snprintf(buffer, sizeof(buffer), "%.2f", record.value);
    else
        std::snprintf(buffer, sizeof(buffer), "%.17g", record.value);
    return buffer;
}

std::string format_time(const EvalRecord& record, bool include_timing) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.3f", include_timing ? record.wall_time_ms : 0.0);
    return buffer;
}

}  // namespace

std::string report_to_csv(const EvalReport& report, bool include_timing) {
    std::string out = "method,d,k_pairs,fold_count,fold_index,metric,value,seed,wall_time_ms\n";
    for (const auto& r : report.records) {
        out += r.method;
        out += ',' + std::to_string(r.d);
        out += ',' + std::to_string(r.k_pairs);
        out += ',' + std::to_string(r.fold_count);
        out += ',' + std::to_string(r.fold_index);
        out += ',' + r.metric;
        out += ',' + format_value(r);
        out += ',' + std::to_string(r.seed);
        out += ',' + format_time(r, include_timing);
        out += '\n';
    }
    return out;
}

std::string report_to_json(const EvalReport& report, bool include_timing) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : report.records) {
        records.push_back({{"method", r.method},
                           {"d", r.d},
                           {"k_pairs", r.k_pairs},
                           {"fold_count", r.fold_count},
                           {"fold_index", r.fold_index},
                           {"metric", r.metric},
                           {"value", r.metric == "accuracy" ? round2(r.value) : r.value},
                           {"seed", r.seed},
                           {"wall_time_ms", include_timing ? r.wall_time_ms : 0.0}});
    }
    nlohmann::json doc{{"schema_version", 1},
                       {"aggregate", "mean_over_folds_single_run"},
                       {"records", std::move(records)},
                       {"warnings", report.warnings}};
    return doc.dump(2) + "\n";
}

void write_report(const EvalReport& report, const std::optional<std::string>& csv_path,
                  const std::optional<std::string>& json_path, bool include_timing) {
    if (csv_path) {
        std::ofstream out(*csv_path, std::ios::trunc);
        if (!out) throw DataError("cannot open file for writing: " + *csv_path);
        out << report_to_csv(report, include_timing);
    }
    if (json_path) {
        std::ofstream out(*json_path, std::ios::trunc);
        if (!out) throw DataError("cannot open file for writing: " + *json_path);
        out << report_to_json(report, include_timing);
    }
}

unsigned worker_count() {
    if (const char* env = std::getenv("KRONFOLD_THREADS")) {
        const long parsed = std::strtol(env, nullptr, 10);
        if (parsed > 0) return static_cast<unsigned>(parsed);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace kronfold

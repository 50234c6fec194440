// kronfold command line: dataset synthesis, model fitting, evaluation sweeps,
// and Kronecker-rank decomposition of stored projectors.

#include "kronfold/dataset.hpp"
#include "kronfold/eval.hpp"
#include "kronfold/glram.hpp"
#include "kronfold/kronecker.hpp"
#include "kronfold/model_io.hpp"
#include "kronfold/mpglram.hpp"
#include "kronfold/rng.hpp"
#include "kronfold/svd.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using kronfold::DataError;
using kronfold::NumericalError;
using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

// grid syntax: "a:b" inclusive range or comma list "a,b,c"
std::vector<long long> parse_grid(const std::string& text) {
    std::vector<long long> out;
    const auto colon = text.find(':');
    if (colon != std::string::npos) {
        const long long lo = std::stoll(text.substr(0, colon));
        const long long hi = std::stoll(text.substr(colon + 1));
        if (hi < lo) throw std::invalid_argument("grid range is empty: " + text);
        for (long long v = lo; v <= hi; ++v) out.push_back(v);
        return out;
    }
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const std::string item =
            text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (item.empty()) throw std::invalid_argument("empty grid item in: " + text);
        out.push_back(std::stoll(item));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (out.empty()) throw std::invalid_argument("empty grid: " + text);
    return out;
}

struct FitArgs {
    std::string method;
    std::string data;
    std::string out;
    long long k1 = 0, k2 = 0, d = 0;
    std::size_t k_pairs = 2;
    std::string init;
    std::string warm_model;
    int max_iter = 100;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    bool centered = false;
    double ridge = 0.0;
};

int run_fit(const FitArgs& args) {
    const kronfold::MatrixDataset dataset = kronfold::load_mds(args.data);
    const std::string fp = kronfold::fingerprint(dataset);

    json line;
    kronfold::ModelFile file;
    if (args.method == "svd") {
        if (args.d < 1) throw std::invalid_argument("svd requires --d >= 1");
        const kronfold::SvdModel model = kronfold::svd_fit(dataset, args.d, args.centered);
        file = kronfold::make_model_file(model, args.seed, fp);
        line = {{"method", "svd"}, {"objective", model.fit_error}, {"iterations", 1}};
    } else if (args.method == "glram") {
        if (args.k1 < 1 || args.k2 < 1) throw std::invalid_argument("glram requires --k1 and --k2");
        kronfold::FitConfig config;
        config.k1 = args.k1;
        config.k2 = args.k2;
        config.max_iter = args.max_iter;
        config.tol = args.tol;
        config.seed = args.seed;
        if (!args.init.empty()) {
            if (args.init == "identity-block")
                config.init_mode = kronfold::GlramInit::IdentityBlock;
            else if (args.init == "random-orthonormal")
                config.init_mode = kronfold::GlramInit::RandomOrthonormal;
            else
                throw std::invalid_argument("glram --init must be identity-block or random-orthonormal");
        }
        const kronfold::GlramModel model = kronfold::glram_fit(dataset, config);
        file = kronfold::make_model_file(model, args.seed, fp);
        line = {{"method", "glram"},
                {"objective", model.objective_history.back()},
                {"iterations", model.iterations}};
    } else if (args.method == "mpglram") {
        if (args.k1 < 1 || args.k2 < 1)
            throw std::invalid_argument("mpglram requires --k1 and --k2");
        kronfold::MpglramConfig config;
        config.k = args.k_pairs;
        config.k1 = args.k1;
        config.k2 = args.k2;
        config.outer_iters = args.max_iter;
        config.tol = args.tol;
        config.seed = args.seed;
        config.ridge_rel = args.ridge;
        kronfold::KronPairList warm;
        const kronfold::KronPairList* warm_ptr = nullptr;
        if (!args.init.empty()) {
            if (args.init == "glram-warm")
                config.init_mode = kronfold::MpglramInit::GlramWarm;
            else if (args.init == "random")
                config.init_mode = kronfold::MpglramInit::Random;
            else if (args.init == "pairs-warm")
                config.init_mode = kronfold::MpglramInit::PairsWarm;
            else
                throw std::invalid_argument(
                    "mpglram --init must be glram-warm, random, or pairs-warm");
        }
        if (config.init_mode == kronfold::MpglramInit::PairsWarm) {
            if (args.warm_model.empty())
                throw std::invalid_argument("pairs-warm init requires --warm-model");
            warm = kronfold::load_model(args.warm_model).pairs;
            warm_ptr = &warm;
        }
        const kronfold::MpglramModel model = kronfold::mpglram_fit(dataset, config, warm_ptr);
        file = kronfold::make_model_file(model, args.seed, fp);
        line = {{"method", "mpglram"},
                {"objective", model.objective_history.back()},
                {"iterations", model.sweeps}};
    } else {
        throw std::invalid_argument("--method must be svd, glram, or mpglram");
    }
    kronfold::save_model(file, args.out);
    line["out"] = args.out;
    std::cout << line.dump() << "\n";
    return 0;
}

struct EvalArgs {
    std::string data;
    std::string methods = "svd,glram,mpglram";
    std::string d_grid = "5:9";
    std::string k_grid = "2";
    std::string folds = "2,5,10";
    std::string knn = "1";
    std::uint64_t seed = 0;
    std::optional<std::string> out_csv;
    std::optional<std::string> out_json;
    int max_iter = 100;
    double tol = 1e-6;
    bool timing = false;
};

int run_eval(const EvalArgs& args) {
    const kronfold::MatrixDataset dataset = kronfold::load_mds(args.data);

    std::vector<kronfold::Method> methods;
    {
        std::size_t pos = 0;
        while (pos <= args.methods.size()) {
            const auto comma = args.methods.find(',', pos);
            const std::string name = args.methods.substr(
                pos, comma == std::string::npos ? std::string::npos : comma - pos);
            methods.push_back(kronfold::method_from_name(name));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }

    std::vector<int> d_grid, fold_counts, knn_grid;
    std::vector<std::size_t> k_grid;
    for (long long v : parse_grid(args.d_grid)) d_grid.push_back(static_cast<int>(v));
    for (long long v : parse_grid(args.k_grid)) k_grid.push_back(static_cast<std::size_t>(v));
    for (long long v : parse_grid(args.folds)) fold_counts.push_back(static_cast<int>(v));
    for (long long v : parse_grid(args.knn)) knn_grid.push_back(static_cast<int>(v));

    const kronfold::EvalReport report =
        kronfold::sweep(dataset, methods, d_grid, k_grid, fold_counts, knn_grid, args.seed,
                        args.max_iter, args.tol);
    kronfold::write_report(report, args.out_csv, args.out_json, args.timing);
    for (const auto& warning : report.warnings) std::cerr << "warning: " << warning << "\n";

    json line{{"records", report.records.size()}, {"warnings", report.warnings.size()}};
    if (args.out_csv) line["csv"] = *args.out_csv;
    if (args.out_json) line["json"] = *args.out_json;
    std::cout << line.dump() << "\n";
    return 0;
}

struct SynthArgs {
    kronfold::SyntheticSpec spec;
    std::string out;
    std::string truth_out;
};

int run_synth(const SynthArgs& args) {
    const kronfold::SyntheticData data = kronfold::synth_kron(args.spec);
    kronfold::save_mds(data.dataset, args.out);
    if (!args.truth_out.empty())
        kronfold::save_model(kronfold::make_model_file(data.pairs, args.spec.seed,
                                                       kronfold::fingerprint(data.dataset)),
                             args.truth_out);
    json line{{"fingerprint", kronfold::fingerprint(data.dataset)},
              {"n", data.dataset.size()},
              {"n1", data.dataset.n1},
              {"n2", data.dataset.n2},
              {"out", args.out}};
    std::cout << line.dump() << "\n";
    return 0;
}

struct DecomposeArgs {
    std::string model;
    std::vector<long long> block_dims;
    std::size_t max_pairs = 0;
    std::string out;
};

int run_decompose(const DecomposeArgs& args) {
    if (args.block_dims.size() != 4)
        throw std::invalid_argument("--block-dims expects four values: n1 k1 n2 k2");
    const kronfold::ModelFile file = kronfold::load_model(args.model);
    if (file.method != "svd") throw DataError("decompose expects an svd model file");
    const Eigen::Index n1 = args.block_dims[0], k1 = args.block_dims[1];
    const Eigen::Index n2 = args.block_dims[2], k2 = args.block_dims[3];
    const Eigen::MatrixXd& w = file.svd_w;
    if (n1 < 1 || k1 < 1 || n2 < 1 || k2 < 1 || w.rows() != n1 * n2 || w.cols() != k1 * k2)
        throw std::invalid_argument("block dims do not factor the stored projector");

    const std::optional<std::size_t> cap =
        args.max_pairs > 0 ? std::optional<std::size_t>(args.max_pairs) : std::nullopt;
    const kronfold::KronPairList pairs = kronfold::kron_rank_decompose(w, n1, k1, n2, k2, cap);
    const Eigen::VectorXd sigma = kronfold::kron_spectrum(w, n1, k1, n2, k2);

    Eigen::MatrixXd partial = Eigen::MatrixXd::Zero(w.rows(), w.cols());
    for (std::size_t j = 0; j < pairs.size(); ++j) {
        partial += kronfold::kron(pairs.pairs[j].L, pairs.pairs[j].R);
        json line{{"pair", j + 1},
                  {"sigma", j < static_cast<std::size_t>(sigma.size()) ? sigma(static_cast<Eigen::Index>(j)) : 0.0},
                  {"cumulative_residual", (w - partial).norm()}};
        std::cout << line.dump() << "\n";
    }
    if (!args.out.empty())
        kronfold::save_model(kronfold::make_model_file(pairs, file.seed, file.fingerprint),
                             args.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kronfold: low-rank matrix-collection reduction and evaluation"};
    app.require_subcommand(1);

    FitArgs fit;
    CLI::App* cmd_fit = app.add_subcommand("fit", "fit a reducer on an MDS1 dataset");
    cmd_fit->add_option("--method", fit.method, "svd | glram | mpglram")->required();
    cmd_fit->add_option("--data", fit.data, "MDS1 dataset path")->required();
    cmd_fit->add_option("--out", fit.out, "model file to write")->required();
    cmd_fit->add_option("--k1", fit.k1, "left reduction dim");
    cmd_fit->add_option("--k2", fit.k2, "right reduction dim");
    cmd_fit->add_option("--d", fit.d, "svd target dimension");
    cmd_fit->add_option("--k-pairs", fit.k_pairs, "mpglram pair count");
    cmd_fit->add_option("--init", fit.init, "initialization mode");
    cmd_fit->add_option("--warm-model", fit.warm_model, "model file for pairs-warm init");
    cmd_fit->add_option("--max-iter", fit.max_iter, "iteration / sweep cap");
    cmd_fit->add_option("--tol", fit.tol, "relative-decrease stop threshold");
    cmd_fit->add_option("--seed", fit.seed, "rng seed");
    cmd_fit->add_option("--ridge", fit.ridge, "relative ridge for mpglram solves");
    cmd_fit->add_flag("--centered", fit.centered, "center vectorized samples (svd)");

    EvalArgs eval;
    CLI::App* cmd_eval = app.add_subcommand("eval", "reconstruction + k-fold accuracy sweep");
    cmd_eval->add_option("--data", eval.data, "MDS1 dataset path")->required();
    cmd_eval->add_option("--methods", eval.methods, "comma list of svd,glram,mpglram");
    cmd_eval->add_option("--d-grid", eval.d_grid, "d values, a:b or comma list");
    cmd_eval->add_option("--k-grid", eval.k_grid, "mpglram pair counts, a:b or comma list");
    cmd_eval->add_option("--folds", eval.folds, "fold counts, comma list");
    cmd_eval->add_option("--knn", eval.knn, "neighbor counts, comma list");
    cmd_eval->add_option("--seed", eval.seed, "rng seed");
    std::string out_csv, out_json;
    cmd_eval->add_option("--out-csv", out_csv, "CSV report path");
    cmd_eval->add_option("--out-json", out_json, "JSON report path");
    cmd_eval->add_option("--max-iter", eval.max_iter, "iteration / sweep cap");
    cmd_eval->add_option("--tol", eval.tol, "relative-decrease stop threshold");
    cmd_eval->add_flag("--timing", eval.timing,
                       "emit measured wall times (breaks byte-reproducibility)");

    SynthArgs synth;
    CLI::App* cmd_synth = app.add_subcommand("synth", "generate a seeded synthetic dataset");
    long long s_n1 = 16, s_n2 = 16, s_n = 50, s_rank = 2, s_k1 = 4, s_k2 = 4, s_classes = 5;
    cmd_synth->add_option("--n1", s_n1, "sample rows");
    cmd_synth->add_option("--n2", s_n2, "sample cols");
    cmd_synth->add_option("--n", s_n, "sample count")->required();
    cmd_synth->add_option("--kron-rank", s_rank, "generating pair count");
    cmd_synth->add_option("--k1", s_k1, "core rows");
    cmd_synth->add_option("--k2", s_k2, "core cols");
    cmd_synth->add_option("--noise", synth.spec.noise_sigma, "additive gaussian sigma");
    cmd_synth->add_option("--classes", s_classes, "class count");
    cmd_synth->add_option("--seed", synth.spec.seed, "rng seed");
    cmd_synth->add_option("--out", synth.out, "MDS1 path to write")->required();
    cmd_synth->add_option("--truth-out", synth.truth_out, "write generating pairs as a model file");

    DecomposeArgs decompose;
    CLI::App* cmd_decompose =
        app.add_subcommand("decompose", "Kronecker-rank decomposition of a stored projector");
    cmd_decompose->add_option("--model", decompose.model, "svd model file")->required();
    cmd_decompose->add_option("--block-dims", decompose.block_dims, "n1 k1 n2 k2")
        ->expected(4)
        ->required();
    cmd_decompose->add_option("--max-pairs", decompose.max_pairs, "truncate to leading pairs");
    cmd_decompose->add_option("--out", decompose.out, "write pairs as a model file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (cmd_fit->parsed()) return run_fit(fit);
        if (cmd_eval->parsed()) {
            if (!out_csv.empty()) eval.out_csv = out_csv;
            if (!out_json.empty()) eval.out_json = out_json;
            return run_eval(eval);
        }
        if (cmd_synth->parsed()) {
            synth.spec.n1 = s_n1;
            synth.spec.n2 = s_n2;
            synth.spec.N = static_cast<std::size_t>(s_n);
            synth.spec.kron_rank = static_cast<std::size_t>(s_rank);
            synth.spec.k1 = s_k1;
            synth.spec.k2 = s_k2;
            synth.spec.class_count = static_cast<std::uint32_t>(s_classes);
            return run_synth(synth);
        }
        if (cmd_decompose->parsed()) return run_decompose(decompose);
        std::cerr << "no subcommand given\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
}

#include "kronfold/model_io.hpp"

#include "kronfold/dataset.hpp"

#include <json.hpp>

#include <fstream>

namespace kronfold {

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
    return out;
}

Eigen::MatrixXd matrix_from_json(const json& arr, Eigen::Index rows, Eigen::Index cols,
                                 const char* what) {
    if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != rows * cols)
        throw DataError(std::string("model: array length mismatch for ") + what);
    Eigen::MatrixXd m(rows, cols);
    std::size_t idx = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = arr[idx++].get<double>();
    return m;
}

ModelFile base_file(const std::string& method, std::uint64_t seed,
                    const std::string& fingerprint) {
    ModelFile file;
    file.method = method;
    file.seed = seed;
    file.fingerprint = fingerprint;
    return file;
}

}  // namespace

ModelFile make_model_file(const SvdModel& model, std::uint64_t seed,
                          const std::string& fingerprint) {
    ModelFile file = base_file("svd", seed, fingerprint);
    file.n1 = model.n1;
    file.n2 = model.n2;
    file.d = model.W.cols();
    file.centered = model.mean.has_value();
    file.svd_w = model.W;
    if (model.mean) file.mean = *model.mean;
    file.singular_values.assign(model.singular_values.data(),
                                model.singular_values.data() + model.singular_values.size());
    return file;
}

ModelFile make_model_file(const GlramModel& model, std::uint64_t seed,
                          const std::string& fingerprint) {
    ModelFile file = base_file("glram", seed, fingerprint);
    file.n1 = model.L.rows();
    file.n2 = model.R.rows();
    file.k1 = model.L.cols();
    file.k2 = model.R.cols();
    file.d = file.k1 * file.k2;
    file.L = model.L;
    file.R = model.R;
    file.objective_history = model.objective_history;
    return file;
}

ModelFile make_model_file(const MpglramModel& model, std::uint64_t seed,
                          const std::string& fingerprint) {
    ModelFile file = base_file("mpglram", seed, fingerprint);
    file.n1 = model.pairs.n1;
    file.n2 = model.pairs.n2;
    file.k1 = model.pairs.k1;
    file.k2 = model.pairs.k2;
    file.k_pairs = model.pairs.size();
    file.d = file.k1 * file.k2;
    file.pairs = model.pairs;
    file.objective_history = model.objective_history;
    return file;
}

ModelFile make_model_file(const KronPairList& pairs, std::uint64_t seed,
                          const std::string& fingerprint) {
    ModelFile file = base_file("kron-pairs", seed, fingerprint);
    file.n1 = pairs.n1;
    file.n2 = pairs.n2;
    file.k1 = pairs.k1;
    file.k2 = pairs.k2;
    file.k_pairs = pairs.size();
    file.d = file.k1 * file.k2;
    file.pairs = pairs;
    return file;
}

void save_model(const ModelFile& model, const std::filesystem::path& path) {
    json doc;
    doc["schema_version"] = model.schema_version;
    doc["method"] = model.method;
    doc["dims"] = {{"n1", model.n1}, {"n2", model.n2}, {"k1", model.k1}, {"k2", model.k2},
                   {"k_pairs", model.k_pairs}, {"d", model.d}};
    doc["flags"] = {{"centered", model.centered}};
    doc["seed"] = model.seed;
    doc["fingerprint"] = model.fingerprint;

    json factors;
    if (model.method == "svd") {
        factors["W"] = matrix_to_json(model.svd_w);
        if (model.centered) doc["mean"] = matrix_to_json(model.mean);
        doc["singular_values"] = model.singular_values;
    } else if (model.method == "glram") {
        factors["L"] = matrix_to_json(model.L);
        factors["R"] = matrix_to_json(model.R);
        doc["objective_history"] = model.objective_history;
    } else if (model.method == "mpglram" || model.method == "kron-pairs") {
        json pairs = json::array();
        for (const auto& p : model.pairs.pairs)
            pairs.push_back({{"L", matrix_to_json(p.L)}, {"R", matrix_to_json(p.R)}});
        factors["pairs"] = std::move(pairs);
        if (model.method == "mpglram") doc["objective_history"] = model.objective_history;
    } else {
        throw std::invalid_argument("save_model: unknown method tag " + model.method);
    }
    doc["factors"] = std::move(factors);

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open file for writing: " + path.string());
    out << doc.dump(2) << "\n";
    if (!out) throw DataError("write failed: " + path.string());
}

ModelFile load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError("model: invalid JSON in " + path.string() + ": " + e.what());
    }
    try {
        ModelFile file;
        file.schema_version = doc.at("schema_version").get<int>();
        if (file.schema_version != 1) throw DataError("model: unsupported schema_version");
        file.method = doc.at("method").get<std::string>();
        const json& dims = doc.at("dims");
        file.n1 = dims.at("n1").get<Eigen::Index>();
        file.n2 = dims.at("n2").get<Eigen::Index>();
        file.k1 = dims.at("k1").get<Eigen::Index>();
        file.k2 = dims.at("k2").get<Eigen::Index>();
        file.k_pairs = dims.at("k_pairs").get<std::size_t>();
        file.d = dims.at("d").get<Eigen::Index>();
        file.centered = doc.at("flags").at("centered").get<bool>();
        file.seed = doc.at("seed").get<std::uint64_t>();
        file.fingerprint = doc.at("fingerprint").get<std::string>();

        const json& factors = doc.at("factors");
        if (file.method == "svd") {
            file.svd_w = matrix_from_json(factors.at("W"), file.n1 * file.n2, file.d, "W");
            if (file.centered)
                file.mean = matrix_from_json(doc.at("mean"), file.n1 * file.n2, 1, "mean");
            file.singular_values = doc.at("singular_values").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(file.singular_values.size()) != file.d)
                throw DataError("model: singular value count differs from d");
        } else if (file.method == "glram") {
            file.L = matrix_from_json(factors.at("L"), file.n1, file.k1, "L");
            file.R = matrix_from_json(factors.at("R"), file.n2, file.k2, "R");
            file.objective_history = doc.at("objective_history").get<std::vector<double>>();
        } else if (file.method == "mpglram" || file.method == "kron-pairs") {
            const json& pairs = factors.at("pairs");
            if (!pairs.is_array() || pairs.size() != file.k_pairs)
                throw DataError("model: pair count differs from k_pairs");
            file.pairs.n1 = file.n1;
            file.pairs.n2 = file.n2;
            file.pairs.k1 = file.k1;
            file.pairs.k2 = file.k2;
            for (const auto& p : pairs)
                file.pairs.pairs.push_back({matrix_from_json(p.at("L"), file.n1, file.k1, "pair L"),
                                            matrix_from_json(p.at("R"), file.n2, file.k2,
                                                             "pair R")});
            if (file.method == "mpglram")
                file.objective_history = doc.at("objective_history").get<std::vector<double>>();
        } else {
            throw DataError("model: unknown method tag " + file.method);
        }
        return file;
    } catch (const json::exception& e) {
        throw DataError("model: missing or mistyped field in " + path.string() + ": " + e.what());
    }
}

SvdModel to_svd_model(const ModelFile& file) {
    if (file.method != "svd") throw DataError("model: expected an svd model file");
    SvdModel model;
    model.n1 = file.n1;
    model.n2 = file.n2;
    model.W = file.svd_w;
    if (file.centered) model.mean = file.mean;
    model.singular_values =
        Eigen::Map<const Eigen::VectorXd>(file.singular_values.data(),
                                          static_cast<Eigen::Index>(file.singular_values.size()));
    return model;
}

GlramModel to_glram_model(const ModelFile& file) {
    if (file.method != "glram") throw DataError("model: expected a glram model file");
    GlramModel model;
    model.L = file.L;
    model.R = file.R;
    model.objective_history = file.objective_history;
    model.iterations = static_cast<int>(file.objective_history.size());
    return model;
}

MpglramModel to_mpglram_model(const ModelFile& file) {
    if (file.method != "mpglram" && file.method != "kron-pairs")
        throw DataError("model: expected an mpglram or kron-pairs model file");
    MpglramModel model;
    model.pairs = file.pairs;
    model.objective_history = file.objective_history;
    model.config.k = file.k_pairs;
    model.config.k1 = file.k1;
    model.config.k2 = file.k2;
    model.config.seed = file.seed;
    return model;
}

}  // namespace kronfold

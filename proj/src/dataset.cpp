#include "kronfold/dataset.hpp"

#include "kronfold/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace kronfold {

namespace {

void put_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

void put_f64le(std::vector<unsigned char>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int shift = 0; shift < 64; shift += 8)
        out.push_back(static_cast<unsigned char>((bits >> shift) & 0xff));
}

class ByteReader {
public:
    ByteReader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

    std::uint32_t u32le() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | data_[pos_ + static_cast<std::size_t>(i)];
        pos_ += 4;
        return v;
    }

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }

    double f64le() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 7; i >= 0; --i) bits = (bits << 8) | data_[pos_ + static_cast<std::size_t>(i)];
        pos_ += 8;
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    std::size_t remaining() const { return size_ - pos_; }

private:
    void need(std::size_t n) const {
        if (size_ - pos_ < n) throw DataError("mds: truncated payload");
    }

    const unsigned char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

}  // namespace

void MatrixDataset::validate() const {
    if (samples.empty() || n1 < 1 || n2 < 1)
        throw std::invalid_argument("dataset: N, n1, n2 must all be at least 1");
    for (const auto& a : samples)
        if (a.rows() != n1 || a.cols() != n2)
            throw std::invalid_argument("dataset: sample shape deviates from n1 x n2");
    if (labels) {
        if (labels->size() != samples.size())
            throw std::invalid_argument("dataset: label count differs from sample count");
        if (!class_count) throw std::invalid_argument("dataset: labels present without class_count");
        for (std::uint32_t label : *labels)
            if (label >= *class_count)
                throw std::invalid_argument("dataset: label index >= class_count");
    }
}

std::vector<unsigned char> encode_mds(const MatrixDataset& dataset) {
    dataset.validate();
    std::vector<unsigned char> out;
    const std::size_t n = dataset.size();
    out.reserve(17 + n * static_cast<std::size_t>(dataset.n1 * dataset.n2) * 8);
    for (char c : {'M', 'D', 'S', '1'}) out.push_back(static_cast<unsigned char>(c));
    put_u32le(out, static_cast<std::uint32_t>(n));
    put_u32le(out, static_cast<std::uint32_t>(dataset.n1));
    put_u32le(out, static_cast<std::uint32_t>(dataset.n2));
    out.push_back(dataset.labels ? 1 : 0);
    if (dataset.labels) {
        put_u32le(out, *dataset.class_count);
        for (std::uint32_t label : *dataset.labels) put_u32le(out, label);
    }
    // each sample row-major
    for (const auto& a : dataset.samples)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < a.cols(); ++j) put_f64le(out, a(i, j));
    return out;
}

void save_mds(const MatrixDataset& dataset, const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = encode_mds(dataset);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open file for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + path.string());
}

MatrixDataset load_mds(const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = read_file(path);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "MDS1", 4) != 0)
        throw DataError("mds: bad magic");
    ByteReader reader(bytes.data() + 4, bytes.size() - 4);

    MatrixDataset ds;
    const std::uint32_t n = reader.u32le();
    ds.n1 = static_cast<Eigen::Index>(reader.u32le());
    ds.n2 = static_cast<Eigen::Index>(reader.u32le());
    if (n < 1 || ds.n1 < 1 || ds.n2 < 1) throw DataError("mds: zero dimension in header");

    const std::uint8_t flag = reader.u8();
    if (flag > 1) throw DataError("mds: invalid label flag");
    if (flag == 1) {
        const std::uint32_t classes = reader.u32le();
        std::vector<std::uint32_t> labels(n);
        for (auto& label : labels) {
            label = reader.u32le();
            if (label >= classes) throw DataError("mds: label index >= class_count");
        }
        ds.class_count = classes;
        ds.labels = std::move(labels);
    }

    ds.samples.reserve(n);
    for (std::uint32_t s = 0; s < n; ++s) {
        Eigen::MatrixXd a(ds.n1, ds.n2);
        for (Eigen::Index i = 0; i < ds.n1; ++i)
            for (Eigen::Index j = 0; j < ds.n2; ++j) a(i, j) = reader.f64le();
        ds.samples.push_back(std::move(a));
    }
    if (reader.remaining() != 0) throw DataError("mds: trailing bytes after payload");
    return ds;
}

std::string fingerprint(const MatrixDataset& dataset) {
    const std::vector<unsigned char> bytes = encode_mds(dataset);
    const std::uint64_t h = fnv1a64(bytes.data(), bytes.size());
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 0; i < 16; ++i) out[static_cast<std::size_t>(15 - i)] = hex[(h >> (4 * i)) & 0xf];
    return out;
}

namespace {

// PGM header tokens, skipping whitespace and '#' comment lines
struct PgmTokenizer {
    explicit PgmTokenizer(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

    std::string next() {
        for (;;) {
            while (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) ++pos_;
            if (pos_ < bytes_.size() && bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
                continue;
            }
            break;
        }
        std::string token;
        while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]))
            token.push_back(static_cast<char>(bytes_[pos_++]));
        if (token.empty()) throw DataError("pgm: malformed header (unexpected end of file)");
        return token;
    }

    unsigned next_uint(const char* what) {
        const std::string token = next();
        for (char c : token)
            if (!std::isdigit(static_cast<unsigned char>(c)))
                throw DataError(std::string("pgm: malformed header (") + what + ")");
        return static_cast<unsigned>(std::stoul(token));
    }

    std::size_t pos() const { return pos_; }

    const std::vector<unsigned char>& bytes_;
    std::size_t pos_ = 0;
};

Eigen::MatrixXd load_pgm(const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = read_file(path);
    PgmTokenizer tok(bytes);
    const std::string magic = tok.next();
    if (magic != "P2" && magic != "P5") throw DataError("pgm: malformed header (magic)");
    const unsigned width = tok.next_uint("width");
    const unsigned height = tok.next_uint("height");
    const unsigned maxval = tok.next_uint("maxval");
    if (width == 0 || height == 0) throw DataError("pgm: zero image dimension");
    if (maxval == 0 || maxval > 65535) throw DataError("pgm: maxval out of range");

    Eigen::MatrixXd image(height, width);
    if (magic == "P2") {
        for (unsigned i = 0; i < height; ++i)
            for (unsigned j = 0; j < width; ++j) {
                const unsigned v = tok.next_uint("pixel");
                if (v > maxval) throw DataError("pgm: pixel exceeds maxval");
                image(i, j) = static_cast<double>(v) / maxval;
            }
    } else {
        std::size_t pos = tok.pos();
        if (pos >= bytes.size()) throw DataError("pgm: truncated pixel data");
        ++pos;  // single whitespace after maxval
        const unsigned bytes_per = maxval > 255 ? 2 : 1;
        if (bytes.size() - pos < static_cast<std::size_t>(width) * height * bytes_per)
            throw DataError("pgm: truncated pixel data");
        for (unsigned i = 0; i < height; ++i)
            for (unsigned j = 0; j < width; ++j) {
                unsigned v = bytes[pos++];
                if (bytes_per == 2) v = (v << 8) | bytes[pos++];  // 16-bit is big-endian
                if (v > maxval) throw DataError("pgm: pixel exceeds maxval");
                image(i, j) = static_cast<double>(v) / maxval;
            }
    }
    return image;
}

}  // namespace

void save_pgm(const Eigen::MatrixXd& image, const std::filesystem::path& path, unsigned maxval,
              bool binary) {
    if (maxval == 0 || maxval > 65535) throw std::invalid_argument("save_pgm: maxval out of range");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open file for writing: " + path.string());
    out << (binary ? "P5" : "P2") << "\n" << image.cols() << " " << image.rows() << "\n"
        << maxval << "\n";
    for (Eigen::Index i = 0; i < image.rows(); ++i)
        for (Eigen::Index j = 0; j < image.cols(); ++j) {
            const double clamped = std::clamp(image(i, j), 0.0, 1.0);
            const unsigned v = static_cast<unsigned>(std::lround(clamped * maxval));
            if (binary) {
                if (maxval > 255) out.put(static_cast<char>((v >> 8) & 0xff));
                out.put(static_cast<char>(v & 0xff));
            } else {
                out << v << (j + 1 == image.cols() ? "\n" : " ");
            }
        }
    if (!out) throw DataError("write failed: " + path.string());
}

MatrixDataset load_pgm_dir(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    if (files.empty()) throw DataError("pgm: directory holds no files: " + dir.string());
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.filename() < b.filename(); });

    MatrixDataset ds;
    std::vector<long> tags;
    for (const auto& file : files) {
        Eigen::MatrixXd image = load_pgm(file);
        if (ds.samples.empty()) {
            ds.n1 = image.rows();
            ds.n2 = image.cols();
        } else if (image.rows() != ds.n1 || image.cols() != ds.n2) {
            throw DataError("pgm: mixed image dimensions in " + dir.string());
        }
        const std::string name = file.filename().string();
        const std::size_t underscore = name.find('_');
        const std::string prefix = name.substr(0, underscore);
        if (prefix.empty() || !std::all_of(prefix.begin(), prefix.end(), [](unsigned char c) {
                return std::isdigit(c);
            }))
            throw DataError("pgm: unparsable label prefix in filename: " + name);
        tags.push_back(std::stol(prefix));
        ds.samples.push_back(std::move(image));
    }

    // remap tags to dense class ids in ascending tag order
    std::map<long, std::uint32_t> dense;
    for (long tag : tags) dense.emplace(tag, 0);
    std::uint32_t next_id = 0;
    for (auto& [tag, id] : dense) id = next_id++;
    std::vector<std::uint32_t> labels;
    labels.reserve(tags.size());
    for (long tag : tags) labels.push_back(dense.at(tag));
    ds.labels = std::move(labels);
    ds.class_count = next_id;
    ds.validate();
    return ds;
}

std::pair<MatrixDataset, Eigen::MatrixXd> center(const MatrixDataset& dataset) {
    dataset.validate();
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(dataset.n1, dataset.n2);
    for (const auto& a : dataset.samples) mean += a;
    mean /= static_cast<double>(dataset.size());
    MatrixDataset out = dataset;
    for (auto& a : out.samples) a -= mean;
    return {std::move(out), std::move(mean)};
}

FoldPlan kfold_split(const MatrixDataset& dataset, int K, std::uint64_t seed) {
    dataset.validate();
    if (!dataset.labels) throw std::invalid_argument("kfold_split: labels required");
    if (K < 2) throw std::invalid_argument("kfold_split: K must be at least 2");
    if (static_cast<std::size_t>(K) > dataset.size())
        throw std::invalid_argument("kfold_split: K exceeds sample count");

    std::vector<std::vector<std::size_t>> members(*dataset.class_count);
    for (std::size_t i = 0; i < dataset.size(); ++i) members[(*dataset.labels)[i]].push_back(i);

    FoldPlan plan;
    plan.K = K;
    plan.assignment.assign(dataset.size(), 0);
    Rng rng(Rng::derive(seed, 0x6b666f6c64ull));  // "kfold"
    int cursor = 0;  // global, so overall fold sizes stay within one of each other
    for (auto& group : members) {
        rng.shuffle(group);
        for (std::size_t idx : group) {
            plan.assignment[idx] = cursor;
            cursor = (cursor + 1) % K;
        }
    }
    return plan;
}

SyntheticData synth_kron(const SyntheticSpec& spec) {
    if (spec.kron_rank < 1) throw std::invalid_argument("synth_kron: kron_rank must be >= 1");
    if (spec.N < 1 || spec.n1 < 1 || spec.n2 < 1)
        throw std::invalid_argument("synth_kron: N, n1, n2 must all be at least 1");
    if (spec.k1 < 1 || spec.k1 > spec.n1 || spec.k2 < 1 || spec.k2 > spec.n2)
        throw std::invalid_argument("synth_kron: core dims must lie in [1, (n1, n2)]");
    if (spec.class_count < 1) throw std::invalid_argument("synth_kron: class_count must be >= 1");

    SyntheticData out;
    out.pairs.n1 = spec.n1;
    out.pairs.n2 = spec.n2;
    out.pairs.k1 = spec.k1;
    out.pairs.k2 = spec.k2;

    Rng factor_rng(Rng::derive(spec.seed, 1));
    for (std::size_t j = 0; j < spec.kron_rank; ++j) {
        const Eigen::MatrixXd gl = factor_rng.gaussian_matrix(spec.n1, spec.k1);
        const Eigen::MatrixXd gr = factor_rng.gaussian_matrix(spec.n2, spec.k2);
        Eigen::HouseholderQR<Eigen::MatrixXd> ql(gl), qr(gr);
        out.pairs.pairs.push_back(
            {ql.householderQ() * Eigen::MatrixXd::Identity(spec.n1, spec.k1),
             qr.householderQ() * Eigen::MatrixXd::Identity(spec.n2, spec.k2)});
    }

    Rng class_rng(Rng::derive(spec.seed, 2));
    std::vector<Eigen::MatrixXd> class_means;
    class_means.reserve(spec.class_count);
    for (std::uint32_t c = 0; c < spec.class_count; ++c)
        class_means.push_back(3.0 * class_rng.gaussian_matrix(spec.k1, spec.k2));

    Rng core_rng(Rng::derive(spec.seed, 3));
    Rng noise_rng(Rng::derive(spec.seed, 4));
    MatrixDataset& ds = out.dataset;
    ds.n1 = spec.n1;
    ds.n2 = spec.n2;
    std::vector<std::uint32_t> labels;
    for (std::size_t i = 0; i < spec.N; ++i) {
        const std::uint32_t label = static_cast<std::uint32_t>(i % spec.class_count);
        labels.push_back(label);
        Eigen::MatrixXd core = class_means[label] + core_rng.gaussian_matrix(spec.k1, spec.k2);
        Eigen::MatrixXd sample = apply_pairs(out.pairs, core);
        if (spec.noise_sigma > 0.0)
            sample += spec.noise_sigma * noise_rng.gaussian_matrix(spec.n1, spec.n2);
        out.cores.push_back(std::move(core));
        ds.samples.push_back(std::move(sample));
    }
    ds.labels = std::move(labels);
    ds.class_count = spec.class_count;
    return out;
}

}  // namespace kronfold

#pragma once

// Synthetic dataset generation, CSV ingestion, train/test splitting and
// batching.
//
// CSV format: header `f0,...,f{D-1},clean_label[,noisy_label]`, UTF-8,
// '\n' line endings, features printed with enough digits to round-trip
// exactly.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nlab/common.hpp"

namespace nlab::data {

struct Dataset {
    Eigen::MatrixXd features;                       // N x D
    std::vector<int> clean_labels;                  // N, values in [0, num_classes)
    std::optional<std::vector<int>> noisy_labels;   // N when present
    int num_classes = 0;
    std::map<std::string, std::string> metadata;    // provenance (free-form)

    Eigen::Index n() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }

    void validate() const {
        require(n() >= 1, "Dataset: N must be >= 1");
        require(dim() >= 1, "Dataset: feature dimension must be >= 1");
        require(num_classes >= 2, "Dataset: num_classes must be >= 2");
        require(static_cast<Eigen::Index>(clean_labels.size()) == n(),
                "Dataset: clean_labels length must equal feature row count");
        for (int y : clean_labels)
            require(y >= 0 && y < num_classes, "Dataset: clean label out of range [0, num_classes)");
        if (noisy_labels) {
            require(static_cast<Eigen::Index>(noisy_labels->size()) == n(),
                    "Dataset: noisy_labels length must equal feature row count");
            for (int y : *noisy_labels)
                require(y >= 0 && y < num_classes, "Dataset: noisy label out of range [0, num_classes)");
        }
    }

    // Row-subset copy preserving column structure and label alignment.
    Dataset select(const std::vector<std::size_t>& idx) const {
        Dataset out;
        out.features.resize(static_cast<Eigen::Index>(idx.size()), dim());
        out.clean_labels.resize(idx.size());
        if (noisy_labels) out.noisy_labels.emplace(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            out.features.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(idx[r]));
            out.clean_labels[r] = clean_labels[idx[r]];
            if (noisy_labels) (*out.noisy_labels)[r] = (*noisy_labels)[idx[r]];
        }
        out.num_classes = num_classes;
        out.metadata = metadata;
        return out;
    }
};

struct GaussianMixtureSpec {
    Eigen::MatrixXd means;        // K x D, one row per class
    double shared_cov_scale = 1;  // sigma^2, isotropic covariance sigma^2 * I
    Eigen::VectorXd class_priors; // length K, simplex
    std::size_t n_samples = 0;

    void validate() const {
        require(means.rows() >= 2, "GaussianMixtureSpec: need at least 2 classes");
        require(means.cols() >= 1, "GaussianMixtureSpec: feature dimension must be >= 1");
        require(shared_cov_scale > 0.0, "GaussianMixtureSpec: shared_cov_scale must be > 0");
        require(class_priors.size() == means.rows(),
                "GaussianMixtureSpec: class_priors length must equal number of classes");
        double sum = 0.0;
        for (Eigen::Index i = 0; i < class_priors.size(); ++i) {
            require(class_priors[i] >= 0.0, "GaussianMixtureSpec: class prior must be >= 0");
            sum += class_priors[i];
        }
        require(std::abs(sum - 1.0) <= 1e-12, "GaussianMixtureSpec: class_priors must sum to 1 within 1e-12");
        require(n_samples >= 1, "GaussianMixtureSpec: n_samples must be >= 1");
    }
};

inline Dataset generate_gaussian_mixture(const GaussianMixtureSpec& spec, std::uint64_t seed) {
    spec.validate();
    const int k = static_cast<int>(spec.means.rows());
    const Eigen::Index d = spec.means.cols();
    const double sigma = std::sqrt(spec.shared_cov_scale);

    std::vector<double> priors(spec.class_priors.data(), spec.class_priors.data() + k);
    Rng rng(seed);

    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(spec.n_samples), d);
    ds.clean_labels.resize(spec.n_samples);
    ds.num_classes = k;
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
        const int y = static_cast<int>(rng.categorical(priors));
        ds.clean_labels[i] = y;
        for (Eigen::Index j = 0; j < d; ++j)
            ds.features(static_cast<Eigen::Index>(i), j) = spec.means(y, j) + sigma * rng.normal();
    }
    ds.metadata["source"] = "gaussian_mixture";
    return ds;
}

inline void save_csv_dataset(const Dataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    for (Eigen::Index j = 0; j < ds.dim(); ++j) out << "f" << j << ",";
    out << "clean_label";
    if (ds.noisy_labels) out << ",noisy_label";
    out << "\n";
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        for (Eigen::Index j = 0; j < ds.dim(); ++j) out << fmt_g17(ds.features(i, j)) << ",";
        out << ds.clean_labels[static_cast<std::size_t>(i)];
        if (ds.noisy_labels) out << "," << (*ds.noisy_labels)[static_cast<std::size_t>(i)];
        out << "\n";
    }
    if (!out) throw io_error("write failed: " + path);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_feature(const std::string& tok, std::size_t line_no, const std::string& path) {
    try {
        std::size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw validation_error(path + ":" + std::to_string(line_no) + ": non-numeric feature value '" + tok + "'");
    }
}

inline int parse_label(const std::string& tok, std::size_t line_no, const std::string& path) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(tok, &pos);
        if (pos != tok.size() || v < 0) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw validation_error(path + ":" + std::to_string(line_no) + ": bad label '" + tok + "'");
    }
}

}  // namespace detail

// Loads a dataset CSV. When `forced_num_classes` is 0, K is inferred as
// 1 + the maximum label seen; otherwise any label >= forced_num_classes is
// rejected with its line number.
inline Dataset load_csv_dataset(const std::string& path, bool has_noisy_column,
                                int forced_num_classes = 0) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open for reading: " + path);

    std::string line;
    if (!std::getline(in, line)) throw validation_error(path + ": empty file, expected header row");
    const auto header = detail::split_csv_line(line);
    const std::size_t want = has_noisy_column ? 2 : 1;
    require(header.size() >= want + 1, path + ": header has too few columns");
    const std::size_t d = header.size() - want;
    for (std::size_t j = 0; j < d; ++j)
        require(header[j] == "f" + std::to_string(j),
                path + ": expected header column 'f" + std::to_string(j) + "', got '" + header[j] + "'");
    require(header[d] == "clean_label", path + ": expected 'clean_label' column after features");
    if (has_noisy_column)
        require(header[d + 1] == "noisy_label", path + ": expected 'noisy_label' as final column");

    Dataset ds;
    std::vector<double> feats;
    std::vector<int> clean, noisy;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tok = detail::split_csv_line(line);
        if (tok.size() != header.size())
            throw validation_error(path + ":" + std::to_string(line_no) + ": expected " +
                                   std::to_string(header.size()) + " fields, got " + std::to_string(tok.size()));
        for (std::size_t j = 0; j < d; ++j) feats.push_back(detail::parse_feature(tok[j], line_no, path));
        const int y = detail::parse_label(tok[d], line_no, path);
        if (forced_num_classes > 0 && y >= forced_num_classes)
            throw validation_error(path + ":" + std::to_string(line_no) + ": label " + std::to_string(y) +
                                   " out of range for num_classes=" + std::to_string(forced_num_classes));
        clean.push_back(y);
        if (has_noisy_column) {
            const int yn = detail::parse_label(tok[d + 1], line_no, path);
            if (forced_num_classes > 0 && yn >= forced_num_classes)
                throw validation_error(path + ":" + std::to_string(line_no) + ": noisy label " + std::to_string(yn) +
                                       " out of range for num_classes=" + std::to_string(forced_num_classes));
            noisy.push_back(yn);
        }
    }
    const std::size_t n = clean.size();
    require(n >= 1, path + ": no data rows");

    ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = feats[i * d + j];
    ds.clean_labels = std::move(clean);
    if (has_noisy_column) ds.noisy_labels = std::move(noisy);

    if (forced_num_classes > 0) {
        ds.num_classes = forced_num_classes;
    } else {
        int max_label = 1;  // keep K >= 2 even for single-class files
        for (int y : ds.clean_labels) max_label = std::max(max_label, y);
        if (ds.noisy_labels)
            for (int y : *ds.noisy_labels) max_label = std::max(max_label, y);
        ds.num_classes = max_label + 1;
    }
    ds.validate();
    return ds;
}

// Disjoint (train, test) partition, shuffled by seed.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    ds.validate();
    require(test_fraction > 0.0 && test_fraction < 1.0, "split: test_fraction must lie in (0,1)");
    const auto n = static_cast<std::size_t>(ds.n());
    require(static_cast<double>(n) * test_fraction >= 1.0, "split: test split would be empty");
    auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    n_test = std::min(std::max<std::size_t>(n_test, 1), n - 1);

    Rng rng(seed);
    const auto perm = rng.permutation(n);
    std::vector<std::size_t> test_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
    return {ds.select(train_idx), ds.select(test_idx)};
}

// Random permutation partitioned into batches; a trailing batch smaller
// than 2 is dropped because the pairwise losses are undefined on singletons.
inline std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size, std::uint64_t seed) {
    require(batch_size >= 2, "batches: batch_size must be >= 2");
    Rng rng(seed);
    const auto perm = rng.permutation(n);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t stop = std::min(start + batch_size, n);
        if (stop - start < 2) break;
        out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    return out;
}

inline std::vector<std::vector<std::size_t>> batches(const Dataset& ds, std::size_t batch_size,
                                                     std::uint64_t seed) {
    return batches(static_cast<std::size_t>(ds.n()), batch_size, seed);
}

}  // namespace nlab::data

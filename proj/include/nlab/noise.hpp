#pragma once

// Label-noise machinery: transition matrices, class- and instance-dependent
// noise injection, empirical transition measurement, and the binary
// down-sampling analysis (balance rate, optimal rate, post-sampling rates).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nlab/common.hpp"
#include "nlab/dataset.hpp"

namespace nlab::noise {

struct TransitionMatrix {
    Eigen::MatrixXd p;  // K x K, entry (i,j) = P(noisy = j | clean = i)

    // Set by symmetric_transition when epsilon >= (K-1)/K: the affine
    // noise-consistency relation degenerates (gamma1 <= 0) but the matrix
    // itself is still a valid row-stochastic object.
    bool beyond_consistency = false;

    // Set by empirical_transition: rows whose clean class never occurred
    // were imputed with the identity row.
    std::vector<int> imputed_rows;

    int k() const { return static_cast<int>(p.rows()); }

    void validate() const {
        require(p.rows() >= 2 && p.rows() == p.cols(), "TransitionMatrix: must be K x K with K >= 2");
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            double sum = 0.0;
            for (Eigen::Index j = 0; j < p.cols(); ++j) {
                require(p(i, j) >= 0.0 && p(i, j) <= 1.0, "TransitionMatrix: entries must lie in [0,1]");
                sum += p(i, j);
            }
            require(std::abs(sum - 1.0) <= 1e-12, "TransitionMatrix: row " + std::to_string(i) +
                                                      " must sum to 1 within 1e-12");
        }
    }
};

// T_ii = 1 - eps, T_ij = eps/(K-1) otherwise. eps in [0,1]; rates at or
// above (K-1)/K are accepted but flagged.
inline TransitionMatrix symmetric_transition(int k, double epsilon) {
    require(k >= 2, "symmetric_transition: K must be >= 2");
    require(epsilon >= 0.0 && epsilon <= 1.0, "symmetric_transition: epsilon must lie in [0,1]");
    TransitionMatrix t;
    t.p = Eigen::MatrixXd::Constant(k, k, epsilon / (k - 1));
    t.p.diagonal().setConstant(1.0 - epsilon);
    t.beyond_consistency = epsilon >= static_cast<double>(k - 1) / k;
    t.validate();
    return t;
}

// T_ii = 1 - eps and all the flipped mass goes to the next class id,
// wrapping around: T_{i,(i+1) mod K} = eps.
inline TransitionMatrix asymmetric_transition(int k, double epsilon) {
    require(k >= 2, "asymmetric_transition: K must be >= 2");
    require(epsilon >= 0.0 && epsilon < 1.0, "asymmetric_transition: epsilon must lie in [0,1)");
    TransitionMatrix t;
    t.p = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        t.p(i, i) = 1.0 - epsilon;
        t.p(i, (i + 1) % k) += epsilon;
    }
    t.validate();
    return t;
}

inline void save_csv_transition(const TransitionMatrix& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    for (Eigen::Index i = 0; i < t.p.rows(); ++i) {
        for (Eigen::Index j = 0; j < t.p.cols(); ++j) {
            if (j) out << ",";
            out << fmt_g17(t.p(i, j));
        }
        out << "\n";
    }
    if (!out) throw io_error("write failed: " + path);
}

inline TransitionMatrix load_csv_transition(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open for reading: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
        rows.push_back(std::move(row));
    }
    require(!rows.empty(), path + ": empty transition matrix");
    TransitionMatrix t;
    t.p.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i].size() == rows[0].size(), path + ": ragged transition matrix");
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            t.p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    t.validate();
    return t;
}

// Samples noisy labels per row of T indexed by the clean label. Clean
// labels are preserved for evaluation.
inline data::Dataset apply_class_noise(const data::Dataset& ds, const TransitionMatrix& t,
                                       std::uint64_t seed) {
    ds.validate();
    t.validate();
    require(t.k() == ds.num_classes, "apply_class_noise: transition matrix K must match dataset num_classes");
    Rng rng(seed);
    data::Dataset out = ds;
    std::vector<int> noisy(static_cast<std::size_t>(ds.n()));
    std::vector<double> row(static_cast<std::size_t>(t.k()));
    std::size_t flips = 0;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        const int y = ds.clean_labels[i];
        for (int j = 0; j < t.k(); ++j) row[static_cast<std::size_t>(j)] = t.p(y, j);
        noisy[i] = static_cast<int>(rng.categorical(row));
        if (noisy[i] != y) ++flips;
    }
    out.noisy_labels = std::move(noisy);
    out.metadata["noise"] = "class_conditional";
    out.metadata["realized_flip_rate"] = fmt_g17(static_cast<double>(flips) / static_cast<double>(ds.n()));
    return out;
}

struct InstanceNoiseSpec {
    double mean_rate = 0.0;  // epsilon
    double rate_std = 0.0;
    double max_rate = 1.0;
    std::uint64_t projection_seed = 0;

    void validate() const {
        require(mean_rate >= 0.0 && mean_rate < 1.0, "InstanceNoiseSpec: mean_rate must lie in [0,1)");
        require(rate_std >= 0.0, "InstanceNoiseSpec: rate_std must be >= 0");
        require(max_rate > mean_rate && max_rate <= 1.0,
                "InstanceNoiseSpec: must satisfy mean_rate < max_rate <= 1");
    }
};

// Feature-dependent noise: each instance flips with its own probability
// q_n = clamp(normal(mean_rate, rate_std), 0, max_rate), and the wrong
// class is the one whose random projection scores the instance highest.
inline data::Dataset apply_instance_noise(const data::Dataset& ds, const InstanceNoiseSpec& spec,
                                          std::uint64_t seed) {
    ds.validate();
    spec.validate();
    const int k = ds.num_classes;
    const Eigen::Index d = ds.dim();

    // fixed per-class projection directions
    Rng proj_rng(spec.projection_seed);
    Eigen::MatrixXd proj(k, d);
    for (int c = 0; c < k; ++c)
        for (Eigen::Index j = 0; j < d; ++j) proj(c, j) = proj_rng.normal();

    Rng rng(seed);
    data::Dataset out = ds;
    std::vector<int> noisy(static_cast<std::size_t>(ds.n()));
    std::size_t flips = 0;
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        const int y = ds.clean_labels[static_cast<std::size_t>(i)];
        const double q = std::clamp(rng.normal(spec.mean_rate, spec.rate_std), 0.0, spec.max_rate);
        const bool flip = rng.uniform() < q;
        int target = y;
        if (flip) {
            const Eigen::VectorXd scores = proj * ds.features.row(i).transpose();
            double best = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                if (c == y) continue;
                if (scores[c] > best) {
                    best = scores[c];
                    target = c;
                }
            }
            ++flips;
        }
        noisy[static_cast<std::size_t>(i)] = target;
    }
    out.noisy_labels = std::move(noisy);
    out.metadata["noise"] = "instance_dependent";
    out.metadata["realized_flip_rate"] = fmt_g17(static_cast<double>(flips) / static_cast<double>(ds.n()));
    return out;
}

// Row-normalized count matrix. Clean classes with zero occurrences get the
// identity row and are reported in imputed_rows.
inline TransitionMatrix empirical_transition(const std::vector<int>& clean, const std::vector<int>& noisy,
                                             int k) {
    require(clean.size() == noisy.size(), "empirical_transition: label vectors must have equal length");
    require(k >= 2, "empirical_transition: K must be >= 2");
    require(!clean.empty(), "empirical_transition: label vectors must be non-empty");
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(k, k);
    for (std::size_t i = 0; i < clean.size(); ++i) {
        require(clean[i] >= 0 && clean[i] < k, "empirical_transition: clean label out of range");
        require(noisy[i] >= 0 && noisy[i] < k, "empirical_transition: noisy label out of range");
        counts(clean[i], noisy[i]) += 1.0;
    }
    TransitionMatrix t;
    t.p = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        const double row_sum = counts.row(i).sum();
        if (row_sum == 0.0) {
            t.p(i, i) = 1.0;
            t.imputed_rows.push_back(i);
        } else {
            t.p.row(i) = counts.row(i) / row_sum;
        }
    }
    t.validate();
    return t;
}

// Subsamples every noisy class down to the minimum noisy-class count.
inline data::Dataset downsample_balance(const data::Dataset& ds, std::uint64_t seed) {
    ds.validate();
    require(ds.noisy_labels.has_value(), "downsample_balance: noisy labels required");
    const int k = ds.num_classes;
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < ds.noisy_labels->size(); ++i)
        by_class[static_cast<std::size_t>((*ds.noisy_labels)[i])].push_back(i);
    std::size_t min_count = ds.noisy_labels->size();
    for (int c = 0; c < k; ++c) {
        if (by_class[static_cast<std::size_t>(c)].empty())
            throw validation_error("downsample_balance: noisy class " + std::to_string(c) + " is empty");
        min_count = std::min(min_count, by_class[static_cast<std::size_t>(c)].size());
    }
    Rng rng(seed);
    std::vector<std::size_t> keep;
    keep.reserve(min_count * static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) {
        auto& idx = by_class[static_cast<std::size_t>(c)];
        const auto perm = rng.permutation(idx.size());
        for (std::size_t r = 0; r < min_count; ++r) keep.push_back(idx[perm[r]]);
    }
    std::sort(keep.begin(), keep.end());
    data::Dataset out = ds.select(keep);
    out.metadata["downsampled"] = "balanced";
    return out;
}

struct BinaryNoiseRates {
    double e_plus = 0.0;   // P(noisy = 0 | clean = 1)
    double e_minus = 0.0;  // P(noisy = 1 | clean = 0)

    void validate() const {
        require(e_plus >= 0.0 && e_plus < 1.0, "BinaryNoiseRates: e_plus must lie in [0,1)");
        require(e_minus >= 0.0 && e_minus < 1.0, "BinaryNoiseRates: e_minus must lie in [0,1)");
        require(e_plus + e_minus < 1.0, "BinaryNoiseRates: e_plus + e_minus must be < 1");
    }
};

// Post-sampling rates when the noisy-0 class is kept with probability r
// (balanced clean priors assumed):
//   e_plus*  = r e+ / (1 - e+ + r e+)
//   e_minus* = e-   / (e- + r (1 - e-))
inline std::pair<double, double> post_downsample_rates(const BinaryNoiseRates& rates, double r) {
    rates.validate();
    require(r > 0.0 && r <= 1.0, "post_downsample_rates: r must lie in (0,1]");
    const double ep = r * rates.e_plus / (1.0 - rates.e_plus + r * rates.e_plus);
    const double em = rates.e_minus / (rates.e_minus + r * (1.0 - rates.e_minus));
    return {ep, em};
}

// Sampling rate that equalizes the noisy-class masses,
// r = (1 - e+ + e-) / (1 - e- + e+).
inline double balance_downsample_rate(const BinaryNoiseRates& rates) {
    rates.validate();
    return (1.0 - rates.e_plus + rates.e_minus) / (1.0 - rates.e_minus + rates.e_plus);
}

struct OptimalDownsample {
    double rate = 1.0;
    int subsampled_noisy_class = 0;  // which noisy class gets thinned
};

// Rate that makes the post-sampling rates equal:
// r = sqrt( e-(1-e+) / (e+(1-e-)) ) when e+ > e-; orientation is
// normalized when e- > e+ (then the noisy-1 class is thinned instead).
inline OptimalDownsample optimal_downsample_rate(const BinaryNoiseRates& rates) {
    rates.validate();
    OptimalDownsample out;
    if (rates.e_plus == rates.e_minus) {
        out.rate = 1.0;
        out.subsampled_noisy_class = 0;
        return out;
    }
    if (rates.e_plus > rates.e_minus) {
        out.rate = std::sqrt(rates.e_minus * (1.0 - rates.e_plus) / (rates.e_plus * (1.0 - rates.e_minus)));
        out.subsampled_noisy_class = 0;
    } else {
        out.rate = std::sqrt(rates.e_plus * (1.0 - rates.e_minus) / (rates.e_minus * (1.0 - rates.e_plus)));
        out.subsampled_noisy_class = 1;
    }
    return out;
}

// Empirical class-conditional flip rates of a binary dataset.
inline BinaryNoiseRates measure_binary_rates(const data::Dataset& ds) {
    ds.validate();
    require(ds.num_classes == 2, "measure_binary_rates: dataset must be binary");
    require(ds.noisy_labels.has_value(), "measure_binary_rates: noisy labels required");
    std::size_t n1 = 0, n0 = 0, f1 = 0, f0 = 0;
    for (std::size_t i = 0; i < ds.clean_labels.size(); ++i) {
        if (ds.clean_labels[i] == 1) {
            ++n1;
            if ((*ds.noisy_labels)[i] == 0) ++f1;
        } else {
            ++n0;
            if ((*ds.noisy_labels)[i] == 1) ++f0;
        }
    }
    require(n0 > 0 && n1 > 0, "measure_binary_rates: both clean classes must be present");
    BinaryNoiseRates rates;
    rates.e_plus = static_cast<double>(f1) / static_cast<double>(n1);
    rates.e_minus = static_cast<double>(f0) / static_cast<double>(n0);
    return rates;
}

}  // namespace nlab::noise

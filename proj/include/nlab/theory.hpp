#pragma once

// Closed-form calculators for the generalization-error analysis plus the
// numerical machinery that verifies them: an exact decoupling-identity
// evaluator over finite discrete problems and a Monte-Carlo oracle for the
// regularizer cross-term minimizers.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "nlab/common.hpp"
#include "nlab/noise.hpp"

namespace nlab::theory {

struct TheoryParams {
    double vc_dim = 1;      // |C|
    double n_samples = 1;   // N
    double delta = 0.05;
    double epsilon = 0.0;   // noise rate
    int k = 2;              // class count
    double nodes = 1;       // M_C
    double alpha_star = 1;  // approximation constant

    void validate() const {
        require(vc_dim > 0, "TheoryParams: vc_dim must be > 0");
        require(n_samples >= 1, "TheoryParams: n_samples must be >= 1");
        require(delta > 0 && delta < 1, "TheoryParams: delta must lie in (0,1)");
        require(epsilon >= 0, "TheoryParams: epsilon must be >= 0");
        require(k >= 2, "TheoryParams: k must be >= 2");
        require(nodes > 0, "TheoryParams: nodes must be > 0");
        require(alpha_star > 0, "TheoryParams: alpha_star must be > 0");
    }
};

struct ConsistencyConstants {
    double gamma1 = 1.0;  // 1 - eps*K/(K-1)
    double gamma2 = 0.0;  // eps/(K-1)
    bool degenerate = false;  // gamma1 <= 0: affine relation no longer invertible
};

inline ConsistencyConstants consistency_constants(int k, double epsilon) {
    require(k >= 2, "consistency_constants: K must be >= 2");
    require(epsilon >= 0.0 && epsilon <= 1.0, "consistency_constants: epsilon must lie in [0,1]");
    ConsistencyConstants c;
    c.gamma1 = 1.0 - epsilon * k / (k - 1);
    c.gamma2 = epsilon / (k - 1);
    c.degenerate = c.gamma1 <= 0.0;
    return c;
}

struct DecouplingResult {
    double noisy_risk = 0.0;   // LHS: expected noisy 0-1 loss
    double clean_risk = 0.0;   // expected clean 0-1 loss
    double rhs = 0.0;          // T_underline * clean + U-term
    double residual = 0.0;     // |LHS - RHS|
    double t_underline = 0.0;  // min over (x, i) of T_ii(x)
};

// Exact evaluation of the decoupling identity on a finite discrete
// problem. `joint` is the S x K matrix P(X = x_s, Y = i); `t_of_x` holds
// one row-stochastic K x K matrix per support point; `classifier` is the
// 0-1 prediction per support point. Uses 0-1 loss.
inline DecouplingResult verify_noise_decoupling(const Eigen::MatrixXd& joint,
                                                const std::vector<Eigen::MatrixXd>& t_of_x,
                                                const std::vector<int>& classifier) {
    const auto s_count = joint.rows();
    const auto k = joint.cols();
    require(s_count >= 1 && k >= 2, "verify_noise_decoupling: need S >= 1 support points, K >= 2");
    require(static_cast<Eigen::Index>(t_of_x.size()) == s_count,
            "verify_noise_decoupling: one transition matrix per support point required");
    require(static_cast<Eigen::Index>(classifier.size()) == s_count,
            "verify_noise_decoupling: one prediction per support point required");
    double mass = 0.0;
    for (Eigen::Index s = 0; s < s_count; ++s) {
        require(classifier[static_cast<std::size_t>(s)] >= 0 && classifier[static_cast<std::size_t>(s)] < k,
                "verify_noise_decoupling: prediction out of range");
        require(t_of_x[static_cast<std::size_t>(s)].rows() == k && t_of_x[static_cast<std::size_t>(s)].cols() == k,
                "verify_noise_decoupling: transition matrix has wrong shape");
        for (Eigen::Index i = 0; i < k; ++i) {
            require(joint(s, i) >= 0.0, "verify_noise_decoupling: joint probabilities must be >= 0");
            mass += joint(s, i);
            const double row_sum = t_of_x[static_cast<std::size_t>(s)].row(i).sum();
            require(std::abs(row_sum - 1.0) <= 1e-9,
                    "verify_noise_decoupling: transition rows must sum to 1");
        }
    }
    require(std::abs(mass - 1.0) <= 1e-9, "verify_noise_decoupling: joint must sum to 1");

    DecouplingResult res;
    res.t_underline = std::numeric_limits<double>::infinity();
    for (Eigen::Index s = 0; s < s_count; ++s)
        for (Eigen::Index i = 0; i < k; ++i)
            res.t_underline = std::min(res.t_underline, t_of_x[static_cast<std::size_t>(s)](i, i));

    double u_term = 0.0;
    for (Eigen::Index s = 0; s < s_count; ++s) {
        const int pred = classifier[static_cast<std::size_t>(s)];
        const auto& t = t_of_x[static_cast<std::size_t>(s)];
        for (Eigen::Index i = 0; i < k; ++i) {
            const double q = joint(s, i);
            if (q == 0.0) continue;
            if (pred != i) res.clean_risk += q;
            for (Eigen::Index j = 0; j < k; ++j) {
                const double loss = (pred != j) ? 1.0 : 0.0;
                res.noisy_risk += q * t(i, j) * loss;
                const double u = (i == j) ? t(i, i) - res.t_underline : t(i, j);
                u_term += q * u * loss;
            }
        }
    }
    // NB: u_term above already uses the final t_underline because all T_ii
    // were scanned before this loop.
    res.rhs = res.t_underline * res.clean_risk + u_term;
    res.residual = std::abs(res.noisy_risk - res.rhs);
    return res;
}

enum class NoiseKind { Symmetric, Asymmetric };

// 16 sqrt( (|C| ln(N e / |C|) + ln(8/delta)) / (2 N (1 - eff)^2) ) + bias,
// where eff = eps K/(K-1) for symmetric noise (bias must be 0) and
// eff = eps for asymmetric noise.
inline double estimation_bound(const TheoryParams& p, NoiseKind kind, double bias = 0.0) {
    p.validate();
    const double eff = (kind == NoiseKind::Symmetric) ? p.epsilon * p.k / (p.k - 1) : p.epsilon;
    require(eff < 1.0, "estimation_bound: effective noise rate must be < 1");
    if (kind == NoiseKind::Symmetric)
        require(bias == 0.0, "estimation_bound: bias must be 0 for symmetric noise");
    const double log_arg = p.n_samples * std::numbers::e / p.vc_dim;
    require(log_arg > 0.0, "estimation_bound: invalid N e/|C|");
    const double num = p.vc_dim * std::log(log_arg) + std::log(8.0 / p.delta);
    require(num >= 0.0, "estimation_bound: bound inactive, |C| ln(Ne/|C|) + ln(8/delta) < 0");
    return 16.0 * std::sqrt(num / (2.0 * p.n_samples * (1.0 - eff) * (1.0 - eff))) + bias;
}

// alpha / sqrt(M)
inline double approximation_bound(const TheoryParams& p) {
    p.validate();
    return p.alpha_star / std::sqrt(p.nodes);
}

struct CapacitySpec {
    double vc_dim = 1;
    double nodes = 1;
};

struct CrossoverResult {
    double beta = 0.0;
    // beta >= 1: the capacity comparison favors the smaller class at every
    // noise rate; 0 < beta < 1: only above epsilon_threshold.
    bool always_crossed = false;
    std::optional<double> epsilon_threshold;
};

namespace detail {

inline double capacity_term(double vc, double n) {
    const double arg = 4.0 * n * std::numbers::e / vc;
    require(arg > 1.0, "crossover: 4Ne/|C| must exceed 1");
    return std::sqrt(vc * std::log(arg));
}

}  // namespace detail

// beta = (16/sqrt(2N)) (sqrt(|C1| ln(4Ne/|C1|)) - sqrt(|C2| ln(4Ne/|C2|)))
//        / (alpha/sqrt(M2) - alpha/sqrt(M1)),
// together with the noise rate at which 1 - eps K/(K-1) = beta.
inline CrossoverResult crossover_beta(const CapacitySpec& c1, const CapacitySpec& c2, double n,
                                      double alpha_star, int k = 2) {
    require(n >= 1, "crossover_beta: N must be >= 1");
    require(alpha_star > 0, "crossover_beta: alpha_star must be > 0");
    require(k >= 2, "crossover_beta: K must be >= 2");
    require(c1.vc_dim > c2.vc_dim, "crossover_beta: requires |C1| > |C2|");
    require(c1.nodes > c2.nodes, "crossover_beta: requires M_C1 > M_C2");
    const double denom = alpha_star / std::sqrt(c2.nodes) - alpha_star / std::sqrt(c1.nodes);
    const double numer = detail::capacity_term(c1.vc_dim, n) - detail::capacity_term(c2.vc_dim, n);
    require(denom > 0, "crossover_beta: approximation-error gap must be positive");
    require(numer > 0, "crossover_beta: estimation-error gap must be positive");
    CrossoverResult res;
    res.beta = 16.0 / std::sqrt(2.0 * n) * numer / denom;
    if (res.beta >= 1.0) {
        res.always_crossed = true;
    } else {
        res.epsilon_threshold = (1.0 - res.beta) * (k - 1) / k;
    }
    return res;
}

struct ComposedCapacity {
    double vc_dim = 1;
    double nodes = 1;
    double alpha = 1;
};

// Same comparison with distinct approximation constants for the composed
// model (raw inputs) and the linear head on fixed representations.
inline double corollary_beta_prime(const ComposedCapacity& composed, const ComposedCapacity& linear_given_f,
                                   double n) {
    require(n >= 1, "corollary_beta_prime: N must be >= 1");
    require(composed.vc_dim > linear_given_f.vc_dim, "corollary_beta_prime: requires |G∘F| > |G|");
    const double denom = linear_given_f.alpha / std::sqrt(linear_given_f.nodes) -
                         composed.alpha / std::sqrt(composed.nodes);
    require(denom > 0,
            "corollary_beta_prime: requires alpha'/sqrt(M_G) > alpha/sqrt(M_GF)");
    const double numer =
        detail::capacity_term(composed.vc_dim, n) - detail::capacity_term(linear_given_f.vc_dim, n);
    require(numer > 0, "corollary_beta_prime: estimation-error gap must be positive");
    return 16.0 / std::sqrt(2.0 * n) * numer / denom;
}

// ||mu_x - mu_y||^2 + tr(Sigma_x + Sigma_y) for independent Gaussians.
inline double expected_sq_gaussian_distance(const Eigen::VectorXd& mu_x, const Eigen::VectorXd& mu_y,
                                            const Eigen::MatrixXd& cov_x, const Eigen::MatrixXd& cov_y) {
    require(mu_x.size() == mu_y.size() && mu_x.size() >= 1,
            "expected_sq_gaussian_distance: mean dimensions must match");
    require(cov_x.rows() == mu_x.size() && cov_x.cols() == mu_x.size() && cov_y.rows() == mu_x.size() &&
                cov_y.cols() == mu_x.size(),
            "expected_sq_gaussian_distance: covariance shapes must match the means");
    return (mu_x - mu_y).squaredNorm() + cov_x.trace() + cov_y.trace();
}

struct GaussianFeatureSpec {
    Eigen::VectorXd mu1, mu2;  // per-class SSL feature means
    Eigen::MatrixXd cov;       // shared covariance, symmetric PSD
    double flip_rate = 0.0;    // e = e+ = e-
    std::size_t n_mc = 0;      // Monte-Carlo samples per class

    void validate() const {
        require(mu1.size() >= 1 && mu1.size() == mu2.size(),
                "GaussianFeatureSpec: mean dimensions must match and be >= 1");
        require(cov.rows() == mu1.size() && cov.cols() == mu1.size(),
                "GaussianFeatureSpec: covariance must be P x P");
        require((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-10,
                "GaussianFeatureSpec: covariance must be symmetric within 1e-10");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        require(es.eigenvalues().minCoeff() >= -1e-10,
                "GaussianFeatureSpec: covariance must be PSD within 1e-10");
        require(flip_rate >= 0.0 && flip_rate < 0.5, "GaussianFeatureSpec: flip rate must lie in [0,0.5)");
        require(n_mc >= 1, "GaussianFeatureSpec: n_mc must be >= 1");
    }
};

// Delta = 8 tr(Sigma) / ||mu1 - mu2||^2; +inf when the means coincide.
inline double theorem3_delta(const GaussianFeatureSpec& spec) {
    spec.validate();
    const double gap = (spec.mu1 - spec.mu2).squaredNorm();
    if (gap == 0.0) return std::numeric_limits<double>::infinity();
    return 8.0 * spec.cov.trace() / gap;
}

struct Theorem3Solutions {
    double exp_gf_plus_f = 0.0;   // E g(f(X)) over samples mislabeled as class 1
    double exp_gf_minus_f = 0.0;  // ... mislabeled as class 0
    double risk = 0.0;            // e (1/2 - 1/(2+Delta))
};

inline Theorem3Solutions from_delta(double delta, double flip_rate) {
    require(delta >= 0.0, "from_delta: delta must be >= 0");
    require(flip_rate >= 0.0 && flip_rate < 0.5, "from_delta: flip rate must lie in [0,0.5)");
    Theorem3Solutions s;
    const double pull = std::isinf(delta) ? 0.0 : 1.0 / (2.0 + delta);
    s.exp_gf_plus_f = 0.5 - pull;
    s.exp_gf_minus_f = 0.5 + pull;
    s.risk = flip_rate * s.exp_gf_plus_f;
    return s;
}

inline Theorem3Solutions theorem3_solutions(const GaussianFeatureSpec& spec) {
    return from_delta(theorem3_delta(spec), spec.flip_rate);
}

// Sampling statistics of the four (kept, mislabeled) group pairings:
// index 0: (kept 1, mislabeled-as-1), 1: (kept 0, mislabeled-as-1),
// index 2: (kept 1, mislabeled-as-0), 3: (kept 0, mislabeled-as-0).
struct Theorem3Stats {
    std::array<double, 4> mean_sq_dist{};   // mean ||t_i - t_j||^2 per pairing
    std::array<double, 4> pair_weight{};    // pair-count fractions
    double p1_hat = 0.0;                    // fraction of kept samples labeled 1
    double p2_hat = 0.0;                    // fraction of mislabeled samples labeled 1
    double m2_hat = 0.0;                    // overall mean squared cross distance
    std::array<std::size_t, 4> group_sizes{};  // kept1, kept0, mis1, mis0
};

namespace detail {

struct GroupAccum {
    std::size_t count = 0;
    Eigen::VectorXd sum;
    double sum_sq = 0.0;

    explicit GroupAccum(Eigen::Index p) : sum(Eigen::VectorXd::Zero(p)) {}
    void add(const Eigen::VectorXd& v) {
        ++count;
        sum += v;
        sum_sq += v.squaredNorm();
    }
    void merge(const GroupAccum& o) {
        count += o.count;
        sum += o.sum;
        sum_sq += o.sum_sq;
    }
};

// E ||a - b||^2 over independent draws from two accumulated groups.
inline double cross_mean_sq(const GroupAccum& a, const GroupAccum& b) {
    const auto na = static_cast<double>(a.count), nb = static_cast<double>(b.count);
    return a.sum_sq / na + b.sum_sq / nb - 2.0 * a.sum.dot(b.sum) / (na * nb);
}

inline Eigen::MatrixXd cov_sqrt(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal();
}

}  // namespace detail

// Draws n_mc SSL features per class, flips labels at the given rate, and
// reduces each group to the moments the cross-term analysis needs. Work is
// split over a fixed shard grid with per-shard seeds and merged in shard
// order, so the result is independent of the parallelism degree.
inline Theorem3Stats collect_theorem3_stats(const GaussianFeatureSpec& spec, std::uint64_t seed,
                                            int parallelism = 1) {
    spec.validate();
    require(parallelism >= 1, "collect_theorem3_stats: parallelism must be >= 1");
    const Eigen::Index p = spec.mu1.size();
    const Eigen::MatrixXd l = detail::cov_sqrt(spec.cov);

    const std::size_t shards = std::min<std::size_t>(64, spec.n_mc);
    // groups per shard: kept1, kept0, mis1 (clean 0 -> noisy 1), mis0
    std::vector<std::array<detail::GroupAccum, 4>> partial(
        shards, {detail::GroupAccum(p), detail::GroupAccum(p), detail::GroupAccum(p), detail::GroupAccum(p)});

    auto run_shard = [&](std::size_t shard) {
        const std::size_t base = spec.n_mc / shards;
        const std::size_t extra = spec.n_mc % shards;
        const std::size_t count = base + (shard < extra ? 1 : 0);
        Rng rng(mix_seed(seed, shard));
        Eigen::VectorXd z(p);
        auto& acc = partial[shard];
        for (int clean = 1; clean >= 0; --clean) {
            const Eigen::VectorXd& mu = (clean == 1) ? spec.mu1 : spec.mu2;
            for (std::size_t i = 0; i < count; ++i) {
                for (Eigen::Index j = 0; j < p; ++j) z[j] = rng.normal();
                const Eigen::VectorXd t = mu + l * z;
                const bool flip = rng.uniform() < spec.flip_rate;
                if (clean == 1)
                    acc[flip ? 3 : 0].add(t);
                else
                    acc[flip ? 2 : 1].add(t);
            }
        }
    };

    if (parallelism <= 1 || shards == 1) {
        for (std::size_t s = 0; s < shards; ++s) run_shard(s);
    } else {
        const auto workers = std::min<std::size_t>(static_cast<std::size_t>(parallelism), shards);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t s = w; s < shards; s += workers) run_shard(s);
            });
        for (auto& th : pool) th.join();
    }

    std::array<detail::GroupAccum, 4> total{detail::GroupAccum(p), detail::GroupAccum(p),
                                            detail::GroupAccum(p), detail::GroupAccum(p)};
    for (const auto& part : partial)
        for (int g = 0; g < 4; ++g) total[static_cast<std::size_t>(g)].merge(part[static_cast<std::size_t>(g)]);

    const auto& kept1 = total[0];
    const auto& kept0 = total[1];
    const auto& mis1 = total[2];
    const auto& mis0 = total[3];
    if (spec.flip_rate > 0.0 && (mis1.count == 0 || mis0.count == 0))
        throw numerical_error("collect_theorem3_stats: a mislabeled group is empty; increase n_mc");
    require(kept1.count > 0 && kept0.count > 0, "collect_theorem3_stats: a kept group is empty");

    Theorem3Stats st;
    st.group_sizes = {kept1.count, kept0.count, mis1.count, mis0.count};
    if (mis1.count == 0 || mis0.count == 0) return st;  // vacuous, caller checks flip_rate

    st.mean_sq_dist[0] = detail::cross_mean_sq(kept1, mis1);
    st.mean_sq_dist[1] = detail::cross_mean_sq(kept0, mis1);
    st.mean_sq_dist[2] = detail::cross_mean_sq(kept1, mis0);
    st.mean_sq_dist[3] = detail::cross_mean_sq(kept0, mis0);

    const double n_t = static_cast<double>(kept1.count + kept0.count);
    const double n_f = static_cast<double>(mis1.count + mis0.count);
    st.p1_hat = static_cast<double>(kept1.count) / n_t;
    st.p2_hat = static_cast<double>(mis1.count) / n_f;
    const std::array<double, 4> pairs = {
        static_cast<double>(kept1.count) * static_cast<double>(mis1.count),
        static_cast<double>(kept0.count) * static_cast<double>(mis1.count),
        static_cast<double>(kept1.count) * static_cast<double>(mis0.count),
        static_cast<double>(kept0.count) * static_cast<double>(mis0.count)};
    const double pair_total = pairs[0] + pairs[1] + pairs[2] + pairs[3];
    double m2 = 0.0;
    for (int g = 0; g < 4; ++g) {
        st.pair_weight[static_cast<std::size_t>(g)] = pairs[static_cast<std::size_t>(g)] / pair_total;
        m2 += st.pair_weight[static_cast<std::size_t>(g)] * st.mean_sq_dist[static_cast<std::size_t>(g)];
    }
    st.m2_hat = m2;
    return st;
}

// Empirical cross-term objective (up to terms constant in a and b), with
// the first normalizer re-evaluated at the candidate point:
//   sum_g w_g [ c_g(a,b)^2 / m1^2 - 2 c_g(a,b) D_g / (m1 m2) ].
inline double theorem3_objective(const Theorem3Stats& st, double a, double b) {
    const std::array<double, 4> c = {std::abs(1.0 - a), std::abs(a), std::abs(1.0 - b), std::abs(b)};
    double m1 = 0.0;
    for (int g = 0; g < 4; ++g) m1 += st.pair_weight[static_cast<std::size_t>(g)] * c[static_cast<std::size_t>(g)];
    if (m1 <= 0.0) return std::numeric_limits<double>::infinity();
    double obj = 0.0;
    for (int g = 0; g < 4; ++g) {
        const double w = st.pair_weight[static_cast<std::size_t>(g)];
        const double cg = c[static_cast<std::size_t>(g)];
        obj += w * (cg * cg / (m1 * m1) -
                    2.0 * cg * st.mean_sq_dist[static_cast<std::size_t>(g)] / (m1 * st.m2_hat));
    }
    return obj;
}

// Stationary point of the objective with the normalizer m1 treated as a
// batch constant: a pair of quadratic solves coupled only through m1,
// resolved exactly as a 2x2 linear system.
inline std::pair<double, double> solve_theorem3(const Theorem3Stats& st) {
    const double p1 = st.p1_hat;
    const auto& d = st.mean_sq_dist;
    const auto& w = st.pair_weight;
    const double gamma_a = p1 * d[0] - (1.0 - p1) * d[1];
    const double gamma_b = (1.0 - p1) * d[3] - p1 * d[2];
    const double c0 = w[0] + w[2];
    const double ca = w[1] - w[0];
    const double cb = w[3] - w[2];
    const double ka = gamma_a / st.m2_hat;
    const double kb = gamma_b / st.m2_hat;
    // a + ka m1(a,b) = p1 ; b - kb m1(a,b) = p1 ; m1 = c0 + ca a + cb b
    const double a11 = 1.0 + ka * ca, a12 = ka * cb, r1 = p1 - ka * c0;
    const double a21 = -kb * ca, a22 = 1.0 - kb * cb, r2 = p1 + kb * c0;
    const double det = a11 * a22 - a12 * a21;
    require(std::abs(det) > 1e-12, "solve_theorem3: singular stationarity system");
    return {(r1 * a22 - a12 * r2) / det, (a11 * r2 - a21 * r1) / det};
}

struct Theorem3Simulation {
    bool vacuous = false;  // flip rate 0: no mislabeled groups exist
    double exp_gf_plus_f = std::numeric_limits<double>::quiet_NaN();
    double exp_gf_minus_f = std::numeric_limits<double>::quiet_NaN();
    Theorem3Stats stats;
};

// Monte-Carlo oracle for the cross-term minimizers: samples SSL features,
// groups them by (kept, mislabeled) x noisy label, and minimizes the
// empirical objective over the two shared scalar predictions.
inline Theorem3Simulation simulate_theorem3(const GaussianFeatureSpec& spec, std::uint64_t seed,
                                            int parallelism = 1) {
    spec.validate();
    Theorem3Simulation sim;
    if (spec.flip_rate == 0.0) {
        sim.vacuous = true;
        return sim;
    }
    sim.stats = collect_theorem3_stats(spec, seed, parallelism);
    const auto [a, b] = solve_theorem3(sim.stats);
    sim.exp_gf_plus_f = a;
    sim.exp_gf_minus_f = b;
    return sim;
}

// Plain golden-section minimizer used to cross-check the closed-form
// stationary point.
inline double golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                                 double tol = 1e-10) {
    require(lo < hi, "golden_section_min: invalid bracket");
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace nlab::theory

#pragma once

// Loss functions over batch network outputs. Everything returns the scalar
// value plus analytic gradients with respect to the consumed outputs
// (logits, and for the contrastive pieces the embedding matrices).
//
// Conventions:
//  - supervised losses act on softmax(logits) rows and the noisy labels
//  - info_nce follows the NT-Xent convention: the anchor's positive sits
//    in the denominator alongside all in-batch views of other anchors
//  - the regularizer normalizes pairwise distances per batch (the
//    normalizers m are batch statistics and are held constant in the
//    backward pass)

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nlab/common.hpp"
#include "nlab/noise.hpp"

namespace nlab::losses {

struct BatchOutputs {
    Eigen::MatrixXd logits;                     // B x K (pre-softmax)
    Eigen::MatrixXd ssl;                        // B x P (projection-head outputs)
    std::optional<Eigen::MatrixXd> ssl_aug;     // B x P, augmented views
    std::vector<int> noisy_labels;              // B

    Eigen::Index batch() const { return logits.rows(); }
    Eigen::Index classes() const { return logits.cols(); }

    void validate() const {
        require(batch() >= 2, "BatchOutputs: batch size must be >= 2");
        require(classes() >= 2, "BatchOutputs: need at least 2 classes");
        require(ssl.rows() == 0 || ssl.rows() == batch(),
                "BatchOutputs: ssl row count must match logits");
        if (ssl_aug)
            require(ssl_aug->rows() == batch() && ssl_aug->cols() == ssl.cols(),
                    "BatchOutputs: ssl_aug shape must match ssl");
        require(static_cast<Eigen::Index>(noisy_labels.size()) == batch(),
                "BatchOutputs: noisy_labels length must match batch");
        for (int y : noisy_labels)
            require(y >= 0 && y < classes(), "BatchOutputs: label out of range");
    }
};

struct LossReport {
    double value = 0.0;
    Eigen::MatrixXd grad_logits;                 // B x K (zero matrix if unused)
    std::optional<Eigen::MatrixXd> grad_ssl;     // B x P
    std::optional<Eigen::MatrixXd> grad_ssl_aug; // B x P
    bool degenerate = false;                     // regularizer normalizer collapse
};

enum class Distance { SquaredL2, SmoothL1 };

struct RegularizerConfig {
    int w_sl = 1;                     // exponent for classifier-output distances
    int w_ssl = 2;                    // exponent for SSL-embedding distances
    Distance distance = Distance::SmoothL1;
    double lambda = 1.0;
    double epsilon_floor = 1e-8;      // guards collapsed batches
    bool couple_ssl = false;          // propagate regularizer grads into SSL embeddings

    // Backward pass only: the classifier-side normalizer is clamped to at
    // least this value. Softmax rows live in a simplex of diameter sqrt(2),
    // so when a batch's predictions bunch together the 1/m factor would
    // otherwise blow past every other gradient in the objective and train
    // the classifier into collapse. The cross-term analysis fixes this
    // normalizer at the constant 1/2; we only fall back to it when the
    // batch statistic drops below it. Value reporting is unaffected.
    double sl_backward_floor = 0.5;

    void validate() const {
        require(w_sl == 1 || w_sl == 2, "RegularizerConfig: w_sl must be 1 or 2");
        require(w_ssl == 1 || w_ssl == 2, "RegularizerConfig: w_ssl must be 1 or 2");
        require(lambda >= 0.0, "RegularizerConfig: lambda must be >= 0");
        require(epsilon_floor > 0.0, "RegularizerConfig: epsilon_floor must be > 0");
        require(sl_backward_floor >= 0.0, "RegularizerConfig: sl_backward_floor must be >= 0");
    }
};

inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        p.row(i) = (logits.row(i).array() - m).exp();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

// Chain rule through row-wise softmax: given dL/dp, produce dL/dlogits.
inline Eigen::MatrixXd softmax_backward(const Eigen::MatrixXd& p, const Eigen::MatrixXd& grad_p) {
    Eigen::MatrixXd out(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double dot = p.row(i).dot(grad_p.row(i));
        out.row(i) = p.row(i).array() * (grad_p.row(i).array() - dot);
    }
    return out;
}

namespace detail {

inline void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw numerical_error(std::string(what) + ": non-finite loss value");
}

}  // namespace detail

// Mean of -log softmax(logits)[n, y_n]; grad = (softmax - onehot)/B.
inline LossReport cross_entropy(const BatchOutputs& out) {
    out.validate();
    const auto b = out.batch();
    const Eigen::MatrixXd p = softmax_rows(out.logits);
    LossReport rep;
    rep.grad_logits = p;
    double total = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const int y = out.noisy_labels[static_cast<std::size_t>(i)];
        total -= std::log(p(i, y));
        rep.grad_logits(i, y) -= 1.0;
    }
    rep.value = total / static_cast<double>(b);
    rep.grad_logits /= static_cast<double>(b);
    detail::check_finite(rep.value, "cross_entropy");
    return rep;
}

// Mean of sum_k |softmax_k - onehot_k| (= 2(1 - p_y) per sample).
inline LossReport mae_loss(const BatchOutputs& out) {
    out.validate();
    const auto b = out.batch();
    const Eigen::MatrixXd p = softmax_rows(out.logits);
    Eigen::MatrixXd grad_p(b, out.classes());
    double total = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const int y = out.noisy_labels[static_cast<std::size_t>(i)];
        for (Eigen::Index k = 0; k < out.classes(); ++k) {
            const double target = (k == y) ? 1.0 : 0.0;
            total += std::abs(p(i, k) - target);
            grad_p(i, k) = (p(i, k) >= target) ? 1.0 : -1.0;
        }
    }
    LossReport rep;
    rep.value = total / static_cast<double>(b);
    rep.grad_logits = softmax_backward(p, grad_p) / static_cast<double>(b);
    detail::check_finite(rep.value, "mae_loss");
    return rep;
}

// Generalized cross entropy, (1 - p_y^q)/q. q = 1 recovers the linear
// 1 - p_y loss; q -> 0 recovers CE.
inline LossReport gce_loss(const BatchOutputs& out, double q = 0.7) {
    out.validate();
    require(q > 0.0 && q <= 1.0, "gce_loss: q must lie in (0,1]");
    const auto b = out.batch();
    const Eigen::MatrixXd p = softmax_rows(out.logits);
    Eigen::MatrixXd grad_p = Eigen::MatrixXd::Zero(b, out.classes());
    double total = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const int y = out.noisy_labels[static_cast<std::size_t>(i)];
        total += (1.0 - std::pow(p(i, y), q)) / q;
        grad_p(i, y) = -std::pow(p(i, y), q - 1.0);
    }
    LossReport rep;
    rep.value = total / static_cast<double>(b);
    rep.grad_logits = softmax_backward(p, grad_p) / static_cast<double>(b);
    detail::check_finite(rep.value, "gce_loss");
    return rep;
}

// CE on the forward-corrected probabilities u = T^T softmax(logits).
inline LossReport forward_corrected_ce(const BatchOutputs& out, const noise::TransitionMatrix& t) {
    out.validate();
    t.validate();
    require(t.k() == out.classes(), "forward_corrected_ce: transition K must match logits");
    const auto b = out.batch();
    const Eigen::MatrixXd p = softmax_rows(out.logits);
    const Eigen::MatrixXd u = p * t.p;  // u(i,j) = sum_k p(i,k) T(k,j)
    Eigen::MatrixXd grad_p(b, out.classes());
    double total = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const int y = out.noisy_labels[static_cast<std::size_t>(i)];
        if (u(i, y) <= 0.0) throw numerical_error("forward_corrected_ce: corrected probability is zero");
        total -= std::log(u(i, y));
        grad_p.row(i) = -t.p.col(y).transpose() / u(i, y);
    }
    LossReport rep;
    rep.value = total / static_cast<double>(b);
    rep.grad_logits = softmax_backward(p, grad_p) / static_cast<double>(b);
    detail::check_finite(rep.value, "forward_corrected_ce");
    return rep;
}

// Peer-adjusted CE: CE(x_n, y_n) - alpha * CE(x_{perm1(n)}, y_{perm2(n)}),
// averaged over the batch. Signed by construction.
inline LossReport peer_loss(const BatchOutputs& out, const std::vector<std::size_t>& perm1,
                            const std::vector<std::size_t>& perm2, double alpha = 1.0) {
    out.validate();
    const auto b = out.batch();
    require(perm1.size() == static_cast<std::size_t>(b) && perm2.size() == static_cast<std::size_t>(b),
            "peer_loss: permutations must have batch length");
    for (std::size_t i = 0; i < perm1.size(); ++i)
        require(perm1[i] < static_cast<std::size_t>(b) && perm2[i] < static_cast<std::size_t>(b),
                "peer_loss: permutation index out of range");
    const Eigen::MatrixXd p = softmax_rows(out.logits);
    LossReport rep;
    rep.grad_logits = Eigen::MatrixXd::Zero(b, out.classes());
    double total = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const int y = out.noisy_labels[static_cast<std::size_t>(i)];
        total -= std::log(p(i, y));
        rep.grad_logits.row(i) += p.row(i);
        rep.grad_logits(i, y) -= 1.0;

        const auto j = static_cast<Eigen::Index>(perm1[static_cast<std::size_t>(i)]);
        const int ypeer = out.noisy_labels[perm2[static_cast<std::size_t>(i)]];
        total += alpha * std::log(p(j, ypeer));
        rep.grad_logits.row(j) -= alpha * p.row(j);
        rep.grad_logits(j, ypeer) += alpha;
    }
    rep.value = total / static_cast<double>(b);
    rep.grad_logits /= static_cast<double>(b);
    detail::check_finite(rep.value, "peer_loss");
    return rep;
}

// NT-Xent contrastive loss. Per anchor n the positive is the augmented
// view t'_n; negatives are t_m and t'_m for every m != n; the positive
// term appears in the denominator, so each per-anchor term is >= 0.
inline LossReport info_nce(const BatchOutputs& out, double temperature) {
    out.validate();
    require(out.ssl_aug.has_value(), "info_nce: augmented embeddings required");
    require(temperature > 0.0, "info_nce: temperature must be > 0");
    const auto b = out.batch();
    const Eigen::MatrixXd& t = out.ssl;
    const Eigen::MatrixXd& ta = *out.ssl_aug;

    Eigen::VectorXd norm_t(b), norm_ta(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        norm_t[i] = t.row(i).norm();
        norm_ta[i] = ta.row(i).norm();
        if (norm_t[i] == 0.0 || norm_ta[i] == 0.0)
            throw validation_error("info_nce: zero-norm embedding row (cosine undefined)");
    }
    const Eigen::MatrixXd u_hat = norm_t.cwiseInverse().asDiagonal() * t;
    // candidate rows: first b are the augmented views, last b the in-batch originals
    Eigen::MatrixXd v_hat(2 * b, t.cols());
    v_hat.topRows(b) = norm_ta.cwiseInverse().asDiagonal() * ta;
    v_hat.bottomRows(b) = u_hat;

    const Eigen::MatrixXd sim = u_hat * v_hat.transpose();      // b x 2b cosine table
    Eigen::MatrixXd score = sim / temperature;
    for (Eigen::Index i = 0; i < b; ++i)
        score(i, b + i) = -std::numeric_limits<double>::infinity();  // anchor never its own negative

    double total = 0.0;
    Eigen::MatrixXd weights(b, 2 * b);  // dloss/dscore = softmax - onehot(positive)
    for (Eigen::Index i = 0; i < b; ++i) {
        const double max_score = score.row(i).maxCoeff();
        double z = 0.0;
        for (Eigen::Index c = 0; c < 2 * b; ++c) {
            const double e = std::isfinite(score(i, c)) ? std::exp(score(i, c) - max_score) : 0.0;
            weights(i, c) = e;
            z += e;
        }
        total += std::log(z) + max_score - score(i, i);
        weights.row(i) /= z;
        weights(i, i) -= 1.0;
    }
    weights /= temperature * static_cast<double>(b);

    // d sim(u,v)/du = (v_hat - sim u_hat)/||u||, accumulated in matrix form
    LossReport rep;
    rep.grad_logits = Eigen::MatrixXd::Zero(b, out.classes());
    const Eigen::VectorXd row_dot = (weights.array() * sim.array()).rowwise().sum();
    Eigen::MatrixXd grad_u = weights * v_hat - row_dot.asDiagonal() * u_hat;
    grad_u = norm_t.cwiseInverse().asDiagonal() * grad_u;

    const Eigen::VectorXd col_dot = (weights.array() * sim.array()).colwise().sum();
    Eigen::MatrixXd grad_v = weights.transpose() * u_hat - col_dot.asDiagonal() * v_hat;
    rep.grad_ssl_aug = norm_ta.cwiseInverse().asDiagonal() * grad_v.topRows(b);
    rep.grad_ssl = grad_u + norm_t.cwiseInverse().asDiagonal() * grad_v.bottomRows(b);

    rep.value = total / static_cast<double>(b);
    detail::check_finite(rep.value, "info_nce");
    return rep;
}

struct Normalizer {
    double value = 0.0;
    bool degenerate = false;  // floored because the batch collapsed
};

// m = mean over ordered pairs (n != n') of ||row_n - row_n'||^w, floored
// at epsilon_floor.
inline Normalizer pairwise_normalizer(const Eigen::MatrixXd& rows, int w, double epsilon_floor = 1e-8) {
    require(rows.rows() >= 2, "pairwise_normalizer: need at least 2 rows");
    require(w == 1 || w == 2, "pairwise_normalizer: exponent must be 1 or 2");
    require(epsilon_floor > 0.0, "pairwise_normalizer: epsilon_floor must be > 0");
    const auto m_rows = rows.rows();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < m_rows; ++i) {
        for (Eigen::Index j = i + 1; j < m_rows; ++j) {
            const double d2 = (rows.row(i) - rows.row(j)).squaredNorm();
            sum += 2.0 * ((w == 2) ? d2 : std::sqrt(d2));
        }
    }
    Normalizer out;
    out.value = sum / (static_cast<double>(m_rows) * static_cast<double>(m_rows - 1));
    if (out.value < epsilon_floor) {
        out.value = epsilon_floor;
        out.degenerate = true;
    }
    return out;
}

namespace detail {

inline double distance_value(Distance d, double r) {
    if (d == Distance::SquaredL2) return r * r;
    const double a = std::abs(r);
    return a <= 1.0 ? 0.5 * r * r : a - 0.5;  // smooth-l1, threshold 1
}

inline double distance_deriv(Distance d, double r) {
    if (d == Distance::SquaredL2) return 2.0 * r;
    if (std::abs(r) <= 1.0) return r;
    return r > 0.0 ? 1.0 : -1.0;
}

}  // namespace detail

// Normalizers can be pinned externally; the finite-difference harness uses
// this to probe the loss surface with m held at its base-point value.
struct FrozenNormalizers {
    double m_ssl = 0.0;
    double m_sl = 0.0;
};

struct FeatureRegularizerResult {
    double value = 0.0;
    Eigen::MatrixXd grad_s;   // same shape as s
    Eigen::MatrixXd grad_t;   // same shape as t (zero unless requested)
    Normalizer norm_t, norm_s;
};

// Core of the representation regularizer on raw feature matrices:
// mean over ordered pairs of d( ||t_n-t_n'||^w_ssl / m_t ,
//                               ||s_n-s_n'||^w_sl  / m_s ).
// The normalizers are treated as constants for the gradients.
inline FeatureRegularizerResult regularizer_on_features(
    const Eigen::MatrixXd& t, const Eigen::MatrixXd& s, const RegularizerConfig& cfg,
    bool want_grad_t = false, const std::optional<FrozenNormalizers>& frozen = std::nullopt) {
    cfg.validate();
    require(t.rows() == s.rows(), "regularizer_on_features: t and s row counts must agree");
    const auto b = t.rows();
    require(b >= 2, "regularizer_on_features: need at least 2 rows");

    FeatureRegularizerResult res;
    res.grad_s = Eigen::MatrixXd::Zero(s.rows(), s.cols());
    res.grad_t = Eigen::MatrixXd::Zero(t.rows(), t.cols());

    // pairwise squared distances via the Gram trick, clamped at 0
    auto sq_dists = [](const Eigen::MatrixXd& rows) {
        const Eigen::VectorXd sq = rows.rowwise().squaredNorm();
        Eigen::MatrixXd d2 = sq.replicate(1, rows.rows());
        d2 += sq.transpose().replicate(rows.rows(), 1);
        d2.noalias() -= 2.0 * rows * rows.transpose();
        return d2.cwiseMax(0.0).eval();
    };
    const Eigen::MatrixXd d2_t = sq_dists(t);
    const Eigen::MatrixXd d2_s = sq_dists(s);
    const Eigen::MatrixXd dist_t = (cfg.w_ssl == 2) ? d2_t : d2_t.cwiseSqrt().eval();
    const Eigen::MatrixXd dist_s = (cfg.w_sl == 2) ? d2_s : d2_s.cwiseSqrt().eval();

    // normalizers from the same distance matrices, so that e.g. a two-point
    // batch has phi == 1 on both sides exactly
    auto normalizer_of = [&](const Eigen::MatrixXd& dist) {
        Normalizer norm;
        norm.value = (dist.sum() - dist.diagonal().sum()) /
                     (static_cast<double>(b) * static_cast<double>(b - 1));
        if (norm.value < cfg.epsilon_floor) {
            norm.value = cfg.epsilon_floor;
            norm.degenerate = true;
        }
        return norm;
    };
    if (frozen) {
        res.norm_t = {frozen->m_ssl, false};
        res.norm_s = {frozen->m_sl, false};
    } else {
        res.norm_t = normalizer_of(dist_t);
        res.norm_s = normalizer_of(dist_s);
    }
    if (res.norm_t.degenerate && res.norm_s.degenerate) {
        // both feature sets collapsed; the profile match is vacuous
        return res;
    }

    // gradients are those of the surrogate with the clamped s-normalizer;
    // identical to the true derivative whenever m_s >= sl_backward_floor
    const double grad_ms = std::max(res.norm_s.value, cfg.sl_backward_floor);
    const double pair_scale = 2.0 / (static_cast<double>(b) * static_cast<double>(b - 1));

    double total = 0.0;
    Eigen::MatrixXd coeff_s = Eigen::MatrixXd::Zero(b, b);
    Eigen::MatrixXd coeff_t = Eigen::MatrixXd::Zero(b, b);
    for (Eigen::Index i = 0; i < b; ++i) {
        for (Eigen::Index j = i + 1; j < b; ++j) {
            const double phi_t = dist_t(i, j) / res.norm_t.value;
            total += 2.0 * detail::distance_value(cfg.distance, dist_s(i, j) / res.norm_s.value - phi_t);
            const double dd = detail::distance_deriv(cfg.distance, dist_s(i, j) / grad_ms - phi_t);
            if (dd == 0.0) continue;
            // d phi / d row_i = w dist^{w-2} (row_i - row_j) / m ; the w = 1
            // derivative is taken as 0 at coincident rows
            if (cfg.w_sl == 2)
                coeff_s(i, j) = pair_scale * dd * 2.0 / grad_ms;
            else if (d2_s(i, j) > 0.0)
                coeff_s(i, j) = pair_scale * dd / (dist_s(i, j) * grad_ms);
            coeff_s(j, i) = coeff_s(i, j);
            if (want_grad_t) {
                if (cfg.w_ssl == 2)
                    coeff_t(i, j) = -pair_scale * dd * 2.0 / res.norm_t.value;
                else if (d2_t(i, j) > 0.0)
                    coeff_t(i, j) = -pair_scale * dd / (dist_t(i, j) * res.norm_t.value);
                coeff_t(j, i) = coeff_t(i, j);
            }
        }
    }
    // sum_j c_ij (row_i - row_j) rewritten as diag(C 1) R - C R
    res.grad_s = coeff_s.rowwise().sum().asDiagonal() * s - coeff_s * s;
    if (want_grad_t) res.grad_t = coeff_t.rowwise().sum().asDiagonal() * t - coeff_t * t;
    res.value = total / (static_cast<double>(b) * static_cast<double>(b - 1));
    detail::check_finite(res.value, "regularizer_on_features");
    return res;
}

// Batch mean of the representation regularizer with s = softmax(logits).
// Gradients flow to the logits; SSL embeddings receive gradients only when
// cfg.couple_ssl is set.
inline LossReport representation_regularizer(const BatchOutputs& out, const RegularizerConfig& cfg,
                                             const std::optional<FrozenNormalizers>& frozen = std::nullopt) {
    out.validate();
    require(out.ssl.rows() == out.batch(), "representation_regularizer: ssl embeddings required");
    const Eigen::MatrixXd p = softmax_rows(out.logits);
    const auto core = regularizer_on_features(out.ssl, p, cfg, cfg.couple_ssl, frozen);
    LossReport rep;
    rep.value = core.value;
    rep.degenerate = core.norm_t.degenerate && core.norm_s.degenerate;
    rep.grad_logits = softmax_backward(p, core.grad_s);
    if (cfg.couple_ssl) rep.grad_ssl = core.grad_t;
    return rep;
}

enum class SlLoss { Ce, Mae, Gce, Fw, Peer };

inline SlLoss parse_sl_loss(const std::string& name) {
    if (name == "ce") return SlLoss::Ce;
    if (name == "mae") return SlLoss::Mae;
    if (name == "gce") return SlLoss::Gce;
    if (name == "fw") return SlLoss::Fw;
    if (name == "peer") return SlLoss::Peer;
    throw validation_error("unknown loss selector '" + name + "' (expected ce|mae|gce|fw|peer)");
}

inline std::string sl_loss_name(SlLoss l) {
    switch (l) {
        case SlLoss::Ce: return "ce";
        case SlLoss::Mae: return "mae";
        case SlLoss::Gce: return "gce";
        case SlLoss::Fw: return "fw";
        case SlLoss::Peer: return "peer";
    }
    return "?";
}

struct SlLossParams {
    SlLoss kind = SlLoss::Ce;
    double gce_q = 0.7;
    double peer_alpha = 1.0;
    std::optional<noise::TransitionMatrix> transition;          // fw
    std::optional<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> peer_perms;
};

inline LossReport supervised_loss(const BatchOutputs& out, const SlLossParams& params) {
    switch (params.kind) {
        case SlLoss::Ce: return cross_entropy(out);
        case SlLoss::Mae: return mae_loss(out);
        case SlLoss::Gce: return gce_loss(out, params.gce_q);
        case SlLoss::Fw:
            require(params.transition.has_value(), "supervised_loss: fw loss needs a transition matrix");
            return forward_corrected_ce(out, *params.transition);
        case SlLoss::Peer:
            require(params.peer_perms.has_value(), "supervised_loss: peer loss needs permutations");
            return peer_loss(out, params.peer_perms->first, params.peer_perms->second, params.peer_alpha);
    }
    throw validation_error("supervised_loss: unknown selector");
}

struct TotalLossBreakdown {
    LossReport total;
    double sl_value = 0.0;
    double info_value = 0.0;
    double reg_value = 0.0;  // raw (unweighted) regularizer value
    bool reg_degenerate = false;
};

// value = SL + InfoNCE + lambda * regularizer; gradients are the same sum.
// The regularizer value is always evaluated (for reporting) but only
// contributes gradients scaled by lambda.
inline TotalLossBreakdown total_loss(const BatchOutputs& out, const SlLossParams& sl,
                                     const RegularizerConfig& cfg, double temperature,
                                     bool info_enabled = true,
                                     const std::optional<FrozenNormalizers>& frozen = std::nullopt) {
    TotalLossBreakdown res;
    LossReport slr = supervised_loss(out, sl);
    res.sl_value = slr.value;

    res.total.value = slr.value;
    res.total.grad_logits = std::move(slr.grad_logits);
    res.total.grad_ssl = Eigen::MatrixXd::Zero(out.ssl.rows(), out.ssl.cols());
    if (out.ssl_aug) res.total.grad_ssl_aug = Eigen::MatrixXd::Zero(out.ssl.rows(), out.ssl.cols());

    if (info_enabled) {
        LossReport info = info_nce(out, temperature);
        res.info_value = info.value;
        res.total.value += info.value;
        *res.total.grad_ssl += *info.grad_ssl;
        *res.total.grad_ssl_aug += *info.grad_ssl_aug;
    }

    LossReport reg = representation_regularizer(out, cfg, frozen);
    res.reg_value = reg.value;
    res.reg_degenerate = reg.degenerate;
    if (cfg.lambda > 0.0) {
        res.total.value += cfg.lambda * reg.value;
        res.total.grad_logits += cfg.lambda * reg.grad_logits;
        if (reg.grad_ssl) *res.total.grad_ssl += cfg.lambda * *reg.grad_ssl;
    }
    detail::check_finite(res.total.value, "total_loss");
    return res;
}

}  // namespace nlab::losses

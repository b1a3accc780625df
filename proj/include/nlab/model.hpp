#pragma once

// Small MLP realizing the encoder / linear-classifier / projection-head
// decomposition, with hand-written forward and backward passes, SGD and
// Adam updates, optional encoder freezing, Gaussian-jitter augmentation
// and the training loop. Double precision throughout.

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "nlab/common.hpp"
#include "nlab/dataset.hpp"
#include "nlab/losses.hpp"

namespace nlab::model {

struct LayerParams {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
};

// Hidden-layer nonlinearity. Tanh is the default (and the one the
// finite-difference suites probe); relu fits noise much more aggressively
// and is what the overfitting experiments use.
enum class Activation { Tanh, Relu };

inline Activation parse_activation(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw validation_error("unknown activation '" + name + "' (expected tanh|relu)");
}

struct NetworkParams {
    std::vector<LayerParams> encoder;  // activation after every layer
    LayerParams classifier;            // linear, K x H
    LayerParams proj_hidden;           // activation
    LayerParams proj_out;              // linear, P x hidden
    Activation activation = Activation::Tanh;

    int input_dim() const {
        return static_cast<int>(encoder.empty() ? classifier.weight.cols() : encoder.front().weight.cols());
    }
    int repr_dim() const { return static_cast<int>(classifier.weight.cols()); }
    int num_classes() const { return static_cast<int>(classifier.weight.rows()); }
    int proj_dim() const { return static_cast<int>(proj_out.weight.rows()); }

    bool all_finite() const {
        auto ok = [](const LayerParams& l) { return l.weight.allFinite() && l.bias.allFinite(); };
        for (const auto& l : encoder)
            if (!ok(l)) return false;
        return ok(classifier) && ok(proj_hidden) && ok(proj_out);
    }
};

namespace detail {

inline LayerParams init_layer(int out, int in, Rng& rng) {
    LayerParams l;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    l.weight.resize(out, in);
    for (int i = 0; i < out; ++i)
        for (int j = 0; j < in; ++j) l.weight(i, j) = rng.uniform(-bound, bound);
    l.bias.resize(out);
    for (int i = 0; i < out; ++i) l.bias[i] = rng.uniform(-bound, bound);
    return l;
}

inline Eigen::MatrixXd affine(const Eigen::MatrixXd& x, const LayerParams& l) {
    return (x * l.weight.transpose()).rowwise() + l.bias.transpose();
}

inline Eigen::MatrixXd activate(const Eigen::MatrixXd& a, Activation act) {
    if (act == Activation::Tanh) return a.array().tanh();
    return a.cwiseMax(0.0);
}

// derivative expressed through the post-activation value
inline Eigen::ArrayXXd activation_deriv(const Eigen::MatrixXd& post, Activation act) {
    if (act == Activation::Tanh) return 1.0 - post.array().square();
    return (post.array() > 0.0).cast<double>();
}

}  // namespace detail

// dims = [input, hidden...]; the encoder is one tanh layer per adjacent
// pair, so dims = [D] yields an empty encoder and g∘f affine in x.
// proj_hidden_dim = 0 picks the representation width.
inline NetworkParams init_network(const std::vector<int>& dims, int num_classes, int proj_dim,
                                  std::uint64_t seed, int proj_hidden_dim = 0,
                                  Activation activation = Activation::Tanh) {
    require(!dims.empty(), "init_network: dims must be non-empty");
    for (int d : dims) require(d >= 1, "init_network: all layer sizes must be >= 1");
    require(num_classes >= 2, "init_network: need at least 2 classes");
    require(proj_dim >= 1, "init_network: projection dim must be >= 1");
    Rng rng(mix_seed(seed, 7));
    NetworkParams p;
    p.activation = activation;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
        p.encoder.push_back(detail::init_layer(dims[i + 1], dims[i], rng));
    const int repr = dims.back();
    const int ph = proj_hidden_dim > 0 ? proj_hidden_dim : repr;
    p.classifier = detail::init_layer(num_classes, repr, rng);
    p.proj_hidden = detail::init_layer(ph, repr, rng);
    p.proj_out = detail::init_layer(proj_dim, ph, rng);
    return p;
}

struct ForwardCache {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> enc_acts;  // post-tanh activations
    Eigen::MatrixXd proj_hidden_act;
    bool has_aug = false;
    Eigen::MatrixXd input_aug;
    std::vector<Eigen::MatrixXd> enc_acts_aug;
    Eigen::MatrixXd proj_hidden_act_aug;

    const Eigen::MatrixXd& repr() const { return enc_acts.empty() ? input : enc_acts.back(); }
    const Eigen::MatrixXd& repr_aug() const { return enc_acts_aug.empty() ? input_aug : enc_acts_aug.back(); }
};

struct ForwardResult {
    losses::BatchOutputs outputs;
    ForwardCache cache;
};

inline ForwardResult forward(const NetworkParams& p, const Eigen::MatrixXd& x,
                             const std::optional<Eigen::MatrixXd>& x_aug = std::nullopt) {
    require(static_cast<int>(x.cols()) == p.input_dim(), "forward: feature dim does not match first layer");
    ForwardResult fr;
    auto& c = fr.cache;
    c.input = x;
    Eigen::MatrixXd z = x;
    for (const auto& l : p.encoder) {
        z = detail::activate(detail::affine(z, l), p.activation);
        c.enc_acts.push_back(z);
    }
    fr.outputs.logits = detail::affine(z, p.classifier);
    c.proj_hidden_act = detail::activate(detail::affine(z, p.proj_hidden), p.activation);
    fr.outputs.ssl = detail::affine(c.proj_hidden_act, p.proj_out);

    if (x_aug) {
        require(x_aug->rows() == x.rows() && x_aug->cols() == x.cols(),
                "forward: augmented batch shape must match");
        c.has_aug = true;
        c.input_aug = *x_aug;
        Eigen::MatrixXd za = *x_aug;
        for (const auto& l : p.encoder) {
            za = detail::activate(detail::affine(za, l), p.activation);
            c.enc_acts_aug.push_back(za);
        }
        c.proj_hidden_act_aug = detail::activate(detail::affine(za, p.proj_hidden), p.activation);
        fr.outputs.ssl_aug = detail::affine(c.proj_hidden_act_aug, p.proj_out);
    }
    return fr;
}

inline Eigen::MatrixXd logits_of(const NetworkParams& p, const Eigen::MatrixXd& x) {
    require(static_cast<int>(x.cols()) == p.input_dim(), "logits_of: feature dim does not match first layer");
    Eigen::MatrixXd z = x;
    for (const auto& l : p.encoder) z = detail::activate(detail::affine(z, l), p.activation);
    return detail::affine(z, p.classifier);
}

struct ParamGrads {
    std::vector<LayerParams> encoder;
    LayerParams classifier, proj_hidden, proj_out;
};

namespace detail {

inline LayerParams zero_like(const LayerParams& l) {
    return {Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
            Eigen::VectorXd::Zero(l.bias.size())};
}

// Backprop of one projection+encoder path; accumulates parameter grads and
// consumes the cached activations of that path.
inline void backprop_path(const NetworkParams& p, const Eigen::MatrixXd& input,
                          const std::vector<Eigen::MatrixXd>& enc_acts,
                          const Eigen::MatrixXd& proj_hidden_act,
                          const Eigen::MatrixXd* d_ssl, const Eigen::MatrixXd* d_logits,
                          ParamGrads& g) {
    const Eigen::MatrixXd& repr = enc_acts.empty() ? input : enc_acts.back();
    Eigen::MatrixXd d_repr = Eigen::MatrixXd::Zero(repr.rows(), repr.cols());

    if (d_logits) {
        g.classifier.weight += d_logits->transpose() * repr;
        g.classifier.bias += d_logits->colwise().sum().transpose();
        d_repr += *d_logits * p.classifier.weight;
    }
    if (d_ssl) {
        g.proj_out.weight += d_ssl->transpose() * proj_hidden_act;
        g.proj_out.bias += d_ssl->colwise().sum().transpose();
        Eigen::MatrixXd dh = *d_ssl * p.proj_out.weight;
        dh.array() *= detail::activation_deriv(proj_hidden_act, p.activation);
        g.proj_hidden.weight += dh.transpose() * repr;
        g.proj_hidden.bias += dh.colwise().sum().transpose();
        d_repr += dh * p.proj_hidden.weight;
    }
    for (std::size_t li = p.encoder.size(); li-- > 0;) {
        const Eigen::MatrixXd& act = enc_acts[li];
        const Eigen::MatrixXd& prev = (li == 0) ? input : enc_acts[li - 1];
        Eigen::MatrixXd da = d_repr;
        da.array() *= detail::activation_deriv(act, p.activation);
        g.encoder[li].weight += da.transpose() * prev;
        g.encoder[li].bias += da.colwise().sum().transpose();
        d_repr = da * p.encoder[li].weight;
    }
}

}  // namespace detail

inline ParamGrads backward(const NetworkParams& p, const ForwardResult& fr, const losses::LossReport& rep) {
    ParamGrads g;
    for (const auto& l : p.encoder) g.encoder.push_back(detail::zero_like(l));
    g.classifier = detail::zero_like(p.classifier);
    g.proj_hidden = detail::zero_like(p.proj_hidden);
    g.proj_out = detail::zero_like(p.proj_out);

    const Eigen::MatrixXd* d_ssl =
        rep.grad_ssl && rep.grad_ssl->size() > 0 ? &*rep.grad_ssl : nullptr;
    const Eigen::MatrixXd* d_logits = rep.grad_logits.size() > 0 ? &rep.grad_logits : nullptr;
    detail::backprop_path(p, fr.cache.input, fr.cache.enc_acts, fr.cache.proj_hidden_act, d_ssl,
                          d_logits, g);
    if (rep.grad_ssl_aug && rep.grad_ssl_aug->size() > 0) {
        require(fr.cache.has_aug, "backward: aug gradients without an aug forward pass");
        detail::backprop_path(p, fr.cache.input_aug, fr.cache.enc_acts_aug,
                              fr.cache.proj_hidden_act_aug, &*rep.grad_ssl_aug, nullptr, g);
    }
    return g;
}

enum class Optimizer { Sgd, Adam };

inline Optimizer parse_optimizer(const std::string& name) {
    if (name == "sgd") return Optimizer::Sgd;
    if (name == "adam") return Optimizer::Adam;
    throw validation_error("unknown optimizer '" + name + "' (expected sgd|adam)");
}

struct TrainConfig {
    int epochs = 1;
    int batch_size = 128;
    double learning_rate = 1e-3;
    Optimizer optimizer = Optimizer::Adam;
    bool freeze_encoder = false;
    losses::SlLossParams sl;
    losses::RegularizerConfig reg;
    double temperature = 0.5;
    bool info_enabled = true;
    double jitter_std = 0.1;
    std::uint64_t seed = 0;
    std::vector<int> hidden_dims = {64, 64};
    int proj_dim = 16;
    int proj_hidden_dim = 0;
    Activation activation = Activation::Tanh;

    void validate() const {
        require(epochs >= 1, "TrainConfig: epochs must be >= 1");
        require(batch_size >= 2, "TrainConfig: batch_size must be >= 2");
        require(learning_rate > 0.0, "TrainConfig: learning_rate must be > 0");
        require(temperature > 0.0, "TrainConfig: temperature must be > 0");
        require(jitter_std >= 0.0, "TrainConfig: jitter_std must be >= 0");
        reg.validate();
    }
};

struct OptimizerState {
    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;
    long step = 0;
};

namespace detail {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

inline void adam_update(Eigen::MatrixXd& w, const Eigen::MatrixXd& g, Eigen::MatrixXd& m,
                        Eigen::MatrixXd& v, double lr, double bc1, double bc2) {
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
    v = kAdamBeta2 * v.array().matrix() + (1.0 - kAdamBeta2) * g.array().square().matrix();
    w.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kAdamEps);
}

inline void adam_update(Eigen::VectorXd& w, const Eigen::VectorXd& g, Eigen::VectorXd& m,
                        Eigen::VectorXd& v, double lr, double bc1, double bc2) {
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
    v = kAdamBeta2 * v.array().matrix() + (1.0 - kAdamBeta2) * g.array().square().matrix();
    w.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kAdamEps);
}

}  // namespace detail

// One optimizer step. Encoder parameters are left untouched (bit-identical)
// when freeze_encoder is set. Non-finite gradients abort.
inline void apply_update(NetworkParams& p, const ParamGrads& g, const TrainConfig& cfg,
                         OptimizerState& state) {
    std::vector<LayerParams*> params;
    std::vector<const LayerParams*> grads;
    std::vector<bool> frozen;
    for (std::size_t i = 0; i < p.encoder.size(); ++i) {
        params.push_back(&p.encoder[i]);
        grads.push_back(&g.encoder[i]);
        frozen.push_back(cfg.freeze_encoder);
    }
    for (auto [pp, gg] : {std::pair{&p.classifier, &g.classifier},
                          std::pair{&p.proj_hidden, &g.proj_hidden},
                          std::pair{&p.proj_out, &g.proj_out}}) {
        params.push_back(pp);
        grads.push_back(gg);
        frozen.push_back(false);
    }
    for (const auto* gg : grads)
        if (!gg->weight.allFinite() || !gg->bias.allFinite())
            throw numerical_error("apply_update: non-finite gradient encountered");

    if (state.m_w.size() != params.size()) {
        state.m_w.clear(); state.v_w.clear(); state.m_b.clear(); state.v_b.clear();
        for (const auto* pp : params) {
            state.m_w.push_back(Eigen::MatrixXd::Zero(pp->weight.rows(), pp->weight.cols()));
            state.v_w.push_back(Eigen::MatrixXd::Zero(pp->weight.rows(), pp->weight.cols()));
            state.m_b.push_back(Eigen::VectorXd::Zero(pp->bias.size()));
            state.v_b.push_back(Eigen::VectorXd::Zero(pp->bias.size()));
        }
        state.step = 0;
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(detail::kAdamBeta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(detail::kAdamBeta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (frozen[i]) continue;
        if (cfg.optimizer == Optimizer::Sgd) {
            params[i]->weight -= cfg.learning_rate * grads[i]->weight;
            params[i]->bias -= cfg.learning_rate * grads[i]->bias;
        } else {
            detail::adam_update(params[i]->weight, grads[i]->weight, state.m_w[i], state.v_w[i],
                                cfg.learning_rate, bc1, bc2);
            detail::adam_update(params[i]->bias, grads[i]->bias, state.m_b[i], state.v_b[i],
                                cfg.learning_rate, bc1, bc2);
        }
    }
}

inline void backward_and_step(NetworkParams& p, const ForwardResult& fr, const losses::LossReport& rep,
                              const TrainConfig& cfg, OptimizerState& state) {
    apply_update(p, backward(p, fr, rep), cfg, state);
}

// i.i.d. zero-mean Gaussian jitter; jitter_std = 0 returns the input as-is.
inline Eigen::MatrixXd augment(const Eigen::MatrixXd& x, double jitter_std, std::uint64_t seed) {
    require(jitter_std >= 0.0, "augment: jitter_std must be >= 0");
    if (jitter_std == 0.0) return x;
    Rng rng(seed);
    Eigen::MatrixXd out = x;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) += jitter_std * rng.normal();
    return out;
}

// Fraction of argmax(logits) matching the requested label column; argmax
// ties break toward the lowest class id.
inline double evaluate(const NetworkParams& p, const data::Dataset& ds, bool use_clean) {
    ds.validate();
    const std::vector<int>* labels = nullptr;
    if (use_clean) {
        labels = &ds.clean_labels;
    } else {
        require(ds.noisy_labels.has_value(), "evaluate: noisy labels requested but absent");
        labels = &*ds.noisy_labels;
    }
    const Eigen::MatrixXd logits = logits_of(p, ds.features);
    std::size_t hits = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        int best = 0;
        for (Eigen::Index k = 1; k < logits.cols(); ++k)
            if (logits(i, k) > logits(i, best)) best = static_cast<int>(k);
        if (best == (*labels)[static_cast<std::size_t>(i)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

struct EpochRecord {
    int epoch = 0;
    double noisy_train_acc = 0.0;
    double clean_train_acc = 0.0;
    double clean_test_acc = 0.0;
    double loss_sl = 0.0;
    double loss_info = 0.0;
    double loss_reg = 0.0;
};

struct TrainTrace {
    std::vector<EpochRecord> rows;  // rows[e] = state after e epochs; rows[0] = init
};

struct TrainResult {
    NetworkParams params;
    TrainTrace trace;
};

namespace detail {

struct EpochLossAccum {
    double sl = 0, info = 0, reg = 0;
    std::size_t samples = 0;
    void add(const losses::TotalLossBreakdown& b, std::size_t batch) {
        const auto w = static_cast<double>(batch);
        sl += b.sl_value * w;
        info += b.info_value * w;
        reg += b.reg_value * w;
        samples += batch;
    }
};

inline Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t r = 0; r < idx.size(); ++r)
        out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(idx[r]));
    return out;
}

}  // namespace detail

// Runs the training loop on the noisy train set, evaluating against the
// clean test set each epoch. Row 0 of the trace records the freshly
// initialized network (one loss pass without updates), so runs that share
// a seed agree exactly at epoch 0 regardless of lambda.
inline TrainResult train(const data::Dataset& train_ds, const data::Dataset& test_ds,
                         const TrainConfig& cfg) {
    cfg.validate();
    train_ds.validate();
    test_ds.validate();
    require(train_ds.noisy_labels.has_value(), "train: training set must carry noisy labels");
    require(train_ds.num_classes == test_ds.num_classes, "train: class counts must match");
    if (cfg.sl.kind == losses::SlLoss::Fw)
        require(cfg.sl.transition.has_value(), "train: fw loss requires a transition matrix");

    std::vector<int> dims;
    dims.push_back(static_cast<int>(train_ds.dim()));
    for (int h : cfg.hidden_dims) dims.push_back(h);

    TrainResult res;
    res.params = init_network(dims, train_ds.num_classes, cfg.proj_dim, cfg.seed, cfg.proj_hidden_dim,
                              cfg.activation);
    OptimizerState opt;

    const auto n = static_cast<std::size_t>(train_ds.n());

    auto run_epoch = [&](int epoch, bool update) {
        detail::EpochLossAccum acc;
        const auto batch_list = data::batches(n, static_cast<std::size_t>(cfg.batch_size),
                                              mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
        std::size_t bi = 0;
        for (const auto& idx : batch_list) {
            const Eigen::MatrixXd x = detail::gather_rows(train_ds.features, idx);
            std::optional<Eigen::MatrixXd> x_aug;
            if (cfg.info_enabled)
                x_aug = augment(x, cfg.jitter_std,
                                mix_seed(mix_seed(cfg.seed, 2000000 + static_cast<std::uint64_t>(epoch)), bi));
            ForwardResult fr = forward(res.params, x, x_aug);
            fr.outputs.noisy_labels.resize(idx.size());
            for (std::size_t r = 0; r < idx.size(); ++r)
                fr.outputs.noisy_labels[r] = (*train_ds.noisy_labels)[idx[r]];

            losses::SlLossParams sl = cfg.sl;
            if (sl.kind == losses::SlLoss::Peer) {
                Rng prng(mix_seed(mix_seed(cfg.seed, 3000000 + static_cast<std::uint64_t>(epoch)), bi));
                sl.peer_perms = {prng.permutation(idx.size()), prng.permutation(idx.size())};
            }
            const auto breakdown =
                losses::total_loss(fr.outputs, sl, cfg.reg, cfg.temperature, cfg.info_enabled);
            acc.add(breakdown, idx.size());
            if (update) backward_and_step(res.params, fr, breakdown.total, cfg, opt);
            ++bi;
        }
        return acc;
    };

    auto record = [&](int epoch, const detail::EpochLossAccum& acc) {
        EpochRecord row;
        row.epoch = epoch;
        // one logits pass over the train set serves both accuracy columns
        const Eigen::MatrixXd train_logits = logits_of(res.params, train_ds.features);
        std::size_t noisy_hits = 0, clean_hits = 0;
        for (Eigen::Index i = 0; i < train_logits.rows(); ++i) {
            int best = 0;
            for (Eigen::Index c = 1; c < train_logits.cols(); ++c)
                if (train_logits(i, c) > train_logits(i, best)) best = static_cast<int>(c);
            noisy_hits += best == (*train_ds.noisy_labels)[static_cast<std::size_t>(i)];
            clean_hits += best == train_ds.clean_labels[static_cast<std::size_t>(i)];
        }
        row.noisy_train_acc = static_cast<double>(noisy_hits) / static_cast<double>(train_logits.rows());
        row.clean_train_acc = static_cast<double>(clean_hits) / static_cast<double>(train_logits.rows());
        row.clean_test_acc = evaluate(res.params, test_ds, /*use_clean=*/true);
        const auto w = static_cast<double>(acc.samples ? acc.samples : 1);
        row.loss_sl = acc.sl / w;
        row.loss_info = acc.info / w;
        row.loss_reg = acc.reg / w;
        res.trace.rows.push_back(row);
    };

    record(0, run_epoch(0, /*update=*/false));
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) record(epoch, run_epoch(epoch, /*update=*/true));
    return res;
}

// Per-epoch metrics with the fixed column schema shared by every consumer.
inline void write_metrics_csv(const TrainTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << "epoch,noisy_train_acc,clean_train_acc,clean_test_acc,loss_sl,loss_info,loss_reg\n";
    for (const auto& r : trace.rows)
        out << r.epoch << "," << fmt_g9(r.noisy_train_acc) << "," << fmt_g9(r.clean_train_acc) << ","
            << fmt_g9(r.clean_test_acc) << "," << fmt_g9(r.loss_sl) << "," << fmt_g9(r.loss_info) << ","
            << fmt_g9(r.loss_reg) << "\n";
    if (!out) throw io_error("write failed: " + path);
}

// Flat binary parameter file. Layout:
//   magic "NLAB1"
//   u32 layer count L (little-endian), each layer = weight + bias
//   L x { u32 out_dim, u32 in_dim }
//   L x { weight row-major f64, bias f64 }
// Layer order: encoder layers, classifier, projection hidden, projection
// out — so the encoder always has L - 3 layers.
inline void save_params(const NetworkParams& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    out.write("NLAB1", 5);
    std::vector<const LayerParams*> layers;
    for (const auto& l : p.encoder) layers.push_back(&l);
    layers.push_back(&p.classifier);
    layers.push_back(&p.proj_hidden);
    layers.push_back(&p.proj_out);
    auto write_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    write_u32(static_cast<std::uint32_t>(layers.size()));
    for (const auto* l : layers) {
        write_u32(static_cast<std::uint32_t>(l->weight.rows()));
        write_u32(static_cast<std::uint32_t>(l->weight.cols()));
    }
    for (const auto* l : layers) {
        for (Eigen::Index i = 0; i < l->weight.rows(); ++i)
            for (Eigen::Index j = 0; j < l->weight.cols(); ++j) {
                const double v = l->weight(i, j);
                out.write(reinterpret_cast<const char*>(&v), 8);
            }
        for (Eigen::Index i = 0; i < l->bias.size(); ++i) {
            const double v = l->bias[i];
            out.write(reinterpret_cast<const char*>(&v), 8);
        }
    }
    if (!out) throw io_error("write failed: " + path);
}

inline NetworkParams load_params(const std::string& path, Activation activation = Activation::Tanh) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open for reading: " + path);
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, "NLAB1", 5) != 0)
        throw io_error(path + ": bad magic, not a parameter file");
    auto read_u32 = [&]() {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    const std::uint32_t count = read_u32();
    if (!in || count < 3) throw io_error(path + ": layer count must be at least 3");
    std::vector<std::pair<std::uint32_t, std::uint32_t>> dims(count);
    for (auto& d : dims) {
        d.first = read_u32();
        d.second = read_u32();
    }
    std::vector<LayerParams> layers(count);
    for (std::uint32_t li = 0; li < count; ++li) {
        layers[li].weight.resize(dims[li].first, dims[li].second);
        for (std::uint32_t i = 0; i < dims[li].first; ++i)
            for (std::uint32_t j = 0; j < dims[li].second; ++j) {
                double v = 0;
                in.read(reinterpret_cast<char*>(&v), 8);
                layers[li].weight(i, j) = v;
            }
        layers[li].bias.resize(dims[li].first);
        for (std::uint32_t i = 0; i < dims[li].first; ++i) {
            double v = 0;
            in.read(reinterpret_cast<char*>(&v), 8);
            layers[li].bias[i] = v;
        }
    }
    if (!in) throw io_error(path + ": truncated parameter file");
    NetworkParams p;
    p.activation = activation;
    for (std::uint32_t li = 0; li + 3 < count; ++li) p.encoder.push_back(std::move(layers[li]));
    p.classifier = std::move(layers[count - 3]);
    p.proj_hidden = std::move(layers[count - 2]);
    p.proj_out = std::move(layers[count - 1]);
    require(p.all_finite(), path + ": non-finite parameters");
    return p;
}

}  // namespace nlab::model

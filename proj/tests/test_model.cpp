#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "nlab/model.hpp"
#include "nlab/noise.hpp"
#include "support/finite_diff.hpp"

using namespace nlab;

namespace {

bool layers_equal(const model::LayerParams& a, const model::LayerParams& b) {
    return a.weight == b.weight && a.bias == b.bias;
}

bool params_equal(const model::NetworkParams& a, const model::NetworkParams& b) {
    if (a.encoder.size() != b.encoder.size()) return false;
    for (std::size_t i = 0; i < a.encoder.size(); ++i)
        if (!layers_equal(a.encoder[i], b.encoder[i])) return false;
    return layers_equal(a.classifier, b.classifier) && layers_equal(a.proj_hidden, b.proj_hidden) &&
           layers_equal(a.proj_out, b.proj_out);
}

data::Dataset gaussian_pair(double mean_x, std::size_t n, std::uint64_t seed) {
    data::GaussianMixtureSpec spec;
    spec.means.resize(2, 2);
    spec.means << -mean_x, 0.0, mean_x, 0.0;
    spec.shared_cov_scale = 1.0;
    spec.class_priors = Eigen::Vector2d(0.5, 0.5);
    spec.n_samples = n;
    return data::generate_gaussian_mixture(spec, seed);
}

}  // namespace

TEST_CASE("init_network: determinism, shapes, affine degenerate case", "[model]") {
    const auto a = model::init_network({2, 8, 4}, 3, 5, 42);
    const auto b = model::init_network({2, 8, 4}, 3, 5, 42);
    CHECK(params_equal(a, b));
    CHECK(a.encoder.size() == 2);
    CHECK(a.num_classes() == 3);
    CHECK(a.proj_dim() == 5);

    const auto fr = model::forward(a, Eigen::MatrixXd::Random(7, 2));
    CHECK(fr.outputs.logits.rows() == 7);
    CHECK(fr.outputs.logits.cols() == 3);
    CHECK(fr.outputs.ssl.cols() == 5);

    // zero-hidden-layer encoder: logits are affine in x
    const auto lin = model::init_network({3}, 2, 2, 1);
    CHECK(lin.encoder.empty());
    Eigen::MatrixXd x1 = Eigen::MatrixXd::Random(1, 3), x2 = Eigen::MatrixXd::Random(1, 3);
    const Eigen::MatrixXd f1 = model::logits_of(lin, x1);
    const Eigen::MatrixXd f2 = model::logits_of(lin, x2);
    const Eigen::MatrixXd fsum = model::logits_of(lin, x1 + x2);
    const Eigen::MatrixXd f0 = model::logits_of(lin, Eigen::MatrixXd::Zero(1, 3));
    CHECK((fsum - f1 - f2 + f0).cwiseAbs().maxCoeff() < 1e-12);

    CHECK_THROWS_AS(model::init_network({}, 2, 2, 1), validation_error);
}

TEST_CASE("forward: identity-weight network matches a hand computation", "[model]") {
    model::NetworkParams p;
    p.encoder.push_back({Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero()});
    p.classifier = {Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero()};
    p.proj_hidden = {Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero()};
    p.proj_out = {Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero()};

    Eigen::MatrixXd x(2, 2);
    x << 0.5, -0.25, 1.0, 2.0;
    const auto fr = model::forward(p, x);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            CHECK(fr.outputs.logits(i, j) == Catch::Approx(std::tanh(x(i, j))).margin(1e-15));
            CHECK(fr.outputs.ssl(i, j) ==
                  Catch::Approx(std::tanh(std::tanh(x(i, j)))).margin(1e-15));
        }
}

TEST_CASE("forward: duplicated rows and bounded inputs behave", "[model]") {
    const auto p = model::init_network({3, 6}, 2, 4, 9);
    Eigen::MatrixXd x(2, 3);
    x << 1.0, -2.0, 0.5, 1.0, -2.0, 0.5;
    const auto fr = model::forward(p, x);
    CHECK(fr.outputs.logits.row(0) == fr.outputs.logits.row(1));
    CHECK(fr.outputs.ssl.row(0) == fr.outputs.ssl.row(1));

    Eigen::MatrixXd big = Eigen::MatrixXd::Constant(4, 3, 1e3);
    const auto fb = model::forward(p, big);
    CHECK(fb.outputs.logits.allFinite());
    CHECK(fb.outputs.ssl.allFinite());

    CHECK_THROWS_AS(model::forward(p, Eigen::MatrixXd::Zero(2, 5)), validation_error);
}

TEST_CASE("augment: zero jitter, empirical std, determinism", "[model]") {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(100, 5);
    CHECK(model::augment(x, 0.0, 3) == x);

    const Eigen::MatrixXd big = Eigen::MatrixXd::Zero(20000, 5);
    const Eigen::MatrixXd jit = model::augment(big, 0.25, 4);
    const double mean = jit.mean();
    const double var = (jit.array() - mean).square().mean();
    CHECK(std::abs(std::sqrt(var) - 0.25) < 0.05 * 0.25);

    CHECK(model::augment(x, 0.1, 5) == model::augment(x, 0.1, 5));
}

TEST_CASE("apply_update: zero gradients keep parameters fixed", "[model]") {
    for (auto opt : {model::Optimizer::Sgd, model::Optimizer::Adam}) {
        auto p = model::init_network({2, 4}, 2, 3, 11);
        const auto before = p;
        model::ParamGrads g;
        for (const auto& l : p.encoder) g.encoder.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
        g.classifier = {Eigen::MatrixXd::Zero(2, 4), Eigen::VectorXd::Zero(2)};
        g.proj_hidden = {Eigen::MatrixXd::Zero(4, 4), Eigen::VectorXd::Zero(4)};
        g.proj_out = {Eigen::MatrixXd::Zero(3, 4), Eigen::VectorXd::Zero(3)};
        model::TrainConfig cfg;
        cfg.optimizer = opt;
        model::OptimizerState st;
        model::apply_update(p, g, cfg, st);
        CHECK(params_equal(p, before));
    }
}

TEST_CASE("apply_update: non-finite gradients abort", "[model]") {
    auto p = model::init_network({2, 4}, 2, 3, 11);
    model::ParamGrads g;
    for (const auto& l : p.encoder) g.encoder.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    g.classifier = {Eigen::MatrixXd::Zero(2, 4), Eigen::VectorXd::Zero(2)};
    g.proj_hidden = {Eigen::MatrixXd::Zero(4, 4), Eigen::VectorXd::Zero(4)};
    g.proj_out = {Eigen::MatrixXd::Zero(3, 4), Eigen::VectorXd::Zero(3)};
    g.classifier.weight(0, 0) = std::numeric_limits<double>::quiet_NaN();
    model::TrainConfig cfg;
    model::OptimizerState st;
    CHECK_THROWS_AS(model::apply_update(p, g, cfg, st), numerical_error);
}

TEST_CASE("freeze_encoder: encoder bits never move", "[model]") {
    auto ds = gaussian_pair(2.0, 200, 21);
    ds.noisy_labels = ds.clean_labels;
    auto p = model::init_network({2, 8, 8}, 2, 4, 22);
    const auto frozen_before = p;
    model::TrainConfig cfg;
    cfg.freeze_encoder = true;
    cfg.batch_size = 50;
    model::OptimizerState st;
    for (int step = 0; step < 5; ++step) {
        const Eigen::MatrixXd x = ds.features.topRows(50);
        auto fr = model::forward(p, x, model::augment(x, 0.1, static_cast<std::uint64_t>(step)));
        fr.outputs.noisy_labels.assign(ds.clean_labels.begin(), ds.clean_labels.begin() + 50);
        const auto breakdown = losses::total_loss(fr.outputs, {}, {}, 0.5, true);
        model::backward_and_step(p, fr, breakdown.total, cfg, st);
    }
    for (std::size_t i = 0; i < p.encoder.size(); ++i)
        CHECK(layers_equal(p.encoder[i], frozen_before.encoder[i]));
    CHECK_FALSE(layers_equal(p.classifier, frozen_before.classifier));
    CHECK_FALSE(layers_equal(p.proj_out, frozen_before.proj_out));
}

TEST_CASE("end-to-end gradient matches finite differences", "[model]") {
    for (std::uint64_t trial = 0; trial < 3; ++trial) {
        auto p = model::init_network({2, 4}, 3, 2, 100 + trial, 3);
        Rng rng(200 + trial);
        Eigen::MatrixXd x(3, 2), xa(3, 2);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 2; ++j) {
                x(i, j) = rng.normal();
                xa(i, j) = rng.normal();
            }
        std::vector<int> labels{0, 2, 1};

        losses::SlLossParams sl;
        losses::RegularizerConfig cfg;
        cfg.couple_ssl = true;  // full coupling so the oracle sees every path
        cfg.sl_backward_floor = 0.0;

        auto eval_with = [&](const std::optional<losses::FrozenNormalizers>& frozen) {
            auto fr = model::forward(p, x, xa);
            fr.outputs.noisy_labels = labels;
            return losses::total_loss(fr.outputs, sl, cfg, 0.5, true, frozen);
        };
        // freeze the normalizers at their base-point values
        auto fr0 = model::forward(p, x, xa);
        fr0.outputs.noisy_labels = labels;
        const losses::FrozenNormalizers pinned{
            losses::pairwise_normalizer(fr0.outputs.ssl, cfg.w_ssl, cfg.epsilon_floor).value,
            losses::pairwise_normalizer(losses::softmax_rows(fr0.outputs.logits), cfg.w_sl,
                                        cfg.epsilon_floor)
                .value};

        auto grads = model::backward(p, fr0, eval_with(pinned).total);
        const double err = fd::network_grad_rel_err(p, grads, [&] { return eval_with(pinned).total.value; });
        CHECK(err < 1e-4);
    }
}

TEST_CASE("full-batch descent on a convex case strictly decreases", "[model]") {
    auto ds = gaussian_pair(1.0, 120, 33);
    ds.noisy_labels = ds.clean_labels;
    auto p = model::init_network({2}, 2, 2, 34);  // linear model: convex CE
    model::TrainConfig cfg;
    cfg.optimizer = model::Optimizer::Sgd;
    cfg.learning_rate = 0.05;
    model::OptimizerState st;
    double prev = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 100; ++step) {
        auto fr = model::forward(p, ds.features);
        fr.outputs.noisy_labels = ds.clean_labels;
        const auto rep = losses::cross_entropy(fr.outputs);
        CHECK(rep.value < prev);
        prev = rep.value;
        model::backward_and_step(p, fr, rep, cfg, st);
    }
}

TEST_CASE("evaluate: exact match, random baseline, tie-break", "[model]") {
    auto ds = gaussian_pair(2.0, 100000, 41);
    // random balanced labels, fixed random predictor: accuracy concentrates at 1/2
    Rng rng(42);
    for (auto& y : ds.clean_labels) y = static_cast<int>(rng.below(2));
    const auto p = model::init_network({2, 4}, 2, 2, 43);
    const double acc = model::evaluate(p, ds, /*use_clean=*/true);
    CHECK(std::abs(acc - 0.5) < 0.01);

    CHECK_THROWS_AS(model::evaluate(p, ds, /*use_clean=*/false), validation_error);

    // ties break toward the lowest class id
    model::NetworkParams flat;
    flat.classifier = {Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2)};
    flat.proj_hidden = {Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2)};
    flat.proj_out = {Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2)};
    data::Dataset two;
    two.features = Eigen::MatrixXd::Random(4, 2);
    two.clean_labels = {0, 0, 1, 1};
    two.num_classes = 2;
    CHECK(model::evaluate(flat, two, true) == 0.5);  // always predicts class 0
}

TEST_CASE("train: clean separable data reaches high accuracy", "[model]") {
    auto train_ds = gaussian_pair(2.0, 600, 51);
    train_ds.noisy_labels = train_ds.clean_labels;  // zero noise
    const auto test_ds = gaussian_pair(2.0, 600, 52);

    model::TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch_size = 64;
    cfg.seed = 53;
    cfg.hidden_dims = {16};
    cfg.proj_dim = 4;
    cfg.info_enabled = false;
    cfg.reg.lambda = 0.0;
    const auto res = model::train(train_ds, test_ds, cfg);
    CHECK(res.trace.rows.size() == 51);
    CHECK(res.trace.rows.back().clean_test_acc > 0.95);
}

TEST_CASE("train: shared seed gives identical epoch-0 rows across lambda", "[model]") {
    auto train_ds = gaussian_pair(1.5, 300, 61);
    train_ds.noisy_labels = train_ds.clean_labels;
    const auto test_ds = gaussian_pair(1.5, 300, 62);

    model::TrainConfig a;
    a.epochs = 2;
    a.batch_size = 50;
    a.seed = 63;
    a.hidden_dims = {8};
    a.proj_dim = 4;
    a.reg.lambda = 0.0;
    model::TrainConfig b = a;
    b.reg.lambda = 1.0;

    const auto ra = model::train(train_ds, test_ds, a);
    const auto rb = model::train(train_ds, test_ds, b);
    const auto& r0a = ra.trace.rows[0];
    const auto& r0b = rb.trace.rows[0];
    CHECK(r0a.noisy_train_acc == r0b.noisy_train_acc);
    CHECK(r0a.clean_test_acc == r0b.clean_test_acc);
    CHECK(r0a.loss_sl == r0b.loss_sl);
    CHECK(r0a.loss_info == r0b.loss_info);
    CHECK(r0a.loss_reg == r0b.loss_reg);

    // and the whole run is reproducible
    const auto ra2 = model::train(train_ds, test_ds, a);
    REQUIRE(ra.trace.rows.size() == ra2.trace.rows.size());
    for (std::size_t i = 0; i < ra.trace.rows.size(); ++i) {
        CHECK(ra.trace.rows[i].clean_test_acc == ra2.trace.rows[i].clean_test_acc);
        CHECK(ra.trace.rows[i].loss_sl == ra2.trace.rows[i].loss_sl);
    }
    CHECK(params_equal(ra.params, ra2.params));
}

TEST_CASE("train: frozen and unfrozen encoders produce equal-length traces", "[model]") {
    auto train_ds = gaussian_pair(1.5, 200, 71);
    train_ds.noisy_labels = train_ds.clean_labels;
    const auto test_ds = gaussian_pair(1.5, 200, 72);
    model::TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 50;
    cfg.seed = 73;
    cfg.hidden_dims = {8};
    cfg.proj_dim = 4;
    auto frozen_cfg = cfg;
    frozen_cfg.freeze_encoder = true;
    const auto a = model::train(train_ds, test_ds, cfg);
    const auto b = model::train(train_ds, test_ds, frozen_cfg);
    CHECK(a.trace.rows.size() == b.trace.rows.size());
}

TEST_CASE("params serialize to the flat binary format and back", "[model]") {
    const auto p = model::init_network({3, 7, 5}, 4, 6, 81, 9);
    const auto path = (std::filesystem::temp_directory_path() / "nlab_params.bin").string();
    model::save_params(p, path);
    const auto q = model::load_params(path);
    CHECK(params_equal(p, q));

    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 3);
    CHECK(model::logits_of(p, x) == model::logits_of(q, x));

    {
        std::ofstream bad(path, std::ios::binary);
        bad << "WRONG";
    }
    CHECK_THROWS_AS(model::load_params(path), io_error);
    std::remove(path.c_str());
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "nlab/losses.hpp"
#include "support/finite_diff.hpp"

using namespace nlab;
using losses::BatchOutputs;

namespace {

BatchOutputs random_batch(int b, int k, int p, std::uint64_t seed, bool with_aug = true) {
    Rng rng(seed);
    BatchOutputs out;
    out.logits.resize(b, k);
    out.ssl.resize(b, p);
    for (int i = 0; i < b; ++i) {
        for (int j = 0; j < k; ++j) out.logits(i, j) = rng.normal();
        for (int j = 0; j < p; ++j) out.ssl(i, j) = rng.normal();
    }
    if (with_aug) {
        out.ssl_aug.emplace(b, p);
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < p; ++j) (*out.ssl_aug)(i, j) = rng.normal();
    }
    out.noisy_labels.resize(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) out.noisy_labels[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(k));
    return out;
}

// finite differences on the logits of a logits-only loss
template <class Loss>
double logits_fd_err(const BatchOutputs& base, Loss&& loss) {
    const auto rep = loss(base);
    BatchOutputs probe = base;
    const auto oracle = fd::grad(base.logits, [&](const Eigen::MatrixXd& l) {
        probe.logits = l;
        return loss(probe).value;
    });
    return fd::rel_err(rep.grad_logits, oracle);
}

}  // namespace

TEST_CASE("cross entropy: uniform value, margin limit, gradient", "[losses]") {
    BatchOutputs out = random_batch(3, 2, 2, 1);
    out.logits.setZero();
    CHECK(losses::cross_entropy(out).value == Catch::Approx(std::log(2.0)).margin(1e-12));

    // one-hot-correct logits with growing margin drive the loss to zero
    BatchOutputs sharp = random_batch(2, 3, 2, 2);
    sharp.noisy_labels = {1, 2};
    sharp.logits.setZero();
    sharp.logits(0, 1) = 40.0;
    sharp.logits(1, 2) = 40.0;
    CHECK(losses::cross_entropy(sharp).value < 1e-12);

    for (std::uint64_t s = 0; s < 5; ++s)
        CHECK(logits_fd_err(random_batch(4, 3, 2, 10 + s), losses::cross_entropy) < 1e-6);
}

TEST_CASE("mae: perfect, uniform, gradient", "[losses]") {
    BatchOutputs sharp = random_batch(2, 2, 2, 3);
    sharp.noisy_labels = {0, 1};
    sharp.logits << 40, 0, 0, 40;
    CHECK(losses::mae_loss(sharp).value < 1e-12);

    BatchOutputs flat = random_batch(4, 2, 2, 4);
    flat.logits.setZero();
    CHECK(losses::mae_loss(flat).value == Catch::Approx(1.0).margin(1e-12));

    for (std::uint64_t s = 0; s < 5; ++s)
        CHECK(logits_fd_err(random_batch(4, 3, 2, 20 + s), losses::mae_loss) < 1e-6);
}

TEST_CASE("gce: q=1 linearity, perfect prediction, uniform value", "[losses]") {
    const auto out = random_batch(6, 4, 2, 5);
    const auto gce1 = losses::gce_loss(out, 1.0);
    // q = 1 equals mean(1 - p_y) exactly
    const Eigen::MatrixXd p = losses::softmax_rows(out.logits);
    double linear = 0.0;
    for (int i = 0; i < 6; ++i) linear += 1.0 - p(i, out.noisy_labels[static_cast<std::size_t>(i)]);
    linear /= 6.0;
    CHECK(gce1.value == Catch::Approx(linear).margin(1e-12));

    BatchOutputs sharp = random_batch(2, 2, 2, 6);
    sharp.noisy_labels = {0, 0};
    sharp.logits << 60, 0, 60, 0;
    CHECK(losses::gce_loss(sharp, 0.7).value < 1e-12);

    BatchOutputs flat = random_batch(2, 10, 2, 7);
    flat.logits.setZero();
    CHECK(losses::gce_loss(flat, 0.7).value ==
          Catch::Approx((1.0 - std::pow(0.1, 0.7)) / 0.7).margin(1e-12));  // = 1.14353...

    CHECK_THROWS_AS(losses::gce_loss(out, 0.0), validation_error);
    CHECK_THROWS_AS(losses::gce_loss(out, 1.5), validation_error);

    for (std::uint64_t s = 0; s < 5; ++s)
        CHECK(logits_fd_err(random_batch(4, 3, 2, 30 + s),
                            [](const BatchOutputs& o) { return losses::gce_loss(o, 0.7); }) < 1e-6);
}

TEST_CASE("forward-corrected ce: identity reduction and hand value", "[losses]") {
    const auto out = random_batch(5, 3, 2, 8);
    const auto id = noise::symmetric_transition(3, 0.0);
    const auto plain = losses::cross_entropy(out);
    const auto corrected = losses::forward_corrected_ce(out, id);
    CHECK(corrected.value == Catch::Approx(plain.value).margin(1e-12));
    CHECK((corrected.grad_logits - plain.grad_logits).cwiseAbs().maxCoeff() < 1e-12);

    // p = (0.9, 0.1), symmetric eps = 0.4, label 0: -ln(0.6*0.9 + 0.4*0.1)
    BatchOutputs hand = random_batch(2, 2, 2, 9);
    hand.noisy_labels = {0, 0};
    hand.logits << std::log(0.9), std::log(0.1), std::log(0.9), std::log(0.1);
    const auto rep = losses::forward_corrected_ce(hand, noise::symmetric_transition(2, 0.4));
    CHECK(rep.value == Catch::Approx(-std::log(0.58)).margin(1e-12));

    CHECK_THROWS_AS(losses::forward_corrected_ce(out, noise::symmetric_transition(4, 0.1)),
                    validation_error);

    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto t = noise::symmetric_transition(3, 0.2 + 0.05 * static_cast<double>(s));
        CHECK(logits_fd_err(random_batch(4, 3, 2, 40 + s),
                            [&](const BatchOutputs& o) { return losses::forward_corrected_ce(o, t); }) <
              1e-6);
    }
}

TEST_CASE("peer loss: self-cancellation, alpha=0, gradient", "[losses]") {
    const auto out = random_batch(5, 3, 2, 11);
    const std::vector<std::size_t> ident{0, 1, 2, 3, 4};
    const auto cancel = losses::peer_loss(out, ident, ident, 1.0);
    CHECK(cancel.value == Catch::Approx(0.0).margin(1e-12));
    CHECK(cancel.grad_logits.cwiseAbs().maxCoeff() < 1e-12);

    Rng rng(12);
    const auto p1 = rng.permutation(5), p2 = rng.permutation(5);
    const auto alpha0 = losses::peer_loss(out, p1, p2, 0.0);
    const auto ce = losses::cross_entropy(out);
    CHECK(alpha0.value == Catch::Approx(ce.value).margin(1e-12));

    CHECK_THROWS_AS(losses::peer_loss(out, {9, 1, 2, 3, 4}, ident, 1.0), validation_error);

    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto batch = random_batch(4, 3, 2, 50 + s);
        Rng prng(60 + s);
        const auto q1 = prng.permutation(4), q2 = prng.permutation(4);
        CHECK(logits_fd_err(batch, [&](const BatchOutputs& o) {
                  return losses::peer_loss(o, q1, q2, 1.0);
              }) < 1e-6);
    }
}

TEST_CASE("info_nce: orthogonal two-batch value is ln 3", "[losses]") {
    BatchOutputs out;
    out.logits = Eigen::MatrixXd::Zero(2, 2);
    out.ssl.resize(2, 4);
    out.ssl << 1, 0, 0, 0, 0, 1, 0, 0;
    out.ssl_aug.emplace(2, 4);
    *out.ssl_aug << 0, 0, 1, 0, 0, 0, 0, 1;
    out.noisy_labels = {0, 1};
    const auto rep = losses::info_nce(out, 1.0);
    CHECK(rep.value == Catch::Approx(std::log(3.0)).margin(1e-12));
}

TEST_CASE("info_nce: loss decreases as the positive aligns", "[losses]") {
    auto make = [](double align) {
        BatchOutputs out;
        out.logits = Eigen::MatrixXd::Zero(2, 2);
        out.ssl.resize(2, 2);
        out.ssl << 1, 0, 0, 1;
        out.ssl_aug.emplace(2, 2);
        // positive of anchor 0 rotates from orthogonal toward the anchor
        (*out.ssl_aug)(0, 0) = std::sin(align);
        (*out.ssl_aug)(0, 1) = std::cos(align);
        (*out.ssl_aug)(1, 0) = 0;
        (*out.ssl_aug)(1, 1) = 1;
        out.noisy_labels = {0, 1};
        return out;
    };
    double prev = std::numeric_limits<double>::infinity();
    for (double a : {0.0, 0.5, 1.0, 1.5}) {
        const double v = losses::info_nce(make(a), 0.5).value;
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("info_nce: rejects zero-norm rows, gradient matches oracle", "[losses]") {
    auto out = random_batch(3, 2, 4, 13);
    out.ssl.row(1).setZero();
    CHECK_THROWS_AS(losses::info_nce(out, 0.5), validation_error);

    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto base = random_batch(3, 2, 4, 70 + s);
        const auto rep = losses::info_nce(base, 0.5);
        BatchOutputs probe = base;
        const auto oracle_main = fd::grad(base.ssl, [&](const Eigen::MatrixXd& m) {
            probe.ssl = m;
            return losses::info_nce(probe, 0.5).value;
        });
        probe = base;
        const auto oracle_aug = fd::grad(*base.ssl_aug, [&](const Eigen::MatrixXd& m) {
            probe.ssl_aug = m;
            return losses::info_nce(probe, 0.5).value;
        });
        CHECK(fd::rel_err(*rep.grad_ssl, oracle_main) < 1e-5);
        CHECK(fd::rel_err(*rep.grad_ssl_aug, oracle_aug) < 1e-5);
    }
}

TEST_CASE("pairwise_normalizer: worked values and the degenerate floor", "[losses]") {
    Eigen::MatrixXd two(2, 2);
    two << 0, 0, 3, 4;
    CHECK(losses::pairwise_normalizer(two, 1).value == Catch::Approx(5.0).margin(1e-15));
    CHECK(losses::pairwise_normalizer(two, 2).value == Catch::Approx(25.0).margin(1e-15));

    Eigen::MatrixXd same(2, 3);
    same << 1, 2, 3, 1, 2, 3;
    const auto n = losses::pairwise_normalizer(same, 2, 1e-8);
    CHECK(n.degenerate);
    CHECK(n.value == 1e-8);

    CHECK_THROWS_AS(losses::pairwise_normalizer(Eigen::MatrixXd::Zero(1, 3), 1), validation_error);
}

TEST_CASE("regularizer: brute-force oracle on the three-point batch", "[losses]") {
    Eigen::MatrixXd t(3, 1), s(3, 1);
    t << 0, 1, 2;
    s << 0.1, 0.1, 0.9;
    losses::RegularizerConfig cfg;
    cfg.w_ssl = 2;
    cfg.w_sl = 1;
    cfg.distance = losses::Distance::SquaredL2;

    // independent evaluation over all 6 ordered pairs
    double mt = 0, ms = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            if (i == j) continue;
            mt += std::pow(std::abs(t(i, 0) - t(j, 0)), 2);
            ms += std::abs(s(i, 0) - s(j, 0));
        }
    mt /= 6.0;
    ms /= 6.0;
    double expect = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            if (i == j) continue;
            const double phi_t = std::pow(std::abs(t(i, 0) - t(j, 0)), 2) / mt;
            const double phi_s = std::abs(s(i, 0) - s(j, 0)) / ms;
            expect += (phi_s - phi_t) * (phi_s - phi_t);
        }
    expect /= 6.0;

    const auto res = losses::regularizer_on_features(t, s, cfg);
    CHECK(res.value == Catch::Approx(expect).margin(1e-12));
    CHECK(expect == Catch::Approx(0.5).margin(1e-12));  // frozen from the brute force
}

TEST_CASE("regularizer: trivial zeros", "[losses]") {
    losses::RegularizerConfig cfg;

    // identical normalized profiles: zero up to distance round-off
    Eigen::MatrixXd t(3, 1), s(3, 1);
    t << 0, 0, 1;
    s << 0.2, 0.2, 0.5;
    cfg.w_ssl = 2;
    cfg.w_sl = 1;
    cfg.distance = losses::Distance::SquaredL2;
    CHECK(losses::regularizer_on_features(t, s, cfg).value == Catch::Approx(0.0).margin(1e-24));

    // any non-degenerate two-point batch: both normalized distances are 1
    Rng rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd t2(2, 3), s2(2, 2);
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 3; ++j) t2(i, j) = rng.normal();
            for (int j = 0; j < 2; ++j) s2(i, j) = rng.normal();
        }
        const auto res = losses::regularizer_on_features(t2, s2, cfg);
        CHECK(res.value == Catch::Approx(0.0).margin(1e-12));
    }

    // both sides collapsed: zero with the degenerate flag
    Eigen::MatrixXd tc = Eigen::MatrixXd::Ones(3, 2), sc = Eigen::MatrixXd::Ones(3, 2);
    const auto res = losses::regularizer_on_features(tc, sc, cfg);
    CHECK(res.value == 0.0);
    CHECK((res.norm_t.degenerate && res.norm_s.degenerate));
}

TEST_CASE("regularizer: scale invariance of both feature sets", "[losses]") {
    Rng rng(123);
    Eigen::MatrixXd t(5, 3), s(5, 2);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 3; ++j) t(i, j) = rng.normal();
        for (int j = 0; j < 2; ++j) s(i, j) = rng.normal();
    }
    for (losses::Distance d : {losses::Distance::SquaredL2, losses::Distance::SmoothL1}) {
        losses::RegularizerConfig cfg;
        cfg.distance = d;
        const double base = losses::regularizer_on_features(t, s, cfg).value;
        for (double c : {1e-3, 1.0, 1e3}) {
            CHECK(std::abs(losses::regularizer_on_features(c * t, s, cfg).value - base) < 1e-12);
            CHECK(std::abs(losses::regularizer_on_features(t, c * s, cfg).value - base) < 1e-12);
        }
    }
}

TEST_CASE("regularizer and info_nce: permutation invariance", "[losses]") {
    const auto out = random_batch(6, 3, 4, 17);
    losses::RegularizerConfig cfg;
    const double reg = losses::representation_regularizer(out, cfg).value;
    const double info = losses::info_nce(out, 0.5).value;

    Rng rng(18);
    const auto perm = rng.permutation(6);
    BatchOutputs shuffled = out;
    for (int i = 0; i < 6; ++i) {
        const auto src = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]);
        shuffled.logits.row(i) = out.logits.row(src);
        shuffled.ssl.row(i) = out.ssl.row(src);
        shuffled.ssl_aug->row(i) = out.ssl_aug->row(src);
        shuffled.noisy_labels[static_cast<std::size_t>(i)] = out.noisy_labels[perm[static_cast<std::size_t>(i)]];
    }
    CHECK(losses::representation_regularizer(shuffled, cfg).value == Catch::Approx(reg).margin(1e-12));
    CHECK(losses::info_nce(shuffled, 0.5).value == Catch::Approx(info).margin(1e-12));
}

TEST_CASE("regularizer: coinciding classifier rows with distinct embeddings cost > 0", "[losses]") {
    // two equal s-rows but different t-rows: the invertibility argument in
    // reverse, so the penalty must be strictly positive
    Eigen::MatrixXd t(3, 2), s(3, 2);
    t << 0, 0, 1, 0, 0, 1;
    s << 0.3, 0.7, 0.3, 0.7, 0.9, 0.1;
    losses::RegularizerConfig cfg;
    cfg.distance = losses::Distance::SquaredL2;
    CHECK(losses::regularizer_on_features(t, s, cfg).value > 0.0);

    // conversely, a zero value certifies matching normalized profiles
    Eigen::MatrixXd tz(3, 1), sz(3, 1);
    tz << 0, 0, 1;
    sz << 0.2, 0.2, 0.5;
    cfg.w_ssl = 2;
    cfg.w_sl = 1;
    const auto res = losses::regularizer_on_features(tz, sz, cfg);
    REQUIRE(res.value == Catch::Approx(0.0).margin(1e-15));
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            const double phi_t = (tz.row(i) - tz.row(j)).squaredNorm() / res.norm_t.value;
            const double phi_s = (sz.row(i) - sz.row(j)).norm() / res.norm_s.value;
            CHECK(std::abs(phi_t - phi_s) < 1e-9);
        }
}

TEST_CASE("regularizer: gradients match the frozen-normalizer oracle", "[losses]") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto base = random_batch(4, 3, 3, 80 + s);
        for (losses::Distance d : {losses::Distance::SquaredL2, losses::Distance::SmoothL1}) {
            losses::RegularizerConfig cfg;
            cfg.distance = d;
            cfg.couple_ssl = true;
            cfg.sl_backward_floor = 0.0;  // probe the exact derivative
            const auto rep = losses::representation_regularizer(base, cfg);
            const losses::FrozenNormalizers frozen{
                losses::pairwise_normalizer(base.ssl, cfg.w_ssl, cfg.epsilon_floor).value,
                losses::pairwise_normalizer(losses::softmax_rows(base.logits), cfg.w_sl, cfg.epsilon_floor)
                    .value};
            BatchOutputs probe = base;
            const auto oracle_logits = fd::grad(base.logits, [&](const Eigen::MatrixXd& m) {
                probe.logits = m;
                return losses::representation_regularizer(probe, cfg, frozen).value;
            });
            CHECK(fd::rel_err(rep.grad_logits, oracle_logits) < 1e-5);
            probe = base;
            const auto oracle_ssl = fd::grad(base.ssl, [&](const Eigen::MatrixXd& m) {
                probe.ssl = m;
                return losses::representation_regularizer(probe, cfg, frozen).value;
            });
            CHECK(fd::rel_err(*rep.grad_ssl, oracle_ssl) < 1e-5);
        }
    }
}

TEST_CASE("regularizer: ssl gradients detach by default", "[losses]") {
    const auto out = random_batch(4, 2, 3, 91);
    losses::RegularizerConfig cfg;
    const auto rep = losses::representation_regularizer(out, cfg);
    CHECK_FALSE(rep.grad_ssl.has_value());
}

TEST_CASE("total loss: reductions and gradient additivity", "[losses]") {
    const auto out = random_batch(5, 3, 4, 19);
    losses::SlLossParams sl;

    losses::RegularizerConfig off;
    off.lambda = 0.0;
    const auto alone = losses::total_loss(out, sl, off, 0.5, /*info_enabled=*/false);
    const auto ce = losses::cross_entropy(out);
    CHECK(alone.total.value == Catch::Approx(ce.value).margin(1e-12));
    CHECK((alone.total.grad_logits - ce.grad_logits).cwiseAbs().maxCoeff() < 1e-12);

    losses::RegularizerConfig cfg;  // default lambda = 1 matches the headline setting
    CHECK(cfg.lambda == 1.0);
    const auto both = losses::total_loss(out, sl, cfg, 0.5, true);
    const auto info = losses::info_nce(out, 0.5);
    const auto reg = losses::representation_regularizer(out, cfg);
    CHECK(both.total.value ==
          Catch::Approx(ce.value + info.value + cfg.lambda * reg.value).margin(1e-12));
    CHECK((both.total.grad_logits - (ce.grad_logits + cfg.lambda * reg.grad_logits))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    CHECK((*both.total.grad_ssl - *info.grad_ssl).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((*both.total.grad_ssl_aug - *info.grad_ssl_aug).cwiseAbs().maxCoeff() < 1e-12);

    CHECK_THROWS_AS(losses::parse_sl_loss("nope"), validation_error);
    CHECK(losses::parse_sl_loss("gce") == losses::SlLoss::Gce);
}

TEST_CASE("loss values stay non-negative (peer excepted)", "[losses]") {
    losses::RegularizerConfig cfg;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto out = random_batch(4, 3, 3, 1000 + s);
        CHECK(losses::cross_entropy(out).value >= 0.0);
        CHECK(losses::mae_loss(out).value >= 0.0);
        CHECK(losses::gce_loss(out, 0.7).value >= 0.0);
        CHECK(losses::forward_corrected_ce(out, noise::symmetric_transition(3, 0.2)).value >= 0.0);
        CHECK(losses::info_nce(out, 0.5).value >= 0.0);
        CHECK(losses::representation_regularizer(out, cfg).value >= 0.0);
    }
}

TEST_CASE("regularizer: backward floor bounds the gradient near collapse", "[losses]") {
    // predictions bunched into a tiny cluster: the raw 1/m factor would be
    // enormous; the floored backward keeps it at 1/sl_backward_floor scale
    Rng rng(321);
    Eigen::MatrixXd t(6, 4), logits(6, 2);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 4; ++j) t(i, j) = rng.normal();
        logits(i, 0) = 1e-4 * rng.normal();
        logits(i, 1) = 1e-4 * rng.normal();
    }
    losses::BatchOutputs out;
    out.logits = logits;
    out.ssl = t;
    out.noisy_labels = {0, 1, 0, 1, 0, 1};

    losses::RegularizerConfig raw;
    raw.sl_backward_floor = 0.0;
    losses::RegularizerConfig floored;  // default floor

    const auto g_raw = losses::representation_regularizer(out, raw);
    const auto g_floored = losses::representation_regularizer(out, floored);
    CHECK(g_raw.value == g_floored.value);  // value path identical
    CHECK(g_floored.grad_logits.cwiseAbs().maxCoeff() < 1.0);
    CHECK(g_raw.grad_logits.cwiseAbs().maxCoeff() >
          100.0 * g_floored.grad_logits.cwiseAbs().maxCoeff());
}

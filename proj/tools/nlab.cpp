// Command-line front end: configuration-driven experiments over the
// library, with CSV metrics, deterministic seeding and optional SVG plots.
//
// Exit codes: 0 success, 1 validation failure, 2 numerical-tolerance
// failure, 3 IO failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nlab/nlab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nlab;

namespace {

std::vector<double> parse_list(const std::string& csv, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw validation_error(what + ": bad number '" + tok + "'");
        }
    }
    require(!out.empty(), what + ": empty list");
    return out;
}

Eigen::MatrixXd parse_means(const std::string& text, const std::string& what) {
    std::vector<std::vector<double>> rows;
    std::stringstream ss(text);
    std::string row;
    while (std::getline(ss, row, ';')) rows.push_back(parse_list(row, what));
    require(!rows.empty(), what + ": no rows");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i].size() == rows[0].size(), what + ": ragged mean rows");
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

void print_or_json(bool as_json, const std::vector<std::pair<std::string, std::string>>& kv) {
    if (as_json) {
        json obj;
        for (const auto& [k, v] : kv) {
            try {
                std::size_t pos = 0;
                const double num = std::stod(v, &pos);
                if (pos == v.size()) {
                    obj[k] = num;
                    continue;
                }
            } catch (const std::exception&) {
            }
            obj[k] = v;
        }
        std::cout << obj.dump() << "\n";
    } else {
        for (const auto& [k, v] : kv) std::cout << k << "=" << v << "\n";
    }
}

bool csv_has_noisy_column(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open for reading: " + path);
    std::string header;
    std::getline(in, header);
    return header.find("noisy_label") != std::string::npos;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataOpts {
    std::string config_path;
    std::string out = "dataset.csv";
    long n = 1000;
    long dim = 2;
    std::string means = "-1.5,0;1.5,0";
    std::string priors;
    double cov_scale = 1.0;
    std::uint64_t seed = 1;
};

data::GaussianMixtureSpec spec_from(const GenDataOpts& o) {
    config::KeyValues kv;
    if (!o.config_path.empty()) kv = config::KeyValues::from_file(o.config_path);
    data::GaussianMixtureSpec spec;
    spec.n_samples = static_cast<std::size_t>(kv.get_int("n", o.n));
    spec.shared_cov_scale = kv.get_double("cov_scale", o.cov_scale);
    spec.means = parse_means(kv.get("means", o.means), "means");
    const auto k = spec.means.rows();
    if (!o.priors.empty() || kv.has("priors")) {
        const auto p = parse_list(kv.get("priors", o.priors), "priors");
        require(static_cast<Eigen::Index>(p.size()) == k, "priors length must match mean rows");
        spec.class_priors = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
    } else {
        spec.class_priors = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
    }
    return spec;
}

int cmd_gen_data(const GenDataOpts& o) {
    const auto spec = spec_from(o);
    const auto ds = data::generate_gaussian_mixture(spec, o.seed);
    data::save_csv_dataset(ds, o.out);
    std::cout << "wrote " << o.out << " (" << ds.n() << " rows, " << ds.dim() << " features, "
              << ds.num_classes << " classes)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// inject-noise

struct InjectOpts {
    std::string in;
    std::string out = "noisy.csv";
    std::string kind = "symmetric";
    double eps = 0.2;
    double rate_std = 0.0;
    double max_rate = 1.0;
    std::uint64_t proj_seed = 0;
    long force_k = 0;
    bool downsample = false;
    std::uint64_t seed = 1;
};

int cmd_inject_noise(const InjectOpts& o) {
    auto ds = data::load_csv_dataset(o.in, csv_has_noisy_column(o.in), static_cast<int>(o.force_k));
    data::Dataset noisy;
    if (o.kind == "symmetric") {
        noisy = noise::apply_class_noise(ds, noise::symmetric_transition(ds.num_classes, o.eps), o.seed);
    } else if (o.kind == "asymmetric") {
        noisy = noise::apply_class_noise(ds, noise::asymmetric_transition(ds.num_classes, o.eps), o.seed);
    } else if (o.kind == "instance") {
        noise::InstanceNoiseSpec spec;
        spec.mean_rate = o.eps;
        spec.rate_std = o.rate_std;
        spec.max_rate = o.max_rate;
        spec.projection_seed = o.proj_seed;
        noisy = noise::apply_instance_noise(ds, spec, o.seed);
    } else {
        throw validation_error("inject-noise: unknown kind '" + o.kind +
                               "' (expected symmetric|asymmetric|instance)");
    }
    if (o.downsample) noisy = noise::downsample_balance(noisy, mix_seed(o.seed, 99));
    data::save_csv_dataset(noisy, o.out);

    const auto t = noise::empirical_transition(noisy.clean_labels, *noisy.noisy_labels, noisy.num_classes);
    std::cout << "empirical transition (" << noisy.num_classes << "x" << noisy.num_classes << "):\n";
    for (Eigen::Index i = 0; i < t.p.rows(); ++i) {
        for (Eigen::Index j = 0; j < t.p.cols(); ++j) std::cout << (j ? "," : "") << fmt_g9(t.p(i, j));
        std::cout << "\n";
    }
    std::cout << "realized_flip_rate=" << noisy.metadata["realized_flip_rate"] << "\n";
    std::cout << "wrote " << o.out << " (" << noisy.n() << " rows)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
    std::string config_path;
    std::string out = ".";
    std::string run_id = "run";
    bool plot = false;

    // data
    std::string data_csv;
    double test_fraction = 0.25;
    long n = 2000;
    long test_n = 0;  // 0: same as n
    std::string means = "-1.5,0;1.5,0";
    std::string priors;
    double cov_scale = 1.0;
    std::uint64_t data_seed = 1;

    // noise
    std::string noise_kind = "symmetric";
    double eps = 0.4;
    double rate_std = 0.0;
    double max_rate = 1.0;
    std::uint64_t noise_seed = 2;
    bool downsample = false;

    // training
    long epochs = 100;
    long batch_size = 128;
    double lr = 1e-3;
    std::string optimizer = "adam";
    std::string loss = "ce";
    double gce_q = 0.7;
    double peer_alpha = 1.0;
    std::string transition_csv;
    double lambda = 1.0;
    long w_sl = 1;
    long w_ssl = 2;
    std::string distance = "smooth-l1";
    double temperature = 0.5;
    double sl_floor = 0.5;
    bool no_info = false;
    double jitter_std = 0.1;
    bool freeze_encoder = false;
    std::string hidden = "64,64";
    long proj_dim = 16;
    long proj_hidden = 0;
    std::string activation = "tanh";
    std::uint64_t seed = 3;

    std::string seeds;    // comma list: run one training per seed
    std::string lambdas;  // comma list: compare regularizer weights
};

void apply_config_file(TrainOpts& o) {
    if (o.config_path.empty()) return;
    const auto kv = config::KeyValues::from_file(o.config_path);
    o.data_csv = kv.get("data.csv", o.data_csv);
    o.test_fraction = kv.get_double("data.test_fraction", o.test_fraction);
    o.n = kv.get_int("data.n", o.n);
    o.test_n = kv.get_int("data.test_n", o.test_n);
    o.means = kv.get("data.means", o.means);
    o.priors = kv.get("data.priors", o.priors);
    o.cov_scale = kv.get_double("data.cov_scale", o.cov_scale);
    o.data_seed = static_cast<std::uint64_t>(kv.get_int("data.seed", static_cast<long>(o.data_seed)));
    o.noise_kind = kv.get("noise.kind", o.noise_kind);
    o.eps = kv.get_double("noise.eps", o.eps);
    o.rate_std = kv.get_double("noise.rate_std", o.rate_std);
    o.max_rate = kv.get_double("noise.max_rate", o.max_rate);
    o.noise_seed = static_cast<std::uint64_t>(kv.get_int("noise.seed", static_cast<long>(o.noise_seed)));
    o.downsample = kv.get_bool("noise.downsample", o.downsample);
    o.epochs = kv.get_int("train.epochs", o.epochs);
    o.batch_size = kv.get_int("train.batch_size", o.batch_size);
    o.lr = kv.get_double("train.lr", o.lr);
    o.optimizer = kv.get("train.optimizer", o.optimizer);
    o.loss = kv.get("train.loss", o.loss);
    o.gce_q = kv.get_double("train.gce_q", o.gce_q);
    o.peer_alpha = kv.get_double("train.peer_alpha", o.peer_alpha);
    o.transition_csv = kv.get("train.transition_csv", o.transition_csv);
    o.lambda = kv.get_double("train.lambda", o.lambda);
    o.w_sl = kv.get_int("train.w_sl", o.w_sl);
    o.w_ssl = kv.get_int("train.w_ssl", o.w_ssl);
    o.distance = kv.get("train.distance", o.distance);
    o.temperature = kv.get_double("train.temperature", o.temperature);
    o.sl_floor = kv.get_double("train.sl_backward_floor", o.sl_floor);
    o.no_info = !kv.get_bool("train.info", !o.no_info);
    o.jitter_std = kv.get_double("train.jitter_std", o.jitter_std);
    o.freeze_encoder = kv.get_bool("train.freeze_encoder", o.freeze_encoder);
    o.hidden = kv.get("train.hidden", o.hidden);
    o.proj_dim = kv.get_int("train.proj_dim", o.proj_dim);
    o.proj_hidden = kv.get_int("train.proj_hidden", o.proj_hidden);
    o.activation = kv.get("train.activation", o.activation);
    o.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", static_cast<long>(o.seed)));
}

struct PreparedData {
    data::Dataset train;
    data::Dataset test;
    std::optional<noise::TransitionMatrix> injected;
};

PreparedData prepare_data(const TrainOpts& o) {
    PreparedData out;
    if (!o.data_csv.empty()) {
        const auto ds = data::load_csv_dataset(o.data_csv, csv_has_noisy_column(o.data_csv));
        auto [train, test] = data::split(ds, o.test_fraction, o.data_seed);
        out.train = std::move(train);
        out.test = std::move(test);
    } else {
        GenDataOpts g;
        g.n = o.n;
        g.means = o.means;
        g.priors = o.priors;
        g.cov_scale = o.cov_scale;
        const auto spec = spec_from(g);
        out.train = data::generate_gaussian_mixture(spec, o.data_seed);
        auto test_spec = spec;
        test_spec.n_samples = static_cast<std::size_t>(o.test_n > 0 ? o.test_n : o.n);
        out.test = data::generate_gaussian_mixture(test_spec, mix_seed(o.data_seed, 1));
    }

    if (o.noise_kind == "none" || o.noise_kind.empty()) {
        if (!out.train.noisy_labels) out.train.noisy_labels = out.train.clean_labels;
    } else if (o.noise_kind == "symmetric" || o.noise_kind == "asymmetric") {
        const auto t = o.noise_kind == "symmetric"
                           ? noise::symmetric_transition(out.train.num_classes, o.eps)
                           : noise::asymmetric_transition(out.train.num_classes, o.eps);
        out.train = noise::apply_class_noise(out.train, t, o.noise_seed);
        out.injected = t;
    } else if (o.noise_kind == "instance") {
        noise::InstanceNoiseSpec spec;
        spec.mean_rate = o.eps;
        spec.rate_std = o.rate_std;
        spec.max_rate = o.max_rate;
        out.train = noise::apply_instance_noise(out.train, spec, o.noise_seed);
    } else {
        throw validation_error("train: unknown noise kind '" + o.noise_kind + "'");
    }
    if (o.downsample) out.train = noise::downsample_balance(out.train, mix_seed(o.noise_seed, 99));
    return out;
}

model::TrainConfig train_config_from(const TrainOpts& o, std::uint64_t seed, double lambda,
                                     const std::optional<noise::TransitionMatrix>& injected) {
    model::TrainConfig cfg;
    cfg.epochs = static_cast<int>(o.epochs);
    cfg.batch_size = static_cast<int>(o.batch_size);
    cfg.learning_rate = o.lr;
    cfg.optimizer = model::parse_optimizer(o.optimizer);
    cfg.freeze_encoder = o.freeze_encoder;
    cfg.sl.kind = losses::parse_sl_loss(o.loss);
    cfg.sl.gce_q = o.gce_q;
    cfg.sl.peer_alpha = o.peer_alpha;
    if (cfg.sl.kind == losses::SlLoss::Fw) {
        if (!o.transition_csv.empty())
            cfg.sl.transition = noise::load_csv_transition(o.transition_csv);
        else if (injected)
            cfg.sl.transition = *injected;
        else
            throw validation_error("train: fw loss needs --transition or an injected class noise");
    }
    cfg.reg.lambda = lambda;
    cfg.reg.w_sl = static_cast<int>(o.w_sl);
    cfg.reg.w_ssl = static_cast<int>(o.w_ssl);
    if (o.distance == "smooth-l1")
        cfg.reg.distance = losses::Distance::SmoothL1;
    else if (o.distance == "squared-l2")
        cfg.reg.distance = losses::Distance::SquaredL2;
    else
        throw validation_error("train: unknown distance '" + o.distance + "'");
    cfg.reg.sl_backward_floor = o.sl_floor;
    cfg.temperature = o.temperature;
    cfg.info_enabled = !o.no_info;
    cfg.jitter_std = o.jitter_std;
    cfg.seed = seed;
    cfg.hidden_dims.clear();
    for (double h : parse_list(o.hidden, "hidden")) cfg.hidden_dims.push_back(static_cast<int>(h));
    cfg.proj_dim = static_cast<int>(o.proj_dim);
    cfg.proj_hidden_dim = static_cast<int>(o.proj_hidden);
    cfg.activation = model::parse_activation(o.activation);
    return cfg;
}

void write_run_meta(const TrainOpts& o, const model::TrainConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << "loss = " << losses::sl_loss_name(cfg.sl.kind) << "\n";
    out << "lambda = " << fmt_g17(cfg.reg.lambda) << "\n";
    out << "info = " << (cfg.info_enabled ? "true" : "false") << "\n";
    out << "freeze_encoder = " << (cfg.freeze_encoder ? "true" : "false") << "\n";
    out << "epochs = " << cfg.epochs << "\n";
    out << "batch_size = " << cfg.batch_size << "\n";
    out << "lr = " << fmt_g17(cfg.learning_rate) << "\n";
    out << "optimizer = " << (cfg.optimizer == model::Optimizer::Adam ? "adam" : "sgd") << "\n";
    out << "activation = " << (cfg.activation == model::Activation::Relu ? "relu" : "tanh") << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "noise.kind = " << o.noise_kind << "\n";
    out << "noise.eps = " << fmt_g17(o.eps) << "\n";
    out << "downsample = " << (o.downsample ? "true" : "false") << "\n";
}

struct RunSummary {
    double lambda = 0;
    std::uint64_t seed = 0;
    double final_acc = 0;
    double peak_acc = 0;
};

void plot_out_dir(const std::string& out_dir) {
    std::vector<svg::Series> series;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(out_dir))
        if (entry.path().filename().string().rfind("metrics_", 0) == 0 &&
            entry.path().extension() == ".csv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);  // header
        svg::Series s;
        s.name = path.stem().string();
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string tok;
            std::vector<std::string> cols;
            while (std::getline(ss, tok, ',')) cols.push_back(tok);
            if (cols.size() >= 4) s.points.emplace_back(std::stod(cols[0]), std::stod(cols[3]));
        }
        if (!s.points.empty()) series.push_back(std::move(s));
    }
    if (!series.empty())
        svg::write_line_chart((fs::path(out_dir) / "accuracy.svg").string(), "clean test accuracy",
                              "epoch", "accuracy", series);
}

int cmd_train(TrainOpts o) {
    apply_config_file(o);
    fs::create_directories(o.out);
    const auto prepared = prepare_data(o);

    std::vector<double> lambdas{o.lambda};
    if (!o.lambdas.empty()) lambdas = parse_list(o.lambdas, "lambdas");
    std::vector<std::uint64_t> seeds{o.seed};
    if (!o.seeds.empty()) {
        seeds.clear();
        for (double s : parse_list(o.seeds, "seeds")) seeds.push_back(static_cast<std::uint64_t>(s));
    }

    std::vector<RunSummary> summaries;
    for (double lambda : lambdas) {
        for (std::uint64_t seed : seeds) {
            const auto cfg = train_config_from(o, seed, lambda, prepared.injected);
            const auto res = model::train(prepared.train, prepared.test, cfg);

            std::string run_id = o.run_id;
            if (lambdas.size() > 1 || seeds.size() > 1) {
                run_id += "_lambda" + fmt_g9(lambda) + "_seed" + std::to_string(seed);
            }
            const auto base = fs::path(o.out);
            model::write_metrics_csv(res.trace, (base / ("metrics_" + run_id + ".csv")).string());
            model::save_params(res.params, (base / ("model_" + run_id + ".bin")).string());
            write_run_meta(o, cfg, (base / ("run_" + run_id + ".meta")).string());

            RunSummary sum;
            sum.lambda = lambda;
            sum.seed = seed;
            sum.final_acc = res.trace.rows.back().clean_test_acc;
            for (const auto& r : res.trace.rows) sum.peak_acc = std::max(sum.peak_acc, r.clean_test_acc);
            summaries.push_back(sum);
            std::cout << "run " << run_id << ": final_clean_test_acc=" << fmt_g9(sum.final_acc)
                      << " peak=" << fmt_g9(sum.peak_acc) << "\n";
        }
    }

    if (summaries.size() > 1) {
        const auto path = (fs::path(o.out) / "summary.csv").string();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw io_error("cannot open for writing: " + path);
        out << "lambda,seed,final_clean_test_acc,peak_clean_test_acc,final_minus_peak\n";
        for (const auto& s : summaries)
            out << fmt_g9(s.lambda) << "," << s.seed << "," << fmt_g9(s.final_acc) << ","
                << fmt_g9(s.peak_acc) << "," << fmt_g9(s.final_acc - s.peak_acc) << "\n";
        std::cout << "comparison table: " << path << "\n";
    }
    if (o.plot) plot_out_dir(o.out);
    return 0;
}

// ---------------------------------------------------------------------------
// theory

struct TheoryOpts {
    bool as_json = false;
    // gamma / estimation
    long k = 2;
    double eps = 0.0;
    double vc = 10;
    double n = 10000;
    double delta_conf = 0.05;
    std::string kind = "symmetric";
    double bias = 0.0;
    double alpha = 1.0;
    double nodes = 100;
    // beta
    double vc1 = 100, m1 = 100, vc2 = 10, m2 = 10;
    double alpha_composed = 1.0, alpha_linear = 1.0;
    // t3 / delta / sqdist
    double t3_delta = 2.0;
    double e = 0.4;
    double trace = 1.0, mu_dist = 1.0;
    std::string mu_x = "0,0", mu_y = "0,0";
    double trace_x = 0.0, trace_y = 0.0;
};

int cmd_theory_gamma(const TheoryOpts& o) {
    const auto c = theory::consistency_constants(static_cast<int>(o.k), o.eps);
    print_or_json(o.as_json, {{"gamma1", fmt_g9(c.gamma1)},
                              {"gamma2", fmt_g9(c.gamma2)},
                              {"degenerate", c.degenerate ? "true" : "false"}});
    return 0;
}

int cmd_theory_estimation(const TheoryOpts& o) {
    theory::TheoryParams p;
    p.vc_dim = o.vc;
    p.n_samples = o.n;
    p.delta = o.delta_conf;
    p.epsilon = o.eps;
    p.k = static_cast<int>(o.k);
    const auto kind = o.kind == "asymmetric" ? theory::NoiseKind::Asymmetric : theory::NoiseKind::Symmetric;
    print_or_json(o.as_json, {{"estimation_bound", fmt_g9(theory::estimation_bound(p, kind, o.bias))}});
    return 0;
}

int cmd_theory_approx(const TheoryOpts& o) {
    theory::TheoryParams p;
    p.alpha_star = o.alpha;
    p.nodes = o.nodes;
    print_or_json(o.as_json, {{"approximation_bound", fmt_g9(theory::approximation_bound(p))}});
    return 0;
}

int cmd_theory_beta(const TheoryOpts& o) {
    const auto res = theory::crossover_beta({o.vc1, o.m1}, {o.vc2, o.m2}, o.n, o.alpha,
                                            static_cast<int>(o.k));
    std::vector<std::pair<std::string, std::string>> kv{
        {"beta", fmt_g9(res.beta)}, {"always_crossed", res.always_crossed ? "true" : "false"}};
    if (res.epsilon_threshold) kv.emplace_back("epsilon_threshold", fmt_g9(*res.epsilon_threshold));
    print_or_json(o.as_json, kv);
    return 0;
}

int cmd_theory_beta_prime(const TheoryOpts& o) {
    const double b = theory::corollary_beta_prime({o.vc1, o.m1, o.alpha_composed},
                                                  {o.vc2, o.m2, o.alpha_linear}, o.n);
    print_or_json(o.as_json, {{"beta_prime", fmt_g9(b)}});
    return 0;
}

int cmd_theory_delta(const TheoryOpts& o) {
    require(o.mu_dist > 0.0, "theory delta: --mu-dist must be > 0");
    print_or_json(o.as_json, {{"delta", fmt_g9(8.0 * o.trace / (o.mu_dist * o.mu_dist))}});
    return 0;
}

int cmd_theory_t3(const TheoryOpts& o) {
    const auto s = theory::from_delta(o.t3_delta, o.e);
    print_or_json(o.as_json, {{"exp_gf_plus_f", fmt_g9(s.exp_gf_plus_f)},
                              {"exp_gf_minus_f", fmt_g9(s.exp_gf_minus_f)},
                              {"risk", fmt_g9(s.risk)}});
    return 0;
}

int cmd_theory_sqdist(const TheoryOpts& o) {
    const auto mx = parse_list(o.mu_x, "mu-x");
    const auto my = parse_list(o.mu_y, "mu-y");
    require(mx.size() == my.size(), "theory sqdist: mean dimensions must match");
    double gap = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) gap += (mx[i] - my[i]) * (mx[i] - my[i]);
    print_or_json(o.as_json, {{"expected_sq_distance", fmt_g9(gap + o.trace_x + o.trace_y)}});
    return 0;
}

// ---------------------------------------------------------------------------
// simulate-t3

struct SimT3Opts {
    bool as_json = false;
    bool grid = true;
    double delta = 2.0;
    double e = 0.4;
    long n_mc = 200000;
    std::uint64_t seed = 1;
    double tol = 0.01;
    long parallel = 4;
    std::string out;
};

theory::GaussianFeatureSpec sim_spec(double delta, double e, std::size_t n_mc) {
    theory::GaussianFeatureSpec spec;
    const double gap = std::sqrt(16.0 / delta);  // P=2, identity covariance
    spec.mu1 = Eigen::Vector2d(gap / 2.0, 0.0);
    spec.mu2 = Eigen::Vector2d(-gap / 2.0, 0.0);
    spec.cov = Eigen::Matrix2d::Identity();
    spec.flip_rate = e;
    spec.n_mc = n_mc;
    return spec;
}

int cmd_simulate_t3(const SimT3Opts& o) {
    std::vector<std::pair<double, double>> cases;
    if (o.grid) {
        for (double d : {0.5, 2.0, 8.0})
            for (double e : {0.1, 0.2, 0.4}) cases.emplace_back(d, e);
    } else {
        cases.emplace_back(o.delta, o.e);
    }

    std::ostringstream csv;
    csv << "delta,e,closed_plus,closed_minus,mc_plus,mc_minus,diff_plus,diff_minus\n";
    json rows = json::array();
    double worst = 0.0;
    std::size_t case_idx = 0;
    bool any_vacuous = false;
    for (const auto& [d, e] : cases) {
        if (e == 0.0) {
            std::cout << "delta=" << fmt_g9(d) << " e=0: no mislabeled groups, nothing to minimize\n";
            any_vacuous = true;
            ++case_idx;
            continue;
        }
        const auto spec = sim_spec(d, e, static_cast<std::size_t>(o.n_mc));
        const auto closed = theory::theorem3_solutions(spec);
        const auto sim = theory::simulate_theorem3(spec, mix_seed(o.seed, case_idx),
                                                   static_cast<int>(o.parallel));
        const double dp = std::abs(sim.exp_gf_plus_f - closed.exp_gf_plus_f);
        const double dm = std::abs(sim.exp_gf_minus_f - closed.exp_gf_minus_f);
        worst = std::max({worst, dp, dm});
        csv << fmt_g9(d) << "," << fmt_g9(e) << "," << fmt_g9(closed.exp_gf_plus_f) << ","
            << fmt_g9(closed.exp_gf_minus_f) << "," << fmt_g9(sim.exp_gf_plus_f) << ","
            << fmt_g9(sim.exp_gf_minus_f) << "," << fmt_g9(dp) << "," << fmt_g9(dm) << "\n";
        if (o.as_json) {
            rows.push_back({{"delta", d},
                            {"e", e},
                            {"closed_plus", closed.exp_gf_plus_f},
                            {"closed_minus", closed.exp_gf_minus_f},
                            {"mc_plus", sim.exp_gf_plus_f},
                            {"mc_minus", sim.exp_gf_minus_f}});
        } else {
            std::cout << "delta=" << fmt_g9(d) << " e=" << fmt_g9(e) << " closed=("
                      << fmt_g9(closed.exp_gf_plus_f) << "," << fmt_g9(closed.exp_gf_minus_f)
                      << ") mc=(" << fmt_g9(sim.exp_gf_plus_f) << "," << fmt_g9(sim.exp_gf_minus_f)
                      << ") diff=(" << fmt_g9(dp) << "," << fmt_g9(dm) << ")\n";
        }
        ++case_idx;
    }
    if (o.as_json) std::cout << rows.dump() << "\n";
    if (!o.out.empty()) {
        std::ofstream f(o.out, std::ios::binary);
        if (!f) throw io_error("cannot open for writing: " + o.out);
        f << csv.str();
    }
    if (!any_vacuous || worst > 0.0) std::cout << "max_abs_diff=" << fmt_g9(worst) << "\n";
    if (worst > o.tol)
        throw numerical_error("simulate-t3: max diff " + fmt_g9(worst) + " exceeds tolerance " +
                              fmt_g9(o.tol));
    return 0;
}

// ---------------------------------------------------------------------------
// downsample-study

struct DownsampleOpts {
    long grid = 20;
    std::string out = "downsample_study.csv";
    bool plot = false;
};

int cmd_downsample_study(const DownsampleOpts& o) {
    require(o.grid >= 2, "downsample-study: grid must be >= 2");
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw io_error("cannot open for writing: " + o.out);
    f << "e_plus,e_minus,r_balance,r_optimal,e_plus_balance,e_minus_balance,e_plus_optimal,"
         "e_minus_optimal,gap_before,gap_after\n";
    std::vector<svg::Series> curves;
    for (long j = 1; j <= o.grid; ++j) {
        const double em = static_cast<double>(j) / static_cast<double>(o.grid + 1);
        svg::Series curve;
        curve.name = "e-=" + fmt_g9(em);
        for (long i = 1; i <= o.grid; ++i) {
            const double ep = static_cast<double>(i) / static_cast<double>(o.grid + 1);
            if (ep < em || ep + em >= 1.0) continue;
            const noise::BinaryNoiseRates rates{ep, em};
            const double rb = noise::balance_downsample_rate(rates);
            const auto opt = noise::optimal_downsample_rate(rates);
            const auto [bep, bem] = noise::post_downsample_rates(rates, rb);
            const auto [oep, oem] = noise::post_downsample_rates(rates, opt.rate);
            f << fmt_g9(ep) << "," << fmt_g9(em) << "," << fmt_g9(rb) << "," << fmt_g9(opt.rate) << ","
              << fmt_g9(bep) << "," << fmt_g9(bem) << "," << fmt_g9(oep) << "," << fmt_g9(oem) << ","
              << fmt_g9(ep - em) << "," << fmt_g9(bep - bem) << "\n";
            curve.points.emplace_back(ep, bep - bem);
        }
        if (curve.points.size() >= 2) curves.push_back(std::move(curve));
    }
    if (!f) throw io_error("write failed: " + o.out);
    std::cout << "wrote " << o.out << "\n";
    if (o.plot && !curves.empty()) {
        const auto svg_path = fs::path(o.out).replace_extension(".svg").string();
        svg::write_line_chart(svg_path, "noise-rate gap after balancing", "e+", "gap after", curves);
        std::cout << "wrote " << svg_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"noisy-label training and analysis toolkit"};
    app.require_subcommand(1);

    GenDataOpts gen;
    auto* cgen = app.add_subcommand("gen-data", "generate a Gaussian-mixture dataset CSV");
    cgen->add_option("--config", gen.config_path, "key=value config file");
    cgen->add_option("--out", gen.out, "output CSV path");
    cgen->add_option("--n", gen.n, "sample count");
    cgen->add_option("--means", gen.means, "per-class means, e.g. '-1.5,0;1.5,0'");
    cgen->add_option("--priors", gen.priors, "comma-separated class priors");
    cgen->add_option("--cov-scale", gen.cov_scale, "isotropic covariance scale sigma^2");
    cgen->add_option("--seed", gen.seed, "rng seed");

    InjectOpts inj;
    auto* cinj = app.add_subcommand("inject-noise", "flip labels per a noise model");
    cinj->add_option("--in", inj.in, "input dataset CSV")->required();
    cinj->add_option("--out", inj.out, "output CSV path");
    cinj->add_option("--kind", inj.kind, "symmetric|asymmetric|instance");
    cinj->add_option("--eps", inj.eps, "noise rate");
    cinj->add_option("--rate-std", inj.rate_std, "instance noise: rate spread");
    cinj->add_option("--max-rate", inj.max_rate, "instance noise: rate cap");
    cinj->add_option("--proj-seed", inj.proj_seed, "instance noise: projection seed");
    cinj->add_option("--k", inj.force_k, "force the class count");
    cinj->add_flag("--downsample", inj.downsample, "balance the noisy classes afterwards");
    cinj->add_option("--seed", inj.seed, "rng seed");

    TrainOpts tr;
    auto* ctr = app.add_subcommand("train", "train on noisy labels, log metrics per epoch");
    ctr->add_option("--config", tr.config_path, "key=value config file");
    ctr->add_option("--out", tr.out, "output directory");
    ctr->add_option("--run-id", tr.run_id, "run identifier for output files");
    ctr->add_flag("--plot", tr.plot, "write accuracy.svg over all runs in --out");
    ctr->add_option("--data", tr.data_csv, "input dataset CSV (otherwise synthetic)");
    ctr->add_option("--test-fraction", tr.test_fraction, "test split for CSV data");
    ctr->add_option("--n", tr.n, "synthetic train size");
    ctr->add_option("--test-n", tr.test_n, "synthetic test size (default: --n)");
    ctr->add_option("--means", tr.means, "synthetic per-class means");
    ctr->add_option("--priors", tr.priors, "synthetic class priors");
    ctr->add_option("--cov-scale", tr.cov_scale, "synthetic covariance scale");
    ctr->add_option("--data-seed", tr.data_seed, "data generation / split seed");
    ctr->add_option("--noise-kind", tr.noise_kind, "symmetric|asymmetric|instance|none");
    ctr->add_option("--eps", tr.eps, "noise rate");
    ctr->add_option("--rate-std", tr.rate_std, "instance noise rate spread");
    ctr->add_option("--max-rate", tr.max_rate, "instance noise rate cap");
    ctr->add_option("--noise-seed", tr.noise_seed, "noise seed");
    ctr->add_flag("--downsample", tr.downsample, "balance noisy classes before training");
    ctr->add_option("--epochs", tr.epochs, "training epochs");
    ctr->add_option("--batch-size", tr.batch_size, "batch size (>= 2)");
    ctr->add_option("--lr", tr.lr, "learning rate");
    ctr->add_option("--optimizer", tr.optimizer, "sgd|adam");
    ctr->add_option("--loss", tr.loss, "ce|mae|gce|fw|peer");
    ctr->add_option("--gce-q", tr.gce_q, "gce exponent");
    ctr->add_option("--peer-alpha", tr.peer_alpha, "peer loss weight");
    ctr->add_option("--transition", tr.transition_csv, "transition CSV for the fw loss");
    ctr->add_option("--lambda", tr.lambda, "regularizer weight");
    ctr->add_option("--w-sl", tr.w_sl, "classifier-side distance exponent (1|2)");
    ctr->add_option("--w-ssl", tr.w_ssl, "SSL-side distance exponent (1|2)");
    ctr->add_option("--distance", tr.distance, "smooth-l1|squared-l2");
    ctr->add_option("--temperature", tr.temperature, "InfoNCE temperature");
    ctr->add_option("--sl-floor", tr.sl_floor, "backward floor for the classifier-side normalizer");
    ctr->add_flag("--no-info", tr.no_info, "disable the InfoNCE term");
    ctr->add_option("--jitter-std", tr.jitter_std, "augmentation noise std");
    ctr->add_flag("--freeze-encoder", tr.freeze_encoder, "freeze encoder parameters");
    ctr->add_option("--hidden", tr.hidden, "encoder hidden sizes, e.g. 64,64");
    ctr->add_option("--proj-dim", tr.proj_dim, "projection output dim");
    ctr->add_option("--proj-hidden", tr.proj_hidden, "projection hidden dim (0: repr width)");
    ctr->add_option("--activation", tr.activation, "tanh|relu");
    ctr->add_option("--seed", tr.seed, "training seed");
    ctr->add_option("--seeds", tr.seeds, "comma list: one run per seed");
    ctr->add_option("--lambdas", tr.lambdas, "comma list: compare regularizer weights");

    TheoryOpts th;
    auto* cth = app.add_subcommand("theory", "closed-form calculators");
    cth->require_subcommand(1);
    auto add_json = [&](CLI::App* sub) { sub->add_flag("--json", th.as_json, "emit a JSON object"); };
    auto* g = cth->add_subcommand("gamma", "noise-consistency constants");
    g->add_option("--k", th.k, "class count");
    g->add_option("--eps", th.eps, "noise rate");
    add_json(g);
    auto* est = cth->add_subcommand("estimation", "estimation-error bound");
    est->add_option("--vc", th.vc, "VC dimension");
    est->add_option("--n", th.n, "sample count");
    est->add_option("--delta", th.delta_conf, "confidence parameter");
    est->add_option("--eps", th.eps, "noise rate");
    est->add_option("--k", th.k, "class count");
    est->add_option("--kind", th.kind, "symmetric|asymmetric");
    est->add_option("--bias", th.bias, "asymmetric bias term");
    add_json(est);
    auto* ap = cth->add_subcommand("approx", "approximation-error bound");
    ap->add_option("--alpha", th.alpha, "approximation constant");
    ap->add_option("--nodes", th.nodes, "node count");
    add_json(ap);
    auto* be = cth->add_subcommand("beta", "capacity crossover threshold");
    be->add_option("--vc1", th.vc1, "larger VC dimension");
    be->add_option("--m1", th.m1, "larger node count");
    be->add_option("--vc2", th.vc2, "smaller VC dimension");
    be->add_option("--m2", th.m2, "smaller node count");
    be->add_option("--n", th.n, "sample count");
    be->add_option("--alpha", th.alpha, "approximation constant");
    be->add_option("--k", th.k, "class count");
    add_json(be);
    auto* bp = cth->add_subcommand("beta-prime", "fixed-encoder crossover threshold");
    bp->add_option("--vc-composed", th.vc1, "composed VC dimension");
    bp->add_option("--m-composed", th.m1, "composed node count");
    bp->add_option("--alpha-composed", th.alpha_composed, "composed approximation constant");
    bp->add_option("--vc-linear", th.vc2, "linear-head VC dimension");
    bp->add_option("--m-linear", th.m2, "linear-head node count");
    bp->add_option("--alpha-linear", th.alpha_linear, "linear-head approximation constant");
    bp->add_option("--n", th.n, "sample count");
    add_json(bp);
    auto* de = cth->add_subcommand("delta", "SSL feature-quality ratio");
    de->add_option("--trace", th.trace, "tr(Sigma)");
    de->add_option("--mu-dist", th.mu_dist, "||mu1 - mu2||");
    add_json(de);
    auto* t3 = cth->add_subcommand("t3", "cross-term minimizers and risk");
    t3->add_option("--delta", th.t3_delta, "feature-quality ratio");
    t3->add_option("--e", th.e, "flip rate");
    add_json(t3);
    auto* sq = cth->add_subcommand("sqdist", "expected squared Gaussian distance");
    sq->add_option("--mu-x", th.mu_x, "first mean, comma list");
    sq->add_option("--mu-y", th.mu_y, "second mean, comma list");
    sq->add_option("--trace-x", th.trace_x, "tr(Sigma_x)");
    sq->add_option("--trace-y", th.trace_y, "tr(Sigma_y)");
    add_json(sq);

    SimT3Opts st;
    auto* cst = app.add_subcommand("simulate-t3", "Monte-Carlo check of the cross-term minimizers");
    auto* dopt = cst->add_option("--delta", st.delta, "feature-quality ratio (omit for the grid)");
    cst->add_option("--e", st.e, "flip rate");
    cst->add_option("--n-mc", st.n_mc, "samples per class");
    cst->add_option("--seed", st.seed, "rng seed");
    cst->add_option("--tol", st.tol, "tolerance on |closed - mc|");
    cst->add_option("--parallel", st.parallel, "worker threads");
    cst->add_option("--out", st.out, "write the comparison CSV here");
    cst->add_flag("--json", st.as_json, "emit JSON rows");

    DownsampleOpts dn;
    auto* cdn = app.add_subcommand("downsample-study", "sweep the binary down-sampling formulas");
    cdn->add_option("--grid", dn.grid, "grid resolution per axis");
    cdn->add_option("--out", dn.out, "output CSV path");
    cdn->add_flag("--plot", dn.plot, "write a gap-curve SVG next to the CSV");

    try {
        app.parse(argc, argv);
        if (cgen->parsed()) return cmd_gen_data(gen);
        if (cinj->parsed()) return cmd_inject_noise(inj);
        if (ctr->parsed()) return cmd_train(tr);
        if (cth->parsed()) {
            if (g->parsed()) return cmd_theory_gamma(th);
            if (est->parsed()) return cmd_theory_estimation(th);
            if (ap->parsed()) return cmd_theory_approx(th);
            if (be->parsed()) return cmd_theory_beta(th);
            if (bp->parsed()) return cmd_theory_beta_prime(th);
            if (de->parsed()) return cmd_theory_delta(th);
            if (t3->parsed()) return cmd_theory_t3(th);
            if (sq->parsed()) return cmd_theory_sqdist(th);
        }
        if (cst->parsed()) {
            st.grid = dopt->count() == 0;
            return cmd_simulate_t3(st);
        }
        if (cdn->parsed()) return cmd_downsample_study(dn);
        throw validation_error("no subcommand given");
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 1;
    } catch (const validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

// Command-line harness wiring the encoders, the statevector classifier and the
// fidelity metrics into reproducible benchmark runs.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fpqe/fpqe.hpp"

namespace fs = std::filesystem;
using fpqe::bench::ExperimentConfig;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value
    std::string out_dir;
    std::string seed_text;
    int threads = 0;
    bool force = false;
};

ExperimentConfig resolve_config(const GlobalArgs& g) {
    ExperimentConfig cfg;
    if (!g.config_path.empty()) cfg.apply_kv(fpqe::read_kv_file(g.config_path));
    fpqe::KvMap extra;
    for (const auto& kv : g.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw fpqe::ConfigError("--set expects key=value, got " + kv);
        extra[fpqe::trim(kv.substr(0, eq))] = fpqe::trim(kv.substr(eq + 1));
    }
    cfg.apply_kv(extra);
    if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
    if (!g.seed_text.empty()) cfg.seed = std::stoull(g.seed_text);
    if (g.threads > 0) cfg.threads = g.threads;
    return cfg;
}

void refuse_overwrite(const std::string& path, bool force) {
    if (fs::exists(path)) {
        if (!force) {
            throw fpqe::IoError(path + " already exists; pass --force to overwrite");
        }
        fs::remove_all(path);
    }
}

// Writes the fully resolved config next to the artifacts so every output is
// self-describing.
void write_resolved_config(const ExperimentConfig& cfg, const std::string& path) {
    fpqe::KvMap kv = cfg.to_kv();
    kv["fingerprint"] = cfg.fingerprint();
    kv["code_version"] = fpqe::kVersion;
    fpqe::write_kv_file(path, kv);
}

fpqe::PairSplits load_pair_splits(const ExperimentConfig& cfg) {
    const auto pool = fpqe::bench::load_dataset_pool(cfg);
    return fpqe::make_pair(pool, cfg.pair_a, cfg.pair_b, cfg.n_train, cfg.n_test, cfg.seed);
}

int cmd_train_ae(const GlobalArgs& g, int epochs_override) {
    ExperimentConfig cfg = resolve_config(g);
    if (epochs_override >= 0) cfg.ae_epochs = epochs_override;
    const std::string ckpt_dir = cfg.out_dir + "/ae";
    refuse_overwrite(ckpt_dir, g.force);
    fs::create_directories(cfg.out_dir);

    const auto splits = load_pair_splits(cfg);
    const auto images = fpqe::bench::pair_images(splits.train);
    auto model = fpqe::build_autoencoder(fpqe::bench::autoencoder_config(cfg), cfg.seed);
    const auto report =
        fpqe::train_autoencoder(model, images, cfg.ae_epochs, cfg.ae_lr, cfg.ae_batch, cfg.seed);

    fpqe::KvMap extra;
    extra["seed"] = std::to_string(cfg.seed);
    extra["epochs"] = std::to_string(cfg.ae_epochs);
    extra["final_loss"] = ExperimentConfig::format_double(report.final_mse);
    fpqe::save_autoencoder(ckpt_dir, model, extra);
    write_resolved_config(cfg, cfg.out_dir + "/config_resolved.txt");

    std::ofstream trace(cfg.out_dir + "/ae_trace.csv");
    trace << "epoch,mse\n";
    trace.precision(12);
    for (std::size_t e = 0; e < report.epoch_mse.size(); ++e) {
        trace << (e + 1) << ',' << report.epoch_mse[e] << "\n";
    }
    std::cout << "wrote " << ckpt_dir << " (final mse "
              << ExperimentConfig::format_double(report.final_mse) << ")\n";
    return 0;
}

fpqe::Encoder encoder_from_artifacts(const ExperimentConfig& cfg, bool allow_fit,
                                     const fpqe::PairSplits& splits) {
    const auto kind = fpqe::encoder_kind_from_name(cfg.encoder);
    switch (kind) {
        case fpqe::EncoderKind::Angle: return fpqe::Encoder::angle();
        case fpqe::EncoderKind::Amplitude: return fpqe::Encoder::amplitude();
        case fpqe::EncoderKind::Sqe: return fpqe::Encoder::sqe();
        case fpqe::EncoderKind::Atp: return fpqe::Encoder::atp(cfg.atp_keep);
        case fpqe::EncoderKind::Pca: {
            const std::string pca_dir = cfg.out_dir + "/pca";
            if (fs::exists(pca_dir + "/manifest.txt")) {
                return fpqe::Encoder::pca(fpqe::load_pca(pca_dir),
                                          cfg.pca_register == "angle"
                                              ? fpqe::PcaRegisterMode::AnglePerComponent
                                              : fpqe::PcaRegisterMode::PaddedAmplitude);
            }
            if (!allow_fit) {
                throw fpqe::ConfigError("no fitted pca model at " + pca_dir +
                                        "; run `fpqe encode --fit` first");
            }
            auto model = fpqe::pca_fit(fpqe::bench::pair_images(splits.train), 9, cfg.seed);
            fpqe::save_pca(pca_dir, model, {{"seed", std::to_string(cfg.seed)}});
            return fpqe::Encoder::pca(std::move(model),
                                      cfg.pca_register == "angle"
                                          ? fpqe::PcaRegisterMode::AnglePerComponent
                                          : fpqe::PcaRegisterMode::PaddedAmplitude);
        }
        case fpqe::EncoderKind::Fpqe: {
            const std::string ckpt = cfg.out_dir + "/ae";
            if (!fs::exists(ckpt + "/manifest.txt")) {
                throw fpqe::ConfigError("no autoencoder checkpoint at " + ckpt +
                                        "; run `fpqe train-ae` first");
            }
            auto model = std::make_shared<fpqe::AutoencoderModel>(fpqe::load_autoencoder(ckpt));
            fpqe::FrozenEncoder frozen(model->config, model->encoder);
            fpqe::EncoderSpec spec = fpqe::EncoderSpec::preset(fpqe::EncoderKind::Fpqe);
            auto [h, w] = model->config.latent_hw();
            spec.qubits = fpqe::q::log2_exact(static_cast<std::size_t>(h * w));
            spec.latent_shape = {model->config.latent_channels(), h * w};
            return fpqe::Encoder::fpqe(std::move(frozen), model, spec);
        }
    }
    throw fpqe::ConfigError("bad encoder kind");
}

int cmd_encode(const GlobalArgs& g, bool fit) {
    ExperimentConfig cfg = resolve_config(g);
    const auto splits = load_pair_splits(cfg);
    const auto enc = encoder_from_artifacts(cfg, fit, splits);
    // Validate register geometry before touching the filesystem.
    const fpqe::Tensor probe = enc.encode_rows(splits.train.images.front().pixels);
    if (!fpqe::q::is_power_of_two(static_cast<std::size_t>(probe.shape[1]))) {
        throw fpqe::ConfigError("encoder produces rows of length " +
                                std::to_string(probe.shape[1]) + ", not a power of two");
    }
    for (const char* split : {"train", "test"}) {
        const std::string dir = cfg.out_dir + "/encoded/" + split;
        refuse_overwrite(dir, g.force || !fs::exists(dir));
        const auto& ds = std::string(split) == "train" ? splits.train : splits.test;
        const auto encoded = fpqe::bench::encode_pair(enc, ds);
        fpqe::KvMap extra;
        extra["dataset"] = cfg.dataset;
        extra["split"] = split;
        extra["pair"] = std::to_string(cfg.pair_a) + "-" + std::to_string(cfg.pair_b);
        extra["seed"] = std::to_string(cfg.seed);
        extra["qubits"] = std::to_string(fpqe::bench::nominal_qubits(cfg));
        fpqe::save_encoded_dataset(dir, encoded, extra);
        std::cout << "wrote " << dir << " (" << encoded.labels.size() << " samples, rows "
                  << encoded.psi.shape[1] << "x" << encoded.psi.shape[2] << ")\n";
    }
    write_resolved_config(cfg, cfg.out_dir + "/config_resolved.txt");
    return 0;
}

int cmd_train_qnn(const GlobalArgs& g, int epochs_override) {
    ExperimentConfig cfg = resolve_config(g);
    if (epochs_override >= 0) cfg.qnn_epochs = epochs_override;
    const std::string enc_dir = cfg.out_dir + "/encoded/train";
    if (!fs::exists(enc_dir + "/manifest.txt")) {
        throw fpqe::ConfigError("no encoded training data at " + enc_dir +
                                "; run `fpqe encode` first");
    }
    const auto encoded = fpqe::load_encoded_dataset(enc_dir);
    const auto plan = fpqe::bench::parse_plan(cfg.qnn_plan,
                                              static_cast<int>(encoded.psi.shape[1]),
                                              cfg.qnn_layers, 2);
    auto qnn = fpqe::q::build_qnn(static_cast<int>(encoded.psi.shape[1]),
                                  static_cast<int>(encoded.psi.shape[2]), plan, cfg.qnn_depth,
                                  fpqe::bench::parse_readout(cfg.qnn_readout), cfg.seed);
    const auto samples = fpqe::bench::to_samples(encoded);
    const auto trace = fpqe::q::qnn_train(qnn, samples, cfg.qnn_epochs, cfg.qnn_lr, cfg.qnn_batch,
                                          cfg.seed, cfg.threads);

    const std::string ckpt = cfg.out_dir + "/qnn";
    refuse_overwrite(ckpt, g.force || !fs::exists(ckpt));
    fpqe::KvMap extra;
    extra["epochs"] = std::to_string(cfg.qnn_epochs);
    extra["lr"] = ExperimentConfig::format_double(cfg.qnn_lr);
    fpqe::bench::save_qnn(ckpt, qnn, extra);

    std::ofstream tr(cfg.out_dir + "/qnn_trace.csv");
    tr << "epoch,loss,train_acc\n";
    tr.precision(12);
    for (const auto& row : trace) {
        tr << row.epoch << ',' << row.loss << ',' << row.train_accuracy << "\n";
    }
    std::cout << "wrote " << ckpt;
    if (!trace.empty()) std::cout << " (train acc " << trace.back().train_accuracy << ")";
    std::cout << "\n";
    return 0;
}

int cmd_evaluate(const GlobalArgs& g) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig cfg = resolve_config(g);
    const std::string qnn_dir = cfg.out_dir + "/qnn";
    const std::string enc_dir = cfg.out_dir + "/encoded/test";
    for (const auto& p : {qnn_dir, enc_dir}) {
        if (!fs::exists(p + "/manifest.txt")) {
            throw fpqe::ConfigError("missing checkpoint: " + p);
        }
    }
    const auto qnn = fpqe::bench::load_qnn(qnn_dir);
    const auto encoded = fpqe::load_encoded_dataset(enc_dir);
    const auto samples = fpqe::bench::to_samples(encoded);

    const auto splits = load_pair_splits(cfg);
    const auto enc = encoder_from_artifacts(cfg, false, splits);
    const auto test_images = fpqe::bench::pair_images(splits.test);

    fpqe::bench::ResultRow row;
    std::size_t correct = 0, n0 = 0, n1 = 0, c0 = 0, c1 = 0;
    for (const auto& s : samples) {
        const bool ok = fpqe::q::predict(qnn, s.rows) == s.label;
        correct += ok;
        (s.label == 0 ? n0 : n1) += 1;
        (s.label == 0 ? c0 : c1) += ok ? 1 : 0;
    }
    row.fingerprint = cfg.fingerprint();
    row.dataset = cfg.dataset;
    row.pair_a = cfg.pair_a;
    row.pair_b = cfg.pair_b;
    row.encoder = cfg.encoder;
    row.qubits = fpqe::bench::nominal_qubits(cfg);
    row.seed = cfg.seed;
    row.n_train = cfg.n_train;
    row.n_test = cfg.n_test;
    row.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
    row.acc_class0 = n0 ? static_cast<double>(c0) / static_cast<double>(n0) : 0.0;
    row.acc_class1 = n1 ? static_cast<double>(c1) / static_cast<double>(n1) : 0.0;
    row.fidelity = fpqe::batch_report(
        test_images, [&enc](const fpqe::Tensor& img) { return enc.reconstruct(img); });
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    fpqe::bench::append_csv_row(cfg.out_dir + "/results.csv",
                                fpqe::bench::ResultRow::csv_header(), row.csv_line());
    std::cout << "accuracy " << row.accuracy << " (class0 " << row.acc_class0 << ", class1 "
              << row.acc_class1 << "), ssim " << row.fidelity.ssim << "\n";
    return 0;
}

int cmd_fidelity(const GlobalArgs& g) {
    ExperimentConfig cfg = resolve_config(g);
    const auto splits = load_pair_splits(cfg);
    const auto test_images = fpqe::bench::pair_images(splits.test);
    fs::create_directories(cfg.out_dir);
    const std::string path = cfg.out_dir + "/fidelity.csv";
    const char* header = "encoder,qubits,dataset,mse,psnr_db,ssim,n";

    // Identity control row: a perfect reconstructor scores mse 0 / ssim 1.
    const auto control = fpqe::batch_report(test_images, [](const fpqe::Tensor& x) { return x; });
    {
        std::ostringstream os;
        os.precision(12);
        os << "identity,0," << cfg.dataset << ',' << control.mse << ',' << control.psnr_db << ','
           << control.ssim << ',' << control.n_images;
        fpqe::bench::append_csv_row(path, header, os.str());
    }
    const auto enc = encoder_from_artifacts(cfg, false, splits);
    const auto rep = fpqe::batch_report(
        test_images, [&enc](const fpqe::Tensor& img) { return enc.reconstruct(img); });
    std::ostringstream os;
    os.precision(12);
    os << cfg.encoder << ',' << fpqe::bench::nominal_qubits(cfg) << ',' << cfg.dataset << ','
       << rep.mse << ',' << rep.psnr_db << ',' << rep.ssim << ',' << rep.n_images;
    fpqe::bench::append_csv_row(path, header, os.str());
    std::cout << "wrote " << path << " (" << cfg.encoder << " ssim " << rep.ssim << ")\n";
    return 0;
}

int cmd_reproduce(const GlobalArgs& g, int table) {
    ExperimentConfig cfg = resolve_config(g);
    const auto outcome = fpqe::bench::reproduce(cfg, table, std::cout);
    std::cout << "\nsweep: " << outcome.cells_trained << " trained, " << outcome.cells_resumed
              << " resumed, " << outcome.cells_failed << " failed of " << outcome.cells_total
              << " cells";
    if (outcome.fpqe_vs_pca_violations > 0) {
        std::cout << "; " << outcome.fpqe_vs_pca_violations
                  << " cells flagged where fpqe does not beat pca";
    }
    std::cout << "\n";
    return outcome.cells_failed > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hybrid classical/quantum encoding benchmark lab"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "key=value config file");
    app.add_option("--set", g.overrides, "override a config key (key=value, repeatable)");
    app.add_option("--out", g.out_dir, "output directory");
    app.add_option("--seed", g.seed_text, "experiment seed");
    app.add_option("--threads", g.threads, "worker threads (1 = bitwise deterministic)");
    app.add_flag("--force", g.force, "overwrite existing outputs");

    int ae_epochs = -1, qnn_epochs = -1, table = 2;
    bool fit = false;
    auto* train_ae = app.add_subcommand("train-ae", "train the encoder-decoder and checkpoint it");
    train_ae->add_option("--epochs", ae_epochs, "override ae.epochs");
    auto* encode = app.add_subcommand("encode", "emit amplitude rows for the configured encoder");
    encode->add_flag("--fit", fit, "fit missing learned-encoder models (pca)");
    auto* train_qnn = app.add_subcommand("train-qnn", "train the layered quantum classifier");
    train_qnn->add_option("--epochs", qnn_epochs, "override qnn.epochs");
    auto* evaluate = app.add_subcommand("evaluate", "score the held-out pair split");
    auto* fidelity = app.add_subcommand("fidelity", "emit reconstruction fidelity rows");
    auto* reproduce = app.add_subcommand("reproduce", "run the full benchmark sweep");
    reproduce->add_option("--table", table, "which result table to reproduce (2 or 3)");
    reproduce->add_option("--scale", [](const std::vector<std::string>& v) {
        if (!v.empty() && v.front() != "desk") {
            throw CLI::ValidationError("--scale", "only 'desk' scale is available");
        }
        return true;
    }, "run scale (desk)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_ae->parsed()) return cmd_train_ae(g, ae_epochs);
        if (encode->parsed()) return cmd_encode(g, fit);
        if (train_qnn->parsed()) return cmd_train_qnn(g, qnn_epochs);
        if (evaluate->parsed()) return cmd_evaluate(g);
        if (fidelity->parsed()) return cmd_fidelity(g);
        if (reproduce->parsed()) return cmd_reproduce(g, table);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fpqe/autoencoder.hpp"
#include "fpqe/common.hpp"
#include "fpqe/data.hpp"
#include "fpqe/encoders.hpp"
#include "fpqe/manifest.hpp"
#include "fpqe/metrics.hpp"
#include "fpqe/qnn.hpp"
#include "fpqe/tensor.hpp"
#include "fpqe/version.hpp"

// Benchmark harness: one ExperimentConfig fully determines a (dataset, pair,
// encoder) cell. Cells write into fingerprint-named directories, results.csv
// rows are append-only, and completed fingerprints are skipped on re-runs.

namespace fpqe::bench {

struct ExperimentConfig {
    std::string dataset = "mnist";  // mnist | fashion | cifar10
    int pair_a = 0;
    int pair_b = 1;
    int n_train = 500;
    int n_test = 200;

    std::string encoder = "fpqe";
    double atp_keep = 0.5;
    std::string pca_register = "padded";  // padded | angle

    std::string ae_blocks = "16:1,32:1,8:1";  // out_channels:padding, kernel 3 stride 2
    int ae_epochs = 30;
    double ae_lr = 1e-3;
    int ae_batch = 32;

    int qnn_layers = 2;
    std::string qnn_plan = "auto";
    int qnn_depth = 2;
    int qnn_epochs = 50;
    double qnn_lr = 0.05;
    int qnn_batch = 25;
    std::string qnn_readout = "z0";  // z0 | zmean

    std::uint64_t seed = 0;
    int threads = 1;
    std::string out_dir = "out";

    std::string mnist_images, mnist_labels;
    std::string fashion_images, fashion_labels;
    std::string cifar_batches;  // comma-separated paths

    KvMap to_kv() const {
        KvMap kv;
        kv["dataset"] = dataset;
        kv["pair.a"] = std::to_string(pair_a);
        kv["pair.b"] = std::to_string(pair_b);
        kv["data.n_train"] = std::to_string(n_train);
        kv["data.n_test"] = std::to_string(n_test);
        kv["encoder.kind"] = encoder;
        kv["encoder.atp_keep"] = format_double(atp_keep);
        kv["encoder.pca_register"] = pca_register;
        kv["ae.blocks"] = ae_blocks;
        kv["ae.epochs"] = std::to_string(ae_epochs);
        kv["ae.lr"] = format_double(ae_lr);
        kv["ae.batch"] = std::to_string(ae_batch);
        kv["qnn.layers"] = std::to_string(qnn_layers);
        kv["qnn.plan"] = qnn_plan;
        kv["qnn.depth"] = std::to_string(qnn_depth);
        kv["qnn.epochs"] = std::to_string(qnn_epochs);
        kv["qnn.lr"] = format_double(qnn_lr);
        kv["qnn.batch"] = std::to_string(qnn_batch);
        kv["qnn.readout"] = qnn_readout;
        kv["seed"] = std::to_string(seed);
        kv["threads"] = std::to_string(threads);
        kv["out"] = out_dir;
        kv["data.mnist.images"] = mnist_images;
        kv["data.mnist.labels"] = mnist_labels;
        kv["data.fashion.images"] = fashion_images;
        kv["data.fashion.labels"] = fashion_labels;
        kv["data.cifar.batches"] = cifar_batches;
        return kv;
    }

    void apply_kv(const KvMap& kv) {
        auto s = [&kv](const char* key, std::string& dst) {
            auto it = kv.find(key);
            if (it != kv.end()) dst = it->second;
        };
        auto i = [&kv](const char* key, int& dst) {
            auto it = kv.find(key);
            if (it != kv.end()) dst = static_cast<int>(std::stoll(it->second));
        };
        auto d = [&kv](const char* key, double& dst) {
            auto it = kv.find(key);
            if (it != kv.end()) dst = std::stod(it->second);
        };
        s("dataset", dataset);
        i("pair.a", pair_a);
        i("pair.b", pair_b);
        i("data.n_train", n_train);
        i("data.n_test", n_test);
        s("encoder.kind", encoder);
        d("encoder.atp_keep", atp_keep);
        s("encoder.pca_register", pca_register);
        s("ae.blocks", ae_blocks);
        i("ae.epochs", ae_epochs);
        d("ae.lr", ae_lr);
        i("ae.batch", ae_batch);
        i("qnn.layers", qnn_layers);
        s("qnn.plan", qnn_plan);
        i("qnn.depth", qnn_depth);
        i("qnn.epochs", qnn_epochs);
        d("qnn.lr", qnn_lr);
        i("qnn.batch", qnn_batch);
        s("qnn.readout", qnn_readout);
        auto it = kv.find("seed");
        if (it != kv.end()) seed = std::stoull(it->second);
        i("threads", threads);
        s("out", out_dir);
        s("data.mnist.images", mnist_images);
        s("data.mnist.labels", mnist_labels);
        s("data.fashion.images", fashion_images);
        s("data.fashion.labels", fashion_labels);
        s("data.cifar.batches", cifar_batches);
    }

    // Hash of the result-determining keys; paths, threads and output location
    // are excluded so the same cell resolves to the same fingerprint anywhere.
    std::string fingerprint() const {
        KvMap kv = to_kv();
        kv.erase("out");
        kv.erase("threads");
        kv.erase("data.mnist.images");
        kv.erase("data.mnist.labels");
        kv.erase("data.fashion.images");
        kv.erase("data.fashion.labels");
        kv.erase("data.cifar.batches");
        std::string text;
        for (const auto& [k, v] : kv) {
            text += k;
            text += '=';
            text += v;
            text += '\n';
        }
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char c : text) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        std::ostringstream os;
        os << std::hex;
        for (int shift = 60; shift >= 0; shift -= 4) os << ((h >> shift) & 0xf);
        return os.str();
    }

    static std::string format_double(double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    }
};

// ---------------------------------------------------------------------------
// Dataset access
// ---------------------------------------------------------------------------

struct DatasetShape {
    std::int64_t channels, height, width;
};

inline DatasetShape dataset_shape(const std::string& name) {
    if (name == "mnist" || name == "fashion") return {1, 28, 28};
    if (name == "cifar10") return {3, 32, 32};
    throw ConfigError("unknown dataset '" + name + "' (expected mnist, fashion or cifar10)");
}

inline std::vector<LabeledImage> load_dataset_pool(const ExperimentConfig& cfg) {
    if (cfg.dataset == "mnist" || cfg.dataset == "fashion") {
        const std::string& img = cfg.dataset == "mnist" ? cfg.mnist_images : cfg.fashion_images;
        const std::string& lbl = cfg.dataset == "mnist" ? cfg.mnist_labels : cfg.fashion_labels;
        if (img.empty() || lbl.empty()) {
            throw ConfigError(
                "no data paths for dataset '" + cfg.dataset + "': set data." +
                (cfg.dataset == "mnist" ? "mnist" : "fashion") +
                ".images and .labels to IDX files (magic 0x00000803 / 0x00000801, "
                "optionally gzip-compressed)");
        }
        return load_idx(img, lbl);
    }
    if (cfg.dataset == "cifar10") {
        if (cfg.cifar_batches.empty()) {
            throw ConfigError(
                "no data paths for dataset 'cifar10': set data.cifar.batches to a"
                " comma-separated list of 3073-byte-record binary batch files");
        }
        std::vector<std::string> paths;
        std::istringstream is(cfg.cifar_batches);
        std::string part;
        while (std::getline(is, part, ',')) {
            if (!trim(part).empty()) paths.push_back(trim(part));
        }
        return load_cifar10(paths);
    }
    throw ConfigError("unknown dataset '" + cfg.dataset + "'");
}

// ---------------------------------------------------------------------------
// Cell pipeline pieces
// ---------------------------------------------------------------------------

inline EncoderConfig autoencoder_config(const ExperimentConfig& cfg) {
    const DatasetShape shape = dataset_shape(cfg.dataset);
    EncoderConfig ec;
    ec.in_channels = shape.channels;
    ec.in_h = shape.height;
    ec.in_w = shape.width;
    ec.blocks.clear();
    std::istringstream is(cfg.ae_blocks);
    std::string part;
    while (std::getline(is, part, ',')) {
        ConvBlockSpec b;
        const std::size_t colon = part.find(':');
        if (colon == std::string::npos) throw ConfigError("ae.blocks entry '" + part + "' needs out:pad");
        b.out_channels = std::stoll(part.substr(0, colon));
        b.padding = std::stoll(part.substr(colon + 1));
        ec.blocks.push_back(b);
    }
    ec.validate();
    return ec;
}

inline std::vector<Tensor> pair_images(const PairDataset& ds) {
    std::vector<Tensor> out;
    out.reserve(ds.images.size());
    for (const auto& li : ds.images) out.push_back(li.pixels);
    return out;
}

inline std::vector<int> parse_plan(const std::string& text, int input_channels, int layers,
                                   int num_classes) {
    if (text != "auto") {
        std::vector<int> plan;
        std::istringstream is(text);
        std::string part;
        while (std::getline(is, part, ',')) plan.push_back(std::stoi(part));
        if (plan.empty() || plan.back() != num_classes) {
            throw ConfigError("qnn.plan must end with the class count " +
                              std::to_string(num_classes));
        }
        return plan;
    }
    std::vector<int> plan;
    const int first = input_channels > 1 ? input_channels : 4;
    for (int l = 0; l < layers - 1; ++l) plan.push_back(l == 0 ? first : std::max(4, num_classes));
    plan.push_back(num_classes);
    return plan;
}

inline q::Readout parse_readout(const std::string& text) {
    if (text == "z0") return q::Readout::QubitZero;
    if (text == "zmean") return q::Readout::MeanAllQubits;
    throw ConfigError("qnn.readout must be z0 or zmean, got '" + text + "'");
}

inline EncoderSpec encoder_spec_for(const ExperimentConfig& cfg) {
    EncoderSpec spec = EncoderSpec::preset(encoder_kind_from_name(cfg.encoder));
    spec.keep_fraction = cfg.atp_keep;
    spec.pca_mode = cfg.pca_register == "angle" ? PcaRegisterMode::AnglePerComponent
                                                : PcaRegisterMode::PaddedAmplitude;
    return spec;
}

// For result labeling: the nominal qubit budget of the configured encoder.
inline int nominal_qubits(const ExperimentConfig& cfg) {
    if (cfg.encoder == "fpqe") {
        const EncoderConfig ec = autoencoder_config(cfg);
        auto [h, w] = ec.latent_hw();
        return q::log2_exact(static_cast<std::size_t>(h * w));
    }
    return EncoderSpec::preset(encoder_kind_from_name(cfg.encoder)).qubits;
}

inline Encoder build_fitted_encoder(const ExperimentConfig& cfg,
                                    const std::vector<Tensor>& train_images,
                                    std::vector<double>* ae_trace = nullptr) {
    const EncoderKind kind = encoder_kind_from_name(cfg.encoder);
    switch (kind) {
        case EncoderKind::Angle: return Encoder::angle();
        case EncoderKind::Amplitude: return Encoder::amplitude();
        case EncoderKind::Sqe: return Encoder::sqe();
        case EncoderKind::Atp: return Encoder::atp(cfg.atp_keep);
        case EncoderKind::Pca: {
            PcaModel model = pca_fit(train_images, 9, cfg.seed);
            return Encoder::pca(model, cfg.pca_register == "angle"
                                           ? PcaRegisterMode::AnglePerComponent
                                           : PcaRegisterMode::PaddedAmplitude);
        }
        case EncoderKind::Fpqe: {
            auto model = std::make_shared<AutoencoderModel>(
                build_autoencoder(autoencoder_config(cfg), cfg.seed));
            const AeTrainReport report =
                train_autoencoder(*model, train_images, cfg.ae_epochs, cfg.ae_lr, cfg.ae_batch,
                                  cfg.seed);
            if (ae_trace) *ae_trace = report.epoch_mse;
            FrozenEncoder frozen = freeze_encoder(*model);
            EncoderSpec spec = EncoderSpec::preset(EncoderKind::Fpqe);
            auto [h, w] = model->config.latent_hw();
            spec.qubits = q::log2_exact(static_cast<std::size_t>(h * w));
            spec.latent_shape = {model->config.latent_channels(), h * w};
            return Encoder::fpqe(std::move(frozen), model, spec);
        }
    }
    throw ConfigError("bad encoder kind");
}

inline EncodedDataset encode_pair(const Encoder& enc, const PairDataset& ds) {
    EncodedDataset out;
    out.encoder_name = encoder_kind_name(enc.spec.kind);
    const Tensor first = enc.encode_rows(ds.images.front().pixels);
    out.psi = Tensor({static_cast<std::int64_t>(ds.images.size()), first.shape[0], first.shape[1]});
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        const Tensor rows = i == 0 ? first : enc.encode_rows(ds.images[i].pixels);
        std::copy(rows.data.begin(), rows.data.end(),
                  out.psi.data.begin() + static_cast<std::int64_t>(i) * rows.size());
        out.labels.push_back(ds.images[i].label);
    }
    return out;
}

inline std::vector<q::QnnSample> to_samples(const EncodedDataset& ds) {
    std::vector<q::QnnSample> out;
    out.reserve(ds.labels.size());
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        Tensor rows({ds.psi.shape[1], ds.psi.shape[2]});
        std::copy(ds.psi.data.begin() + static_cast<std::int64_t>(i) * rows.size(),
                  ds.psi.data.begin() + static_cast<std::int64_t>(i + 1) * rows.size(),
                  rows.data.begin());
        out.push_back({std::move(rows), ds.labels[i]});
    }
    return out;
}

// ---------------------------------------------------------------------------
// QNN checkpointing
// ---------------------------------------------------------------------------

inline void save_qnn(const std::string& dir, const q::QnnModel& m, KvMap extra = {}) {
    std::filesystem::create_directories(dir);
    Tensor angles({static_cast<std::int64_t>(std::max<std::size_t>(m.num_angles(), 1))});
    std::int64_t pos = 0;
    for (const auto& l : m.layers)
        for (const auto& ch : l.channels)
            for (double a : ch.params.angles) angles[pos++] = a;
    write_fpqt(dir + "/angles.fpqt", angles);
    KvMap kv = std::move(extra);
    kv["kind"] = "qnn";
    kv["version"] = kVersion;
    kv["qnn.input_channels"] = std::to_string(m.input_channels);
    kv["qnn.row_len"] = std::to_string(m.row_len);
    std::string plan;
    for (std::size_t i = 0; i < m.channel_plan.size(); ++i) {
        plan += (i ? "," : "") + std::to_string(m.channel_plan[i]);
    }
    kv["qnn.plan"] = plan;
    kv["qnn.depth"] = std::to_string(m.depth);
    kv["qnn.readout"] = m.readout == q::Readout::QubitZero ? "z0" : "zmean";
    kv["qnn.seed"] = std::to_string(m.seed);
    kv["qnn.num_angles"] = std::to_string(m.num_angles());
    write_kv_file(dir + "/manifest.txt", kv);
}

inline q::QnnModel load_qnn(const std::string& dir) {
    KvMap kv = read_kv_file(dir + "/manifest.txt");
    if (kv_get(kv, "kind") != "qnn") throw ParseError(dir + ": manifest kind is not qnn");
    std::vector<int> plan;
    {
        std::istringstream is(kv_get(kv, "qnn.plan"));
        std::string part;
        while (std::getline(is, part, ',')) plan.push_back(std::stoi(part));
    }
    q::QnnModel m = q::build_qnn(static_cast<int>(kv_get_int(kv, "qnn.input_channels")),
                                 static_cast<int>(kv_get_int(kv, "qnn.row_len")), plan,
                                 static_cast<int>(kv_get_int(kv, "qnn.depth")),
                                 parse_readout(kv_get(kv, "qnn.readout")),
                                 std::stoull(kv_get(kv, "qnn.seed")));
    const Tensor angles = read_fpqt(dir + "/angles.fpqt");
    if (static_cast<std::size_t>(kv_get_int(kv, "qnn.num_angles")) != m.num_angles()) {
        throw ParseError(dir + ": stored angle count does not match the channel plan");
    }
    std::int64_t pos = 0;
    for (auto& l : m.layers)
        for (auto& ch : l.channels)
            for (double& a : ch.params.angles) a = angles[pos++];
    return m;
}

// ---------------------------------------------------------------------------
// Result rows and CSV emission
// ---------------------------------------------------------------------------

struct ResultRow {
    std::string fingerprint;
    std::string dataset;
    int pair_a = 0, pair_b = 0;
    std::string encoder;
    int qubits = 0;
    std::uint64_t seed = 0;
    int n_train = 0, n_test = 0;
    double accuracy = 0.0, acc_class0 = 0.0, acc_class1 = 0.0;
    FidelityReport fidelity;
    double wall_seconds = 0.0;
    std::string code_version = kVersion;

    static const char* csv_header() {
        return "fingerprint,dataset,pair,encoder,qubits,seed,n_train,n_test,accuracy,"
               "acc_class0,acc_class1,mse,psnr_db,ssim,n_images,excluded_inf,wall_time_s,"
               "code_version";
    }

    std::string csv_line() const {
        std::ostringstream os;
        os.precision(12);
        os << fingerprint << ',' << dataset << ',' << pair_a << '-' << pair_b << ',' << encoder
           << ',' << qubits << ',' << seed << ',' << n_train << ',' << n_test << ',' << accuracy
           << ',' << acc_class0 << ',' << acc_class1 << ',' << fidelity.mse << ','
           << fidelity.psnr_db << ',' << fidelity.ssim << ',' << fidelity.n_images << ','
           << fidelity.excluded_inf_count << ',' << wall_seconds << ',' << code_version;
        return os.str();
    }
};

inline void append_csv_row(const std::string& path, const char* header, const std::string& line) {
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream os(path, std::ios::app);
    if (!os) throw IoError("cannot append to " + path);
    if (fresh) os << header << "\n";
    os << line << "\n";
    os.flush();
    if (!os) throw IoError("short write to " + path);
}

inline void save_result_row(const std::string& path, const ResultRow& row) {
    KvMap kv;
    kv["fingerprint"] = row.fingerprint;
    kv["dataset"] = row.dataset;
    kv["pair.a"] = std::to_string(row.pair_a);
    kv["pair.b"] = std::to_string(row.pair_b);
    kv["encoder"] = row.encoder;
    kv["qubits"] = std::to_string(row.qubits);
    kv["seed"] = std::to_string(row.seed);
    kv["n_train"] = std::to_string(row.n_train);
    kv["n_test"] = std::to_string(row.n_test);
    kv["accuracy"] = ExperimentConfig::format_double(row.accuracy);
    kv["acc_class0"] = ExperimentConfig::format_double(row.acc_class0);
    kv["acc_class1"] = ExperimentConfig::format_double(row.acc_class1);
    kv["mse"] = ExperimentConfig::format_double(row.fidelity.mse);
    kv["psnr_db"] = ExperimentConfig::format_double(row.fidelity.psnr_db);
    kv["ssim"] = ExperimentConfig::format_double(row.fidelity.ssim);
    kv["n_images"] = std::to_string(row.fidelity.n_images);
    kv["excluded_inf"] = std::to_string(row.fidelity.excluded_inf_count);
    kv["wall_time_s"] = ExperimentConfig::format_double(row.wall_seconds);
    kv["code_version"] = row.code_version;
    write_kv_file(path, kv);
}

inline ResultRow load_result_row(const std::string& path) {
    const KvMap kv = read_kv_file(path);
    ResultRow row;
    row.fingerprint = kv_get(kv, "fingerprint");
    row.dataset = kv_get(kv, "dataset");
    row.pair_a = static_cast<int>(kv_get_int(kv, "pair.a"));
    row.pair_b = static_cast<int>(kv_get_int(kv, "pair.b"));
    row.encoder = kv_get(kv, "encoder");
    row.qubits = static_cast<int>(kv_get_int(kv, "qubits"));
    row.seed = std::stoull(kv_get(kv, "seed"));
    row.n_train = static_cast<int>(kv_get_int(kv, "n_train"));
    row.n_test = static_cast<int>(kv_get_int(kv, "n_test"));
    row.accuracy = kv_get_double(kv, "accuracy");
    row.acc_class0 = kv_get_double(kv, "acc_class0");
    row.acc_class1 = kv_get_double(kv, "acc_class1");
    row.fidelity.mse = kv_get_double(kv, "mse");
    row.fidelity.psnr_db = kv_get_double(kv, "psnr_db");
    row.fidelity.ssim = kv_get_double(kv, "ssim");
    row.fidelity.n_images = static_cast<int>(kv_get_int(kv, "n_images"));
    row.fidelity.excluded_inf_count = static_cast<int>(kv_get_int(kv, "excluded_inf"));
    row.wall_seconds = kv_get_double(kv, "wall_time_s");
    row.code_version = kv_get(kv, "code_version");
    return row;
}

// ---------------------------------------------------------------------------
// Full-cell runner
// ---------------------------------------------------------------------------

inline ResultRow run_cell(const ExperimentConfig& cfg, const std::vector<LabeledImage>& pool) {
    const auto t0 = std::chrono::steady_clock::now();
    const PairSplits splits = make_pair(pool, cfg.pair_a, cfg.pair_b, cfg.n_train, cfg.n_test,
                                        cfg.seed);
    const std::vector<Tensor> train_images = pair_images(splits.train);
    const std::vector<Tensor> test_images = pair_images(splits.test);

    const Encoder enc = build_fitted_encoder(cfg, train_images);
    const EncodedDataset enc_train = encode_pair(enc, splits.train);
    const EncodedDataset enc_test = encode_pair(enc, splits.test);

    const auto plan = parse_plan(cfg.qnn_plan, static_cast<int>(enc_train.psi.shape[1]),
                                 cfg.qnn_layers, 2);
    q::QnnModel qnn = q::build_qnn(static_cast<int>(enc_train.psi.shape[1]),
                                   static_cast<int>(enc_train.psi.shape[2]), plan, cfg.qnn_depth,
                                   parse_readout(cfg.qnn_readout), cfg.seed);
    const auto train_samples = to_samples(enc_train);
    q::qnn_train(qnn, train_samples, cfg.qnn_epochs, cfg.qnn_lr, cfg.qnn_batch, cfg.seed,
                 cfg.threads);

    const auto test_samples = to_samples(enc_test);
    std::size_t correct = 0, n0 = 0, n1 = 0, c0 = 0, c1 = 0;
    for (const auto& s : test_samples) {
        const bool ok = q::predict(qnn, s.rows) == s.label;
        correct += ok;
        if (s.label == 0) {
            ++n0;
            c0 += ok;
        } else {
            ++n1;
            c1 += ok;
        }
    }

    ResultRow row;
    row.fingerprint = cfg.fingerprint();
    row.dataset = cfg.dataset;
    row.pair_a = cfg.pair_a;
    row.pair_b = cfg.pair_b;
    row.encoder = cfg.encoder;
    row.qubits = nominal_qubits(cfg);
    row.seed = cfg.seed;
    row.n_train = cfg.n_train;
    row.n_test = cfg.n_test;
    row.accuracy = static_cast<double>(correct) / static_cast<double>(test_samples.size());
    row.acc_class0 = n0 ? static_cast<double>(c0) / static_cast<double>(n0) : 0.0;
    row.acc_class1 = n1 ? static_cast<double>(c1) / static_cast<double>(n1) : 0.0;
    row.fidelity = batch_report(test_images, [&enc](const Tensor& img) { return enc.reconstruct(img); });
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

// ---------------------------------------------------------------------------
// Full-scale reference values, used only for comparison reporting.
// ---------------------------------------------------------------------------

struct ReferenceAccuracy {
    const char* dataset;
    int pair_a, pair_b;
    const char* encoder;
    double accuracy_pct;
};

inline constexpr ReferenceAccuracy kFullScaleAccuracy[] = {
    {"mnist", 0, 1, "angle", 96.0},     {"mnist", 0, 3, "angle", 89.0},
    {"mnist", 2, 4, "angle", 85.0},     {"mnist", 5, 6, "angle", 86.0},
    {"mnist", 2, 8, "angle", 81.0},     {"mnist", 0, 1, "amplitude", 95.5},
    {"mnist", 0, 3, "amplitude", 88.5}, {"mnist", 2, 4, "amplitude", 84.0},
    {"mnist", 5, 6, "amplitude", 85.5}, {"mnist", 2, 8, "amplitude", 79.5},
    {"mnist", 0, 1, "pca", 99.0},       {"mnist", 0, 3, "pca", 88.0},
    {"mnist", 2, 4, "pca", 84.5},       {"mnist", 5, 6, "pca", 85.0},
    {"mnist", 2, 8, "pca", 86.0},       {"mnist", 0, 1, "sqe", 88.0},
    {"mnist", 0, 3, "sqe", 86.0},       {"mnist", 2, 4, "sqe", 82.0},
    {"mnist", 5, 6, "sqe", 83.5},       {"mnist", 2, 8, "sqe", 78.5},
    {"mnist", 0, 1, "atp", 99.0},       {"mnist", 0, 3, "atp", 91.0},
    {"mnist", 2, 4, "atp", 86.0},       {"mnist", 5, 6, "atp", 87.0},
    {"mnist", 2, 8, "atp", 83.0},       {"mnist", 0, 1, "fpqe", 99.8},
    {"mnist", 0, 3, "fpqe", 99.6},      {"mnist", 2, 4, "fpqe", 98.8},
    {"mnist", 5, 6, "fpqe", 98.4},      {"mnist", 2, 8, "fpqe", 98.7},
    {"fashion", 0, 1, "angle", 88.5},   {"fashion", 2, 8, "angle", 86.0},
    {"fashion", 3, 9, "angle", 94.0},   {"fashion", 7, 9, "angle", 82.0},
    {"fashion", 0, 1, "amplitude", 88.0}, {"fashion", 2, 8, "amplitude", 84.5},
    {"fashion", 3, 9, "amplitude", 87.0}, {"fashion", 7, 9, "amplitude", 78.0},
    {"fashion", 0, 1, "pca", 88.5},     {"fashion", 2, 8, "pca", 86.0},
    {"fashion", 3, 9, "pca", 93.0},     {"fashion", 7, 9, "pca", 79.0},
    {"fashion", 0, 1, "sqe", 86.0},     {"fashion", 2, 8, "sqe", 83.0},
    {"fashion", 3, 9, "sqe", 81.0},     {"fashion", 7, 9, "sqe", 77.0},
    {"fashion", 0, 1, "atp", 91.5},     {"fashion", 2, 8, "atp", 86.0},
    {"fashion", 3, 9, "atp", 94.0},     {"fashion", 7, 9, "atp", 83.0},
    {"fashion", 0, 1, "fpqe", 98.2},    {"fashion", 2, 8, "fpqe", 97.4},
    {"fashion", 3, 9, "fpqe", 99.8},    {"fashion", 7, 9, "fpqe", 95.0},
    {"cifar10", 0, 1, "angle", 70.0},   {"cifar10", 0, 1, "amplitude", 68.5},
    {"cifar10", 0, 1, "pca", 68.0},     {"cifar10", 0, 1, "sqe", 66.0},
    {"cifar10", 0, 1, "atp", 74.2},     {"cifar10", 0, 1, "fpqe", 84.4},
};

struct ReferenceFidelity {
    const char* dataset;
    const char* encoder;
    int qubits;
    double mse, psnr_db, ssim;
};

inline constexpr ReferenceFidelity kFullScaleFidelity[] = {
    {"mnist", "angle", 6, 0.107, 9.66, 0.26},      {"mnist", "angle", 9, 0.093, 10.29, 0.31},
    {"mnist", "amplitude", 6, 0.034, 14.62, 0.61}, {"mnist", "amplitude", 8, 0.010, 19.65, 0.88},
    {"mnist", "pca", 6, 0.022, 16.53, 0.31},       {"mnist", "pca", 9, 0.022, 16.53, 0.31},
    {"mnist", "sqe", 6, 0.095, 10.21, 0.25},       {"mnist", "sqe", 9, 0.093, 10.29, 0.31},
    {"mnist", "fpqe", 6, 0.004, 23.23, 0.96},
    {"fashion", "angle", 6, 0.098, 10.07, 0.22},   {"fashion", "angle", 9, 0.078, 11.03, 0.26},
    {"fashion", "amplitude", 6, 0.029, 15.24, 0.54}, {"fashion", "amplitude", 8, 0.011, 19.24, 0.79},
    {"fashion", "pca", 6, 0.022, 16.53, 0.31},     {"fashion", "pca", 9, 0.022, 16.53, 0.31},
    {"fashion", "sqe", 6, 0.092, 10.36, 0.21},     {"fashion", "sqe", 9, 0.078, 11.03, 0.26},
    {"fashion", "fpqe", 6, 0.020, 16.92, 0.78},
    {"cifar10", "angle", 6, 0.073, 11.32, 0.19},   {"cifar10", "angle", 9, 0.067, 11.73, 0.19},
    {"cifar10", "amplitude", 6, 0.021, 16.6, 0.37}, {"cifar10", "amplitude", 8, 0.008, 20.46, 0.63},
    {"cifar10", "pca", 6, 0.026, 15.76, 0.27},     {"cifar10", "pca", 9, 0.022, 16.53, 0.31},
    {"cifar10", "sqe", 6, 0.068, 11.65, 0.19},     {"cifar10", "sqe", 9, 0.067, 11.72, 0.19},
    {"cifar10", "fpqe", 6, 0.002, 25.27, 0.85},
};

inline std::optional<double> reference_accuracy(const std::string& dataset, int a, int b,
                                                const std::string& encoder) {
    for (const auto& r : kFullScaleAccuracy) {
        if (dataset == r.dataset && a == r.pair_a && b == r.pair_b && encoder == r.encoder) {
            return r.accuracy_pct;
        }
    }
    return std::nullopt;
}

inline void write_reference_file(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path);
    os << "provenance,dataset,pair,encoder,qubits,accuracy_pct,mse,psnr_db,ssim\n";
    for (const auto& r : kFullScaleAccuracy) {
        os << "full-scale-reference," << r.dataset << ',' << r.pair_a << '-' << r.pair_b << ','
           << r.encoder << ",,," << r.accuracy_pct << ",,,\n";
    }
    for (const auto& r : kFullScaleFidelity) {
        os << "full-scale-reference," << r.dataset << ",," << r.encoder << ',' << r.qubits << ",,"
           << r.mse << ',' << r.psnr_db << ',' << r.ssim << "\n";
    }
}

// ---------------------------------------------------------------------------
// Sweep driver (the `reproduce` verb)
// ---------------------------------------------------------------------------

struct SweepOutcome {
    int cells_total = 0;
    int cells_trained = 0;
    int cells_resumed = 0;
    int cells_failed = 0;
    int fpqe_vs_pca_violations = 0;
    std::vector<ResultRow> rows;
};

inline std::vector<std::pair<int, int>> standard_pairs(const std::string& dataset) {
    if (dataset == "mnist") return {{0, 1}, {0, 3}, {2, 4}, {5, 6}, {2, 8}};
    if (dataset == "fashion") return {{0, 1}, {2, 8}, {3, 9}, {7, 9}};
    return {{0, 1}};
}

inline const std::vector<std::string>& all_encoders() {
    static const std::vector<std::string> kinds = {"angle", "amplitude", "pca",
                                                   "sqe",   "atp",       "fpqe"};
    return kinds;
}

inline bool dataset_available(const ExperimentConfig& cfg, const std::string& dataset) {
    if (dataset == "mnist") return !cfg.mnist_images.empty() && !cfg.mnist_labels.empty();
    if (dataset == "fashion") return !cfg.fashion_images.empty() && !cfg.fashion_labels.empty();
    if (dataset == "cifar10") return !cfg.cifar_batches.empty();
    return false;
}

// Runs every (dataset, pair, encoder) cell at desk scale. Completed
// fingerprints are resumed from their cell directories; failures are recorded
// per cell and the sweep continues.
inline SweepOutcome reproduce(const ExperimentConfig& base, int table, std::ostream& log) {
    if (table != 2 && table != 3) throw ConfigError("reproduce table must be 2 or 3");
    namespace fs = std::filesystem;
    fs::create_directories(base.out_dir);
    fs::create_directories(base.out_dir + "/cells");
    write_reference_file(base.out_dir + "/reference_values.csv");

    SweepOutcome outcome;
    const std::vector<std::string> datasets = {"mnist", "fashion", "cifar10"};
    for (const auto& dataset : datasets) {
        if (!dataset_available(base, dataset)) {
            log << "skipping dataset '" << dataset << "': no data paths configured\n";
            continue;
        }
        ExperimentConfig proto = base;
        proto.dataset = dataset;
        if (dataset == "cifar10") {
            // Extended cells: reduced counts keep desk runs tractable.
            proto.n_train = std::min(proto.n_train, 200);
            proto.n_test = std::min(proto.n_test, 100);
        }
        std::vector<LabeledImage> pool;
        try {
            pool = load_dataset_pool(proto);
        } catch (const std::exception& e) {
            log << "dataset '" << dataset << "' unavailable: " << e.what() << "\n";
            continue;
        }
        for (const auto& [a, b] : standard_pairs(dataset)) {
            for (const auto& encoder : all_encoders()) {
                ExperimentConfig cfg = proto;
                cfg.pair_a = a;
                cfg.pair_b = b;
                cfg.encoder = encoder;
                const std::string fp = cfg.fingerprint();
                const std::string cell_dir = base.out_dir + "/cells/" + fp;
                const std::string row_path = cell_dir + "/result.txt";
                ++outcome.cells_total;
                try {
                    ResultRow row;
                    if (fs::exists(row_path)) {
                        row = load_result_row(row_path);
                        ++outcome.cells_resumed;
                        log << "cell " << fp << " (" << dataset << " " << a << "-" << b << " "
                            << encoder << "): resumed\n";
                    } else {
                        fs::create_directories(cell_dir);
                        write_kv_file(cell_dir + "/config.txt", cfg.to_kv());
                        row = run_cell(cfg, pool);
                        save_result_row(row_path, row);
                        append_csv_row(base.out_dir + "/results.csv", ResultRow::csv_header(),
                                       row.csv_line());
                        std::ostringstream fl;
                        fl.precision(12);
                        fl << encoder << ',' << row.qubits << ',' << dataset << ','
                           << row.fidelity.mse << ',' << row.fidelity.psnr_db << ','
                           << row.fidelity.ssim << ',' << row.fidelity.n_images;
                        append_csv_row(base.out_dir + "/fidelity.csv",
                                       "encoder,qubits,dataset,mse,psnr_db,ssim,n", fl.str());
                        ++outcome.cells_trained;
                        log << "cell " << fp << " (" << dataset << " " << a << "-" << b << " "
                            << encoder << "): accuracy " << row.accuracy << ", ssim "
                            << row.fidelity.ssim << "\n";
                    }
                    outcome.rows.push_back(row);
                } catch (const std::exception& e) {
                    ++outcome.cells_failed;
                    fs::create_directories(cell_dir);
                    std::ofstream err(cell_dir + "/error.txt");
                    err << e.what() << "\n";
                    log << "cell " << fp << " (" << dataset << " " << a << "-" << b << " "
                        << encoder << "): FAILED: " << e.what() << "\n";
                }
            }
        }
    }

    // Comparison against the full-scale reference figures, plus the headline
    // ordering check: fpqe should not fall below pca anywhere.
    log << "\n--- comparison vs full-scale reference (" << (table == 2 ? "accuracy" : "fidelity")
        << ") ---\n";
    for (const auto& row : outcome.rows) {
        if (row.encoder != "fpqe") continue;
        const ResultRow* pca_row = nullptr;
        for (const auto& other : outcome.rows) {
            if (other.dataset == row.dataset && other.pair_a == row.pair_a &&
                other.pair_b == row.pair_b && other.encoder == "pca") {
                pca_row = &other;
            }
        }
        if (!pca_row) continue;
        const bool acc_ok = row.accuracy >= pca_row->accuracy;
        const bool ssim_ok = row.fidelity.ssim > pca_row->fidelity.ssim;
        if (!acc_ok || !ssim_ok) ++outcome.fpqe_vs_pca_violations;
        log << row.dataset << " " << row.pair_a << "-" << row.pair_b << ": fpqe acc "
            << row.accuracy << " vs pca " << pca_row->accuracy << (acc_ok ? " [ok]" : " [FLAG]")
            << ", fpqe ssim " << row.fidelity.ssim << " vs pca " << pca_row->fidelity.ssim
            << (ssim_ok ? " [ok]" : " [FLAG]") << "\n";
    }
    for (const auto& row : outcome.rows) {
        const auto ref = reference_accuracy(row.dataset, row.pair_a, row.pair_b, row.encoder);
        if (ref) {
            log << row.dataset << " " << row.pair_a << "-" << row.pair_b << " " << row.encoder
                << ": desk " << row.accuracy * 100.0 << "% vs full-scale " << *ref << "%\n";
        }
    }
    return outcome;
}

}  // namespace fpqe::bench

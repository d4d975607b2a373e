#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fpqe/bench.hpp"
#include "fpqe/synthdata.hpp"

namespace bench = fpqe::bench;
using bench::ExperimentConfig;

namespace {

std::string tmp_dir(const char* name) {
    const std::string path = std::string("test_tmp/") + name;
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
    return path;
}

ExperimentConfig tiny_config(const std::string& out) {
    ExperimentConfig cfg;
    cfg.n_train = 40;
    cfg.n_test = 20;
    cfg.ae_blocks = "4:1,8:1,4:1";
    cfg.ae_epochs = 2;
    cfg.qnn_epochs = 2;
    cfg.qnn_batch = 10;
    cfg.out_dir = out;
    return cfg;
}

}  // namespace

TEST_CASE("fingerprints identify cells, not machines") {
    ExperimentConfig a;
    ExperimentConfig b;
    REQUIRE(a.fingerprint() == b.fingerprint());

    b.out_dir = "/somewhere/else";
    b.threads = 8;
    b.mnist_images = "/data/x";
    REQUIRE(a.fingerprint() == b.fingerprint());

    b.seed = 99;
    REQUIRE(a.fingerprint() != b.fingerprint());
    b = a;
    b.encoder = "pca";
    REQUIRE(a.fingerprint() != b.fingerprint());
    b = a;
    b.qnn_lr = 0.123;
    REQUIRE(a.fingerprint() != b.fingerprint());
}

TEST_CASE("experiment config round-trips through key=value text") {
    ExperimentConfig cfg;
    cfg.dataset = "fashion";
    cfg.pair_a = 7;
    cfg.pair_b = 9;
    cfg.qnn_lr = 0.0125;
    cfg.seed = 1234;
    cfg.ae_blocks = "8:1,16:2";
    const fpqe::KvMap kv = cfg.to_kv();
    ExperimentConfig back;
    back.apply_kv(kv);
    REQUIRE(back.fingerprint() == cfg.fingerprint());
    REQUIRE(back.dataset == "fashion");
    REQUIRE(back.qnn_lr == 0.0125);
}

TEST_CASE("qnn plan parsing") {
    REQUIRE(bench::parse_plan("auto", 8, 2, 2) == std::vector<int>{8, 2});
    REQUIRE(bench::parse_plan("auto", 1, 2, 2) == std::vector<int>{4, 2});
    REQUIRE(bench::parse_plan("auto", 9, 3, 2) == std::vector<int>{9, 4, 2});
    REQUIRE(bench::parse_plan("auto", 8, 1, 2) == std::vector<int>{2});
    REQUIRE(bench::parse_plan("6,2", 8, 2, 2) == std::vector<int>{6, 2});
    REQUIRE_THROWS_AS(bench::parse_plan("6,3", 8, 2, 2), fpqe::ConfigError);
}

TEST_CASE("qnn checkpoint round trip preserves the forward map") {
    const std::string dir = tmp_dir("qnn_ck");
    auto m = fpqe::q::build_qnn(4, 8, {4, 2}, 2, fpqe::q::Readout::QubitZero, 77);
    bench::save_qnn(dir, m);
    const auto loaded = bench::load_qnn(dir);

    fpqe::Rng rng(90);
    fpqe::Tensor psi({4, 8});
    for (double& v : psi.data) v = rng.uniform(-1.0, 1.0);
    for (std::int64_t k = 0; k < 4; ++k) {
        double nrm = 0.0;
        for (std::int64_t j = 0; j < 8; ++j) nrm += psi.at2(k, j) * psi.at2(k, j);
        nrm = std::sqrt(nrm);
        for (std::int64_t j = 0; j < 8; ++j) psi.at2(k, j) /= nrm;
    }
    const auto a = fpqe::q::qnn_forward(m, psi);
    const auto b = fpqe::q::qnn_forward(loaded, psi);
    REQUIRE(a.data == b.data);
}

TEST_CASE("encoded dataset container round trip") {
    const std::string dir = tmp_dir("encset");
    fpqe::EncodedDataset ds;
    ds.encoder_name = "amplitude";
    ds.psi = fpqe::Tensor({3, 1, 4}, 0.5);
    ds.labels = {0, 1, 0};
    fpqe::save_encoded_dataset(dir, ds);
    const auto back = fpqe::load_encoded_dataset(dir);
    REQUIRE(back.psi.data == ds.psi.data);
    REQUIRE(back.labels == ds.labels);
    REQUIRE(back.encoder_name == "amplitude");
}

TEST_CASE("csv rows append with a single header") {
    const std::string dir = tmp_dir("csv");
    const std::string path = dir + "/results.csv";
    bench::append_csv_row(path, "a,b", "1,2");
    bench::append_csv_row(path, "a,b", "3,4");
    std::ifstream is(path);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(is, line)) lines.push_back(line);
    REQUIRE(lines == std::vector<std::string>{"a,b", "1,2", "3,4"});
}

TEST_CASE("run_cell produces a complete result row for each encoder") {
    const auto pool = fpqe::synth::make_corpus({0, 1}, 40, 5);
    for (const std::string encoder : {"angle", "sqe"}) {
        ExperimentConfig cfg = tiny_config("test_tmp/cell_" + encoder);
        cfg.encoder = encoder;
        cfg.n_train = 30;
        cfg.n_test = 10;
        cfg.qnn_epochs = 1;
        const auto row = bench::run_cell(cfg, pool);
        REQUIRE(row.fingerprint == cfg.fingerprint());
        REQUIRE(row.accuracy >= 0.0);
        REQUIRE(row.accuracy <= 1.0);
        REQUIRE(row.fidelity.n_images == 10);
        REQUIRE(std::isfinite(row.fidelity.ssim));
        REQUIRE(row.wall_seconds > 0.0);
        REQUIRE(row.qubits == (encoder == "angle" ? 9 : 9));
    }
}

TEST_CASE("result rows round trip through their cell file") {
    const std::string dir = tmp_dir("rowio");
    bench::ResultRow row;
    row.fingerprint = "abc123";
    row.dataset = "mnist";
    row.pair_a = 2;
    row.pair_b = 8;
    row.encoder = "pca";
    row.qubits = 9;
    row.accuracy = 0.8125;
    row.fidelity.mse = 0.023;
    row.fidelity.ssim = 0.31;
    row.fidelity.n_images = 20;
    bench::save_result_row(dir + "/result.txt", row);
    const auto back = bench::load_result_row(dir + "/result.txt");
    REQUIRE(back.fingerprint == row.fingerprint);
    REQUIRE(back.accuracy == row.accuracy);
    REQUIRE(back.fidelity.ssim == row.fidelity.ssim);
    REQUIRE(back.pair_b == 8);
}

TEST_CASE("reference tables contain the expected headline entries") {
    REQUIRE(bench::reference_accuracy("mnist", 0, 1, "fpqe") == 99.8);
    REQUIRE(bench::reference_accuracy("fashion", 7, 9, "pca") == 79.0);
    REQUIRE(bench::reference_accuracy("cifar10", 0, 1, "fpqe") == 84.4);
    REQUIRE_FALSE(bench::reference_accuracy("mnist", 1, 2, "fpqe").has_value());
}

TEST_CASE("chance-level accuracy for an untrained qnn on a balanced pair") {
    const auto pool = fpqe::synth::make_corpus({0, 1}, 80, 6);
    ExperimentConfig cfg = tiny_config("test_tmp/cell_chance");
    cfg.encoder = "amplitude";
    cfg.n_train = 40;
    cfg.n_test = 40;
    cfg.qnn_epochs = 0;
    const auto row = bench::run_cell(cfg, pool);
    REQUIRE(row.accuracy >= 0.35);
    REQUIRE(row.accuracy <= 0.65);
}

TEST_CASE("dataset loading errors are actionable") {
    ExperimentConfig cfg;
    cfg.dataset = "mnist";
    try {
        bench::load_dataset_pool(cfg);
        FAIL("expected a config error");
    } catch (const fpqe::ConfigError& e) {
        REQUIRE(std::string(e.what()).find("data.mnist.images") != std::string::npos);
    }
    cfg.dataset = "nope";
    REQUIRE_THROWS_AS(bench::load_dataset_pool(cfg), fpqe::ConfigError);
}

// Emits a seeded synthetic handwritten-digit corpus as IDX files, for smoke
// runs of the benchmark CLI when no real dataset is on disk.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fpqe/data.hpp"
#include "fpqe/synthdata.hpp"

int main(int argc, char** argv) {
    CLI::App app{"synthetic digit corpus generator (IDX output)"};
    std::string out_dir = "data";
    std::string classes_text = "0,1,2,3,4,5,6,8";
    int per_class = 400;
    unsigned long long seed = 0;
    double jitter = 1.0;
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--classes", classes_text, "comma-separated class list");
    app.add_option("--per-class", per_class, "images per class");
    app.add_option("--seed", seed, "corpus seed");
    app.add_option("--jitter", jitter, "distortion scale");
    CLI11_PARSE(app, argc, argv);

    try {
        std::vector<int> classes;
        std::istringstream is(classes_text);
        std::string part;
        while (std::getline(is, part, ',')) classes.push_back(std::stoi(part));
        fpqe::synth::Options opt;
        opt.jitter = jitter;
        const auto corpus = fpqe::synth::make_corpus(classes, per_class, seed, opt);
        std::filesystem::create_directories(out_dir);
        const std::string img = out_dir + "/synth-images-idx3-ubyte";
        const std::string lbl = out_dir + "/synth-labels-idx1-ubyte";
        fpqe::write_idx(corpus, img, lbl);
        std::cout << "wrote " << corpus.size() << " images to " << img << " / " << lbl << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

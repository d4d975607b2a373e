#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fpqe/autodiff.hpp"
#include "fpqe/common.hpp"
#include "fpqe/manifest.hpp"
#include "fpqe/optim.hpp"
#include "fpqe/quantum.hpp"
#include "fpqe/rng.hpp"
#include "fpqe/tensor.hpp"
#include "fpqe/version.hpp"

// Convolutional encoder-decoder. The encoder stacks stride-2 conv blocks with
// batch norm and ReLU (no ReLU on the latent block, so latent channels keep
// their sign); the decoder mirrors it with transposed convolutions and a final
// sigmoid. After training the encoder is frozen and its unit-normalized latent
// channels become amplitude vectors.

namespace fpqe {

struct ConvBlockSpec {
    std::int64_t out_channels = 0;
    std::int64_t kernel = 3;
    std::int64_t stride = 2;
    std::int64_t padding = 1;
};

struct EncoderConfig {
    std::int64_t in_channels = 1;
    std::int64_t in_h = 28;
    std::int64_t in_w = 28;
    std::vector<ConvBlockSpec> blocks;
    bool use_batchnorm = true;

    std::int64_t latent_channels() const { return blocks.empty() ? 0 : blocks.back().out_channels; }

    // Spatial sizes entering each block, plus the final latent size; throws a
    // ConfigError naming the offending block if the arithmetic breaks down.
    std::vector<std::pair<std::int64_t, std::int64_t>> spatial_chain() const {
        if (blocks.empty()) throw ConfigError("encoder needs at least one block");
        std::vector<std::pair<std::int64_t, std::int64_t>> chain;
        std::int64_t h = in_h, w = in_w;
        chain.emplace_back(h, w);
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const auto& b = blocks[i];
            if (b.out_channels < 1 || b.kernel < 1 || b.stride < 1 || b.padding < 0) {
                throw ConfigError("block " + std::to_string(i) + " has invalid parameters");
            }
            if (h + 2 * b.padding < b.kernel || w + 2 * b.padding < b.kernel) {
                throw ConfigError("block " + std::to_string(i) + " window " +
                                  std::to_string(b.kernel) + " exceeds its input " +
                                  std::to_string(h) + "x" + std::to_string(w));
            }
            h = (h + 2 * b.padding - b.kernel) / b.stride + 1;
            w = (w + 2 * b.padding - b.kernel) / b.stride + 1;
            if (h < 1 || w < 1) {
                throw ConfigError("block " + std::to_string(i) + " collapses the spatial extent");
            }
            chain.emplace_back(h, w);
        }
        return chain;
    }

    std::pair<std::int64_t, std::int64_t> latent_hw() const { return spatial_chain().back(); }

    // Spatial compression: the latent plane must be strictly smaller than the
    // input plane (h < H and w < W). Channel growth is allowed; the standard
    // 64-channel 8x8 latent carries more elements than a 28x28 input.
    void validate() const {
        auto [h, w] = latent_hw();
        if (h >= in_h || w >= in_w) {
            throw ConfigError("latent plane " + std::to_string(h) + "x" + std::to_string(w) +
                              " does not spatially compress the " + std::to_string(in_h) + "x" +
                              std::to_string(in_w) + " input");
        }
    }

    std::string serialize() const {
        std::ostringstream os;
        os << in_channels << "," << in_h << "," << in_w << ";" << (use_batchnorm ? 1 : 0);
        for (const auto& b : blocks) {
            os << ";" << b.out_channels << ":" << b.kernel << ":" << b.stride << ":" << b.padding;
        }
        return os.str();
    }

    static EncoderConfig deserialize(const std::string& text) {
        EncoderConfig cfg;
        cfg.blocks.clear();
        std::istringstream is(text);
        std::string part;
        int idx = 0;
        while (std::getline(is, part, ';')) {
            if (idx == 0) {
                std::istringstream ps(part);
                char comma;
                ps >> cfg.in_channels >> comma >> cfg.in_h >> comma >> cfg.in_w;
            } else if (idx == 1) {
                cfg.use_batchnorm = part == "1";
            } else {
                ConvBlockSpec b;
                std::istringstream ps(part);
                char colon;
                ps >> b.out_channels >> colon >> b.kernel >> colon >> b.stride >> colon >> b.padding;
                cfg.blocks.push_back(b);
            }
            ++idx;
        }
        if (cfg.blocks.empty()) throw ParseError("encoder config '" + text + "' has no blocks");
        return cfg;
    }
};

struct ConvLayer {
    ad::Var weight;
    ad::Var bias;
    ad::Var gamma;  // undefined when batch norm is off or the layer has none
    ad::Var beta;
    ad::BatchNormState bn;
    bool has_bn = false;
};

class AutoencoderModel {
public:
    EncoderConfig config;
    std::vector<ConvLayer> encoder;
    std::vector<ConvLayer> decoder;
    std::vector<std::pair<std::int64_t, std::int64_t>> decoder_output_padding;
    bool frozen = false;

    std::vector<ad::Var> trainable_params() {
        std::vector<ad::Var> out;
        auto push_layer = [&out](ConvLayer& l) {
            out.push_back(l.weight);
            out.push_back(l.bias);
            if (l.has_bn) {
                out.push_back(l.gamma);
                out.push_back(l.beta);
            }
        };
        for (auto& l : encoder) push_layer(l);
        for (auto& l : decoder) push_layer(l);
        return out;
    }
};

namespace detail {

inline ad::Var uniform_var(std::vector<std::int64_t> shape, double bound, Rng& rng) {
    Tensor t(shape);
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return ad::Var(std::move(t));
}

inline ConvLayer make_conv_layer(std::int64_t c_in, std::int64_t c_out, std::int64_t k,
                                 bool transposed, bool with_bn, Rng& rng) {
    ConvLayer l;
    // fan-in-scaled uniform init
    const double bound = 1.0 / std::sqrt(static_cast<double>((transposed ? c_out : c_in) * k * k));
    l.weight = transposed ? uniform_var({c_in, c_out, k, k}, bound, rng)
                          : uniform_var({c_out, c_in, k, k}, bound, rng);
    l.bias = uniform_var({c_out}, bound, rng);
    l.has_bn = with_bn;
    if (with_bn) {
        l.gamma = ad::Var(Tensor({c_out}, 1.0));
        l.beta = ad::Var(Tensor({c_out}, 0.0));
        l.bn = ad::make_batch_norm_state(c_out);
    }
    return l;
}

}  // namespace detail

inline AutoencoderModel build_autoencoder(const EncoderConfig& config, std::uint64_t seed) {
    config.validate();
    const auto chain = config.spatial_chain();
    AutoencoderModel m;
    m.config = config;
    Rng rng(Rng::derive(seed, 0x6165ULL));

    std::int64_t c_in = config.in_channels;
    for (const auto& b : config.blocks) {
        m.encoder.push_back(
            detail::make_conv_layer(c_in, b.out_channels, b.kernel, false, config.use_batchnorm, rng));
        c_in = b.out_channels;
    }
    // Decoder mirrors the blocks in reverse; output padding recovers each
    // block's exact input extent (stride-2 convs are not shape-invertible by
    // the transpose formula alone).
    const std::size_t B = config.blocks.size();
    for (std::size_t j = 0; j < B; ++j) {
        const std::size_t i = B - 1 - j;
        const auto& b = config.blocks[i];
        const std::int64_t dec_in = config.blocks[i].out_channels;
        const std::int64_t dec_out = i > 0 ? config.blocks[i - 1].out_channels : config.in_channels;
        const bool is_last = j == B - 1;
        m.decoder.push_back(detail::make_conv_layer(dec_in, dec_out, b.kernel, true,
                                                    config.use_batchnorm && !is_last, rng));
        const auto [target_h, target_w] = chain[i];
        const auto [src_h, src_w] = chain[i + 1];
        const std::int64_t op_h = target_h - ((src_h - 1) * b.stride - 2 * b.padding + b.kernel);
        const std::int64_t op_w = target_w - ((src_w - 1) * b.stride - 2 * b.padding + b.kernel);
        if (op_h < 0 || op_h >= b.stride || op_w < 0 || op_w >= b.stride) {
            throw ConfigError("block " + std::to_string(i) + " is not mirror-invertible (" +
                              std::to_string(op_h) + "," + std::to_string(op_w) + ")");
        }
        m.decoder_output_padding.emplace_back(op_h, op_w);
    }
    return m;
}

namespace detail {

inline ad::Var encoder_forward(AutoencoderModel& m, const ad::Var& batch, bool train) {
    ad::Var h = batch;
    for (std::size_t i = 0; i < m.encoder.size(); ++i) {
        auto& l = m.encoder[i];
        const auto& b = m.config.blocks[i];
        h = ad::conv2d(h, l.weight, l.bias, b.stride, b.padding);
        if (l.has_bn) h = ad::batch_norm2d(h, l.gamma, l.beta, l.bn, train);
        if (i + 1 < m.encoder.size()) h = ad::relu(h);
    }
    return h;
}

inline ad::Var decoder_forward(AutoencoderModel& m, const ad::Var& latent, bool train) {
    ad::Var h = latent;
    const std::size_t B = m.decoder.size();
    for (std::size_t j = 0; j < B; ++j) {
        auto& l = m.decoder[j];
        const auto& b = m.config.blocks[B - 1 - j];
        h = ad::conv_transpose2d(h, l.weight, l.bias, b.stride, b.padding,
                                 m.decoder_output_padding[j].first,
                                 m.decoder_output_padding[j].second);
        if (j + 1 < B) {
            if (l.has_bn) h = ad::batch_norm2d(h, l.gamma, l.beta, l.bn, train);
            h = ad::relu(h);
        } else {
            h = ad::sigmoid(h);
        }
    }
    return h;
}

inline Tensor stack_batch(const std::vector<Tensor>& images, const std::vector<std::size_t>& idx,
                          std::size_t start, std::size_t stop) {
    const Tensor& first = images[idx[start]];
    Tensor batch({static_cast<std::int64_t>(stop - start), first.shape[0], first.shape[1],
                  first.shape[2]});
    const std::size_t stride = first.data.size();
    for (std::size_t i = start; i < stop; ++i) {
        const Tensor& img = images[idx[i]];
        std::copy(img.data.begin(), img.data.end(), batch.data.begin() + (i - start) * stride);
    }
    return batch;
}

}  // namespace detail

struct AeTrainReport {
    std::vector<double> epoch_mse;
    double initial_mse = 0.0;
    double final_mse = 0.0;
};

inline double autoencoder_dataset_mse(AutoencoderModel& m, const std::vector<Tensor>& images) {
    double acc = 0.0;
    for (const auto& img : images) {
        ad::Var x(img.reshaped({1, img.shape[0], img.shape[1], img.shape[2]}));
        ad::Var recon = detail::decoder_forward(m, detail::encoder_forward(m, x, false), false);
        ad::Var loss = ad::mse_loss(recon, x);
        acc += loss.value()[0];
    }
    return acc / static_cast<double>(images.size());
}

inline AeTrainReport train_autoencoder(AutoencoderModel& m, const std::vector<Tensor>& images,
                                       int epochs, double lr, int batch_size, std::uint64_t seed) {
    if (m.frozen) throw ConfigError("cannot train a frozen autoencoder");
    if (images.empty()) throw ConfigError("train_autoencoder: empty dataset");
    if (batch_size < 1) throw ConfigError("train_autoencoder: batch size must be positive");
    for (const auto& img : images) {
        if (img.rank() != 3 || img.shape[0] != m.config.in_channels ||
            img.shape[1] != m.config.in_h || img.shape[2] != m.config.in_w) {
            throw ShapeError("training image " + Tensor::shape_str(img.shape) +
                             " does not match configured input");
        }
    }
    AeTrainReport report;
    report.initial_mse = autoencoder_dataset_mse(m, images);

    AdamOptimizer opt(m.trainable_params(), lr);
    Rng rng(Rng::derive(seed, 0x61657472ULL));
    std::vector<std::size_t> order(images.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(batch_size));
            ad::Var batch(detail::stack_batch(images, order, start, stop));
            ad::Var recon = detail::decoder_forward(m, detail::encoder_forward(m, batch, true), true);
            ad::Var loss = ad::mse_loss(recon, batch);
            opt.zero_grad();
            ad::backward(loss);
            opt.step();
            epoch_loss += loss.value()[0] * static_cast<double>(stop - start);
        }
        report.epoch_mse.push_back(epoch_loss / static_cast<double>(images.size()));
    }
    report.final_mse = epochs > 0 ? report.epoch_mse.back() : report.initial_mse;
    return report;
}

inline Tensor reconstruct(AutoencoderModel& m, const Tensor& x) {
    ad::Var xv(x.reshaped({1, x.shape[0], x.shape[1], x.shape[2]}));
    ad::Var recon = detail::decoder_forward(m, detail::encoder_forward(m, xv, false), false);
    return recon.value().reshaped({x.shape[0], x.shape[1], x.shape[2]});
}

// ---------------------------------------------------------------------------
// Frozen encoder: the trained encoder with immutable weights and no decoder.
// ---------------------------------------------------------------------------

class FrozenEncoder {
public:
    FrozenEncoder() = default;

    FrozenEncoder(const EncoderConfig& cfg, const std::vector<ConvLayer>& enc_layers) {
        cfg.validate();
        config_ = cfg;
        for (const auto& l : enc_layers) {
            StoredLayer s;
            s.weight = l.weight.value();
            s.bias = l.bias.value();
            s.has_bn = l.has_bn;
            if (l.has_bn) {
                s.gamma = l.gamma.value();
                s.beta = l.beta.value();
                s.running_mean = l.bn.running_mean;
                s.running_var = l.bn.running_var;
            }
            layers_.push_back(std::move(s));
        }
    }

    const EncoderConfig& config() const { return config_; }

    // [C,H,W] -> latent [c,h,w], eval-mode batch norm.
    Tensor encode(const Tensor& x) const {
        if (x.rank() != 3 || x.shape[0] != config_.in_channels || x.shape[1] != config_.in_h ||
            x.shape[2] != config_.in_w) {
            throw ShapeError("encode input " + Tensor::shape_str(x.shape) +
                             " does not match configured " +
                             Tensor::shape_str({config_.in_channels, config_.in_h, config_.in_w}));
        }
        ad::Var h(x.reshaped({1, x.shape[0], x.shape[1], x.shape[2]}));
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& s = layers_[i];
            const auto& b = config_.blocks[i];
            ad::Var w(s.weight), bias(s.bias);
            h = ad::conv2d(h, w, bias, b.stride, b.padding);
            if (s.has_bn) {
                ad::Var gamma(s.gamma), beta(s.beta);
                ad::BatchNormState bn{s.running_mean, s.running_var};
                h = ad::batch_norm2d(h, gamma, beta, bn, false);
            }
            if (i + 1 < layers_.size()) h = ad::relu(h);
        }
        const Tensor& v = h.value();
        return v.reshaped({v.shape[1], v.shape[2], v.shape[3]});
    }

    // [C,H,W] -> [c, h*w] rows, each row unit L2 norm. Row length must be a
    // power of two so every channel fits one amplitude-encoded register.
    Tensor fpqe_encode(const Tensor& x) const {
        Tensor z = encode(x);
        const std::int64_t c = z.shape[0], len = z.shape[1] * z.shape[2];
        if (!q::is_power_of_two(static_cast<std::size_t>(len))) {
            throw ConfigError("latent h*w = " + std::to_string(len) +
                              " is not a power of two; adjust the encoder blocks");
        }
        Tensor rows = z.reshaped({c, len});
        for (std::int64_t k = 0; k < c; ++k) {
            double nrm = 0.0;
            for (std::int64_t i = 0; i < len; ++i) nrm += rows.at2(k, i) * rows.at2(k, i);
            nrm = std::sqrt(nrm);
            if (nrm < std::numeric_limits<double>::min()) {
                throw DegenerateInputError("latent channel " + std::to_string(k) +
                                           " has zero norm");
            }
            for (std::int64_t i = 0; i < len; ++i) rows.at2(k, i) /= nrm;
        }
        return rows;
    }

    void save(const std::string& dir, KvMap extra = {}) const {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        KvMap kv = std::move(extra);
        kv["kind"] = "frozen-encoder";
        kv["version"] = kVersion;
        kv["encoder.config"] = config_.serialize();
        kv["encoder.layers"] = std::to_string(layers_.size());
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const std::string stem = dir + "/enc" + std::to_string(i) + "_";
            write_fpqt(stem + "weight.fpqt", layers_[i].weight);
            write_fpqt(stem + "bias.fpqt", layers_[i].bias);
            kv["enc" + std::to_string(i) + ".batchnorm"] = layers_[i].has_bn ? "1" : "0";
            if (layers_[i].has_bn) {
                write_fpqt(stem + "gamma.fpqt", layers_[i].gamma);
                write_fpqt(stem + "beta.fpqt", layers_[i].beta);
                write_fpqt(stem + "running_mean.fpqt", layers_[i].running_mean);
                write_fpqt(stem + "running_var.fpqt", layers_[i].running_var);
            }
        }
        write_kv_file(dir + "/manifest.txt", kv);
    }

    static FrozenEncoder load(const std::string& dir) {
        KvMap kv = read_kv_file(dir + "/manifest.txt");
        if (kv_get(kv, "kind") != "frozen-encoder") {
            throw ParseError(dir + ": manifest kind is not frozen-encoder");
        }
        FrozenEncoder f;
        f.config_ = EncoderConfig::deserialize(kv_get(kv, "encoder.config"));
        const long long n = kv_get_int(kv, "encoder.layers");
        for (long long i = 0; i < n; ++i) {
            const std::string stem = dir + "/enc" + std::to_string(i) + "_";
            StoredLayer s;
            s.weight = read_fpqt(stem + "weight.fpqt");
            s.bias = read_fpqt(stem + "bias.fpqt");
            s.has_bn = kv_get_or(kv, "enc" + std::to_string(i) + ".batchnorm", "0") == "1";
            if (s.has_bn) {
                s.gamma = read_fpqt(stem + "gamma.fpqt");
                s.beta = read_fpqt(stem + "beta.fpqt");
                s.running_mean = read_fpqt(stem + "running_mean.fpqt");
                s.running_var = read_fpqt(stem + "running_var.fpqt");
            }
            f.layers_.push_back(std::move(s));
        }
        return f;
    }

private:
    struct StoredLayer {
        Tensor weight, bias, gamma, beta, running_mean, running_var;
        bool has_bn = false;
    };
    EncoderConfig config_;
    std::vector<StoredLayer> layers_;
};

inline FrozenEncoder freeze_encoder(AutoencoderModel& m) {
    m.frozen = true;
    return FrozenEncoder(m.config, m.encoder);
}

// ---------------------------------------------------------------------------
// Full-model checkpointing
// ---------------------------------------------------------------------------

namespace detail {

inline void save_layer(const std::string& stem, const ConvLayer& l, KvMap& kv,
                       const std::string& tag) {
    write_fpqt(stem + "weight.fpqt", l.weight.value());
    write_fpqt(stem + "bias.fpqt", l.bias.value());
    kv[tag + ".batchnorm"] = l.has_bn ? "1" : "0";
    if (l.has_bn) {
        write_fpqt(stem + "gamma.fpqt", l.gamma.value());
        write_fpqt(stem + "beta.fpqt", l.beta.value());
        write_fpqt(stem + "running_mean.fpqt", l.bn.running_mean);
        write_fpqt(stem + "running_var.fpqt", l.bn.running_var);
    }
}

inline ConvLayer load_layer(const std::string& stem, const KvMap& kv, const std::string& tag) {
    ConvLayer l;
    l.weight = ad::Var(read_fpqt(stem + "weight.fpqt"));
    l.bias = ad::Var(read_fpqt(stem + "bias.fpqt"));
    l.has_bn = kv_get_or(kv, tag + ".batchnorm", "0") == "1";
    if (l.has_bn) {
        l.gamma = ad::Var(read_fpqt(stem + "gamma.fpqt"));
        l.beta = ad::Var(read_fpqt(stem + "beta.fpqt"));
        l.bn.running_mean = read_fpqt(stem + "running_mean.fpqt");
        l.bn.running_var = read_fpqt(stem + "running_var.fpqt");
    }
    return l;
}

}  // namespace detail

inline void save_autoencoder(const std::string& dir, const AutoencoderModel& m, KvMap extra = {}) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    KvMap kv = std::move(extra);
    kv["kind"] = "autoencoder";
    kv["version"] = kVersion;
    kv["encoder.config"] = m.config.serialize();
    kv["frozen"] = m.frozen ? "1" : "0";
    for (std::size_t i = 0; i < m.encoder.size(); ++i) {
        detail::save_layer(dir + "/enc" + std::to_string(i) + "_", m.encoder[i], kv,
                           "enc" + std::to_string(i));
    }
    for (std::size_t i = 0; i < m.decoder.size(); ++i) {
        detail::save_layer(dir + "/dec" + std::to_string(i) + "_", m.decoder[i], kv,
                           "dec" + std::to_string(i));
    }
    write_kv_file(dir + "/manifest.txt", kv);
}

inline AutoencoderModel load_autoencoder(const std::string& dir) {
    KvMap kv = read_kv_file(dir + "/manifest.txt");
    if (kv_get(kv, "kind") != "autoencoder") {
        throw ParseError(dir + ": manifest kind is not autoencoder");
    }
    const EncoderConfig cfg = EncoderConfig::deserialize(kv_get(kv, "encoder.config"));
    AutoencoderModel m = build_autoencoder(cfg, 0);
    m.frozen = kv_get_or(kv, "frozen", "0") == "1";
    for (std::size_t i = 0; i < m.encoder.size(); ++i) {
        m.encoder[i] = detail::load_layer(dir + "/enc" + std::to_string(i) + "_", kv,
                                          "enc" + std::to_string(i));
    }
    for (std::size_t i = 0; i < m.decoder.size(); ++i) {
        m.decoder[i] = detail::load_layer(dir + "/dec" + std::to_string(i) + "_", kv,
                                          "dec" + std::to_string(i));
    }
    return m;
}

}  // namespace fpqe

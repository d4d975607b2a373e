#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <string>
#include <vector>

#include "fpqe/common.hpp"
#include "fpqe/quantum.hpp"
#include "fpqe/rng.hpp"
#include "fpqe/tensor.hpp"

// Layered quantum classifier. Each layer holds one parameterized circuit per
// channel; channel expectations are measured with Pauli-Z, regrouped,
// zero-padded to a power of two, renormalized and amplitude-encoded into the
// next layer. The final layer has exactly K channels whose expectations are
// the logits.

namespace fpqe::q {

struct QnnChannel {
    PqcParams params;
    std::vector<int> sources;  // input vector indices (layer 0) or measurement indices
    int raw_len = 0;           // concatenated length before padding
    int padded_len = 0;        // power of two, >= 2
};

struct QnnLayer {
    std::vector<QnnChannel> channels;
};

struct QnnModel {
    int input_channels = 0;
    int row_len = 0;  // length of each input row, a power of two
    std::vector<int> channel_plan;  // channels per layer; back() == num_classes
    int depth = 2;
    Readout readout = Readout::QubitZero;
    std::uint64_t seed = 0;
    std::vector<QnnLayer> layers;

    int num_classes() const { return channel_plan.empty() ? 0 : channel_plan.back(); }

    std::size_t num_angles() const {
        std::size_t n = 0;
        for (const auto& l : layers)
            for (const auto& c : l.channels) n += c.params.num_angles();
        return n;
    }
};

namespace detail {

inline int next_pow2_at_least(int n) {
    int p = 2;
    while (p < n) p <<= 1;
    return p;
}

// Distributes `in_count` incoming vectors (or scalars) over `out_count`
// channels: identity when equal, contiguous near-equal groups when reducing,
// and full replication when expanding.
inline std::vector<std::vector<int>> group_sources(int in_count, int out_count,
                                                   bool replicate_round_robin) {
    std::vector<std::vector<int>> sources(static_cast<std::size_t>(out_count));
    if (out_count <= in_count) {
        const int base = in_count / out_count;
        const int extra = in_count % out_count;
        int next = 0;
        for (int j = 0; j < out_count; ++j) {
            const int len = base + (j < extra ? 1 : 0);
            for (int t = 0; t < len; ++t) sources[static_cast<std::size_t>(j)].push_back(next++);
        }
    } else if (replicate_round_robin) {
        for (int j = 0; j < out_count; ++j) {
            sources[static_cast<std::size_t>(j)].push_back(j % in_count);
        }
    } else {
        for (int j = 0; j < out_count; ++j) {
            for (int i = 0; i < in_count; ++i) sources[static_cast<std::size_t>(j)].push_back(i);
        }
    }
    return sources;
}

}  // namespace detail

inline QnnModel build_qnn(int input_channels, int row_len, std::vector<int> channel_plan,
                          int depth, Readout readout, std::uint64_t seed) {
    if (input_channels < 1 || row_len < 2 || !is_power_of_two(static_cast<std::size_t>(row_len))) {
        throw ConfigError("qnn input must have >=1 channels with power-of-two row length, got " +
                          std::to_string(input_channels) + " x " + std::to_string(row_len));
    }
    if (channel_plan.empty()) throw ConfigError("qnn channel plan is empty");
    for (int c : channel_plan)
        if (c < 1) throw ConfigError("qnn channel plan entries must be positive");
    if (depth < 0) throw ConfigError("qnn depth must be non-negative");

    QnnModel m;
    m.input_channels = input_channels;
    m.row_len = row_len;
    m.channel_plan = std::move(channel_plan);
    m.depth = depth;
    m.readout = readout;
    m.seed = seed;
    Rng rng(Rng::derive(seed, 0x716e6eULL));

    int in_count = input_channels;
    for (std::size_t l = 0; l < m.channel_plan.size(); ++l) {
        const int out_count = m.channel_plan[l];
        QnnLayer layer;
        auto sources = detail::group_sources(in_count, out_count, /*replicate_round_robin=*/l == 0);
        for (int k = 0; k < out_count; ++k) {
            QnnChannel ch;
            ch.sources = std::move(sources[static_cast<std::size_t>(k)]);
            const int unit = (l == 0) ? row_len : 1;
            ch.raw_len = static_cast<int>(ch.sources.size()) * unit;
            ch.padded_len = detail::next_pow2_at_least(ch.raw_len);
            ch.params = PqcParams::zeros(log2_exact(static_cast<std::size_t>(ch.padded_len)), depth);
            for (auto& a : ch.params.angles) a = rng.uniform(-0.25, 0.25);
            layer.channels.push_back(std::move(ch));
        }
        m.layers.push_back(std::move(layer));
        in_count = out_count;
    }
    return m;
}

namespace detail {

struct ChannelTrace {
    std::vector<double> chi;  // normalized padded input vector (real)
    double norm = 0.0;
    double expectation = 0.0;
};

struct ForwardTrace {
    std::vector<std::vector<ChannelTrace>> layers;
};

// Concatenate + pad + normalize one channel's input; errors identify the
// channel when the group has zero norm.
inline ChannelTrace prepare_channel(const QnnChannel& ch, std::size_t layer_idx, int channel_idx,
                                    const Tensor* rows, const std::vector<double>* phi) {
    ChannelTrace tr;
    tr.chi.assign(static_cast<std::size_t>(ch.padded_len), 0.0);
    std::size_t pos = 0;
    if (layer_idx == 0) {
        const std::int64_t r = rows->shape[1];
        for (int src : ch.sources) {
            for (std::int64_t i = 0; i < r; ++i) tr.chi[pos++] = rows->at2(src, i);
        }
    } else {
        for (int src : ch.sources) tr.chi[pos++] = (*phi)[static_cast<std::size_t>(src)];
    }
    double nrm = 0.0;
    for (double v : tr.chi) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (nrm < std::numeric_limits<double>::min()) {
        throw DegenerateInputError("qnn layer " + std::to_string(layer_idx) + " channel " +
                                   std::to_string(channel_idx) + " has zero norm");
    }
    for (double& v : tr.chi) v /= nrm;
    tr.norm = nrm;
    return tr;
}

inline double run_channel(const std::vector<double>& chi, const PqcParams& params,
                          Readout readout) {
    StateVector s = amplitude_encode(std::span<const double>(chi.data(), chi.size()));
    apply_pqc(s, params);
    return expect_readout(s, readout);
}

inline ForwardTrace forward_trace(const QnnModel& m, const Tensor& psi) {
    if (psi.rank() != 2 || psi.shape[0] != m.input_channels || psi.shape[1] != m.row_len) {
        throw ShapeError("qnn input must be [" + std::to_string(m.input_channels) + "," +
                         std::to_string(m.row_len) + "], got " + Tensor::shape_str(psi.shape));
    }
    ForwardTrace trace;
    std::vector<double> phi;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        std::vector<ChannelTrace> layer_trace;
        std::vector<double> next(m.layers[l].channels.size());
        for (std::size_t k = 0; k < m.layers[l].channels.size(); ++k) {
            const QnnChannel& ch = m.layers[l].channels[k];
            ChannelTrace tr = prepare_channel(ch, l, static_cast<int>(k), &psi, &phi);
            tr.expectation = run_channel(tr.chi, ch.params, m.readout);
            next[k] = tr.expectation;
            layer_trace.push_back(std::move(tr));
        }
        trace.layers.push_back(std::move(layer_trace));
        phi = std::move(next);
    }
    return trace;
}

}  // namespace detail

inline Tensor qnn_forward(const QnnModel& m, const Tensor& psi) {
    auto trace = detail::forward_trace(m, psi);
    const auto& last = trace.layers.back();
    Tensor logits({static_cast<std::int64_t>(last.size())});
    for (std::size_t k = 0; k < last.size(); ++k) logits[static_cast<std::int64_t>(k)] =
        last[k].expectation;
    return logits;
}

// Argmax of the logits; ties resolve toward the lower class index.
inline int predict(const QnnModel& m, const Tensor& psi) {
    Tensor logits = qnn_forward(m, psi);
    int best = 0;
    for (std::int64_t k = 1; k < logits.size(); ++k) {
        if (logits[k] > logits[best]) best = static_cast<int>(k);
    }
    return best;
}

// Loss over logits: returns the value and fills dlogits.
using LogitLoss = std::function<double(const Tensor& logits, Tensor& dlogits)>;

// Gradient of loss(logits(psi)) with respect to every rotation angle, in the
// model's flat angle order (layer, channel, angle). Angle derivatives of each
// channel expectation use the exact parameter-shift rule with that channel's
// input state held fixed; derivatives with respect to the re-encoded inputs of
// deeper layers flow through the classical chain rule (normalization, padding,
// grouping), with the state sensitivity 2*Re[(U' O U) chi] evaluated on the
// simulator.
inline std::vector<double> parameter_shift_grad(const QnnModel& m, const Tensor& psi,
                                                const LogitLoss& loss, double* loss_out = nullptr,
                                                Tensor* logits_out = nullptr) {
    auto trace = detail::forward_trace(m, psi);
    const auto& last = trace.layers.back();
    Tensor logits({static_cast<std::int64_t>(last.size())});
    for (std::size_t k = 0; k < last.size(); ++k) logits[static_cast<std::int64_t>(k)] =
        last[k].expectation;
    Tensor dlogits(logits.shape);
    const double loss_value = loss(logits, dlogits);
    if (loss_out) *loss_out = loss_value;
    if (logits_out) *logits_out = logits;

    std::vector<double> grad(m.num_angles(), 0.0);
    // Flat offsets of each channel's angle block.
    std::vector<std::vector<std::size_t>> offsets(m.layers.size());
    std::size_t off = 0;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        for (const auto& ch : m.layers[l].channels) {
            offsets[l].push_back(off);
            off += ch.params.num_angles();
        }
    }

    std::vector<double> dphi(dlogits.data);
    constexpr double kShift = 1.5707963267948966;  // pi/2
    for (std::size_t l = m.layers.size(); l-- > 0;) {
        const QnnLayer& layer = m.layers[l];
        std::vector<double> dphi_prev;
        if (l > 0) dphi_prev.assign(trace.layers[l - 1].size(), 0.0);
        for (std::size_t k = 0; k < layer.channels.size(); ++k) {
            const double upstream = dphi[k];
            const QnnChannel& ch = layer.channels[k];
            const detail::ChannelTrace& tr = trace.layers[l][k];
            if (upstream != 0.0) {
                PqcParams shifted = ch.params;
                for (std::size_t a = 0; a < shifted.num_angles(); ++a) {
                    const double original = shifted.angles[a];
                    shifted.angles[a] = original + kShift;
                    const double plus = detail::run_channel(tr.chi, shifted, m.readout);
                    shifted.angles[a] = original - kShift;
                    const double minus = detail::run_channel(tr.chi, shifted, m.readout);
                    shifted.angles[a] = original;
                    grad[offsets[l][k] + a] += upstream * 0.5 * (plus - minus);
                }
            }
            if (l > 0) {
                // d<O>/dchi = 2 Re[(U' O U) chi] for real chi.
                StateVector s =
                    amplitude_encode(std::span<const double>(tr.chi.data(), tr.chi.size()));
                apply_pqc(s, ch.params);
                apply_readout_observable(s, m.readout);
                apply_pqc_inverse(s, ch.params);
                std::vector<double> dchi(tr.chi.size());
                for (std::size_t i = 0; i < dchi.size(); ++i) {
                    dchi[i] = 2.0 * s.amps[i].real() * upstream;
                }
                // Through normalization chi = v / |v|, then drop the zero padding.
                double dot = 0.0;
                for (std::size_t i = 0; i < dchi.size(); ++i) dot += dchi[i] * tr.chi[i];
                for (std::size_t t = 0; t < ch.sources.size(); ++t) {
                    const double draw = (dchi[t] - tr.chi[t] * dot) / tr.norm;
                    dphi_prev[static_cast<std::size_t>(ch.sources[t])] += draw;
                }
            }
        }
        dphi = std::move(dphi_prev);
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct QnnSample {
    Tensor rows;  // [c, row_len]
    int label = 0;
};

struct QnnTraceRow {
    int epoch = 0;
    double loss = 0.0;
    double train_accuracy = 0.0;
};

inline double softmax_cross_entropy(const Tensor& logits, int label, Tensor& dlogits) {
    const std::int64_t K = logits.size();
    double mx = logits[0];
    for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, logits[k]);
    double denom = 0.0;
    for (std::int64_t k = 0; k < K; ++k) denom += std::exp(logits[k] - mx);
    for (std::int64_t k = 0; k < K; ++k) {
        const double sm = std::exp(logits[k] - mx) / denom;
        dlogits[k] = sm - (k == label ? 1.0 : 0.0);
    }
    return std::log(denom) - (logits[label] - mx);
}

namespace detail {

inline std::vector<double*> angle_pointers(QnnModel& m) {
    std::vector<double*> ptrs;
    for (auto& l : m.layers)
        for (auto& ch : l.channels)
            for (auto& a : ch.params.angles) ptrs.push_back(&a);
    return ptrs;
}

struct SampleResult {
    std::vector<double> grad;
    double loss = 0.0;
    bool correct = false;
};

inline SampleResult eval_sample(const QnnModel& m, const QnnSample& s) {
    SampleResult r;
    double loss = 0.0;
    Tensor logits;
    r.grad = parameter_shift_grad(
        m, s.rows,
        [&s](const Tensor& lg, Tensor& dlg) { return softmax_cross_entropy(lg, s.label, dlg); },
        &loss, &logits);
    r.loss = loss;
    int best = 0;
    for (std::int64_t k = 1; k < logits.size(); ++k)
        if (logits[k] > logits[best]) best = static_cast<int>(k);
    r.correct = best == s.label;
    return r;
}

}  // namespace detail

// Adam over all rotation angles with exact parameter-shift gradients.
// Deterministic for a fixed seed; with threads > 1, per-sample gradients are
// still reduced in index order so results stay bitwise reproducible.
inline std::vector<QnnTraceRow> qnn_train(QnnModel& m, const std::vector<QnnSample>& dataset,
                                          int epochs, double lr, int batch_size,
                                          std::uint64_t seed, int threads = 1) {
    if (dataset.empty()) throw ConfigError("qnn_train: empty dataset");
    if (batch_size < 1) throw ConfigError("qnn_train: batch size must be positive");
    const int K = m.num_classes();
    for (const auto& s : dataset) {
        if (s.label < 0 || s.label >= K) {
            throw std::out_of_range("qnn_train label " + std::to_string(s.label) +
                                    " outside [0," + std::to_string(K) + ")");
        }
    }
    auto ptrs = detail::angle_pointers(m);
    const std::size_t P = ptrs.size();
    std::vector<double> moment1(P, 0.0), moment2(P, 0.0);
    std::int64_t step = 0;
    Rng rng(Rng::derive(seed, 0x747261696eULL));
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<QnnTraceRow> trace;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
            std::vector<detail::SampleResult> results(stop - start);
            if (threads > 1) {
                std::vector<std::future<detail::SampleResult>> futs;
                futs.reserve(stop - start);
                for (std::size_t i = start; i < stop; ++i) {
                    futs.push_back(std::async(std::launch::async, [&m, &dataset, &order, i] {
                        return detail::eval_sample(m, dataset[order[i]]);
                    }));
                }
                for (std::size_t i = 0; i < futs.size(); ++i) results[i] = futs[i].get();
            } else {
                for (std::size_t i = start; i < stop; ++i) {
                    results[i - start] = detail::eval_sample(m, dataset[order[i]]);
                }
            }
            std::vector<double> grad(P, 0.0);
            for (const auto& r : results) {
                for (std::size_t j = 0; j < P; ++j) grad[j] += r.grad[j];
                epoch_loss += r.loss;
                correct += r.correct ? 1 : 0;
            }
            const double inv_n = 1.0 / static_cast<double>(stop - start);
            for (std::size_t j = 0; j < P; ++j) grad[j] *= inv_n;

            step += 1;
            const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(step));
            for (std::size_t j = 0; j < P; ++j) {
                moment1[j] = 0.9 * moment1[j] + 0.1 * grad[j];
                moment2[j] = 0.999 * moment2[j] + 0.001 * grad[j] * grad[j];
                *ptrs[j] -= lr * (moment1[j] / bc1) / (std::sqrt(moment2[j] / bc2) + 1e-8);
            }
        }
        trace.push_back({epoch + 1, epoch_loss / static_cast<double>(dataset.size()),
                         static_cast<double>(correct) / static_cast<double>(dataset.size())});
    }
    return trace;
}

inline double qnn_accuracy(const QnnModel& m, const std::vector<QnnSample>& dataset,
                           int threads = 1) {
    if (dataset.empty()) throw ConfigError("qnn_accuracy: empty dataset");
    std::size_t correct = 0;
    if (threads > 1) {
        std::vector<std::future<int>> futs;
        futs.reserve(dataset.size());
        for (const auto& s : dataset) {
            futs.push_back(std::async(std::launch::async,
                                      [&m, &s] { return predict(m, s.rows) == s.label ? 1 : 0; }));
        }
        for (auto& f : futs) correct += static_cast<std::size_t>(f.get());
    } else {
        for (const auto& s : dataset) correct += predict(m, s.rows) == s.label ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

}  // namespace fpqe::q

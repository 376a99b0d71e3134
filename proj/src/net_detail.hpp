#pragma once

// Shared forward/backward kernels for network.cpp and trainer.cpp.

#include "loadnet/network.hpp"

#include <cmath>
#include <vector>

namespace loadnet::net::detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LayerCache {
    std::vector<double> features;         // feature-layer activations
    std::vector<std::vector<double>> net; // net[j-1] for layer j = 1..L
    std::vector<std::vector<double>> act; // act[j-1]; act.back() is the output
};

// Feature layer for static topologies (identity or RBF basis). TLRN features
// are the advanced gamma taps and are produced by the caller.
inline std::vector<double> static_features(const NetworkState& s, std::span<const double> input) {
    if (s.spec.topology == Topology::RBF) {
        const auto& cb = s.layout.find(ParamBlock::Kind::Center);
        const auto& wb = s.layout.find(ParamBlock::Kind::Width);
        return rbf_activations(s.block(cb), s.block(wb), input);
    }
    return {input.begin(), input.end()};
}

// Weighted stack pass over precomputed features. prev_hidden supplies the
// recurrent terms for RN (null means zeros).
inline void forward_layers(const NetworkState& s, std::vector<double> features,
                           const std::vector<std::vector<double>>* prev_hidden, LayerCache& cache) {
    const auto sizes = s.spec.layer_sizes();
    const int n_layers = static_cast<int>(sizes.size()); // includes feature layer
    const int out_layer = n_layers - 1;

    cache.features = std::move(features);
    cache.net.assign(static_cast<std::size_t>(out_layer), {});
    cache.act.assign(static_cast<std::size_t>(out_layer), {});

    for (int j = 1; j <= out_layer; ++j) {
        std::vector<double> net(static_cast<std::size_t>(sizes[j]), 0.0);
        for (const auto& b : s.layout.blocks) {
            if (b.kind == ParamBlock::Kind::Bias && b.to == j) {
                auto bias = s.block(b);
                for (int r = 0; r < b.rows; ++r) net[static_cast<std::size_t>(r)] += bias[static_cast<std::size_t>(r)];
            } else if (b.kind == ParamBlock::Kind::Weight && b.to == j) {
                const double* w = s.params.data() + b.offset;
                const std::vector<double>& src =
                    b.from == 0 ? cache.features : cache.act[static_cast<std::size_t>(b.from - 1)];
                for (int r = 0; r < b.rows; ++r) {
                    double acc = 0.0;
                    const double* wrow = w + static_cast<std::size_t>(r) * b.cols;
                    for (int c = 0; c < b.cols; ++c) acc += wrow[c] * src[static_cast<std::size_t>(c)];
                    net[static_cast<std::size_t>(r)] += acc;
                }
            } else if (b.kind == ParamBlock::Kind::Recurrent && b.to == j && prev_hidden) {
                const auto& prev = (*prev_hidden)[static_cast<std::size_t>(j - 1)];
                const double* w = s.params.data() + b.offset;
                if (b.cols == 1) { // self-recurrence, diagonal
                    for (int r = 0; r < b.rows; ++r)
                        net[static_cast<std::size_t>(r)] += w[r] * prev[static_cast<std::size_t>(r)];
                } else {
                    for (int r = 0; r < b.rows; ++r) {
                        double acc = 0.0;
                        const double* wrow = w + static_cast<std::size_t>(r) * b.cols;
                        for (int c = 0; c < b.cols; ++c) acc += wrow[c] * prev[static_cast<std::size_t>(c)];
                        net[static_cast<std::size_t>(r)] += acc;
                    }
                }
            }
        }
        std::vector<double> act(net.size());
        const bool linear = j == out_layer && s.spec.output_transfer == Transfer::Linear;
        for (std::size_t r = 0; r < net.size(); ++r) act[r] = linear ? net[r] : sigmoid(net[r]);
        cache.net[static_cast<std::size_t>(j - 1)] = std::move(net);
        cache.act[static_cast<std::size_t>(j - 1)] = std::move(act);
    }
}

// Reverse pass for one step. Accumulates dE/dparam into grad (layout-sized)
// using E = 1/2 |y - d|^2 at this step (target may be null for steps that
// carry no cost). future_hidden_adj injects dE/d a_l(t) arriving from the
// next time step; prev_hidden_adj_out collects dE/d a_l(t-1) through the
// recurrent weights; feature_adj_out collects dE/d features for the gamma
// backpropagation.
inline void backward_layers(const NetworkState& s, const LayerCache& cache, const double* target,
                            const std::vector<std::vector<double>>* prev_hidden,
                            const std::vector<std::vector<double>>* future_hidden_adj,
                            std::vector<double>& grad, std::vector<double>* feature_adj_out,
                            std::vector<std::vector<double>>* prev_hidden_adj_out) {
    const auto sizes = s.spec.layer_sizes();
    const int out_layer = static_cast<int>(sizes.size()) - 1;

    std::vector<std::vector<double>> delta(static_cast<std::size_t>(out_layer));
    for (int j = 1; j <= out_layer; ++j)
        delta[static_cast<std::size_t>(j - 1)].assign(static_cast<std::size_t>(sizes[j]), 0.0);

    if (prev_hidden_adj_out) {
        prev_hidden_adj_out->assign(static_cast<std::size_t>(out_layer - 1), {});
        for (int j = 1; j < out_layer; ++j)
            (*prev_hidden_adj_out)[static_cast<std::size_t>(j - 1)].assign(static_cast<std::size_t>(sizes[j]), 0.0);
    }

    for (int j = out_layer; j >= 1; --j) {
        auto& dj = delta[static_cast<std::size_t>(j - 1)];
        const auto& act = cache.act[static_cast<std::size_t>(j - 1)];
        // dE/d act for this layer
        std::vector<double> act_adj(act.size(), 0.0);
        if (j == out_layer && target) {
            for (std::size_t r = 0; r < act.size(); ++r) act_adj[r] = act[r] - target[r];
        }
        for (const auto& b : s.layout.blocks) {
            if (b.kind == ParamBlock::Kind::Weight && b.from == j) {
                const double* w = s.params.data() + b.offset;
                const auto& dk = delta[static_cast<std::size_t>(b.to - 1)];
                for (int r = 0; r < b.rows; ++r) {
                    const double* wrow = w + static_cast<std::size_t>(r) * b.cols;
                    for (int c = 0; c < b.cols; ++c) act_adj[static_cast<std::size_t>(c)] += wrow[c] * dk[static_cast<std::size_t>(r)];
                }
            }
        }
        if (future_hidden_adj && j < out_layer) {
            const auto& fa = (*future_hidden_adj)[static_cast<std::size_t>(j - 1)];
            for (std::size_t r = 0; r < act.size(); ++r) act_adj[r] += fa[r];
        }
        const bool linear = j == out_layer && s.spec.output_transfer == Transfer::Linear;
        for (std::size_t r = 0; r < act.size(); ++r)
            dj[r] = linear ? act_adj[r] : act_adj[r] * act[r] * (1.0 - act[r]);
    }

    for (const auto& b : s.layout.blocks) {
        // Gamma gradients live in the BPTT driver; centers/widths stay frozen.
        if (b.kind == ParamBlock::Kind::Gamma || b.kind == ParamBlock::Kind::Center ||
            b.kind == ParamBlock::Kind::Width)
            continue;
        if (b.kind == ParamBlock::Kind::Bias) {
            const auto& dj = delta[static_cast<std::size_t>(b.to - 1)];
            double* g = grad.data() + b.offset;
            for (int r = 0; r < b.rows; ++r) g[r] += dj[static_cast<std::size_t>(r)];
        } else if (b.kind == ParamBlock::Kind::Weight) {
            const auto& dj = delta[static_cast<std::size_t>(b.to - 1)];
            const std::vector<double>& src =
                b.from == 0 ? cache.features : cache.act[static_cast<std::size_t>(b.from - 1)];
            double* g = grad.data() + b.offset;
            for (int r = 0; r < b.rows; ++r) {
                double* grow = g + static_cast<std::size_t>(r) * b.cols;
                const double d = dj[static_cast<std::size_t>(r)];
                for (int c = 0; c < b.cols; ++c) grow[c] += d * src[static_cast<std::size_t>(c)];
            }
        } else if (b.kind == ParamBlock::Kind::Recurrent) {
            const auto& dj = delta[static_cast<std::size_t>(b.to - 1)];
            const std::vector<double> zero(static_cast<std::size_t>(b.cols == 1 ? b.rows : b.cols), 0.0);
            const std::vector<double>& prev =
                prev_hidden ? (*prev_hidden)[static_cast<std::size_t>(b.to - 1)] : zero;
            double* g = grad.data() + b.offset;
            const double* w = s.params.data() + b.offset;
            if (b.cols == 1) {
                for (int r = 0; r < b.rows; ++r) {
                    g[r] += dj[static_cast<std::size_t>(r)] * prev[static_cast<std::size_t>(r)];
                    if (prev_hidden_adj_out)
                        (*prev_hidden_adj_out)[static_cast<std::size_t>(b.to - 1)][static_cast<std::size_t>(r)] +=
                            w[r] * dj[static_cast<std::size_t>(r)];
                }
            } else {
                for (int r = 0; r < b.rows; ++r) {
                    double* grow = g + static_cast<std::size_t>(r) * b.cols;
                    const double d = dj[static_cast<std::size_t>(r)];
                    for (int c = 0; c < b.cols; ++c) {
                        grow[c] += d * prev[static_cast<std::size_t>(c)];
                        if (prev_hidden_adj_out)
                            (*prev_hidden_adj_out)[static_cast<std::size_t>(b.to - 1)][static_cast<std::size_t>(c)] +=
                                w[static_cast<std::size_t>(r) * b.cols + c] * d;
                    }
                }
            }
        }
    }

    if (feature_adj_out) {
        feature_adj_out->assign(cache.features.size(), 0.0);
        for (const auto& b : s.layout.blocks) {
            if (b.kind != ParamBlock::Kind::Weight || b.from != 0) continue;
            const double* w = s.params.data() + b.offset;
            const auto& dk = delta[static_cast<std::size_t>(b.to - 1)];
            for (int r = 0; r < b.rows; ++r) {
                const double* wrow = w + static_cast<std::size_t>(r) * b.cols;
                for (int c = 0; c < b.cols; ++c)
                    (*feature_adj_out)[static_cast<std::size_t>(c)] += wrow[c] * dk[static_cast<std::size_t>(r)];
            }
        }
    }
}

} // namespace loadnet::net::detail

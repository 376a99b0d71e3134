#include "loadnet/trainer.hpp"

#include "loadnet/csv.hpp"
#include "loadnet/metrics.hpp"
#include "loadnet/rng.hpp"
#include "net_detail.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace loadnet::train {

using net::NetworkState;
using net::ParamBlock;
using net::RecurrentContext;
using net::Topology;

std::string_view to_string(Mode m) { return m == Mode::Online ? "online" : "batch"; }

std::string_view to_string(StopReason r) {
    switch (r) {
    case StopReason::EpochsExhausted: return "EPOCHS_EXHAUSTED";
    case StopReason::EarlyStop: return "EARLY_STOP";
    case StopReason::Diverged: return "DIVERGED";
    }
    throw DomainError("invalid stop reason");
}

std::string_view to_string(CurveAction a) {
    switch (a) {
    case CurveAction::IncreaseStep: return "INCREASE_STEP";
    case CurveAction::DecreaseStep: return "DECREASE_STEP";
    case CurveAction::Reset: return "RESET";
    case CurveAction::None: return "NONE";
    }
    throw DomainError("invalid curve action");
}

void TrainConfig::validate() const {
    auto check_step = [](double s) {
        if (!(s > 0.0 && s <= 1.0)) throw DomainError("step size must lie in (0, 1]");
    };
    check_step(step_hidden);
    check_step(step_output);
    auto check_momentum = [](double g) {
        if (!(g >= 0.0 && g < 1.0)) throw DomainError("momentum must lie in [0, 1)");
    };
    check_momentum(momentum_hidden);
    check_momentum(momentum_output);
    if (epochs < 1) throw DomainError("epochs must be >= 1");
    if (restarts < 1) throw DomainError("restarts must be >= 1");
    if (trajectory_length < 1) throw DomainError("trajectory length must be >= 1");
    if (curve_window < 2) throw DomainError("curve window must be >= 2");
}

double momentum_update(double prev_delta, double grad, double mu, double gamma) {
    return gamma * prev_delta - mu * grad;
}

namespace {

void check_sample_shapes(const NetworkState& state, const SampleRef& s) {
    if (static_cast<int>(s.input.size()) != state.spec.n_inputs ||
        static_cast<int>(s.target.size()) != state.spec.n_outputs)
        throw ShapeError("sample does not match network spec");
}

double half_sq_error(std::span<const double> y, std::span<const double> d) {
    double e = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double diff = y[i] - d[i];
        e += diff * diff;
    }
    return 0.5 * e;
}

} // namespace

std::vector<double> gradients(const NetworkState& state, std::span<const SampleRef> batch) {
    if (state.spec.temporal())
        throw DomainError("gradients() handles static topologies; use bptt_gradients");
    if (batch.empty()) throw DomainError("gradient batch is empty");

    std::vector<double> grad(state.layout.total, 0.0);
    net::detail::LayerCache cache;
    for (const auto& s : batch) {
        check_sample_shapes(state, s);
        net::detail::forward_layers(state, net::detail::static_features(state, s.input), nullptr, cache);
        for (double v : cache.act.back())
            if (!std::isfinite(v)) throw DomainError("non-finite activation during gradient pass");
        net::detail::backward_layers(state, cache, s.target.data(), nullptr, nullptr, grad, nullptr, nullptr);
    }
    return grad;
}

double batch_cost(const NetworkState& state, std::span<const SampleRef> batch) {
    if (state.spec.temporal()) throw DomainError("batch_cost handles static topologies");
    double cost = 0.0;
    net::detail::LayerCache cache;
    for (const auto& s : batch) {
        check_sample_shapes(state, s);
        net::detail::forward_layers(state, net::detail::static_features(state, s.input), nullptr, cache);
        cost += half_sq_error(cache.act.back(), s.target);
    }
    return cost;
}

namespace {

// Forward over a window storing per-step caches. For TLRN tap_states[t] is
// the tap vector entering step t (so tap_states[w+1] entries exist); for RN
// hidden_states[t] is the hidden activation entering step t.
struct WindowTrace {
    std::vector<net::detail::LayerCache> caches;
    std::vector<std::vector<double>> tap_states;
    std::vector<std::vector<std::vector<double>>> hidden_states;
};

double forward_window(const NetworkState& state, std::span<const SampleRef> window,
                      const RecurrentContext& ctx0, WindowTrace* trace, RecurrentContext* ctx_out) {
    const auto& spec = state.spec;
    double cost = 0.0;

    if (spec.topology == Topology::TLRN) {
        const auto& gb = state.layout.find(ParamBlock::Kind::Gamma);
        auto g = state.block(gb);
        const int tpc = spec.memory_depth + 1;
        std::vector<double> taps = ctx0.taps;
        if (taps.size() != static_cast<std::size_t>(spec.n_inputs) * tpc)
            throw ShapeError("context taps do not match spec");
        if (trace) trace->tap_states.push_back(taps);
        net::detail::LayerCache cache;
        for (const auto& s : window) {
            check_sample_shapes(state, s);
            for (int c = 0; c < spec.n_inputs; ++c)
                net::gamma_step(std::span<double>(taps.data() + static_cast<std::size_t>(c) * tpc,
                                                  static_cast<std::size_t>(tpc)),
                                s.input[static_cast<std::size_t>(c)], g[static_cast<std::size_t>(c)]);
            net::detail::forward_layers(state, taps, nullptr, cache);
            if (s.in_cost) cost += half_sq_error(cache.act.back(), s.target);
            if (trace) {
                trace->tap_states.push_back(taps);
                trace->caches.push_back(cache);
            }
        }
        if (ctx_out) {
            ctx_out->taps = std::move(taps);
            ctx_out->hidden_state.clear();
        }
    } else if (spec.topology == Topology::RN) {
        std::vector<std::vector<double>> hidden = ctx0.hidden_state;
        if (hidden.size() != spec.hidden.size()) throw ShapeError("context hidden state does not match spec");
        if (trace) trace->hidden_states.push_back(hidden);
        net::detail::LayerCache cache;
        for (const auto& s : window) {
            check_sample_shapes(state, s);
            net::detail::forward_layers(state, net::detail::static_features(state, s.input), &hidden, cache);
            for (std::size_t l = 0; l < spec.hidden.size(); ++l) hidden[l] = cache.act[l];
            if (s.in_cost) cost += half_sq_error(cache.act.back(), s.target);
            if (trace) {
                trace->hidden_states.push_back(hidden);
                trace->caches.push_back(cache);
            }
        }
        if (ctx_out) {
            ctx_out->taps.clear();
            ctx_out->hidden_state = std::move(hidden);
        }
    } else {
        throw DomainError("bptt window requires a temporal topology");
    }
    return cost;
}

} // namespace

double window_cost(const NetworkState& state, std::span<const SampleRef> window, const RecurrentContext& ctx0,
                   RecurrentContext* ctx_out) {
    return forward_window(state, window, ctx0, nullptr, ctx_out);
}

std::vector<double> bptt_gradients(const NetworkState& state, std::span<const SampleRef> window,
                                   const RecurrentContext& ctx0, RecurrentContext* ctx_out) {
    if (!state.spec.temporal())
        throw DomainError("bptt_gradients requires a temporal topology");
    if (window.empty()) throw DomainError("bptt window is empty");

    WindowTrace trace;
    forward_window(state, window, ctx0, &trace, ctx_out);

    std::vector<double> grad(state.layout.total, 0.0);
    const auto& spec = state.spec;
    const int steps = static_cast<int>(window.size());

    if (spec.topology == Topology::TLRN) {
        const auto& gb = state.layout.find(ParamBlock::Kind::Gamma);
        auto g = state.block(gb);
        const int tpc = spec.memory_depth + 1;
        std::vector<double> carry(static_cast<std::size_t>(spec.n_inputs) * tpc, 0.0);
        std::vector<double> feature_adj;
        for (int t = steps - 1; t >= 0; --t) {
            std::vector<double> total_adj = carry;
            if (window[t].in_cost) {
                net::detail::backward_layers(state, trace.caches[static_cast<std::size_t>(t)],
                                             window[t].target.data(), nullptr, nullptr, grad, &feature_adj,
                                             nullptr);
                for (std::size_t i = 0; i < total_adj.size(); ++i) total_adj[i] += feature_adj[i];
            }
            // tap recursion adjoint: s_k(t) = (1-g) s_k(t-1) + g s_{k-1}(t-1)
            const auto& prev_taps = trace.tap_states[static_cast<std::size_t>(t)];
            std::fill(carry.begin(), carry.end(), 0.0);
            for (int c = 0; c < spec.n_inputs; ++c) {
                const std::size_t base = static_cast<std::size_t>(c) * tpc;
                const double gc = g[static_cast<std::size_t>(c)];
                for (int k = 1; k < tpc; ++k) {
                    const double adj = total_adj[base + k];
                    if (adj == 0.0) continue;
                    if (gb.trainable)
                        grad[gb.offset + static_cast<std::size_t>(c)] +=
                            adj * (prev_taps[base + k - 1] - prev_taps[base + k]);
                    carry[base + k] += (1.0 - gc) * adj;
                    carry[base + k - 1] += gc * adj;
                }
                // adjoint at tap 0 flows to the raw input; nothing to train there
            }
        }
    } else { // RN
        std::vector<std::vector<double>> future_adj(spec.hidden.size());
        for (std::size_t l = 0; l < spec.hidden.size(); ++l)
            future_adj[l].assign(static_cast<std::size_t>(spec.hidden[l]), 0.0);
        std::vector<std::vector<double>> prev_adj;
        for (int t = steps - 1; t >= 0; --t) {
            net::detail::backward_layers(state, trace.caches[static_cast<std::size_t>(t)],
                                         window[t].in_cost ? window[t].target.data() : nullptr,
                                         &trace.hidden_states[static_cast<std::size_t>(t)], &future_adj, grad,
                                         nullptr, &prev_adj);
            future_adj = prev_adj;
        }
    }
    return grad;
}

Matrix rbf_fit_centers(const Matrix& train_inputs, int n_centers, const RbfFitOptions& options,
                       std::uint64_t seed, std::vector<int>* win_counts) {
    const int n = train_inputs.rows();
    const int dim = train_inputs.cols();
    if (n_centers < 1) throw DomainError("need at least one center");
    if (n_centers > n) throw DomainError("more centers than training samples");

    Rng rng(mix_seed(seed));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    Matrix centers(n_centers, dim);
    for (int i = 0; i < n_centers; ++i) {
        auto src = train_inputs.row(order[static_cast<std::size_t>(i)]);
        std::copy(src.begin(), src.end(), centers.row(i).begin());
    }

    std::vector<double> win_freq(static_cast<std::size_t>(n_centers), 1.0 / n_centers);
    std::vector<int> counts(static_cast<std::size_t>(n_centers), 0);

    for (int pass = 0; pass < options.passes; ++pass) {
        const double frac = options.passes > 1 ? static_cast<double>(pass) / (options.passes - 1) : 0.0;
        const double lr = options.lr_start * std::pow(options.lr_end / options.lr_start, frac);
        std::shuffle(order.begin(), order.end(), rng);
        std::fill(counts.begin(), counts.end(), 0);
        for (int idx : order) {
            auto x = train_inputs.row(idx);
            int winner = 0;
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < n_centers; ++i) {
                double dist_sq = 0.0;
                auto c = centers.row(i);
                for (int d = 0; d < dim; ++d) {
                    double diff = x[static_cast<std::size_t>(d)] - c[static_cast<std::size_t>(d)];
                    dist_sq += diff * diff;
                }
                double eff = std::sqrt(dist_sq);
                if (options.conscience)
                    eff -= options.conscience_bias * (1.0 / n_centers - win_freq[static_cast<std::size_t>(i)]);
                if (eff < best) {
                    best = eff;
                    winner = i;
                }
            }
            auto c = centers.row(winner);
            for (int d = 0; d < dim; ++d)
                c[static_cast<std::size_t>(d)] += lr * (x[static_cast<std::size_t>(d)] - c[static_cast<std::size_t>(d)]);
            for (int i = 0; i < n_centers; ++i) {
                const double won = i == winner ? 1.0 : 0.0;
                win_freq[static_cast<std::size_t>(i)] += options.conscience_rate * (won - win_freq[static_cast<std::size_t>(i)]);
            }
            ++counts[static_cast<std::size_t>(winner)];
        }
    }
    if (win_counts) *win_counts = counts;
    return centers;
}

std::vector<double> rbf_widths(const Matrix& centers) {
    const int n = centers.rows();
    std::vector<double> widths(static_cast<std::size_t>(n), 1.0);
    if (n < 2) return widths;
    for (int i = 0; i < n; ++i) {
        std::vector<double> dists;
        dists.reserve(static_cast<std::size_t>(n) - 1);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double d2 = 0.0;
            for (int c = 0; c < centers.cols(); ++c) {
                double diff = centers(i, c) - centers(j, c);
                d2 += diff * diff;
            }
            dists.push_back(std::sqrt(d2));
        }
        std::sort(dists.begin(), dists.end());
        const std::size_t take = std::min<std::size_t>(2, dists.size());
        double mean = 0.0;
        for (std::size_t k = 0; k < take; ++k) mean += dists[k];
        mean /= static_cast<double>(take);
        widths[static_cast<std::size_t>(i)] = std::max(mean, 1e-6);
    }
    return widths;
}

CurveAction curve_controller(const LearningCurve& curve, int window, double flat_eps, double osc_threshold) {
    if (window < 2) throw DomainError("controller window must be >= 2");
    if (static_cast<int>(curve.points.size()) < window)
        throw DomainError("learning curve shorter than controller window");

    std::vector<double> v(static_cast<std::size_t>(window));
    const std::size_t start = curve.points.size() - static_cast<std::size_t>(window);
    for (int i = 0; i < window; ++i) v[static_cast<std::size_t>(i)] = curve.points[start + i].train_mse;

    std::vector<double> diff(v.size() - 1);
    for (std::size_t i = 0; i + 1 < v.size(); ++i) diff[i] = v[i + 1] - v[i];

    // oscillation first: a sawtooth fits a near-zero slope and must not read as flat
    if (diff.size() >= 2) {
        int alternations = 0;
        for (std::size_t i = 0; i + 1 < diff.size(); ++i)
            if (diff[i] * diff[i + 1] < 0.0) ++alternations;
        const double fraction = static_cast<double>(alternations) / static_cast<double>(diff.size() - 1);
        if (fraction > osc_threshold) return CurveAction::DecreaseStep;
    }

    // least-squares slope over the window
    const double n = static_cast<double>(window);
    const double mean_x = (n - 1.0) / 2.0;
    double mean_y = 0.0;
    for (double y : v) mean_y += y;
    mean_y /= n;
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < window; ++i) {
        const double dx = i - mean_x;
        sxy += dx * (v[static_cast<std::size_t>(i)] - mean_y);
        sxx += dx * dx;
    }
    const double slope = sxy / sxx;
    if (std::abs(slope) < flat_eps) return CurveAction::IncreaseStep;

    const bool rising_throughout = std::all_of(diff.begin(), diff.end(), [](double d) { return d > 0.0; });
    if (rising_throughout) return CurveAction::Reset;
    return CurveAction::None;
}

void save_curve(const std::string& path, const LearningCurve& curve) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write file: " + path);
    out << "epoch,train_mse,cv_mse,action\n";
    std::map<int, CurveAction> events;
    for (const auto& e : curve.events) events[e.epoch] = e.action;
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        const int epoch = static_cast<int>(i) + 1;
        auto it = events.find(epoch);
        out << epoch << ',' << csv::format_exact(curve.points[i].train_mse) << ','
            << csv::format_exact(curve.points[i].cv_mse) << ','
            << to_string(it == events.end() ? CurveAction::None : it->second) << '\n';
    }
}

Matrix predict_all(const NetworkState& state, const data::EncodedDataset& ds) {
    if (ds.n_inputs() != state.spec.n_inputs || ds.n_targets() != state.spec.n_outputs)
        throw ShapeError("dataset does not match network spec");
    Matrix out(ds.n_rows(), ds.n_targets());
    if (state.spec.temporal()) {
        std::vector<std::vector<int>> sequences = ds.sequences;
        if (sequences.empty()) {
            sequences.emplace_back();
            for (int i = 0; i < ds.n_rows(); ++i) sequences.back().push_back(i);
        }
        for (const auto& seq : sequences) {
            auto ctx = net::make_context(state.spec);
            for (int idx : seq) {
                auto y = net::forward(state, ds.inputs.row(idx), ctx);
                std::copy(y.begin(), y.end(), out.row(idx).begin());
            }
        }
    } else {
        for (int i = 0; i < ds.n_rows(); ++i) {
            auto y = net::forward(state, ds.inputs.row(i));
            std::copy(y.begin(), y.end(), out.row(i).begin());
        }
    }
    return out;
}

double evaluate_mse(const NetworkState& state, const data::EncodedDataset& ds, data::SplitRole role) {
    const auto rows = ds.rows_with_role(role);
    if (rows.empty()) throw DomainError("no rows with requested split role");
    const Matrix pred = predict_all(state, ds);
    Matrix d(static_cast<int>(rows.size()), ds.n_targets());
    Matrix y(static_cast<int>(rows.size()), ds.n_targets());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        auto dr = ds.targets.row(rows[k]);
        auto yr = pred.row(rows[k]);
        std::copy(dr.begin(), dr.end(), d.row(static_cast<int>(k)).begin());
        std::copy(yr.begin(), yr.end(), y.row(static_cast<int>(k)).begin());
    }
    return metrics::mse(d, y);
}

namespace {

struct Updater {
    const net::ParamLayout& layout;
    std::vector<double> prev_delta;
    double mu_hidden, mu_output, gamma_hidden, gamma_output;

    Updater(const net::ParamLayout& l, const TrainConfig& cfg)
        : layout(l), prev_delta(l.total, 0.0), mu_hidden(cfg.step_hidden), mu_output(cfg.step_output),
          gamma_hidden(cfg.momentum_hidden), gamma_output(cfg.momentum_output) {}

    void clamp_steps() {
        mu_hidden = std::clamp(mu_hidden, 0.001, 1.0);
        mu_output = std::clamp(mu_output, 0.001, 1.0);
    }

    void apply(NetworkState& state, const std::vector<double>& grad) {
        for (const auto& b : layout.blocks) {
            if (!b.trainable) continue;
            const double mu = b.output_group ? mu_output : mu_hidden;
            const double gm = b.output_group ? gamma_output : gamma_hidden;
            for (std::size_t i = b.offset; i < b.offset + b.count(); ++i) {
                const double delta = momentum_update(prev_delta[i], grad[i], mu, gm);
                state.params[i] += delta;
                prev_delta[i] = delta;
            }
            if (b.kind == ParamBlock::Kind::Gamma) {
                // keep the memory filter stable: g in (0, 1]
                for (std::size_t i = b.offset; i < b.offset + b.count(); ++i)
                    state.params[i] = std::clamp(state.params[i], 1e-3, 1.0);
            }
        }
    }

    void clear_momentum() { std::fill(prev_delta.begin(), prev_delta.end(), 0.0); }
};

SampleRef make_ref(const data::EncodedDataset& ds, int row, bool in_cost = true) {
    return SampleRef{ds.inputs.row(row), ds.targets.row(row), in_cost};
}

bool finite_params(const NetworkState& state) {
    return std::all_of(state.params.begin(), state.params.end(),
                       [](double v) { return std::isfinite(v); });
}

// Re-randomize trainable blocks from a fresh seed, preserving fitted
// centers/widths.
void reset_weights(NetworkState& state, std::uint64_t seed) {
    NetworkState fresh = net::build(state.spec, seed);
    for (const auto& b : state.layout.blocks) {
        if (b.kind == ParamBlock::Kind::Center || b.kind == ParamBlock::Kind::Width) continue;
        std::copy(fresh.params.begin() + static_cast<std::ptrdiff_t>(b.offset),
                  fresh.params.begin() + static_cast<std::ptrdiff_t>(b.offset + b.count()),
                  state.params.begin() + static_cast<std::ptrdiff_t>(b.offset));
    }
}

} // namespace

TrainOutcome train(NetworkState state, const data::EncodedDataset& ds, const TrainConfig& config,
                   const TrainHooks& hooks) {
    config.validate();
    state.spec.validate();
    if (ds.n_inputs() != state.spec.n_inputs || ds.n_targets() != state.spec.n_outputs)
        throw ShapeError("dataset does not match network spec");

    const auto train_rows = ds.rows_with_role(data::SplitRole::Train);
    if (train_rows.empty()) throw DomainError("dataset has no TRAIN rows");
    const bool has_cv = !ds.rows_with_role(data::SplitRole::CrossValidation).empty();

    TrainOutcome run;
    run.seed = config.seed;

    // RBF phase one: centers from competitive clustering, widths from center
    // spacing; the supervised pass below only trains the layers behind them.
    if (state.spec.topology == Topology::RBF) {
        Matrix train_inputs(static_cast<int>(train_rows.size()), ds.n_inputs());
        for (std::size_t k = 0; k < train_rows.size(); ++k) {
            auto src = ds.inputs.row(train_rows[k]);
            std::copy(src.begin(), src.end(), train_inputs.row(static_cast<int>(k)).begin());
        }
        Matrix centers = rbf_fit_centers(train_inputs, state.spec.n_centers, config.rbf,
                                         derive_seed(config.seed, 0x52BFull), nullptr);
        auto widths = rbf_widths(centers);
        const auto& cb = state.layout.find(ParamBlock::Kind::Center);
        const auto& wb = state.layout.find(ParamBlock::Kind::Width);
        std::copy(centers.data().begin(), centers.data().end(), state.params.begin() + static_cast<std::ptrdiff_t>(cb.offset));
        std::copy(widths.begin(), widths.end(), state.params.begin() + static_cast<std::ptrdiff_t>(wb.offset));
    }

    Updater updater(state.layout, config);
    updater.clamp_steps();

    Rng shuffle_rng(derive_seed(config.seed, 0x5BAFFull));

    std::vector<double> best_params;
    std::vector<double> last_finite = state.params;
    int since_improve = 0;
    int last_reset_epoch = 0;
    int reset_count = 0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        if (state.spec.temporal()) {
            std::vector<std::vector<int>> sequences = ds.sequences;
            if (sequences.empty()) {
                sequences.emplace_back();
                for (int i = 0; i < ds.n_rows(); ++i) sequences.back().push_back(i);
            }
            std::vector<double> batch_grad;
            if (config.mode == Mode::Batch) batch_grad.assign(state.layout.total, 0.0);
            for (const auto& seq : sequences) {
                auto ctx = net::make_context(state.spec);
                std::size_t pos = 0;
                while (pos < seq.size()) {
                    const std::size_t len =
                        std::min<std::size_t>(static_cast<std::size_t>(config.trajectory_length), seq.size() - pos);
                    std::vector<SampleRef> window;
                    bool any_cost = false;
                    for (std::size_t k = 0; k < len; ++k) {
                        const int row = seq[pos + k];
                        const bool in_cost = ds.roles[static_cast<std::size_t>(row)] == data::SplitRole::Train;
                        any_cost |= in_cost;
                        window.push_back(make_ref(ds, row, in_cost));
                    }
                    net::RecurrentContext next;
                    if (any_cost) {
                        auto grad = bptt_gradients(state, window, ctx, &next);
                        if (config.mode == Mode::Online) {
                            updater.apply(state, grad);
                        } else {
                            for (std::size_t i = 0; i < grad.size(); ++i) batch_grad[i] += grad[i];
                        }
                    } else {
                        window_cost(state, window, ctx, &next); // advance context only
                    }
                    ctx = std::move(next);
                    pos += len;
                }
            }
            if (config.mode == Mode::Batch) updater.apply(state, batch_grad);
        } else {
            if (config.mode == Mode::Online) {
                std::vector<int> order = train_rows;
                std::shuffle(order.begin(), order.end(), shuffle_rng);
                for (int row : order) {
                    SampleRef ref = make_ref(ds, row);
                    auto grad = gradients(state, std::span<const SampleRef>(&ref, 1));
                    updater.apply(state, grad);
                }
            } else {
                std::vector<SampleRef> batch;
                batch.reserve(train_rows.size());
                for (int row : train_rows) batch.push_back(make_ref(ds, row));
                auto grad = gradients(state, batch);
                updater.apply(state, grad);
            }
        }

        double train_mse = std::numeric_limits<double>::quiet_NaN();
        double cv_mse = std::numeric_limits<double>::quiet_NaN();
        if (finite_params(state)) {
            train_mse = evaluate_mse(state, ds, data::SplitRole::Train);
            cv_mse = hooks.cv_mse_override
                         ? hooks.cv_mse_override(epoch, state)
                         : (has_cv ? evaluate_mse(state, ds, data::SplitRole::CrossValidation) : train_mse);
        }
        run.curve.points.push_back({train_mse, cv_mse});
        run.epochs_run = epoch;

        const bool diverged = !std::isfinite(train_mse) || !std::isfinite(cv_mse) ||
                              train_mse > config.divergence_limit || cv_mse > config.divergence_limit;
        if (diverged) {
            run.curve.diverged = true;
            run.reason = StopReason::Diverged;
            if (best_params.empty())
                state.params = last_finite;
            else
                state.params = best_params;
            run.state = std::move(state);
            return run;
        }
        last_finite = state.params;

        if (cv_mse < run.best_cv_mse) {
            run.best_cv_mse = cv_mse;
            run.best_epoch = epoch;
            best_params = state.params;
            since_improve = 0;
        } else {
            ++since_improve;
        }
        if (config.patience > 0 && since_improve >= config.patience) {
            run.reason = StopReason::EarlyStop;
            break;
        }

        if (config.curve_control && epoch - last_reset_epoch >= config.curve_window) {
            LearningCurve view;
            view.points.assign(run.curve.points.end() - config.curve_window, run.curve.points.end());
            const CurveAction action =
                curve_controller(view, config.curve_window, config.flat_eps, config.osc_threshold);
            if (action != CurveAction::None) run.curve.events.push_back({epoch, action});
            switch (action) {
            case CurveAction::IncreaseStep:
                updater.mu_hidden *= 1.05;
                updater.mu_output *= 1.05;
                updater.clamp_steps();
                break;
            case CurveAction::DecreaseStep:
                updater.mu_hidden *= 0.5;
                updater.mu_output *= 0.5;
                updater.clamp_steps();
                break;
            case CurveAction::Reset:
                reset_weights(state, derive_seed(config.seed, 0xEE5E7ull + static_cast<std::uint64_t>(++reset_count)));
                updater.clear_momentum();
                last_reset_epoch = epoch;
                break;
            case CurveAction::None:
                break;
            }
        }
    }

    if (run.reason != StopReason::EarlyStop) run.reason = StopReason::EpochsExhausted;
    if (!best_params.empty()) state.params = std::move(best_params);
    run.state = std::move(state);
    return run;
}

MultiRestartResult multi_restart_train(const net::NetworkSpec& spec, const data::EncodedDataset& ds,
                                       const TrainConfig& config) {
    config.validate();
    MultiRestartResult result;
    for (int i = 0; i < config.restarts; ++i) {
        TrainConfig cfg = config;
        cfg.seed = config.seed + static_cast<std::uint64_t>(i);
        auto state = net::build(spec, cfg.seed);
        result.runs.push_back(train(std::move(state), ds, cfg));
        const auto& run = result.runs.back();
        if (run.reason == StopReason::Diverged) continue;
        if (result.best_index < 0 || run.best_cv_mse < result.runs[static_cast<std::size_t>(result.best_index)].best_cv_mse)
            result.best_index = i;
    }
    return result;
}

} // namespace loadnet::train

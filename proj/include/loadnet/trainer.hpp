#pragma once

#include "loadnet/dataset.hpp"
#include "loadnet/matrix.hpp"
#include "loadnet/network.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace loadnet::train {

enum class Mode { Online, Batch };
enum class StopReason { EpochsExhausted, EarlyStop, Diverged };
enum class CurveAction { IncreaseStep, DecreaseStep, Reset, None };

std::string_view to_string(Mode m);
std::string_view to_string(StopReason r);
std::string_view to_string(CurveAction a);

// Two-phase RBF center fitting: competitive learning with a conscience term
// so every unit keeps winning, then widths from the nearest centers.
struct RbfFitOptions {
    int passes = 30;
    double lr_start = 0.01;
    double lr_end = 0.001;
    bool conscience = true;
    double conscience_bias = 0.5;  // beta in d_eff = d - beta * (1/N - win_freq)
    double conscience_rate = 0.1;  // win-frequency tracking rate
};

struct TrainConfig {
    double step_hidden = 0.02; // per layer group, clamped to [0.001, 1]
    double step_output = 0.01;
    double momentum_hidden = 0.7;
    double momentum_output = 0.9;
    int epochs = 1000;
    Mode mode = Mode::Online;
    int patience = 50; // epochs without CV improvement; <= 0 disables early stopping
    int restarts = 5;
    std::uint64_t seed = 0;
    int trajectory_length = 10;
    bool curve_control = true;
    int curve_window = 50;
    double flat_eps = 1e-5;
    double osc_threshold = 0.5;
    double divergence_limit = 1e12;
    RbfFitOptions rbf;

    void validate() const;
};

struct LearningCurve {
    struct Point {
        double train_mse = 0.0;
        double cv_mse = 0.0;
    };
    struct Event {
        int epoch = 0;
        CurveAction action = CurveAction::None;
    };
    std::vector<Point> points;
    std::vector<Event> events;
    bool diverged = false;
};

void save_curve(const std::string& path, const LearningCurve& curve);

struct TrainOutcome {
    net::NetworkState state; // snapshot with minimum CV MSE
    LearningCurve curve;
    StopReason reason = StopReason::EpochsExhausted;
    int best_epoch = -1;
    double best_cv_mse = std::numeric_limits<double>::infinity();
    int epochs_run = 0;
    std::uint64_t seed = 0;
};

struct MultiRestartResult {
    std::vector<TrainOutcome> runs;
    int best_index = -1; // minimum CV MSE among non-diverged runs
};

// A (input, target) pair borrowed from a dataset row.
struct SampleRef {
    std::span<const double> input;
    std::span<const double> target;
    bool in_cost = true; // temporal windows: whether this step contributes error
};

// gamma * prev - mu * grad (Eq. form of momentum learning); caller adds the
// returned delta to the parameter.
double momentum_update(double prev_delta, double grad, double mu, double gamma);

// Analytic gradients of E = 1/2 sum |y - d|^2 over the batch, for every
// trainable parameter. Static topologies only.
std::vector<double> gradients(const net::NetworkState& state, std::span<const SampleRef> batch);
double batch_cost(const net::NetworkState& state, std::span<const SampleRef> batch);

// Truncated backpropagation through time over one window. The window's cost
// sums over steps with in_cost set. ctx0 is the context entering the window;
// ctx_out (optional) receives the context after it.
std::vector<double> bptt_gradients(const net::NetworkState& state, std::span<const SampleRef> window,
                                   const net::RecurrentContext& ctx0, net::RecurrentContext* ctx_out = nullptr);
double window_cost(const net::NetworkState& state, std::span<const SampleRef> window,
                   const net::RecurrentContext& ctx0, net::RecurrentContext* ctx_out = nullptr);

// Competitive-learning center fit; deterministic per seed. Optionally
// reports per-unit win counts from the final pass.
Matrix rbf_fit_centers(const Matrix& train_inputs, int n_centers, const RbfFitOptions& options,
                       std::uint64_t seed, std::vector<int>* win_counts = nullptr);
// Mean distance to the two nearest other centers (as available).
std::vector<double> rbf_widths(const Matrix& centers);

// Steers the step size from the recent train-MSE history: oscillation halves
// it, a flat curve nudges it up 5%, a monotone rise resets the network.
CurveAction curve_controller(const LearningCurve& curve, int window = 50, double flat_eps = 1e-5,
                             double osc_threshold = 0.5);

struct TrainHooks {
    // Test seam: replaces CV evaluation when set.
    std::function<double(int epoch, const net::NetworkState& state)> cv_mse_override;
};

TrainOutcome train(net::NetworkState state, const data::EncodedDataset& dataset, const TrainConfig& config,
                   const TrainHooks& hooks = {});
MultiRestartResult multi_restart_train(const net::NetworkSpec& spec, const data::EncodedDataset& dataset,
                                       const TrainConfig& config);

// Sequence-aware predictions for every row (fresh context per sequence).
Matrix predict_all(const net::NetworkState& state, const data::EncodedDataset& dataset);
double evaluate_mse(const net::NetworkState& state, const data::EncodedDataset& dataset, data::SplitRole role);

} // namespace loadnet::train

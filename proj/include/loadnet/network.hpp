#pragma once

#include "loadnet/errors.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace loadnet::net {

enum class Topology { MLP, GFFN, RBF, TLRN, RN };
enum class Transfer { Sigmoid, Linear };
enum class Recurrence { Partial, Full };

std::string_view to_string(Topology t);
Topology topology_from_string(std::string_view token);
std::string_view to_string(Transfer t);
std::string_view to_string(Recurrence r);

struct NetworkSpec {
    Topology topology = Topology::MLP;
    int n_inputs = 0;
    int n_outputs = 0;
    std::vector<int> hidden;                     // nodes per hidden layer
    Transfer output_transfer = Transfer::Linear; // hidden layers are always sigmoid
    int memory_depth = 10;                       // TLRN taps per input = memory_depth + 1
    int n_centers = 80;                          // RBF
    Recurrence recurrence = Recurrence::Partial; // RN
    bool train_gamma = true;                     // TLRN gamma trainable

    void validate() const;
    bool temporal() const { return topology == Topology::TLRN || topology == Topology::RN; }
    // Width of the layer the weighted stack reads: raw inputs for MLP/GFFN/RN,
    // flattened gamma taps for TLRN, basis responses for RBF.
    int feature_width() const;
    // [feature layer, hidden..., output]
    std::vector<int> layer_sizes() const;
    // (from, to) weighted connections; GFFN connects every earlier layer to
    // every later one, the rest chain consecutively.
    std::vector<std::pair<int, int>> connections() const;
};

struct ParamBlock {
    enum class Kind { Weight, Bias, Recurrent, Gamma, Center, Width };
    Kind kind;
    int from = -1; // Weight: source layer
    int to = -1;   // Weight/Bias/Recurrent: owning layer
    int rows = 0;
    int cols = 1;
    std::size_t offset = 0;
    bool trainable = true;
    bool output_group = false; // parameters feeding the output layer

    std::size_t count() const { return static_cast<std::size_t>(rows) * cols; }
};

struct ParamLayout {
    std::vector<ParamBlock> blocks;
    std::size_t total = 0;
    const ParamBlock& find(ParamBlock::Kind kind, int from = -1, int to = -1) const;
};

ParamLayout make_layout(const NetworkSpec& spec);

struct NetworkState {
    NetworkSpec spec;
    ParamLayout layout;
    std::vector<double> params;
    std::uint64_t rng_seed = 0;

    std::span<double> block(const ParamBlock& b) { return {params.data() + b.offset, b.count()}; }
    std::span<const double> block(const ParamBlock& b) const { return {params.data() + b.offset, b.count()}; }
};

// Weights and biases uniform in [-0.5, 0.5]; TLRN gamma starts at 0.5; RBF
// centers uniform in [0, 1] with unit widths until the fitting pass replaces
// them. Identical seeds give bit-identical states.
NetworkState build(const NetworkSpec& spec, std::uint64_t seed);

// Short-term state carried between forward steps of temporal topologies.
struct RecurrentContext {
    std::vector<double> taps;                        // TLRN: channel-major, (depth+1) per input
    std::vector<std::vector<double>> hidden_state;   // RN: previous activations per hidden layer
    void reset();
};

RecurrentContext make_context(const NetworkSpec& spec);

// One gamma-filter update for a single input channel's tap line:
//   x_0 <- input;  x_k <- (1-g) x_k + g x_{k-1}   (previous values)
// g must lie in (0, 1]; g = 1 degenerates to a pure tap-delay line.
void gamma_step(std::span<double> taps, double input, double g);

// Gaussian responses exp(-|x - c_i|^2 / (2 w_i^2)), in (0, 1].
std::vector<double> rbf_activations(std::span<const double> centers, std::span<const double> widths,
                                    std::span<const double> input);

// Single forward evaluation. Static topologies ignore and preserve the
// context; temporal ones advance it.
std::vector<double> forward(const NetworkState& state, std::span<const double> input, RecurrentContext& ctx);
std::vector<double> forward(const NetworkState& state, std::span<const double> input);

// 2n+1 hidden nodes suffice for any continuous function of n inputs.
int kolmogorov_hidden(int n_inputs);

// (A+1)B + (B+1)C <= D/10 for input A, hidden B, output C, D training patterns.
bool lallahem_feasible(long long a, long long b, long long c, long long d);

// Plain-text model format; parameter values round-trip bit-exactly.
void save_model(std::ostream& out, const NetworkState& state);
NetworkState load_model(std::istream& in);
void save_model_file(const std::string& path, const NetworkState& state);
NetworkState load_model_file(const std::string& path);

} // namespace loadnet::net

#include "loadnet/network.hpp"

#include "loadnet/csv.hpp"
#include "loadnet/rng.hpp"
#include "net_detail.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace loadnet::net {

std::string_view to_string(Topology t) {
    switch (t) {
    case Topology::MLP: return "MLP";
    case Topology::GFFN: return "GFFN";
    case Topology::RBF: return "RBF";
    case Topology::TLRN: return "TLRN";
    case Topology::RN: return "RN";
    }
    throw DomainError("invalid topology");
}

Topology topology_from_string(std::string_view token) {
    for (Topology t : {Topology::MLP, Topology::GFFN, Topology::RBF, Topology::TLRN, Topology::RN})
        if (to_string(t) == token) return t;
    throw LookupError("unknown topology '" + std::string(token) + "'");
}

std::string_view to_string(Transfer t) { return t == Transfer::Sigmoid ? "sigmoid" : "linear"; }
std::string_view to_string(Recurrence r) { return r == Recurrence::Partial ? "partial" : "full"; }

void NetworkSpec::validate() const {
    if (n_inputs < 1) throw DomainError("network needs at least one input");
    if (n_outputs < 1) throw DomainError("network needs at least one output");
    for (int h : hidden)
        if (h < 1) throw DomainError("hidden layer node counts must be >= 1");
    if (topology == Topology::TLRN && memory_depth < 1)
        throw DomainError("TLRN memory depth must be >= 1");
    if (topology == Topology::RBF && n_centers < 1)
        throw DomainError("RBF needs at least one center");
}

int NetworkSpec::feature_width() const {
    switch (topology) {
    case Topology::TLRN: return n_inputs * (memory_depth + 1);
    case Topology::RBF: return n_centers;
    default: return n_inputs;
    }
}

std::vector<int> NetworkSpec::layer_sizes() const {
    std::vector<int> sizes;
    sizes.push_back(feature_width());
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(n_outputs);
    return sizes;
}

std::vector<std::pair<int, int>> NetworkSpec::connections() const {
    const int n_layers = static_cast<int>(hidden.size()) + 2;
    std::vector<std::pair<int, int>> conns;
    if (topology == Topology::GFFN) {
        for (int i = 0; i < n_layers; ++i)
            for (int j = i + 1; j < n_layers; ++j) conns.emplace_back(i, j);
    } else {
        for (int i = 0; i + 1 < n_layers; ++i) conns.emplace_back(i, i + 1);
    }
    return conns;
}

const ParamBlock& ParamLayout::find(ParamBlock::Kind kind, int from, int to) const {
    for (const auto& b : blocks) {
        if (b.kind != kind) continue;
        if (from >= 0 && b.from != from) continue;
        if (to >= 0 && b.to != to) continue;
        return b;
    }
    throw LookupError("parameter block not found");
}

ParamLayout make_layout(const NetworkSpec& spec) {
    spec.validate();
    ParamLayout layout;
    const auto sizes = spec.layer_sizes();
    const int out_layer = static_cast<int>(sizes.size()) - 1;

    auto add = [&](ParamBlock b) {
        b.offset = layout.total;
        layout.total += b.count();
        layout.blocks.push_back(b);
    };

    if (spec.topology == Topology::RBF) {
        add({ParamBlock::Kind::Center, -1, -1, spec.n_centers, spec.n_inputs, 0, false, false});
        add({ParamBlock::Kind::Width, -1, -1, spec.n_centers, 1, 0, false, false});
    }
    if (spec.topology == Topology::TLRN)
        add({ParamBlock::Kind::Gamma, -1, -1, spec.n_inputs, 1, 0, spec.train_gamma, false});

    for (auto [i, j] : spec.connections())
        add({ParamBlock::Kind::Weight, i, j, sizes[j], sizes[i], 0, true, j == out_layer});
    for (int j = 1; j <= out_layer; ++j)
        add({ParamBlock::Kind::Bias, -1, j, sizes[j], 1, 0, true, j == out_layer});
    if (spec.topology == Topology::RN) {
        for (int j = 1; j < out_layer; ++j) {
            const int cols = spec.recurrence == Recurrence::Full ? sizes[j] : 1;
            add({ParamBlock::Kind::Recurrent, -1, j, sizes[j], cols, 0, true, false});
        }
    }
    return layout;
}

NetworkState build(const NetworkSpec& spec, std::uint64_t seed) {
    NetworkState state;
    state.spec = spec;
    state.layout = make_layout(spec);
    state.params.assign(state.layout.total, 0.0);
    state.rng_seed = seed;

    Rng rng(mix_seed(seed));
    for (const auto& b : state.layout.blocks) {
        auto view = state.block(b);
        switch (b.kind) {
        case ParamBlock::Kind::Gamma:
            for (auto& v : view) v = 0.5;
            break;
        case ParamBlock::Kind::Center:
            for (auto& v : view) v = uniform(rng, 0.0, 1.0);
            break;
        case ParamBlock::Kind::Width:
            for (auto& v : view) v = 1.0;
            break;
        default:
            for (auto& v : view) v = uniform(rng, -0.5, 0.5);
            break;
        }
    }
    return state;
}

void RecurrentContext::reset() {
    std::fill(taps.begin(), taps.end(), 0.0);
    for (auto& h : hidden_state) std::fill(h.begin(), h.end(), 0.0);
}

RecurrentContext make_context(const NetworkSpec& spec) {
    RecurrentContext ctx;
    if (spec.topology == Topology::TLRN)
        ctx.taps.assign(static_cast<std::size_t>(spec.n_inputs) * (spec.memory_depth + 1), 0.0);
    if (spec.topology == Topology::RN) {
        for (int h : spec.hidden) ctx.hidden_state.emplace_back(static_cast<std::size_t>(h), 0.0);
    }
    return ctx;
}

void gamma_step(std::span<double> taps, double input, double g) {
    if (!(g > 0.0 && g <= 1.0)) throw DomainError("gamma parameter must lie in (0, 1]");
    if (taps.empty()) throw ShapeError("gamma tap line is empty");
    // downward sweep keeps x_{k-1} at its previous value when x_k updates
    for (std::size_t k = taps.size() - 1; k >= 1; --k) taps[k] = (1.0 - g) * taps[k] + g * taps[k - 1];
    taps[0] = input;
}

std::vector<double> rbf_activations(std::span<const double> centers, std::span<const double> widths,
                                    std::span<const double> input) {
    const std::size_t n = widths.size();
    const std::size_t dim = input.size();
    if (centers.size() != n * dim) throw ShapeError("centers size must be n_centers * input dim");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(widths[i] > 0.0)) throw DomainError("RBF widths must be positive");
        double dist_sq = 0.0;
        const double* c = centers.data() + i * dim;
        for (std::size_t d = 0; d < dim; ++d) {
            double diff = input[d] - c[d];
            dist_sq += diff * diff;
        }
        out[i] = std::exp(-dist_sq / (2.0 * widths[i] * widths[i]));
    }
    return out;
}

std::vector<double> forward(const NetworkState& state, std::span<const double> input, RecurrentContext& ctx) {
    if (static_cast<int>(input.size()) != state.spec.n_inputs)
        throw ShapeError("input length does not match spec.n_inputs");
    for (double v : input)
        if (!std::isfinite(v)) throw DomainError("non-finite network input");

    detail::LayerCache cache;
    if (state.spec.topology == Topology::TLRN) {
        const auto& gb = state.layout.find(ParamBlock::Kind::Gamma);
        auto g = state.block(gb);
        const int taps_per_channel = state.spec.memory_depth + 1;
        if (ctx.taps.size() != static_cast<std::size_t>(state.spec.n_inputs) * taps_per_channel)
            throw ShapeError("context taps do not match spec");
        for (int c = 0; c < state.spec.n_inputs; ++c)
            gamma_step(std::span<double>(ctx.taps.data() + static_cast<std::size_t>(c) * taps_per_channel,
                                         static_cast<std::size_t>(taps_per_channel)),
                       input[static_cast<std::size_t>(c)], g[static_cast<std::size_t>(c)]);
        detail::forward_layers(state, ctx.taps, nullptr, cache);
    } else if (state.spec.topology == Topology::RN) {
        if (ctx.hidden_state.size() != state.spec.hidden.size())
            throw ShapeError("context hidden state does not match spec");
        detail::forward_layers(state, detail::static_features(state, input), &ctx.hidden_state, cache);
        for (std::size_t l = 0; l < state.spec.hidden.size(); ++l) ctx.hidden_state[l] = cache.act[l];
    } else {
        detail::forward_layers(state, detail::static_features(state, input), nullptr, cache);
    }
    return cache.act.back();
}

std::vector<double> forward(const NetworkState& state, std::span<const double> input) {
    if (state.spec.temporal())
        throw DomainError("temporal topology requires a recurrent context");
    RecurrentContext ctx;
    return forward(state, input, ctx);
}

int kolmogorov_hidden(int n_inputs) {
    if (n_inputs < 1) throw DomainError("kolmogorov_hidden requires n >= 1");
    return 2 * n_inputs + 1;
}

bool lallahem_feasible(long long a, long long b, long long c, long long d) {
    if (a < 0 || b < 0 || c < 0 || d < 0) throw DomainError("lallahem_feasible requires nonnegative integers");
    // compare 10 * lhs <= d to stay in exact integer arithmetic
    return 10 * ((a + 1) * b + (b + 1) * c) <= d;
}

namespace {

constexpr const char* kModelMagic = "loadnet-model";
constexpr int kModelVersion = 1;

} // namespace

void save_model(std::ostream& out, const NetworkState& state) {
    out << kModelMagic << " v" << kModelVersion << '\n';
    out << "topology " << to_string(state.spec.topology) << '\n';
    out << "n_inputs " << state.spec.n_inputs << '\n';
    out << "n_outputs " << state.spec.n_outputs << '\n';
    out << "hidden " << state.spec.hidden.size();
    for (int h : state.spec.hidden) out << ' ' << h;
    out << '\n';
    out << "output_transfer " << to_string(state.spec.output_transfer) << '\n';
    out << "memory_depth " << state.spec.memory_depth << '\n';
    out << "n_centers " << state.spec.n_centers << '\n';
    out << "recurrence " << to_string(state.spec.recurrence) << '\n';
    out << "train_gamma " << (state.spec.train_gamma ? 1 : 0) << '\n';
    out << "seed " << state.rng_seed << '\n';
    out << "params " << state.params.size() << '\n';
    for (double v : state.params) out << csv::format_exact(v) << '\n';
}

namespace {

std::string expect_key(std::istream& in, const std::string& key) {
    std::string k;
    if (!(in >> k) || k != key) throw FormatError("model file: expected '" + key + "'");
    std::string v;
    if (!(in >> v)) throw FormatError("model file: missing value for '" + key + "'");
    return v;
}

} // namespace

NetworkState load_model(std::istream& in) {
    std::string magic, version;
    if (!(in >> magic >> version) || magic != kModelMagic || version != "v1")
        throw FormatError("not a loadnet model file (bad magic/version)");

    NetworkSpec spec;
    spec.topology = topology_from_string(expect_key(in, "topology"));
    spec.n_inputs = std::stoi(expect_key(in, "n_inputs"));
    spec.n_outputs = std::stoi(expect_key(in, "n_outputs"));
    {
        std::string k;
        in >> k;
        if (k != "hidden") throw FormatError("model file: expected 'hidden'");
        int count = 0;
        if (!(in >> count) || count < 0) throw FormatError("model file: bad hidden layer count");
        spec.hidden.resize(static_cast<std::size_t>(count));
        for (int& h : spec.hidden)
            if (!(in >> h)) throw FormatError("model file: truncated hidden sizes");
    }
    {
        auto t = expect_key(in, "output_transfer");
        if (t == "linear") spec.output_transfer = Transfer::Linear;
        else if (t == "sigmoid") spec.output_transfer = Transfer::Sigmoid;
        else throw FormatError("model file: unknown transfer '" + t + "'");
    }
    spec.memory_depth = std::stoi(expect_key(in, "memory_depth"));
    spec.n_centers = std::stoi(expect_key(in, "n_centers"));
    {
        auto r = expect_key(in, "recurrence");
        if (r == "partial") spec.recurrence = Recurrence::Partial;
        else if (r == "full") spec.recurrence = Recurrence::Full;
        else throw FormatError("model file: unknown recurrence '" + r + "'");
    }
    spec.train_gamma = expect_key(in, "train_gamma") != "0";

    NetworkState state;
    state.rng_seed = std::stoull(expect_key(in, "seed"));
    state.spec = spec;
    try {
        state.layout = make_layout(spec);
    } catch (const Error& e) {
        throw FormatError(std::string("model file: invalid spec: ") + e.what());
    }
    const auto n_params = std::stoull(expect_key(in, "params"));
    if (n_params != state.layout.total)
        throw FormatError("model file: parameter count does not match spec shapes");
    state.params.resize(n_params);
    for (auto& v : state.params)
        if (!(in >> v)) throw FormatError("model file: truncated parameter data");
    return state;
}

void save_model_file(const std::string& path, const NetworkState& state) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write model file: " + path);
    save_model(out, state);
}

NetworkState load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open model file: " + path);
    return load_model(in);
}

} // namespace loadnet::net

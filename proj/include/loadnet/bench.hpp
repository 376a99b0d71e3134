#pragma once

#include "loadnet/dataset.hpp"
#include "loadnet/metrics.hpp"
#include "loadnet/network.hpp"
#include "loadnet/trainer.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace loadnet::bench {

struct SweepSpec {
    std::vector<net::Topology> topologies = {net::Topology::MLP, net::Topology::GFFN, net::Topology::RBF,
                                             net::Topology::TLRN, net::Topology::RN};
    std::vector<int> hidden_range = {0, 1, 2, 3, 4};
    int restarts = 5;
    int nodes_per_hidden = 14;
    int memory_depth = 10;
    int rbf_centers = 80; // clamped to the TRAIN row count per run
    net::Recurrence recurrence = net::Recurrence::Partial;
    net::Transfer output_transfer = net::Transfer::Linear;
    train::TrainConfig base;
    // TLRN/RN cells run at base step size times this factor: trajectory
    // updates sum ~trajectory_length step gradients, so temporal models take
    // a proportionally smaller step (the benchmarked tool used 1.0 vs 0.1).
    double temporal_step_scale = 0.1;
    int jobs = 1;

    void validate() const;
};

struct RunResult {
    net::Topology topology = net::Topology::MLP;
    int hidden_layers = 0;
    int restart = 0;
    std::uint64_t seed = 0;
    double wall_time_s = 0.0;
    int final_epoch = 0;
    train::StopReason stop_reason = train::StopReason::EpochsExhausted;
    bool diverged = false;
    std::optional<metrics::EvalReport> test_eval; // absent when diverged
    double cv_mse = 0.0;
    net::NetworkState model;
    train::LearningCurve curve;
};

// Flat archive row; bench.csv is a pure function of these.
struct RunRecord {
    std::string topology;
    int hidden_layers = 0;
    int restart = 0;
    std::uint64_t seed = 0;
    double wall_time_s = 0.0;
    int epochs = 0;
    std::string stop_reason;
    bool diverged = false;
    std::optional<double> mse, nmse, mae, min_abs_err, max_abs_err, r;
    double cv_mse = 0.0;
};

RunRecord to_record(const RunResult& run);

struct BenchReport {
    std::vector<net::Topology> topologies; // column-block order
    std::vector<int> hidden_range;
    int restarts = 0;
    std::vector<RunResult> runs; // ordered by (topology, depth, restart)
    int champion = -1;           // index into runs
    std::uint64_t master_seed = 0;
    std::string config_hash;

    const RunResult& run_at(int topo_idx, int depth_idx, int restart) const;
    // Best restart of a cell by test MSE; -1 when every restart diverged.
    int best_in_cell(int topo_idx, int depth_idx) const;
};

struct SweepHooks {
    // Injectable clock so tests can pin the time column; defaults to the
    // monotonic system clock.
    std::function<double()> now_seconds;
};

BenchReport run_sweep(const SweepSpec& spec, const data::EncodedDataset& dataset, const SweepHooks& hooks = {});

enum class Criterion { TestMse, MeanR, WallTime };

struct SelectionCriteria {
    std::vector<Criterion> order = {Criterion::TestMse, Criterion::MeanR, Criterion::WallTime};
    double tie_eps = 1e-6;
};

// Lexicographic choice over the per-cell best runs. Throws when every run
// diverged.
int select_best(const BenchReport& report, const SelectionCriteria& criteria = {});

struct HoldoutRow {
    int exemplar = 0;
    std::string pollutant;
    double desired = 0.0;
    double actual = 0.0;
    std::optional<double> trend_pct; // absent when either value is nonpositive
};

struct HoldoutTable {
    std::vector<HoldoutRow> rows;
    std::optional<double> trend_mean;
};

// Denormalized predictions for every row of the role, one table row per
// (exemplar, target), targets in canonical pollutant order when the dataset
// carries the pollution-load schema.
HoldoutTable holdout_predict(const net::NetworkState& champion, const data::EncodedDataset& dataset,
                             data::SplitRole role);
void write_holdout_csv(const std::string& path, const HoldoutTable& table);

std::string render_bench_csv(const std::vector<RunRecord>& records);
std::string render_bench_text(const std::vector<RunRecord>& records);
std::string render_bench_csv(const BenchReport& report);
std::string render_bench_text(const BenchReport& report);

// out_dir/bench.csv, bench.txt, provenance.txt, runs/index.csv plus one
// curve CSV and model file per run.
void write_report_files(const BenchReport& report, const std::string& out_dir);
std::vector<RunRecord> load_archive_records(const std::string& runs_dir);

// Model plus the normalizer and schema it was trained with.
struct ModelBundle {
    net::NetworkState state;
    data::NormalizationParams norm;
    bool include_year = true;
    std::vector<std::string> input_names;
    std::vector<std::string> target_names;
};

void save_bundle(const std::string& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::string& path);

std::string config_hash(const SweepSpec& spec);

} // namespace loadnet::bench

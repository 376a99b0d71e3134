#include "loadnet/bench.hpp"

#include "loadnet/csv.hpp"
#include "loadnet/rng.hpp"
#include "support/synth.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace loadnet;
using namespace loadnet::bench;
namespace fs = std::filesystem;

namespace {

// counter clock: deterministic "time" for byte-identical report tests
SweepHooks counting_clock() {
    auto counter = std::make_shared<int>(0);
    SweepHooks hooks;
    hooks.now_seconds = [counter]() { return 0.001 * (*counter)++; };
    return hooks;
}

SweepSpec tiny_spec(std::uint64_t seed) {
    SweepSpec spec;
    spec.topologies = {net::Topology::MLP, net::Topology::TLRN};
    spec.hidden_range = {0, 1};
    spec.restarts = 2;
    spec.nodes_per_hidden = 3;
    spec.memory_depth = 3;
    spec.rbf_centers = 6;
    spec.base.epochs = 8;
    spec.base.patience = 0;
    spec.base.curve_control = false;
    spec.base.seed = seed;
    spec.base.trajectory_length = 4;
    return spec;
}

RunResult fake_run(net::Topology t, int depth, int restart, double mse, double r, double time_s) {
    RunResult run;
    run.topology = t;
    run.hidden_layers = depth;
    run.restart = restart;
    run.seed = 1;
    run.wall_time_s = time_s;
    run.final_epoch = 10;
    run.stop_reason = train::StopReason::EpochsExhausted;
    metrics::EvalReport eval;
    eval.mse = mse;
    eval.r_mean = r;
    eval.mae_abs = 0.1;
    eval.min_abs_err = 0.0;
    eval.max_abs_err = 0.5;
    eval.nmse = mse;
    eval.n_exemplars = 4;
    eval.n_outputs = 1;
    run.test_eval = eval;
    run.cv_mse = mse;
    run.model = net::build(net::NetworkSpec{net::Topology::MLP, 1, 1, {}, net::Transfer::Linear}, 1);
    return run;
}

} // namespace

TEST_CASE("run_sweep executes the whole grid deterministically") {
    const auto ds = synth::make_grid_dataset(40, 10);
    const auto spec = tiny_spec(5);

    const auto a = run_sweep(spec, ds, counting_clock());
    CHECK(a.runs.size() == 2 * 2 * 2);
    for (const auto& run : a.runs) CHECK(run.final_epoch == 8);

    const auto b = run_sweep(spec, ds, counting_clock());
    CHECK(render_bench_csv(a) == render_bench_csv(b)); // byte-identical incl. time row
    CHECK(render_bench_text(a) == render_bench_text(b));

    // run metrics are identical under a real clock too; only times may move
    const auto c = run_sweep(spec, ds);
    REQUIRE(c.runs.size() == a.runs.size());
    for (std::size_t i = 0; i < a.runs.size(); ++i) {
        CHECK(a.runs[i].seed == c.runs[i].seed);
        REQUIRE(a.runs[i].test_eval.has_value() == c.runs[i].test_eval.has_value());
        if (a.runs[i].test_eval)
            CHECK(a.runs[i].test_eval->mse == c.runs[i].test_eval->mse);
        CHECK(c.runs[i].wall_time_s >= 0.0);
    }
}

TEST_CASE("worker pool width never changes results") {
    const auto ds = synth::make_grid_dataset(30, 21);
    auto spec = tiny_spec(9);
    const auto serial = run_sweep(spec, ds, counting_clock());
    spec.jobs = 4;
    const auto parallel = run_sweep(spec, ds, counting_clock());
    REQUIRE(serial.runs.size() == parallel.runs.size());
    for (std::size_t i = 0; i < serial.runs.size(); ++i) {
        CHECK(serial.runs[i].seed == parallel.runs[i].seed);
        CHECK(serial.runs[i].model.params == parallel.runs[i].model.params);
    }
}

TEST_CASE("champion has the lowest test MSE among cell bests") {
    const auto ds = synth::make_grid_dataset(40, 33);
    const auto report = run_sweep(tiny_spec(3), ds, counting_clock());
    REQUIRE(report.champion >= 0);
    const double champ_mse = report.runs[static_cast<std::size_t>(report.champion)].test_eval->mse;
    for (const auto& run : report.runs)
        if (run.test_eval) CHECK(champ_mse <= run.test_eval->mse + 1e-6);
}

TEST_CASE("select_best tie-breaking") {
    BenchReport report;
    report.topologies = {net::Topology::MLP};
    report.hidden_range = {0, 1, 2};
    report.restarts = 1;

    SUBCASE("single run selects itself") {
        report.hidden_range = {0};
        report.runs.push_back(fake_run(net::Topology::MLP, 0, 0, 0.5, 0.9, 3.0));
        CHECK(select_best(report) == 0);
    }
    SUBCASE("equal MSE breaks on higher R") {
        report.hidden_range = {0, 1};
        report.runs.push_back(fake_run(net::Topology::MLP, 0, 0, 0.5, 0.8, 1.0));
        report.runs.push_back(fake_run(net::Topology::MLP, 1, 0, 0.5, 0.9, 9.0));
        CHECK(select_best(report) == 1);
    }
    SUBCASE("equal MSE and R break on wall time") {
        report.hidden_range = {0, 1};
        report.runs.push_back(fake_run(net::Topology::MLP, 0, 0, 0.5, 0.9, 9.0));
        report.runs.push_back(fake_run(net::Topology::MLP, 1, 0, 0.5, 0.9, 1.0));
        CHECK(select_best(report) == 1);
    }
    SUBCASE("all diverged throws") {
        report.hidden_range = {0};
        auto run = fake_run(net::Topology::MLP, 0, 0, 0.5, 0.9, 1.0);
        run.diverged = true;
        run.test_eval.reset();
        report.runs.push_back(run);
        CHECK_THROWS_AS(select_best(report), DomainError);
    }
}

TEST_CASE("report rendering shapes") {
    SUBCASE("empty grid renders the header only") {
        CHECK(render_bench_csv(std::vector<RunRecord>{}) == "topology,metric\n");
    }
    SUBCASE("one cell renders 8 metric rows") {
        std::vector<RunRecord> records = {to_record(fake_run(net::Topology::MLP, 0, 0, 0.25, 0.9, 1.5))};
        const auto text = render_bench_csv(records);
        int lines = 0;
        for (char ch : text)
            if (ch == '\n') ++lines;
        CHECK(lines == 9); // header + 8 metrics
        CHECK(text.find("MLP,mse,0.25") != std::string::npos);
        CHECK(text.find("MLP,time_s,1.500") != std::string::npos);
    }
    SUBCASE("diverged cells render DIV") {
        auto run = fake_run(net::Topology::MLP, 0, 0, 0.25, 0.9, 1.5);
        run.diverged = true;
        run.stop_reason = train::StopReason::Diverged;
        run.test_eval.reset();
        const auto text = render_bench_csv({to_record(run)});
        CHECK(text.find("MLP,mse,DIV") != std::string::npos);
    }
}

TEST_CASE("archive round trip re-renders byte-identically") {
    const auto ds = synth::make_grid_dataset(30, 44);
    const auto report = run_sweep(tiny_spec(8), ds, counting_clock());

    const std::string dir = "test_bench_out";
    fs::remove_all(dir);
    write_report_files(report, dir);

    CHECK(fs::exists(fs::path(dir) / "bench.csv"));
    CHECK(fs::exists(fs::path(dir) / "bench.txt"));
    CHECK(fs::exists(fs::path(dir) / "provenance.txt"));

    // one curve and one model per run in the archive
    int n_curves = 0, n_models = 0;
    for (const auto& entry : fs::directory_iterator(fs::path(dir) / "runs")) {
        const auto name = entry.path().filename().string();
        if (name.find(".curve.csv") != std::string::npos) ++n_curves;
        if (name.find(".model") != std::string::npos) ++n_models;
    }
    CHECK(n_curves == 8);
    CHECK(n_models == 8);

    const auto records = load_archive_records((fs::path(dir) / "runs").string());
    CHECK(records.size() == report.runs.size());

    std::ifstream in(fs::path(dir) / "bench.csv");
    std::string original((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(render_bench_csv(records) == original);
    CHECK(render_bench_csv(records) == render_bench_csv(report));

    fs::remove_all(dir);
}

TEST_CASE("holdout_predict on a memorizable linear task") {
    // exactly representable target, positive everywhere; a trained linear
    // model should track it within a percent
    Rng rng(71);
    const int n = 50;
    Matrix inputs(n, 2), targets(n, 1);
    for (int i = 0; i < n; ++i) {
        inputs(i, 0) = uniform(rng, 0, 1);
        inputs(i, 1) = uniform(rng, 0, 1);
        targets(i, 0) = 0.3 * inputs(i, 0) + 0.2 * inputs(i, 1) + 0.4;
    }
    auto ds = synth::wrap_dataset(std::move(inputs), std::move(targets), synth::shuffled_roles(n, 2), false);

    net::NetworkSpec spec;
    spec.topology = net::Topology::MLP;
    spec.n_inputs = 2;
    spec.n_outputs = 1;
    train::TrainConfig cfg;
    cfg.seed = 4;
    cfg.epochs = 600;
    cfg.patience = 0;
    cfg.curve_control = false;
    cfg.step_hidden = cfg.step_output = 0.05;
    const auto outcome = train::train(net::build(spec, cfg.seed), ds, cfg);

    const auto table = holdout_predict(outcome.state, ds, data::SplitRole::Test);
    REQUIRE(!table.rows.empty());
    REQUIRE(table.trend_mean.has_value());
    CHECK(*table.trend_mean > 99.0);

    const std::string path = "test_bench_holdout.csv";
    write_holdout_csv(path, table);
    auto rows = csv::read_file(path);
    CHECK(rows[0].fields == std::vector<std::string>{"pollutant", "desired", "actual", "trend_pct"});
    CHECK(rows.size() == table.rows.size() + 1);
    fs::remove(path);

    // incompatible dataset raises the compatibility error
    auto wrong = synth::make_grid_dataset(20, 3);
    CHECK_THROWS_AS(holdout_predict(outcome.state, wrong, data::SplitRole::Test), ShapeError);
}

TEST_CASE("model bundle round trip") {
    const auto ds = synth::make_grid_dataset(20, 55);
    net::NetworkSpec spec;
    spec.topology = net::Topology::TLRN;
    spec.n_inputs = 3;
    spec.n_outputs = 2;
    spec.hidden = {4};
    spec.memory_depth = 5;
    ModelBundle bundle;
    bundle.state = net::build(spec, 321);
    bundle.norm = ds.norm;
    bundle.include_year = false;
    bundle.input_names = ds.input_names;
    bundle.target_names = ds.target_names;

    const std::string path = "test_bench_bundle.model";
    save_bundle(path, bundle);
    const auto loaded = load_bundle(path);
    CHECK(loaded.state.params == bundle.state.params);
    CHECK(loaded.include_year == false);
    CHECK(loaded.input_names == bundle.input_names);
    CHECK(loaded.target_names == bundle.target_names);
    REQUIRE(loaded.norm.targets.size() == bundle.norm.targets.size());
    CHECK(loaded.norm.targets[0].min == bundle.norm.targets[0].min);
    fs::remove(path);

    std::ofstream(path) << "garbage";
    CHECK_THROWS_AS(load_bundle(path), FormatError);
    fs::remove(path);
}

TEST_CASE("0-hidden cell loses to the hidden cells on a nonlinear task") {
    const auto ds = synth::make_xor_dataset(120, 66);
    SweepSpec spec;
    spec.topologies = {net::Topology::MLP};
    spec.hidden_range = {0, 1, 2};
    spec.restarts = 3;
    spec.nodes_per_hidden = 4;
    spec.base.epochs = 400;
    spec.base.patience = 0;
    spec.base.curve_control = false;
    spec.base.step_hidden = 0.2;
    spec.base.step_output = 0.05;
    spec.base.seed = 14;

    const auto report = run_sweep(spec, ds, counting_clock());
    const int flat = report.best_in_cell(0, 0);
    REQUIRE(flat >= 0);
    double best_hidden = std::numeric_limits<double>::infinity();
    for (int d = 1; d < 3; ++d) {
        const int idx = report.best_in_cell(0, d);
        REQUIRE(idx >= 0);
        best_hidden = std::min(best_hidden, report.runs[static_cast<std::size_t>(idx)].test_eval->mse);
    }
    CHECK(report.runs[static_cast<std::size_t>(flat)].test_eval->mse > best_hidden);
}

TEST_CASE("diverged runs are archived and flagged, never abort the sweep") {
    // raw 1e8-scale targets with a full-size step make the linear cells blow up
    Rng rng(81);
    const int n = 24;
    Matrix inputs(n, 2), targets(n, 1);
    for (int i = 0; i < n; ++i) {
        inputs(i, 0) = uniform(rng, 0, 1);
        inputs(i, 1) = uniform(rng, 0, 1);
        targets(i, 0) = 1e8;
    }
    auto ds = synth::wrap_dataset(std::move(inputs), std::move(targets), synth::shuffled_roles(n, 4), true);

    SweepSpec spec;
    spec.topologies = {net::Topology::MLP};
    spec.hidden_range = {0};
    spec.restarts = 2;
    spec.base.epochs = 40;
    spec.base.patience = 0;
    spec.base.curve_control = false;
    spec.base.step_hidden = spec.base.step_output = 1.0;
    spec.base.momentum_hidden = spec.base.momentum_output = 0.9;
    spec.base.seed = 1;

    const auto report = run_sweep(spec, ds, counting_clock());
    REQUIRE(report.runs.size() == 2);
    int diverged = 0;
    for (const auto& run : report.runs) {
        if (run.diverged) {
            ++diverged;
            CHECK(run.stop_reason == train::StopReason::Diverged);
            CHECK_FALSE(run.test_eval.has_value());
        }
    }
    CHECK(diverged == 2);
    CHECK(report.champion == -1);
    const auto text = render_bench_csv(report);
    CHECK(text.find("DIV") != std::string::npos);
}

TEST_CASE("sweep spec validation") {
    SweepSpec spec;
    spec.topologies.clear();
    CHECK_THROWS_AS(spec.validate(), DomainError);
    spec = {};
    spec.hidden_range = {5};
    CHECK_THROWS_AS(spec.validate(), DomainError);
    spec = {};
    spec.restarts = 0;
    CHECK_THROWS_AS(spec.validate(), DomainError);
}

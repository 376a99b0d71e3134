// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails.

#include "loadnet/bench.hpp"
#include "loadnet/csv.hpp"
#include "loadnet/dataset.hpp"
#include "loadnet/ipps.hpp"
#include "loadnet/metrics.hpp"
#include "loadnet/network.hpp"
#include "loadnet/rng.hpp"
#include "loadnet/trainer.hpp"

#include "../support/synth.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

using namespace loadnet;

namespace {

const std::string kFixtures = FIXTURES_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

// ---------------------------------------------------------------- criterion 1

Outcome gradient_oracle() {
    const double t0 = now_s();
    Rng rng(0xACCE01);
    double worst = 0.0;
    std::string worst_topo;

    auto check = [&](net::Topology t, const char* name, bool temporal, net::Recurrence rec) {
        for (int trial = 0; trial < 100; ++trial) {
            net::NetworkSpec spec;
            spec.topology = t;
            spec.n_inputs = 5;
            spec.n_outputs = 2;
            spec.hidden = {3};
            spec.memory_depth = 3;
            spec.n_centers = 4;
            spec.recurrence = rec;
            spec.output_transfer = trial % 2 == 0 ? net::Transfer::Linear : net::Transfer::Sigmoid;
            auto state = net::build(spec, rng());
            auto set = synth::random_samples(temporal ? 5 : 3, 5, 2, rng);
            const auto refs = set.refs();
            std::vector<double> analytic, fd;
            if (temporal) {
                auto ctx = net::make_context(spec);
                analytic = train::bptt_gradients(state, refs, ctx);
                fd = synth::fd_gradients(state, refs, &ctx);
            } else {
                analytic = train::gradients(state, refs);
                fd = synth::fd_gradients(state, refs, nullptr);
            }
            const double err = synth::max_rel_gradient_error(state, analytic, fd);
            if (err > worst) {
                worst = err;
                worst_topo = name;
            }
        }
    };

    check(net::Topology::MLP, "MLP", false, net::Recurrence::Partial);
    check(net::Topology::GFFN, "GFFN", false, net::Recurrence::Partial);
    check(net::Topology::RBF, "RBF", false, net::Recurrence::Partial);
    check(net::Topology::TLRN, "TLRN", true, net::Recurrence::Partial);
    check(net::Topology::RN, "RN(partial)", true, net::Recurrence::Partial);
    check(net::Topology::RN, "RN(full)", true, net::Recurrence::Full);

    const double elapsed = now_s() - t0;
    std::ostringstream detail;
    detail << "max rel err " << csv::format_g6(worst) << " (" << worst_topo << "), 600 trials, "
           << csv::format_fixed(elapsed, 1) << " s";
    return {worst < 1e-5 && elapsed < 120.0, detail.str()};
}

// ---------------------------------------------------------------- criterion 2

namespace reference {

double mse(const Matrix& d, const Matrix& y) {
    double s = 0.0;
    for (int i = 0; i < d.rows(); ++i)
        for (int j = 0; j < d.cols(); ++j) s += (d(i, j) - y(i, j)) * (d(i, j) - y(i, j));
    return s / (d.rows() * d.cols());
}

double nmse(const Matrix& d, const Matrix& y) {
    double denom = 0.0;
    for (int j = 0; j < d.cols(); ++j) {
        double s = 0.0, ss = 0.0;
        for (int i = 0; i < d.rows(); ++i) {
            s += d(i, j);
            ss += d(i, j) * d(i, j);
        }
        denom += ss - s * s / d.rows();
    }
    return d.cols() * (d.rows() * mse(d, y)) / denom;
}

double mae_signed(const std::vector<double>& a, const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) s += (a[t] - f[t]) / a[t];
    return s / static_cast<double>(a.size());
}

double mae_abs(const std::vector<double>& a, const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) s += std::fabs(a[t] - f[t]);
    return s / static_cast<double>(a.size());
}

double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (double v : x) mx += v;
    for (double v : y) my += v;
    mx /= n;
    my /= n;
    double num = 0.0, dx2 = 0.0, dy2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (y[i] - my) * (x[i] - mx);
        dx2 += (x[i] - mx) * (x[i] - mx);
        dy2 += (y[i] - my) * (y[i] - my);
    }
    return num / std::pow(dx2 * dy2, 0.5);
}

} // namespace reference

Outcome metric_oracle() {
    auto rel = [](double a, double b) {
        return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-300});
    };
    Rng rng(0xACCE02);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 11);
        const int p = 1 + static_cast<int>(rng() % 5);
        Matrix d(n, p), y(n, p);
        for (auto& v : d.data()) v = uniform(rng, 0.1, 10.0);
        for (auto& v : y.data()) v = uniform(rng, -10.0, 10.0);
        worst = std::max(worst, rel(metrics::mse(d, y), reference::mse(d, y)));
        worst = std::max(worst, rel(metrics::nmse(d, y), reference::nmse(d, y)));
        std::vector<double> a(d.data()), f(y.data());
        worst = std::max(worst, rel(metrics::mae_abs(a, f), reference::mae_abs(a, f)));
        const double mp_ref = reference::mae_signed(a, f);
        worst = std::max(worst,
                         std::fabs(metrics::mae_signed(a, f) - mp_ref) / std::max(1.0, std::fabs(mp_ref)));
        std::vector<double> x(static_cast<std::size_t>(n)), z(static_cast<std::size_t>(n));
        for (auto& v : x) v = uniform(rng, -3, 3);
        for (auto& v : z) v = uniform(rng, -3, 3);
        worst = std::max(worst, rel(metrics::pearson_r(x, z), reference::pearson_r(x, z)));
    }

    // hand-derived fixtures
    Matrix d(3, 1), y(3, 1);
    d(0, 0) = 1;
    d(1, 0) = 2;
    d(2, 0) = 3;
    y(0, 0) = y(1, 0) = y(2, 0) = 2;
    const bool nmse_exact = std::fabs(metrics::nmse(d, y) - 1.0) < 1e-15;
    const std::vector<double> px{1, 2, 3}, py{1, 2, 4};
    const bool r_exact = std::fabs(metrics::pearson_r(px, py) - 0.9819805060619659) < 1e-12;

    std::ostringstream detail;
    detail << "max rel err " << csv::format_g6(worst) << " over 1000 instances; NMSE=1.0 "
           << (nmse_exact ? "ok" : "FAIL") << ", R fixture " << (r_exact ? "ok" : "FAIL");
    return {worst < 1e-12 && nmse_exact && r_exact, detail.str()};
}

// ---------------------------------------------------------------- criterion 3

Outcome holdout_fixture() {
    const auto rows = csv::read_file(kFixtures + "/holdout_pairs.csv");
    std::vector<double> desired, actual;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        desired.push_back(csv::parse_double(rows[i].fields[1], "desired", rows[i].line));
        actual.push_back(csv::parse_double(rows[i].fields[2], "actual", rows[i].line));
    }
    const auto trend = metrics::trend_accuracy(desired, actual);
    const bool so2_ok = std::fabs(trend.per_item[0] - 88.10) <= 0.01;
    const bool mean_ok = trend.mean >= 80.0 && trend.mean <= 90.0;
    std::ostringstream detail;
    detail << "SO2 row " << csv::format_fixed(trend.per_item[0], 4) << "%, mean "
           << csv::format_fixed(trend.mean, 2) << "%";
    return {so2_ok && mean_ok && trend.per_item.size() == 14, detail.str()};
}

// ---------------------------------------------------------------- criterion 4

double best_of_restarts_test_mse(const net::NetworkSpec& spec, const data::EncodedDataset& ds,
                                 const train::TrainConfig& cfg, int restarts) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < restarts; ++i) {
        train::TrainConfig run_cfg = cfg;
        run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(i);
        auto outcome = train::train(net::build(spec, run_cfg.seed), ds, run_cfg);
        if (outcome.reason == train::StopReason::Diverged) continue;
        best = std::min(best, train::evaluate_mse(outcome.state, ds, data::SplitRole::Test));
    }
    return best;
}

Outcome nonlinearity_separation() {
    const double t0 = now_s();
    const auto ds = synth::make_xor_dataset(200, 0xACCE04);

    train::TrainConfig cfg;
    cfg.seed = 40;
    cfg.epochs = 1000;
    cfg.patience = 0;
    cfg.curve_control = false;
    cfg.step_hidden = 0.2;
    cfg.step_output = 0.05;

    net::NetworkSpec linear;
    linear.topology = net::Topology::MLP;
    linear.n_inputs = 2;
    linear.n_outputs = 1;
    const double mse0 = best_of_restarts_test_mse(linear, ds, cfg, 5);

    net::NetworkSpec hidden = linear;
    hidden.hidden = {4};
    const double mse1 = best_of_restarts_test_mse(hidden, ds, cfg, 5);
    const bool deterministic = best_of_restarts_test_mse(hidden, ds, cfg, 5) == mse1;

    const double elapsed = now_s() - t0;
    std::ostringstream detail;
    detail << "0-hidden test MSE " << csv::format_g6(mse0) << " (> 0.2), 1-hidden " << csv::format_g6(mse1)
           << " (< 0.05), " << (deterministic ? "deterministic" : "NONDETERMINISTIC") << ", "
           << csv::format_fixed(elapsed, 1) << " s";
    return {mse0 > 0.2 && mse1 < 0.05 && deterministic && elapsed < 60.0, detail.str()};
}

// ---------------------------------------------------------------- criterion 5

double best_test_r(const net::NetworkSpec& spec, const data::EncodedDataset& ds,
                   const train::TrainConfig& cfg, int restarts) {
    double best_mse = std::numeric_limits<double>::infinity();
    double best_r = -1.0;
    const auto test_rows = ds.rows_with_role(data::SplitRole::Test);
    for (int i = 0; i < restarts; ++i) {
        train::TrainConfig run_cfg = cfg;
        run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(i);
        auto outcome = train::train(net::build(spec, run_cfg.seed), ds, run_cfg);
        if (outcome.reason == train::StopReason::Diverged) continue;
        const Matrix pred = train::predict_all(outcome.state, ds);
        std::vector<double> d, y;
        for (int row : test_rows) {
            d.push_back(ds.targets(row, 0));
            y.push_back(pred(row, 0));
        }
        const double mse = train::evaluate_mse(outcome.state, ds, data::SplitRole::Test);
        if (mse < best_mse) {
            best_mse = mse;
            try {
                best_r = metrics::pearson_r(y, d);
            } catch (const UndefinedMetricError&) {
                best_r = 0.0; // constant prediction carries no direction
            }
        }
    }
    return best_r;
}

Outcome temporal_advantage() {
    const double t0 = now_s();
    const auto ds = synth::make_lagged_series(500, 0xACCE05);

    train::TrainConfig cfg;
    cfg.seed = 50;
    cfg.epochs = 250;
    cfg.patience = 25;
    cfg.curve_control = false;
    cfg.step_hidden = 0.01;
    cfg.step_output = 0.01;
    cfg.trajectory_length = 10;

    net::NetworkSpec tlrn;
    tlrn.topology = net::Topology::TLRN;
    tlrn.n_inputs = 1;
    tlrn.n_outputs = 1;
    tlrn.memory_depth = 10;
    const double r_tlrn = best_test_r(tlrn, ds, cfg, 5);

    net::NetworkSpec mlp;
    mlp.topology = net::Topology::MLP;
    mlp.n_inputs = 1;
    mlp.n_outputs = 1;
    mlp.hidden = {4};
    const double r_mlp = best_test_r(mlp, ds, cfg, 5);

    const double elapsed = now_s() - t0;
    std::ostringstream detail;
    detail << "TLRN test R " << csv::format_fixed(r_tlrn, 4) << " (>= 0.9), MLP "
           << csv::format_fixed(r_mlp, 4) << " (gap >= 0.2), " << csv::format_fixed(elapsed, 1) << " s";
    return {r_tlrn >= 0.9 && r_mlp <= r_tlrn - 0.2 && elapsed < 300.0, detail.str()};
}

// ---------------------------------------------------------------- criterion 6

Outcome sweep_protocol_shape() {
    const auto ds = synth::make_grid_dataset(60, 0xACCE06);

    bench::SweepSpec spec; // all five topologies, depths 0..4
    spec.restarts = 5;
    spec.nodes_per_hidden = 5;
    spec.memory_depth = 10;
    spec.rbf_centers = 80; // clamps to the 36 TRAIN rows
    spec.base.epochs = 20;
    spec.base.patience = 0;
    spec.base.curve_control = false;
    spec.base.step_hidden = 0.1;
    spec.base.step_output = 0.05;
    spec.base.trajectory_length = 10;
    spec.base.seed = 60;

    auto clock = [] {
        auto counter = std::make_shared<int>(0);
        bench::SweepHooks hooks;
        hooks.now_seconds = [counter]() { return 0.001 * (*counter)++; };
        return hooks;
    };

    const auto a = bench::run_sweep(spec, ds, clock());
    const auto b = bench::run_sweep(spec, ds, clock());

    const bool count_ok = a.runs.size() == 125 && b.runs.size() == 125;
    const auto csv_a = bench::render_bench_csv(a);
    const bool identical = csv_a == bench::render_bench_csv(b);

    // 8 metric rows per topology, 5 topologies, plus the header
    int lines = 0;
    for (char ch : csv_a)
        if (ch == '\n') ++lines;
    const bool shape_ok = lines == 1 + 8 * 5;

    // regeneration from the archive is byte-identical
    const std::string dir = "acceptance_sweep_out";
    std::filesystem::remove_all(dir);
    bench::write_report_files(a, dir);
    const auto records = bench::load_archive_records(dir + "/runs");
    const bool regen_ok = bench::render_bench_csv(records) == csv_a;
    std::filesystem::remove_all(dir);

    std::ostringstream detail;
    detail << a.runs.size() << " archived runs, " << lines - 1 << " report rows, rerun "
           << (identical ? "byte-identical" : "DIFFERS") << ", regeneration "
           << (regen_ok ? "byte-identical" : "DIFFERS");
    return {count_ok && identical && shape_ok && regen_ok, detail.str()};
}

// ---------------------------------------------------------------- criterion 7

Outcome ipps_properties() {
    const auto table = ipps::load_intensity_table(kFixtures + "/ref_intensity.csv",
                                                  kFixtures + "/ref_intensity.cfg");
    const auto records = ipps::load_activity_records(kFixtures + "/ref_activity.csv");

    auto loads_for = [&](double factor) {
        std::vector<ipps::LoadEstimate> loads;
        for (auto rec : records) {
            rec.employment = static_cast<long long>(rec.employment * factor);
            auto est = ipps::estimate_sector_year(table, rec);
            loads.insert(loads.end(), est.begin(), est.end());
        }
        return loads;
    };

    bool rank_invariant = true;
    const auto base_loads = loads_for(1.0);
    const auto scaled_loads = loads_for(1000.0);
    for (ipps::Pollutant p :
         {ipps::Pollutant::SO2, ipps::Pollutant::NO2, ipps::Pollutant::TCAIR, ipps::Pollutant::TCLAND}) {
        const auto a = ipps::rank_sectors(base_loads, p);
        const auto b = ipps::rank_sectors(scaled_loads, p);
        if (a.size() != b.size()) rank_invariant = false;
        for (std::size_t i = 0; rank_invariant && i < a.size(); ++i)
            if (a[i].first != b[i].first) rank_invariant = false;
    }

    double grand = 0.0;
    for (const auto& le : base_loads) grand += le.load;
    double by_medium = 0.0;
    for (const auto& [m, v] : ipps::aggregate_by_medium(base_loads)) by_medium += v;
    const bool conserve_ok = std::fabs(by_medium - grand) <= 1e-9 * std::fabs(grand);

    // spreadsheet arithmetic oracle
    const auto expected = csv::read_file(kFixtures + "/ref_expected_loads.csv");
    bool loads_ok = expected.size() - 1 == base_loads.size();
    for (std::size_t i = 1; loads_ok && i < expected.size(); ++i) {
        const double want = csv::parse_double(expected[i].fields[3], "load", expected[i].line);
        const double got = base_loads[i - 1].load;
        if (std::fabs(got - want) > 1e-9 * std::max(1.0, std::fabs(want))) loads_ok = false;
    }

    std::ostringstream detail;
    detail << "rank invariance " << (rank_invariant ? "exact" : "FAIL") << ", medium conservation "
           << (conserve_ok ? "<=1e-9" : "FAIL") << ", " << base_loads.size()
           << " fixture loads vs spreadsheet " << (loads_ok ? "ok" : "FAIL");
    return {rank_invariant && conserve_ok && loads_ok, detail.str()};
}

// ---------------------------------------------------------------- criterion 8

Outcome heuristic_fixtures() {
    const bool k_ok = net::kolmogorov_hidden(25) == 51;
    const bool l1 = net::lallahem_feasible(25, 10, 14, 5000);
    const bool l2 = !net::lallahem_feasible(25, 20, 14, 5000);
    std::ostringstream detail;
    detail << "kolmogorov(25)=" << net::kolmogorov_hidden(25) << ", lallahem(25,10,14,5000)="
           << (l1 ? "true" : "false") << ", lallahem(25,20,14,5000)=" << (l2 ? "false" : "true");
    return {k_ok && l1 && l2, detail.str()};
}

// ---------------------------------------------------------------- criterion 9

Outcome early_stopping_contract() {
    const auto ds = synth::make_grid_dataset(30, 0xACCE09);
    net::NetworkSpec spec;
    spec.topology = net::Topology::MLP;
    spec.n_inputs = 3;
    spec.n_outputs = 2;
    spec.hidden = {3};

    const int total = 40;
    bool all_ok = true;
    for (int m : {5, 12, 20}) {
        std::vector<std::vector<double>> snapshots;
        train::TrainHooks hooks;
        hooks.cv_mse_override = [&](int epoch, const net::NetworkState& s) {
            snapshots.push_back(s.params);
            return 1.0 + 0.05 * std::abs(epoch - m); // clear minimum at epoch m
        };
        for (int patience : {1, 5, total - m - 1}) {
            if (patience < 1) continue;
            snapshots.clear();
            train::TrainConfig cfg;
            cfg.seed = 90;
            cfg.epochs = total;
            cfg.patience = patience;
            cfg.curve_control = false;
            auto outcome = train::train(net::build(spec, cfg.seed), ds, cfg, hooks);
            const bool ok = outcome.best_epoch == m &&
                            outcome.state.params == snapshots[static_cast<std::size_t>(m - 1)] &&
                            outcome.reason == train::StopReason::EarlyStop;
            if (!ok) all_ok = false;
        }
    }
    std::ostringstream detail;
    detail << "minima at epochs {5,12,20} x patience {1,5,total-m-1}: "
           << (all_ok ? "snapshot always from the minimum epoch" : "FAIL");
    return {all_ok, detail.str()};
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria = {
        {"1 gradient oracle (finite differences, 5 topologies)", gradient_oracle},
        {"2 metric oracle equivalence (brute-force reference)", metric_oracle},
        {"3 holdout trend fixture", holdout_fixture},
        {"4 nonlinearity separation (XOR regression)", nonlinearity_separation},
        {"5 temporal advantage (lagged series)", temporal_advantage},
        {"6 sweep protocol shape (125 runs, byte-identical)", sweep_protocol_shape},
        {"7 IPPS properties (ranking, media, reference loads)", ipps_properties},
        {"8 heuristic fixtures (Kolmogorov, Lallahem)", heuristic_fixtures},
        {"9 early-stopping contract (injected CV curves)", early_stopping_contract},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        Outcome outcome;
        try {
            outcome = c.fn();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (outcome.pass ? "[PASS] " : "[FAIL] ") << "criterion " << c.name << " — "
                  << outcome.detail << '\n';
        if (!outcome.pass) ++failures;
    }
    if (failures == 0)
        std::cout << "all " << criteria.size() << " acceptance criteria passed\n";
    else
        std::cout << failures << " acceptance criteria failed\n";
    return failures;
}

// loadnet command-line interface: estimate, prepare, train, sweep, predict, report.

#include "loadnet/bench.hpp"
#include "loadnet/csv.hpp"
#include "loadnet/dataset.hpp"
#include "loadnet/ipps.hpp"
#include "loadnet/metrics.hpp"
#include "loadnet/network.hpp"
#include "loadnet/trainer.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using namespace loadnet;

namespace {

// Reproducibility is the point: seeds default to a fixed constant and
// `--seed random` opts out.
constexpr std::uint64_t kDefaultSeed = 1997;

std::uint64_t resolve_seed(const std::string& seed_arg, std::uint64_t config_seed, bool config_has_seed) {
    if (seed_arg == "random") return std::random_device{}();
    if (!seed_arg.empty()) return std::stoull(seed_arg);
    if (config_has_seed) return config_seed;
    return kDefaultSeed;
}

// Key-value config with defaults, remembering what was resolved for the log.
class Config {
public:
    Config() = default;
    explicit Config(const std::string& path) {
        if (!path.empty()) kv_ = csv::read_kv_file(path);
    }

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string get(const std::string& key, const std::string& fallback) {
        auto it = kv_.find(key);
        const bool defaulted = it == kv_.end();
        const std::string value = defaulted ? fallback : it->second;
        resolved_.emplace_back(key + "=" + value + (defaulted ? " (default)" : ""));
        return value;
    }
    double get_double(const std::string& key, double fallback) {
        return csv::parse_double(get(key, csv::format_exact(fallback)), key, 0);
    }
    int get_int(const std::string& key, int fallback) {
        return static_cast<int>(csv::parse_int(get(key, std::to_string(fallback)), key, 0));
    }
    bool get_bool(const std::string& key, bool fallback) {
        return get(key, fallback ? "1" : "0") != "0";
    }

    void log(std::ostream& out) const {
        out << "resolved config:\n";
        for (const auto& line : resolved_) out << "  " << line << '\n';
    }

private:
    std::map<std::string, std::string> kv_;
    std::vector<std::string> resolved_;
};

std::vector<std::string> split_list(const std::string& s) {
    auto fields = csv::split_line(s);
    std::vector<std::string> out;
    for (auto& f : fields)
        if (!f.empty()) out.push_back(f);
    return out;
}

train::TrainConfig read_train_config(Config& cfg, std::uint64_t seed) {
    train::TrainConfig tc;
    const double step = cfg.get_double("step_size", tc.step_hidden);
    tc.step_hidden = cfg.get_double("step_size_hidden", step);
    tc.step_output = cfg.get_double("step_size_output", step);
    tc.momentum_hidden = cfg.get_double("momentum", tc.momentum_hidden);
    tc.momentum_hidden = cfg.get_double("momentum_hidden", tc.momentum_hidden);
    tc.momentum_output = cfg.get_double("momentum_output", tc.momentum_output);
    tc.epochs = cfg.get_int("epochs", tc.epochs);
    tc.mode = cfg.get("mode", "online") == "batch" ? train::Mode::Batch : train::Mode::Online;
    tc.patience = cfg.get_int("patience", tc.patience);
    tc.restarts = cfg.get_int("restarts", tc.restarts);
    tc.seed = seed;
    tc.trajectory_length = cfg.get_int("trajectory_length", tc.trajectory_length);
    tc.curve_control = cfg.get_bool("curve_control", tc.curve_control);
    tc.curve_window = cfg.get_int("curve_window", tc.curve_window);
    return tc;
}

struct DatasetArgs {
    std::string data_csv;
    std::string split_mode = "random"; // or "chrono"
    bool include_year = true;
    std::uint64_t seed = kDefaultSeed;
};

data::EncodedDataset prepare_dataset(const DatasetArgs& args, std::vector<data::RawRow>* rows_out = nullptr) {
    auto rows = data::load_rows(args.data_csv);
    data::SplitAssignment assignment;
    if (args.split_mode == "chrono")
        assignment = data::split_chronological(rows, {});
    else
        assignment = data::split(rows, {}, args.seed);
    data::EncodeOptions opts;
    opts.include_year = args.include_year;
    auto ds = data::encode_dataset(rows, assignment, opts);
    if (rows_out) *rows_out = std::move(rows);
    return ds;
}

bench::ModelBundle make_bundle(const net::NetworkState& state, const data::EncodedDataset& ds) {
    bench::ModelBundle bundle;
    bundle.state = state;
    bundle.norm = ds.norm;
    bundle.include_year = ds.include_year;
    bundle.input_names = ds.input_names;
    bundle.target_names = ds.target_names;
    return bundle;
}

int cmd_estimate(const std::string& intensity_csv, const std::string& intensity_cfg,
                 const std::string& activity_csv, const std::string& out_csv) {
    try {
        const auto table = ipps::load_intensity_table(intensity_csv, intensity_cfg);
        const auto records = ipps::load_activity_records(activity_csv);
        std::vector<ipps::LoadEstimate> loads;
        for (const auto& rec : records) {
            auto estimates = ipps::estimate_sector_year(table, rec);
            loads.insert(loads.end(), estimates.begin(), estimates.end());
        }
        ipps::write_load_estimates(out_csv, loads);
        std::cout << "wrote " << loads.size() << " load estimates to " << out_csv << '\n';
        std::cout << "totals by medium (ton/yr):\n";
        for (const auto& [medium, total] : ipps::aggregate_by_medium(loads))
            std::cout << "  " << ipps::to_string(medium) << ' ' << csv::format_g6(total) << '\n';
        return 0;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const LookupError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

int cmd_prepare(const DatasetArgs& args, const std::string& out_dir) {
    std::vector<data::RawRow> rows;
    const auto ds = prepare_dataset(args, &rows);
    fs::create_directories(out_dir);
    data::save_normalizer((fs::path(out_dir) / "normalizer.txt").string(), ds.norm);
    {
        std::ofstream out(fs::path(out_dir) / "split.csv");
        out << "index,sector,year,role\n";
        for (std::size_t i = 0; i < rows.size(); ++i)
            out << i << ',' << ipps::to_string(rows[i].sector) << ',' << rows[i].year << ','
                << data::to_string(ds.roles[i]) << '\n';
    }
    int n_train = 0, n_cv = 0, n_test = 0;
    for (auto r : ds.roles) {
        if (r == data::SplitRole::Train) ++n_train;
        else if (r == data::SplitRole::CrossValidation) ++n_cv;
        else ++n_test;
    }
    std::cout << "rows " << rows.size() << " split " << n_train << '/' << n_cv << '/' << n_test
              << " inputs " << ds.n_inputs() << " targets " << ds.n_targets() << " clamp_warnings "
              << ds.clamp_warnings << '\n';
    // hidden-layer sizing guidance
    const int kolmogorov = net::kolmogorov_hidden(ds.n_inputs());
    std::cout << "hidden sizing: 2n+1 rule suggests " << kolmogorov << " nodes; "
              << "14 hidden nodes " << (net::lallahem_feasible(ds.n_inputs(), 14, ds.n_targets(), n_train)
                                            ? "fit"
                                            : "exceed")
              << " the pattern-count bound for " << n_train << " training rows\n";
    std::cout << "wrote " << out_dir << "/normalizer.txt and split.csv\n";
    return 0;
}

int cmd_train(const DatasetArgs& args, Config& cfg, const std::string& out_dir) {
    const auto ds = prepare_dataset(args);
    auto tc = read_train_config(cfg, args.seed);

    net::NetworkSpec spec;
    spec.topology = net::topology_from_string(cfg.get("topology", "MLP"));
    spec.n_inputs = ds.n_inputs();
    spec.n_outputs = ds.n_targets();
    spec.hidden.assign(static_cast<std::size_t>(cfg.get_int("hidden_layers", 1)),
                       cfg.get_int("nodes_per_hidden", 14));
    spec.memory_depth = cfg.get_int("memory_depth", 10);
    spec.n_centers = std::min(cfg.get_int("rbf_centers", 80),
                              static_cast<int>(ds.rows_with_role(data::SplitRole::Train).size()));
    spec.recurrence = cfg.get("recurrence", "partial") == "full" ? net::Recurrence::Full : net::Recurrence::Partial;
    spec.output_transfer =
        cfg.get("output_transfer", "linear") == "sigmoid" ? net::Transfer::Sigmoid : net::Transfer::Linear;

    cfg.log(std::cout);
    std::cout << "seed " << args.seed << '\n';

    const auto result = train::multi_restart_train(spec, ds, tc);
    if (result.best_index < 0) {
        std::cerr << "error: every restart diverged\n";
        return 3;
    }
    const auto& best = result.runs[static_cast<std::size_t>(result.best_index)];

    fs::create_directories(out_dir);
    bench::save_bundle((fs::path(out_dir) / "model.bundle").string(), make_bundle(best.state, ds));
    train::save_curve((fs::path(out_dir) / "curve.csv").string(), best.curve);

    std::cout << "best restart " << result.best_index << " stop " << train::to_string(best.reason)
              << " best_epoch " << best.best_epoch << " cv_mse " << csv::format_g6(best.best_cv_mse) << '\n';
    if (!ds.rows_with_role(data::SplitRole::Test).empty())
        std::cout << "test_mse " << csv::format_g6(train::evaluate_mse(best.state, ds, data::SplitRole::Test))
                  << '\n';
    std::cout << "wrote " << out_dir << "/model.bundle and curve.csv\n";
    return 0;
}

int cmd_sweep(const DatasetArgs& args, Config& cfg, const std::string& out_dir, int jobs) {
    const auto ds = prepare_dataset(args);

    bench::SweepSpec spec;
    spec.base = read_train_config(cfg, args.seed);
    if (cfg.has("topologies")) {
        spec.topologies.clear();
        for (const auto& name : split_list(cfg.get("topologies", "")))
            spec.topologies.push_back(net::topology_from_string(name));
    } else {
        cfg.get("topologies", "MLP,GFFN,RBF,TLRN,RN");
    }
    if (cfg.has("hidden_range")) {
        spec.hidden_range.clear();
        for (const auto& d : split_list(cfg.get("hidden_range", "")))
            spec.hidden_range.push_back(static_cast<int>(csv::parse_int(d, "hidden_range", 0)));
    } else {
        cfg.get("hidden_range", "0,1,2,3,4");
    }
    spec.restarts = cfg.get_int("restarts", spec.base.restarts);
    spec.nodes_per_hidden = cfg.get_int("nodes_per_hidden", 14);
    spec.memory_depth = cfg.get_int("memory_depth", 10);
    spec.rbf_centers = cfg.get_int("rbf_centers", 80);
    spec.recurrence = cfg.get("recurrence", "partial") == "full" ? net::Recurrence::Full : net::Recurrence::Partial;
    spec.output_transfer =
        cfg.get("output_transfer", "linear") == "sigmoid" ? net::Transfer::Sigmoid : net::Transfer::Linear;
    spec.temporal_step_scale = cfg.get_double("temporal_step_scale", spec.temporal_step_scale);
    spec.jobs = jobs;

    cfg.log(std::cout);
    std::cout << "seed " << args.seed << " jobs " << jobs << '\n';

    const auto report = bench::run_sweep(spec, ds);
    bench::write_report_files(report, out_dir);
    if (report.champion < 0) {
        std::cerr << "error: every run diverged\n";
        return 3;
    }
    const auto& champ = report.runs[static_cast<std::size_t>(report.champion)];
    bench::save_bundle((fs::path(out_dir) / "champion.model").string(), make_bundle(champ.model, ds));

    std::cout << "champion " << net::to_string(champ.topology) << " hidden " << champ.hidden_layers
              << " restart " << champ.restart << " test_mse " << csv::format_g6(champ.test_eval->mse)
              << " r "
              << (champ.test_eval->r_mean ? csv::format_g6(*champ.test_eval->r_mean) : std::string("NA"))
              << " time_s " << csv::format_fixed(champ.wall_time_s, 3) << '\n';
    std::cout << "wrote " << out_dir << "/bench.csv, bench.txt, runs/, champion.model\n";
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& rows_csv, const std::string& out_csv) {
    bench::ModelBundle bundle;
    try {
        bundle = bench::load_bundle(model_path);
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    try {
        const auto rows = data::load_rows(rows_csv);
        data::EncodeOptions opts;
        opts.include_year = bundle.include_year;

        data::EncodedDataset ds;
        ds.include_year = bundle.include_year;
        ds.norm = bundle.norm;
        ds.input_names = data::input_names(opts);
        ds.target_names = bundle.target_names;
        if (ds.input_names != bundle.input_names)
            throw ShapeError("model schema does not match the pollution-load dataset schema");
        ds.roles.assign(rows.size(), data::SplitRole::Test);
        ds.sequences = data::make_sequences(rows);
        ds.inputs = Matrix(static_cast<int>(rows.size()), static_cast<int>(ds.input_names.size()));
        ds.targets = Matrix(static_cast<int>(rows.size()), static_cast<int>(ds.target_names.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto in = data::encode_row(rows[i], ds.norm, opts, &ds.clamp_warnings);
            auto tg = data::encode_targets(rows[i], ds.norm, &ds.clamp_warnings);
            std::copy(in.begin(), in.end(), ds.inputs.row(static_cast<int>(i)).begin());
            std::copy(tg.begin(), tg.end(), ds.targets.row(static_cast<int>(i)).begin());
        }

        const auto table = bench::holdout_predict(bundle.state, ds, data::SplitRole::Test);
        bench::write_holdout_csv(out_csv, table);
        std::cout << "wrote " << table.rows.size() << " predictions to " << out_csv << '\n';
        if (table.trend_mean)
            std::cout << "mean trend " << csv::format_fixed(*table.trend_mean, 2) << "%\n";
        return 0;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}

int cmd_report(const std::string& runs_dir, const std::string& out_dir) {
    const auto records = bench::load_archive_records(runs_dir);
    fs::create_directories(out_dir);
    {
        std::ofstream out(fs::path(out_dir) / "bench.csv");
        out << bench::render_bench_csv(records);
    }
    {
        std::ofstream out(fs::path(out_dir) / "bench.txt");
        out << bench::render_bench_text(records);
    }
    std::cout << "regenerated bench.csv and bench.txt from " << records.size() << " archived runs\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"loadnet: sectoral pollution-load estimation and neural topology benchmarking"};
    app.require_subcommand(1);

    std::string seed_arg, config_path, out_path, split_mode = "random";
    bool include_year = true;
    int jobs = 1;

    // estimate
    auto* estimate = app.add_subcommand("estimate", "estimate pollution loads from intensities and activity");
    std::string intensity_csv, intensity_cfg, activity_csv;
    estimate->add_option("--intensity", intensity_csv, "intensity CSV (sector,pollutant,intensity)")->required();
    estimate->add_option("--intensity-config", intensity_cfg, "sidecar config with basis and scale")->required();
    estimate->add_option("--activity", activity_csv, "activity CSV (sector,year,employment,output_value)")->required();
    estimate->add_option("--out", out_path, "output load CSV")->required();

    // shared dataset options
    std::string data_csv;
    auto add_dataset_opts = [&](CLI::App* sub) {
        sub->add_option("--data", data_csv, "dataset CSV")->required();
        sub->add_option("--seed", seed_arg, "seed (integer or 'random')");
        sub->add_option("--split", split_mode, "split mode: random or chrono");
        sub->add_flag("--include-year,!--no-include-year", include_year, "include year as an input");
    };

    auto* prepare = app.add_subcommand("prepare", "fit the normalizer and split, write artifacts");
    add_dataset_opts(prepare);
    prepare->add_option("--out", out_path, "output directory")->required();

    auto* train_cmd = app.add_subcommand("train", "train one topology with restarts");
    add_dataset_opts(train_cmd);
    train_cmd->add_option("--config", config_path, "key-value training config");
    train_cmd->add_option("--out", out_path, "output directory")->required();

    auto* sweep = app.add_subcommand("sweep", "run the full topology-by-depth benchmark grid");
    add_dataset_opts(sweep);
    sweep->add_option("--config", config_path, "key-value sweep config");
    sweep->add_option("--out", out_path, "output directory")->required();
    sweep->add_option("--jobs", jobs, "worker pool width");

    auto* predict = app.add_subcommand("predict", "predict loads for rows with a trained model");
    std::string model_path, rows_csv;
    predict->add_option("--model", model_path, "model bundle path")->required();
    predict->add_option("--rows", rows_csv, "rows CSV (dataset schema)")->required();
    predict->add_option("--out", out_path, "output CSV")->required();

    auto* report = app.add_subcommand("report", "regenerate bench reports from a runs archive");
    std::string runs_dir;
    report->add_option("--runs", runs_dir, "runs archive directory")->required();
    report->add_option("--out", out_path, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(estimate))
            return cmd_estimate(intensity_csv, intensity_cfg, activity_csv, out_path);

        Config cfg(config_path);
        DatasetArgs args;
        args.data_csv = data_csv;
        args.split_mode = split_mode;
        args.include_year = include_year;
        const std::uint64_t cfg_seed =
            cfg.has("seed") ? std::stoull(cfg.get("seed", std::to_string(kDefaultSeed))) : kDefaultSeed;
        args.seed = resolve_seed(seed_arg, cfg_seed, cfg.has("seed"));

        if (app.got_subcommand(prepare)) return cmd_prepare(args, out_path);
        if (app.got_subcommand(train_cmd)) return cmd_train(args, cfg, out_path);
        if (app.got_subcommand(sweep)) return cmd_sweep(args, cfg, out_path, jobs);
        if (app.got_subcommand(predict)) return cmd_predict(model_path, rows_csv, out_path);
        if (app.got_subcommand(report)) return cmd_report(runs_dir, out_path);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

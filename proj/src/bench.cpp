#include "loadnet/bench.hpp"

#include "loadnet/csv.hpp"
#include "loadnet/rng.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace loadnet::bench {

namespace fs = std::filesystem;

void SweepSpec::validate() const {
    if (topologies.empty()) throw DomainError("sweep needs at least one topology");
    for (int d : hidden_range)
        if (d < 0 || d > 4) throw DomainError("hidden range must lie within [0, 4]");
    if (hidden_range.empty()) throw DomainError("sweep needs at least one hidden depth");
    if (restarts < 1) throw DomainError("sweep needs at least one restart");
    if (nodes_per_hidden < 1) throw DomainError("nodes per hidden layer must be >= 1");
    if (!(temporal_step_scale > 0.0 && temporal_step_scale <= 1.0))
        throw DomainError("temporal step scale must lie in (0, 1]");
    if (jobs < 1) throw DomainError("jobs must be >= 1");
    base.validate();
}

RunRecord to_record(const RunResult& run) {
    RunRecord rec;
    rec.topology = std::string(net::to_string(run.topology));
    rec.hidden_layers = run.hidden_layers;
    rec.restart = run.restart;
    rec.seed = run.seed;
    rec.wall_time_s = run.wall_time_s;
    rec.epochs = run.final_epoch;
    rec.stop_reason = std::string(train::to_string(run.stop_reason));
    rec.diverged = run.diverged;
    rec.cv_mse = run.cv_mse;
    if (run.test_eval) {
        rec.mse = run.test_eval->mse;
        rec.nmse = run.test_eval->nmse;
        rec.mae = run.test_eval->mae_abs;
        rec.min_abs_err = run.test_eval->min_abs_err;
        rec.max_abs_err = run.test_eval->max_abs_err;
        rec.r = run.test_eval->r_mean;
    }
    return rec;
}

const RunResult& BenchReport::run_at(int topo_idx, int depth_idx, int restart) const {
    const std::size_t idx = (static_cast<std::size_t>(topo_idx) * hidden_range.size() + depth_idx) * restarts + restart;
    return runs.at(idx);
}

int BenchReport::best_in_cell(int topo_idx, int depth_idx) const {
    int best = -1;
    for (int r = 0; r < restarts; ++r) {
        const std::size_t idx =
            (static_cast<std::size_t>(topo_idx) * hidden_range.size() + depth_idx) * restarts + r;
        const auto& run = runs[idx];
        if (run.diverged || !run.test_eval) continue;
        if (best < 0 || run.test_eval->mse < runs[static_cast<std::size_t>(best)].test_eval->mse)
            best = static_cast<int>(idx);
    }
    return best;
}

namespace {

metrics::EvalReport evaluate_role(const net::NetworkState& state, const data::EncodedDataset& ds,
                                  data::SplitRole role) {
    const auto rows = ds.rows_with_role(role);
    if (rows.empty()) throw DomainError("dataset has no rows for evaluation role");
    const Matrix pred = train::predict_all(state, ds);
    Matrix d(static_cast<int>(rows.size()), ds.n_targets());
    Matrix y(static_cast<int>(rows.size()), ds.n_targets());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        auto dr = ds.targets.row(rows[k]);
        auto yr = pred.row(rows[k]);
        std::copy(dr.begin(), dr.end(), d.row(static_cast<int>(k)).begin());
        std::copy(yr.begin(), yr.end(), y.row(static_cast<int>(k)).begin());
    }
    return metrics::evaluate(d, y);
}

double default_now() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

} // namespace

BenchReport run_sweep(const SweepSpec& spec, const data::EncodedDataset& ds, const SweepHooks& hooks) {
    spec.validate();
    const std::function<double()> now = hooks.now_seconds ? hooks.now_seconds : std::function<double()>(default_now);
    const int n_train = static_cast<int>(ds.rows_with_role(data::SplitRole::Train).size());
    if (n_train < 1) throw DomainError("dataset has no TRAIN rows");

    BenchReport report;
    report.topologies = spec.topologies;
    report.hidden_range = spec.hidden_range;
    report.restarts = spec.restarts;
    report.master_seed = spec.base.seed;
    report.config_hash = config_hash(spec);
    report.runs.resize(spec.topologies.size() * spec.hidden_range.size() * static_cast<std::size_t>(spec.restarts));

    struct WorkItem {
        std::size_t index;
        net::Topology topology;
        int topo_idx, depth, restart;
    };
    std::vector<WorkItem> work;
    for (std::size_t t = 0; t < spec.topologies.size(); ++t)
        for (std::size_t d = 0; d < spec.hidden_range.size(); ++d)
            for (int r = 0; r < spec.restarts; ++r)
                work.push_back({(t * spec.hidden_range.size() + d) * static_cast<std::size_t>(spec.restarts) +
                                    static_cast<std::size_t>(r),
                                spec.topologies[t], static_cast<int>(t), spec.hidden_range[d], r});

    auto run_one = [&](const WorkItem& item) {
        net::NetworkSpec ns;
        ns.topology = item.topology;
        ns.n_inputs = ds.n_inputs();
        ns.n_outputs = ds.n_targets();
        ns.hidden.assign(static_cast<std::size_t>(item.depth), spec.nodes_per_hidden);
        ns.output_transfer = spec.output_transfer;
        ns.memory_depth = spec.memory_depth;
        ns.n_centers = std::min(spec.rbf_centers, n_train);
        ns.recurrence = spec.recurrence;

        train::TrainConfig cfg = spec.base;
        if (ns.temporal()) {
            cfg.step_hidden = std::max(0.001, cfg.step_hidden * spec.temporal_step_scale);
            cfg.step_output = std::max(0.001, cfg.step_output * spec.temporal_step_scale);
        }
        cfg.seed = derive_seed(spec.base.seed, static_cast<std::uint64_t>(item.topo_idx) * 64 +
                                                   static_cast<std::uint64_t>(item.depth)) +
                   static_cast<std::uint64_t>(item.restart);

        RunResult result;
        result.topology = item.topology;
        result.hidden_layers = item.depth;
        result.restart = item.restart;
        result.seed = cfg.seed;

        const double t0 = now();
        auto outcome = train::train(net::build(ns, cfg.seed), ds, cfg);
        const double t1 = now();
        result.wall_time_s = std::round((t1 - t0) * 1000.0) / 1000.0; // 1 ms resolution
        result.final_epoch = outcome.epochs_run;
        result.stop_reason = outcome.reason;
        result.diverged = outcome.reason == train::StopReason::Diverged;
        result.cv_mse = outcome.best_cv_mse;
        if (!result.diverged) result.test_eval = evaluate_role(outcome.state, ds, data::SplitRole::Test);
        result.model = std::move(outcome.state);
        result.curve = std::move(outcome.curve);
        report.runs[item.index] = std::move(result);
    };

    if (spec.jobs <= 1) {
        for (const auto& item : work) run_one(item);
    } else {
        std::mutex mtx;
        std::size_t next = 0;
        auto worker = [&] {
            for (;;) {
                std::size_t i;
                {
                    std::lock_guard lock(mtx);
                    if (next >= work.size()) return;
                    i = next++;
                }
                run_one(work[i]);
            }
        };
        std::vector<std::thread> pool;
        for (int j = 0; j < spec.jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    try {
        report.champion = select_best(report);
    } catch (const DomainError&) {
        report.champion = -1; // every run diverged
    }
    return report;
}

int select_best(const BenchReport& report, const SelectionCriteria& criteria) {
    std::vector<int> candidates;
    for (std::size_t t = 0; t < report.topologies.size(); ++t)
        for (std::size_t d = 0; d < report.hidden_range.size(); ++d) {
            int idx = report.best_in_cell(static_cast<int>(t), static_cast<int>(d));
            if (idx >= 0) candidates.push_back(idx);
        }
    if (candidates.empty()) throw DomainError("no non-diverged runs to select from");

    auto mean_r = [&](int idx) {
        const auto& e = report.runs[static_cast<std::size_t>(idx)].test_eval;
        return e && e->r_mean ? *e->r_mean : -std::numeric_limits<double>::infinity();
    };
    auto better = [&](int a, int b) {
        const auto& ra = report.runs[static_cast<std::size_t>(a)];
        const auto& rb = report.runs[static_cast<std::size_t>(b)];
        for (Criterion c : criteria.order) {
            switch (c) {
            case Criterion::TestMse: {
                const double ma = ra.test_eval->mse, mb = rb.test_eval->mse;
                if (std::abs(ma - mb) > criteria.tie_eps) return ma < mb;
                break;
            }
            case Criterion::MeanR: {
                const double va = mean_r(a), vb = mean_r(b);
                if (std::abs(va - vb) > criteria.tie_eps) return va > vb;
                break;
            }
            case Criterion::WallTime: {
                if (std::abs(ra.wall_time_s - rb.wall_time_s) > criteria.tie_eps)
                    return ra.wall_time_s < rb.wall_time_s;
                break;
            }
            }
        }
        return a < b; // stable final tie-break
    };
    return *std::min_element(candidates.begin(), candidates.end(),
                             [&](int a, int b) { return better(a, b); });
}

namespace {

// Canonical pollutant order for tables when the dataset carries the
// pollution-load schema; otherwise file order.
std::vector<std::pair<std::string, int>> table_targets(const std::vector<std::string>& target_names) {
    std::vector<std::pair<std::string, int>> out;
    if (target_names == data::kLoadColumns) {
        for (auto p : ipps::kAllPollutants) {
            std::string lower(ipps::to_string(p));
            std::transform(lower.begin(), lower.end(), lower.begin(),
                           [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
            const std::string col = "load_" + lower;
            const auto it = std::find(target_names.begin(), target_names.end(), col);
            out.emplace_back(std::string(ipps::to_string(p)), static_cast<int>(it - target_names.begin()));
        }
    } else {
        for (std::size_t i = 0; i < target_names.size(); ++i)
            out.emplace_back(target_names[i], static_cast<int>(i));
    }
    return out;
}

} // namespace

HoldoutTable holdout_predict(const net::NetworkState& champion, const data::EncodedDataset& ds,
                             data::SplitRole role) {
    const auto rows = ds.rows_with_role(role);
    if (rows.empty()) throw DomainError("no rows with requested split role");
    if (ds.n_inputs() != champion.spec.n_inputs || ds.n_targets() != champion.spec.n_outputs)
        throw ShapeError("dataset is not compatible with the model (check normalizer/schema)");

    const Matrix pred = train::predict_all(champion, ds);
    const auto targets = table_targets(ds.target_names);

    HoldoutTable table;
    double trend_sum = 0.0;
    int trend_count = 0;
    for (int row : rows) {
        for (const auto& [name, col] : targets) {
            HoldoutRow hr;
            hr.exemplar = row;
            hr.pollutant = name;
            hr.desired = ds.norm.denormalize(ds.norm.targets[static_cast<std::size_t>(col)], ds.targets(row, col));
            hr.actual = ds.norm.denormalize(ds.norm.targets[static_cast<std::size_t>(col)], pred(row, col));
            if (hr.desired > 0.0 && hr.actual > 0.0) {
                const double d[] = {hr.desired};
                const double a[] = {hr.actual};
                hr.trend_pct = metrics::trend_accuracy(d, a).per_item.front();
                trend_sum += *hr.trend_pct;
                ++trend_count;
            }
            table.rows.push_back(std::move(hr));
        }
    }
    if (trend_count > 0) table.trend_mean = trend_sum / trend_count;
    return table;
}

void write_holdout_csv(const std::string& path, const HoldoutTable& table) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write file: " + path);
    out << "pollutant,desired,actual,trend_pct\n";
    for (const auto& r : table.rows) {
        out << r.pollutant << ',' << csv::format_g6(r.desired) << ',' << csv::format_g6(r.actual) << ','
            << (r.trend_pct ? csv::format_fixed(*r.trend_pct, 2) : std::string("NA")) << '\n';
    }
}

namespace {

struct Grid {
    std::vector<std::string> topologies;
    std::vector<int> depths;
    int restarts = 0;
};

Grid grid_of(const std::vector<RunRecord>& records) {
    Grid g;
    for (const auto& rec : records) {
        if (std::find(g.topologies.begin(), g.topologies.end(), rec.topology) == g.topologies.end())
            g.topologies.push_back(rec.topology);
        if (std::find(g.depths.begin(), g.depths.end(), rec.hidden_layers) == g.depths.end())
            g.depths.push_back(rec.hidden_layers);
        g.restarts = std::max(g.restarts, rec.restart + 1);
    }
    std::sort(g.depths.begin(), g.depths.end());
    return g;
}

const RunRecord* cell_best(const std::vector<RunRecord>& records, const std::string& topo, int depth) {
    const RunRecord* best = nullptr;
    const RunRecord* fallback = nullptr;
    for (const auto& rec : records) {
        if (rec.topology != topo || rec.hidden_layers != depth) continue;
        if (!fallback || rec.restart < fallback->restart) fallback = &rec;
        if (rec.diverged || !rec.mse) continue;
        if (!best || *rec.mse < *best->mse) best = &rec;
    }
    return best ? best : fallback;
}

std::string metric_cell(const RunRecord* rec, int metric_row) {
    if (!rec) return "";
    const bool div = rec->diverged;
    auto opt = [&](const std::optional<double>& v) {
        if (div) return std::string("DIV");
        return v ? csv::format_g6(*v) : std::string("NA");
    };
    switch (metric_row) {
    case 0: return csv::format_fixed(rec->wall_time_s, 3);
    case 1: return std::to_string(rec->epochs);
    case 2: return opt(rec->mse);
    case 3: return opt(rec->nmse);
    case 4: return opt(rec->mae);
    case 5: return opt(rec->min_abs_err);
    case 6: return opt(rec->max_abs_err);
    case 7: return opt(rec->r);
    }
    return "";
}

constexpr std::array<const char*, 8> kMetricNames = {
    "time_s", "epoch", "mse", "nmse", "mae", "min_abs_err", "max_abs_err", "r"};

} // namespace

std::string render_bench_csv(const std::vector<RunRecord>& records) {
    const Grid g = grid_of(records);
    std::ostringstream out;
    out << "topology,metric";
    for (int d : g.depths) out << ",h" << d;
    out << '\n';
    for (const auto& topo : g.topologies) {
        for (int m = 0; m < 8; ++m) {
            out << topo << ',' << kMetricNames[static_cast<std::size_t>(m)];
            for (int d : g.depths) out << ',' << metric_cell(cell_best(records, topo, d), m);
            out << '\n';
        }
    }
    return out.str();
}

std::string render_bench_text(const std::vector<RunRecord>& records) {
    const Grid g = grid_of(records);
    constexpr int name_w = 14, cell_w = 12;
    std::ostringstream out;
    for (const auto& topo : g.topologies) {
        out << topo << " (best of " << g.restarts << " restarts per hidden-layer count)\n";
        out << std::string(name_w, ' ');
        for (int d : g.depths) {
            std::string h = "h" + std::to_string(d);
            out << std::string(cell_w - h.size(), ' ') << h;
        }
        out << '\n';
        for (int m = 0; m < 8; ++m) {
            std::string label = kMetricNames[static_cast<std::size_t>(m)];
            out << label << std::string(name_w - label.size(), ' ');
            for (int d : g.depths) {
                std::string cell = metric_cell(cell_best(records, topo, d), m);
                if (static_cast<int>(cell.size()) < cell_w)
                    out << std::string(cell_w - cell.size(), ' ') << cell;
                else
                    out << ' ' << cell;
            }
            out << '\n';
        }
        out << '\n';
    }
    return out.str();
}

namespace {

std::vector<RunRecord> records_of(const BenchReport& report) {
    std::vector<RunRecord> records;
    records.reserve(report.runs.size());
    for (const auto& run : report.runs) records.push_back(to_record(run));
    return records;
}

std::string opt_exact(const std::optional<double>& v) { return v ? csv::format_exact(*v) : "NA"; }

std::optional<double> parse_opt(const std::string& s, const char* col, int line) {
    if (s == "NA") return std::nullopt;
    return csv::parse_double(s, col, line);
}

} // namespace

std::string render_bench_csv(const BenchReport& report) { return render_bench_csv(records_of(report)); }
std::string render_bench_text(const BenchReport& report) { return render_bench_text(records_of(report)); }

void write_report_files(const BenchReport& report, const std::string& out_dir) {
    fs::create_directories(fs::path(out_dir) / "runs");

    {
        std::ofstream out(fs::path(out_dir) / "bench.csv");
        out << render_bench_csv(report);
    }
    {
        std::ofstream out(fs::path(out_dir) / "bench.txt");
        out << render_bench_text(report);
    }
    {
        std::ofstream out(fs::path(out_dir) / "provenance.txt");
        out << "master_seed=" << report.master_seed << '\n'
            << "config_hash=" << report.config_hash << '\n'
            << "runs=" << report.runs.size() << '\n';
    }

    std::ofstream index(fs::path(out_dir) / "runs" / "index.csv");
    index << "topology,hidden_layers,restart,seed,wall_time_s,epochs,stop_reason,mse,nmse,mae,"
             "min_abs_err,max_abs_err,r,cv_mse\n";
    for (const auto& run : report.runs) {
        const RunRecord rec = to_record(run);
        index << rec.topology << ',' << rec.hidden_layers << ',' << rec.restart << ',' << rec.seed << ','
              << csv::format_exact(rec.wall_time_s) << ',' << rec.epochs << ',' << rec.stop_reason << ','
              << opt_exact(rec.mse) << ',' << opt_exact(rec.nmse) << ',' << opt_exact(rec.mae) << ','
              << opt_exact(rec.min_abs_err) << ',' << opt_exact(rec.max_abs_err) << ',' << opt_exact(rec.r)
              << ',' << csv::format_exact(rec.cv_mse) << '\n';

        std::ostringstream stem;
        stem << "run_" << rec.topology << "_h" << rec.hidden_layers << "_r" << rec.restart;
        train::save_curve((fs::path(out_dir) / "runs" / (stem.str() + ".curve.csv")).string(), run.curve);
        net::save_model_file((fs::path(out_dir) / "runs" / (stem.str() + ".model")).string(), run.model);
    }
}

std::vector<RunRecord> load_archive_records(const std::string& runs_dir) {
    const auto rows = csv::read_file((fs::path(runs_dir) / "index.csv").string());
    if (rows.empty()) throw ParseError("empty archive index");
    csv::require_header(rows.front(),
                        {"topology", "hidden_layers", "restart", "seed", "wall_time_s", "epochs", "stop_reason",
                         "mse", "nmse", "mae", "min_abs_err", "max_abs_err", "r", "cv_mse"},
                        runs_dir + "/index.csv");
    std::vector<RunRecord> records;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.fields.size() != 14) throw ParseError("bad archive row", row.line);
        RunRecord rec;
        rec.topology = row.fields[0];
        rec.hidden_layers = static_cast<int>(csv::parse_int(row.fields[1], "hidden_layers", row.line));
        rec.restart = static_cast<int>(csv::parse_int(row.fields[2], "restart", row.line));
        rec.seed = csv::parse_uint(row.fields[3], "seed", row.line);
        rec.wall_time_s = csv::parse_double(row.fields[4], "wall_time_s", row.line);
        rec.epochs = static_cast<int>(csv::parse_int(row.fields[5], "epochs", row.line));
        rec.stop_reason = row.fields[6];
        rec.diverged = rec.stop_reason == "DIVERGED";
        rec.mse = parse_opt(row.fields[7], "mse", row.line);
        rec.nmse = parse_opt(row.fields[8], "nmse", row.line);
        rec.mae = parse_opt(row.fields[9], "mae", row.line);
        rec.min_abs_err = parse_opt(row.fields[10], "min_abs_err", row.line);
        rec.max_abs_err = parse_opt(row.fields[11], "max_abs_err", row.line);
        rec.r = parse_opt(row.fields[12], "r", row.line);
        rec.cv_mse = csv::parse_double(row.fields[13], "cv_mse", row.line);
        records.push_back(std::move(rec));
    }
    return records;
}

void save_bundle(const std::string& path, const ModelBundle& bundle) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write bundle file: " + path);
    out << "loadnet-bundle v1\n";
    net::save_model(out, bundle.state);
    out << "include_year " << (bundle.include_year ? 1 : 0) << '\n';
    auto write_cols = [&](const char* tag, const std::vector<data::NormalizationParams::Column>& cols) {
        out << tag << ' ' << cols.size() << '\n';
        for (const auto& c : cols)
            out << c.name << ' ' << csv::format_exact(c.min) << ' ' << csv::format_exact(c.max) << ' '
                << (c.constant ? 1 : 0) << '\n';
    };
    write_cols("norm_inputs", bundle.norm.inputs);
    write_cols("norm_targets", bundle.norm.targets);
    out << "input_names " << bundle.input_names.size();
    for (const auto& n : bundle.input_names) out << ' ' << n;
    out << '\n';
    out << "target_names " << bundle.target_names.size();
    for (const auto& n : bundle.target_names) out << ' ' << n;
    out << '\n';
}

ModelBundle load_bundle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open bundle file: " + path);
    std::string magic, version;
    if (!(in >> magic >> version) || magic != "loadnet-bundle" || version != "v1")
        throw FormatError("not a loadnet bundle file (bad magic/version)");

    ModelBundle bundle;
    bundle.state = net::load_model(in);

    auto expect = [&](const char* key) {
        std::string k;
        if (!(in >> k) || k != key) throw FormatError(std::string("bundle file: expected '") + key + "'");
    };
    expect("include_year");
    int iy = 0;
    in >> iy;
    bundle.include_year = iy != 0;

    auto read_cols = [&](const char* tag, std::vector<data::NormalizationParams::Column>& cols) {
        expect(tag);
        std::size_t count = 0;
        if (!(in >> count)) throw FormatError("bundle file: bad column count");
        cols.resize(count);
        for (auto& c : cols) {
            int constant = 0;
            if (!(in >> c.name >> c.min >> c.max >> constant))
                throw FormatError("bundle file: truncated normalizer");
            c.constant = constant != 0;
        }
    };
    read_cols("norm_inputs", bundle.norm.inputs);
    read_cols("norm_targets", bundle.norm.targets);

    auto read_names = [&](const char* tag, std::vector<std::string>& names) {
        expect(tag);
        std::size_t count = 0;
        if (!(in >> count)) throw FormatError("bundle file: bad name count");
        names.resize(count);
        for (auto& n : names)
            if (!(in >> n)) throw FormatError("bundle file: truncated name list");
    };
    read_names("input_names", bundle.input_names);
    read_names("target_names", bundle.target_names);
    return bundle;
}

std::string config_hash(const SweepSpec& spec) {
    std::ostringstream text;
    for (auto t : spec.topologies) text << net::to_string(t) << ';';
    for (int d : spec.hidden_range) text << d << ';';
    text << spec.restarts << ';' << spec.nodes_per_hidden << ';' << spec.memory_depth << ';'
         << spec.rbf_centers << ';' << net::to_string(spec.recurrence) << ';'
         << net::to_string(spec.output_transfer) << ';' << spec.temporal_step_scale << ';'
         << spec.base.step_hidden << ';'
         << spec.base.step_output << ';' << spec.base.momentum_hidden << ';' << spec.base.momentum_output
         << ';' << spec.base.epochs << ';' << train::to_string(spec.base.mode) << ';' << spec.base.patience
         << ';' << spec.base.restarts << ';' << spec.base.seed << ';' << spec.base.trajectory_length << ';'
         << spec.base.curve_control;
    // FNV-1a 64
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text.str()) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace loadnet::bench

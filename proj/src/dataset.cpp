#include "loadnet/dataset.hpp"

#include "loadnet/csv.hpp"
#include "loadnet/errors.hpp"
#include "loadnet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace loadnet::data {

std::vector<std::string> dataset_header() {
    std::vector<std::string> h = {"sector", "year", "employment", "output_value"};
    h.insert(h.end(), kPiColumns.begin(), kPiColumns.end());
    h.insert(h.end(), kLoadColumns.begin(), kLoadColumns.end());
    return h;
}

std::vector<RawRow> load_rows(const std::string& csv_path) {
    auto rows = csv::read_file(csv_path);
    if (rows.empty()) throw ParseError("empty dataset file: " + csv_path);
    const auto header = dataset_header();
    csv::require_header(rows.front(), header, csv_path);

    std::vector<RawRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.fields.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(row.fields.size()),
                             row.line);
        RawRow r;
        try {
            r.sector = ipps::sector_from_string(row.fields[0]);
        } catch (const LookupError& e) {
            throw ParseError(e.what(), row.line);
        }
        r.year = static_cast<int>(csv::parse_int(row.fields[1], "year", row.line));
        r.employment = csv::parse_double(row.fields[2], "employment", row.line);
        r.output_value = csv::parse_double(row.fields[3], "output_value", row.line);
        for (std::size_t k = 0; k < kPiColumns.size(); ++k)
            r.pi[k] = csv::parse_double(row.fields[4 + k], kPiColumns[k], row.line);
        for (std::size_t k = 0; k < kLoadColumns.size(); ++k)
            r.targets[k] = csv::parse_double(row.fields[4 + kPiColumns.size() + k], kLoadColumns[k], row.line);
        out.push_back(r);
    }
    return out;
}

std::string_view to_string(SplitRole r) {
    switch (r) {
    case SplitRole::Train: return "TRAIN";
    case SplitRole::CrossValidation: return "CV";
    case SplitRole::Test: return "TEST";
    }
    throw DomainError("invalid split role");
}

namespace {

void check_fractions(const SplitFractions& f) {
    if (std::abs(f.train + f.cv + f.test - 1.0) > 1e-9)
        throw DomainError("split fractions must sum to 1");
    if (f.train <= 0.0 || f.cv < 0.0 || f.test < 0.0)
        throw DomainError("split fractions must be nonnegative with train > 0");
}

} // namespace

SplitAssignment split(std::size_t n_rows, SplitFractions fractions, std::uint64_t seed,
                      const std::vector<std::string>& group) {
    check_fractions(fractions);
    if (n_rows < 3) throw DomainError("need at least 3 rows to split");
    if (!group.empty() && group.size() != n_rows) throw ShapeError("group labels must cover every row");

    const std::size_t n_train = static_cast<std::size_t>(std::llround(fractions.train * n_rows));
    const std::size_t n_cv = static_cast<std::size_t>(std::llround(fractions.cv * n_rows));
    if (n_train + n_cv > n_rows) throw DomainError("split fractions leave no rows");

    SplitAssignment a;
    a.fractions = fractions;
    a.seed = seed;
    a.roles.assign(n_rows, SplitRole::Test);

    Rng rng(mix_seed(seed));
    std::vector<std::size_t> pool;
    std::size_t train_left = n_train;

    if (!group.empty()) {
        // One guaranteed TRAIN row per group, picked after an in-group shuffle.
        std::map<std::string, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < n_rows; ++i) groups[group[i]].push_back(i);
        if (groups.size() > n_train)
            throw DomainError("train fraction too small to cover every group");
        for (auto& [name, members] : groups) {
            std::shuffle(members.begin(), members.end(), rng);
            a.roles[members.front()] = SplitRole::Train;
            --train_left;
            pool.insert(pool.end(), members.begin() + 1, members.end());
        }
    } else {
        pool.resize(n_rows);
        std::iota(pool.begin(), pool.end(), 0);
    }

    std::shuffle(pool.begin(), pool.end(), rng);
    std::size_t k = 0;
    for (; k < pool.size() && train_left > 0; ++k, --train_left) a.roles[pool[k]] = SplitRole::Train;
    for (std::size_t c = 0; k < pool.size() && c < n_cv; ++k, ++c) a.roles[pool[k]] = SplitRole::CrossValidation;
    // remainder already TEST
    return a;
}

SplitAssignment split(const std::vector<RawRow>& rows, SplitFractions fractions, std::uint64_t seed) {
    std::vector<std::string> group;
    group.reserve(rows.size());
    for (const auto& r : rows) group.emplace_back(ipps::to_string(r.sector));
    return split(rows.size(), fractions, seed, group);
}

SplitAssignment split_chronological(const std::vector<RawRow>& rows, SplitFractions fractions) {
    check_fractions(fractions);
    if (rows.size() < 3) throw DomainError("need at least 3 rows to split");
    SplitAssignment a;
    a.fractions = fractions;
    a.seed = 0;
    a.roles.assign(rows.size(), SplitRole::Test);

    std::map<ipps::Sector, std::vector<std::size_t>> by_sector;
    for (std::size_t i = 0; i < rows.size(); ++i) by_sector[rows[i].sector].push_back(i);
    for (auto& [sector, idx] : by_sector) {
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t x, std::size_t y) { return rows[x].year < rows[y].year; });
        const std::size_t n = idx.size();
        const std::size_t n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fractions.train * n)));
        const std::size_t n_cv = static_cast<std::size_t>(std::llround(fractions.cv * n));
        for (std::size_t k = 0; k < n; ++k) {
            if (k < n_train) a.roles[idx[k]] = SplitRole::Train;
            else if (k < n_train + n_cv) a.roles[idx[k]] = SplitRole::CrossValidation;
            else a.roles[idx[k]] = SplitRole::Test;
        }
    }
    return a;
}

double NormalizationParams::normalize(const Column& c, double x, int* clamp_counter) const {
    if (c.constant) return 0.5;
    double v = (x - c.min) / (c.max - c.min);
    if (v < 0.0 || v > 1.0) {
        if (clamp_counter) ++*clamp_counter;
        v = std::clamp(v, 0.0, 1.0);
    }
    return v;
}

double NormalizationParams::denormalize(const Column& c, double v) const {
    if (c.constant) return c.min;
    return c.min + v * (c.max - c.min);
}

void save_normalizer(const std::string& path, const NormalizationParams& norm) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write file: " + path);
    auto write = [&](const NormalizationParams::Column& c, const char* prefix) {
        out << prefix << c.name << '=' << csv::format_exact(c.min) << ',' << csv::format_exact(c.max);
        if (c.constant) out << ",constant";
        out << '\n';
    };
    for (const auto& c : norm.inputs) write(c, "");
    for (const auto& c : norm.targets) write(c, "target:");
}

NormalizationParams load_normalizer(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    NormalizationParams norm;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected column=min,max", line_no);
        NormalizationParams::Column c;
        c.name = line.substr(0, eq);
        auto fields = csv::split_line(line.substr(eq + 1));
        if (fields.size() < 2) throw ParseError("expected column=min,max", line_no);
        c.min = csv::parse_double(fields[0], "min", line_no);
        c.max = csv::parse_double(fields[1], "max", line_no);
        c.constant = fields.size() > 2 && fields[2] == "constant";
        if (c.max < c.min) throw ParseError("max < min for column " + c.name, line_no);
        if (c.name.rfind("target:", 0) == 0) {
            c.name = c.name.substr(7);
            norm.targets.push_back(c);
        } else {
            norm.inputs.push_back(c);
        }
    }
    return norm;
}

std::vector<std::string> input_names(const EncodeOptions& options) {
    std::vector<std::string> names;
    for (auto s : ipps::kAllSectors) names.push_back("sector_" + std::string(ipps::to_string(s)));
    if (options.include_year) names.push_back("year");
    names.push_back("employment");
    names.push_back("output_value");
    names.insert(names.end(), kPiColumns.begin(), kPiColumns.end());
    return names;
}

namespace {

std::vector<double> continuous_values(const RawRow& row, const EncodeOptions& options) {
    std::vector<double> v;
    if (options.include_year) v.push_back(static_cast<double>(row.year));
    v.push_back(row.employment);
    v.push_back(row.output_value);
    v.insert(v.end(), row.pi.begin(), row.pi.end());
    return v;
}

NormalizationParams::Column fit_column(const std::string& name, const std::vector<double>& values) {
    NormalizationParams::Column c;
    c.name = name;
    c.min = *std::min_element(values.begin(), values.end());
    c.max = *std::max_element(values.begin(), values.end());
    c.constant = c.max == c.min;
    return c;
}

} // namespace

NormalizationParams fit_normalizer(const std::vector<RawRow>& rows, const std::vector<SplitRole>& roles,
                                   const EncodeOptions& options) {
    if (rows.size() != roles.size()) throw ShapeError("roles must cover every row");
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (roles[i] == SplitRole::Train) train_idx.push_back(i);
    if (train_idx.empty()) throw DomainError("no TRAIN rows to fit normalizer on");

    NormalizationParams norm;
    const auto names = input_names(options);
    const std::size_t n_onehot = ipps::kAllSectors.size();
    const std::size_t n_cont = names.size() - n_onehot;
    for (std::size_t c = 0; c < n_cont; ++c) {
        std::vector<double> vals;
        vals.reserve(train_idx.size());
        for (auto i : train_idx) vals.push_back(continuous_values(rows[i], options)[c]);
        norm.inputs.push_back(fit_column(names[n_onehot + c], vals));
    }
    for (std::size_t t = 0; t < kLoadColumns.size(); ++t) {
        std::vector<double> vals;
        vals.reserve(train_idx.size());
        for (auto i : train_idx) vals.push_back(rows[i].targets[t]);
        norm.targets.push_back(fit_column(kLoadColumns[t], vals));
    }
    return norm;
}

std::vector<double> encode_row(const RawRow& row, const NormalizationParams& norm,
                               const EncodeOptions& options, int* clamp_counter) {
    std::vector<double> input(ipps::kAllSectors.size(), 0.0);
    input[static_cast<std::size_t>(row.sector)] = 1.0;
    const auto cont = continuous_values(row, options);
    if (cont.size() != norm.inputs.size())
        throw ShapeError("normalizer does not match encode options");
    for (std::size_t c = 0; c < cont.size(); ++c)
        input.push_back(norm.normalize(norm.inputs[c], cont[c], clamp_counter));
    return input;
}

std::vector<double> encode_targets(const RawRow& row, const NormalizationParams& norm, int* clamp_counter) {
    if (norm.targets.size() != row.targets.size()) throw ShapeError("normalizer target count mismatch");
    std::vector<double> t;
    t.reserve(row.targets.size());
    for (std::size_t k = 0; k < row.targets.size(); ++k)
        t.push_back(norm.normalize(norm.targets[k], row.targets[k], clamp_counter));
    return t;
}

std::vector<std::vector<int>> make_sequences(const std::vector<RawRow>& rows) {
    std::map<ipps::Sector, std::vector<int>> by_sector;
    for (std::size_t i = 0; i < rows.size(); ++i) by_sector[rows[i].sector].push_back(static_cast<int>(i));

    std::vector<std::string> duplicates;
    std::vector<std::vector<int>> sequences;
    for (auto& [sector, idx] : by_sector) {
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return rows[a].year < rows[b].year; });
        for (std::size_t k = 1; k < idx.size(); ++k) {
            if (rows[idx[k]].year == rows[idx[k - 1]].year) {
                duplicates.push_back(std::string(ipps::to_string(sector)) + "/" +
                                     std::to_string(rows[idx[k]].year));
            }
        }
        sequences.push_back(idx);
    }
    if (!duplicates.empty()) {
        std::string msg = "duplicate (sector, year) rows:";
        for (const auto& d : duplicates) msg += ' ' + d;
        throw DomainError(msg);
    }
    return sequences;
}

std::vector<int> EncodedDataset::rows_with_role(SplitRole role) const {
    std::vector<int> out;
    for (int i : ordered_rows())
        if (roles[static_cast<std::size_t>(i)] == role) out.push_back(i);
    return out;
}

std::vector<int> EncodedDataset::ordered_rows() const {
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(n_rows()));
    if (sequences.empty()) {
        for (int i = 0; i < n_rows(); ++i) order.push_back(i);
    } else {
        for (const auto& seq : sequences) order.insert(order.end(), seq.begin(), seq.end());
    }
    return order;
}

EncodedDataset encode_dataset(const std::vector<RawRow>& rows, const SplitAssignment& assignment,
                              const EncodeOptions& options) {
    if (rows.size() != assignment.roles.size()) throw ShapeError("assignment must cover every row");
    EncodedDataset ds;
    ds.include_year = options.include_year;
    ds.norm = fit_normalizer(rows, assignment.roles, options);
    ds.input_names = input_names(options);
    ds.target_names = kLoadColumns;
    ds.roles = assignment.roles;
    ds.sequences = make_sequences(rows);

    ds.inputs = Matrix(static_cast<int>(rows.size()), static_cast<int>(ds.input_names.size()));
    ds.targets = Matrix(static_cast<int>(rows.size()), static_cast<int>(kLoadColumns.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        // Fitted on TRAIN only, so CV/test values may clamp; count them.
        int* counter = &ds.clamp_warnings;
        auto in = encode_row(rows[i], ds.norm, options, counter);
        auto tg = encode_targets(rows[i], ds.norm, counter);
        std::copy(in.begin(), in.end(), ds.inputs.row(static_cast<int>(i)).begin());
        std::copy(tg.begin(), tg.end(), ds.targets.row(static_cast<int>(i)).begin());
    }
    return ds;
}

} // namespace loadnet::data

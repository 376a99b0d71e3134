#include "loadnet/ipps.hpp"

#include "loadnet/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace loadnet::ipps {

namespace {

constexpr std::array<std::string_view, 10> kSectorNames = {
    "FBT", "TWA", "WWP", "PPP", "CPH", "NMP", "DIP", "EES", "BM", "MVM"};

constexpr std::array<std::string_view, 14> kPollutantNames = {
    "SO2", "NO2", "CO", "VOC", "FP", "TSP", "TCAIR", "TCLAND", "TCWATER",
    "TMAIR", "TMLAND", "TMWATER", "BOD", "TSS"};

} // namespace

Medium medium_of(Pollutant p) {
    switch (p) {
    case Pollutant::SO2:
    case Pollutant::NO2:
    case Pollutant::CO:
    case Pollutant::VOC:
    case Pollutant::FP:
    case Pollutant::TSP:
    case Pollutant::TCAIR:
    case Pollutant::TMAIR:
        return Medium::Air;
    case Pollutant::TCWATER:
    case Pollutant::TMWATER:
    case Pollutant::BOD:
    case Pollutant::TSS:
        return Medium::Water;
    case Pollutant::TCLAND:
    case Pollutant::TMLAND:
        return Medium::Land;
    }
    throw DomainError("invalid pollutant code");
}

std::string_view to_string(Sector s) { return kSectorNames[static_cast<int>(s)]; }
std::string_view to_string(Pollutant p) { return kPollutantNames[static_cast<int>(p)]; }

std::string_view to_string(Medium m) {
    switch (m) {
    case Medium::Air: return "AIR";
    case Medium::Water: return "WATER";
    case Medium::Land: return "LAND";
    }
    throw DomainError("invalid medium");
}

Sector sector_from_string(std::string_view token) {
    for (std::size_t i = 0; i < kSectorNames.size(); ++i)
        if (kSectorNames[i] == token) return static_cast<Sector>(i);
    throw LookupError("unknown sector token '" + std::string(token) + "'");
}

Pollutant pollutant_from_string(std::string_view token) {
    for (std::size_t i = 0; i < kPollutantNames.size(); ++i)
        if (kPollutantNames[i] == token) return static_cast<Pollutant>(i);
    throw LookupError("unknown pollutant token '" + std::string(token) + "'");
}

std::string_view to_string(ActivityBasis b) {
    return b == ActivityBasis::Employment ? "EMPLOYMENT" : "OUTPUT_VALUE";
}

ActivityBasis basis_from_string(std::string_view token) {
    if (token == "EMPLOYMENT") return ActivityBasis::Employment;
    if (token == "OUTPUT_VALUE") return ActivityBasis::OutputValue;
    throw LookupError("unknown activity basis '" + std::string(token) + "'");
}

IntensityTable::IntensityTable(ActivityBasis basis, double scale) : basis_(basis), scale_(scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("intensity table scale must be positive and finite");
}

void IntensityTable::set(Sector s, Pollutant p, double intensity) {
    if (!(intensity >= 0.0) || !std::isfinite(intensity))
        throw DomainError("intensity must be nonnegative and finite");
    entries_[{s, p}] = intensity;
}

std::optional<double> IntensityTable::intensity(Sector s, Pollutant p) const {
    auto it = entries_.find({s, p});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

bool IntensityTable::has_sector(Sector s) const {
    for (Pollutant p : kAllPollutants)
        if (entries_.count({s, p})) return true;
    return false;
}

double estimate_load(double intensity, double activity, double scale) {
    if (!std::isfinite(intensity) || !std::isfinite(activity) || !std::isfinite(scale))
        throw DomainError("estimate_load requires finite inputs");
    if (intensity < 0.0) throw DomainError("intensity must be nonnegative");
    if (activity < 0.0) throw DomainError("activity must be nonnegative");
    if (scale <= 0.0) throw DomainError("scale must be positive");
    double load = intensity * activity * scale;
    if (!std::isfinite(load)) throw DomainError("load overflow");
    return load;
}

std::vector<LoadEstimate> estimate_sector_year(const IntensityTable& table, const ActivityRecord& record) {
    if (!table.has_sector(record.sector))
        throw LookupError("sector " + std::string(to_string(record.sector)) + " absent from intensity table");
    double activity = table.basis() == ActivityBasis::Employment
                          ? static_cast<double>(record.employment)
                          : record.output_value;
    std::vector<LoadEstimate> out;
    for (Pollutant p : kAllPollutants) {
        auto pi = table.intensity(record.sector, p);
        if (!pi) continue;
        out.push_back({record.sector, record.year, p, estimate_load(*pi, activity, table.scale())});
    }
    return out;
}

std::vector<std::pair<Sector, double>> rank_sectors(const std::vector<LoadEstimate>& loads, Pollutant pollutant) {
    std::map<Sector, double> totals;
    for (const auto& le : loads)
        if (le.pollutant == pollutant) totals[le.sector] += le.load;
    std::vector<std::pair<Sector, double>> ranked(totals.begin(), totals.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return to_string(a.first) < to_string(b.first);
    });
    return ranked;
}

std::map<Medium, double> aggregate_by_medium(const std::vector<LoadEstimate>& loads) {
    std::map<Medium, double> totals;
    for (Medium m : kAllMedia) totals[m] = 0.0;
    for (const auto& le : loads) totals[medium_of(le.pollutant)] += le.load;
    return totals;
}

IntensityTable load_intensity_table(const std::string& csv_path, const std::string& config_path) {
    auto kv = csv::read_kv_file(config_path);
    auto basis_it = kv.find("basis");
    auto scale_it = kv.find("scale");
    if (basis_it == kv.end()) throw ConfigError("intensity config missing 'basis': " + config_path);
    if (scale_it == kv.end()) throw ConfigError("intensity config missing 'scale': " + config_path);
    IntensityTable table(basis_from_string(basis_it->second),
                         csv::parse_double(scale_it->second, "scale", 0));

    auto rows = csv::read_file(csv_path);
    if (rows.empty()) throw ParseError("empty intensity file: " + csv_path);
    csv::require_header(rows.front(), {"sector", "pollutant", "intensity"}, csv_path);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.fields.size() != 3)
            throw ParseError("expected 3 fields, got " + std::to_string(row.fields.size()), row.line);
        try {
            table.set(sector_from_string(row.fields[0]), pollutant_from_string(row.fields[1]),
                      csv::parse_double(row.fields[2], "intensity", row.line));
        } catch (const LookupError& e) {
            throw ParseError(e.what(), row.line);
        }
    }
    return table;
}

std::vector<ActivityRecord> load_activity_records(const std::string& csv_path) {
    auto rows = csv::read_file(csv_path);
    if (rows.empty()) throw ParseError("empty activity file: " + csv_path);
    csv::require_header(rows.front(), {"sector", "year", "employment", "output_value"}, csv_path);
    std::vector<ActivityRecord> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.fields.size() != 4)
            throw ParseError("expected 4 fields, got " + std::to_string(row.fields.size()), row.line);
        ActivityRecord rec;
        try {
            rec.sector = sector_from_string(row.fields[0]);
        } catch (const LookupError& e) {
            throw ParseError(e.what(), row.line);
        }
        rec.year = static_cast<int>(csv::parse_int(row.fields[1], "year", row.line));
        if (rec.year < 1000 || rec.year > 9999) throw ParseError("year must be a 4-digit integer", row.line);
        rec.employment = csv::parse_int(row.fields[2], "employment", row.line);
        if (rec.employment < 0) throw ParseError("employment must be nonnegative", row.line);
        rec.output_value = csv::parse_double(row.fields[3], "output_value", row.line);
        if (rec.output_value < 0) throw ParseError("output_value must be nonnegative", row.line);
        out.push_back(rec);
    }
    return out;
}

void write_load_estimates(const std::string& path, const std::vector<LoadEstimate>& loads) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write file: " + path);
    out << "sector,year,pollutant,medium,load_ton_per_yr\n";
    for (const auto& le : loads) {
        out << to_string(le.sector) << ',' << le.year << ',' << to_string(le.pollutant) << ','
            << to_string(medium_of(le.pollutant)) << ',' << csv::format_exact(le.load) << '\n';
    }
}

} // namespace loadnet::ipps

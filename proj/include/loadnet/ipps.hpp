#pragma once

#include "loadnet/errors.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace loadnet::ipps {

// The ten MAN manufacturing sectors.
enum class Sector { FBT, TWA, WWP, PPP, CPH, NMP, DIP, EES, BM, MVM };

inline constexpr std::array<Sector, 10> kAllSectors = {
    Sector::FBT, Sector::TWA, Sector::WWP, Sector::PPP, Sector::CPH,
    Sector::NMP, Sector::DIP, Sector::EES, Sector::BM,  Sector::MVM,
};

enum class Pollutant {
    SO2, NO2, CO, VOC, FP, TSP, TCAIR, TCLAND, TCWATER, TMAIR, TMLAND, TMWATER, BOD, TSS
};

// Canonical pollutant order used by every report and output file.
inline constexpr std::array<Pollutant, 14> kAllPollutants = {
    Pollutant::SO2,    Pollutant::NO2,    Pollutant::CO,      Pollutant::VOC,
    Pollutant::FP,     Pollutant::TSP,    Pollutant::TCAIR,   Pollutant::TCLAND,
    Pollutant::TCWATER, Pollutant::TMAIR, Pollutant::TMLAND,  Pollutant::TMWATER,
    Pollutant::BOD,    Pollutant::TSS,
};

enum class Medium { Air, Water, Land };

inline constexpr std::array<Medium, 3> kAllMedia = {Medium::Air, Medium::Water, Medium::Land};

Medium medium_of(Pollutant p);

std::string_view to_string(Sector s);
std::string_view to_string(Pollutant p);
std::string_view to_string(Medium m);

// Throw LookupError on unknown tokens.
Sector sector_from_string(std::string_view token);
Pollutant pollutant_from_string(std::string_view token);

enum class ActivityBasis { Employment, OutputValue };

std::string_view to_string(ActivityBasis b);
ActivityBasis basis_from_string(std::string_view token);

// Sector x pollutant pollution intensities. A missing pair is an absence,
// never an implicit zero: IPPS tables are sparse and zero is meaningful.
class IntensityTable {
public:
    IntensityTable(ActivityBasis basis, double scale);

    ActivityBasis basis() const { return basis_; }
    double scale() const { return scale_; }

    void set(Sector s, Pollutant p, double intensity); // intensity >= 0
    std::optional<double> intensity(Sector s, Pollutant p) const;
    bool has_sector(Sector s) const;
    std::size_t size() const { return entries_.size(); }

private:
    ActivityBasis basis_;
    double scale_;
    std::map<std::pair<Sector, Pollutant>, double> entries_;
};

struct ActivityRecord {
    Sector sector;
    int year = 0;
    long long employment = 0;  // persons
    double output_value = 0.0; // currency units
};

struct LoadEstimate {
    Sector sector;
    int year = 0;
    Pollutant pollutant;
    double load = 0.0; // ton/yr
};

// load = intensity * activity * scale
double estimate_load(double intensity, double activity, double scale);

// One estimate per pollutant the table holds for the record's sector,
// in canonical pollutant order.
std::vector<LoadEstimate> estimate_sector_year(const IntensityTable& table, const ActivityRecord& record);

// Descending by total load for the pollutant; ties broken by sector code
// lexicographic order. Empty result when no loads carry the pollutant.
std::vector<std::pair<Sector, double>> rank_sectors(const std::vector<LoadEstimate>& loads, Pollutant pollutant);

// Totals per medium; all three media always present.
std::map<Medium, double> aggregate_by_medium(const std::vector<LoadEstimate>& loads);

// File formats (see README): intensity CSV `sector,pollutant,intensity`
// with a sidecar key-value config holding `basis` and `scale`.
IntensityTable load_intensity_table(const std::string& csv_path, const std::string& config_path);
std::vector<ActivityRecord> load_activity_records(const std::string& csv_path);
void write_load_estimates(const std::string& path, const std::vector<LoadEstimate>& loads);

} // namespace loadnet::ipps

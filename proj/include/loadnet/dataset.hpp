#pragma once

#include "loadnet/ipps.hpp"
#include "loadnet/matrix.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace loadnet::data {

// Pollution-intensity input columns, in file order. TSS has no intensity
// column; its load is still a target.
inline const std::vector<std::string> kPiColumns = {
    "pi_so2", "pi_no2", "pi_co", "pi_voc", "pi_fp", "pi_tsp", "pi_tcair",
    "pi_tcland", "pi_tcwater", "pi_tmair", "pi_tmwater", "pi_tmland", "pi_bod"};

inline const std::vector<std::string> kLoadColumns = {
    "load_so2", "load_no2", "load_co", "load_voc", "load_fp", "load_tsp", "load_tcair",
    "load_tcland", "load_tcwater", "load_tmair", "load_tmwater", "load_tmland", "load_bod", "load_tss"};

std::vector<std::string> dataset_header();

struct RawRow {
    ipps::Sector sector;
    int year = 0;
    double employment = 0.0;
    double output_value = 0.0;
    std::array<double, 13> pi{};      // kPiColumns order
    std::array<double, 14> targets{}; // kLoadColumns order
};

std::vector<RawRow> load_rows(const std::string& csv_path);

enum class SplitRole { Train, CrossValidation, Test };

std::string_view to_string(SplitRole r);

struct SplitFractions {
    double train = 0.60;
    double cv = 0.25;
    double test = 0.15;
};

struct SplitAssignment {
    std::vector<SplitRole> roles;
    SplitFractions fractions;
    std::uint64_t seed = 0;
};

// Seeded random split. When stratified, rows are grouped by `group` (one
// entry per row) and every group gets at least one TRAIN row.
SplitAssignment split(std::size_t n_rows, SplitFractions fractions, std::uint64_t seed,
                      const std::vector<std::string>& group = {});
SplitAssignment split(const std::vector<RawRow>& rows, SplitFractions fractions, std::uint64_t seed);

// Holds out the latest years per sector: earliest fraction trains.
SplitAssignment split_chronological(const std::vector<RawRow>& rows, SplitFractions fractions);

// Per-column min/max fitted on TRAIN rows only. A constant column maps to 0.5.
struct NormalizationParams {
    struct Column {
        std::string name;
        double min = 0.0;
        double max = 1.0;
        bool constant = false;
    };
    std::vector<Column> inputs;  // continuous inputs, encode order
    std::vector<Column> targets; // kLoadColumns order

    double normalize(const Column& c, double x, int* clamp_counter = nullptr) const;
    double denormalize(const Column& c, double v) const;
};

void save_normalizer(const std::string& path, const NormalizationParams& norm);
NormalizationParams load_normalizer(const std::string& path);

struct EncodeOptions {
    bool include_year = true; // year listed as a model input; adds one continuous column
};

NormalizationParams fit_normalizer(const std::vector<RawRow>& rows, const std::vector<SplitRole>& roles,
                                   const EncodeOptions& options);

// 10 one-hot sector values followed by the normalized continuous block.
std::vector<double> encode_row(const RawRow& row, const NormalizationParams& norm,
                               const EncodeOptions& options, int* clamp_counter = nullptr);
std::vector<double> encode_targets(const RawRow& row, const NormalizationParams& norm,
                                   int* clamp_counter = nullptr);

std::vector<std::string> input_names(const EncodeOptions& options);

// Per-sector row indices in ascending-year order. Throws on duplicate
// (sector, year) pairs, listing them.
std::vector<std::vector<int>> make_sequences(const std::vector<RawRow>& rows);

struct EncodedDataset {
    std::vector<std::string> input_names;
    std::vector<std::string> target_names;
    Matrix inputs;  // N x D, normalized
    Matrix targets; // N x P, normalized
    std::vector<SplitRole> roles;
    std::vector<std::vector<int>> sequences; // temporal ordering; empty => row order
    NormalizationParams norm;
    bool include_year = true;
    int clamp_warnings = 0;

    int n_rows() const { return inputs.rows(); }
    int n_inputs() const { return inputs.cols(); }
    int n_targets() const { return targets.cols(); }
    std::vector<int> rows_with_role(SplitRole role) const;
    // Row indices of `role` in temporal order (sequence order when present).
    std::vector<int> ordered_rows() const;
};

EncodedDataset encode_dataset(const std::vector<RawRow>& rows, const SplitAssignment& assignment,
                              const EncodeOptions& options);

} // namespace loadnet::data

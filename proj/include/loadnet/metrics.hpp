#pragma once

#include "loadnet/matrix.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace loadnet::metrics {

// mean of squared elementwise differences: sum (d-y)^2 / (N*P)
double mse(const Matrix& desired, const Matrix& output);

// MSE normalized by the desired signal's per-output variance term:
//   P*N*MSE / sum_j [ sum_i d_ij^2 - (sum_i d_ij)^2 / N ]
// Throws UndefinedMetricError when the denominator is zero (constant desired).
double nmse(const Matrix& desired, const Matrix& output);

// Signed mean relative error, (1/n) sum (A_t - F_t) / A_t. Note: no absolute
// value, so opposite-signed errors cancel. Throws DomainError on any A_t = 0.
double mae_signed(std::span<const double> actual, std::span<const double> forecast);

// Plain mean absolute error (1/n) sum |A_t - F_t|.
double mae_abs(std::span<const double> actual, std::span<const double> forecast);
double mae_abs(const Matrix& desired, const Matrix& output);

// Sample linear correlation coefficient. Throws UndefinedMetricError when
// either argument has zero variance.
double pearson_r(std::span<const double> x, std::span<const double> y);

struct TrendResult {
    std::vector<double> per_item; // percentages
    double mean = 0.0;
};

// Percentage agreement per item: 100 * min(d,a) / max(d,a). Values must be
// positive.
TrendResult trend_accuracy(std::span<const double> desired, std::span<const double> actual);

struct EvalReport {
    double mse = 0.0;
    std::optional<double> nmse;      // absent when desired signal is constant
    std::optional<double> mae_signed; // absent when any desired element is zero
    double mae_abs = 0.0;
    double min_abs_err = 0.0;
    double max_abs_err = 0.0;
    std::vector<std::optional<double>> r_per_output;
    std::optional<double> r_mean; // mean over defined per-output coefficients
    int n_exemplars = 0;
    int n_outputs = 0;
};

EvalReport evaluate(const Matrix& desired, const Matrix& output);

// One CSV row per metric, labels matching the benchmark report table.
std::string eval_csv(const EvalReport& report);

} // namespace loadnet::metrics

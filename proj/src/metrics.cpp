#include "loadnet/metrics.hpp"

#include "loadnet/csv.hpp"
#include "loadnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace loadnet::metrics {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("desired/output shapes differ");
    if (a.rows() < 1 || a.cols() < 1) throw ShapeError("metrics need at least one exemplar and one output");
}

} // namespace

double mse(const Matrix& desired, const Matrix& output) {
    require_same_shape(desired, output);
    double sum = 0.0;
    for (int i = 0; i < desired.rows(); ++i)
        for (int j = 0; j < desired.cols(); ++j) {
            double e = desired(i, j) - output(i, j);
            sum += e * e;
        }
    return sum / (static_cast<double>(desired.rows()) * desired.cols());
}

double nmse(const Matrix& desired, const Matrix& output) {
    require_same_shape(desired, output);
    const int n = desired.rows();
    const int p = desired.cols();
    double denom = 0.0;
    for (int j = 0; j < p; ++j) {
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < n; ++i) {
            sum += desired(i, j);
            sum_sq += desired(i, j) * desired(i, j);
        }
        denom += sum_sq - sum * sum / n;
    }
    if (denom <= 0.0)
        throw UndefinedMetricError("NMSE undefined: desired signal has zero variance");
    return p * (n * mse(desired, output)) / denom;
}

double mae_signed(std::span<const double> actual, std::span<const double> forecast) {
    if (actual.size() != forecast.size()) throw ShapeError("actual/forecast lengths differ");
    if (actual.empty()) throw ShapeError("mae_signed needs at least one element");
    double sum = 0.0;
    for (std::size_t t = 0; t < actual.size(); ++t) {
        if (actual[t] == 0.0) throw DomainError("mae_signed undefined for zero actual value");
        sum += (actual[t] - forecast[t]) / actual[t];
    }
    return sum / static_cast<double>(actual.size());
}

double mae_abs(std::span<const double> actual, std::span<const double> forecast) {
    if (actual.size() != forecast.size()) throw ShapeError("actual/forecast lengths differ");
    if (actual.empty()) throw ShapeError("mae_abs needs at least one element");
    double sum = 0.0;
    for (std::size_t t = 0; t < actual.size(); ++t) sum += std::abs(actual[t] - forecast[t]);
    return sum / static_cast<double>(actual.size());
}

double mae_abs(const Matrix& desired, const Matrix& output) {
    require_same_shape(desired, output);
    return mae_abs(std::span<const double>(desired.data()), std::span<const double>(output.data()));
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ShapeError("pearson_r lengths differ");
    const std::size_t n = x.size();
    if (n < 2) throw ShapeError("pearson_r needs at least two points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0)
        throw UndefinedMetricError("pearson_r undefined: zero variance input");
    return sxy / std::sqrt(sxx * syy);
}

TrendResult trend_accuracy(std::span<const double> desired, std::span<const double> actual) {
    if (desired.size() != actual.size()) throw ShapeError("trend_accuracy lengths differ");
    if (desired.empty()) throw ShapeError("trend_accuracy needs at least one element");
    TrendResult result;
    result.per_item.reserve(desired.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < desired.size(); ++i) {
        if (desired[i] <= 0.0 || actual[i] <= 0.0)
            throw DomainError("trend_accuracy requires positive values");
        double pct = 100.0 * std::min(desired[i], actual[i]) / std::max(desired[i], actual[i]);
        result.per_item.push_back(pct);
        sum += pct;
    }
    result.mean = sum / static_cast<double>(desired.size());
    return result;
}

EvalReport evaluate(const Matrix& desired, const Matrix& output) {
    require_same_shape(desired, output);
    EvalReport r;
    r.n_exemplars = desired.rows();
    r.n_outputs = desired.cols();
    r.mse = mse(desired, output);
    try {
        r.nmse = nmse(desired, output);
    } catch (const UndefinedMetricError&) {
    }
    bool any_zero_desired = false;
    double min_ae = std::numeric_limits<double>::infinity();
    double max_ae = 0.0;
    for (int i = 0; i < desired.rows(); ++i)
        for (int j = 0; j < desired.cols(); ++j) {
            if (desired(i, j) == 0.0) any_zero_desired = true;
            double ae = std::abs(desired(i, j) - output(i, j));
            min_ae = std::min(min_ae, ae);
            max_ae = std::max(max_ae, ae);
        }
    r.min_abs_err = min_ae;
    r.max_abs_err = max_ae;
    r.mae_abs = mae_abs(desired, output);
    if (!any_zero_desired)
        r.mae_signed = mae_signed(std::span<const double>(desired.data()), std::span<const double>(output.data()));

    std::vector<double> col_d(desired.rows()), col_y(desired.rows());
    double r_sum = 0.0;
    int r_count = 0;
    for (int j = 0; j < desired.cols(); ++j) {
        for (int i = 0; i < desired.rows(); ++i) {
            col_d[i] = desired(i, j);
            col_y[i] = output(i, j);
        }
        try {
            double rj = pearson_r(col_y, col_d);
            r.r_per_output.push_back(rj);
            r_sum += rj;
            ++r_count;
        } catch (const Error&) {
            r.r_per_output.push_back(std::nullopt);
        }
    }
    if (r_count > 0) r.r_mean = r_sum / r_count;
    return r;
}

std::string eval_csv(const EvalReport& r) {
    auto opt = [](const std::optional<double>& v) {
        return v ? csv::format_g6(*v) : std::string("NA");
    };
    std::ostringstream out;
    out << "MEAN SQUARED ERROR (MSE)," << csv::format_g6(r.mse) << '\n'
        << "NORMALIZED MEAN SQUARED ERROR (NMSE)," << opt(r.nmse) << '\n'
        << "MEAN AVERAGE ERROR (MAE)," << csv::format_g6(r.mae_abs) << '\n'
        << "MIN ABSOLUTE ERROR," << csv::format_g6(r.min_abs_err) << '\n'
        << "MAX ABSOLUTE ERROR," << csv::format_g6(r.max_abs_err) << '\n'
        << "LINEAR CORRELATION COEFFICIENT (R)," << opt(r.r_mean) << '\n';
    return out.str();
}

} // namespace loadnet::metrics

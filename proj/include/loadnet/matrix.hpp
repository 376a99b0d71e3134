#pragma once

#include "loadnet/errors.hpp"

#include <span>
#include <vector>

namespace loadnet {

// Dense row-major matrix of doubles. Just storage plus indexed access;
// the numeric kernels that need it write their own loops.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(static_cast<std::size_t>(rows) * cols, fill) {
        if (rows < 0 || cols < 0) throw ShapeError("matrix dimensions must be nonnegative");
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return v_.empty(); }

    double& operator()(int r, int c) { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return v_[static_cast<std::size_t>(r) * cols_ + c]; }

    std::span<double> row(int r) { return {v_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }
    std::span<const double> row(int r) const {
        return {v_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
    }

    std::vector<double>& data() { return v_; }
    const std::vector<double>& data() const { return v_; }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> v_;
};

} // namespace loadnet

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace cfrl::numkit {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Throws NumericError naming `what` if any entry is NaN or infinite.
void require_finite(std::span<const double> values, std::string_view what);

/// Throws DimensionError if `actual != expected`.
void require_dim(std::size_t actual, std::size_t expected, std::string_view what);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// y = A x
Vector matvec(const Matrix& a, std::span<const double> x);

}  // namespace cfrl::numkit

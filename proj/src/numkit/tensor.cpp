#include "cfrl/numkit/tensor.hpp"

#include <cmath>
#include <string>

#include "cfrl/errors.hpp"

namespace cfrl::numkit {

void require_finite(std::span<const double> values, std::string_view what) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw NumericError("non-finite value in " + std::string(what) + " at index " +
                               std::to_string(i));
        }
    }
}

void require_dim(std::size_t actual, std::size_t expected, std::string_view what) {
    if (actual != expected) {
        throw DimensionError(std::string(what) + ": expected dimension " +
                             std::to_string(expected) + ", got " + std::to_string(actual));
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    require_dim(b.size(), a.size(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Vector matvec(const Matrix& a, std::span<const double> x) {
    require_dim(x.size(), a.cols(), "matvec");
    Vector y(a.rows(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto row = a.row(r);
        double s = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * x[c];
        y[r] = s;
    }
    return y;
}

}  // namespace cfrl::numkit

#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace sensegram::vec {

/// Dot product of float rows accumulated in double.
///
/// Eight independent partial sums keep the reduction order fixed (results are
/// reproducible) while leaving room for the compiler to vectorize.
inline double dot(std::span<const float> a, std::span<const float> b) noexcept {
    const std::size_t n = a.size();
    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (std::size_t j = 0; j < 8; ++j)
            acc[j] += static_cast<double>(a[i + j]) * static_cast<double>(b[i + j]);
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    const std::size_t n = a.size();
    double acc[4] = {0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        for (std::size_t j = 0; j < 4; ++j) acc[j] += a[i + j] * b[i + j];
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail;
}

/// Mixed-precision dot used when scoring a double context sum against a float sense row.
inline double dot(std::span<const double> a, std::span<const float> b) noexcept {
    const std::size_t n = a.size();
    double acc[4] = {0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        for (std::size_t j = 0; j < 4; ++j) acc[j] += a[i + j] * static_cast<double>(b[i + j]);
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * static_cast<double>(b[i]);
    return (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail;
}

/// y += alpha * x
template <typename T>
inline void axpy(T alpha, std::span<const T> x, std::span<T> y) noexcept {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

/// Logistic function, 1 / (1 + e^-x), stable for large |x|.
inline double sigmoid(double x) noexcept {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace sensegram::vec

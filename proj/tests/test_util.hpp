#pragma once

#include <random>
#include <vector>

#include "camel/matrix.hpp"

namespace testutil {

inline camel::Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double lo = -1.0,
                                   double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    camel::Matrix m(rows, cols);
    for (double& v : m.data) v = dist(rng);
    return m;
}

inline std::vector<int> random_labels(int count, int classes, std::mt19937_64& rng) {
    std::vector<int> y(count);
    for (int& v : y) v = static_cast<int>(rng() % classes);
    return y;
}

inline double max_abs_diff(const camel::Matrix& a, const camel::Matrix& b) {
    double worst = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
    return worst;
}

// row-vector times matrix, plain double loops
inline std::vector<double> vecmat(const std::vector<double>& v, const camel::Matrix& m) {
    std::vector<double> out(m.cols, 0.0);
    for (int k = 0; k < m.rows; ++k)
        for (int j = 0; j < m.cols; ++j) out[j] += v[k] * m.at(k, j);
    return out;
}

inline std::vector<double> get_row(const camel::Matrix& m, int r) {
    return std::vector<double>(m.row(r), m.row(r) + m.cols);
}

}  // namespace testutil

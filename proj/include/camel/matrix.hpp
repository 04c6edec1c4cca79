#pragma once

#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace camel {

// Dense row-major matrix of doubles; the single numeric carrier for feature
// batches, layer weights and attention scores. Kept as a plain aggregate so
// tests and serialization can poke at the storage directly.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
        if (r < 0 || c < 0) throw std::invalid_argument("matrix dims must be non-negative");
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rs) {
        Matrix m(static_cast<int>(rs.size()), rs.size() ? static_cast<int>(rs.begin()->size()) : 0);
        int r = 0;
        for (const auto& row : rs) {
            if (static_cast<int>(row.size()) != m.cols)
                throw std::invalid_argument("ragged initializer");
            int c = 0;
            for (double v : row) m.at(r, c++) = v;
            ++r;
        }
        return m;
    }

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    size_t size() const { return data.size(); }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }
};

inline bool all_finite(const Matrix& m) {
    for (double v : m.data)
        if (!std::isfinite(v)) return false;
    return true;
}

// C = A * B
void matmul_into(const Matrix& a, const Matrix& b, Matrix& c);
// dA += G * B^T
void add_matmul_bt(const Matrix& g, const Matrix& b, Matrix& da);
// dB += A^T * G
void add_matmul_at(const Matrix& a, const Matrix& g, Matrix& db);

}  // namespace camel

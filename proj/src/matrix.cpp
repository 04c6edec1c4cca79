#include "camel/matrix.hpp"

namespace camel {

void matmul_into(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul shape mismatch: " + a.shape_str() + " * " + b.shape_str());
    c = Matrix(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

void add_matmul_bt(const Matrix& g, const Matrix& b, Matrix& da) {
    // da[i,k] += sum_j g[i,j] * b[k,j]
    for (int i = 0; i < g.rows; ++i) {
        const double* grow = g.row(i);
        double* drow = da.row(i);
        for (int k = 0; k < b.rows; ++k) {
            const double* brow = b.row(k);
            double acc = 0.0;
            for (int j = 0; j < g.cols; ++j) acc += grow[j] * brow[j];
            drow[k] += acc;
        }
    }
}

void add_matmul_at(const Matrix& a, const Matrix& g, Matrix& db) {
    // db[k,j] += sum_i a[i,k] * g[i,j]
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        const double* grow = g.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            double* drow = db.row(k);
            for (int j = 0; j < g.cols; ++j) drow[j] += av * grow[j];
        }
    }
}

}  // namespace camel

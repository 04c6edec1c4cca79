#include "camel/drift.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace camel {

namespace {

double rbf_sum(const Matrix& x, const Matrix& y, double inv_two_sigma2) {
    double total = 0.0;
    for (int p = 0; p < x.rows; ++p) {
        const double* xp = x.row(p);
        for (int q = 0; q < y.rows; ++q) {
            const double* yq = y.row(q);
            double d2 = 0.0;
            for (int c = 0; c < x.cols; ++c) {
                const double d = xp[c] - yq[c];
                d2 += d * d;
            }
            total += std::exp(-d2 * inv_two_sigma2);
        }
    }
    return total;
}

}  // namespace

double mmd2(const Matrix& a, const Matrix& b, double sigma) {
    if (a.rows < 1 || b.rows < 1) throw std::invalid_argument("mmd2 needs non-empty samples");
    if (a.cols != b.cols)
        throw std::invalid_argument("mmd2 column mismatch: " + a.shape_str() + " vs " + b.shape_str());
    if (sigma <= 0.0) throw std::invalid_argument("mmd2 bandwidth must be positive");
    // canonicalize the argument order so mmd2(a, b) == mmd2(b, a) bitwise:
    // the cross-kernel accumulation order must not depend on how the caller
    // ordered the samples
    const Matrix* x = &a;
    const Matrix* y = &b;
    if (a.rows < b.rows || (a.rows == b.rows && a.data > b.data)) std::swap(x, y);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    const double nx = x->rows, ny = y->rows;
    const double v = rbf_sum(*x, *x, inv) / (nx * nx) + rbf_sum(*y, *y, inv) / (ny * ny) -
                     2.0 * rbf_sum(*x, *y, inv) / (nx * ny);
    return v > 0.0 ? v : 0.0;
}

MmdDetector::MmdDetector(double sigma, double threshold, int ref_size)
    : sigma_(sigma), threshold_(threshold), ref_size_(ref_size) {
    if (sigma <= 0.0) throw std::invalid_argument("detector sigma must be positive");
    if (threshold <= 0.0) throw std::invalid_argument("detector threshold must be positive");
    if (ref_size < 2) throw std::invalid_argument("detector reference size must be >= 2");
}

Matrix MmdDetector::tail_rows(const Matrix& m, int count) {
    Matrix out(count, m.cols);
    const int first = m.rows - count;
    for (int r = 0; r < count; ++r)
        for (int c = 0; c < m.cols; ++c) out.at(r, c) = m.at(first + r, c);
    return out;
}

bool MmdDetector::detect_and_update(const Matrix& features) {
    if (features.rows < ref_size_)
        throw std::invalid_argument("window has " + std::to_string(features.rows) +
                                    " rows, fewer than the reference size " +
                                    std::to_string(ref_size_));
    if (!primed()) {
        reference_ = tail_rows(features, ref_size_);
        last_mmd2_ = 0.0;
        return false;
    }
    last_mmd2_ = mmd2(features, reference_, sigma_);
    const bool drift = last_mmd2_ > threshold_;
    if (drift) reference_ = tail_rows(features, ref_size_);
    return drift;
}

}  // namespace camel

#pragma once

#include "camel/matrix.hpp"

namespace camel {

// Squared maximum mean discrepancy between two sample sets under an RBF
// kernel, biased (V-statistic) form:
//   (1/a^2) sum k(a_p,a_q) + (1/b^2) sum k(b_p,b_q) - (2/ab) sum k(a_p,b_q)
// with k(x,y) = exp(-|x-y|^2 / (2 sigma^2)). Clamped to >= 0 against
// round-off.
double mmd2(const Matrix& a, const Matrix& b, double sigma);

// Per-stream detector over aligned features. Holds a reference sample of the
// last accepted concept; a window whose MMD^2 against it exceeds the
// threshold signals drift and replaces the reference with the window's
// freshest rows.
class MmdDetector {
public:
    MmdDetector(double sigma, double threshold, int ref_size);

    // First call seeds the reference from the window's last ref_size rows and
    // reports no drift. Later calls compare, and update the reference only
    // when drift fires.
    bool detect_and_update(const Matrix& features);

    double last_mmd2() const { return last_mmd2_; }
    bool primed() const { return reference_.rows > 0; }
    const Matrix& reference() const { return reference_; }
    double sigma() const { return sigma_; }
    double threshold() const { return threshold_; }
    int ref_size() const { return ref_size_; }

    void restore_reference(Matrix reference) { reference_ = std::move(reference); }

private:
    double sigma_;
    double threshold_;
    int ref_size_;
    Matrix reference_;
    double last_mmd2_ = 0.0;

    static Matrix tail_rows(const Matrix& m, int count);
};

}  // namespace camel

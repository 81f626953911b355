#pragma once

#include <cstddef>
#include <vector>

namespace song {

// Dense row-major double matrix. Double precision throughout so analytic
// gradients can be checked against central finite differences.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    double* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }

    void zero() { std::fill(a.begin(), a.end(), 0.0); }
    bool empty() const { return rows == 0 || cols == 0; }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

Mat matmul(const Mat& A, const Mat& B);     // A(r,k) * B(k,c)
Mat matmul_nt(const Mat& A, const Mat& B);  // A(r,k) * B(c,k)^T
Mat matmul_tn(const Mat& A, const Mat& B);  // A(k,r)^T * B(k,c)
void add_inplace(Mat& A, const Mat& B);
bool all_finite(const Mat& A);

}  // namespace song

#include "song/mat.hpp"

#include <cmath>
#include <stdexcept>

namespace song {

Mat matmul(const Mat& A, const Mat& B) {
    if (A.cols != B.rows) throw std::invalid_argument("matmul: inner dimensions differ");
    Mat C(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row(i);
        double* crow = C.row(i);
        for (int k = 0; k < A.cols; ++k) {
            double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = B.row(k);
            for (int j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return C;
}

Mat matmul_nt(const Mat& A, const Mat& B) {
    if (A.cols != B.cols) throw std::invalid_argument("matmul_nt: inner dimensions differ");
    Mat C(A.rows, B.rows);
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row(i);
        for (int j = 0; j < B.rows; ++j) {
            const double* brow = B.row(j);
            double s = 0.0;
            for (int k = 0; k < A.cols; ++k) s += arow[k] * brow[k];
            C(i, j) = s;
        }
    }
    return C;
}

Mat matmul_tn(const Mat& A, const Mat& B) {
    if (A.rows != B.rows) throw std::invalid_argument("matmul_tn: inner dimensions differ");
    Mat C(A.cols, B.cols);
    for (int k = 0; k < A.rows; ++k) {
        const double* arow = A.row(k);
        const double* brow = B.row(k);
        for (int i = 0; i < A.cols; ++i) {
            double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = C.row(i);
            for (int j = 0; j < B.cols; ++j) crow[j] += aki * brow[j];
        }
    }
    return C;
}

void add_inplace(Mat& A, const Mat& B) {
    if (!A.same_shape(B)) throw std::invalid_argument("add_inplace: shape mismatch");
    for (size_t i = 0; i < A.a.size(); ++i) A.a[i] += B.a[i];
}

bool all_finite(const Mat& A) {
    for (double v : A.a)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace song

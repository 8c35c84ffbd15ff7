#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace cart {

using Vec = std::vector<double>;

// Dense row-major matrix, sized for nets with a few dozen neurons per layer.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0) {}

    double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
};

inline Vec matvec(const Mat& m, const Vec& v) {
    Vec out(static_cast<size_t>(m.rows), 0.0);
    for (int r = 0; r < m.rows; ++r) {
        double s = 0.0;
        const double* row = &m.a[static_cast<size_t>(r) * m.cols];
        for (int c = 0; c < m.cols; ++c) {
            s += row[c] * v[static_cast<size_t>(c)];
        }
        out[static_cast<size_t>(r)] = s;
    }
    return out;
}

// m^T v
inline Vec matvec_transposed(const Mat& m, const Vec& v) {
    Vec out(static_cast<size_t>(m.cols), 0.0);
    for (int r = 0; r < m.rows; ++r) {
        const double* row = &m.a[static_cast<size_t>(r) * m.cols];
        const double vr = v[static_cast<size_t>(r)];
        for (int c = 0; c < m.cols; ++c) {
            out[static_cast<size_t>(c)] += row[c] * vr;
        }
    }
    return out;
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec sub(const Vec& a, const Vec& b) {
    Vec out(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] - b[i];
    }
    return out;
}

inline double mean(const Vec& a) {
    if (a.empty()) {
        return 0.0;
    }
    double s = 0.0;
    for (double v : a) {
        s += v;
    }
    return s / static_cast<double>(a.size());
}

// population variance (divide by n)
inline double variance(const Vec& a) {
    if (a.empty()) {
        return 0.0;
    }
    const double m = mean(a);
    double s = 0.0;
    for (double v : a) {
        const double d = v - m;
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

// Solve A x = b for small dense A by Gaussian elimination with partial
// pivoting. A and b are taken by value and destroyed.
Vec solve_dense(Mat A, Vec b);

}  // namespace cart

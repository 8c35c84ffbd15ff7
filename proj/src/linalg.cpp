#include "cart/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace cart {

Vec solve_dense(Mat a, Vec b) {
    const int n = a.rows;
    if (a.cols != n || static_cast<int>(b.size()) != n) {
        throw std::invalid_argument("solve_dense: shape mismatch");
    }
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        double best = std::fabs(a.at(col, col));
        for (int r = col + 1; r < n; ++r) {
            const double v = std::fabs(a.at(r, col));
            if (v > best) {
                best = v;
                pivot = r;
            }
        }
        if (best < 1e-300) {
            throw std::runtime_error("solve_dense: singular matrix");
        }
        if (pivot != col) {
            for (int c = col; c < n; ++c) {
                std::swap(a.at(pivot, c), a.at(col, c));
            }
            std::swap(b[pivot], b[col]);
        }
        const double inv = 1.0 / a.at(col, col);
        for (int r = col + 1; r < n; ++r) {
            const double f = a.at(r, col) * inv;
            if (f == 0.0) {
                continue;
            }
            for (int c = col; c < n; ++c) {
                a.at(r, c) -= f * a.at(col, c);
            }
            b[r] -= f * b[col];
        }
    }
    Vec x(n, 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) {
            s -= a.at(r, c) * x[c];
        }
        x[r] = s / a.at(r, r);
    }
    return x;
}

}  // namespace cart

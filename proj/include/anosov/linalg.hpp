#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "anosov/error.hpp"

namespace anosov {

template <int D> using Mat = Eigen::Matrix<double, D, D>;
template <int D> using Vec = Eigen::Matrix<double, D, 1>;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

namespace tol {
inline constexpr double factorization = 1e-12;
inline constexpr double algebraic = 1e-9;
inline constexpr double geometric = 1e-8;
inline constexpr double regular_gap = 1e-7;
inline constexpr double loxodromic_gap = 1e-6;
}  // namespace tol

template <int D> struct PositiveQR {
    Mat<D> q;
    Mat<D> r;
};

// Householder QR normalized so that diag(R) > 0.
template <int D> PositiveQR<D> positive_qr(const Mat<D>& a) {
    Eigen::HouseholderQR<Mat<D>> h(a);
    PositiveQR<D> out;
    out.q = h.householderQ();
    out.r = h.matrixQR().template triangularView<Eigen::Upper>();
    for (int i = 0; i < D; ++i) {
        if (out.r(i, i) < 0) {
            out.q.col(i) *= -1.0;
            out.r.row(i) *= -1.0;
        }
    }
    return out;
}

// Log of the positive diagonal of R in a = QR; q receives the orthogonal factor.
// Throws when a diagonal entry is numerically zero.
template <int D> Vec<D> log_r_diagonal(const Mat<D>& a, Mat<D>* q = nullptr) {
    Eigen::HouseholderQR<Mat<D>> h(a);
    const auto& qr = h.matrixQR();
    Vec<D> out;
    for (int i = 0; i < D; ++i) {
        double rii = std::abs(qr(i, i));
        if (!(rii > 0.0) || !std::isfinite(rii))
            throw DegeneracyError("singular factorization in Iwasawa cocycle");
        out(i) = std::log(rii);
    }
    if (q) {
        *q = h.householderQ();
        for (int i = 0; i < D; ++i)
            if (qr(i, i) < 0) q->col(i) *= -1.0;
    }
    return out;
}

// Antidiagonal permutation with one sign flipped when needed to lie in SO(D).
template <int D> Mat<D> longest_weyl_element() {
    Mat<D> w = Mat<D>::Zero();
    for (int i = 0; i < D; ++i) w(i, D - 1 - i) = 1.0;
    int m = D % 4;
    if (m == 2 || m == 3) w(0, D - 1) = -1.0;
    return w;
}

// Fix the sign of each column so its first entry with |x| > 1e-10 is positive.
template <int D> void canonicalize_columns(Mat<D>& frame) {
    for (int j = 0; j < D; ++j) {
        for (int i = 0; i < D; ++i) {
            if (std::abs(frame(i, j)) > 1e-10) {
                if (frame(i, j) < 0) frame.col(j) *= -1.0;
                break;
            }
        }
    }
}

// Haar-random rotation.
template <int D, class Rng> Mat<D> random_rotation(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Mat<D> a;
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) a(i, j) = n(rng);
    Mat<D> q = positive_qr<D>(a).q;
    if (q.determinant() < 0) q.col(0) *= -1.0;
    return q;
}

// Random element of SL(D) with Gaussian entries, rescaled to determinant one.
template <int D, class Rng> Mat<D> random_unimodular(Rng& rng, double spread = 1.0) {
    std::normal_distribution<double> n(0.0, spread);
    Mat<D> a;
    for (;;) {
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j) a(i, j) = n(rng) + (i == j ? 1.0 : 0.0);
        double det = a.determinant();
        if (std::abs(det) < 1e-3) continue;
        if (det < 0) {
            a.row(0) *= -1.0;
            det = -det;
        }
        return a / std::pow(det, 1.0 / D);
    }
}

// ---- exterior powers ----

inline std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    return r;
}

// k-subsets of {0..n-1} in lexicographic order.
inline std::vector<std::vector<int>> subsets(int n, int k) {
    std::vector<std::vector<int>> out;
    std::vector<int> s(k);
    for (int i = 0; i < k; ++i) s[i] = i;
    if (k == 0) return {{}};
    for (;;) {
        out.push_back(s);
        int i = k - 1;
        while (i >= 0 && s[i] == n - k + i) --i;
        if (i < 0) break;
        ++s[i];
        for (int j = i + 1; j < k; ++j) s[j] = s[j - 1] + 1;
    }
    return out;
}

// k-th compound matrix: entry (I, J) is the minor det a[I, J].
inline MatX compound(const MatX& a, int k) {
    const int n = static_cast<int>(a.rows());
    auto sets = subsets(n, k);
    const int m = static_cast<int>(sets.size());
    MatX out(m, m);
    MatX sub(k, k);
    for (int I = 0; I < m; ++I)
        for (int J = 0; J < m; ++J) {
            for (int r = 0; r < k; ++r)
                for (int c = 0; c < k; ++c) sub(r, c) = a(sets[I][r], sets[J][c]);
            out(I, J) = sub.determinant();
        }
    return out;
}

// Pluecker vector of the span of the columns of x (n x k).
inline VecX pluecker(const MatX& x) {
    const int n = static_cast<int>(x.rows()), k = static_cast<int>(x.cols());
    auto sets = subsets(n, k);
    VecX p(sets.size());
    MatX sub(k, k);
    for (std::size_t I = 0; I < sets.size(); ++I) {
        for (int r = 0; r < k; ++r) sub.row(r) = x.row(sets[I][r]);
        p(static_cast<Eigen::Index>(I)) = sub.determinant();
    }
    return p;
}

// Orthonormal basis (n x k) of the k-plane {v : v ^ p = 0} for a decomposable p in Lambda^k R^n.
inline MatX plane_from_pluecker(const VecX& p, int n, int k) {
    auto lower = subsets(n, k);
    auto upper = subsets(n, k + 1);
    MatX wedge = MatX::Zero(static_cast<Eigen::Index>(upper.size()), n);
    for (std::size_t J = 0; J < upper.size(); ++J) {
        const auto& s = upper[J];
        for (int pos = 0; pos <= k; ++pos) {
            int j = s[pos];
            std::vector<int> rest;
            for (int t = 0; t <= k; ++t)
                if (t != pos) rest.push_back(s[t]);
            auto it = std::lower_bound(lower.begin(), lower.end(), rest);
            auto I = static_cast<Eigen::Index>(it - lower.begin());
            double sign = (pos % 2 == 0) ? 1.0 : -1.0;
            wedge(static_cast<Eigen::Index>(J), j) += sign * p(I);
        }
    }
    Eigen::JacobiSVD<MatX> svd(wedge, Eigen::ComputeFullV);
    // singular values sorted decreasingly: kernel is the last k right vectors
    return svd.matrixV().rightCols(k);
}

}  // namespace anosov

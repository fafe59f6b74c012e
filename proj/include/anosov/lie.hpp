#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "anosov/error.hpp"
#include "anosov/linalg.hpp"

namespace anosov {

// ---------------------------------------------------------------- CartanVector

// A point of the trace-zero Cartan subspace.
template <int D> class CartanVector {
public:
    CartanVector() : v_(Vec<D>::Zero()) {}

    // Checked constructor: requires |sum| <= 1e-9.
    explicit CartanVector(const Vec<D>& v) : v_(v) {
        if (!v.allFinite()) throw InputError("non-finite Cartan vector");
        if (std::abs(v.sum()) > tol::algebraic * std::max(1.0, v.cwiseAbs().maxCoeff()))
            throw InputError("Cartan vector is not trace-zero");
    }

    // Orthogonal projection of an arbitrary vector onto the trace-zero subspace.
    static CartanVector project(const Vec<D>& v) {
        CartanVector c;
        c.v_ = v.array() - v.mean();
        return c;
    }

    const Vec<D>& coords() const { return v_; }
    double operator[](int i) const { return v_(i); }
    double norm() const { return v_.norm(); }
    double dot(const CartanVector& o) const { return v_.dot(o.v_); }

    bool in_positive_chamber(double slack = 0.0) const {
        for (int i = 0; i + 1 < D; ++i)
            if (v_(i) < v_(i + 1) - slack) return false;
        return true;
    }

    // alpha_i(v) = v_i - v_{i+1}, i = 1..D-1 (1-based).
    double simple_root(int i) const { return v_(i - 1) - v_(i); }
    double min_simple_root() const {
        double m = std::numeric_limits<double>::infinity();
        for (int i = 1; i < D; ++i) m = std::min(m, simple_root(i));
        return m;
    }
    // omega_k(v) = v_1 + ... + v_k.
    double fundamental_weight(int k) const { return v_.head(k).sum(); }

    CartanVector opposition() const {
        CartanVector c;
        for (int i = 0; i < D; ++i) c.v_(i) = -v_(D - 1 - i);
        return c;
    }

    // Nearest point of the closed positive chamber (isotonic regression, pool adjacent violators).
    CartanVector chamber_projection() const {
        std::vector<double> val, wt;
        std::vector<int> len;
        for (int i = 0; i < D; ++i) {
            val.push_back(v_(i));
            wt.push_back(1.0);
            len.push_back(1);
            while (val.size() > 1 && val[val.size() - 2] < val.back()) {
                double w = wt[wt.size() - 2] + wt.back();
                double m = (val[val.size() - 2] * wt[wt.size() - 2] + val.back() * wt.back()) / w;
                int l = len[len.size() - 2] + len.back();
                val.pop_back(); wt.pop_back(); len.pop_back();
                val.back() = m; wt.back() = w; len.back() = l;
            }
        }
        CartanVector c;
        int pos = 0;
        for (std::size_t b = 0; b < val.size(); ++b)
            for (int j = 0; j < len[b]; ++j) c.v_(pos++) = val[b];
        return c;
    }
    double distance_to_chamber() const { return (v_ - chamber_projection().v_).norm(); }

    CartanVector operator+(const CartanVector& o) const { return raw(v_ + o.v_); }
    CartanVector operator-(const CartanVector& o) const { return raw(v_ - o.v_); }
    CartanVector operator-() const { return raw(-v_); }
    CartanVector operator*(double s) const { return raw(v_ * s); }
    CartanVector& operator+=(const CartanVector& o) { v_ += o.v_; return *this; }
    CartanVector& operator-=(const CartanVector& o) { v_ -= o.v_; return *this; }
    friend CartanVector operator*(double s, const CartanVector& c) { return c * s; }

    static CartanVector zero() { return CartanVector(); }

private:
    static CartanVector raw(const Vec<D>& v) {
        CartanVector c;
        c.v_ = v;
        return c;
    }
    Vec<D> v_;
};

template <int D> CartanVector<D> opposition_involution(const CartanVector<D>& v) { return v.opposition(); }

// ---------------------------------------------------------------- LinearForm

// A linear functional on the Cartan subspace, kept in the gauge sum(coefficients) = 0.
template <int D> class LinearForm {
public:
    LinearForm() : c_(Vec<D>::Zero()) {}
    explicit LinearForm(const Vec<D>& coeffs) {
        if (!coeffs.allFinite()) throw InputError("non-finite linear form");
        c_ = coeffs.array() - coeffs.mean();
    }
    static LinearForm from(std::initializer_list<double> xs) {
        if (static_cast<int>(xs.size()) != D) throw InputError("linear form has wrong length");
        Vec<D> v;
        int i = 0;
        for (double x : xs) v(i++) = x;
        return LinearForm(v);
    }
    static LinearForm omega(int k) {
        if (k < 1 || k >= D) throw InputError("fundamental weight index out of range");
        Vec<D> v = Vec<D>::Zero();
        v.head(k).setOnes();
        return LinearForm(v);
    }
    static LinearForm alpha(int k) {
        if (k < 1 || k >= D) throw InputError("simple root index out of range");
        Vec<D> v = Vec<D>::Zero();
        v(k - 1) = 1.0;
        v(k) = -1.0;
        return LinearForm(v);
    }
    // Sum of positive roots; equals sum of the fundamental weights.
    static LinearForm two_rho() {
        Vec<D> v;
        for (int i = 0; i < D; ++i) v(i) = D - 1 - 2 * i;
        return LinearForm(v);
    }

    const Vec<D>& coefficients() const { return c_; }
    double operator()(const CartanVector<D>& v) const { return c_.dot(v.coords()); }
    double norm() const { return c_.norm(); }

    // psi o i
    LinearForm opposition() const {
        Vec<D> v;
        for (int i = 0; i < D; ++i) v(i) = -c_(D - 1 - i);
        return LinearForm(v);
    }
    LinearForm operator*(double s) const { return LinearForm(c_ * s); }
    LinearForm operator+(const LinearForm& o) const { return LinearForm(c_ + o.c_); }

    // Coordinates a_k with psi = sum_k a_k omega_k.
    Eigen::Matrix<double, D - 1, 1> weight_coordinates() const {
        Eigen::Matrix<double, D - 1, 1> a;
        for (int k = 0; k + 1 < D; ++k) a(k) = c_(k) - c_(k + 1);
        return a;
    }
    bool is_strongly_positive(double slack = 1e-12) const {
        return (weight_coordinates().array() >= -slack).all();
    }

private:
    Vec<D> c_;
};

// ---------------------------------------------------------------- GroupElement

// Unimodular matrix carried together with its inverse, so that products of long
// words keep the small singular directions accurate.
template <int D> class GroupElement {
public:
    using Matrix = Mat<D>;

    GroupElement() : m_(Matrix::Identity()), inv_(Matrix::Identity()) {}

    // Validated constructor: finite entries and |det - 1| <= 1e-9 * scale.
    explicit GroupElement(const Matrix& m) : m_(m) {
        if (!m.allFinite()) throw InputError("non-finite matrix entries");
        double scale = 1.0;
        for (int j = 0; j < D; ++j) scale *= std::max(1.0, m.col(j).norm());
        if (std::abs(m.determinant() - 1.0) > tol::algebraic * scale)
            throw InputError("matrix is not unimodular");
        inv_ = m.inverse();
    }

    // Result of group operations; skips the determinant check.
    static GroupElement trusted(const Matrix& m) { return trusted(m, m.inverse()); }
    static GroupElement trusted(const Matrix& m, const Matrix& inv) {
        GroupElement g;
        g.m_ = m;
        g.inv_ = inv;
        return g;
    }
    // Rescale an invertible matrix with positive determinant to determinant one.
    static GroupElement normalized(const Matrix& m) {
        if (!m.allFinite()) throw InputError("non-finite matrix entries");
        double det = m.determinant();
        if (!(det > 0)) throw InputError("normalization needs positive determinant");
        return trusted(m / std::pow(det, 1.0 / D));
    }
    static GroupElement identity() { return GroupElement(); }
    static GroupElement diagonal(const Vec<D>& logs) {
        Vec<D> c = logs.array() - logs.mean();
        return trusted(c.array().exp().matrix().asDiagonal(), (-c).array().exp().matrix().asDiagonal());
    }

    const Matrix& matrix() const { return m_; }
    const Matrix& inverse_matrix() const { return inv_; }
    GroupElement inverse() const { return trusted(inv_, m_); }
    GroupElement operator*(const GroupElement& o) const { return trusted(m_ * o.m_, o.inv_ * inv_); }

private:
    Matrix m_;
    Matrix inv_;
};

// ---------------------------------------------------------------- Flag

// A full flag stored as its canonical orthogonal frame.
template <int D> class Flag {
public:
    Flag() : frame_(Mat<D>::Identity()) {}

    // Canonical flag of the nested column spans of an invertible basis.
    explicit Flag(const Mat<D>& basis) {
        if (!basis.allFinite()) throw InputError("non-finite flag basis");
        frame_ = positive_qr<D>(basis).q;
        canonicalize_columns<D>(frame_);
    }
    static Flag standard() { return Flag(); }
    static Flag opposite_standard() { return Flag(longest_weyl_element<D>()); }

    const Mat<D>& frame() const { return frame_; }
    auto subspace(int k) const { return frame_.leftCols(k); }
    Vec<D> line() const { return frame_.col(0); }

private:
    Mat<D> frame_;
};

// Max over k of the sine of the largest principal angle between the k-planes,
// computed as the norm of the projection residual to avoid the sqrt(1 - cos^2) floor.
template <int D> double chordal_distance(const Flag<D>& a, const Flag<D>& b) {
    const Mat<D>& x = a.frame();
    const Mat<D>& y = b.frame();
    double out = 0.0;
    for (int k = 1; k < D; ++k) {
        double s;
        if (k == 1) {
            Vec<D> r = x.col(0) - y.col(0) * y.col(0).dot(x.col(0));
            s = r.norm();
        } else if (k == D - 1) {
            Vec<D> r = x.col(D - 1) - y.col(D - 1) * y.col(D - 1).dot(x.col(D - 1));
            s = r.norm();
        } else {
            MatX r = x.leftCols(k) - y.leftCols(k) * (y.leftCols(k).transpose() * x.leftCols(k));
            Eigen::JacobiSVD<MatX> svd(r);
            s = svd.singularValues()(0);
        }
        out = std::max(out, std::min(1.0, s));
    }
    return out;
}

// |det(X_k^T Y'_k)| for k = 1..D-1, Y'_k the last k columns of eta's frame.
template <int D> std::array<double, D - 1> pairing_minors(const Flag<D>& xi, const Flag<D>& eta) {
    std::array<double, D - 1> out{};
    const Mat<D>& x = xi.frame();
    const Mat<D>& y = eta.frame();
    for (int k = 1; k < D; ++k) {
        if (k == 1) {
            out[0] = std::abs(x.col(0).dot(y.col(D - 1)));
        } else {
            MatX m = x.leftCols(k).transpose() * y.rightCols(k);
            out[k - 1] = std::abs(m.determinant());
        }
    }
    return out;
}

template <int D> double transversality_margin(const Flag<D>& xi, const Flag<D>& eta) {
    auto m = pairing_minors(xi, eta);
    return *std::min_element(m.begin(), m.end());
}

template <int D> struct FlagPair {
    Flag<D> xi;
    Flag<D> eta;
    double transversality_margin = 0.0;

    FlagPair() = default;
    FlagPair(const Flag<D>& a, const Flag<D>& b)
        : xi(a), eta(b), transversality_margin(anosov::transversality_margin(a, b)) {}
    bool transversal(double t = tol::factorization) const { return transversality_margin > t; }
};

template <int D> struct HopfPoint {
    Flag<D> xi;
    Flag<D> eta;
    CartanVector<D> b;
};

// ---------------------------------------------------------------- exterior tracking

// g together with g^{-1} and the middle compounds Lambda^k g, 2 <= k <= D-2.
// Products of long words keep every fundamental weight of mu and lambda accurate
// because each omega_k is read off the top of a separately tracked matrix.
template <int D> struct ExteriorTrack {
    Mat<D> direct = Mat<D>::Identity();
    Mat<D> inverse = Mat<D>::Identity();
    std::vector<MatX> middle;

    static ExteriorTrack of(const GroupElement<D>& g) { return of(g.matrix(), g.inverse_matrix()); }
    static ExteriorTrack of(const Mat<D>& g, const Mat<D>& ginv) {
        ExteriorTrack t;
        t.direct = g;
        t.inverse = ginv;
        for (int k = 2; k <= D - 2; ++k) t.middle.push_back(compound(MatX(g), k));
        return t;
    }
    static ExteriorTrack identity() {
        ExteriorTrack t;
        for (int k = 2; k <= D - 2; ++k) {
            auto n = static_cast<Eigen::Index>(binomial(D, k));
            t.middle.push_back(MatX::Identity(n, n));
        }
        return t;
    }
    // this * right
    ExteriorTrack then(const ExteriorTrack& right) const {
        ExteriorTrack t;
        t.direct = direct * right.direct;
        t.inverse = right.inverse * inverse;
        for (std::size_t i = 0; i < middle.size(); ++i) t.middle.push_back(middle[i] * right.middle[i]);
        return t;
    }
};

namespace detail {

template <class M> double spectral_radius(const M& m) {
    Eigen::EigenSolver<M> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

template <int D> CartanVector<D> from_weights(const std::array<double, D - 1>& w) {
    Vec<D> v;
    v(0) = w[0];
    for (int k = 1; k < D - 1; ++k) v(k) = w[k] - w[k - 1];
    v(D - 1) = -w[D - 2];
    // guard against rounding inversions
    std::sort(v.data(), v.data() + D, std::greater<double>());
    return CartanVector<D>::project(v);
}

// Orthonormal frame from nested subspaces given by their bases (D x k each, k = 1..D-1).
template <int D> Mat<D> frame_from_nested(const std::vector<MatX>& bases) {
    Mat<D> q = Mat<D>::Zero();
    for (int k = 1; k < D; ++k) {
        MatX r = bases[k - 1];
        for (int j = 0; j < k - 1; ++j) {
            Vec<D> qj = q.col(j);
            r -= qj * (qj.transpose() * r);
        }
        Eigen::JacobiSVD<MatX> svd(r, Eigen::ComputeThinU);
        Vec<D> v = svd.matrixU().col(0);
        for (int j = 0; j < k - 1; ++j) v -= q.col(j).dot(v) * q.col(j);
        q.col(k - 1) = v.normalized();
    }
    // last column: orthogonal complement
    Vec<D> best = Vec<D>::Zero();
    for (int e = 0; e < D; ++e) {
        Vec<D> v = Vec<D>::Unit(e);
        for (int j = 0; j < D - 1; ++j) v -= q.col(j).dot(v) * q.col(j);
        if (v.norm() > best.norm()) best = v;
    }
    q.col(D - 1) = best.normalized();
    return q;
}

}  // namespace detail

template <int D> CartanVector<D> cartan_projection(const ExteriorTrack<D>& t) {
    std::array<double, D - 1> w{};
    Eigen::JacobiSVD<Mat<D>> s1(t.direct);
    w[0] = std::log(s1.singularValues()(0));
    if (D > 2) {
        Eigen::JacobiSVD<Mat<D>> s2(t.inverse);
        w[D - 2] = std::log(s2.singularValues()(0));
    }
    for (int k = 2; k <= D - 2; ++k) {
        Eigen::JacobiSVD<MatX> s(t.middle[k - 2]);
        w[k - 1] = std::log(s.singularValues()(0));
    }
    return detail::from_weights<D>(w);
}

template <int D> CartanVector<D> jordan_projection(const ExteriorTrack<D>& t) {
    std::array<double, D - 1> w{};
    w[0] = std::log(detail::spectral_radius(t.direct));
    if (D > 2) w[D - 2] = std::log(detail::spectral_radius(t.inverse));
    for (int k = 2; k <= D - 2; ++k) w[k - 1] = std::log(detail::spectral_radius(t.middle[k - 2]));
    return detail::from_weights<D>(w);
}

// kappa_1 flag: k-plane spanned by the top k left singular vectors, read off each compound.
template <int D> Flag<D> cartan_attracting_flag(const ExteriorTrack<D>& t) {
    std::vector<MatX> bases;
    Eigen::JacobiSVD<Mat<D>> s1(t.direct, Eigen::ComputeFullU);
    bases.push_back(MatX(s1.matrixU().col(0)));
    for (int k = 2; k <= D - 2; ++k) {
        Eigen::JacobiSVD<MatX> s(t.middle[k - 2], Eigen::ComputeFullU);
        bases.push_back(plane_from_pluecker(s.matrixU().col(0), D, k));
    }
    if (D > 2) {
        Eigen::JacobiSVD<Mat<D>> s2(t.inverse, Eigen::ComputeFullV);
        Vec<D> normal = s2.matrixV().col(0);
        // hyperplane normal^perp
        Mat<D> h = positive_qr<D>((Mat<D>() << normal, Mat<D>::Identity().leftCols(D - 1)).finished()).q;
        bases.push_back(MatX(h.rightCols(D - 1)));
    }
    return Flag<D>(detail::frame_from_nested<D>(bases));
}

// ---------------------------------------------------------------- projections

template <int D> struct CartanDecomposition {
    Mat<D> k1;
    CartanVector<D> mu;
    Mat<D> k2;
    bool regular = false;
};

// g = k1 exp(mu) k2 with k1, k2 in SO(D); frames are meaningful only when regular.
template <int D> CartanDecomposition<D> cartan_decomposition(const GroupElement<D>& g) {
    Eigen::JacobiSVD<Mat<D>> svd(g.matrix(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    CartanDecomposition<D> out;
    Mat<D> u = svd.matrixU(), v = svd.matrixV();
    if (u.determinant() < 0) {
        u.col(D - 1) *= -1.0;
        v.col(D - 1) *= -1.0;
    }
    out.k1 = u;
    out.k2 = v.transpose();
    out.mu = CartanVector<D>::project(svd.singularValues().array().log().matrix());
    out.regular = out.mu.min_simple_root() > tol::regular_gap;
    return out;
}

template <int D> CartanVector<D> cartan_projection(const GroupElement<D>& g) {
    if (!g.matrix().allFinite()) throw InputError("non-finite matrix");
    return cartan_projection(ExteriorTrack<D>::of(g));
}

template <int D> CartanVector<D> jordan_projection(const GroupElement<D>& g) {
    if (!g.matrix().allFinite()) throw InputError("non-finite matrix");
    return jordan_projection(ExteriorTrack<D>::of(g));
}

template <int D> bool is_loxodromic(const CartanVector<D>& lambda, double gap = tol::loxodromic_gap) {
    return lambda.min_simple_root() > gap;
}
template <int D> bool is_loxodromic(const GroupElement<D>& g) { return is_loxodromic(jordan_projection(g)); }

// a(p, q) = mu(p^{-1} q)
template <int D> CartanVector<D> symmetric_distance(const GroupElement<D>& p, const GroupElement<D>& q) {
    return cartan_projection(p.inverse() * q);
}

// ---------------------------------------------------------------- cocycles and actions

template <int D> CartanVector<D> iwasawa_sigma(const GroupElement<D>& g, const Flag<D>& xi) {
    return CartanVector<D>::project(log_r_diagonal<D>(g.matrix() * xi.frame()));
}

template <int D> struct IwasawaDecomposition {
    Mat<D> k;
    CartanVector<D> sigma;
    Mat<D> n;  // upper unitriangular
};

// g = k exp(sigma) n
template <int D> IwasawaDecomposition<D> iwasawa_decomposition(const GroupElement<D>& g) {
    auto qr = positive_qr<D>(g.matrix());
    IwasawaDecomposition<D> out;
    out.k = qr.q;
    Vec<D> d = qr.r.diagonal();
    out.sigma = CartanVector<D>::project(d.array().log().matrix());
    out.n = d.cwiseInverse().asDiagonal() * qr.r;
    return out;
}

template <int D> Flag<D> flag_action(const GroupElement<D>& g, const Flag<D>& xi) {
    return Flag<D>(g.matrix() * xi.frame());
}

// beta_xi(p o, q o) = sigma(p^{-1}, xi) - sigma(q^{-1}, xi)
template <int D>
CartanVector<D> busemann(const Flag<D>& xi, const GroupElement<D>& p, const GroupElement<D>& q) {
    return iwasawa_sigma(p.inverse(), xi) - iwasawa_sigma(q.inverse(), xi);
}

template <int D> FlagPair<D> visual_flags(const GroupElement<D>& g) {
    return FlagPair<D>(Flag<D>(g.matrix()), Flag<D>(g.matrix() * longest_weyl_element<D>()));
}

template <int D> Flag<D> attracting_flag(const GroupElement<D>& g) {
    Eigen::EigenSolver<Mat<D>> es(g.matrix(), true);
    auto vals = es.eigenvalues();
    auto vecs = es.eigenvectors();
    std::array<int, D> order;
    for (int i = 0; i < D; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(vals(a)) > std::abs(vals(b)); });
    Mat<D> basis;
    for (int i = 0; i < D; ++i) {
        if (i + 1 < D) {
            double gap = std::log(std::abs(vals(order[i]))) - std::log(std::abs(vals(order[i + 1])));
            if (!(gap > tol::loxodromic_gap)) throw LoxodromyError("element is not loxodromic");
        }
        basis.col(i) = vecs.col(order[i]).real();
    }
    return Flag<D>(basis);
}

// ---------------------------------------------------------------- Gromov product

// Representation formula: omega_k(G) = -log |det(X_k^T Y'_k)|.
template <int D> CartanVector<D> gromov_product(const FlagPair<D>& pair) {
    auto m = pairing_minors(pair.xi, pair.eta);
    std::array<double, D - 1> w{};
    for (int k = 0; k < D - 1; ++k) {
        if (!(m[k] > tol::factorization)) throw TransversalityError("flags are not transversal");
        w[k] = -std::log(m[k]);
    }
    Vec<D> v;
    v(0) = w[0];
    for (int k = 1; k < D - 1; ++k) v(k) = w[k] - w[k - 1];
    v(D - 1) = -w[D - 2];
    return CartanVector<D>::project(v);
}

template <int D> CartanVector<D> gromov_product(const Flag<D>& xi, const Flag<D>& eta) {
    return gromov_product(FlagPair<D>(xi, eta));
}

// Some g with g+ = xi and g- = eta: column k spans xi_k cap eta_{D+1-k}.
template <int D> GroupElement<D> element_with_visual_flags(const FlagPair<D>& pair) {
    if (!pair.transversal()) throw TransversalityError("flags are not transversal");
    Mat<D> g;
    for (int k = 1; k <= D; ++k) {
        int m = D + 1 - k;
        MatX a(D, k + m);
        a.leftCols(k) = pair.xi.frame().leftCols(k);
        a.rightCols(m) = -pair.eta.frame().leftCols(m);
        Eigen::JacobiSVD<MatX> svd(a, Eigen::ComputeFullV);
        VecX n = svd.matrixV().col(k + m - 1);
        g.col(k - 1) = (pair.xi.frame().leftCols(k) * n.head(k)).normalized();
    }
    if (g.determinant() < 0) g.col(0) *= -1.0;
    return GroupElement<D>::normalized(g);
}

// Definition path: G = beta_{g+}(e, g) + i beta_{g-}(e, g) = sigma(g, e+) + i sigma(g, e-).
template <int D> CartanVector<D> gromov_product_busemann(const FlagPair<D>& pair) {
    GroupElement<D> g = element_with_visual_flags(pair);
    GroupElement<D> e;
    return busemann(pair.xi, e, g) + busemann(pair.eta, e, g).opposition();
}

}  // namespace anosov

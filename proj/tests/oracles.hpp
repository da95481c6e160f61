#pragma once

// Independent reference computations used to check the library.  None of
// these call the library routine they are compared against.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;
using Complex = std::complex<double>;

// G(s) = C (sI - A)^{-1} B + D through the eigendecomposition of A.
inline CMatrix transfer_modal(const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& D, Complex s) {
    CMatrix out = D.cast<Complex>();
    if (A.rows() == 0)
        return out;
    Eigen::EigenSolver<Matrix> es(A);
    const CMatrix V = es.eigenvectors();
    const Eigen::VectorXcd lam = es.eigenvalues();
    const CMatrix W = V.inverse();
    CMatrix mid = W * B.cast<Complex>();
    for (Eigen::Index i = 0; i < mid.rows(); ++i)
        mid.row(i) /= (s - lam(i));
    return out + C.cast<Complex>() * V * mid;
}

// G(s) via Householder QR of (sI - A), a different factorization path.
inline CMatrix transfer_qr(const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& D, Complex s) {
    CMatrix out = D.cast<Complex>();
    if (A.rows() == 0)
        return out;
    const CMatrix M = s * CMatrix::Identity(A.rows(), A.rows()) - A.cast<Complex>();
    return out + C.cast<Complex>() * M.householderQr().solve(B.cast<Complex>());
}

inline double sigma_max(const CMatrix& M) {
    if (M.size() == 0)
        return 0.0;
    return Eigen::JacobiSVD<CMatrix>(M).singularValues()(0);
}

// Dense log grid maximum of sigma_max(G(jw)), plus w = 0.
inline double grid_peak(const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& D, int points = 4000,
                        double lo = -4.0, double hi = 4.0) {
    double peak = sigma_max(transfer_qr(A, B, C, D, Complex(0.0, 0.0)));
    for (int k = 0; k < points; ++k) {
        const double w = std::pow(10.0, lo + (hi - lo) * k / (points - 1));
        peak = std::max(peak, sigma_max(transfer_qr(A, B, C, D, Complex(0.0, w))));
    }
    return peak;
}

// Golden-section refinement of the peak around the best grid point.
inline double refined_peak(const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& D, int points = 4000) {
    double best_w = 0.0;
    double best = sigma_max(transfer_qr(A, B, C, D, Complex(0.0, 0.0)));
    std::vector<double> ws;
    for (int k = 0; k < points; ++k)
        ws.push_back(std::pow(10.0, -4.0 + 8.0 * k / (points - 1)));
    std::size_t bi = 0;
    for (std::size_t k = 0; k < ws.size(); ++k) {
        const double v = sigma_max(transfer_qr(A, B, C, D, Complex(0.0, ws[k])));
        if (v > best) {
            best = v;
            best_w = ws[k];
            bi = k;
        }
    }
    if (best_w == 0.0)
        return best;
    double a = ws[bi > 0 ? bi - 1 : 0], b = ws[std::min(bi + 1, ws.size() - 1)];
    auto f = [&](double w) { return sigma_max(transfer_qr(A, B, C, D, Complex(0.0, w))); };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 100; ++it) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        if (f(c) > f(d))
            b = d;
        else
            a = c;
    }
    return std::max(best, f(0.5 * (a + b)));
}

// Characteristic polynomial coefficients (highest degree first) from roots.
inline std::vector<Complex> poly_from_roots(const Eigen::VectorXcd& roots) {
    std::vector<Complex> p{1.0};
    for (Eigen::Index i = 0; i < roots.size(); ++i) {
        std::vector<Complex> q(p.size() + 1, 0.0);
        for (std::size_t k = 0; k < p.size(); ++k) {
            q[k] += p[k];
            q[k + 1] -= p[k] * roots(i);
        }
        p = q;
    }
    return p;
}

// Greedy nearest matching of two eigenvalue multisets; returns the largest
// matched distance (infinity on a size mismatch).
inline double multiset_distance(std::vector<Complex> a, std::vector<Complex> b) {
    if (a.size() != b.size())
        return INFINITY;
    double worst = 0.0;
    std::sort(a.begin(), a.end(), [](Complex x, Complex y) { return std::abs(x) > std::abs(y); });
    for (const Complex& x : a) {
        auto it = std::min_element(b.begin(), b.end(),
                                   [&](Complex p, Complex q) { return std::abs(p - x) < std::abs(q - x); });
        worst = std::max(worst, std::abs(*it - x));
        b.erase(it);
    }
    return worst;
}

// First-order eigenvalue error of a backward-stable solver: the largest
// per-eigenvalue condition number ||x_i|| ||y_i|| / |y_i^H x_i| times
// eps * ||A||, with left eigenvectors taken as rows of V^{-1}.  Infinite for
// a defective matrix.
inline double eigen_error_estimate(const Matrix& A) {
    if (A.rows() == 0)
        return 0.0;
    Eigen::EigenSolver<Matrix> es(A);
    const CMatrix V = es.eigenvectors();
    const Eigen::FullPivLU<CMatrix> lu(V);
    if (!lu.isInvertible())
        return INFINITY;
    const CMatrix W = lu.inverse();
    double kappa = 0.0;
    for (Eigen::Index i = 0; i < V.cols(); ++i)
        kappa = std::max(kappa, V.col(i).norm() * W.row(i).norm());
    if (!std::isfinite(kappa))
        return INFINITY;
    return kappa * std::numeric_limits<double>::epsilon() * A.norm();
}

// Scalar closed-form values.
inline double second_order_peak(double zeta) { return 1.0 / (2.0 * zeta * std::sqrt(1.0 - zeta * zeta)); }
inline double second_order_peak_freq(double zeta, double wn = 1.0) { return wn * std::sqrt(1.0 - 2.0 * zeta * zeta); }

} // namespace oracle

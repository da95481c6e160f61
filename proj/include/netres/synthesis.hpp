#pragma once

// Gain synthesis and system norms: Lyapunov and algebraic Riccati solvers,
// LQR-based stabilizing gains, observer gains, and the H-infinity norm.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "netres/error.hpp"
#include "netres/lti.hpp"

namespace netres {

// ---------------------------------------------------------------------------
// Controllability / observability
// ---------------------------------------------------------------------------

inline constexpr double kRankTolerance = 1e-8;

// Numerical rank with threshold tol * sigma_max.
inline Index numerical_rank(const Matrix& M, double rel_tol = kRankTolerance) {
    if (M.size() == 0)
        return 0;
    const Vector sv = Eigen::JacobiSVD<Matrix>(M).singularValues();
    if (sv(0) == 0.0)
        return 0;
    Index r = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > rel_tol * sv(0))
            ++r;
    return r;
}

// [B, AB, ..., A^{n-1}B] with every block column-normalized to unit max-norm
// so high powers of A do not swamp the rank test.
inline Matrix krylov_matrix(const Matrix& A, const Matrix& B) {
    const Index n = A.rows();
    Matrix K(n, n * B.cols());
    Matrix block = B;
    for (Index k = 0; k < n; ++k) {
        const double s = block.cwiseAbs().maxCoeff();
        if (s > 0)
            block /= s;
        K.middleCols(k * B.cols(), B.cols()) = block;
        block = A * block;
    }
    return K;
}

namespace detail {

// Popov-Belevitch-Hautus test over the eigenvalues selected by `consider`.
template<typename Pred>
bool pbh_full_rank(const Matrix& A, const Matrix& B, double rel_tol, Pred consider) {
    const Index n = A.rows();
    if (n == 0)
        return true;
    const double scale = std::max(1.0, sigma_max(Matrix((Matrix(n, n + B.cols()) << A, B).finished())));
    const CVector ev = eigenvalues(A);
    for (Index i = 0; i < n; ++i) {
        if (!consider(ev(i)))
            continue;
        CMatrix M(n, n + B.cols());
        M << ev(i) * CMatrix::Identity(n, n) - A.cast<Complex>(), B.cast<Complex>();
        const Vector sv = Eigen::JacobiSVD<CMatrix>(M).singularValues();
        if (sv(n - 1) <= rel_tol * scale)
            return false;
    }
    return true;
}

} // namespace detail

inline bool is_controllable(const Matrix& A, const Matrix& B, double rel_tol = kRankTolerance) {
    return detail::pbh_full_rank(A, B, rel_tol, [](Complex) { return true; });
}

inline bool is_observable(const Matrix& A, const Matrix& C, double rel_tol = kRankTolerance) {
    return is_controllable(A.transpose(), C.transpose(), rel_tol);
}

inline bool is_stabilizable(const Matrix& A, const Matrix& B, double rel_tol = kRankTolerance) {
    return detail::pbh_full_rank(A, B, rel_tol, [](Complex l) { return l.real() >= 0.0; });
}

inline bool is_detectable(const Matrix& A, const Matrix& C, double rel_tol = kRankTolerance) {
    return is_stabilizable(A.transpose(), C.transpose(), rel_tol);
}

// ---------------------------------------------------------------------------
// Lyapunov
// ---------------------------------------------------------------------------

// Solves A X + X A^T + Q = 0 by Bartels-Stewart on the complex Schur form.
inline Matrix solve_lyapunov(const Matrix& A, const Matrix& Q) {
    const Index n = A.rows();
    if (A.cols() != n || Q.rows() != n || Q.cols() != n)
        throw DimensionError("solve_lyapunov: shape mismatch");
    if (n == 0)
        return Matrix(0, 0);
    Eigen::ComplexSchur<CMatrix> schur(A.cast<Complex>());
    if (schur.info() != Eigen::Success)
        throw NumericalError("solve_lyapunov: Schur decomposition failed");
    const CMatrix& T = schur.matrixT();
    const CMatrix& U = schur.matrixU();
    const CMatrix Ct = -(U.adjoint() * Q.cast<Complex>() * U);

    // T Y + Y T^H = Ct, columns from last to first.
    CMatrix Y = CMatrix::Zero(n, n);
    for (Index j = n - 1; j >= 0; --j) {
        CVector rhs = Ct.col(j);
        for (Index k = j + 1; k < n; ++k)
            rhs -= std::conj(T(j, k)) * Y.col(k);
        CMatrix M = T;
        M.diagonal().array() += std::conj(T(j, j));
        for (Index i = 0; i < n; ++i)
            if (std::abs(M(i, i)) < 1e-300)
                throw NumericalError("solve_lyapunov: A and -A^T share an eigenvalue");
        Y.col(j) = M.triangularView<Eigen::Upper>().solve(rhs);
    }
    Matrix X = (U * Y * U.adjoint()).real();
    return 0.5 * (X + X.transpose());
}

// ---------------------------------------------------------------------------
// Continuous algebraic Riccati equation
// ---------------------------------------------------------------------------

struct RiccatiSolution {
    Matrix P;
    Matrix K;
    double residual_norm = 0.0; // ||A'P + PA - PBR^{-1}B'P + Q||_F / max(1, ||P||_F)
};

inline double care_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& Rw, const Matrix& P) {
    const Matrix res =
        A.transpose() * P + P * A - P * B * Rw.llt().solve(B.transpose() * P) + Q;
    return res.norm() / std::max(1.0, P.norm());
}

namespace detail {

// Moves eigenvalues with negative real part to the leading block of a
// complex Schur form by adjacent Givens swaps.
inline void order_schur_stable_first(CMatrix& T, CMatrix& U) {
    const Index N = T.rows();
    bool swapped = true;
    while (swapped) {
        swapped = false;
        for (Index k = 0; k + 1 < N; ++k) {
            if (T(k, k).real() >= 0.0 && T(k + 1, k + 1).real() < 0.0) {
                Eigen::JacobiRotation<Complex> rot;
                rot.makeGivens(T(k, k + 1), T(k + 1, k + 1) - T(k, k));
                T.applyOnTheLeft(k, k + 1, rot.adjoint());
                T.applyOnTheRight(k, k + 1, rot);
                U.applyOnTheRight(k, k + 1, rot);
                T(k + 1, k) = Complex(0.0, 0.0);
                swapped = true;
            }
        }
    }
}

} // namespace detail

inline constexpr double kCareResidualLimit = 1e-8;

// Stabilizing solution P of A'P + PA - P B Rw^{-1} B' P + Q = 0 from the
// stable invariant subspace of the Hamiltonian, polished by Newton-Kleinman
// steps.  K = Rw^{-1} B' P and A - BK is Hurwitz.
inline RiccatiSolution solve_care(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& Rw) {
    const Index n = A.rows();
    const Index m = B.cols();
    if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || Rw.rows() != m || Rw.cols() != m)
        throw DimensionError("solve_care: shape mismatch");
    if (n == 0)
        return {Matrix(0, 0), Matrix(m, 0), 0.0};

    const Matrix Rs = 0.5 * (Rw + Rw.transpose());
    Eigen::LLT<Matrix> rllt(Rs);
    if (m > 0 && rllt.info() != Eigen::Success)
        throw PreconditionError("solve_care: input weight R_w is not positive definite");
    const Matrix Qs = 0.5 * (Q + Q.transpose());
    {
        Eigen::SelfAdjointEigenSolver<Matrix> qe(Qs, Eigen::EigenvaluesOnly);
        if (qe.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, Qs.norm()))
            throw PreconditionError("solve_care: state weight Q is not positive semidefinite");
    }

    const Matrix G = m > 0 ? Matrix(B * rllt.solve(B.transpose())) : Matrix(Matrix::Zero(n, n));
    Matrix H(2 * n, 2 * n);
    H << A, -G, -Qs, -A.transpose();

    Eigen::ComplexSchur<CMatrix> schur(H.cast<Complex>());
    if (schur.info() != Eigen::Success)
        throw NumericalError("solve_care: Schur decomposition of the Hamiltonian failed");
    CMatrix T = schur.matrixT();
    CMatrix U = schur.matrixU();

    const double axis_tol = 1e-10 * std::max(1.0, H.norm());
    Index stable = 0;
    for (Index i = 0; i < 2 * n; ++i) {
        if (std::abs(T(i, i).real()) <= axis_tol)
            throw NumericalError("solve_care: Hamiltonian has eigenvalues on the imaginary axis");
        if (T(i, i).real() < 0.0)
            ++stable;
    }
    if (stable != n)
        throw NumericalError("solve_care: Hamiltonian stable subspace has wrong dimension");

    detail::order_schur_stable_first(T, U);
    const CMatrix U11 = U.topLeftCorner(n, n);
    const CMatrix U21 = U.bottomLeftCorner(n, n);
    Eigen::PartialPivLU<CMatrix> lu(U11.transpose());
    if (!(lu.rcond() > 1e-14))
        throw NumericalError("solve_care: stable subspace basis is singular (pair not stabilizable)");
    Matrix P = lu.solve(U21.transpose()).transpose().real();
    P = 0.5 * (P + P.transpose());

    auto gain = [&](const Matrix& X) -> Matrix {
        return m > 0 ? Matrix(rllt.solve(B.transpose() * X)) : Matrix(Matrix::Zero(m, n));
    };
    double residual = care_residual(A, B, Qs, Rs, P);
    for (int step = 0; step < 4 && residual > 1e-13; ++step) {
        const Matrix K = gain(P);
        const Matrix Ak = A - B * K;
        if (!is_hurwitz(Ak, 0.0).hurwitz)
            break;
        Matrix next = solve_lyapunov(Ak.transpose(), Qs + K.transpose() * Rs * K);
        const double r = care_residual(A, B, Qs, Rs, next);
        if (!(r < residual))
            break;
        P = next;
        residual = r;
    }

    RiccatiSolution sol{P, gain(P), residual};
    if (!(sol.residual_norm <= kCareResidualLimit))
        throw NumericalError("solve_care: residual " + std::to_string(sol.residual_norm) + " above limit");
    if (!is_hurwitz(A - B * sol.K, 0.0).hurwitz)
        throw NumericalError("solve_care: closed loop A - BK is not Hurwitz");
    return sol;
}

// Identity-scaled LQR weights: Q = state * I, R = input * I.
struct LqrWeights {
    double state = 1.0;
    double input = 1.0;
};

inline RiccatiSolution lqr(const Matrix& A, const Matrix& B, const LqrWeights& w = {}) {
    if (!(w.state >= 0.0) || !(w.input > 0.0))
        throw PreconditionError("lqr: weights must satisfy state >= 0, input > 0");
    try {
        return solve_care(A, B, w.state * Matrix::Identity(A.rows(), A.rows()),
                          w.input * Matrix::Identity(B.cols(), B.cols()));
    } catch (const NumericalError& e) {
        if (A.rows() == B.rows() && !is_stabilizable(A, B))
            throw PreconditionError("lqr: uncontrollable unstable modes");
        throw;
    }
}

// Theta with A + R*Theta Hurwitz, Theta = -K from the LQR problem on (A, R).
inline Matrix design_theta(const Matrix& A, const Matrix& R, const LqrWeights& w = {}) {
    return -lqr(A, R, w).K;
}

// H with A - H*S Hurwitz, from the dual LQR problem on (A', S').
inline Matrix design_observer_gain(const Matrix& A, const Matrix& S, const LqrWeights& w = {}) {
    try {
        return lqr(A.transpose(), S.transpose(), w).K.transpose();
    } catch (const PreconditionError&) {
        throw PreconditionError("design_observer_gain: unobservable unstable modes");
    }
}

// ---------------------------------------------------------------------------
// H-infinity norm
// ---------------------------------------------------------------------------

struct HinfResult {
    double norm = 0.0;        // certified upper end of the final bracket
    double lower_bound = 0.0; // largest singular value actually attained
    double peak_omega = 0.0;
    int iterations = 0;
};

namespace detail {

// Imaginary-axis eigenvalue frequencies of the gamma-Hamiltonian; empty when
// gamma exceeds the norm.
inline std::vector<double> hamiltonian_axis_crossings(const StateSpace& G, double gamma) {
    const Index n = G.states();
    const Index m = G.inputs();
    const Index q = G.outputs();
    const Matrix& A = G.A();
    const Matrix& B = G.B();
    const Matrix& C = G.C();
    const Matrix& D = G.D();
    const Matrix Rg = gamma * gamma * Matrix::Identity(m, m) - D.transpose() * D;
    Eigen::LLT<Matrix> llt(Rg);
    if (llt.info() != Eigen::Success)
        return {0.0}; // gamma <= sigma_max(D): certainly below the norm
    const Matrix RinvDtC = llt.solve(D.transpose() * C);
    const Matrix RinvBt = llt.solve(B.transpose());
    const Matrix Ah = A + B * RinvDtC;
    Matrix H(2 * n, 2 * n);
    H << Ah, B * RinvBt, -C.transpose() * (Matrix::Identity(q, q) + D * llt.solve(D.transpose())) * C,
        -Ah.transpose();
    const CVector ev = eigenvalues(H);
    const double tol = 1e-9 * std::max(1.0, H.norm());
    std::vector<double> freqs;
    for (Index i = 0; i < ev.size(); ++i)
        if (std::abs(ev(i).real()) <= tol && ev(i).imag() >= 0.0)
            freqs.push_back(ev(i).imag());
    std::sort(freqs.begin(), freqs.end());
    return freqs;
}

} // namespace detail

inline constexpr int kHinfMaxIterations = 100;

// Bisection on gamma using imaginary-axis eigenvalues of the Hamiltonian.
// The lower bound starts at the largest singular value on the default grid
// and is raised by evaluating G at the crossing frequencies found.
inline HinfResult hinf_norm(const StateSpace& G, double tol = 1e-4) {
    HinfResult out;
    const double dnorm = sigma_max(G.D());
    if (G.states() == 0 || G.B().norm() == 0.0 || G.C().norm() == 0.0) {
        out.norm = out.lower_bound = dnorm;
        return out;
    }
    const auto stab = is_hurwitz(G.A());
    if (!stab.hurwitz)
        throw PreconditionError("hinf_norm: system is not stable (abscissa " + std::to_string(stab.abscissa) + ")");

    auto sigma_at = [&](double w) { return sigma_max(eval_at(G, Complex(0.0, w))); };

    double lower = dnorm;
    for (double w : default_grid()) {
        const double s = sigma_at(w);
        if (s > lower) {
            lower = s;
            out.peak_omega = w;
        }
    }
    double upper = 2.0 * (dnorm + G.C().norm() * G.B().norm() / std::abs(stab.abscissa));
    upper = std::max(upper, 2.0 * lower);
    int iter = 0;
    // The initial bound assumes a normal A; grow it until certified.
    while (!detail::hamiltonian_axis_crossings(G, upper).empty()) {
        lower = std::max(lower, upper);
        upper *= 2.0;
        if (++iter > kHinfMaxIterations)
            throw NumericalError("hinf_norm: could not bracket the norm");
    }
    while (upper - lower > tol * lower) {
        if (++iter > kHinfMaxIterations)
            throw NumericalError("hinf_norm: bisection did not converge");
        const double mid = 0.5 * (lower + upper);
        const auto freqs = detail::hamiltonian_axis_crossings(G, mid);
        if (freqs.empty()) {
            upper = mid;
            continue;
        }
        lower = mid;
        std::vector<double> probes = freqs;
        for (std::size_t i = 0; i + 1 < freqs.size(); ++i)
            probes.push_back(0.5 * (freqs[i] + freqs[i + 1]));
        for (double w : probes) {
            const double s = sigma_at(w);
            if (s > lower) {
                lower = std::min(s, upper);
                out.peak_omega = w;
            }
        }
    }
    out.norm = upper;
    out.lower_bound = lower;
    out.iterations = iter;
    return out;
}

} // namespace netres

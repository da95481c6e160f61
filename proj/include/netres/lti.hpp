#pragma once

// Dense continuous-time state-space algebra.
//
// A StateSpace is the realization  x' = A x + B u,  y = C x + D u.  Empty
// state (n = 0) is a pure static gain and is accepted everywhere.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "netres/error.hpp"

namespace netres {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline std::string shape_str(const Matrix& M) {
    return std::to_string(M.rows()) + "x" + std::to_string(M.cols());
}

// Block-diagonal concatenation; either operand may be empty in one or both directions.
inline Matrix block_diag(const Matrix& M1, const Matrix& M2) {
    Matrix out = Matrix::Zero(M1.rows() + M2.rows(), M1.cols() + M2.cols());
    out.topLeftCorner(M1.rows(), M1.cols()) = M1;
    out.bottomRightCorner(M2.rows(), M2.cols()) = M2;
    return out;
}

inline double sigma_max(const CMatrix& M) {
    if (M.size() == 0)
        return 0.0;
    return Eigen::JacobiSVD<CMatrix>(M).singularValues()(0);
}

inline double sigma_max(const Matrix& M) {
    if (M.size() == 0)
        return 0.0;
    return Eigen::JacobiSVD<Matrix>(M).singularValues()(0);
}

class StateSpace {
public:
    StateSpace() = default;

    StateSpace(Matrix A, Matrix B, Matrix C, Matrix D)
        : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D)) {
        validate();
    }

    // D defaults to zero of the implied shape.
    StateSpace(Matrix A, Matrix B, Matrix C)
        : StateSpace(A, B, C, Matrix::Zero(C.rows(), B.cols())) {}

    static StateSpace gain(const Matrix& D) {
        return StateSpace(Matrix(0, 0), Matrix(0, D.cols()), Matrix(D.rows(), 0), D);
    }

    static StateSpace zero(Index outputs, Index inputs) { return gain(Matrix::Zero(outputs, inputs)); }

    [[nodiscard]] const Matrix& A() const { return A_; }
    [[nodiscard]] const Matrix& B() const { return B_; }
    [[nodiscard]] const Matrix& C() const { return C_; }
    [[nodiscard]] const Matrix& D() const { return D_; }

    [[nodiscard]] Index states() const { return A_.rows(); }
    [[nodiscard]] Index inputs() const { return B_.cols(); }
    [[nodiscard]] Index outputs() const { return C_.rows(); }

private:
    void validate() const {
        const Index n = A_.rows();
        if (A_.cols() != n)
            throw DimensionError("StateSpace: A must be square, got " + shape_str(A_));
        if (B_.rows() != n)
            throw DimensionError("StateSpace: B has " + std::to_string(B_.rows()) + " rows, expected " +
                                 std::to_string(n));
        if (C_.cols() != n)
            throw DimensionError("StateSpace: C has " + std::to_string(C_.cols()) + " columns, expected " +
                                 std::to_string(n));
        if (D_.rows() != C_.rows() || D_.cols() != B_.cols())
            throw DimensionError("StateSpace: D is " + shape_str(D_) + ", expected " + std::to_string(C_.rows()) +
                                 "x" + std::to_string(B_.cols()));
        if (!A_.allFinite() || !B_.allFinite() || !C_.allFinite() || !D_.allFinite())
            throw DimensionError("StateSpace: non-finite entry");
    }

    Matrix A_{0, 0};
    Matrix B_{0, 0};
    Matrix C_{0, 0};
    Matrix D_{0, 0};
};

// ---------------------------------------------------------------------------
// Interconnection
// ---------------------------------------------------------------------------

// Parallel stacking without coupling: inputs [u1; u2], outputs [y1; y2].
inline StateSpace append(const StateSpace& G1, const StateSpace& G2) {
    return StateSpace(block_diag(G1.A(), G2.A()), block_diag(G1.B(), G2.B()), block_diag(G1.C(), G2.C()),
                      block_diag(G1.D(), G2.D()));
}

// Realization of G2 * G1 (G1 acts first).
inline StateSpace series(const StateSpace& G1, const StateSpace& G2) {
    if (G1.outputs() != G2.inputs())
        throw DimensionError("series: G1 has " + std::to_string(G1.outputs()) + " outputs but G2 has " +
                             std::to_string(G2.inputs()) + " inputs");
    const Index n1 = G1.states();
    const Index n2 = G2.states();
    Matrix A = Matrix::Zero(n1 + n2, n1 + n2);
    A.topLeftCorner(n1, n1) = G1.A();
    A.bottomLeftCorner(n2, n1) = G2.B() * G1.C();
    A.bottomRightCorner(n2, n2) = G2.A();
    Matrix B(n1 + n2, G1.inputs());
    B << G1.B(), G2.B() * G1.D();
    Matrix C(G2.outputs(), n1 + n2);
    C << G2.D() * G1.C(), G2.C();
    return StateSpace(A, B, C, G2.D() * G1.D());
}

// Sum of two systems sharing inputs and outputs.
inline StateSpace parallel(const StateSpace& G1, const StateSpace& G2) {
    if (G1.inputs() != G2.inputs() || G1.outputs() != G2.outputs())
        throw DimensionError("parallel: channel dimensions differ");
    Matrix B(G1.states() + G2.states(), G1.inputs());
    B << G1.B(), G2.B();
    Matrix C(G1.outputs(), G1.states() + G2.states());
    C << G1.C(), G2.C();
    return StateSpace(block_diag(G1.A(), G2.A()), B, C, G1.D() + G2.D());
}

inline StateSpace scale_output(const StateSpace& G, const Matrix& L) {
    return StateSpace(G.A(), G.B(), L * G.C(), L * G.D());
}

inline StateSpace scale_input(const StateSpace& G, const Matrix& R) {
    return StateSpace(G.A(), G.B() * R, G.C(), G.D() * R);
}

// Output `from_output` is added (times gain) to input `to_input`.
struct Connection {
    Index from_output;
    Index to_input;
    double gain = 1.0;
};

// Closes static output-to-input links on G.  The closed system keeps the
// listed external inputs (which still add into their plant input) and
// exposes the listed outputs.  Throws NumericalError on an ill-posed
// algebraic loop, i.e. when I - K*D is (numerically) singular.
inline StateSpace connect(const StateSpace& G, std::span<const Connection> links, std::span<const Index> ext_inputs,
                          std::span<const Index> ext_outputs) {
    const Index m = G.inputs();
    const Index q = G.outputs();
    Matrix K = Matrix::Zero(m, q);
    for (const auto& link : links) {
        if (link.from_output < 0 || link.from_output >= q || link.to_input < 0 || link.to_input >= m)
            throw DimensionError("connect: link index out of range");
        K(link.to_input, link.from_output) += link.gain;
    }
    Matrix E = Matrix::Zero(m, static_cast<Index>(ext_inputs.size()));
    for (std::size_t j = 0; j < ext_inputs.size(); ++j) {
        if (ext_inputs[j] < 0 || ext_inputs[j] >= m)
            throw DimensionError("connect: external input index out of range");
        E(ext_inputs[j], static_cast<Index>(j)) = 1.0;
    }
    Matrix Sel = Matrix::Zero(static_cast<Index>(ext_outputs.size()), q);
    for (std::size_t i = 0; i < ext_outputs.size(); ++i) {
        if (ext_outputs[i] < 0 || ext_outputs[i] >= q)
            throw DimensionError("connect: external output index out of range");
        Sel(static_cast<Index>(i), ext_outputs[i]) = 1.0;
    }

    const Matrix loop = Matrix::Identity(m, m) - K * G.D();
    Eigen::PartialPivLU<Matrix> lu;
    if (m > 0) {
        lu.compute(loop);
        if (!(lu.rcond() > 1e-12))
            throw NumericalError("connect: ill-posed algebraic loop (I - K*D singular)");
    }
    const Matrix MK = m > 0 ? Matrix(lu.solve(K)) : Matrix(m, q);
    const Matrix ME = m > 0 ? Matrix(lu.solve(E)) : Matrix(m, E.cols());

    const Matrix A = G.A() + G.B() * MK * G.C();
    const Matrix B = G.B() * ME;
    const Matrix C = Sel * (G.C() + G.D() * MK * G.C());
    const Matrix D = Sel * G.D() * ME;
    return StateSpace(A, B, C, D);
}

inline std::vector<Index> complement(Index count, std::span<const Index> used) {
    std::vector<Index> rest;
    for (Index i = 0; i < count; ++i)
        if (std::find(used.begin(), used.end(), i) == used.end())
            rest.push_back(i);
    return rest;
}

// Closes `controller` around `plant`.  Controller output k drives plant input
// input_map[k]; plant output output_map[k] feeds controller input k.  Any
// controller inputs beyond output_map.size() stay external (e.g. references)
// and follow the unused plant inputs in the closed system's input order.
// The closed system exposes the plant outputs not in output_map.
inline StateSpace feedback_interconnect(const StateSpace& plant, const StateSpace& controller,
                                        std::span<const Index> input_map, std::span<const Index> output_map) {
    if (static_cast<Index>(input_map.size()) != controller.outputs())
        throw DimensionError("feedback_interconnect: input map size differs from controller outputs");
    if (static_cast<Index>(output_map.size()) > controller.inputs())
        throw DimensionError("feedback_interconnect: output map larger than controller inputs");
    auto has_duplicates = [](std::span<const Index> v) {
        std::vector<Index> s(v.begin(), v.end());
        std::sort(s.begin(), s.end());
        return std::adjacent_find(s.begin(), s.end()) != s.end();
    };
    if (has_duplicates(input_map) || has_duplicates(output_map))
        throw DimensionError("feedback_interconnect: repeated channel in loop map");

    const StateSpace G = append(plant, controller);
    std::vector<Connection> links;
    for (std::size_t k = 0; k < input_map.size(); ++k) {
        if (input_map[k] < 0 || input_map[k] >= plant.inputs())
            throw DimensionError("feedback_interconnect: input map index out of range");
        links.push_back({plant.outputs() + static_cast<Index>(k), input_map[k]});
    }
    for (std::size_t k = 0; k < output_map.size(); ++k) {
        if (output_map[k] < 0 || output_map[k] >= plant.outputs())
            throw DimensionError("feedback_interconnect: output map index out of range");
        links.push_back({output_map[k], plant.inputs() + static_cast<Index>(k)});
    }
    std::vector<Index> ext_in = complement(plant.inputs(), input_map);
    for (Index k = static_cast<Index>(output_map.size()); k < controller.inputs(); ++k)
        ext_in.push_back(plant.inputs() + k);
    const std::vector<Index> ext_out = complement(plant.outputs(), output_map);
    return connect(G, links, ext_in, ext_out);
}

// Every plant output feeds the controller and every controller output drives
// the plant (positive unit feedback; sign conventions live in the controller).
inline StateSpace close_loop(const StateSpace& plant, const StateSpace& controller) {
    std::vector<Index> in(static_cast<std::size_t>(plant.inputs()));
    std::vector<Index> out(static_cast<std::size_t>(plant.outputs()));
    std::iota(in.begin(), in.end(), Index{0});
    std::iota(out.begin(), out.end(), Index{0});
    return feedback_interconnect(plant, controller, in, out);
}

// ---------------------------------------------------------------------------
// Frequency response
// ---------------------------------------------------------------------------

inline constexpr double kResolventConditionLimit = 1e12;

struct FrequencyResponse {
    std::vector<double> omegas;
    std::vector<CMatrix> values;
    // Per-omega flag: the resolvent (jwI - A) had condition number above the limit.
    std::vector<bool> near_pole;

    [[nodiscard]] std::size_t size() const { return omegas.size(); }
    [[nodiscard]] bool any_near_pole() const {
        return std::find(near_pole.begin(), near_pole.end(), true) != near_pole.end();
    }
};

struct PointResponse {
    CMatrix value;
    double rcond = 1.0;
};

inline PointResponse eval_point(const StateSpace& G, Complex s) {
    const Index n = G.states();
    PointResponse out;
    if (n == 0) {
        out.value = G.D().cast<Complex>();
        return out;
    }
    const CMatrix M = s * CMatrix::Identity(n, n) - G.A().cast<Complex>();
    Eigen::PartialPivLU<CMatrix> lu(M);
    out.rcond = lu.rcond();
    out.value = G.C().cast<Complex>() * lu.solve(G.B().cast<Complex>()) + G.D().cast<Complex>();
    return out;
}

inline CMatrix eval_at(const StateSpace& G, Complex s) { return eval_point(G, s).value; }

inline FrequencyResponse eval_frequency(const StateSpace& G, std::span<const double> omegas) {
    FrequencyResponse fr;
    fr.omegas.assign(omegas.begin(), omegas.end());
    for (std::size_t i = 0; i < omegas.size(); ++i) {
        if (!(omegas[i] >= 0.0) || !std::isfinite(omegas[i]))
            throw PreconditionError("eval_frequency: frequencies must be finite and nonnegative");
        if (i > 0 && !(omegas[i] > omegas[i - 1]))
            throw PreconditionError("eval_frequency: frequencies must be strictly increasing");
    }
    fr.values.reserve(omegas.size());
    fr.near_pole.reserve(omegas.size());
    for (double w : omegas) {
        auto p = eval_point(G, Complex(0.0, w));
        fr.near_pole.push_back(!(p.rcond * kResolventConditionLimit > 1.0));
        fr.values.push_back(std::move(p.value));
    }
    return fr;
}

inline std::vector<double> logspace(double lo_exp, double hi_exp, int count) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        out.push_back(std::pow(10.0, lo_exp + t * (hi_exp - lo_exp)));
    }
    return out;
}

// omega = 0 followed by 400 log-spaced points in [1e-3, 1e3] rad/s.
inline std::vector<double> default_grid() {
    std::vector<double> grid{0.0};
    const auto pts = logspace(-3.0, 3.0, 400);
    grid.insert(grid.end(), pts.begin(), pts.end());
    return grid;
}

// ---------------------------------------------------------------------------
// Stability
// ---------------------------------------------------------------------------

inline constexpr double kDefaultStabilityMargin = 1e-9;

inline CVector eigenvalues(const Matrix& A) {
    if (A.rows() != A.cols())
        throw DimensionError("eigenvalues: matrix not square");
    if (A.rows() == 0)
        return CVector(0);
    Eigen::EigenSolver<Matrix> es(A, false);
    if (es.info() != Eigen::Success)
        throw NumericalError("eigenvalues: eigensolver did not converge");
    return es.eigenvalues();
}

inline double spectral_abscissa(const Matrix& A) {
    const CVector ev = eigenvalues(A);
    double a = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < ev.size(); ++i)
        a = std::max(a, ev(i).real());
    return a;
}

struct HurwitzCheck {
    bool hurwitz = true;
    double abscissa = -std::numeric_limits<double>::infinity();
};

// Hurwitz iff every eigenvalue has real part < -margin.
inline HurwitzCheck is_hurwitz(const Matrix& A, double margin = kDefaultStabilityMargin) {
    if (!A.allFinite())
        throw DimensionError("is_hurwitz: non-finite matrix");
    HurwitzCheck out;
    out.abscissa = spectral_abscissa(A);
    out.hurwitz = out.abscissa < -margin;
    return out;
}

inline bool is_stable(const StateSpace& G, double margin = kDefaultStabilityMargin) {
    return is_hurwitz(G.A(), margin).hurwitz;
}

} // namespace netres

#pragma once

// Two-subsystem networked plant.
//
//   x_i' = A_i x_i + J_i z_j + B_i u_i
//   z_i  = S_i x_i
//   y_i  = C_i x_i + D_i z_j          (j != i)
//
// and the compensator channels v (through R) used by the supervisory design.

#include <string>
#include <utility>

#include "netres/error.hpp"
#include "netres/lti.hpp"
#include "netres/synthesis.hpp"

namespace netres {

class Subsystem {
public:
    Subsystem() = default;

    // Dz may be empty (0x0), meaning zero of shape q_i x p_j.
    Subsystem(Matrix A, Matrix B, Matrix C, Matrix J, Matrix S, Matrix Dz = Matrix(0, 0))
        : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), J_(std::move(J)), S_(std::move(S)),
          D_(std::move(Dz)) {
        if (D_.size() == 0)
            D_ = Matrix::Zero(C_.rows(), J_.cols());
        validate();
        controllable_ = is_controllable(A_, B_);
        observable_ = is_observable(A_, C_);
    }

    [[nodiscard]] const Matrix& A() const { return A_; }
    [[nodiscard]] const Matrix& B() const { return B_; }
    [[nodiscard]] const Matrix& C() const { return C_; }
    [[nodiscard]] const Matrix& J() const { return J_; }
    [[nodiscard]] const Matrix& S() const { return S_; }
    [[nodiscard]] const Matrix& Dz() const { return D_; }

    [[nodiscard]] Index states() const { return A_.rows(); }
    [[nodiscard]] Index inputs() const { return B_.cols(); }
    [[nodiscard]] Index outputs() const { return C_.rows(); }
    [[nodiscard]] Index interaction_outputs() const { return S_.rows(); }
    [[nodiscard]] Index coupling_inputs() const { return J_.cols(); }

    [[nodiscard]] bool controllable() const { return controllable_; }
    [[nodiscard]] bool observable() const { return observable_; }
    [[nodiscard]] bool minimal() const { return controllable_ && observable_; }
    // u_i, y_i and z_i scalar, and the coupling input z_j scalar as well.
    [[nodiscard]] bool siso() const {
        return inputs() == 1 && outputs() == 1 && interaction_outputs() == 1 && coupling_inputs() == 1;
    }

    // Local plant u_i -> y_i with the interconnection removed.
    [[nodiscard]] StateSpace local_plant() const { return StateSpace(A_, B_, C_); }

    // Local plant with the coupling channel exposed: inputs [u_i; d_i], outputs [y_i; z_i].
    [[nodiscard]] StateSpace open_plant() const {
        Matrix Bx(states(), inputs() + coupling_inputs());
        Bx << B_, J_;
        Matrix Cx(outputs() + interaction_outputs(), states());
        Cx << C_, S_;
        Matrix Dx = Matrix::Zero(Cx.rows(), Bx.cols());
        Dx.block(0, inputs(), outputs(), coupling_inputs()) = D_;
        return StateSpace(A_, Bx, Cx, Dx);
    }

private:
    void validate() const {
        const Index n = A_.rows();
        if (A_.cols() != n)
            throw DimensionError("Subsystem: A must be square");
        if (B_.rows() != n || C_.cols() != n || J_.rows() != n || S_.cols() != n)
            throw DimensionError("Subsystem: B, C, J, S inconsistent with state dimension " + std::to_string(n));
        if (D_.rows() != C_.rows() || D_.cols() != J_.cols())
            throw DimensionError("Subsystem: Dz must be " + std::to_string(C_.rows()) + "x" +
                                 std::to_string(J_.cols()));
        for (const Matrix* M : {&A_, &B_, &C_, &J_, &S_, &D_})
            if (!M->allFinite())
                throw DimensionError("Subsystem: non-finite entry");
    }

    Matrix A_{0, 0}, B_{0, 0}, C_{0, 0}, J_{0, 0}, S_{0, 0}, D_{0, 0};
    bool controllable_ = true;
    bool observable_ = true;
};

class NetworkedSystem {
public:
    NetworkedSystem() = default;

    // R is n x p with n = n_1 + n_2; an empty R means the identity.
    NetworkedSystem(Subsystem sub1, Subsystem sub2, Matrix R = Matrix(0, 0))
        : sub1_(std::move(sub1)), sub2_(std::move(sub2)), R_(std::move(R)) {
        if (sub1_.coupling_inputs() != sub2_.interaction_outputs())
            throw DimensionError("NetworkedSystem: cols(J_1) must equal rows(S_2)");
        if (sub2_.coupling_inputs() != sub1_.interaction_outputs())
            throw DimensionError("NetworkedSystem: cols(J_2) must equal rows(S_1)");
        if (R_.rows() == 0 && R_.cols() == 0)
            R_ = Matrix::Identity(states(), states());
        if (R_.rows() != states())
            throw DimensionError("NetworkedSystem: R must have " + std::to_string(states()) + " rows");
        if (!R_.allFinite())
            throw DimensionError("NetworkedSystem: non-finite entry in R");
    }

    [[nodiscard]] const Subsystem& sub1() const { return sub1_; }
    [[nodiscard]] const Subsystem& sub2() const { return sub2_; }
    [[nodiscard]] const Subsystem& sub(int i) const { return i == 1 ? sub1_ : sub2_; }
    [[nodiscard]] const Matrix& R() const { return R_; }

    [[nodiscard]] Index states() const { return sub1_.states() + sub2_.states(); }
    [[nodiscard]] Index inputs() const { return sub1_.inputs() + sub2_.inputs(); }
    [[nodiscard]] Index outputs() const { return sub1_.outputs() + sub2_.outputs(); }

    [[nodiscard]] bool siso() const { return sub1_.siso() && sub2_.siso(); }
    [[nodiscard]] bool minimal() const { return sub1_.minimal() && sub2_.minimal(); }
    [[nodiscard]] bool feedthrough_free() const { return sub1_.Dz().isZero(0.0) && sub2_.Dz().isZero(0.0); }

    // dg(S_i): z = S x.
    [[nodiscard]] Matrix S() const { return block_diag(sub1_.S(), sub2_.S()); }

    // Same network with the subsystem labels exchanged (R rows permuted along).
    [[nodiscard]] NetworkedSystem swapped() const {
        const Index n1 = sub1_.states();
        const Index n2 = sub2_.states();
        Matrix R(R_.rows(), R_.cols());
        R << R_.bottomRows(n2), R_.topRows(n1);
        return NetworkedSystem(sub2_, sub1_, R);
    }

private:
    Subsystem sub1_;
    Subsystem sub2_;
    Matrix R_{0, 0};
};

// A = [[A1, J1 S2], [J2 S1, A2]],  B = dg(B_i),  C = [[C1, D1 S2], [D2 S1, C2]].
inline StateSpace interconnect(const NetworkedSystem& ns) {
    const Subsystem& s1 = ns.sub1();
    const Subsystem& s2 = ns.sub2();
    const Index n1 = s1.states();
    const Index n2 = s2.states();
    Matrix A(n1 + n2, n1 + n2);
    A << s1.A(), s1.J() * s2.S(), s2.J() * s1.S(), s2.A();
    Matrix C(s1.outputs() + s2.outputs(), n1 + n2);
    C << s1.C(), s1.Dz() * s2.S(), s2.Dz() * s1.S(), s2.C();
    return StateSpace(A, block_diag(s1.B(), s2.B()), C);
}

// ---------------------------------------------------------------------------
// Cascade test
// ---------------------------------------------------------------------------

enum class CascadeVerdict {
    Decoupled,    // both coupling directions vanish
    OneToTwo,     // J1 S2 = 0 and D1 S2 = 0: subsystem 1 ignores subsystem 2
    TwoToOne,     // J2 S1 = 0 and D2 S1 = 0: subsystem 2 ignores subsystem 1
    None,
};

inline std::string to_string(CascadeVerdict v) {
    switch (v) {
    case CascadeVerdict::Decoupled: return "decoupled";
    case CascadeVerdict::OneToTwo: return "cascade_1to2";
    case CascadeVerdict::TwoToOne: return "cascade_2to1";
    case CascadeVerdict::None: return "none";
    }
    return "none";
}

struct CascadeReport {
    CascadeVerdict verdict = CascadeVerdict::None;
    double js12 = 0.0; // ||J1 S2||_F
    double ds12 = 0.0; // ||D1 S2||_F
    double js21 = 0.0; // ||J2 S1||_F
    double ds21 = 0.0; // ||D2 S1||_F
};

inline constexpr double kZeroProductTolerance = 1e-10;

// Products count as zero when ||X_i S_j||_F <= tol * (1 + ||X_i|| ||S_j||).
inline CascadeReport is_cascade(const NetworkedSystem& ns, double tol = kZeroProductTolerance) {
    const Subsystem& s1 = ns.sub1();
    const Subsystem& s2 = ns.sub2();
    auto vanishes = [tol](const Matrix& X, const Matrix& S, double& norm_out) {
        norm_out = (X * S).norm();
        return norm_out <= tol * (1.0 + X.norm() * S.norm());
    };
    CascadeReport r;
    const bool cut12 = vanishes(s1.J(), s2.S(), r.js12) & vanishes(s1.Dz(), s2.S(), r.ds12);
    const bool cut21 = vanishes(s2.J(), s1.S(), r.js21) & vanishes(s2.Dz(), s1.S(), r.ds21);
    if (cut12 && cut21)
        r.verdict = CascadeVerdict::Decoupled;
    else if (cut12)
        r.verdict = CascadeVerdict::OneToTwo;
    else if (cut21)
        r.verdict = CascadeVerdict::TwoToOne;
    else
        r.verdict = CascadeVerdict::None;
    return r;
}

} // namespace netres

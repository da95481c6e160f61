#pragma once

// Supervisory compensator that turns a non-cascade network into a cascade
// one as seen from the local controllers.
//
//   phi' = Lambda phi + Gamma z,   v = Theta phi,   r = Xi phi
//
// With Lambda = A_cut + R Theta, Gamma dg(S) = A - A_cut and Xi = -dg(C_i),
// the error chi = x - phi obeys chi' = A_cut chi + B u and y = dg(C_i) chi, so
// the local controllers only ever see the cascade plant A_cut.

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "netres/error.hpp"
#include "netres/lti.hpp"
#include "netres/netsys.hpp"
#include "netres/synthesis.hpp"
#include "netres/youla.hpp"

namespace netres {

// Which coupling the compensator removes from the controllers' view.
enum class CutDirection {
    Auto,     // the smaller of ||J2 S1|| and ||J1 S2||
    Cut2From1, // remove J2 S1: transfer matrix becomes block upper triangular
    Cut1From2, // remove J1 S2: block lower triangular
};

enum class ThetaPolicy {
    Lqr,       // Theta = -K_lqr(A, R) with identity weights
    GammaScan, // LQR input weight scanned over 10^-2 .. 10^2, smallest gamma kept
};

struct Compensator {
    Matrix Lambda; // eta x eta
    Matrix Gamma;  // eta x (p_1 + p_2)
    Matrix Xi;     // q x eta
    Matrix Theta;  // p_R x eta
    Index eta = 0;
    CutDirection cut = CutDirection::Cut2From1;
};

struct CompensatorOptions {
    CutDirection cut = CutDirection::Auto;
    ThetaPolicy theta = ThetaPolicy::GammaScan;
    LqrWeights weights{};
};

// A with the coupling selected by `cut` removed.
inline Matrix cut_system_matrix(const NetworkedSystem& ns, CutDirection cut) {
    const Subsystem& s1 = ns.sub1();
    const Subsystem& s2 = ns.sub2();
    Matrix A = interconnect(ns).A();
    if (cut == CutDirection::Cut2From1)
        A.bottomLeftCorner(s2.states(), s1.states()).setZero();
    else if (cut == CutDirection::Cut1From2)
        A.topRightCorner(s1.states(), s2.states()).setZero();
    else
        throw PreconditionError("cut_system_matrix: direction must be resolved");
    return A;
}

inline CutDirection resolve_cut(const NetworkedSystem& ns, CutDirection cut) {
    if (cut != CutDirection::Auto)
        return cut;
    const double n21 = (ns.sub2().J() * ns.sub1().S()).norm();
    const double n12 = (ns.sub1().J() * ns.sub2().S()).norm();
    return n21 <= n12 ? CutDirection::Cut2From1 : CutDirection::Cut1From2;
}

// Gamma = [[0, 0], [J2, 0]] (Cut2From1) or [[0, J1], [0, 0]] (Cut1From2).
inline Matrix interaction_gain(const NetworkedSystem& ns, CutDirection cut) {
    const Subsystem& s1 = ns.sub1();
    const Subsystem& s2 = ns.sub2();
    const Index p1 = s1.interaction_outputs();
    Matrix G = Matrix::Zero(ns.states(), p1 + s2.interaction_outputs());
    if (cut == CutDirection::Cut2From1)
        G.block(s1.states(), 0, s2.states(), p1) = s2.J();
    else
        G.block(0, p1, s1.states(), s2.interaction_outputs()) = s1.J();
    return G;
}

// Cascade plant seen by the controllers: (A_cut, dg(B_i), dg(C_i)).
inline StateSpace cascade_system(const NetworkedSystem& ns, CutDirection cut) {
    return StateSpace(cut_system_matrix(ns, resolve_cut(ns, cut)), block_diag(ns.sub1().B(), ns.sub2().B()),
                      block_diag(ns.sub1().C(), ns.sub2().C()));
}

inline StateSpace cascade_system(const NetworkedSystem& ns, const Compensator& phi) {
    return cascade_system(ns, phi.cut);
}

// (sI - (A + R Theta))^{-1} Gamma.
inline StateSpace disturbance_channel(const NetworkedSystem& ns, const Compensator& phi) {
    const Index n = ns.states();
    return StateSpace(interconnect(ns).A() + ns.R() * phi.Theta, phi.Gamma, Matrix::Identity(n, n));
}

inline Compensator build_compensator(const NetworkedSystem& ns, const Matrix& Theta, CutDirection cut) {
    if (!ns.feedthrough_free())
        throw PreconditionError("synthesize_compensator: construction requires D_i = 0");
    cut = resolve_cut(ns, cut);
    const Index n = ns.states();
    if (Theta.rows() != ns.R().cols() || Theta.cols() != n)
        throw DimensionError("build_compensator: Theta must be " + std::to_string(ns.R().cols()) + "x" +
                             std::to_string(n));
    Compensator phi;
    phi.cut = cut;
    phi.eta = n;
    phi.Theta = Theta;
    phi.Lambda = cut_system_matrix(ns, cut) + ns.R() * Theta;
    phi.Gamma = interaction_gain(ns, cut);
    phi.Xi = -block_diag(ns.sub1().C(), ns.sub2().C());
    return phi;
}

inline std::vector<double> gamma_scan_weights() {
    std::vector<double> w;
    for (int k = -4; k <= 4; ++k)
        w.push_back(std::pow(10.0, 0.5 * k));
    return w;
}

inline Compensator synthesize_compensator(const NetworkedSystem& ns, const CompensatorOptions& opt = {}) {
    if (!ns.feedthrough_free())
        throw PreconditionError("synthesize_compensator: construction requires D_i = 0");
    const Matrix A = interconnect(ns).A();
    if (opt.theta == ThetaPolicy::Lqr)
        return build_compensator(ns, design_theta(A, ns.R(), opt.weights), opt.cut);

    std::optional<Compensator> best;
    double best_gamma = std::numeric_limits<double>::infinity();
    for (double rho : gamma_scan_weights()) {
        const Compensator phi =
            build_compensator(ns, design_theta(A, ns.R(), {opt.weights.state, opt.weights.input * rho}), opt.cut);
        const double g = hinf_norm(disturbance_channel(ns, phi)).norm;
        if (g < best_gamma) {
            best_gamma = g;
            best = phi;
        }
    }
    return *best;
}

// Compensated plant, state (phi, x), input u, output y = Xi phi + C x.
//   [phi']   [Lambda   Gamma dg(S)] [phi]   [0]
//   [x'  ] = [R Theta  A          ] [x  ] + [B] u
inline StateSpace attach_compensator(const NetworkedSystem& ns, const Compensator& phi) {
    const StateSpace plant = interconnect(ns);
    const Index n = ns.states();
    if (phi.Lambda.rows() != phi.eta || phi.Lambda.cols() != phi.eta || phi.Gamma.rows() != phi.eta ||
        phi.Gamma.cols() != ns.S().rows() || phi.Xi.rows() != plant.outputs() || phi.Xi.cols() != phi.eta ||
        phi.Theta.rows() != ns.R().cols() || phi.Theta.cols() != phi.eta)
        throw DimensionError("attach_compensator: compensator does not match network");
    const Index e = phi.eta;
    Matrix A(e + n, e + n);
    A << phi.Lambda, phi.Gamma * ns.S(), ns.R() * phi.Theta, plant.A();
    Matrix B(e + n, plant.inputs());
    B << Matrix::Zero(e, plant.inputs()), plant.B();
    Matrix C(plant.outputs(), e + n);
    C << phi.Xi, plant.C();
    return StateSpace(A, B, C);
}

// Similarity T = [[I, 0], [-I, I]] mapping (phi, x) to (phi, chi = x - phi).
inline StateSpace to_error_coordinates(const StateSpace& compensated, Index eta) {
    const Index N = compensated.states();
    if (2 * eta != N)
        throw DimensionError("to_error_coordinates: expects state (phi, x) of equal sizes");
    Matrix T = Matrix::Identity(N, N);
    T.bottomLeftCorner(eta, eta) = -Matrix::Identity(eta, eta);
    Matrix Tinv = Matrix::Identity(N, N);
    Tinv.bottomLeftCorner(eta, eta) = Matrix::Identity(eta, eta);
    return StateSpace(T * compensated.A() * Tinv, T * compensated.B(), compensated.C() * Tinv, compensated.D());
}

// ---------------------------------------------------------------------------
// Triangularity test
// ---------------------------------------------------------------------------

struct TriangularReport {
    double scale = 0.0;          // max over the grid of sigma_max(sys(jw))
    double lower_residual = 0.0; // max ||(2,1) block|| / scale
    double upper_residual = 0.0; // max ||(1,2) block|| / scale
    double diag_residual = 0.0;  // max ||(i,i) block - ref_i|| / scale
    bool near_pole = false;
    double tol = 0.0;

    [[nodiscard]] bool lower_triangular() const { return upper_residual <= tol; }
    [[nodiscard]] bool upper_triangular() const { return lower_residual <= tol; }
    [[nodiscard]] bool passed() const {
        return !near_pole && diag_residual <= tol && (lower_triangular() || upper_triangular());
    }
};

// sys maps [u1; u2] -> [y1; y2]; ref_diag[i] is the expected (i,i) block.
inline TriangularReport verify_triangular(const StateSpace& sys, const StateSpace& ref1, const StateSpace& ref2,
                                          std::span<const double> grid, double tol) {
    const Index q1 = ref1.outputs();
    const Index m1 = ref1.inputs();
    const Index q2 = ref2.outputs();
    const Index m2 = ref2.inputs();
    if (sys.outputs() != q1 + q2 || sys.inputs() != m1 + m2)
        throw DimensionError("verify_triangular: reference blocks do not partition the system");
    const FrequencyResponse F = eval_frequency(sys, grid);
    const FrequencyResponse R1 = eval_frequency(ref1, grid);
    const FrequencyResponse R2 = eval_frequency(ref2, grid);
    TriangularReport r;
    r.tol = tol;
    r.near_pole = F.any_near_pole() || R1.any_near_pole() || R2.any_near_pole();
    double lower = 0.0, upper = 0.0, diag = 0.0;
    for (std::size_t k = 0; k < F.size(); ++k) {
        const CMatrix& G = F.values[k];
        r.scale = std::max(r.scale, sigma_max(G));
        lower = std::max(lower, sigma_max(CMatrix(G.bottomLeftCorner(q2, m1))));
        upper = std::max(upper, sigma_max(CMatrix(G.topRightCorner(q1, m2))));
        diag = std::max(diag, sigma_max(CMatrix(G.topLeftCorner(q1, m1) - R1.values[k])));
        diag = std::max(diag, sigma_max(CMatrix(G.bottomRightCorner(q2, m2) - R2.values[k])));
    }
    const double s = r.scale > 0.0 ? r.scale : 1.0;
    r.lower_residual = lower / s;
    r.upper_residual = upper / s;
    r.diag_residual = diag / s;
    return r;
}

inline TriangularReport verify_triangular(const NetworkedSystem& ns, const Compensator& phi,
                                          std::span<const double> grid, double tol) {
    return verify_triangular(attach_compensator(ns, phi), ns.sub1().local_plant(), ns.sub2().local_plant(), grid,
                             tol);
}

// ---------------------------------------------------------------------------
// Performance bound ||x|| <= (1 + gamma) ||chi||
// ---------------------------------------------------------------------------

struct PerformanceBound {
    double gamma = 0.0;             // ||(sI - (A + R Theta))^{-1} Gamma||
    double gamma_interaction = 0.0; // same with Gamma dg(S), the map actually driven by chi
    double factor = 1.0;
};

inline PerformanceBound performance_bound(const Compensator& phi, const NetworkedSystem& ns, double tol = 1e-4) {
    const StateSpace ch = disturbance_channel(ns, phi);
    if (!is_stable(ch))
        throw PreconditionError("performance_bound: A + R Theta is not Hurwitz");
    PerformanceBound pb;
    pb.gamma = hinf_norm(ch, tol).norm;
    pb.gamma_interaction = hinf_norm(scale_input(ch, ns.S()), tol).norm;
    pb.factor = 1.0 + pb.gamma;
    return pb;
}

// ---------------------------------------------------------------------------
// Observer-fed compensator: z is replaced by zhat = dg(S) xhat with
//   xhat' = (A - H S) xhat + B u + H w + R Theta phi,   w = S x.
// ---------------------------------------------------------------------------

struct ObserverCompensator {
    Compensator base;
    Matrix H; // n x p_total
};

inline ObserverCompensator synthesize_observer_compensator(const NetworkedSystem& ns,
                                                           const CompensatorOptions& opt = {}) {
    ObserverCompensator oc;
    oc.base = synthesize_compensator(ns, opt);
    oc.H = design_observer_gain(interconnect(ns).A(), ns.S(), opt.weights);
    return oc;
}

// State (phi, x, xhat), input u, output y = Xi phi + C x.
inline StateSpace attach_observer_compensator(const NetworkedSystem& ns, const ObserverCompensator& oc) {
    const StateSpace plant = interconnect(ns);
    const Compensator& phi = oc.base;
    const Index n = ns.states();
    const Index e = phi.eta;
    const Matrix S = ns.S();
    if (oc.H.rows() != n || oc.H.cols() != S.rows())
        throw DimensionError("attach_observer_compensator: H has the wrong shape");
    const Matrix RT = ns.R() * phi.Theta;
    Matrix A = Matrix::Zero(e + 2 * n, e + 2 * n);
    A.block(0, 0, e, e) = phi.Lambda;
    A.block(0, e + n, e, n) = phi.Gamma * S;
    A.block(e, 0, n, e) = RT;
    A.block(e, e, n, n) = plant.A();
    A.block(e + n, 0, n, e) = RT;
    A.block(e + n, e, n, n) = oc.H * S;
    A.block(e + n, e + n, n, n) = plant.A() - oc.H * S;
    Matrix B(e + 2 * n, plant.inputs());
    B << Matrix::Zero(e, plant.inputs()), plant.B(), plant.B();
    Matrix C(plant.outputs(), e + 2 * n);
    C << phi.Xi, plant.C(), Matrix::Zero(plant.outputs(), n);
    return StateSpace(A, B, C);
}

// ---------------------------------------------------------------------------
// Randomized weak-resilience sweep
// ---------------------------------------------------------------------------

// Random member of the locally stabilizing set: observer-based nominal with
// randomly weighted LQR gains, plus a random stable Youla parameter in
// innovation form.
template<typename Rng>
StateSpace random_local_controller(Rng& rng, const Subsystem& sub, Index max_q_order = 3, double q_scale = 1.0) {
    std::uniform_real_distribution<double> lw(-2.0, 2.0);
    const LqrWeights wf{std::pow(10.0, lw(rng)), std::pow(10.0, lw(rng))};
    const LqrWeights wh{std::pow(10.0, lw(rng)), std::pow(10.0, lw(rng))};
    const NominalGains g{design_theta(sub.A(), sub.B(), wf), design_observer_gain(sub.A(), sub.C(), wh)};
    const StateSpace Q = random_stable_q(rng, sub.outputs(), sub.inputs(), max_q_order, q_scale);
    return innovation_controller(sub, {g.F, g.H, Q});
}

// Both local controllers closed around a plant with inputs [u1; u2] and
// outputs [y1; y2].  Controller inputs beyond y_i stay external.
inline StateSpace close_with_local(const StateSpace& plant, Index q1, const StateSpace& kappa1,
                                   const StateSpace& kappa2) {
    return close_local_pair(plant, q1, kappa1, kappa2);
}

struct SweepReport {
    int trials = 0;
    int stable = 0;
    int locally_unstable_draws = 0; // draws rejected because a local loop failed (should stay 0)
    double worst_abscissa = -std::numeric_limits<double>::infinity();
    [[nodiscard]] bool all_stable() const { return stable == trials; }
};

inline SweepReport resilience_sweep(const NetworkedSystem& ns, const StateSpace& compensated, int trials,
                                    std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SweepReport rep;
    while (rep.trials < trials) {
        const StateSpace k1 = random_local_controller(rng, ns.sub1());
        const StateSpace k2 = random_local_controller(rng, ns.sub2());
        if (!is_hurwitz(local_loop(ns.sub1(), k1).A()).hurwitz || !is_hurwitz(local_loop(ns.sub2(), k2).A()).hurwitz) {
            ++rep.locally_unstable_draws;
            continue;
        }
        ++rep.trials;
        const double a = spectral_abscissa(close_with_local(compensated, ns.sub1().outputs(), k1, k2).A());
        rep.worst_abscissa = std::max(rep.worst_abscissa, a);
        if (a < 0.0)
            ++rep.stable;
    }
    return rep;
}

} // namespace netres

#pragma once

// Youla parametrization of locally stabilizing controllers and the
// constructive all-pass attack that destabilizes a non-cascade network.
//
// Around any nominal controller K0 that stabilizes the isolated subsystem,
// every other stabilizing controller is
//
//     u = K0(y) + u~,   u~ = Q (y - P22 u~)
//
// with Q stable and P22 the u~ -> y map of the nominal loop.  The local
// coupling map d_i -> z_i is then affine in Q:
//
//     delta_i = Sigma^dz + Sigma^uz * Q * Sigma^dy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "netres/error.hpp"
#include "netres/lti.hpp"
#include "netres/netsys.hpp"
#include "netres/synthesis.hpp"

namespace netres {

// ---------------------------------------------------------------------------
// Nominal observer-based controller
// ---------------------------------------------------------------------------

struct NominalGains {
    Matrix F; // m_i x n_i, A_i + B_i F Hurwitz
    Matrix H; // n_i x q_i, A_i - H C_i Hurwitz
};

// F = -K_lqr(A_i, B_i), H from the dual problem on (A_i, C_i).
inline NominalGains default_nominal_gains(const Subsystem& sub, const LqrWeights& w = {}) {
    return {design_theta(sub.A(), sub.B(), w), design_observer_gain(sub.A(), sub.C(), w)};
}

// xi' = (A + BF - HC) xi + H y,  u = F xi.
inline StateSpace observer_controller(const Subsystem& sub, const NominalGains& g) {
    if (g.F.rows() != sub.inputs() || g.F.cols() != sub.states() || g.H.rows() != sub.states() ||
        g.H.cols() != sub.outputs())
        throw DimensionError("observer_controller: F or H has the wrong shape");
    return StateSpace(sub.A() + sub.B() * g.F - g.H * sub.C(), g.H, g.F);
}

struct YoulaController {
    Matrix F;
    Matrix H;
    StateSpace Q; // q_i inputs, m_i outputs, stable
};

inline void validate_youla(const Subsystem& sub, const YoulaController& yc) {
    if (!is_hurwitz(sub.A() + sub.B() * yc.F).hurwitz)
        throw PreconditionError("YoulaController: A + BF is not Hurwitz");
    if (!is_hurwitz(sub.A() - yc.H * sub.C()).hurwitz)
        throw PreconditionError("YoulaController: A - HC is not Hurwitz");
    if (yc.Q.inputs() != sub.outputs() || yc.Q.outputs() != sub.inputs())
        throw DimensionError("YoulaController: Q must map y_i to u_i");
    if (!is_stable(yc.Q))
        throw PreconditionError("YoulaController: Q is not stable");
}

// ---------------------------------------------------------------------------
// Local loops
// ---------------------------------------------------------------------------

// Isolated subsystem closed with a controller whose first q_i inputs read y_i.
// Extra controller inputs stay external.  Autonomous part is what matters.
inline StateSpace local_loop(const Subsystem& sub, const StateSpace& controller) {
    if (controller.outputs() != sub.inputs() || controller.inputs() < sub.outputs())
        throw DimensionError("local_loop: controller does not match subsystem channels");
    std::vector<Index> in(static_cast<std::size_t>(sub.inputs()));
    std::vector<Index> out(static_cast<std::size_t>(sub.outputs()));
    std::iota(in.begin(), in.end(), Index{0});
    std::iota(out.begin(), out.end(), Index{0});
    return feedback_interconnect(sub.local_plant(), controller, in, out);
}

// u~ -> y map of the nominal loop (u~ adds to u, controller extra inputs zero).
inline StateSpace nominal_u_to_y(const Subsystem& sub, const StateSpace& nominal) {
    const StateSpace G = append(sub.local_plant(), nominal);
    std::vector<Connection> links;
    for (Index k = 0; k < sub.inputs(); ++k)
        links.push_back({sub.outputs() + k, k});
    for (Index k = 0; k < sub.outputs(); ++k)
        links.push_back({k, sub.inputs() + k});
    std::vector<Index> ext_in(static_cast<std::size_t>(sub.inputs()));
    std::vector<Index> ext_out(static_cast<std::size_t>(sub.outputs()));
    std::iota(ext_in.begin(), ext_in.end(), Index{0});
    std::iota(ext_out.begin(), ext_out.end(), Index{0});
    return connect(G, links, ext_in, ext_out);
}

// Controller u = K0(y, extra) + u~,  u~ = Q(y - P22 u~).  States [xi, model, x_Q].
// A zero Q (no states, zero gain) returns the nominal controller unchanged.
inline StateSpace youla_controller(const Subsystem& sub, const StateSpace& nominal, const StateSpace& Q) {
    const Index q = sub.outputs();
    const Index m = sub.inputs();
    if (nominal.outputs() != m || nominal.inputs() < q)
        throw DimensionError("youla_controller: nominal controller does not match subsystem channels");
    if (Q.inputs() != q || Q.outputs() != m)
        throw DimensionError("youla_controller: Q must map y_i to u_i");
    if (Q.states() == 0 && Q.D().isZero(0.0))
        return nominal;

    const StateSpace P22 = nominal_u_to_y(sub, nominal);
    const Index e = nominal.inputs() - q;
    const Index nk = nominal.states();
    const Index nm = P22.states();
    const Index nq = Q.states();
    const Matrix Bky = nominal.B().leftCols(q);
    const Matrix Bke = nominal.B().rightCols(e);
    const Matrix Dky = nominal.D().leftCols(q);
    const Matrix Dke = nominal.D().rightCols(e);
    const Matrix& Am = P22.A();
    const Matrix& Bm = P22.B();
    const Matrix& Cm = P22.C();

    const Index N = nk + nm + nq;
    Matrix A = Matrix::Zero(N, N);
    A.block(0, 0, nk, nk) = nominal.A();
    A.block(nk, nk, nm, nm) = Am - Bm * Q.D() * Cm;
    A.block(nk, nk + nm, nm, nq) = Bm * Q.C();
    A.block(nk + nm, nk, nq, nm) = -Q.B() * Cm;
    A.block(nk + nm, nk + nm, nq, nq) = Q.A();

    Matrix B = Matrix::Zero(N, q + e);
    B.block(0, 0, nk, q) = Bky;
    B.block(0, q, nk, e) = Bke;
    B.block(nk, 0, nm, q) = Bm * Q.D();
    B.block(nk + nm, 0, nq, q) = Q.B();

    Matrix C(m, N);
    C << nominal.C(), -Q.D() * Cm, Q.C();
    Matrix D(m, q + e);
    D << Dky + Q.D(), Dke;
    return StateSpace(A, B, C, D);
}

// Innovation form: the observer also sees u~ and Q reads e = y - C xhat.
//   xhat' = A xhat + B u + H e,  u = F xhat + Q e.   States [xhat, x_Q].
// Same controller set as youla_controller, but no copy of the nominal loop,
// so closed-loop eigenvalues are eig(A + BF), eig(A - HC), eig(A_Q) once each.
inline StateSpace innovation_controller(const Subsystem& sub, const YoulaController& yc) {
    validate_youla(sub, yc);
    const Matrix& A = sub.A();
    const Matrix& B = sub.B();
    const Matrix& C = sub.C();
    const StateSpace& Q = yc.Q;
    const Index n = sub.states();
    const Index nq = Q.states();
    Matrix Ak(n + nq, n + nq);
    Ak << A + B * yc.F - yc.H * C - B * Q.D() * C, B * Q.C(), -Q.B() * C, Q.A();
    Matrix Bk(n + nq, sub.outputs());
    Bk << yc.H + B * Q.D(), Q.B();
    Matrix Ck(sub.inputs(), n + nq);
    Ck << yc.F - Q.D() * C, Q.C();
    return StateSpace(Ak, Bk, Ck, Q.D());
}

inline StateSpace realize_controller(const Subsystem& sub, const YoulaController& yc) {
    validate_youla(sub, yc);
    return youla_controller(sub, observer_controller(sub, {yc.F, yc.H}), yc.Q);
}

// ---------------------------------------------------------------------------
// Generalized plant and the affine local map
// ---------------------------------------------------------------------------

// Subsystem closed with the nominal controller; state X = [x_i; xi_i].
//   X' = A X + J d + B u~,  z = S X,  y = C X + D d
struct GeneralizedPlant {
    Matrix A, B, J, S, C, D;

    [[nodiscard]] StateSpace dz() const { return StateSpace(A, J, S); }
    [[nodiscard]] StateSpace uz() const { return StateSpace(A, B, S); }
    [[nodiscard]] StateSpace dy() const { return StateSpace(A, J, C, D); }
    [[nodiscard]] StateSpace uy() const { return StateSpace(A, B, C); }
};

// Observer-based nominal loop in explicit block form.  The observer reads
// y_i = C_i x_i + D_i d, so d also enters xi through H D_i.
inline GeneralizedPlant generalized_plant(const Subsystem& sub, const NominalGains& g) {
    const Index n = sub.states();
    const Matrix& A = sub.A();
    const Matrix& B = sub.B();
    const Matrix& C = sub.C();
    GeneralizedPlant gp;
    gp.A.resize(2 * n, 2 * n);
    gp.A << A, B * g.F, g.H * C, A + B * g.F - g.H * C;
    gp.B.resize(2 * n, B.cols());
    gp.B << B, Matrix::Zero(n, B.cols());
    gp.J.resize(2 * n, sub.coupling_inputs());
    gp.J << sub.J(), g.H * sub.Dz();
    gp.S.resize(sub.interaction_outputs(), 2 * n);
    gp.S << sub.S(), Matrix::Zero(sub.interaction_outputs(), n);
    gp.C.resize(sub.outputs(), 2 * n);
    gp.C << C, Matrix::Zero(sub.outputs(), n);
    gp.D = sub.Dz();
    return gp;
}

// Same construction for an arbitrary nominal controller (first q_i inputs read y_i).
inline GeneralizedPlant generalized_plant(const Subsystem& sub, const StateSpace& nominal) {
    const Index m = sub.inputs();
    const Index q = sub.outputs();
    const Index pd = sub.coupling_inputs();
    const StateSpace G = append(sub.open_plant(), nominal);
    std::vector<Connection> links;
    for (Index k = 0; k < m; ++k)
        links.push_back({q + sub.interaction_outputs() + k, k});
    for (Index k = 0; k < q; ++k)
        links.push_back({k, m + pd + k});
    // Inputs [d; u~], outputs [z; y].
    std::vector<Index> ext_in;
    for (Index k = 0; k < pd; ++k)
        ext_in.push_back(m + k);
    for (Index k = 0; k < m; ++k)
        ext_in.push_back(k);
    std::vector<Index> ext_out;
    for (Index k = 0; k < sub.interaction_outputs(); ++k)
        ext_out.push_back(q + k);
    for (Index k = 0; k < q; ++k)
        ext_out.push_back(k);
    const StateSpace L = connect(G, links, ext_in, ext_out);
    const Index pz = sub.interaction_outputs();
    GeneralizedPlant gp;
    gp.A = L.A();
    gp.J = L.B().leftCols(pd);
    gp.B = L.B().rightCols(m);
    gp.S = L.C().topRows(pz);
    gp.C = L.C().bottomRows(q);
    gp.D = L.D().bottomLeftCorner(q, pd);
    if (!L.D().topRows(pz).isZero(0.0) || !L.D().bottomRightCorner(q, m).isZero(0.0))
        throw PreconditionError("generalized_plant: nominal loop has unexpected feedthrough");
    return gp;
}

// Realization of d_i -> z_i with u~ = Q(y - P22 u~) on top of the nominal loop.
inline StateSpace local_map_delta(const GeneralizedPlant& gp, const StateSpace& Q) {
    const Index pd = gp.J.cols();
    const Index m = gp.B.cols();
    const Index q = gp.C.rows();
    const Index pz = gp.S.rows();
    if (Q.inputs() != q || Q.outputs() != m)
        throw DimensionError("local_map_delta: Q must map y_i to u_i");
    Matrix Bx(gp.A.rows(), pd + m);
    Bx << gp.J, gp.B;
    Matrix Cx(pz + q, gp.A.rows());
    Cx << gp.S, gp.C;
    Matrix Dx = Matrix::Zero(pz + q, pd + m);
    Dx.block(pz, 0, q, pd) = gp.D;
    const StateSpace plant(gp.A, Bx, Cx, Dx);    // in [d; u~], out [z; y]
    const StateSpace model = gp.uy();            // in u~, out y_m
    const StateSpace G = append(append(plant, model), Q);
    // G inputs: [d, u~ | u~_m | y0], outputs: [z, y | y_m | u~_Q]
    const Index in_model = pd + m;
    const Index in_q = in_model + m;
    const Index out_model = pz + q;
    const Index out_q = out_model + q;
    std::vector<Connection> links;
    for (Index k = 0; k < m; ++k) {
        links.push_back({out_q + k, pd + k});
        links.push_back({out_q + k, in_model + k});
    }
    for (Index k = 0; k < q; ++k) {
        links.push_back({pz + k, in_q + k, 1.0});
        links.push_back({out_model + k, in_q + k, -1.0});
    }
    std::vector<Index> ext_in(static_cast<std::size_t>(pd));
    std::vector<Index> ext_out(static_cast<std::size_t>(pz));
    std::iota(ext_in.begin(), ext_in.end(), Index{0});
    std::iota(ext_out.begin(), ext_out.end(), Index{0});
    return connect(G, links, ext_in, ext_out);
}

// d_i -> z_i of the isolated subsystem closed by an arbitrary controller.
inline StateSpace coupling_map(const Subsystem& sub, const StateSpace& controller) {
    const Index m = sub.inputs();
    const Index q = sub.outputs();
    const Index pd = sub.coupling_inputs();
    const StateSpace G = append(sub.open_plant(), controller);
    std::vector<Connection> links;
    for (Index k = 0; k < m; ++k)
        links.push_back({q + sub.interaction_outputs() + k, k});
    for (Index k = 0; k < q; ++k)
        links.push_back({k, m + pd + k});
    std::vector<Index> ext_in;
    for (Index k = 0; k < pd; ++k)
        ext_in.push_back(m + k);
    std::vector<Index> ext_out;
    for (Index k = 0; k < sub.interaction_outputs(); ++k)
        ext_out.push_back(q + k);
    return connect(G, links, ext_in, ext_out);
}

// ---------------------------------------------------------------------------
// All-pass family q(s) = k ((s - a)/(s + a))^2
// ---------------------------------------------------------------------------

struct AllPassParam {
    double k = 1.0;
    double a = 1.0;
};

inline Complex allpass_eval(const AllPassParam& p, double omega) {
    const Complex s(0.0, omega);
    const Complex r = (s - p.a) / (s + p.a);
    return p.k * r * r;
}

// (s - a)/(s + a) = 1 - 2a/(s + a), squared and scaled by k.
inline StateSpace allpass_system(const AllPassParam& p) {
    if (!(p.k > 0.0) || !(p.a > 0.0))
        throw PreconditionError("allpass_system: k and a must be positive");
    const Matrix A = Matrix::Constant(1, 1, -p.a);
    const Matrix B = Matrix::Constant(1, 1, 1.0);
    const Matrix C = Matrix::Constant(1, 1, -2.0 * p.a);
    const Matrix D = Matrix::Constant(1, 1, 1.0);
    const StateSpace stage(A, B, C, D);
    return scale_output(series(stage, stage), Matrix::Constant(1, 1, p.k));
}

inline constexpr double kAllPassMinPoleRatio = 1e-6;

// k = |qbar|;  a = omega / tan((2 pi - theta)/4) with theta = arg(qbar) in [0, 2 pi).
// A positive real qbar (theta = 0) needs a -> 0; a is floored at 1e-6 omega.
inline AllPassParam allpass_fit(double omega, Complex qbar) {
    if (!(omega > 0.0))
        throw PreconditionError("allpass_fit: omega must be positive");
    if (!(std::abs(qbar) > 0.0))
        throw PreconditionError("allpass_fit: target value must be nonzero");
    double theta = std::atan2(qbar.imag(), qbar.real());
    if (theta < 0.0)
        theta += 2.0 * std::numbers::pi;
    const double a = omega / std::tan((2.0 * std::numbers::pi - theta) / 4.0);
    return {std::abs(qbar), std::max(a, kAllPassMinPoleRatio * omega)};
}

// ---------------------------------------------------------------------------
// Random locally stabilizing controllers
// ---------------------------------------------------------------------------

// Random stable Q with order drawn from [0, max_order]; eigenvalues pushed
// to real part <= -0.1.
template<typename Rng>
StateSpace random_stable_q(Rng& rng, Index inputs, Index outputs, Index max_order = 3, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_int_distribution<Index> od(0, max_order);
    const Index n = od(rng);
    auto randm = [&](Index r, Index c) {
        Matrix M(r, c);
        for (Index i = 0; i < r; ++i)
            for (Index j = 0; j < c; ++j)
                M(i, j) = nd(rng);
        return M;
    };
    Matrix A = randm(n, n);
    if (n > 0) {
        const double shift = spectral_abscissa(A) + 0.1 + std::abs(nd(rng));
        A -= shift * Matrix::Identity(n, n);
    }
    return StateSpace(A, randm(n, inputs), scale * randm(outputs, n), scale * randm(outputs, inputs));
}

// ---------------------------------------------------------------------------
// Destabilizer search
// ---------------------------------------------------------------------------

struct DestabilizerOptions {
    std::vector<double> omegas = logspace(-2.0, 2.0, 200);
    double delta_floor = 1e-6;    // skip omega where ||delta_1(jw)|| is below this
    double loop_floor = 1e-8;     // skip omega where the q-sensitivity of the loop is below this
    int ladder_steps = 20;        // gain factors 1, 1 +- step, ..., 1 +- ladder_steps*step
    double ladder_step = 1e-2;
    double local_margin = 1e-6;   // attacked local loop abscissa must be below -local_margin
    double global_margin = 1e-6;  // overall abscissa must exceed this
    int target = 2;               // subsystem whose controller is attacked
};

struct DestabilizerCertificate {
    int target = 2;
    double omega = 0.0;
    Complex qbar;
    AllPassParam q;          // after the gain perturbation
    double gain_factor = 1.0;
    int perturbation_index = 0;
    double q1_gain = 0.0;    // static Youla parameter on the other side (0 = nominal)
    Vector dir_out;          // Q = q(s) * dir_out * dir_in'
    Vector dir_in;
    StateSpace kappa1;
    StateSpace kappa2;
    double local_abscissa = 0.0;
    double global_abscissa = 0.0;
};

struct DestabilizerResult {
    std::optional<DestabilizerCertificate> certificate;
    double best_global_abscissa = -std::numeric_limits<double>::infinity();
    int candidates_tried = 0;
    std::string note;

    [[nodiscard]] bool found() const { return certificate.has_value(); }
};

// Plant with inputs [u1; u2] and outputs [y1; y2] closed by two local
// controllers reading [y_i; extra_i].  The extra inputs stay external, in the
// order [extra_1; extra_2].
inline StateSpace close_local_pair(const StateSpace& plant, Index q1, const StateSpace& kappa1,
                                   const StateSpace& kappa2) {
    const Index m1 = kappa1.outputs();
    const Index q2 = plant.outputs() - q1;
    const Index m = plant.inputs();
    const Index qy = plant.outputs();
    if (m1 + kappa2.outputs() != m || kappa1.inputs() < q1 || kappa2.inputs() < q2)
        throw DimensionError("close_local_pair: controllers do not match plant channels");
    const StateSpace G = append(plant, append(kappa1, kappa2));
    std::vector<Connection> links;
    for (Index k = 0; k < m; ++k)
        links.push_back({qy + k, k});
    for (Index k = 0; k < q1; ++k)
        links.push_back({k, m + k});
    for (Index k = 0; k < q2; ++k)
        links.push_back({q1 + k, m + kappa1.inputs() + k});
    std::vector<Index> ext_in;
    for (Index k = q1; k < kappa1.inputs(); ++k)
        ext_in.push_back(m + k);
    for (Index k = q2; k < kappa2.inputs(); ++k)
        ext_in.push_back(m + kappa1.inputs() + k);
    std::vector<Index> ext_out(static_cast<std::size_t>(qy));
    std::iota(ext_out.begin(), ext_out.end(), Index{0});
    return connect(G, links, ext_in, ext_out);
}

// Overall loop (Sigma, {kappa_1, kappa_2}).
inline StateSpace network_loop(const NetworkedSystem& ns, const StateSpace& kappa1, const StateSpace& kappa2) {
    return close_local_pair(interconnect(ns), ns.sub1().outputs(), kappa1, kappa2);
}

namespace detail {

inline DestabilizerResult destabilize_second(const NetworkedSystem& ns, const StateSpace& nominal1,
                                             const StateSpace& nominal2, const DestabilizerOptions& opt) {
    const Subsystem& s1 = ns.sub1();
    const Subsystem& s2 = ns.sub2();
    DestabilizerResult result;
    const GeneralizedPlant gp2 = generalized_plant(s2, nominal2);
    const StateSpace dz2 = gp2.dz();
    const StateSpace uz2 = gp2.uz();
    const StateSpace dy2 = gp2.dy();

    // Rank-one attack directions Q = q(s) a b'.  Coordinate pairs cover SISO exactly.
    std::vector<std::pair<Vector, Vector>> dirs;
    for (Index i = 0; i < s2.inputs(); ++i)
        for (Index j = 0; j < s2.outputs(); ++j)
            dirs.emplace_back(Vector::Unit(s2.inputs(), i), Vector::Unit(s2.outputs(), j));

    std::vector<double> factors{1.0};
    for (int j = 1; j <= opt.ladder_steps; ++j) {
        factors.push_back(1.0 + j * opt.ladder_step);
        factors.push_back(1.0 - j * opt.ladder_step);
    }

    // First keep kappa_1 nominal; if delta_1 vanishes on the whole grid, put a
    // static Youla gain on side 1 so the loop through it is nonzero.
    for (double q1_gain : {0.0, 1.0}) {
        const StateSpace kappa1 =
            q1_gain == 0.0 ? nominal1
                           : youla_controller(s1, nominal1,
                                              StateSpace::gain(Matrix::Constant(s1.inputs(), s1.outputs(), q1_gain)));
        const StateSpace delta1 = coupling_map(s1, kappa1);
        bool any_loop = false;
        for (double w : opt.omegas) {
            const Complex s(0.0, w);
            const CMatrix D1 = eval_at(delta1, s);
            if (D1.norm() < opt.delta_floor)
                continue;
            const CMatrix Z = eval_at(dz2, s);
            const CMatrix U = eval_at(uz2, s);
            const CMatrix Yd = eval_at(dy2, s);
            const Index p1 = D1.rows();
            const CMatrix M = CMatrix::Identity(p1, p1) - D1 * Z;
            Eigen::PartialPivLU<CMatrix> lu(M);
            if (!(lu.rcond() > 1e-12))
                continue;
            for (const auto& [a_dir, b_dir] : dirs) {
                const CVector g = D1 * (U * a_dir.cast<Complex>());
                const CVector h = Yd.transpose() * b_dir.cast<Complex>();
                const Complex sens = h.transpose() * lu.solve(g);
                if (std::abs(sens) < opt.loop_floor)
                    continue;
                any_loop = true;
                const Complex qbar = 1.0 / sens;
                const AllPassParam base = allpass_fit(w, qbar);
                for (std::size_t idx = 0; idx < factors.size(); ++idx) {
                    const AllPassParam p{base.k * factors[idx], base.a};
                    const StateSpace Qs = scale_input(scale_output(allpass_system(p), a_dir), b_dir.transpose());
                    const StateSpace kappa2 = youla_controller(s2, nominal2, Qs);
                    ++result.candidates_tried;
                    const double local = spectral_abscissa(local_loop(s2, kappa2).A());
                    const double global = spectral_abscissa(network_loop(ns, kappa1, kappa2).A());
                    if (local < -opt.local_margin)
                        result.best_global_abscissa = std::max(result.best_global_abscissa, global);
                    if (local < -opt.local_margin && global > opt.global_margin) {
                        DestabilizerCertificate c;
                        c.omega = w;
                        c.qbar = qbar;
                        c.q = p;
                        c.gain_factor = factors[idx];
                        c.perturbation_index = static_cast<int>(idx);
                        c.q1_gain = q1_gain;
                        c.dir_out = a_dir;
                        c.dir_in = b_dir;
                        c.kappa1 = kappa1;
                        c.kappa2 = kappa2;
                        c.local_abscissa = local;
                        c.global_abscissa = global;
                        result.certificate = std::move(c);
                        return result;
                    }
                }
            }
        }
        if (any_loop)
            break;
    }
    result.note = "no destabilizing candidate on the search grid; inconclusive (existence is not ruled out)";
    return result;
}

} // namespace detail

// Searches for a locally stabilizing controller on the target side that,
// with the other side nominal, destabilizes the overall network.  Only
// an inconclusive "not found" can be returned for cascade networks.
inline DestabilizerResult destabilizer_search(const NetworkedSystem& ns, const StateSpace& nominal1,
                                              const StateSpace& nominal2, const DestabilizerOptions& opt = {}) {
    if (opt.target != 1 && opt.target != 2)
        throw PreconditionError("destabilizer_search: target must be 1 or 2");
    for (int i : {1, 2}) {
        const StateSpace& k0 = i == 1 ? nominal1 : nominal2;
        if (!is_hurwitz(local_loop(ns.sub(i), k0).A()).hurwitz)
            throw PreconditionError("destabilizer_search: nominal controller " + std::to_string(i) +
                                    " does not stabilize its subsystem");
    }
    DestabilizerResult r = opt.target == 2 ? detail::destabilize_second(ns, nominal1, nominal2, opt)
                                           : detail::destabilize_second(ns.swapped(), nominal2, nominal1, opt);
    if (r.certificate) {
        r.certificate->target = opt.target;
        if (opt.target == 1)
            std::swap(r.certificate->kappa1, r.certificate->kappa2);
        if (is_cascade(ns).verdict != CascadeVerdict::None)
            throw std::logic_error("destabilizer_search: destabilized a cascade network");
    }
    return r;
}

inline DestabilizerResult destabilizer_search(const NetworkedSystem& ns, const NominalGains& g1,
                                              const NominalGains& g2, const DestabilizerOptions& opt = {}) {
    return destabilizer_search(ns, observer_controller(ns.sub1(), g1), observer_controller(ns.sub2(), g2), opt);
}

// ---------------------------------------------------------------------------
// Vanishing-transfer property check
// ---------------------------------------------------------------------------

struct Lemma2Report {
    bool predicted_zero = false; // D = 0 and (C = 0 or R = 0)
    bool observed_zero = false;  // |C (jwI - (A+BF))^{-1} R + D| vanished on every sample
    double max_abs = 0.0;
    [[nodiscard]] bool agrees() const { return predicted_zero == observed_zero; }
};

// Samples random frequencies and random stabilizing F (LQR with random
// weights) plus the omega = 1e6 asymptote.
inline Lemma2Report lemma2_property_check(const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& R,
                                          double D, int trials, std::uint64_t seed = 0) {
    const Index n = A.rows();
    if (B.rows() != n || B.cols() != 1 || C.rows() != 1 || C.cols() != n || R.rows() != n || R.cols() != 1)
        throw DimensionError("lemma2_property_check: expects single-input, single-output shapes");
    Lemma2Report rep;
    rep.predicted_zero = D == 0.0 && (C.isZero(0.0) || R.isZero(0.0));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> logw(-3.0, 3.0);
    std::uniform_real_distribution<double> wt(-2.0, 2.0);
    const double scale = std::max({1.0, C.norm() * R.norm(), std::abs(D)});
    for (int t = 0; t < trials; ++t) {
        const Matrix F = -lqr(A, B, {std::pow(10.0, wt(rng)), std::pow(10.0, wt(rng))}).K;
        const StateSpace G(A + B * F, R, C, Matrix::Constant(1, 1, D));
        for (double w : {std::pow(10.0, logw(rng)), 1e6})
            rep.max_abs = std::max(rep.max_abs, std::abs(eval_at(G, Complex(0.0, w))(0, 0)));
    }
    rep.observed_zero = rep.max_abs <= 1e-12 * scale;
    return rep;
}

} // namespace netres

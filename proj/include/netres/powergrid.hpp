#pragma once

// Five-generator swing/governor model coupled through a reduced admittance
// matrix, split into two clusters, with LQR tracking controllers.
//
// Generator k, state (delta, omega, P_m, valve):
//   A_k = [[0, 1, 0, 0], [0, -D/M, -1/M, 0], [0, 0, -1/T, 1/T], [0, 1/K, 0, -R/K]]
//   b = e4 / K (governor input),  b_tau = e2 / M (electrical torque),  c = e1'
// Network: A = dg(A_k) - dg(b_tau) Y (I (x) c), torques tau = -Y delta.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "netres/error.hpp"
#include "netres/lti.hpp"
#include "netres/netsys.hpp"
#include "netres/synthesis.hpp"

namespace netres {

struct GeneratorParams {
    double M = 0.1;  // inertia
    double Dd = 1.0; // damping
    double T = 0.01; // turbine time constant
    double K = 0.1;  // governor time constant
    double Rd = 0.02; // droop

    static constexpr double M_lo = 0.01, M_hi = 1.0;
    static constexpr double D_lo = 0.4, D_hi = 11.0;
    static constexpr double T_lo = 0.01, T_hi = 0.02;
    static constexpr double K_lo = 0.03, K_hi = 0.7;
    static constexpr double R_lo = 0.01, R_hi = 0.05;

    [[nodiscard]] bool in_range() const {
        return M >= M_lo && M <= M_hi && Dd >= D_lo && Dd <= D_hi && T >= T_lo && T <= T_hi && K >= K_lo &&
               K <= K_hi && Rd >= R_lo && Rd <= R_hi;
    }

    template<typename Rng>
    static GeneratorParams sample(Rng& rng) {
        auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
        GeneratorParams p;
        p.M = u(M_lo, M_hi);
        p.Dd = u(D_lo, D_hi);
        p.T = u(T_lo, T_hi);
        p.K = u(K_lo, K_hi);
        p.Rd = u(R_lo, R_hi);
        return p;
    }
};

inline constexpr Index kGeneratorStates = 4;

inline Matrix generator_matrix(const GeneratorParams& p) {
    if (!(p.M > 0 && p.Dd > 0 && p.T > 0 && p.K > 0 && p.Rd > 0))
        throw PreconditionError("build_generator: parameters must be positive");
    Matrix A = Matrix::Zero(4, 4);
    A(0, 1) = 1.0;
    A(1, 1) = -p.Dd / p.M;
    A(1, 2) = -1.0 / p.M;
    A(2, 2) = -1.0 / p.T;
    A(2, 3) = 1.0 / p.T;
    A(3, 1) = 1.0 / p.K;
    A(3, 3) = -p.Rd / p.K;
    return A;
}

// Governor input to rotor angle.
inline StateSpace build_generator(const GeneratorParams& p) {
    const Matrix A = generator_matrix(p);
    Matrix b = Matrix::Zero(4, 1);
    b(3, 0) = 1.0 / p.K;
    Matrix c = Matrix::Zero(1, 4);
    c(0, 0) = 1.0;
    return StateSpace(A, b, c);
}

inline Vector torque_input(const GeneratorParams& p) {
    Vector v = Vector::Zero(4);
    v(1) = 1.0 / p.M;
    return v;
}

struct GridModel {
    std::vector<GeneratorParams> generators;
    Matrix Y;
    std::vector<int> cluster1{0, 1, 2};
    std::vector<int> cluster2{3, 4};
    std::uint64_t seed = 0;

    void validate() const {
        const Index g = static_cast<Index>(generators.size());
        if (Y.rows() != g || Y.cols() != g)
            throw DimensionError("GridModel: Y must be " + std::to_string(g) + "x" + std::to_string(g));
        if ((Y - Y.transpose()).norm() > 1e-12 * std::max(1.0, Y.norm()))
            throw PreconditionError("GridModel: Y must be symmetric");
        std::vector<int> seen(static_cast<std::size_t>(g), 0);
        for (const auto* cl : {&cluster1, &cluster2})
            for (int k : *cl) {
                if (k < 0 || k >= g)
                    throw DimensionError("GridModel: cluster index out of range");
                ++seen[static_cast<std::size_t>(k)];
            }
        for (int s : seen)
            if (s != 1)
                throw PreconditionError("GridModel: clusters must cover every generator exactly once");
        if (cluster1.empty() || cluster2.empty())
            throw PreconditionError("GridModel: clusters must be nonempty");
    }
};

template<typename Rng>
std::vector<GeneratorParams> sample_generators(Rng& rng, std::size_t count = 5) {
    std::vector<GeneratorParams> g;
    for (std::size_t k = 0; k < count; ++k)
        g.push_back(GeneratorParams::sample(rng));
    return g;
}

// Full 20-state matrix dg(A_k) - dg(b_tau) Y (I (x) c).
inline Matrix grid_system_matrix(const GridModel& gm) {
    gm.validate();
    const Index g = static_cast<Index>(gm.generators.size());
    const Index n = kGeneratorStates * g;
    Matrix A = Matrix::Zero(n, n);
    for (Index k = 0; k < g; ++k) {
        const auto& p = gm.generators[static_cast<std::size_t>(k)];
        A.block(4 * k, 4 * k, 4, 4) = generator_matrix(p);
        for (Index l = 0; l < g; ++l)
            A(4 * k + 1, 4 * l) -= gm.Y(k, l) / p.M;
    }
    return A;
}

// Two-subsystem partition.  Subsystem i keeps its own Y block in A_i;
// J_i = -dg(b_tau)_i Y_ij, S_i = C_i = angle selectors, B_i = dg(b_k)_i.
// R = dg(b_k) over all generators.
inline NetworkedSystem build_network(const GridModel& gm) {
    gm.validate();
    auto sub = [&](const std::vector<int>& own, const std::vector<int>& other) {
        const Index g = static_cast<Index>(own.size());
        const Index n = 4 * g;
        Matrix A = Matrix::Zero(n, n);
        Matrix B = Matrix::Zero(n, g);
        Matrix S = Matrix::Zero(g, n);
        Matrix J = Matrix::Zero(n, static_cast<Index>(other.size()));
        for (Index a = 0; a < g; ++a) {
            const auto& p = gm.generators[static_cast<std::size_t>(own[static_cast<std::size_t>(a)])];
            const int ka = own[static_cast<std::size_t>(a)];
            A.block(4 * a, 4 * a, 4, 4) = generator_matrix(p);
            for (Index b = 0; b < g; ++b)
                A(4 * a + 1, 4 * b) -= gm.Y(ka, own[static_cast<std::size_t>(b)]) / p.M;
            for (std::size_t b = 0; b < other.size(); ++b)
                J(4 * a + 1, static_cast<Index>(b)) = -gm.Y(ka, other[b]) / p.M;
            B(4 * a + 3, a) = 1.0 / p.K;
            S(a, 4 * a) = 1.0;
        }
        return Subsystem(A, B, S, J, S);
    };
    Subsystem s1 = sub(gm.cluster1, gm.cluster2);
    Subsystem s2 = sub(gm.cluster2, gm.cluster1);
    const Matrix R = block_diag(s1.B(), s2.B());
    return NetworkedSystem(std::move(s1), std::move(s2), R);
}

// Permutation mapping network state order (cluster1, cluster2) to generator order.
inline Matrix cluster_permutation(const GridModel& gm) {
    const Index n = kGeneratorStates * static_cast<Index>(gm.generators.size());
    Matrix P = Matrix::Zero(n, n);
    Index row = 0;
    for (const auto* cl : {&gm.cluster1, &gm.cluster2})
        for (int k : *cl)
            for (Index s = 0; s < 4; ++s)
                P(row++, 4 * k + s) = 1.0;
    return P;
}

// ---------------------------------------------------------------------------
// Tracking controllers
// ---------------------------------------------------------------------------

// Observer-based integral tracking controller; inputs [y; yd], output u:
//   xhat' = A xhat + B u + L (y - C xhat),  eta' = y - yd,  u = -Kx xhat - Ke eta.
struct TrackingGains {
    Matrix Kx, Ke, L;
};

inline StateSpace tracking_controller(const Subsystem& sub, const TrackingGains& g) {
    const Index n = sub.states();
    const Index q = sub.outputs();
    Matrix A(n + q, n + q);
    A << sub.A() - sub.B() * g.Kx - g.L * sub.C(), -sub.B() * g.Ke, Matrix::Zero(q, n), Matrix::Zero(q, q);
    Matrix B(n + q, 2 * q);
    B << g.L, Matrix::Zero(n, q), Matrix::Identity(q, q), -Matrix::Identity(q, q);
    Matrix C(sub.inputs(), n + q);
    C << -g.Kx, -g.Ke;
    return StateSpace(A, B, C);
}

// LQR on the integral-augmented local plant d/dt [x'; e] = [[A, 0], [C, 0]] [x'; e] + [B; 0] u'.
inline TrackingGains design_tracking_gains(const Subsystem& sub, const LqrWeights& w = {},
                                           const LqrWeights& observer = {}) {
    const Index n = sub.states();
    const Index q = sub.outputs();
    Matrix Aa = Matrix::Zero(n + q, n + q);
    Aa.topLeftCorner(n, n) = sub.A();
    Aa.bottomLeftCorner(q, n) = sub.C();
    Matrix Ba = Matrix::Zero(n + q, sub.inputs());
    Ba.topRows(n) = sub.B();
    const Matrix K = lqr(Aa, Ba, w).K;
    return {K.leftCols(n), K.rightCols(q), design_observer_gain(sub.A(), sub.C(), observer)};
}

struct TrackingDesign {
    TrackingGains g1, g2;
    StateSpace k1, k2;
};

inline TrackingDesign design_tracking_controllers(const NetworkedSystem& ns, const LqrWeights& w = {}) {
    TrackingDesign d;
    d.g1 = design_tracking_gains(ns.sub1(), w);
    d.g2 = design_tracking_gains(ns.sub2(), w);
    d.k1 = tracking_controller(ns.sub1(), d.g1);
    d.k2 = tracking_controller(ns.sub2(), d.g2);
    return d;
}

inline constexpr double kAttackInputPenalty = 1e4;

// Detuned variant: input penalty multiplied by kAttackInputPenalty.
inline TrackingDesign design_detuned_controllers(const NetworkedSystem& ns, const LqrWeights& w = {}) {
    return design_tracking_controllers(ns, {w.state, w.input * kAttackInputPenalty});
}

// Piecewise-constant random reference shared by every output channel.
struct ReferenceLevel {
    double t;
    double level;
};

template<typename Rng>
std::vector<ReferenceLevel> random_reference(Rng& rng, double T, double period, double amplitude = 0.1) {
    std::uniform_real_distribution<double> ud(-amplitude, amplitude);
    std::vector<ReferenceLevel> r;
    for (double t = 0.0; t < T; t += period)
        r.push_back({t, ud(rng)});
    return r;
}

} // namespace netres

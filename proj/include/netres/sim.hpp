#pragma once

// Fixed-step RK4 simulation of LTI systems and controller-swap scenarios.
//
// For x' = A x + B u a classical RK4 step is linear in (x, u(t), u(t+h/2),
// u(t+h)), so it is precomputed once as
//
//     x+ = M x + N0 u(t) + Nh u(t + h/2) + N1 u(t + h).
//
// When the input is held over a block of s steps the block map
// x -> M^s x + (sum_j M^j)(N0 + Nh + N1) u is precomputed as well.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "netres/error.hpp"
#include "netres/lti.hpp"
#include "netres/netsys.hpp"
#include "netres/resilience.hpp"

namespace netres {

inline constexpr double kStepResolution = 0.1; // max h * |lambda|_max

inline double spectral_radius(const Matrix& A) {
    return A.rows() == 0 ? 0.0 : eigenvalues(A).cwiseAbs().maxCoeff();
}

// Largest step allowed by the resolution guard, capped at h_max.
inline double resolving_step(const Matrix& A, double h_max = 1e-3) {
    const double rho = spectral_radius(A);
    return rho > 0.0 ? std::min(h_max, kStepResolution / rho) : h_max;
}

class Rk4Propagator {
public:
    Rk4Propagator(const Matrix& A, const Matrix& B, double h) : h_(h) {
        if (!(h > 0.0))
            throw PreconditionError("Rk4Propagator: step must be positive");
        if (h * spectral_radius(A) > kStepResolution * (1.0 + 1e-12))
            throw PreconditionError("Rk4Propagator: h |lambda|_max = " + std::to_string(h * spectral_radius(A)) +
                                    " exceeds " + std::to_string(kStepResolution));
        const Index n = A.rows();
        const Index m = B.cols();
        // Run one RK4 step on the basis blocks (x; u0; uh; u1).
        const Matrix hA = h * A;
        const Matrix hB = h * B;
        auto stage = [&](const Matrix& X, const Matrix& U0, const Matrix& Uh, const Matrix& U1) {
            const Matrix k1 = hA * X + hB * U0;
            const Matrix k2 = hA * (X + 0.5 * k1) + hB * Uh;
            const Matrix k3 = hA * (X + 0.5 * k2) + hB * Uh;
            const Matrix k4 = hA * (X + k3) + hB * U1;
            return Matrix(X + (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0);
        };
        const Matrix Zu = Matrix::Zero(m, n);
        const Matrix Zx = Matrix::Zero(n, m);
        const Matrix Im = Matrix::Identity(m, m);
        const Matrix Zm = Matrix::Zero(m, m);
        M_ = stage(Matrix::Identity(n, n), Zu, Zu, Zu);
        N0_ = stage(Zx, Im, Zm, Zm);
        Nh_ = stage(Zx, Zm, Im, Zm);
        N1_ = stage(Zx, Zm, Zm, Im);
    }

    [[nodiscard]] double step() const { return h_; }
    [[nodiscard]] const Matrix& M() const { return M_; }

    [[nodiscard]] Vector advance(const Vector& x, const Vector& u0, const Vector& uh, const Vector& u1) const {
        Vector out = M_ * x;
        if (u0.size() > 0)
            out += N0_ * u0 + Nh_ * uh + N1_ * u1;
        return out;
    }

    // Block map for `s` steps under a constant input.
    void prepare_block(Index s) {
        const Index n = M_.rows();
        Ms_ = Matrix::Identity(n, n);
        Matrix sum = Matrix::Zero(n, n);
        for (Index j = 0; j < s; ++j) {
            sum += Ms_;
            Ms_ = M_ * Ms_;
        }
        Ns_ = sum * (N0_ + Nh_ + N1_);
        block_ = s;
    }

    [[nodiscard]] Index block() const { return block_; }

    [[nodiscard]] Vector advance_block(const Vector& x, const Vector& u) const {
        Vector out = Ms_ * x;
        if (u.size() > 0)
            out += Ns_ * u;
        return out;
    }

private:
    double h_;
    Matrix M_, N0_, Nh_, N1_;
    Matrix Ms_, Ns_;
    Index block_ = 0;
};

// Recorded samples.  For scenario runs x is the physical plant state and phi
// the compensator state; for plain simulate() x is the full system state.
struct Trajectory {
    std::vector<double> t;
    std::vector<Vector> x;
    std::vector<Vector> phi;
    std::vector<Vector> y;
    std::vector<Vector> u;
    std::vector<Vector> ref;
    double h = 0.0;
    bool diverged = false;
    double divergence_time = 0.0;

    [[nodiscard]] std::size_t size() const { return t.size(); }
};

using InputSignal = std::function<Vector(double)>;

struct SimOptions {
    Index record_every = 1;             // keep every k-th step
    bool hold_input = false;            // sample u at each record instant and hold it over the interval
    double divergence_threshold = 1e8;  // on ||x||_inf
    // Called at every recorded sample with (t, full state).
    std::function<void(double, const Vector&)> observer;
};

inline Index step_count(double T, double h) {
    if (!(T >= 0.0) || !(h > 0.0))
        throw PreconditionError("simulate: need T >= 0 and h > 0");
    return static_cast<Index>(std::llround(T / h));
}

inline bool state_diverged(const Vector& x, double threshold) {
    return !x.allFinite() || (x.size() > 0 && x.cwiseAbs().maxCoeff() > threshold);
}

inline Trajectory simulate(const StateSpace& sys, const Vector& x0, const InputSignal& input, double T, double h,
                           const SimOptions& opt = {}) {
    if (x0.size() != sys.states())
        throw DimensionError("simulate: x0 has " + std::to_string(x0.size()) + " entries, system has " +
                             std::to_string(sys.states()) + " states");
    if (!x0.allFinite())
        throw PreconditionError("simulate: non-finite initial state");
    if (opt.record_every < 1)
        throw PreconditionError("simulate: record_every must be positive");
    const Index m = sys.inputs();
    auto u_at = [&](double t) -> Vector {
        if (m == 0)
            return Vector(0);
        Vector u = input ? input(t) : Vector::Zero(m);
        if (u.size() != m)
            throw DimensionError("simulate: input signal has wrong size");
        return u;
    };
    Rk4Propagator prop(sys.A(), sys.B(), h);
    if (opt.hold_input)
        prop.prepare_block(opt.record_every);
    const Index N = step_count(T, h);
    Trajectory tr;
    tr.h = h;
    auto record = [&](Index k, const Vector& x, const Vector& u) {
        const double t = static_cast<double>(k) * h;
        tr.t.push_back(t);
        tr.x.push_back(x);
        tr.u.push_back(u);
        tr.y.push_back(sys.C() * x + sys.D() * u);
        if (opt.observer)
            opt.observer(t, x);
    };
    Vector x = x0;
    Vector u = u_at(0.0);
    record(0, x, u);
    Index k = 0;
    while (k < N) {
        const Index s = std::min(opt.record_every, N - k);
        const double t0 = static_cast<double>(k) * h;
        if (opt.hold_input && s == prop.block()) {
            x = prop.advance_block(x, u_at(t0));
        } else {
            for (Index j = 0; j < s; ++j) {
                const double t = static_cast<double>(k + j) * h;
                const Vector u0 = opt.hold_input ? u_at(t0) : u_at(t);
                x = opt.hold_input ? prop.advance(x, u0, u0, u0)
                                   : prop.advance(x, u0, u_at(t + 0.5 * h), u_at(t + h));
            }
        }
        k += s;
        u = u_at(static_cast<double>(k) * h);
        if (state_diverged(x, opt.divergence_threshold)) {
            tr.diverged = true;
            tr.divergence_time = static_cast<double>(k) * h;
            if (x.allFinite())
                record(k, x, u);
            break;
        }
        record(k, x, u);
    }
    return tr;
}

// ---------------------------------------------------------------------------
// L2 norms
// ---------------------------------------------------------------------------

struct L2Result {
    double value = 0.0;
    double terminal_ratio = 0.0; // ||v(T)||^2 / max_t ||v(t)||^2
};

inline L2Result l2_norm(std::span<const double> t, std::span<const Vector> v) {
    if (t.size() != v.size())
        throw DimensionError("l2_norm: sample count mismatch");
    L2Result r;
    if (t.empty())
        return r;
    double integral = 0.0;
    double peak = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double e = v[k].squaredNorm();
        peak = std::max(peak, e);
        if (k > 0)
            integral += 0.5 * (t[k] - t[k - 1]) * (e + v[k - 1].squaredNorm());
    }
    r.value = std::sqrt(integral);
    r.terminal_ratio = peak > 0.0 ? v.back().squaredNorm() / peak : 0.0;
    return r;
}

enum class Signal { State, Compensator, Error, Output, Input, TrackingError };

inline std::vector<Vector> select_signal(const Trajectory& tr, Signal s) {
    switch (s) {
    case Signal::State: return tr.x;
    case Signal::Compensator: return tr.phi;
    case Signal::Output: return tr.y;
    case Signal::Input: return tr.u;
    case Signal::Error: {
        if (tr.phi.size() != tr.x.size())
            throw PreconditionError("select_signal: trajectory has no compensator state");
        std::vector<Vector> out;
        for (std::size_t k = 0; k < tr.x.size(); ++k)
            out.push_back(tr.x[k] - tr.phi[k]);
        return out;
    }
    case Signal::TrackingError: {
        if (tr.ref.size() != tr.y.size())
            throw PreconditionError("select_signal: trajectory has no reference");
        std::vector<Vector> out;
        for (std::size_t k = 0; k < tr.y.size(); ++k)
            out.push_back(tr.y[k] - tr.ref[k]);
        return out;
    }
    }
    return {};
}

inline L2Result l2_norm(const Trajectory& tr, Signal s) {
    if (tr.diverged)
        throw PreconditionError("l2_norm: trajectory diverged");
    const std::vector<Vector> v = select_signal(tr, s);
    return l2_norm(tr.t, v);
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

// Plant as seen by the local controllers, with its state layout.
struct ScenarioPlant {
    StateSpace sys; // inputs u = [u1; u2], outputs y = [y1; y2]
    Index eta = 0;  // leading compensator states
    Index n = 0;    // physical states following them
    Index q1 = 0;   // outputs of subsystem 1
    Index m1 = 0;   // inputs of subsystem 1
};

inline ScenarioPlant make_plant(const NetworkedSystem& ns) {
    return {interconnect(ns), 0, ns.states(), ns.sub1().outputs(), ns.sub1().inputs()};
}

inline ScenarioPlant make_plant(const NetworkedSystem& ns, const Compensator& phi) {
    return {attach_compensator(ns, phi), phi.eta, ns.states(), ns.sub1().outputs(), ns.sub1().inputs()};
}

inline ScenarioPlant make_plant(const NetworkedSystem& ns, const ObserverCompensator& oc) {
    return {attach_observer_compensator(ns, oc), oc.base.eta, ns.states(), ns.sub1().outputs(),
            ns.sub1().inputs()};
}

// Local controllers; inputs [y_i] or [y_i; yd_i], output u_i.
struct ControllerPair {
    StateSpace k1;
    StateSpace k2;
};

struct Segment {
    double t_start = 0.0;
    std::string controllers;
};

struct ReferenceStep {
    double t = 0.0;
    Vector value; // y^d for all outputs
};

struct Scenario {
    std::vector<Segment> segments;
    std::vector<ReferenceStep> reference; // piecewise constant; empty means zero
    double T = 0.0;
    double h = 1e-3;
    Vector x0;                 // physical plant state; compensator starts at zero
    bool reset_on_swap = false;
    Index record_every = 1;
    double divergence_threshold = 1e8;
};

struct SegmentReport {
    double t_start = 0.0;
    double t_end = 0.0;
    std::string controllers;
    double closed_abscissa = 0.0;
    double local_abscissa1 = 0.0;
    double local_abscissa2 = 0.0;
    double tracking_rms = 0.0;      // over the segment
    double tracking_rms_tail = 0.0; // over its last 20 %
    bool controller_state_reset = false;
};

struct ScenarioResult {
    Trajectory traj;
    std::vector<SegmentReport> segments;
};

inline Vector reference_at(const Scenario& sc, double t, Index q) {
    Vector r = Vector::Zero(q);
    for (const auto& step : sc.reference) {
        if (step.t > t)
            break;
        if (step.value.size() != q)
            throw DimensionError("run_scenario: reference value has wrong size");
        r = step.value;
    }
    return r;
}

namespace detail {

inline Index ref_inputs(const StateSpace& k, Index q) {
    const Index e = k.inputs() - q;
    if (e != 0 && e != q)
        throw DimensionError("run_scenario: controller must read y_i or [y_i; yd_i]");
    return e;
}

// Closed loop of the plant with both controllers; external input is [yd1; yd2].
// State order: plant, k1, k2.  Also returns the u and y read-out maps.
struct ClosedLoop {
    StateSpace sys;
    Matrix Cu, Du; // u = Cu X + Du yd
    Matrix Cy;     // y = Cy X
};

inline ClosedLoop close_scenario_loop(const ScenarioPlant& p, const ControllerPair& kp) {
    const Index q1 = p.q1;
    const Index q2 = p.sys.outputs() - q1;
    const Index e1 = ref_inputs(kp.k1, q1);
    const Index e2 = ref_inputs(kp.k2, q2);
    if (kp.k1.outputs() != p.m1 || kp.k2.outputs() != p.sys.inputs() - p.m1)
        throw DimensionError("run_scenario: controller outputs do not match plant inputs");
    const Index np = p.sys.states();
    const Index n1 = kp.k1.states();
    const Index n2 = kp.k2.states();
    const Index N = np + n1 + n2;
    const Index q = q1 + q2;
    // Reference input vector is always [yd1; yd2] of size q; unused parts are ignored.
    Matrix A = Matrix::Zero(N, N);
    Matrix B = Matrix::Zero(N, q);
    Matrix Cu = Matrix::Zero(p.sys.inputs(), N);
    Matrix Du = Matrix::Zero(p.sys.inputs(), q);
    const Matrix& Cp = p.sys.C();
    if (!p.sys.D().isZero(0.0))
        throw PreconditionError("run_scenario: plant must be strictly proper");
    auto fill = [&](const StateSpace& k, Index off_state, Index off_u, Index off_y, Index qi, Index ei) {
        const Index nk = k.states();
        const Index mi = k.outputs();
        const Matrix Cyi = Cp.middleRows(off_y, qi);
        // controller state dynamics
        A.block(off_state, off_state, nk, nk) = k.A();
        A.block(off_state, 0, nk, np) = k.B().leftCols(qi) * Cyi;
        // controller output u_i
        Cu.block(off_u, off_state, mi, nk) = k.C();
        Cu.block(off_u, 0, mi, np) = k.D().leftCols(qi) * Cyi;
        if (ei > 0) {
            B.block(off_state, off_y, nk, qi) = k.B().rightCols(ei);
            Du.block(off_u, off_y, mi, qi) = k.D().rightCols(ei);
        }
    };
    fill(kp.k1, np, 0, 0, q1, e1);
    fill(kp.k2, np + n1, p.m1, q1, q2, e2);
    A.topRows(np) += p.sys.B() * Cu;
    A.topLeftCorner(np, np) += p.sys.A();
    B.topRows(np) += p.sys.B() * Du;
    Matrix Cy = Matrix::Zero(q, N);
    Cy.leftCols(np) = Cp;
    return {StateSpace(A, B, Cy), Cu, Du, Cy};
}

} // namespace detail

inline ScenarioResult run_scenario(const ScenarioPlant& plant, const std::map<std::string, ControllerPair>& bank,
                                   const Scenario& sc, const NetworkedSystem* ns = nullptr) {
    if (sc.segments.empty() || sc.segments.front().t_start != 0.0)
        throw PreconditionError("run_scenario: segments must start at t = 0");
    for (std::size_t i = 1; i < sc.segments.size(); ++i)
        if (!(sc.segments[i].t_start > sc.segments[i - 1].t_start))
            throw PreconditionError("run_scenario: segment times must be strictly increasing");
    if (!(sc.T >= sc.segments.back().t_start))
        throw PreconditionError("run_scenario: horizon ends before the last segment");
    if (sc.x0.size() != plant.n)
        throw DimensionError("run_scenario: x0 must have " + std::to_string(plant.n) + " entries");
    for (const auto& seg : sc.segments)
        if (!bank.count(seg.controllers))
            throw PreconditionError("run_scenario: unknown controller set '" + seg.controllers + "'");

    const Index q = plant.sys.outputs();
    const Index np = plant.sys.states();
    ScenarioResult res;
    Trajectory& tr = res.traj;
    tr.h = sc.h;
    const Index N = step_count(sc.T, sc.h);

    // Full plant state: compensator states, physical x, then any observer copy (starts at 0).
    Vector xp = Vector::Zero(np);
    xp.segment(plant.eta, plant.n) = sc.x0;
    Vector xk1, xk2;
    Index k = 0;

    for (std::size_t si = 0; si < sc.segments.size(); ++si) {
        const Segment& seg = sc.segments[si];
        const ControllerPair& kp = bank.at(seg.controllers);
        const Index k_end = si + 1 < sc.segments.size()
                                ? std::min(N, step_count(sc.segments[si + 1].t_start, sc.h))
                                : N;
        SegmentReport rep;
        rep.t_start = seg.t_start;
        rep.t_end = static_cast<double>(k_end) * sc.h;
        rep.controllers = seg.controllers;
        const bool keep1 = !sc.reset_on_swap && xk1.size() == kp.k1.states();
        const bool keep2 = !sc.reset_on_swap && xk2.size() == kp.k2.states();
        rep.controller_state_reset = si > 0 && !(keep1 && keep2);
        if (!keep1)
            xk1 = Vector::Zero(kp.k1.states());
        if (!keep2)
            xk2 = Vector::Zero(kp.k2.states());

        const detail::ClosedLoop cl = detail::close_scenario_loop(plant, kp);
        rep.closed_abscissa = spectral_abscissa(cl.sys.A());
        if (ns) {
            rep.local_abscissa1 = spectral_abscissa(local_loop(ns->sub1(), kp.k1).A());
            rep.local_abscissa2 = spectral_abscissa(local_loop(ns->sub2(), kp.k2).A());
        }
        Vector X(cl.sys.states());
        X << xp, xk1, xk2;

        Rk4Propagator prop(cl.sys.A(), cl.sys.B(), sc.h);
        prop.prepare_block(sc.record_every);
        auto record = [&](Index kk) {
            const double t = static_cast<double>(kk) * sc.h;
            const Vector r = reference_at(sc, t, q);
            tr.t.push_back(t);
            tr.phi.push_back(X.head(plant.eta));
            tr.x.push_back(X.segment(plant.eta, plant.n));
            tr.y.push_back(cl.Cy * X);
            tr.u.push_back(cl.Cu * X + cl.Du * r);
            tr.ref.push_back(r);
        };
        const std::size_t first_sample = tr.size();
        if (si == 0)
            record(k);
        while (k < k_end) {
            // Blocks end on record instants and on segment boundaries.
            const Index to_record = sc.record_every - (k % sc.record_every);
            const Index s = std::min(to_record, k_end - k);
            const Vector r = reference_at(sc, static_cast<double>(k) * sc.h, q);
            if (s == prop.block()) {
                X = prop.advance_block(X, r);
            } else {
                for (Index j = 0; j < s; ++j)
                    X = prop.advance(X, r, r, r);
            }
            k += s;
            if (state_diverged(X, sc.divergence_threshold)) {
                tr.diverged = true;
                tr.divergence_time = static_cast<double>(k) * sc.h;
                rep.t_end = tr.divergence_time;
                break;
            }
            if (k % sc.record_every == 0 || k == N)
                record(k);
        }
        // Tracking statistics from the recorded samples of this segment.
        std::vector<double> errs;
        for (std::size_t i = first_sample; i < tr.size(); ++i)
            errs.push_back((tr.y[i] - tr.ref[i]).squaredNorm());
        if (!errs.empty()) {
            double all = 0.0, tail = 0.0;
            const std::size_t tail_from = errs.size() - std::max<std::size_t>(1, errs.size() / 5);
            for (std::size_t i = 0; i < errs.size(); ++i) {
                all += errs[i];
                if (i >= tail_from)
                    tail += errs[i];
            }
            rep.tracking_rms = std::sqrt(all / static_cast<double>(errs.size()));
            rep.tracking_rms_tail = std::sqrt(tail / static_cast<double>(errs.size() - tail_from));
        }
        res.segments.push_back(rep);
        xp = X.head(np);
        xk1 = X.segment(np, kp.k1.states());
        xk2 = X.segment(np + kp.k1.states(), kp.k2.states());
        if (tr.diverged)
            break;
    }
    return res;
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9e", v);
    return buf;
}

// Header t,x1..xn,phi1..phin,y1..yq,u1..um; phi columns only when present.
inline void write_csv(std::ostream& os, const Trajectory& tr) {
    const Index n = tr.x.empty() ? 0 : tr.x.front().size();
    const Index e = tr.phi.empty() ? 0 : tr.phi.front().size();
    const Index q = tr.y.empty() ? 0 : tr.y.front().size();
    const Index m = tr.u.empty() ? 0 : tr.u.front().size();
    os << "t";
    for (Index i = 1; i <= n; ++i)
        os << ",x" << i;
    for (Index i = 1; i <= e; ++i)
        os << ",phi" << i;
    for (Index i = 1; i <= q; ++i)
        os << ",y" << i;
    for (Index i = 1; i <= m; ++i)
        os << ",u" << i;
    os << '\n';
    for (std::size_t k = 0; k < tr.size(); ++k) {
        os << format_number(tr.t[k]);
        auto put = [&](const std::vector<Vector>& v) {
            if (v.size() != tr.size())
                return;
            for (Index i = 0; i < v[k].size(); ++i)
                os << ',' << format_number(v[k](i));
        };
        put(tr.x);
        if (e > 0)
            put(tr.phi);
        put(tr.y);
        put(tr.u);
        os << '\n';
    }
}

inline void write_csv(const std::string& path, const Trajectory& tr) {
    std::ofstream f(path);
    if (!f)
        throw std::runtime_error("write_csv: cannot open " + path);
    write_csv(f, tr);
}

} // namespace netres

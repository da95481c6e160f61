#pragma once

// End-to-end grid experiment: nominal tracking, controller attack, optional
// recovery, with or without the supervisory compensator.

#include <optional>
#include <random>
#include <string>

#include "netres/powergrid.hpp"
#include "netres/resilience.hpp"
#include "netres/sim.hpp"
#include "netres/youla.hpp"

namespace netres {

struct GridSetup {
    GridModel model;
    NetworkedSystem ns;
    TrackingDesign nominal;
    TrackingDesign detuned;
    int resamples = 0; // parameter draws rejected because a local design failed
};

// Samples generator parameters from `seed`; a draw whose local tracking
// design fails is replaced by the draw of seed + 1, and so on.
inline GridSetup setup_grid(const Matrix& Y, std::uint64_t seed, int max_resamples = 50) {
    for (int r = 0; r <= max_resamples; ++r) {
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(r));
        GridModel gm;
        gm.Y = Y;
        gm.seed = seed + static_cast<std::uint64_t>(r);
        gm.generators = sample_generators(rng, static_cast<std::size_t>(Y.rows()));
        try {
            NetworkedSystem ns = build_network(gm);
            TrackingDesign nom = design_tracking_controllers(ns);
            TrackingDesign det = design_detuned_controllers(ns);
            return {gm, ns, nom, det, r};
        } catch (const PreconditionError&) {
        } catch (const NumericalError&) {
        }
    }
    throw PreconditionError("setup_grid: no stabilizable parameter draw found");
}

inline GridSetup setup_grid(const GridModel& gm) {
    NetworkedSystem ns = build_network(gm);
    return {gm, ns, design_tracking_controllers(ns), design_detuned_controllers(ns), 0};
}

enum class AttackKind { Detuned, Youla };

inline std::string to_string(AttackKind k) { return k == AttackKind::Detuned ? "detuned_lqr" : "youla_allpass"; }

struct GridAttack {
    AttackKind kind = AttackKind::Detuned;
    ControllerPair controllers;
    double uncompensated_abscissa = 0.0;
    std::optional<DestabilizerCertificate> certificate;
};

// The detuned pair if it already destabilizes the uncompensated grid,
// otherwise an all-pass Youla attack built around the nominal controllers.
inline GridAttack choose_attack(const GridSetup& g) {
    GridAttack a;
    a.controllers = {g.detuned.k1, g.detuned.k2};
    a.uncompensated_abscissa = spectral_abscissa(network_loop(g.ns, g.detuned.k1, g.detuned.k2).A());
    if (a.uncompensated_abscissa > 0.0)
        return a;
    const DestabilizerResult r = destabilizer_search(g.ns, g.nominal.k1, g.nominal.k2);
    if (!r.found())
        return a;
    a.kind = AttackKind::Youla;
    a.controllers = {r.certificate->kappa1, r.certificate->kappa2};
    a.uncompensated_abscissa = r.certificate->global_abscissa;
    a.certificate = r.certificate;
    return a;
}

struct GridDemoOptions {
    bool compensator = true;
    bool observer = false;
    std::optional<double> attack_at = 200.0;
    std::optional<double> recover_at = 1000.0;
    double T = 2000.0;
    double reference_period = 100.0;
    double reference_amplitude = 0.1;
    double record_dt = 0.1;
    double h_max = 1e-3;
    bool reset_on_swap = false;
    std::uint64_t seed = 0;
};

struct GridDemoResult {
    ScenarioResult run;
    GridAttack attack;
    std::optional<PerformanceBound> bound;
    double h = 0.0;
};

inline GridDemoResult run_grid_demo(const GridSetup& g, const GridDemoOptions& opt) {
    GridDemoResult out;
    ScenarioPlant plant;
    if (!opt.compensator) {
        plant = make_plant(g.ns);
    } else if (opt.observer) {
        const ObserverCompensator oc = synthesize_observer_compensator(g.ns);
        out.bound = performance_bound(oc.base, g.ns);
        plant = make_plant(g.ns, oc);
    } else {
        const Compensator phi = synthesize_compensator(g.ns);
        out.bound = performance_bound(phi, g.ns);
        plant = make_plant(g.ns, phi);
    }

    std::map<std::string, ControllerPair> bank{{"nominal", {g.nominal.k1, g.nominal.k2}}};
    Scenario sc;
    sc.segments.push_back({0.0, "nominal"});
    if (opt.attack_at) {
        out.attack = choose_attack(g);
        bank["attacked"] = out.attack.controllers;
        sc.segments.push_back({*opt.attack_at, "attacked"});
        if (opt.recover_at) {
            if (!(*opt.recover_at > *opt.attack_at))
                throw PreconditionError("grid demo: recovery must follow the attack");
            sc.segments.push_back({*opt.recover_at, "nominal"});
        }
    }
    // One step size for the whole run, resolving every segment's dynamics.
    double h = opt.h_max;
    for (const auto& [id, kp] : bank)
        h = std::min(h, resolving_step(detail::close_scenario_loop(plant, kp).sys.A(), opt.h_max));
    // Keep record instants on the step lattice.
    const Index stride = std::max<Index>(1, static_cast<Index>(std::ceil(opt.record_dt / h - 1e-9)));
    h = opt.record_dt / static_cast<double>(stride);
    sc.h = h;
    sc.record_every = stride;
    sc.T = opt.T;
    sc.reset_on_swap = opt.reset_on_swap;
    sc.x0 = Vector::Zero(g.ns.states());
    std::mt19937_64 rng(opt.seed);
    const Index q = g.ns.outputs();
    for (const auto& lv : random_reference(rng, opt.T, opt.reference_period, opt.reference_amplitude))
        sc.reference.push_back({lv.t, Vector::Constant(q, lv.level)});
    out.h = h;
    out.run = run_scenario(plant, bank, sc, &g.ns);
    return out;
}

} // namespace netres

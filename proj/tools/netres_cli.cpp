// netres: command-line front end.
//
// Exit codes
//   check:          0 resilient, 2 not resilient, 3 unknown
//   compensate:     0 verified, 4 D_i != 0, 5 verification failed
//   attack-search:  0 destabilizer found, 3 none found (inconclusive)
//   any command:    1 malformed input or runtime failure

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "netres/grid_demo.hpp"
#include "netres/io.hpp"
#include "netres/resilience.hpp"
#include "netres/sim.hpp"
#include "netres/svg.hpp"
#include "netres/weak_resilience.hpp"

#ifndef NETRES_DATA_DIR
#define NETRES_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace netres;
using io::json;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::string out = ".";
    std::optional<double> tol;
};

fs::path out_path(const Globals& g, const std::string& name) {
    fs::create_directories(g.out);
    return fs::path(g.out) / name;
}

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

json cascade_json(const CascadeReport& c) {
    return {{"verdict", to_string(c.verdict)},
            {"J1S2", c.js12},
            {"D1S2", c.ds12},
            {"J2S1", c.js21},
            {"D2S1", c.ds21}};
}

// One chart per output channel, reference dashed in when present.
void write_output_charts(const Globals& g, const std::string& stem, const Trajectory& tr,
                         const std::vector<double>& markers) {
    if (tr.y.empty())
        return;
    const Index q = tr.y.front().size();
    for (Index i = 0; i < q; ++i) {
        svg::Chart c;
        c.title = stem + ": y" + std::to_string(i + 1);
        c.y_label = "y" + std::to_string(i + 1);
        c.markers = markers;
        svg::Series s{"y" + std::to_string(i + 1), tr.t, {}, svg::palette(0)};
        for (const auto& y : tr.y)
            s.y.push_back(y(i));
        c.series.push_back(std::move(s));
        if (tr.ref.size() == tr.size()) {
            svg::Series r{"reference", tr.t, {}, svg::palette(1)};
            for (const auto& v : tr.ref)
                r.y.push_back(v(i));
            c.series.push_back(std::move(r));
        }
        svg::write(out_path(g, stem + "_y" + std::to_string(i + 1) + ".svg").string(), c);
    }
}

int cmd_check(const Globals& g, const std::string& file) {
    const NetworkedSystem ns = io::network_from_json(io::read_json_file(file));
    ResilienceOptions opt;
    if (g.tol)
        opt.cascade_tol = *g.tol;
    const ResilienceReport r = is_weakly_resilient(ns, opt);
    json j = {{"cascade", cascade_json(r.cascade)},
              {"verdict", to_string(r.verdict)},
              {"siso", r.siso},
              {"minimal", r.minimal},
              {"explanation", r.explanation}};
    if (r.search) {
        j["search"] = {{"found", r.search->found()}, {"candidates", r.search->candidates_tried}};
        if (r.search->found()) {
            const auto path = out_path(g, "certificate.json");
            io::write_json_file(path.string(), io::to_json(*r.search->certificate));
            j["certificate"] = path.string();
        } else {
            j["search"]["note"] = r.search->note;
        }
    }
    print(j);
    switch (r.verdict) {
    case ResilienceVerdict::Resilient:
    case ResilienceVerdict::ResilientSufficient: return 0;
    case ResilienceVerdict::NotResilient: return 2;
    case ResilienceVerdict::Unknown: return 3;
    }
    return 3;
}

CutDirection parse_cut(const std::string& s) {
    if (s == "2from1")
        return CutDirection::Cut2From1;
    if (s == "1from2")
        return CutDirection::Cut1From2;
    return CutDirection::Auto;
}

int cmd_compensate(const Globals& g, const std::string& file, const std::string& cut, const std::string& theta) {
    const NetworkedSystem ns = io::network_from_json(io::read_json_file(file));
    if (!ns.feedthrough_free()) {
        std::cerr << "compensate: the construction requires D_i = 0\n";
        return 4;
    }
    CompensatorOptions opt;
    opt.cut = parse_cut(cut);
    opt.theta = theta == "lqr" ? ThetaPolicy::Lqr : ThetaPolicy::GammaScan;
    const Compensator phi = synthesize_compensator(ns, opt);
    const double tol = g.tol.value_or(1e-7);
    const std::vector<double> grid = default_grid();
    const TriangularReport tri = verify_triangular(ns, phi, grid, tol);
    const PerformanceBound pb = performance_bound(phi, ns);
    io::write_json_file(out_path(g, "compensator.json").string(), io::to_json(phi));
    const json report = {{"triangular",
                          {{"passed", tri.passed()},
                           {"lower_residual", tri.lower_residual},
                           {"upper_residual", tri.upper_residual},
                           {"diag_residual", tri.diag_residual},
                           {"scale", tri.scale},
                           {"tol", tol}}},
                         {"gamma", pb.gamma},
                         {"gamma_interaction", pb.gamma_interaction},
                         {"bound_factor", pb.factor},
                         {"cut", io::to_string(phi.cut)},
                         {"rank_Gamma", numerical_rank(phi.Gamma)},
                         {"abscissa_A_plus_RTheta",
                          spectral_abscissa(interconnect(ns).A() + ns.R() * phi.Theta)}};
    io::write_json_file(out_path(g, "compensate_report.json").string(), report);
    print(report);
    return tri.passed() ? 0 : 5;
}

int cmd_attack(const Globals& g, const std::string& file, int target) {
    const NetworkedSystem ns = io::network_from_json(io::read_json_file(file));
    DestabilizerOptions opt;
    opt.target = target;
    const DestabilizerResult r =
        destabilizer_search(ns, default_nominal_gains(ns.sub1()), default_nominal_gains(ns.sub2()), opt);
    json j = {{"cascade", to_string(is_cascade(ns).verdict)},
              {"found", r.found()},
              {"candidates", r.candidates_tried},
              {"best_global_abscissa", r.best_global_abscissa}};
    if (r.found()) {
        const json c = io::to_json(*r.certificate);
        io::write_json_file(out_path(g, "destabilizer.json").string(), c);
        for (const char* key : {"omega", "k", "a", "local_abscissa", "global_abscissa", "target"})
            j[key] = c[key];
    } else {
        j["note"] = r.note;
    }
    print(j);
    return r.found() ? 0 : 3;
}

// Network closed by default observer-based local controllers, optionally
// compensated, from a seeded random initial state.
int cmd_simulate(const Globals& g, const std::string& file, bool compensate, double T, double h) {
    const NetworkedSystem ns = io::network_from_json(io::read_json_file(file));
    ScenarioPlant plant = make_plant(ns);
    if (compensate)
        plant = make_plant(ns, synthesize_compensator(ns));
    const StateSpace k1 = observer_controller(ns.sub1(), default_nominal_gains(ns.sub1()));
    const StateSpace k2 = observer_controller(ns.sub2(), default_nominal_gains(ns.sub2()));
    std::map<std::string, ControllerPair> bank{{"nominal", {k1, k2}}};
    Scenario sc;
    sc.segments = {{0.0, "nominal"}};
    sc.T = T;
    const double h_ok = resolving_step(detail::close_scenario_loop(plant, bank.at("nominal")).sys.A(), h);
    sc.h = h_ok;
    std::mt19937_64 rng(g.seed);
    std::normal_distribution<double> nd;
    sc.x0 = Vector(ns.states());
    for (Index i = 0; i < sc.x0.size(); ++i)
        sc.x0(i) = nd(rng);
    sc.record_every = std::max<Index>(1, static_cast<Index>(std::llround(0.01 / h_ok)));
    const ScenarioResult res = run_scenario(plant, bank, sc, &ns);
    write_csv(out_path(g, "trajectory.csv").string(), res.traj);
    write_output_charts(g, "trajectory", res.traj, {});
    print({{"h", sc.h},
           {"samples", res.traj.size()},
           {"diverged", res.traj.diverged},
           {"closed_abscissa", res.segments.front().closed_abscissa}});
    return 0;
}

int cmd_grid_demo(const Globals& g, const GridDemoOptions& base, const std::string& y_file,
                  const std::string& config_file) {
    const Matrix Y = io::admittance_from_json(io::read_json_file(y_file));
    GridSetup setup = config_file.empty()
                          ? setup_grid(Y, g.seed)
                          : setup_grid(io::grid_from_json(io::read_json_file(config_file), Y, g.seed));
    GridDemoOptions opt = base;
    opt.seed = g.seed;
    const GridDemoResult res = run_grid_demo(setup, opt);
    write_csv(out_path(g, "grid.csv").string(), res.run.traj);
    std::vector<double> markers;
    for (std::size_t i = 1; i < res.run.segments.size(); ++i)
        markers.push_back(res.run.segments[i].t_start);
    write_output_charts(g, "grid", res.run.traj, markers);

    json segs = json::array();
    for (const auto& s : res.run.segments)
        segs.push_back({{"t_start", s.t_start},
                        {"t_end", s.t_end},
                        {"controllers", s.controllers},
                        {"closed_abscissa", s.closed_abscissa},
                        {"local_abscissa", {s.local_abscissa1, s.local_abscissa2}},
                        {"tracking_rms", s.tracking_rms},
                        {"tracking_rms_tail", s.tracking_rms_tail}});
    json summary = {{"seed", g.seed},
                    {"parameter_seed", setup.model.seed},
                    {"resamples", setup.resamples},
                    {"model", io::to_json(setup.model)},
                    {"compensator", opt.compensator ? (opt.observer ? "observer" : "state") : "none"},
                    {"h", res.h},
                    {"diverged", res.run.traj.diverged},
                    {"segments", segs}};
    if (res.run.traj.diverged)
        summary["divergence_time"] = res.run.traj.divergence_time;
    if (opt.attack_at)
        summary["attack"] = {{"kind", to_string(res.attack.kind)},
                             {"uncompensated_abscissa", res.attack.uncompensated_abscissa}};
    if (res.bound)
        summary["gamma"] = res.bound->gamma;
    io::write_json_file(out_path(g, "summary.json").string(), summary);
    print(summary["segments"]);
    std::cout << "diverged: " << (res.run.traj.diverged ? "yes" : "no") << '\n';
    return 0;
}

int cmd_norms(const Globals& g, const std::string& file) {
    const json j = io::read_json_file(file);
    const double tol = g.tol.value_or(1e-4);
    if (j.contains("sub1")) {
        const NetworkedSystem ns = io::network_from_json(j);
        const StateSpace plant = interconnect(ns);
        json out = {{"states", ns.states()}, {"open_loop_abscissa", spectral_abscissa(plant.A())}};
        if (ns.feedthrough_free()) {
            const Compensator phi = synthesize_compensator(ns);
            const PerformanceBound pb = performance_bound(phi, ns, tol);
            out["gamma"] = pb.gamma;
            out["gamma_interaction"] = pb.gamma_interaction;
        }
        print(out);
        return 0;
    }
    const StateSpace G = io::state_space_from_json(j);
    const HinfResult h = hinf_norm(G, tol);
    print({{"hinf", h.norm}, {"lower_bound", h.lower_bound}, {"peak_omega", h.peak_omega}, {"iterations", h.iterations}});
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Resilience analysis and supervisory compensation for two-subsystem networked LTI systems"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    double tol = 0.0;
    auto* tol_opt = app.add_option("--tol", tol, "Tolerance override for the command's main check");

    std::string file;
    auto* check = app.add_subcommand("check", "Cascade test and weak-resilience verdict");
    check->add_option("system", file, "NetworkedSystem JSON")->required();

    std::string cut = "auto", theta = "gamma-scan";
    auto* comp = app.add_subcommand("compensate", "Synthesize and verify the supervisory compensator");
    comp->add_option("system", file, "NetworkedSystem JSON")->required();
    comp->add_option("--cut", cut, "auto | 2from1 | 1from2")->check(CLI::IsMember({"auto", "2from1", "1from2"}));
    comp->add_option("--theta", theta, "gamma-scan | lqr")->check(CLI::IsMember({"gamma-scan", "lqr"}));

    int target = 2;
    auto* attack = app.add_subcommand("attack-search", "Search a locally stabilizing destabilizing controller");
    attack->add_option("system", file, "NetworkedSystem JSON")->required();
    attack->add_option("--target", target, "Attacked subsystem")->check(CLI::IsMember({1, 2}));

    bool compensate = false;
    double T = 20.0, h = 1e-3;
    auto* sim = app.add_subcommand("simulate", "Simulate the network under default local controllers");
    sim->add_option("system", file, "NetworkedSystem JSON")->required();
    sim->add_flag("--compensate", compensate, "Attach the synthesized compensator");
    sim->add_option("--T", T, "Horizon [s]")->capture_default_str();
    sim->add_option("--step", h, "Maximum step [s]")->capture_default_str();

    GridDemoOptions gd;
    bool no_comp = false;
    double attack_at = 200.0, recover_at = 0.0;
    bool no_attack = false;
    std::string y_file = std::string(NETRES_DATA_DIR) + "/ieee14_Y.json";
    std::string config;
    auto* grid = app.add_subcommand("grid-demo", "Five-generator attack and recovery experiment");
    grid->add_flag("--no-compensator", no_comp, "Run without the supervisory compensator");
    grid->add_flag("--observer", gd.observer, "Feed the compensator from an observer");
    grid->add_option("--attack-at", attack_at, "Attack time [s]")->capture_default_str();
    auto* rec = grid->add_option("--recover-at", recover_at, "Recovery time [s]");
    grid->add_flag("--no-attack", no_attack, "Nominal controllers throughout");
    grid->add_option("--T", gd.T, "Horizon [s]")->capture_default_str();
    grid->add_option("--y-file", y_file, "Reduced admittance JSON")->capture_default_str();
    grid->add_option("--config", config, "Grid config JSON (explicit generator parameters)");

    auto* norms = app.add_subcommand("norms", "H-infinity norm of a system, or gamma of a network");
    norms->add_option("system", file, "StateSpace or NetworkedSystem JSON")->required();

    CLI11_PARSE(app, argc, argv);
    if (tol_opt->count() > 0)
        g.tol = tol;

    try {
        if (check->parsed())
            return cmd_check(g, file);
        if (comp->parsed())
            return cmd_compensate(g, file, cut, theta);
        if (attack->parsed())
            return cmd_attack(g, file, target);
        if (sim->parsed())
            return cmd_simulate(g, file, compensate, T, h);
        if (grid->parsed()) {
            gd.compensator = !no_comp;
            gd.attack_at = no_attack ? std::nullopt : std::optional<double>(attack_at);
            gd.recover_at = rec->count() > 0 ? std::optional<double>(recover_at) : std::nullopt;
            if (gd.recover_at && !gd.attack_at)
                throw PreconditionError("--recover-at needs an attack");
            return cmd_grid_demo(g, gd, y_file, config);
        }
        if (norms->parsed())
            return cmd_norms(g, file);
    } catch (const io::FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

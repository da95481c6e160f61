#pragma once

// JSON (de)serialization for the model types.  Matrices are row-major nested
// arrays; an empty matrix may be written as [] and takes its shape from
// context.

#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "netres/error.hpp"
#include "netres/lti.hpp"
#include "netres/netsys.hpp"
#include "netres/powergrid.hpp"
#include "netres/resilience.hpp"
#include "netres/youla.hpp"

namespace netres::io {

using json = nlohmann::json;

// Malformed or inconsistent input document.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Rows must have equal length.  [] and [[]] are 0x0; shapes with a zero
// dimension are fixed later by the caller.
inline Matrix matrix_from_json(const json& j, const std::string& name) {
    if (j.is_number())
        return Matrix::Constant(1, 1, j.get<double>());
    if (!j.is_array())
        throw FormatError("'" + name + "' must be a nested array");
    const Index rows = static_cast<Index>(j.size());
    if (rows == 0)
        return Matrix(0, 0);
    if (!j[0].is_array())
        throw FormatError("'" + name + "' must be an array of rows");
    const Index cols = static_cast<Index>(j[0].size());
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols)
            throw FormatError("'" + name + "' has ragged rows");
        for (Index k = 0; k < cols; ++k) {
            const json& v = row[static_cast<std::size_t>(k)];
            if (!v.is_number())
                throw FormatError("'" + name + "' has a non-numeric entry");
            M(i, k) = v.get<double>();
        }
    }
    if (cols == 0)
        return Matrix(rows > 1 ? rows : 0, 0);
    return M;
}

inline json matrix_to_json(const Matrix& M) {
    json j = json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Index k = 0; k < M.cols(); ++k)
            row.push_back(M(i, k));
        j.push_back(row);
    }
    return j;
}

inline const json& field(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key))
        throw FormatError(where + ": missing field '" + key + "'");
    return j.at(key);
}

// Fits a matrix read as 0x0 into an expected shape with a zero dimension.
inline Matrix shaped(Matrix M, Index rows, Index cols, const std::string& name) {
    if (M.size() == 0 && (rows == 0 || cols == 0))
        return Matrix(rows, cols);
    if (M.rows() != rows || M.cols() != cols)
        throw DimensionError("'" + name + "' must be " + std::to_string(rows) + "x" + std::to_string(cols) +
                             ", got " + shape_str(M));
    return M;
}

// ---------------------------------------------------------------------------
// StateSpace {"A","B","C","D"}; omitted D is zero.
// ---------------------------------------------------------------------------

inline StateSpace state_space_from_json(const json& j) {
    Matrix A = matrix_from_json(field(j, "A", "StateSpace"), "A");
    Matrix B = matrix_from_json(field(j, "B", "StateSpace"), "B");
    Matrix C = matrix_from_json(field(j, "C", "StateSpace"), "C");
    std::optional<Matrix> D;
    if (j.contains("D"))
        D = matrix_from_json(j.at("D"), "D");
    const Index n = A.rows();
    const Index m = B.cols() > 0 ? B.cols() : (D ? D->cols() : 0);
    const Index q = C.rows() > 0 ? C.rows() : (D ? D->rows() : 0);
    A = shaped(A, n, n, "A");
    B = shaped(B, n, m, "B");
    C = shaped(C, q, n, "C");
    return StateSpace(A, B, C, D ? shaped(*D, q, m, "D") : Matrix::Zero(q, m));
}

inline json to_json(const StateSpace& G) {
    return {{"A", matrix_to_json(G.A())},
            {"B", matrix_to_json(G.B())},
            {"C", matrix_to_json(G.C())},
            {"D", matrix_to_json(G.D())}};
}

// ---------------------------------------------------------------------------
// Subsystem / NetworkedSystem
// ---------------------------------------------------------------------------

inline Subsystem subsystem_from_json(const json& j) {
    const Matrix A = matrix_from_json(field(j, "A", "Subsystem"), "A");
    const Matrix B = matrix_from_json(field(j, "B", "Subsystem"), "B");
    const Matrix C = matrix_from_json(field(j, "C", "Subsystem"), "C");
    const Matrix J = matrix_from_json(field(j, "J", "Subsystem"), "J");
    const Matrix S = matrix_from_json(field(j, "S", "Subsystem"), "S");
    Matrix Dz(0, 0);
    if (j.contains("Dz"))
        Dz = matrix_from_json(j.at("Dz"), "Dz");
    return Subsystem(A, B, C, J, S, Dz);
}

inline json to_json(const Subsystem& s) {
    return {{"A", matrix_to_json(s.A())}, {"B", matrix_to_json(s.B())}, {"C", matrix_to_json(s.C())},
            {"J", matrix_to_json(s.J())}, {"S", matrix_to_json(s.S())}, {"Dz", matrix_to_json(s.Dz())}};
}

// Missing "R" means the identity.
inline NetworkedSystem network_from_json(const json& j) {
    Subsystem s1 = subsystem_from_json(field(j, "sub1", "NetworkedSystem"));
    Subsystem s2 = subsystem_from_json(field(j, "sub2", "NetworkedSystem"));
    Matrix R(0, 0);
    if (j.contains("R"))
        R = matrix_from_json(j.at("R"), "R");
    return NetworkedSystem(std::move(s1), std::move(s2), R);
}

inline json to_json(const NetworkedSystem& ns) {
    return {{"sub1", to_json(ns.sub1())}, {"sub2", to_json(ns.sub2())}, {"R", matrix_to_json(ns.R())}};
}

// ---------------------------------------------------------------------------
// Compensator {"Lambda","Gamma","Xi","Theta","eta"}
// ---------------------------------------------------------------------------

inline std::string to_string(CutDirection c) {
    switch (c) {
    case CutDirection::Auto: return "auto";
    case CutDirection::Cut2From1: return "cut_2from1";
    case CutDirection::Cut1From2: return "cut_1from2";
    }
    return "auto";
}

inline json to_json(const Compensator& phi) {
    return {{"Lambda", matrix_to_json(phi.Lambda)}, {"Gamma", matrix_to_json(phi.Gamma)},
            {"Xi", matrix_to_json(phi.Xi)},         {"Theta", matrix_to_json(phi.Theta)},
            {"eta", phi.eta},                       {"cut", to_string(phi.cut)}};
}

inline Compensator compensator_from_json(const json& j) {
    Compensator phi;
    phi.Lambda = matrix_from_json(field(j, "Lambda", "Compensator"), "Lambda");
    phi.Gamma = matrix_from_json(field(j, "Gamma", "Compensator"), "Gamma");
    phi.Xi = matrix_from_json(field(j, "Xi", "Compensator"), "Xi");
    phi.Theta = matrix_from_json(field(j, "Theta", "Compensator"), "Theta");
    phi.eta = field(j, "eta", "Compensator").get<Index>();
    const std::string cut = j.value("cut", "cut_2from1");
    phi.cut = cut == "cut_1from2" ? CutDirection::Cut1From2 : CutDirection::Cut2From1;
    return phi;
}

// ---------------------------------------------------------------------------
// Destabilizer certificate
// ---------------------------------------------------------------------------

inline json to_json(const DestabilizerCertificate& c) {
    json j = {{"omega", c.omega},
              {"k", c.q.k},
              {"a", c.q.a},
              {"local_abscissa", c.local_abscissa},
              {"global_abscissa", c.global_abscissa},
              {"target", c.target},
              {"gain_factor", c.gain_factor},
              {"qbar", {c.qbar.real(), c.qbar.imag()}},
              {"q1_gain", c.q1_gain},
              {"direction_out", matrix_to_json(c.dir_out)},
              {"direction_in", matrix_to_json(c.dir_in)}};
    j["kappa1"] = to_json(c.kappa1);
    j["kappa2"] = to_json(c.kappa2);
    return j;
}

// ---------------------------------------------------------------------------
// Grid data
// ---------------------------------------------------------------------------

inline json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw FormatError("cannot open " + path);
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f)
        throw std::runtime_error("cannot write " + path);
    f << j.dump(2) << '\n';
}

// {"Y": [[...]], "source": ..., "version": ...}
inline Matrix admittance_from_json(const json& j) {
    const Matrix Y = matrix_from_json(field(j, "Y", "admittance file"), "Y");
    if (Y.rows() != Y.cols())
        throw DimensionError("admittance matrix must be square");
    return Y;
}

inline json to_json(const GeneratorParams& p) {
    return {{"M", p.M}, {"D", p.Dd}, {"T", p.T}, {"K", p.K}, {"R", p.Rd}};
}

inline GeneratorParams generator_from_json(const json& j) {
    GeneratorParams p;
    p.M = field(j, "M", "generator").get<double>();
    p.Dd = field(j, "D", "generator").get<double>();
    p.T = field(j, "T", "generator").get<double>();
    p.K = field(j, "K", "generator").get<double>();
    p.Rd = field(j, "R", "generator").get<double>();
    return p;
}

// Grid config: {"seed": s, "generators": [...optional...], "clusters": [[0,1,2],[3,4]]}.
// Explicit generators override sampling.
inline GridModel grid_from_json(const json& j, const Matrix& Y, std::uint64_t default_seed) {
    GridModel gm;
    gm.Y = Y;
    gm.seed = j.value("seed", default_seed);
    if (j.contains("generators")) {
        for (const auto& g : j.at("generators"))
            gm.generators.push_back(generator_from_json(g));
    } else {
        std::mt19937_64 rng(gm.seed);
        gm.generators = sample_generators(rng, static_cast<std::size_t>(Y.rows()));
    }
    if (j.contains("clusters")) {
        const auto& cl = j.at("clusters");
        if (!cl.is_array() || cl.size() != 2)
            throw FormatError("'clusters' must list two index arrays");
        gm.cluster1 = cl[0].get<std::vector<int>>();
        gm.cluster2 = cl[1].get<std::vector<int>>();
    }
    gm.validate();
    return gm;
}

inline json to_json(const GridModel& gm) {
    json gens = json::array();
    for (const auto& g : gm.generators)
        gens.push_back(to_json(g));
    return {{"seed", gm.seed}, {"generators", gens}, {"clusters", {gm.cluster1, gm.cluster2}}};
}

} // namespace netres::io

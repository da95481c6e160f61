#pragma once

// Seeded random instances for property tests and demos.

#include <cmath>
#include <random>

#include "netres/lti.hpp"
#include "netres/netsys.hpp"

namespace netres {

template<typename Rng>
Matrix random_matrix(Rng& rng, Index rows, Index cols, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            M(i, j) = nd(rng);
    return M;
}

// Random A shifted so that its spectral abscissa equals -margin.
template<typename Rng>
Matrix random_hurwitz(Rng& rng, Index n, double margin = 0.5) {
    Matrix A = random_matrix(rng, n, n, 1.0 / std::sqrt(static_cast<double>(std::max<Index>(n, 1))));
    if (n > 0)
        A -= (spectral_abscissa(A) + margin) * Matrix::Identity(n, n);
    return A;
}

template<typename Rng>
StateSpace random_stable_system(Rng& rng, Index n, Index m, Index q, bool with_d = true) {
    return StateSpace(random_hurwitz(rng, n), random_matrix(rng, n, m), random_matrix(rng, q, n),
                      with_d ? random_matrix(rng, q, m) : Matrix::Zero(q, m));
}

struct InstanceShape {
    Index n1 = 2, n2 = 2;   // states
    Index m1 = 1, m2 = 1;   // control inputs
    Index q1 = 1, q2 = 1;   // measured outputs
    Index p1 = 1, p2 = 1;   // interaction outputs z_i
    double coupling = 1.0;  // std of J_i entries
    bool feedthrough = false; // draw D_i != 0
};

// Dense random network.  Subsystem A_i is generically unstable; every
// coupling product is nonzero with probability one.  Redraws (bounded)
// until both subsystems are minimal.
template<typename Rng>
NetworkedSystem random_network(Rng& rng, const InstanceShape& s) {
    for (int attempt = 0;; ++attempt) {
        auto sub = [&](Index n, Index m, Index q, Index p_out, Index p_in) {
            Matrix A = random_matrix(rng, n, n, 1.0 / std::sqrt(static_cast<double>(n)));
            Matrix D = s.feedthrough ? random_matrix(rng, q, p_in) : Matrix::Zero(q, p_in);
            return Subsystem(A, random_matrix(rng, n, m), random_matrix(rng, q, n),
                             random_matrix(rng, n, p_in, s.coupling), random_matrix(rng, p_out, n), D);
        };
        Subsystem s1 = sub(s.n1, s.m1, s.q1, s.p1, s.p2);
        Subsystem s2 = sub(s.n2, s.m2, s.q2, s.p2, s.p1);
        if ((s1.minimal() && s2.minimal()) || attempt >= 20)
            return NetworkedSystem(std::move(s1), std::move(s2));
    }
}

template<typename Rng>
InstanceShape random_shape(Rng& rng, Index max_states, bool siso) {
    std::uniform_int_distribution<Index> nd(1, max_states);
    std::uniform_int_distribution<Index> cd(1, 2);
    InstanceShape s;
    s.n1 = nd(rng);
    s.n2 = nd(rng);
    if (!siso) {
        s.m1 = std::min(cd(rng), s.n1);
        s.m2 = std::min(cd(rng), s.n2);
        s.q1 = std::min(cd(rng), s.n1);
        s.q2 = std::min(cd(rng), s.n2);
        s.p1 = cd(rng);
        s.p2 = cd(rng);
    }
    return s;
}

} // namespace netres

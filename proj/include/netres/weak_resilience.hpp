#pragma once

// Weak-resilience verdict for a two-subsystem network.
//
// A cascade network is resilient under any hypotheses.  For scalar channels
// and minimal subsystems the converse also holds, and a constructive
// destabilizing controller is searched for as a certificate.  Outside those
// hypotheses a non-cascade network gets no verdict.

#include <optional>
#include <string>

#include "netres/netsys.hpp"
#include "netres/youla.hpp"

namespace netres {

enum class ResilienceVerdict {
    Resilient,           // cascade, exact characterization applies
    ResilientSufficient, // cascade, hypotheses for necessity unmet
    NotResilient,        // non-cascade, scalar channels, minimal subsystems
    Unknown,             // non-cascade outside the exact characterization
};

inline std::string to_string(ResilienceVerdict v) {
    switch (v) {
    case ResilienceVerdict::Resilient: return "resilient";
    case ResilienceVerdict::ResilientSufficient: return "resilient_sufficient";
    case ResilienceVerdict::NotResilient: return "not_resilient";
    case ResilienceVerdict::Unknown: return "unknown";
    }
    return "unknown";
}

struct ResilienceReport {
    ResilienceVerdict verdict = ResilienceVerdict::Unknown;
    CascadeReport cascade;
    bool siso = false;
    bool minimal = false;
    std::optional<DestabilizerResult> search; // run only for NotResilient
    std::string explanation;

    [[nodiscard]] bool has_certificate() const { return search && search->found(); }
};

struct ResilienceOptions {
    double cascade_tol = kZeroProductTolerance;
    bool run_search = true;
    DestabilizerOptions search{};
};

inline ResilienceReport is_weakly_resilient(const NetworkedSystem& ns, const ResilienceOptions& opt = {}) {
    ResilienceReport r;
    r.cascade = is_cascade(ns, opt.cascade_tol);
    r.siso = ns.siso();
    r.minimal = ns.minimal();
    const bool exact = r.siso && r.minimal;

    if (r.cascade.verdict != CascadeVerdict::None) {
        r.verdict = exact ? ResilienceVerdict::Resilient : ResilienceVerdict::ResilientSufficient;
        r.explanation = "cascade structure (" + to_string(r.cascade.verdict) +
                        "): no loop through both subsystems, every pair of locally stabilizing controllers "
                        "stabilizes the network";
        if (!exact)
            r.explanation += std::string("; ") + (r.siso ? "a subsystem is not minimal" : "channels are not scalar") +
                             ", so cascade is only known to be sufficient";
        return r;
    }
    if (!exact) {
        r.verdict = ResilienceVerdict::Unknown;
        r.explanation = std::string("non-cascade, but ") +
                        (r.siso ? "a subsystem is not minimal" : "channels are not scalar") +
                        "; necessity of the cascade condition is not established here";
        return r;
    }
    r.verdict = ResilienceVerdict::NotResilient;
    r.explanation = "non-cascade with scalar channels and minimal subsystems: some locally stabilizing pair "
                    "destabilizes the network";
    if (opt.run_search) {
        const NominalGains g1 = default_nominal_gains(ns.sub1());
        const NominalGains g2 = default_nominal_gains(ns.sub2());
        r.search = destabilizer_search(ns, g1, g2, opt.search);
        if (r.search->found())
            r.explanation += "; destabilizing controller found (see certificate)";
        else
            r.explanation += "; constructive search found no certificate on its grid (inconclusive search, "
                             "verdict unchanged)";
    }
    return r;
}

} // namespace netres

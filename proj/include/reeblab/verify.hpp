#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reeblab/system.hpp"

namespace reeblab {

struct CheckEntry {
    std::string id;
    long samples = 0;
    double worst = 0.0;
    double tol = 0.0;
    bool pass = true;
    bool informational = false;
    std::string note;
};

struct VerificationReport {
    std::string system;
    std::string spec_hash;
    std::uint64_t seed = 0;
    std::vector<CheckEntry> checks;
    bool overall = true; // pass iff every non-informational entry passes
};

// Runs the full structural battery: decomposition consistency, Reeb
// residuals on and off Z, contact coefficient, Theta nondegeneracy, u spread,
// R+-invariance (informational), level-set tangency and Liouville margins,
// symplectization residual.  Deterministic for a fixed seed; sweeps respect
// REEBLAB_THREADS.
VerificationReport run_battery(const SystemSpec& sys, std::uint64_t seed, int n_off = 1000,
                               int n_on = 200);

// Serialized report; the environment stamp is appended unless stripped (the
// stripped form is the determinism-comparison payload).
std::string report_to_json(const VerificationReport& rep, bool with_environment = true);

// Deterministic index-sliced parallel loop capped by REEBLAB_THREADS.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace reeblab

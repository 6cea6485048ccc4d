#pragma once

#include <cstdint>

#include "smf/fock_oracle.hpp"

namespace smf {

struct OracleCheckReport {
    std::size_t states = 0;
    std::size_t comparisons = 0;
    double max_deviation = 0.0;     // Gaussian engine vs Fock sum, all weight subsets
    double thermal_deviation = 0.0; // Gaussian engine vs 1/(1 + w n)
};

/// Random Gaussian state on 1..max_modes modes: thermal, squeezed and
/// two-mode-squeezed pieces followed by a Haar-random passive unitary.
OracleState random_gaussian_state(std::uint64_t seed, std::size_t max_modes = 3);

/// Compares gaussian_no_click with the Fock oracle on random states, for every
/// subset of modes with random weights.
OracleCheckReport run_oracle_check(std::size_t n_states = 200, std::uint64_t seed = 20240611);

} // namespace smf

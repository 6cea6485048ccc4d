#pragma once

#include <vector>

#include "smf/common.hpp"

namespace smf {

/// Small few-mode states for brute-force checks of the Gaussian click engine.
struct OracleComponent {
    enum class Kind { thermal, squeezed, two_mode_squeezed, fock };
    Kind kind = Kind::thermal;
    std::size_t mode = 0;
    std::size_t partner = 0; // second mode of a two-mode squeezer
    double mean = 0.0;       // thermal mean photon number
    double r = 0.0;          // squeezing parameter
    double phase = 0.0;      // <a a> or <a_1 a_2> carries e^{i phase}
    int photons = 0;         // fock

    static OracleComponent thermal(std::size_t mode, double mean);
    static OracleComponent squeezed(std::size_t mode, double r, double phase);
    static OracleComponent two_mode_squeezed(std::size_t a, std::size_t b, double r, double phase);
    static OracleComponent fock(std::size_t mode, int n);
};

/// Product of components on n_modes modes followed by a passive unitary,
/// a_i -> sum_j U_ij a_j. Unlisted modes are vacuum.
struct OracleState {
    std::size_t n_modes = 1;
    std::vector<OracleComponent> components;
    MatrixXc unitary; // empty means identity

    void validate() const;
};

inline constexpr int oracle_max_truncation = 40;
inline constexpr std::size_t oracle_max_modes = 4;

struct PhotonDistribution {
    std::vector<std::vector<int>> occupations;
    std::vector<double> probabilities;
    double captured = 0.0; // trace kept by the truncation
    int truncation = 0;
};

/// Output photon-number distribution from the sector-blocked density matrix.
PhotonDistribution fock_photon_distribution(const OracleState& state, int max_photons = oracle_max_truncation);

/// <:exp(-sum_i w_i n_i):> by direct summation.
double fock_oracle_expectation(const OracleState& state, const Eigen::VectorXd& weights,
                               int max_photons = oracle_max_truncation);

/// Same, over a precomputed distribution.
double fock_oracle_expectation(const PhotonDistribution& dist, const Eigen::VectorXd& weights);

/// Probability that every group in subset clicks. group_of_mode maps modes to
/// groups; dark[g] is the Poisson dark mean of group g.
double fock_oracle_click_probability(const OracleState& state, const Eigen::VectorXd& weights,
                                     const std::vector<int>& group_of_mode, const std::vector<double>& dark,
                                     unsigned subset, int max_photons = oracle_max_truncation);

/// Closed-form Gaussian moments (N, M) of a state without Fock components.
std::pair<MatrixXc, MatrixXc> oracle_gaussian_moments(const OracleState& state);

} // namespace smf

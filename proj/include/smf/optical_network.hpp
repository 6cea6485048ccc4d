#pragma once

#include <array>
#include <string>
#include <vector>

#include "smf/common.hpp"
#include "smf/mode_analysis.hpp"
#include "smf/source_model.hpp"

namespace smf {

enum class Detector { A = 0, B = 1, C = 2, D = 3 };

inline constexpr std::array<Detector, 4> all_detectors{Detector::A, Detector::B, Detector::C, Detector::D};

char detector_name(Detector d);

struct DetectorModel {
    Detector name = Detector::A;
    double efficiency = 0.0;   // eta
    ModeBasis basis;           // retained modes of the arm's gate+filter chain
    double dark_mean = 0.0;    // mu per gate

    Eigen::VectorXd mode_weights() const { return basis.eigenvalues; }
    void validate() const;
};

/// Retained modes of a basis: eigenvalue >= cutoff, at most max_modes.
ModeBasis retain_modes(const ModeBasis& basis, double cutoff = retention_cutoff, std::size_t max_modes = 12);

/// Signal bases feed A and B (shared by the 50:50 outputs), idler bases feed C and D.
struct ArmBases {
    ModeBasis signal;  // A and B
    ModeBasis idler_right; // C
    ModeBasis idler_left;  // D
};

struct ModeLabel {
    Detector detector;
    std::size_t index;
};

struct DetectionMoments {
    std::vector<ModeLabel> modes;
    MatrixXc normal;
    MatrixXc anomalous;
    double tau = 0.0;

    /// Column indices of the modes belonging to a detector.
    std::vector<Eigen::Index> modes_of(Detector d) const;
};

/// Projects both spools onto detection modes for a relative signal delay tau.
/// A/B modes: (1/sqrt2) sum_m u_j[m] (e^{i tau x_m / 2} a^r_s,m +- e^{-i tau x_m / 2} a^l_s,m),
/// with x_m the offset from the Stokes grid center; C/D: u_j . a^{r/l}_a.
DetectionMoments detection_mode_projection(const GaussianMoments& moments, const ArmBases& bases, double tau);

/// Power FWHM (rad/s) of a sampled non-negative curve on a grid.
double power_fwhm(const FrequencyGrid& grid, const Eigen::VectorXd& power);

/// Reciprocal of the signal photon's bandwidth: the narrower of the signal
/// filter and the idler filter broadened by the pump autoconvolution width.
double hom_dip_width_estimate(const FilterProfile& signal_filter, const FilterProfile& idler_filter,
                              const PumpPulse& pump);

} // namespace smf

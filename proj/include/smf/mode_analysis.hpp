#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "smf/common.hpp"
#include "smf/frequency_grid.hpp"

namespace smf {

enum class ProfileKind { rectangular, gaussian, tabulated };

/// One measured filter stage: power transmission in dB versus angular frequency.
struct TransmissionTable {
    std::vector<double> omega;   // ascending, rad/s
    std::vector<double> loss_db; // transmission in dB (<= 0 for passive stages)
    std::string source;
};

/// Parses "wavelength_nm transmission_dB" rows; '#' starts a comment.
TransmissionTable parse_transmission_table(const std::string& text, const std::string& source = "<text>");
TransmissionTable load_transmission_table(const std::filesystem::path& path);

struct FilterSpec {
    ProfileKind kind = ProfileKind::rectangular;
    double width = 0.0;                    // angular: bandwidth (rect) or power FWHM (gaussian)
    double center_offset = 0.0;            // shift of the passband from the grid center, rad/s
    std::vector<TransmissionTable> stages; // tabulated kind: stages multiply
    bool absolute = false;                 // tabulated kind: keep absolute transmission
};

struct FilterProfile {
    FrequencyGrid grid;
    VectorXc amplitude;
    ProfileKind kind = ProfileKind::rectangular;
    double width = 0.0;

    Eigen::VectorXd power() const { return amplitude.cwiseAbs2(); }
};

FilterProfile make_profile(const FilterSpec& spec, const FrequencyGrid& grid);

/// Gate amplitude f(t). Gaussian width is the FWHM of |f|^2.
struct GateProfile {
    ProfileKind kind = ProfileKind::rectangular;
    double duration = 0.0;          // seconds
    std::vector<double> times;      // tabulated kind, ascending
    std::vector<double> amplitudes; // tabulated kind, |f| <= 1

    static GateProfile rectangular(double duration);
    static GateProfile gaussian(double fwhm);
    static GateProfile tabulated(std::vector<double> times, std::vector<double> amplitudes);

    /// F(delta) = integral |f(t)|^2 exp(i delta t) dt.
    cplx transform(double delta) const;
    /// integral |f|^2 dt.
    double energy() const;
};

struct KernelMatrix {
    FrequencyGrid grid;
    MatrixXc entries; // seconds
};

KernelMatrix build_kernel(const FilterProfile& filter, const GateProfile& gate);

struct ModeBasis {
    FrequencyGrid grid;
    Eigen::VectorXd eigenvalues; // descending
    MatrixXc eigenmodes;         // column j holds phi_j(omega_m); sum |phi|^2 d omega = 2 pi

    std::size_t size() const { return static_cast<std::size_t>(eigenvalues.size()); }

    /// Unit-norm vector u_j = phi_j sqrt(d omega / 2 pi); the mode operator is sum_m u_j[m] a_m.
    VectorXc discrete_mode(std::size_t j) const;

    /// Leading modes with eigenvalue >= cutoff, at most max_modes of them.
    ModeBasis truncated(double cutoff, std::size_t max_modes) const;
};

inline constexpr double retention_cutoff = 1e-3;
inline constexpr double eigenvalue_floor = 1e-12;

ModeBasis schmidt_decompose(const KernelMatrix& kernel);

/// c = B T / 4.
double effective_c(double bandwidth, double duration);

struct EigenvalueRow {
    double c = 0.0;
    std::vector<double> chi;
};

/// Rectangular filter and gate with T = 1 s and B = 4c.
std::vector<EigenvalueRow> eigenvalue_curve(const std::vector<double>& c_values, std::size_t n_modes,
                                            std::size_t n_points = 513);

/// Basis for the rect-rect problem at a given c, on the default band-aligned grid.
ModeBasis rect_rect_basis(double c, std::size_t n_points = 513);

} // namespace smf

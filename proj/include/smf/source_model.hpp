#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "smf/common.hpp"
#include "smf/frequency_grid.hpp"
#include "smf/mode_analysis.hpp"

namespace smf {

enum class PumpShape { cw_carved_rect, gaussian, tabulated };

struct PumpSpec {
    PumpShape shape = PumpShape::cw_carved_rect;
    double duration = 0.0;             // cw_carved_rect: rectangle length, s
    double fwhm = 0.0;                 // gaussian: power FWHM, rad/s
    std::vector<double> offsets;       // tabulated: detuning from pump center, rad/s, ascending
    std::vector<double> magnitudes;    // tabulated: relative spectral amplitude
};

/// Pump spectral amplitude on a grid of offsets from the pump center.
/// Normalized so that 2 pi sum |A|^2 d omega equals the pulse energy.
struct PumpPulse {
    FrequencyGrid grid;
    VectorXc amplitude; // sqrt(J s)
    PumpShape shape = PumpShape::cw_carved_rect;
    double energy = 0.0;

    PumpPulse scaled_to(double new_energy) const;
};

/// Half-width (rad/s) of the pump grid: 99.9% of the energy for the rect
/// pump, 6 sigma of the power spectrum for the Gaussian one.
double pump_required_half_width(const PumpSpec& spec);

PumpPulse pump_spectrum(const PumpSpec& spec, double energy, const FrequencyGrid& grid);

/// Raman gain g versus |detuning|, 1/(W m); the file lists THz and 1/(W km).
class RamanGain {
public:
    RamanGain() = default;
    RamanGain(std::vector<double> detuning, std::vector<double> gain, std::string source = "<table>");

    static RamanGain from_text(const std::string& text, const std::string& source = "<text>");
    static RamanGain from_file(const std::filesystem::path& path);
    static RamanGain zero();

    /// Linear interpolation in |nu|; zero outside the table (raman_moments warns).
    double at(double nu) const;
    bool covers(double nu_min_abs, double nu_max_abs) const;
    bool is_zero() const;
    RamanGain scaled(double factor) const;

    const std::vector<double>& detuning() const { return detuning_; }
    const std::vector<double>& gain() const { return gain_; }

private:
    std::vector<double> detuning_; // rad/s, ascending, >= 0
    std::vector<double> gain_;     // 1/(W m)
    std::string source_;
};

std::filesystem::path default_raman_gain_file();

struct SourceParams {
    double gamma = 0.0;       // 1/(W m)
    double length = 0.0;      // m
    double temperature = 0.0; // K
    RamanGain raman_gain;
    double pump_center = 0.0;
    double signal_center = 0.0; // Stokes band
    double idler_center = 0.0;  // anti-Stokes band

    void validate() const;
};

enum class Band { stokes, antistokes };
enum class Spool { right, left };

/// Bose-Einstein occupation plus the spontaneous term for negative detuning.
double thermal_occupation(double detuning, double temperature);

/// JSA[m, n] = i gammaL Phi(omega_s,m + omega_a,n), Phi the pump autoconvolution.
/// The discrete Bogoliubov coefficient is JSA * d omega.
/// Grids carry absolute centers; the pump grid is centered on the pump.
MatrixXc fwm_joint_amplitude(const PumpPulse& pump, double gamma_l, const FrequencyGrid& grid_s,
                             const FrequencyGrid& grid_a);

/// Discrete Raman occupation matrix <a_m^dag a_n> (d omega / 2 pi normalization).
MatrixXc raman_moments(const PumpPulse& pump, const SourceParams& params, const FrequencyGrid& grid, Band band);

enum class AlphaTreatment { exact, second_order };

/// Output signal operators a_s = alpha b_s + D b_a^dag over discrete modes.
struct BogoliubovMap {
    MatrixXc alpha;
    MatrixXc coupling; // D = JSA * d omega
};

BogoliubovMap bogoliubov_map(const MatrixXc& coupling, AlphaTreatment treatment = AlphaTreatment::exact);

/// Norm of [a, a^dag] - I for the signal outputs of a map.
double commutator_residual(const BogoliubovMap& map);

struct SpoolMoments {
    MatrixXc fwm_stokes;       // <a_s^dag a_s> from pair emission
    MatrixXc fwm_antistokes;
    MatrixXc raman_stokes;
    MatrixXc raman_antistokes;
    MatrixXc anomalous;        // <a_s a_a>, stokes rows by antistokes columns

    MatrixXc normal_stokes() const { return fwm_stokes + raman_stokes; }
    MatrixXc normal_antistokes() const { return fwm_antistokes + raman_antistokes; }

    static SpoolMoments vacuum(Eigen::Index n_stokes, Eigen::Index n_antistokes);
};

struct Register {
    Spool spool;
    Band band;
    FrequencyGrid grid;
};

/// Second moments of both spools; cross-spool and same-band anomalous blocks vanish.
struct GaussianMoments {
    FrequencyGrid stokes_grid;
    FrequencyGrid antistokes_grid;
    std::array<SpoolMoments, 2> spools; // indexed by Spool

    const SpoolMoments& spool(Spool s) const { return spools[static_cast<std::size_t>(s)]; }
    SpoolMoments& spool(Spool s) { return spools[static_cast<std::size_t>(s)]; }

    std::vector<Register> registers() const;
    /// Full N and M over registers in registers() order.
    MatrixXc full_normal() const;
    MatrixXc full_anomalous() const;
};

/// Smallest eigenvalue of [[I + N^T, M], [M^*, N]].
double physicality_margin(const MatrixXc& normal, const MatrixXc& anomalous);

/// Largest single-mode pair occupation allowed by the perturbative model.
inline constexpr double max_pair_probability = 0.2;

GaussianMoments source_moments(const PumpPulse& pump, const SourceParams& params, const FrequencyGrid& grid_s,
                               const FrequencyGrid& grid_a);

/// Mean pair-emission photon number in the filtered Stokes band (right spool).
double pair_production_probability(const GaussianMoments& moments, const FilterProfile& band_filter);

/// Same quantity straight from the pump, without building the full moments.
double pair_probability_for_gain(const PumpPulse& pump, double gamma_l, const FrequencyGrid& grid_s,
                                 const FrequencyGrid& grid_a, const FilterProfile& band_filter);

/// gammaL at which the filtered pair probability reaches target (bisection, 1e-6 relative).
double calibrate_gain(double target, const PumpPulse& pump, const FrequencyGrid& grid_s, const FrequencyGrid& grid_a,
                      const FilterProfile& band_filter);

} // namespace smf

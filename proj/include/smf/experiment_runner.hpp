#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "smf/common.hpp"
#include "smf/detection_engine.hpp"
#include "smf/mode_analysis.hpp"
#include "smf/optical_network.hpp"
#include "smf/source_model.hpp"

namespace smf {

enum class EfficiencyModel { transmission, transmission_times_qe };

struct Scenario {
    std::string label = "custom";
    std::size_t grid_points = 513;

    PumpSpec pump;
    double pump_center = 0.0; // rad/s
    double detuning = 0.0;    // rad/s, idler minus pump

    double gamma = 0.0;       // 1/(W m)
    double length = 0.0;      // m
    double temperature = 0.0; // K
    std::filesystem::path raman_gain_file;
    double raman_gain_scale = 1.0;
    double pair_probability = 0.0;

    FilterSpec signal_filter;
    FilterSpec idler_filter;
    GateProfile gate;

    EfficiencyModel efficiency_model = EfficiencyModel::transmission;
    double quantum_efficiency = 1.0;
    std::array<double, 4> transmission{}; // A, B, C, D
    std::array<double, 4> dark_mean{};
    double mode_cutoff = retention_cutoff;
    std::size_t max_modes_per_arm = 12;

    double pulses = 0.0;
    std::vector<double> taus; // seconds; empty means automatic
    std::size_t auto_tau_points = 41;
    double auto_tau_half_range = 3.0; // in dip widths

    double efficiency(Detector d) const;
    void validate() const;
};

/// Preset names: "multimode", "single_mode".
nlohmann::json preset_config(const std::string& name);
std::vector<std::string> preset_names();

/// Apply "a.b.c=value" overrides; the value is parsed as JSON when possible.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Builds a scenario from a JSON config. A "preset" key selects a base that
/// the remaining keys patch. Relative file paths resolve against base_dir.
Scenario scenario_from_json(const nlohmann::json& config, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::string& config_text, const std::filesystem::path& base_dir = {});
Scenario load_preset(const std::string& name);

/// Everything that does not depend on the delay.
struct PreparedScenario {
    Scenario scenario;
    FrequencyGrid signal_grid;
    FrequencyGrid idler_grid;
    FilterProfile signal_filter;
    FilterProfile idler_filter;
    PumpPulse pump;          // at the calibrated pulse energy
    double pulse_energy = 0.0;
    SourceParams source;
    GaussianMoments moments;
    ArmBases bases;
    DetectorArray detectors;
    double dip_width = 0.0;  // seconds
    std::vector<double> taus;
};

struct PumpCalibration {
    double gamma_l_at_reference = 0.0; // gammaL reaching the target at the reference energy
    double reference_energy = 0.0;     // J
    double pulse_energy = 0.0;         // J, at the physical gamma and length
};

PumpCalibration calibrate_pump_energy(const Scenario& s, const FrequencyGrid& signal_grid,
                                      const FrequencyGrid& idler_grid, const FilterProfile& signal_filter);

PreparedScenario prepare_scenario(const Scenario& scenario);

struct ScanRow {
    double tau = 0.0; // seconds
    double p4 = 0.0;
    double p2_ab = 0.0;
    double p2_acc = 0.0;
    std::array<double, 4> singles{};
};

struct DelayScan {
    std::string label;
    std::vector<ScanRow> rows;
};

ScanRow scan_row(const PreparedScenario& prepared, double tau);
DelayScan run_delay_scan(const PreparedScenario& prepared, unsigned threads = 0);
DelayScan run_delay_scan(const Scenario& scenario, unsigned threads = 0);

inline constexpr const char* scan_csv_header = "tau_ps, p4, p2_ab, p2_acc, pA, pB, pC, pD";
void write_scan_csv(std::ostream& out, const DelayScan& scan);
DelayScan read_scan_csv(std::istream& in);

enum class Observable { fourfold, twofold_accsub };

struct VisibilityFit {
    double visibility = 0.0;
    double visibility_err = 0.0;
    double tau0 = 0.0;  // s
    double sigma = 0.0; // s
    double baseline = 0.0;
    Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero(); // (baseline, V, tau0 [ps], sigma [ps])
    bool degenerate = false;
};

/// Least-squares fit of C(tau) = C_base [1 - V exp(-(tau - tau0)^2 / (2 sigma^2))].
/// With errors given, residuals are weighted and the covariance is absolute;
/// otherwise it is scaled by the residual variance.
VisibilityFit fit_visibility(const std::vector<double>& taus, const std::vector<double>& values,
                             const std::vector<double>& errors = {});
VisibilityFit fit_visibility(const DelayScan& scan, Observable observable);

void write_fit(std::ostream& out, const VisibilityFit& fit);

struct CountRow {
    double tau = 0.0;
    std::array<double, 7> counts{}; // p4, p2_ab, p2_acc, pA, pB, pC, pD
    std::array<double, 7> errors{};
};

/// counts = p * pulses; error = sqrt(counts), or 1 for zero counts.
std::vector<CountRow> expected_counts(const DelayScan& scan, double pulses);

} // namespace smf

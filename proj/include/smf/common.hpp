#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace smf {

using cplx = std::complex<double>;
using VectorXc = Eigen::VectorXcd;
using MatrixXc = Eigen::MatrixXcd;

namespace constants {
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;
inline constexpr double c_light = 299792458.0;      // m/s
inline constexpr double hbar = 1.054571817e-34;     // J s
inline constexpr double k_boltzmann = 1.380649e-23; // J/K
} // namespace constants

/// Bad or inconsistent input (maps to CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed or produced a non-physical result (exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be read or written (exit code 4).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Warnings go through a replaceable sink; default writes to stderr.
using WarningSink = std::function<void(const std::string&)>;
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

inline double ghz_to_angular(double ghz) { return constants::two_pi * ghz * 1e9; }
inline double thz_to_angular(double thz) { return constants::two_pi * thz * 1e12; }
inline double angular_to_ghz(double w) { return w / (constants::two_pi * 1e9); }
inline double wavelength_nm_to_angular(double nm) {
    return constants::two_pi * constants::c_light / (nm * 1e-9);
}

} // namespace smf

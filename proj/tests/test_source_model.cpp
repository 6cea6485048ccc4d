#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "smf/source_model.hpp"

using namespace smf;

namespace {

constexpr double pump_center = 2.0 * M_PI * 228.85e12; // ~1310 nm
constexpr double detuning = 2.0 * M_PI * 1.2e12;

struct Bands {
    FrequencyGrid pump;
    FrequencyGrid stokes;
    FrequencyGrid antistokes;
};

Bands make_bands(double spacing, std::size_t n_band, std::size_t n_pump) {
    return {FrequencyGrid::with_spacing(pump_center, spacing, n_pump),
            FrequencyGrid::with_spacing(pump_center - detuning, spacing, n_band),
            FrequencyGrid::with_spacing(pump_center + detuning, spacing, n_band)};
}

PumpSpec gaussian_pump(double fwhm) {
    PumpSpec p;
    p.shape = PumpShape::gaussian;
    p.fwhm = fwhm;
    return p;
}

SourceParams params_with(const RamanGain& g) {
    SourceParams p;
    p.gamma = 1.9e-3;
    p.length = 1000.0;
    p.temperature = 77.0;
    p.raman_gain = g;
    p.pump_center = pump_center;
    p.signal_center = pump_center - detuning;
    p.idler_center = pump_center + detuning;
    return p;
}

RamanGain flat_gain(double g_per_w_km) {
    return RamanGain::from_text("0 " + std::to_string(g_per_w_km) + "\n40 " + std::to_string(g_per_w_km) + "\n");
}

} // namespace

TEST_CASE("pump spectrum is normalized to the pulse energy") {
    const double fwhm = 2.0 * M_PI * 68.3e9;
    const auto grid = FrequencyGrid::with_spacing(pump_center, 2e9, 801);
    const auto pump = pump_spectrum(gaussian_pump(fwhm), 3e-12, grid);
    CHECK(2.0 * M_PI * pump.amplitude.squaredNorm() * grid.spacing() == doctest::Approx(3e-12).epsilon(1e-12));
    CHECK(pump.scaled_to(6e-12).amplitude.squaredNorm() ==
          doctest::Approx(2.0 * pump.amplitude.squaredNorm()).epsilon(1e-12));
    // Too narrow a grid loses more than 0.1% of the energy.
    CHECK_THROWS_AS(pump_spectrum(gaussian_pump(fwhm), 1e-12, FrequencyGrid::with_spacing(pump_center, 2e9, 101)),
                    ConfigError);
}

TEST_CASE("rect-carved pump spectrum follows T sinc(xT/2)") {
    PumpSpec spec;
    spec.shape = PumpShape::cw_carved_rect;
    spec.duration = 100e-12;
    const double half = pump_required_half_width(spec);
    const double dw = 2.0 * M_PI * 0.5e9;
    const auto n = static_cast<std::size_t>(2 * std::ceil(1.02 * half / dw) + 1);
    const auto grid = FrequencyGrid::with_spacing(pump_center, dw, n);
    const auto pump = pump_spectrum(spec, 1e-12, grid);
    const auto c = static_cast<Eigen::Index>((n - 1) / 2);
    const double x = 7.0 * dw;
    const double ratio = std::abs(pump.amplitude[c + 7] / pump.amplitude[c]);
    CHECK(ratio == doctest::Approx(std::abs(std::sin(x * 50e-12) / (x * 50e-12))).epsilon(1e-12));
}

TEST_CASE("joint amplitude equals i gammaL times the analytic Gaussian autoconvolution") {
    // A = C exp(-x^2 / 4 s^2) normalized to E gives Phi(Omega) = E/(2 pi) exp(-Omega^2 / 8 s^2).
    const double fwhm = 2.0 * M_PI * 68.3e9;
    const double sigma = fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const double energy = 2e-12;
    const double dw = 2.0 * M_PI * 1.5e9;
    const auto half = static_cast<std::size_t>(std::ceil(1.02 * pump_required_half_width(gaussian_pump(fwhm)) / dw));
    const auto bands = make_bands(dw, 101, 2 * half + 1);
    const auto pump = pump_spectrum(gaussian_pump(fwhm), energy, bands.pump);
    const double gamma_l = 1.9;
    const auto jsa = fwm_joint_amplitude(pump, gamma_l, bands.stokes, bands.antistokes);
    double worst = 0.0;
    for (Eigen::Index m = 0; m < jsa.rows(); m += 7)
        for (Eigen::Index n = 0; n < jsa.cols(); n += 5) {
            const double omega = bands.stokes.offset(static_cast<std::size_t>(m)) +
                                 bands.antistokes.offset(static_cast<std::size_t>(n));
            const cplx expect(0.0, gamma_l * energy / (2.0 * M_PI) *
                                       std::exp(-omega * omega / (8.0 * sigma * sigma)));
            worst = std::max(worst, std::abs(jsa(m, n) - expect));
        }
    // Residual comes from cutting the pump grid at 6 sigma.
    CHECK(worst < 1e-4 * gamma_l * energy / (2.0 * M_PI));
    CHECK(fwm_joint_amplitude(pump, 0.0, bands.stokes, bands.antistokes).norm() == 0.0);
}

TEST_CASE("joint amplitude handles half-integer grid offsets") {
    // Even point counts put samples at half-integer offsets from the centers.
    const double fwhm = 2.0 * M_PI * 68.3e9;
    const double sigma = fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const double dw = 2.0 * M_PI * 1.5e9;
    const auto half = static_cast<std::size_t>(std::ceil(1.02 * pump_required_half_width(gaussian_pump(fwhm)) / dw));
    const auto bands = make_bands(dw, 100, 2 * half + 1);
    const auto pump = pump_spectrum(gaussian_pump(fwhm), 1e-12, bands.pump);
    const auto jsa = fwm_joint_amplitude(pump, 1.0, bands.stokes, bands.antistokes);
    for (Eigen::Index m : {0, 33, 99}) {
        const double omega = bands.stokes.offset(static_cast<std::size_t>(m)) + bands.antistokes.offset(50);
        CHECK(jsa(m, 50).imag() ==
              doctest::Approx(1e-12 / (2.0 * M_PI) * std::exp(-omega * omega / (8.0 * sigma * sigma))).epsilon(1e-9));
    }
    const auto off = FrequencyGrid::with_spacing(pump_center + detuning + 3.0 * dw, dw, 100);
    CHECK_THROWS_AS(fwm_joint_amplitude(pump, 1.0, bands.stokes, off), ConfigError);
}

TEST_CASE("Bogoliubov map on a 3-mode coupling: exact and perturbative alpha") {
    MatrixXc d(3, 3);
    d << cplx(0.1, 0.02), cplx(0.03, 0.0), cplx(0.0, -0.01), cplx(0.02, 0.01), cplx(0.08, 0.0), cplx(0.01, 0.0),
        cplx(0.0, 0.0), cplx(-0.01, 0.02), cplx(0.05, -0.01);
    const auto exact = bogoliubov_map(d, AlphaTreatment::exact);
    CHECK(commutator_residual(exact) < 1e-14);
    // alpha^2 = I + D D^dag with alpha Hermitian positive.
    const MatrixXc ddag = d * d.adjoint();
    CHECK((exact.alpha * exact.alpha - MatrixXc::Identity(3, 3) - ddag).norm() < 1e-14);
    CHECK((exact.alpha - exact.alpha.adjoint()).norm() < 1e-15);
    // Series sqrt(I + X) = I + X/2 - X^2/8 + ...
    const MatrixXc series = MatrixXc::Identity(3, 3) + 0.5 * ddag - 0.125 * ddag * ddag;
    CHECK((exact.alpha - series).norm() < std::pow(ddag.norm(), 3) / 8.0);

    // With alpha = I + X/2 the commutator misses X^2/4, fourth order in D.
    const double r1 = commutator_residual(bogoliubov_map(d, AlphaTreatment::second_order));
    const double r2 = commutator_residual(bogoliubov_map(0.5 * d, AlphaTreatment::second_order));
    CHECK(r1 == doctest::Approx((0.25 * ddag * ddag).norm()).epsilon(1e-9));
    CHECK(r1 / r2 == doctest::Approx(16.0).epsilon(1e-6));
}

TEST_CASE("thermal occupation and its spontaneous term") {
    const double nu = 2.0 * M_PI * 1.2e12;
    const double x = constants::hbar * nu / (constants::k_boltzmann * 77.0);
    CHECK(thermal_occupation(nu, 77.0) == doctest::Approx(1.0 / (std::exp(x) - 1.0)).epsilon(1e-12));
    CHECK(thermal_occupation(-nu, 77.0) == doctest::Approx(1.0 / (std::exp(x) - 1.0) + 1.0).epsilon(1e-12));
    CHECK(thermal_occupation(2.0 * M_PI * 30e12, 77.0) < 1e-7);
}

TEST_CASE("Raman gain table: units, interpolation and coverage") {
    const auto g = RamanGain::from_text("# THz  1/(W km)\n0 0\n1 0.1\n2 0.3\n");
    CHECK(g.at(2.0 * M_PI * 0.5e12) == doctest::Approx(0.05e-3));
    CHECK(g.at(-2.0 * M_PI * 1.5e12) == doctest::Approx(0.2e-3));
    CHECK(g.covers(0.0, 2.0 * M_PI * 2e12));
    CHECK_FALSE(g.covers(0.0, 2.0 * M_PI * 3e12));
    CHECK(g.at(2.0 * M_PI * 5e12) == 0.0);
    CHECK(RamanGain::zero().is_zero());
    CHECK(g.scaled(2.0).at(2.0 * M_PI * 1e12) == doctest::Approx(0.2e-3));
    CHECK_THROWS_AS(RamanGain::from_text("0 1\n0 2\n"), ConfigError);
    CHECK_THROWS_AS(RamanGain::from_text("0 -1\n1 2\n"), ConfigError);
    CHECK_THROWS_AS(RamanGain::from_file("/nonexistent/raman.dat"), IoError);
}

TEST_CASE("bundled Raman file loads and peaks near 13 THz") {
    const auto g = RamanGain::from_file(default_raman_gain_file());
    CHECK(g.at(2.0 * M_PI * 13e12) == doctest::Approx(1.15e-3).epsilon(1e-6));
    CHECK(g.at(2.0 * M_PI * 1.2e12) > 0.0);
    CHECK(g.at(2.0 * M_PI * 1.2e12) < 0.2 * g.at(2.0 * M_PI * 13e12));
}

TEST_CASE("Raman moments against a direct double sum") {
    const double fwhm = 2.0 * M_PI * 68.3e9;
    const double dw = 2.0 * M_PI * 2e9;
    const auto half = static_cast<std::size_t>(std::ceil(1.02 * pump_required_half_width(gaussian_pump(fwhm)) / dw));
    const auto bands = make_bands(dw, 41, 2 * half + 1);
    const auto pump = pump_spectrum(gaussian_pump(fwhm), 1e-12, bands.pump);
    const auto params = params_with(RamanGain::from_file(default_raman_gain_file()));
    const auto n = raman_moments(pump, params, bands.stokes, Band::stokes);
    // <a_m^dag a_m> = sum_k |A_k|^2 L g(nu) n_T(nu) dw^2, nu = omega_m - omega_k.
    for (std::size_t m : {0u, 20u, 40u}) {
        double direct = 0.0;
        for (std::size_t k = 0; k < bands.pump.size(); ++k) {
            const double nu = bands.stokes.point(m) - bands.pump.point(k);
            direct += std::norm(pump.amplitude[static_cast<Eigen::Index>(k)]) * params.length *
                      params.raman_gain.at(nu) * thermal_occupation(nu, params.temperature) * dw * dw;
        }
        CHECK(n(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)).real() ==
              doctest::Approx(direct).epsilon(1e-10));
    }
    // Positive semidefinite, and the anti-Stokes band is weaker by n/(n+1).
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(n);
    CHECK(es.eigenvalues().minCoeff() > -1e-12 * es.eigenvalues().maxCoeff());
    const auto na = raman_moments(pump, params, bands.antistokes, Band::antistokes);
    const double ratio = na(20, 20).real() / n(20, 20).real();
    const double nt = thermal_occupation(detuning, 77.0);
    CHECK(ratio == doctest::Approx(nt / (nt + 1.0)).epsilon(0.02));
    CHECK_THROWS_AS(raman_moments(pump, params, bands.stokes, Band::antistokes), ConfigError);
}

TEST_CASE("Raman moments vanish for zero gain and require table coverage") {
    const double fwhm = 2.0 * M_PI * 68.3e9;
    const double dw = 2.0 * M_PI * 2e9;
    const auto half = static_cast<std::size_t>(std::ceil(1.02 * pump_required_half_width(gaussian_pump(fwhm)) / dw));
    const auto bands = make_bands(dw, 41, 2 * half + 1);
    const auto pump = pump_spectrum(gaussian_pump(fwhm), 1e-12, bands.pump);
    CHECK(raman_moments(pump, params_with(RamanGain::zero()), bands.stokes, Band::stokes).norm() == 0.0);
    const auto short_table = RamanGain::from_text("0 1\n0.5 1\n");
    CHECK_THROWS_AS(raman_moments(pump, params_with(short_table), bands.stokes, Band::stokes), ConfigError);
    // Covering the band but not the pump tails: those detunings count as zero, with one warning.
    std::vector<std::string> warnings;
    set_warning_sink([&](const std::string& w) { warnings.push_back(w); });
    const auto band_only = RamanGain::from_text("1.1 1\n1.3 1\n");
    CHECK(raman_moments(pump, params_with(band_only), bands.stokes, Band::stokes).trace().real() > 0.0);
    set_warning_sink(nullptr);
    CHECK(warnings.size() == 1);
}

TEST_CASE("source moments are physical and carry the pair correlations") {
    const double fwhm = 2.0 * M_PI * 68.3e9;
    const double dw = 2.0 * M_PI * 3e9;
    const auto half = static_cast<std::size_t>(std::ceil(1.02 * pump_required_half_width(gaussian_pump(fwhm)) / dw));
    const auto bands = make_bands(dw, 61, 2 * half + 1);
    const auto pump = pump_spectrum(gaussian_pump(fwhm), 1e-12, bands.pump);
    const auto params = params_with(flat_gain(0.2));
    const auto mom = source_moments(pump, params, bands.stokes, bands.antistokes);
    CHECK(physicality_margin(mom.full_normal(), mom.full_anomalous()) > -1e-12);
    const auto& s = mom.spool(Spool::right);
    // Pair emission fills both bands equally.
    CHECK(s.fwm_stokes.trace().real() == doctest::Approx(s.fwm_antistokes.trace().real()).epsilon(1e-10));
    CHECK(mom.spool(Spool::left).anomalous.isApprox(s.anomalous));
    CHECK(mom.registers().size() == 4);
    CHECK(mom.full_normal().rows() == 4 * 61);
}

TEST_CASE("gain guard rejects non-perturbative pumping") {
    const double fwhm = 2.0 * M_PI * 68.3e9;
    const double dw = 2.0 * M_PI * 3e9;
    const auto half = static_cast<std::size_t>(std::ceil(1.02 * pump_required_half_width(gaussian_pump(fwhm)) / dw));
    const auto bands = make_bands(dw, 61, 2 * half + 1);
    const auto pump = pump_spectrum(gaussian_pump(fwhm), 5e-9, bands.pump);
    CHECK_THROWS_AS(source_moments(pump, params_with(RamanGain::zero()), bands.stokes, bands.antistokes), ConfigError);
}

TEST_CASE("pair probability scales with (gamma L)^2 and calibration inverts it") {
    const double fwhm = 2.0 * M_PI * 68.3e9;
    const double dw = 2.0 * M_PI * 3e9;
    const auto half = static_cast<std::size_t>(std::ceil(1.02 * pump_required_half_width(gaussian_pump(fwhm)) / dw));
    const auto bands = make_bands(dw, 61, 2 * half + 1);
    const auto pump = pump_spectrum(gaussian_pump(fwhm), 1e-12, bands.pump);
    const auto filter = make_profile({ProfileKind::rectangular, 2.0 * M_PI * 69e9}, bands.stokes);
    const double p1 = pair_probability_for_gain(pump, 1.0, bands.stokes, bands.antistokes, filter);
    const double p2 = pair_probability_for_gain(pump, 2.0, bands.stokes, bands.antistokes, filter);
    CHECK(p2 / p1 == doctest::Approx(4.0).epsilon(1e-12));
    const double g = calibrate_gain(0.039, pump, bands.stokes, bands.antistokes, filter);
    CHECK(pair_probability_for_gain(pump, g, bands.stokes, bands.antistokes, filter) ==
          doctest::Approx(0.039).epsilon(1e-6));
    // Same number from the full moments at that gain.
    auto params = params_with(RamanGain::zero());
    params.gamma = g / params.length;
    const auto mom = source_moments(pump, params, bands.stokes, bands.antistokes);
    CHECK(pair_production_probability(mom, filter) == doctest::Approx(0.039).epsilon(1e-6));
    CHECK_THROWS_AS(calibrate_gain(0.5, pump, bands.stokes, bands.antistokes, filter), ConfigError);
}

TEST_CASE("source parameter validation") {
    auto p = params_with(RamanGain::zero());
    p.temperature = -1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = params_with(RamanGain::zero());
    p.length = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

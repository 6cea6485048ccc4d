#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "smf/experiment_runner.hpp"

using namespace smf;
using nlohmann::json;

namespace {

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i)
        v.push_back(a + (b - a) * i / (n - 1));
    return v;
}

double dip(double t, double base, double v, double t0, double sigma) {
    return base * (1.0 - v * std::exp(-(t - t0) * (t - t0) / (2.0 * sigma * sigma)));
}

// Multimode preset on a coarse grid and a short delay list: same physics, test-sized.
Scenario reduced_multimode() {
    auto s = load_preset("multimode");
    s.grid_points = 129;
    s.auto_tau_points = 21;
    return s;
}

double fitted_v(const Scenario& s) { return fit_visibility(run_delay_scan(s), Observable::fourfold).visibility; }

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("expected counts and the zero-count convention") {
    DelayScan scan;
    ScanRow r;
    r.p4 = 1e-9;
    scan.rows.push_back(r);
    const auto c = expected_counts(scan, 2e10);
    CHECK(c[0].counts[0] == doctest::Approx(20.0));
    CHECK(c[0].errors[0] == doctest::Approx(4.4721).epsilon(1e-4));
    CHECK(c[0].counts[1] == 0.0);
    CHECK(c[0].errors[1] == 1.0);
    CHECK_THROWS_AS(expected_counts(scan, 0.0), ConfigError);
}

TEST_CASE("fit of a perfect dip to zero gives V = 1") {
    const auto t = linspace(-60e-12, 60e-12, 41);
    std::vector<double> y;
    for (double x : t)
        y.push_back(dip(x, 2e-8, 1.0, 3e-12, 9e-12));
    const auto f = fit_visibility(t, y);
    CHECK(f.visibility == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(f.tau0 == doctest::Approx(3e-12).epsilon(1e-6));
    CHECK(f.sigma == doctest::Approx(9e-12).epsilon(1e-6));
    CHECK(f.baseline == doctest::Approx(2e-8).epsilon(1e-8));
    CHECK_FALSE(f.degenerate);
}

TEST_CASE("constant data pin V to 0") {
    const auto t = linspace(-60e-12, 60e-12, 11);
    const std::vector<double> y(11, 5e-9);
    const auto f = fit_visibility(t, y);
    CHECK(f.degenerate);
    CHECK(f.visibility == 0.0);
    CHECK(f.baseline == doctest::Approx(5e-9));
}

TEST_CASE("Monte-Carlo: Poisson-noisy dips recover V = 0.5 with honest errors") {
    std::mt19937_64 rng(12345);
    const auto t = linspace(-80e-12, 80e-12, 41);
    int inside = 0;
    double pull_sum = 0.0;
    double pull_sq = 0.0;
    const int trials = 200;
    for (int k = 0; k < trials; ++k) {
        std::vector<double> y;
        std::vector<double> e;
        for (double x : t) {
            std::poisson_distribution<long> pois(dip(x, 400.0, 0.5, 0.0, 12e-12));
            const double c = static_cast<double>(pois(rng));
            y.push_back(c);
            e.push_back(c > 0 ? std::sqrt(c) : 1.0);
        }
        const auto f = fit_visibility(t, y, e);
        const double pull = (f.visibility - 0.5) / f.visibility_err;
        pull_sum += pull;
        pull_sq += pull * pull;
        if (std::abs(pull) < 2.0)
            ++inside;
    }
    const double mean = pull_sum / trials;
    const double sd = std::sqrt(pull_sq / trials - mean * mean);
    CHECK(inside >= static_cast<int>(0.9 * trials));
    CHECK(std::abs(mean) < 0.25);
    CHECK(sd == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("fit rejects unfittable input") {
    CHECK_THROWS_AS(fit_visibility({0.0}, {1e-8}), ConfigError);
    CHECK_THROWS_AS(fit_visibility(linspace(0, 1e-12, 4), {1, 2, 3, 4}), ConfigError);
    // Range far too narrow for the dip it shows.
    const auto t = linspace(-2e-12, 2e-12, 9);
    std::vector<double> y;
    for (double x : t)
        y.push_back(dip(x, 1.0, 0.5, 0.0, 50e-12) + 0.01 * x / 2e-12);
    CHECK_THROWS(fit_visibility(t, y));
    CHECK_THROWS_AS(fit_visibility({0, 1, 2, 3, 4}, {1, 1, 1, 1}), ConfigError);
}

TEST_CASE("scan CSV round trip and errors") {
    DelayScan scan;
    for (int i = 0; i < 3; ++i) {
        ScanRow r;
        r.tau = (i - 1) * 1.5e-12;
        r.p4 = 1.0 / 3.0 * 1e-8;
        r.p2_ab = 0.1 * i;
        r.p2_acc = 1e-300;
        r.singles = {0.1, 0.2, 0.3, 0.4};
        scan.rows.push_back(r);
    }
    std::stringstream ss;
    write_scan_csv(ss, scan);
    CHECK(ss.str().rfind("tau_ps, p4, p2_ab, p2_acc, pA, pB, pC, pD\n", 0) == 0);
    const auto back = read_scan_csv(ss);
    REQUIRE(back.rows.size() == 3);
    CHECK(back.rows[0].tau == doctest::Approx(-1.5e-12).epsilon(1e-15));
    CHECK(back.rows[1].p4 == scan.rows[1].p4);
    CHECK(back.rows[2].p2_acc == 1e-300);
    std::stringstream empty;
    CHECK_THROWS_AS(read_scan_csv(empty), ConfigError);
    std::stringstream header_only("tau_ps, p4, p2_ab, p2_acc, pA, pB, pC, pD\n");
    CHECK_THROWS_AS(read_scan_csv(header_only), ConfigError);
    std::stringstream bad("tau_ps, p4, p2_ab, p2_acc, pA, pB, pC, pD\n1, 2, x, 4, 5, 6, 7, 8\n");
    CHECK_THROWS_AS(read_scan_csv(bad), ConfigError);
}

TEST_CASE("multimode preset parameters") {
    const auto s = load_preset("multimode");
    CHECK(s.label == "multimode");
    CHECK(s.pump.shape == PumpShape::cw_carved_rect);
    CHECK(s.pump.duration == doctest::Approx(100e-12));
    CHECK(s.signal_filter.width == doctest::Approx(2.0 * M_PI * 24.6e9));
    CHECK(s.idler_filter.width == doctest::Approx(2.0 * M_PI * 24.6e9));
    CHECK(s.transmission[0] == doctest::Approx(0.034));
    CHECK(s.transmission[2] == doctest::Approx(0.05));
    CHECK(s.quantum_efficiency == doctest::Approx(0.2));
    CHECK(s.dark_mean[3] == doctest::Approx(1.6e-4));
    CHECK(s.pair_probability == doctest::Approx(0.125));
    CHECK(s.pulses == doctest::Approx(2e10));
}

TEST_CASE("single-mode preset parameters") {
    const auto s = load_preset("single_mode");
    CHECK(s.pump.shape == PumpShape::gaussian);
    CHECK(s.pump.fwhm == doctest::Approx(2.0 * M_PI * 68.3e9));
    // FWHM 68.3 GHz is a 6.4 ps transform-limited pulse.
    CHECK(0.4413 / (s.pump.fwhm / (2.0 * M_PI)) == doctest::Approx(6.46e-12).epsilon(0.01));
    const double nm04 = s.signal_filter.width;
    const double center = s.pump_center - s.detuning;
    CHECK(nm04 == doctest::Approx(center * center * 0.4e-9 / (2.0 * M_PI * constants::c_light)).epsilon(1e-12));
    CHECK(s.transmission[1] == doctest::Approx(0.055));
    CHECK(s.transmission[3] == doctest::Approx(0.07));
    CHECK(s.pair_probability == doctest::Approx(0.039));
    CHECK(s.pulses == doctest::Approx(1e10));
}

TEST_CASE("config errors") {
    SUBCASE("empty config lists missing fields") {
        try {
            load_scenario("");
            FAIL("expected an error");
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("missing config fields") != std::string::npos);
            CHECK(msg.find("pump") != std::string::npos);
            CHECK(msg.find("source") != std::string::npos);
            CHECK(msg.find("detectors") != std::string::npos);
        }
    }
    SUBCASE("inconsistent units") {
        auto c = preset_config("single_mode");
        c["filters"]["signal"]["bandwidth_ghz"] = 70.0;
        CHECK_THROWS_WITH_AS(scenario_from_json(c), doctest::Contains("inconsistent units"), ConfigError);
    }
    SUBCASE("unknown preset and unknown key") {
        CHECK_THROWS_AS(load_preset("quantum"), ConfigError);
        auto c = preset_config("multimode");
        c["source"]["gama_per_w_km"] = 1.0;
        CHECK_THROWS_WITH_AS(scenario_from_json(c), doctest::Contains("gama_per_w_km"), ConfigError);
    }
    SUBCASE("bad JSON") {
        CHECK_THROWS_AS(load_scenario("{ \"pump\": "), ConfigError);
    }
    SUBCASE("out-of-range values") {
        auto c = preset_config("multimode");
        c["source"]["pair_probability"] = 0.5;
        CHECK_THROWS_AS(scenario_from_json(c), ConfigError);
        c = preset_config("multimode");
        c["scan"]["tau_ps"] = {5, 1, 3};
        CHECK_THROWS_AS(scenario_from_json(c), ConfigError);
    }
}

TEST_CASE("overrides apply in order and null deletes") {
    auto c = preset_config("single_mode");
    apply_override(c, "source.pair_probability=0.05");
    apply_override(c, "source.pair_probability=0.06");
    apply_override(c, "filters.signal.bandwidth_nm=null");
    apply_override(c, "filters.signal.bandwidth_ghz=70");
    apply_override(c, "label=\"mine\"");
    const auto s = scenario_from_json(c);
    CHECK(s.pair_probability == doctest::Approx(0.06));
    CHECK(s.signal_filter.width == doctest::Approx(2.0 * M_PI * 70e9));
    CHECK(s.label == "mine");
    CHECK_THROWS_AS(apply_override(c, "novalue"), ConfigError);
}

TEST_CASE("a preset key patches the base preset") {
    const auto s = load_scenario(R"({ "preset": "single_mode", "source": { "raman_gain_scale": 0 } })");
    CHECK(s.raman_gain_scale == 0.0);
    CHECK(s.pair_probability == doctest::Approx(0.039));
}

TEST_CASE("shipped config files match the built-in presets") {
    for (const auto& name : preset_names()) {
        const auto text = read_text(std::string(SMF_SOURCE_DIR) + "/config/" + name + ".json");
        CHECK(json::parse(text) == preset_config(name));
    }
}

TEST_CASE("pump calibration reaches the target pair probability") {
    const auto s = load_preset("single_mode");
    const auto p = prepare_scenario(s);
    CHECK(pair_production_probability(p.moments, p.signal_filter) == doctest::Approx(0.039).epsilon(1e-5));
    CHECK(p.pulse_energy > 0.0);
    CHECK(p.taus.size() == 41);
    CHECK(p.taus.front() == doctest::Approx(-p.taus.back()));
}

TEST_CASE("delay scan invariants on a reduced multimode scenario") {
    const auto s = reduced_multimode();
    const auto prepared = prepare_scenario(s);
    const auto scan = run_delay_scan(prepared, 1);
    REQUIRE(scan.rows.size() == 21);
    for (const auto& r : scan.rows) {
        for (double p : {r.p4, r.p2_ab, r.p2_acc, r.singles[0], r.singles[1], r.singles[2], r.singles[3]}) {
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
        }
    }
    // Even in tau for symmetric profiles.
    for (std::size_t i = 0; i < 10; ++i) {
        const double a = scan.rows[i].p4;
        const double b = scan.rows[20 - i].p4;
        CHECK(std::abs(a - b) <= 1e-8 * std::max(a, b));
    }
    // Far-delay plateau: slope over the last 10% of the range is small.
    const auto& last = scan.rows.back();
    const auto& prev = scan.rows[scan.rows.size() - 3];
    CHECK(std::abs(last.p4 - prev.p4) / last.p4 < 1e-2);

    // Parallel rows land in tau order with identical bits.
    const auto parallel = run_delay_scan(prepared, 3);
    std::stringstream a;
    std::stringstream b;
    write_scan_csv(a, scan);
    write_scan_csv(b, parallel);
    CHECK(a.str() == b.str());

    const auto fit = fit_visibility(scan, Observable::fourfold);
    CHECK(fit.visibility > 0.1);
    CHECK(fit.visibility < 0.3);
    CHECK(fit.sigma > 0.0);
}

TEST_CASE("Raman noise and dark counts degrade the multimode dip") {
    const auto base = reduced_multimode();
    const double v = fitted_v(base);
    auto no_raman = base;
    no_raman.raman_gain_scale = 0.0;
    CHECK(fitted_v(no_raman) > v);
    auto no_dark = base;
    no_dark.dark_mean = {0.0, 0.0, 0.0, 0.0};
    CHECK(fitted_v(no_dark) >= v);
}

TEST_CASE("a single far-delay point cannot be fitted") {
    auto s = reduced_multimode();
    s.taus = {500e-12};
    const auto scan = run_delay_scan(s);
    CHECK(scan.rows.size() == 1);
    CHECK_THROWS_AS(fit_visibility(scan, Observable::fourfold), ConfigError);
}

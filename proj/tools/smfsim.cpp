// smfsim: command-line front end for mode analysis, source calibration,
// delay scans and visibility fits.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "smf/experiment_runner.hpp"
#include "smf/oracle_check.hpp"

namespace {

using smf::ConfigError;
using smf::IoError;
using smf::NumericalError;
using nlohmann::json;

struct ScenarioOptions {
    std::string config;
    std::string preset;
    std::vector<std::string> overrides;
};

void add_scenario_options(CLI::App* cmd, ScenarioOptions& opt) {
    cmd->add_option("-c,--config", opt.config, "scenario config file (JSON)");
    cmd->add_option("-p,--preset", opt.preset, "built-in preset: multimode or single_mode");
    cmd->add_option("-s,--set", opt.overrides, "override key=value (dotted path), applied in order")
        ->allow_extra_args(false);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

smf::Scenario resolve_scenario(const ScenarioOptions& opt) {
    if (opt.config.empty() && opt.preset.empty())
        throw ConfigError("either --config or --preset is required");
    if (!opt.config.empty() && !opt.preset.empty())
        throw ConfigError("--config and --preset are mutually exclusive");
    json config;
    std::filesystem::path base;
    if (!opt.preset.empty()) {
        config = smf::preset_config(opt.preset);
    } else {
        const std::string text = read_file(opt.config);
        try {
            config = text.find_first_not_of(" \t\r\n") == std::string::npos ? json::object()
                                                                             : json::parse(text, nullptr, true, true);
        } catch (const json::parse_error& e) {
            throw ConfigError(opt.config + ": " + e.what());
        }
        base = std::filesystem::path(opt.config).parent_path();
    }
    for (const auto& o : opt.overrides)
        smf::apply_override(config, o);
    return smf::scenario_from_json(config, base);
}

class Output {
public:
    explicit Output(const std::string& path) : path_(path) {
        if (!path.empty()) {
            file_.open(path, std::ios::binary);
            if (!file_)
                throw IoError("cannot write " + path);
        }
    }
    std::ostream& stream() { return path_.empty() ? std::cout : file_; }
    void close() {
        if (path_.empty()) {
            std::cout.flush();
            return;
        }
        file_.close();
        if (!file_)
            throw IoError("failed writing " + path_);
    }

private:
    std::string path_;
    std::ofstream file_;
};

std::vector<double> parse_range(const std::string& spec) {
    std::vector<double> parts;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ':')) {
        try {
            parts.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("bad --c-range '" + spec + "', expected start:stop:step");
        }
    }
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0] || parts[0] < 0.0)
        throw ConfigError("bad --c-range '" + spec + "', expected start:stop:step with step > 0");
    std::vector<double> c;
    const auto n = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
    for (long i = 0; i <= n; ++i)
        c.push_back(parts[0] + static_cast<double>(i) * parts[2]);
    return c;
}

void print_line(std::ostream& out, const std::vector<double>& values) {
    char buf[40];
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.10g", values[i]);
        out << buf << (i + 1 == values.size() ? "\n" : ", ");
    }
}

int run_modes(const std::string& range, std::size_t n_modes, double sample_c, std::size_t points,
              const std::string& output) {
    const auto rows = smf::eigenvalue_curve(parse_range(range), n_modes, points);
    Output out(output);
    auto& os = out.stream();
    os << "c";
    for (std::size_t j = 0; j < n_modes; ++j)
        os << ", chi" << j;
    os << '\n';
    for (const auto& r : rows) {
        std::vector<double> v{r.c};
        v.insert(v.end(), r.chi.begin(), r.chi.end());
        print_line(os, v);
    }
    if (sample_c > 0.0) {
        // Eigenmode samples over the filter band, x = omega offset / (B / 2) in [-1, 1].
        const auto basis = smf::rect_rect_basis(sample_c, points);
        const double half_band = 2.0 * sample_c;
        os << "\n# eigenmodes at c = " << sample_c << "\nx";
        const std::size_t m = std::min<std::size_t>(n_modes, basis.size());
        for (std::size_t j = 0; j < m; ++j)
            os << ", phi" << j;
        os << '\n';
        for (std::size_t i = 0; i < basis.grid.size(); ++i) {
            const double x = basis.grid.offset(i) / half_band;
            if (std::abs(x) > 1.0)
                continue;
            std::vector<double> v{x};
            for (std::size_t j = 0; j < m; ++j)
                v.push_back(basis.eigenmodes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)).real());
            print_line(os, v);
        }
    }
    out.close();
    return 0;
}

int run_calibrate(const ScenarioOptions& opt, const std::string& output) {
    const auto s = resolve_scenario(opt);
    const auto sg = smf::FrequencyGrid::band_aligned(s.pump_center - s.detuning, s.signal_filter.width, s.grid_points);
    const auto ig = smf::FrequencyGrid::with_spacing(s.pump_center + s.detuning, sg.spacing(), s.grid_points);
    const auto filter = smf::make_profile(s.signal_filter, sg);
    const auto cal = smf::calibrate_pump_energy(s, sg, ig, filter);
    Output out(output);
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "pair_probability: %.10g\ngammaL_per_W: %.10g\nreference_energy_pJ: %.10g\n"
                  "gammaL_energy_J_per_W: %.10g\npulse_energy_pJ: %.10g\n",
                  s.pair_probability, cal.gamma_l_at_reference, cal.reference_energy * 1e12,
                  cal.gamma_l_at_reference * cal.reference_energy, cal.pulse_energy * 1e12);
    out.stream() << buf;
    // Transform-limited peak power; not defined here for tabulated spectra.
    double peak = std::nan("");
    if (s.pump.shape == smf::PumpShape::cw_carved_rect)
        peak = cal.pulse_energy / s.pump.duration;
    else if (s.pump.shape == smf::PumpShape::gaussian) {
        const double sigma_w = s.pump.fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
        const double sigma_t = 1.0 / (2.0 * sigma_w);
        peak = cal.pulse_energy / (std::sqrt(2.0 * M_PI) * sigma_t);
    }
    if (std::isfinite(peak)) {
        std::snprintf(buf, sizeof buf, "peak_power_W: %.10g\n", peak);
        out.stream() << buf;
    }
    out.close();
    return 0;
}

int run_scan(const ScenarioOptions& opt, const std::string& output, const std::string& counts, unsigned threads) {
    const auto s = resolve_scenario(opt);
    const auto prepared = smf::prepare_scenario(s);
    const auto scan = smf::run_delay_scan(prepared, threads);
    Output out(output);
    smf::write_scan_csv(out.stream(), scan);
    out.close();
    if (!counts.empty()) {
        Output c(counts);
        c.stream() << "tau_ps, n4, n4_err, n2_ab, n2_ab_err, n2_acc, n2_acc_err, nA, nA_err, nB, nB_err, nC, nC_err, "
                      "nD, nD_err\n";
        for (const auto& row : smf::expected_counts(scan, s.pulses)) {
            std::vector<double> v{row.tau * 1e12};
            for (std::size_t i = 0; i < 7; ++i) {
                v.push_back(row.counts[i]);
                v.push_back(row.errors[i]);
            }
            print_line(c.stream(), v);
        }
        c.close();
    }
    return 0;
}

int run_fit(const std::string& input, const std::string& observable, const std::string& output) {
    std::ifstream in(input);
    if (!in)
        throw IoError("cannot read " + input);
    const auto scan = smf::read_scan_csv(in);
    smf::Observable obs;
    if (observable == "fourfold")
        obs = smf::Observable::fourfold;
    else if (observable == "twofold_accsub")
        obs = smf::Observable::twofold_accsub;
    else
        throw ConfigError("unknown observable '" + observable + "' (fourfold, twofold_accsub)");
    const auto fit = smf::fit_visibility(scan, obs);
    Output out(output);
    smf::write_fit(out.stream(), fit);
    out.close();
    return 0;
}

int run_oracle_check(std::size_t states, std::uint64_t seed, double tolerance) {
    const auto report = smf::run_oracle_check(states, seed);
    std::printf("states: %zu\ncomparisons: %zu\nmax_deviation: %.3e\nthermal_deviation: %.3e\n", report.states,
                report.comparisons, report.max_deviation, report.thermal_deviation);
    if (!(report.max_deviation <= tolerance))
        throw NumericalError("Gaussian engine and Fock oracle differ by " + std::to_string(report.max_deviation));
    return 0;
}

int fail(int code, const char* kind, const std::string& message) {
    std::string line = message;
    for (char& ch : line)
        if (ch == '\n' || ch == '\r')
            ch = ' ';
    std::cerr << "error: " << kind << ": " << line << std::endl;
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heralded-photon HOM simulator"};
    app.require_subcommand(1);

    std::string output;

    auto* modes = app.add_subcommand("modes", "eigenvalues of the rect-rect single-mode filter versus c");
    std::string c_range = "0:5:0.1";
    std::size_t n_modes = 3;
    double sample_c = 0.0;
    std::size_t points = 513;
    modes->add_option("--c-range", c_range, "start:stop:step")->capture_default_str();
    modes->add_option("--n-modes", n_modes, "eigenvalues per row")->capture_default_str()->check(CLI::Range(1, 64));
    modes->add_option("--eigenmodes-at", sample_c, "also print eigenmode samples at this c");
    modes->add_option("--points", points, "grid points")->capture_default_str()->check(CLI::Range(33, 8193));
    modes->add_option("-o,--output", output, "output file (default stdout)");

    auto* calibrate = app.add_subcommand("calibrate", "gammaL and pulse energy for the configured pair probability");
    ScenarioOptions cal_opt;
    add_scenario_options(calibrate, cal_opt);
    calibrate->add_option("-o,--output", output, "output file (default stdout)");

    auto* scan = app.add_subcommand("scan", "delay scan, written as CSV");
    ScenarioOptions scan_opt;
    std::string counts;
    unsigned threads = 0;
    add_scenario_options(scan, scan_opt);
    scan->add_option("-o,--output", output, "output CSV (default stdout)");
    scan->add_option("--counts", counts, "also write expected counts with Poisson errors");
    scan->add_option("-j,--threads", threads, "worker threads (0 = all cores)");

    auto* fit = app.add_subcommand("fit", "Gaussian dip fit of a scan CSV");
    std::string input;
    std::string observable = "fourfold";
    fit->add_option("input", input, "scan CSV")->required();
    fit->add_option("--observable", observable, "fourfold or twofold_accsub")->capture_default_str();
    fit->add_option("-o,--output", output, "output file (default stdout)");

    auto* oracle = app.add_subcommand("oracle-check", "Gaussian engine against brute-force Fock sums");
    std::size_t states = 200;
    std::uint64_t seed = 20240611;
    double tolerance = 1e-6;
    oracle->add_option("--states", states, "random states")->capture_default_str();
    oracle->add_option("--seed", seed, "RNG seed")->capture_default_str();
    oracle->add_option("--tolerance", tolerance, "max allowed deviation")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(2, "usage", e.what());
    }

    try {
        if (*modes)
            return run_modes(c_range, n_modes, sample_c, points, output);
        if (*calibrate)
            return run_calibrate(cal_opt, output);
        if (*scan)
            return run_scan(scan_opt, output, counts, threads);
        if (*fit)
            return run_fit(input, observable, output);
        if (*oracle)
            return run_oracle_check(states, seed, tolerance);
    } catch (const ConfigError& e) {
        return fail(2, "config", e.what());
    } catch (const IoError& e) {
        return fail(4, "io", e.what());
    } catch (const NumericalError& e) {
        return fail(3, "numerical", e.what());
    } catch (const std::exception& e) {
        return fail(3, "numerical", e.what());
    }
    return 0;
}

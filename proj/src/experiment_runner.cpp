#include "smf/experiment_runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <unsupported/Eigen/NonLinearOptimization>

namespace smf {

namespace {

constexpr double reference_energy = 1e-12; // J

FrequencyGrid band_grid(double center, const FilterSpec& f, std::size_t n) {
    return FrequencyGrid::band_aligned(center, f.width, n);
}

ModeBasis arm_basis(const FilterProfile& filter, const Scenario& s) {
    const auto basis = schmidt_decompose(build_kernel(filter, s.gate));
    return retain_modes(basis, s.mode_cutoff, s.max_modes_per_arm);
}

FrequencyGrid pump_grid(const Scenario& s, double spacing) {
    const double half = 1.02 * pump_required_half_width(s.pump);
    const auto half_points = static_cast<std::size_t>(std::ceil(half / spacing));
    return FrequencyGrid::with_spacing(s.pump_center, spacing, 2 * half_points + 1);
}

} // namespace

PumpCalibration calibrate_pump_energy(const Scenario& s, const FrequencyGrid& signal_grid,
                                      const FrequencyGrid& idler_grid, const FilterProfile& signal_filter) {
    const auto pump_ref = pump_spectrum(s.pump, reference_energy, pump_grid(s, signal_grid.spacing()));
    PumpCalibration cal;
    cal.reference_energy = reference_energy;
    cal.gamma_l_at_reference = calibrate_gain(s.pair_probability, pump_ref, signal_grid, idler_grid, signal_filter);
    // The coupling scales as gamma L E, so the physical fiber reaches the same
    // pair probability at this pulse energy.
    cal.pulse_energy = reference_energy * cal.gamma_l_at_reference / (s.gamma * s.length);
    return cal;
}

PreparedScenario prepare_scenario(const Scenario& scenario) {
    scenario.validate();
    PreparedScenario p;
    p.scenario = scenario;
    const double signal_center = scenario.pump_center - scenario.detuning;
    const double idler_center = scenario.pump_center + scenario.detuning;
    p.signal_grid = band_grid(signal_center, scenario.signal_filter, scenario.grid_points);
    // Both bands share one spacing so the pump autoconvolution lines up.
    p.idler_grid = FrequencyGrid::with_spacing(idler_center, p.signal_grid.spacing(), scenario.grid_points);
    if (scenario.gate.duration + 1e-12 > constants::two_pi / p.signal_grid.spacing() * 0.9)
        throw ConfigError("gate duration is too long for the grid resolution; raise grid.points");

    FilterSpec idler_spec = scenario.idler_filter;
    p.signal_filter = make_profile(scenario.signal_filter, p.signal_grid);
    p.idler_filter = make_profile(idler_spec, p.idler_grid);

    const auto cal = calibrate_pump_energy(scenario, p.signal_grid, p.idler_grid, p.signal_filter);
    p.pulse_energy = cal.pulse_energy;
    p.pump = pump_spectrum(scenario.pump, cal.pulse_energy, pump_grid(scenario, p.signal_grid.spacing()));

    p.source.gamma = scenario.gamma;
    p.source.length = scenario.length;
    p.source.temperature = scenario.temperature;
    p.source.raman_gain = scenario.raman_gain_scale == 0.0
                              ? RamanGain::zero()
                              : RamanGain::from_file(scenario.raman_gain_file).scaled(scenario.raman_gain_scale);
    p.source.pump_center = scenario.pump_center;
    p.source.signal_center = signal_center;
    p.source.idler_center = idler_center;
    p.moments = source_moments(p.pump, p.source, p.signal_grid, p.idler_grid);

    p.bases.signal = arm_basis(p.signal_filter, scenario);
    p.bases.idler_right = arm_basis(p.idler_filter, scenario);
    p.bases.idler_left = p.bases.idler_right;
    for (Detector d : all_detectors) {
        auto& det = p.detectors[static_cast<std::size_t>(d)];
        det.name = d;
        det.efficiency = scenario.efficiency(d);
        det.dark_mean = scenario.dark_mean[static_cast<std::size_t>(d)];
        det.basis = (d == Detector::A || d == Detector::B) ? p.bases.signal : p.bases.idler_right;
        det.validate();
    }

    p.dip_width = hom_dip_width_estimate(p.signal_filter, p.idler_filter, p.pump);
    if (!scenario.taus.empty()) {
        p.taus = scenario.taus;
    } else {
        const std::size_t n = scenario.auto_tau_points;
        const double half = scenario.auto_tau_half_range * p.dip_width;
        for (std::size_t i = 0; i < n; ++i)
            p.taus.push_back(n == 1 ? 0.0 : -half + 2.0 * half * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    return p;
}

ScanRow scan_row(const PreparedScenario& prepared, double tau) {
    const auto moments = detection_mode_projection(prepared.moments, prepared.bases, tau);
    const ClickTable table(moments, prepared.detectors);
    ScanRow row;
    row.tau = tau;
    row.p4 = table.coincidence(15u);
    row.p2_ab = table.coincidence(detector_set({Detector::A, Detector::B}));
    for (Detector d : all_detectors)
        row.singles[static_cast<std::size_t>(d)] = table.singles(d);
    row.p2_acc = row.singles[0] * row.singles[1];
    return row;
}

DelayScan run_delay_scan(const PreparedScenario& prepared, unsigned threads) {
    const std::size_t n = prepared.taus.size();
    DelayScan scan;
    scan.label = prepared.scenario.label;
    scan.rows.resize(n);
    if (threads == 0)
        threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::string error_context;
    auto worker = [&]() {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                scan.rows[i] = scan_row(prepared, prepared.taus[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                    std::ostringstream ctx;
                    ctx << "at tau = " << prepared.taus[i] * 1e12 << " ps";
                    error_context = ctx.str();
                }
                next = n;
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    if (error) {
        try {
            std::rethrow_exception(error);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(e.what()) + " " + error_context);
        } catch (const std::exception& e) {
            throw NumericalError(std::string(e.what()) + " " + error_context);
        }
    }
    return scan;
}

DelayScan run_delay_scan(const Scenario& scenario, unsigned threads) {
    return run_delay_scan(prepare_scenario(scenario), threads);
}

void write_scan_csv(std::ostream& out, const DelayScan& scan) {
    out << scan_csv_header << '\n';
    char buf[64];
    auto put = [&](double v, bool last) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf << (last ? "\n" : ", ");
    };
    for (const auto& r : scan.rows) {
        put(r.tau * 1e12, false);
        put(r.p4, false);
        put(r.p2_ab, false);
        put(r.p2_acc, false);
        for (std::size_t d = 0; d < 4; ++d)
            put(r.singles[d], d == 3);
    }
}

DelayScan read_scan_csv(std::istream& in) {
    DelayScan scan;
    std::string line;
    bool header = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        if (!header) {
            std::string compact;
            for (char c : line)
                if (c != ' ' && c != '\r' && c != '\t')
                    compact += c;
            if (compact != "tau_ps,p4,p2_ab,p2_acc,pA,pB,pC,pD")
                throw ConfigError("scan CSV must start with the header '" + std::string(scan_csv_header) + "'");
            header = true;
            continue;
        }
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t\r", used) != std::string::npos)
                    throw std::invalid_argument("trailing text");
            } catch (const std::exception&) {
                throw ConfigError("scan CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (v.size() != 8)
            throw ConfigError("scan CSV line " + std::to_string(lineno) + ": expected 8 columns");
        ScanRow r;
        r.tau = v[0] * 1e-12;
        r.p4 = v[1];
        r.p2_ab = v[2];
        r.p2_acc = v[3];
        r.singles = {v[4], v[5], v[6], v[7]};
        scan.rows.push_back(r);
    }
    if (!header)
        throw ConfigError("scan CSV is empty");
    if (scan.rows.empty())
        throw ConfigError("scan CSV has no data rows");
    return scan;
}

namespace {

struct DipFunctor {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    Eigen::VectorXd t, y, inv_err;

    int inputs() const { return 4; }
    int values() const { return static_cast<int>(t.size()); }

    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& f) const {
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            const double d = t[i] - p[2];
            const double g = std::exp(-d * d / (2.0 * p[3] * p[3]));
            f[i] = (p[0] * (1.0 - p[1] * g) - y[i]) * inv_err[i];
        }
        return 0;
    }

    int df(const Eigen::VectorXd& p, Eigen::MatrixXd& j) const {
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            const double d = t[i] - p[2];
            const double s2 = p[3] * p[3];
            const double g = std::exp(-d * d / (2.0 * s2));
            j(i, 0) = (1.0 - p[1] * g) * inv_err[i];
            j(i, 1) = -p[0] * g * inv_err[i];
            j(i, 2) = -p[0] * p[1] * g * d / s2 * inv_err[i];
            j(i, 3) = -p[0] * p[1] * g * d * d / (s2 * p[3]) * inv_err[i];
        }
        return 0;
    }
};

} // namespace

VisibilityFit fit_visibility(const std::vector<double>& taus, const std::vector<double>& values,
                             const std::vector<double>& errors) {
    const std::size_t n = taus.size();
    if (values.size() != n || (!errors.empty() && errors.size() != n))
        throw ConfigError("fit inputs must have matching lengths");
    if (n < 5)
        throw ConfigError("visibility fit needs at least 5 delay points, got " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(taus[i]) || !std::isfinite(values[i]))
            throw ConfigError("fit inputs must be finite");
        if (!errors.empty() && !(errors[i] > 0.0))
            throw ConfigError("fit error bars must be positive");
    }

    const double ymax = *std::max_element(values.begin(), values.end());
    const double ymin = *std::min_element(values.begin(), values.end());
    const double tmin = *std::min_element(taus.begin(), taus.end());
    const double tmax = *std::max_element(taus.begin(), taus.end());
    VisibilityFit fit;
    if (!(ymax > 0.0))
        throw ConfigError("visibility fit needs positive data");
    if (ymax - ymin <= 1e-12 * ymax) {
        fit.degenerate = true;
        fit.visibility = 0.0;
        fit.baseline = ymax;
        fit.tau0 = 0.5 * (tmin + tmax);
        fit.sigma = 0.5 * (tmax - tmin);
        return fit;
    }

    // Normalized units: values / ymax, delays in ps.
    DipFunctor f;
    f.t.resize(static_cast<Eigen::Index>(n));
    f.y.resize(static_cast<Eigen::Index>(n));
    f.inv_err.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        f.t[k] = taus[i] * 1e12;
        f.y[k] = values[i] / ymax;
        f.inv_err[k] = errors.empty() ? 1.0 : ymax / errors[i];
    }

    // Start: baseline from the outer fifth of the delays, centroid and rms of the dip.
    const double mid = 0.5 * (f.t.minCoeff() + f.t.maxCoeff());
    std::vector<std::pair<double, double>> by_distance;
    for (Eigen::Index i = 0; i < f.t.size(); ++i)
        by_distance.emplace_back(std::abs(f.t[i] - mid), f.y[i]);
    std::sort(by_distance.begin(), by_distance.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    const std::size_t outer = std::max<std::size_t>(2, n / 5);
    double base = 0.0;
    for (std::size_t i = 0; i < outer; ++i)
        base += by_distance[i].second;
    base /= static_cast<double>(outer);
    double w_sum = 0.0;
    double centroid = 0.0;
    for (Eigen::Index i = 0; i < f.t.size(); ++i) {
        const double w = std::max(base - f.y[i], 0.0);
        w_sum += w;
        centroid += w * f.t[i];
    }
    if (!(w_sum > 0.0))
        throw NumericalError("visibility fit: data show no dip below the baseline");
    centroid /= w_sum;
    double spread = 0.0;
    for (Eigen::Index i = 0; i < f.t.size(); ++i)
        spread += std::max(base - f.y[i], 0.0) * (f.t[i] - centroid) * (f.t[i] - centroid);
    spread = std::sqrt(spread / w_sum);
    const double span = f.t.maxCoeff() - f.t.minCoeff();
    if (!(spread > 0.0))
        spread = span / 10.0;
    if (span < 3.0 * spread)
        throw ConfigError("delay range spans less than 3x the estimated dip width");

    Eigen::VectorXd p(4);
    p << base, 1.0 - f.y.minCoeff() / base, centroid, spread;
    Eigen::LevenbergMarquardt<DipFunctor> lm(f);
    lm.parameters.maxfev = 2000;
    lm.parameters.xtol = 1e-12;
    lm.parameters.ftol = 1e-14;
    const auto status = lm.minimize(p);
    using Status = Eigen::LevenbergMarquardtSpace::Status;
    if (status == Status::ImproperInputParameters || status == Status::TooManyFunctionEvaluation ||
        !p.allFinite() || !(std::abs(p[3]) > 0.0))
        throw NumericalError("visibility fit did not converge");
    p[3] = std::abs(p[3]);

    Eigen::VectorXd resid(f.t.size());
    f(p, resid);
    Eigen::MatrixXd jac(f.t.size(), 4);
    f.df(p, jac);
    const Eigen::Matrix4d jtj = jac.transpose() * jac;
    Eigen::Matrix4d cov = jtj.completeOrthogonalDecomposition().pseudoInverse();
    if (errors.empty()) {
        const double dof = std::max<double>(1.0, static_cast<double>(n) - 4.0);
        cov *= resid.squaredNorm() / dof;
    }
    // Back to physical units for the baseline row/column.
    Eigen::Vector4d scale(ymax, 1.0, 1.0, 1.0);
    fit.covariance = scale.asDiagonal() * cov * scale.asDiagonal();
    fit.baseline = p[0] * ymax;
    fit.visibility = p[1];
    fit.visibility_err = std::sqrt(std::max(cov(1, 1), 0.0));
    fit.tau0 = p[2] * 1e-12;
    fit.sigma = p[3] * 1e-12;
    return fit;
}

VisibilityFit fit_visibility(const DelayScan& scan, Observable observable) {
    std::vector<double> t;
    std::vector<double> y;
    for (const auto& r : scan.rows) {
        t.push_back(r.tau);
        y.push_back(observable == Observable::fourfold ? r.p4 : r.p2_ab - r.p2_acc);
    }
    return fit_visibility(t, y);
}

void write_fit(std::ostream& out, const VisibilityFit& fit) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "V: %.10g\nV_err: %.10g\ntau0_ps: %.10g\nsigma_ps: %.10g\nbaseline: %.10g\n", fit.visibility,
                  fit.visibility_err, fit.tau0 * 1e12, fit.sigma * 1e12, fit.baseline);
    out << buf;
}

std::vector<CountRow> expected_counts(const DelayScan& scan, double pulses) {
    if (!(pulses > 0.0))
        throw ConfigError("pulse count must be positive");
    std::vector<CountRow> out;
    for (const auto& r : scan.rows) {
        CountRow c;
        c.tau = r.tau;
        const std::array<double, 7> p{r.p4, r.p2_ab, r.p2_acc, r.singles[0], r.singles[1], r.singles[2], r.singles[3]};
        for (std::size_t i = 0; i < 7; ++i) {
            c.counts[i] = p[i] * pulses;
            c.errors[i] = c.counts[i] > 0.0 ? std::sqrt(c.counts[i]) : 1.0;
        }
        out.push_back(c);
    }
    return out;
}

} // namespace smf

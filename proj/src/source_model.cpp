#include "smf/source_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace smf {

namespace {

constexpr double occupation_cap = 1e12;

double sinc(double x) {
    if (std::abs(x) < 1e-8)
        return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
}

double gaussian_sigma(double power_fwhm) { return power_fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0))); }

// Pump energy carried by the exact spectrum, used to judge grid coverage.
double analytic_spectral_weight(const PumpSpec& spec) {
    switch (spec.shape) {
    case PumpShape::cw_carved_rect:
        return constants::two_pi * spec.duration;
    case PumpShape::gaussian:
        return gaussian_sigma(spec.fwhm) * std::sqrt(constants::two_pi);
    case PumpShape::tabulated: {
        double sum = 0.0;
        for (std::size_t i = 1; i < spec.offsets.size(); ++i) {
            const double a = spec.magnitudes[i - 1] * spec.magnitudes[i - 1];
            const double b = spec.magnitudes[i] * spec.magnitudes[i];
            sum += 0.5 * (a + b) * (spec.offsets[i] - spec.offsets[i - 1]);
        }
        return sum;
    }
    }
    return 0.0;
}

double spectral_value(const PumpSpec& spec, double x) {
    switch (spec.shape) {
    case PumpShape::cw_carved_rect:
        return spec.duration * sinc(0.5 * x * spec.duration);
    case PumpShape::gaussian: {
        const double s = gaussian_sigma(spec.fwhm);
        return std::exp(-x * x / (4.0 * s * s));
    }
    case PumpShape::tabulated: {
        const auto& xs = spec.offsets;
        if (x < xs.front() || x > xs.back())
            return 0.0;
        auto it = std::upper_bound(xs.begin(), xs.end(), x);
        if (it == xs.end())
            return spec.magnitudes.back();
        const std::size_t i = static_cast<std::size_t>(it - xs.begin());
        const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
        return spec.magnitudes[i - 1] + t * (spec.magnitudes[i] - spec.magnitudes[i - 1]);
    }
    }
    return 0.0;
}

// Index of grid point i relative to the grid center, doubled so it is an integer.
long twice_index(const FrequencyGrid& g, std::size_t i) {
    return 2 * static_cast<long>(i) - static_cast<long>(g.size() - 1);
}

} // namespace

PumpPulse PumpPulse::scaled_to(double new_energy) const {
    if (!(new_energy > 0.0))
        throw ConfigError("pump energy must be positive");
    PumpPulse out = *this;
    out.amplitude *= std::sqrt(new_energy / energy);
    out.energy = new_energy;
    return out;
}

double pump_required_half_width(const PumpSpec& spec) {
    switch (spec.shape) {
    case PumpShape::cw_carved_rect:
        // sinc^2 tail beyond W carries about 2 / (pi T W) of the energy.
        return 2.0 / (constants::pi * spec.duration * 1e-3);
    case PumpShape::gaussian:
        // 6 sigma: the truncated amplitude tail would otherwise distort the autoconvolution.
        return 6.0 * gaussian_sigma(spec.fwhm);
    case PumpShape::tabulated:
        return std::max(std::abs(spec.offsets.front()), std::abs(spec.offsets.back()));
    }
    return 0.0;
}

PumpPulse pump_spectrum(const PumpSpec& spec, double energy, const FrequencyGrid& grid) {
    if (!(energy > 0.0))
        throw ConfigError("pump energy must be positive");
    switch (spec.shape) {
    case PumpShape::cw_carved_rect:
        if (!(spec.duration > 0.0))
            throw ConfigError("carved pump duration must be positive");
        break;
    case PumpShape::gaussian:
        if (!(spec.fwhm > 0.0))
            throw ConfigError("gaussian pump FWHM must be positive");
        break;
    case PumpShape::tabulated:
        if (spec.offsets.size() < 2 || spec.offsets.size() != spec.magnitudes.size() ||
            !std::is_sorted(spec.offsets.begin(), spec.offsets.end()))
            throw ConfigError("tabulated pump needs ascending offsets with matching magnitudes");
        break;
    }

    const double dw = grid.spacing();
    VectorXc a(static_cast<Eigen::Index>(grid.size()));
    double weight = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double v = spectral_value(spec, grid.offset(k));
        a[static_cast<Eigen::Index>(k)] = v;
        weight += v * v * dw;
    }
    const double total = analytic_spectral_weight(spec);
    if (!(total > 0.0) || weight < 0.999 * total) {
        std::ostringstream msg;
        msg << "pump grid holds " << (total > 0.0 ? weight / total : 0.0) * 100.0
            << "% of the pulse energy; a span of at least " << 2.0 * pump_required_half_width(spec) / 1e9
            << " Grad/s is required";
        throw ConfigError(msg.str());
    }
    a *= std::sqrt(energy / (constants::two_pi * weight));
    return {grid, std::move(a), spec.shape, energy};
}

RamanGain::RamanGain(std::vector<double> detuning, std::vector<double> gain, std::string source)
    : detuning_(std::move(detuning)), gain_(std::move(gain)), source_(std::move(source)) {
    if (detuning_.size() != gain_.size() || detuning_.size() < 2)
        throw ConfigError("Raman gain table needs at least two rows");
    for (std::size_t i = 0; i < detuning_.size(); ++i) {
        if (detuning_[i] < 0.0 || (i > 0 && detuning_[i] <= detuning_[i - 1]))
            throw ConfigError("Raman gain detunings must be non-negative and strictly ascending");
        if (gain_[i] < 0.0 || !std::isfinite(gain_[i]))
            throw ConfigError("Raman gain values must be non-negative");
    }
}

RamanGain RamanGain::from_text(const std::string& text, const std::string& source) {
    std::vector<double> nu;
    std::vector<double> g;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        double thz = 0.0;
        double per_w_km = 0.0;
        if (!(ls >> thz))
            continue;
        std::string rest;
        if (!(ls >> per_w_km) || (ls >> rest))
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'detuning_THz gain_value'");
        nu.push_back(thz_to_angular(thz));
        g.push_back(per_w_km * 1e-3);
    }
    return RamanGain(std::move(nu), std::move(g), source);
}

RamanGain RamanGain::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open Raman gain file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_text(buffer.str(), path.string());
}

RamanGain RamanGain::zero() { return RamanGain({0.0, 1.0e16}, {0.0, 0.0}, "<zero>"); }

double RamanGain::at(double nu) const {
    if (detuning_.empty())
        return 0.0;
    const double x = std::abs(nu);
    if (x < detuning_.front() || x > detuning_.back())
        return 0.0;
    auto it = std::upper_bound(detuning_.begin(), detuning_.end(), x);
    if (it == detuning_.end())
        return gain_.back();
    const std::size_t i = static_cast<std::size_t>(it - detuning_.begin());
    const double t = (x - detuning_[i - 1]) / (detuning_[i] - detuning_[i - 1]);
    return gain_[i - 1] + t * (gain_[i] - gain_[i - 1]);
}

bool RamanGain::covers(double nu_min_abs, double nu_max_abs) const {
    if (is_zero())
        return true;
    return !detuning_.empty() && nu_min_abs >= detuning_.front() && nu_max_abs <= detuning_.back();
}

bool RamanGain::is_zero() const {
    return std::all_of(gain_.begin(), gain_.end(), [](double g) { return g == 0.0; });
}

RamanGain RamanGain::scaled(double factor) const {
    if (factor < 0.0)
        throw ConfigError("Raman gain scale must be non-negative");
    auto g = gain_;
    for (double& v : g)
        v *= factor;
    return RamanGain(detuning_, std::move(g), source_);
}

std::filesystem::path default_raman_gain_file() {
#ifdef SMF_DATA_DIR
    return std::filesystem::path(SMF_DATA_DIR) / "raman_gain_silica.dat";
#else
    return "data/raman_gain_silica.dat";
#endif
}

void SourceParams::validate() const {
    if (!(length > 0.0))
        throw ConfigError("fiber length must be positive");
    if (!(temperature > 0.0))
        throw ConfigError("temperature must be positive");
    if (gamma < 0.0)
        throw ConfigError("SFWM coefficient must be non-negative");
}

double thermal_occupation(double detuning, double temperature) {
    if (!(temperature > 0.0))
        throw ConfigError("temperature must be positive");
    const double spontaneous = detuning < 0.0 ? 1.0 : 0.0;
    if (detuning == 0.0) {
        warn("thermal occupation at zero detuning capped at 1e12");
        return occupation_cap;
    }
    const double x = constants::hbar * std::abs(detuning) / (constants::k_boltzmann * temperature);
    const double bose = 1.0 / std::expm1(x);
    return std::min(bose, occupation_cap) + spontaneous;
}

MatrixXc fwm_joint_amplitude(const PumpPulse& pump, double gamma_l, const FrequencyGrid& grid_s,
                             const FrequencyGrid& grid_a) {
    if (!grid_s.compatible_with(pump.grid) || !grid_a.compatible_with(pump.grid))
        throw ConfigError("signal, idler and pump grids must share one spacing");
    const double dw = pump.grid.spacing();
    const auto ns = static_cast<Eigen::Index>(grid_s.size());
    const auto na = static_cast<Eigen::Index>(grid_a.size());
    MatrixXc jsa = MatrixXc::Zero(ns, na);
    if (gamma_l == 0.0)
        return jsa;

    // Work in doubled index units so half-integer grid offsets stay exact.
    // omega_s + omega_a - 2 omega_p = (shift + ts + ta) * dw / 2 must equal
    // (tk + tl) * dw / 2 for a pair of pump samples.
    const double mismatch = (grid_s.center() + grid_a.center() - 2.0 * pump.grid.center()) / dw;
    if (std::abs(mismatch) > 1.0 + 1e-9)
        throw ConfigError("band centers violate energy conservation by more than one grid spacing");
    const long np = static_cast<long>(pump.grid.size());
    const long parity = ((static_cast<long>(grid_s.size()) - 1) + (static_cast<long>(grid_a.size()) - 1) +
                         2 * (np - 1)) % 2;
    // Doubled shift must keep (ts + ta + shift) with the parity of (tk + tl).
    long shift = 2 * std::lround(mismatch);
    if (parity != 0)
        shift = 2 * static_cast<long>(std::floor(mismatch)) + 1;

    // Phi as a function of k + l, the sum of pump sample indices.
    const long max_sum = 2 * (np - 1);
    std::vector<cplx> phi(static_cast<std::size_t>(max_sum + 1), 0.0);
    for (long s = 0; s <= max_sum; ++s) {
        cplx acc = 0.0;
        const long k0 = std::max(0L, s - (np - 1));
        const long k1 = std::min(np - 1, s);
        for (long k = k0; k <= k1; ++k)
            acc += pump.amplitude[k] * pump.amplitude[s - k];
        phi[static_cast<std::size_t>(s)] = acc * dw;
    }
    const cplx prefactor(0.0, gamma_l);
    for (Eigen::Index n = 0; n < na; ++n) {
        for (Eigen::Index m = 0; m < ns; ++m) {
            // Doubled offset sum relative to 2 omega_p; the pump pair offset sum is tk + tl = 2(k + l) - 2(np - 1).
            const long t = twice_index(grid_s, static_cast<std::size_t>(m)) +
                           twice_index(grid_a, static_cast<std::size_t>(n)) + shift;
            const long twice_sum = t + 2 * (np - 1);
            if (twice_sum % 2 != 0)
                continue;
            const long s = twice_sum / 2;
            if (s < 0 || s > max_sum)
                continue;
            jsa(m, n) = prefactor * phi[static_cast<std::size_t>(s)];
        }
    }
    return jsa;
}

MatrixXc raman_moments(const PumpPulse& pump, const SourceParams& params, const FrequencyGrid& grid, Band band) {
    params.validate();
    if (!grid.compatible_with(pump.grid))
        throw ConfigError("band and pump grids must share one spacing");
    const auto n = static_cast<Eigen::Index>(grid.size());
    if (params.raman_gain.is_zero())
        return MatrixXc::Zero(n, n);

    const double dw = grid.spacing();
    const double base = (grid.center() - pump.grid.center()) / dw;
    const bool stokes_side = base < 0.0;
    if ((band == Band::stokes) != stokes_side)
        throw ConfigError("band label does not match the side of the pump it lies on");
    const double band_lo = std::abs(grid.front() - pump.grid.center());
    const double band_hi = std::abs(grid.back() - pump.grid.center());
    if (!params.raman_gain.covers(std::min(band_lo, band_hi), std::max(band_lo, band_hi)))
        throw ConfigError("Raman gain table does not cover the band detunings");

    // nu_j = omega_m - omega_pump,k runs over a lattice indexed by m - k.
    const auto np = static_cast<Eigen::Index>(pump.grid.size());
    const Eigen::Index nj = n + np - 1;
    const double origin = grid.center() - pump.grid.center() + (grid.offset(0) - pump.grid.offset(static_cast<std::size_t>(np - 1)));
    Eigen::VectorXd weight(nj);
    long outside = 0;
    for (Eigen::Index j = 0; j < nj; ++j) {
        const double nu = origin + static_cast<double>(j) * dw;
        const double g = params.raman_gain.at(nu);
        if (g == 0.0 && !params.raman_gain.covers(std::abs(nu), std::abs(nu)))
            ++outside;
        const double occupation = nu == 0.0 ? 0.0 : thermal_occupation(nu, params.temperature);
        weight[j] = params.length * g * occupation * dw * dw;
    }
    if (outside > 0)
        warn(std::to_string(outside) + " Raman detuning samples fall outside the gain table and are treated as zero");

    // N = conj(P) P^T with P[m, j] = A(omega_m - nu_j) sqrt(weight_j).
    MatrixXc p = MatrixXc::Zero(n, nj);
    for (Eigen::Index m = 0; m < n; ++m)
        for (Eigen::Index k = 0; k < np; ++k) {
            const Eigen::Index j = m + (np - 1 - k);
            p(m, j) = pump.amplitude[k] * std::sqrt(weight[j]);
        }
    MatrixXc out = p.conjugate() * p.transpose();
    return 0.5 * (out + out.adjoint());
}

BogoliubovMap bogoliubov_map(const MatrixXc& coupling, AlphaTreatment treatment) {
    const auto n = coupling.rows();
    const MatrixXc ddag = coupling * coupling.adjoint();
    MatrixXc alpha;
    if (treatment == AlphaTreatment::second_order) {
        alpha = MatrixXc::Identity(n, n) + 0.5 * ddag;
    } else {
        Eigen::SelfAdjointEigenSolver<MatrixXc> solver(0.5 * (ddag + ddag.adjoint()));
        if (solver.info() != Eigen::Success)
            throw NumericalError("eigensolver failed while forming the Bogoliubov map");
        const Eigen::VectorXd root = (solver.eigenvalues().array().max(0.0) + 1.0).sqrt();
        alpha = solver.eigenvectors() * root.asDiagonal() * solver.eigenvectors().adjoint();
    }
    return {std::move(alpha), coupling};
}

double commutator_residual(const BogoliubovMap& map) {
    const auto n = map.alpha.rows();
    const MatrixXc c = map.alpha * map.alpha.adjoint() - map.coupling * map.coupling.adjoint() -
                       MatrixXc::Identity(n, n);
    return c.norm();
}

SpoolMoments SpoolMoments::vacuum(Eigen::Index n_stokes, Eigen::Index n_antistokes) {
    SpoolMoments s;
    s.fwm_stokes = MatrixXc::Zero(n_stokes, n_stokes);
    s.raman_stokes = MatrixXc::Zero(n_stokes, n_stokes);
    s.fwm_antistokes = MatrixXc::Zero(n_antistokes, n_antistokes);
    s.raman_antistokes = MatrixXc::Zero(n_antistokes, n_antistokes);
    s.anomalous = MatrixXc::Zero(n_stokes, n_antistokes);
    return s;
}

std::vector<Register> GaussianMoments::registers() const {
    return {{Spool::right, Band::stokes, stokes_grid},
            {Spool::right, Band::antistokes, antistokes_grid},
            {Spool::left, Band::stokes, stokes_grid},
            {Spool::left, Band::antistokes, antistokes_grid}};
}

MatrixXc GaussianMoments::full_normal() const {
    const auto ns = static_cast<Eigen::Index>(stokes_grid.size());
    const auto na = static_cast<Eigen::Index>(antistokes_grid.size());
    const Eigen::Index block = ns + na;
    MatrixXc n = MatrixXc::Zero(2 * block, 2 * block);
    for (std::size_t s = 0; s < 2; ++s) {
        const Eigen::Index o = static_cast<Eigen::Index>(s) * block;
        n.block(o, o, ns, ns) = spools[s].normal_stokes();
        n.block(o + ns, o + ns, na, na) = spools[s].normal_antistokes();
    }
    return n;
}

MatrixXc GaussianMoments::full_anomalous() const {
    const auto ns = static_cast<Eigen::Index>(stokes_grid.size());
    const auto na = static_cast<Eigen::Index>(antistokes_grid.size());
    const Eigen::Index block = ns + na;
    MatrixXc m = MatrixXc::Zero(2 * block, 2 * block);
    for (std::size_t s = 0; s < 2; ++s) {
        const Eigen::Index o = static_cast<Eigen::Index>(s) * block;
        m.block(o, o + ns, ns, na) = spools[s].anomalous;
        m.block(o + ns, o, na, ns) = spools[s].anomalous.transpose();
    }
    return m;
}

double physicality_margin(const MatrixXc& normal, const MatrixXc& anomalous) {
    const auto n = normal.rows();
    MatrixXc g(2 * n, 2 * n);
    g << MatrixXc::Identity(n, n) + normal.transpose(), anomalous, anomalous.conjugate(), normal;
    Eigen::SelfAdjointEigenSolver<MatrixXc> solver(0.5 * (g + g.adjoint()), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw NumericalError("eigensolver failed in physicality check");
    return solver.eigenvalues().minCoeff();
}

GaussianMoments source_moments(const PumpPulse& pump, const SourceParams& params, const FrequencyGrid& grid_s,
                               const FrequencyGrid& grid_a) {
    params.validate();
    const double gamma_l = params.gamma * params.length;
    const MatrixXc coupling = fwm_joint_amplitude(pump, gamma_l, grid_s, grid_a) * grid_s.spacing();

    const MatrixXc ddag = coupling * coupling.adjoint();
    if (gamma_l > 0.0) {
        // Leading pair-mode occupation: the largest squared singular value of D.
        Eigen::SelfAdjointEigenSolver<MatrixXc> solver(0.5 * (ddag + ddag.adjoint()), Eigen::EigenvaluesOnly);
        const double top = solver.eigenvalues().maxCoeff();
        if (top > max_pair_probability)
            throw ConfigError("gain too high: leading pair-mode occupation " + std::to_string(top) + " exceeds " +
                              std::to_string(max_pair_probability));
    }

    const auto map = bogoliubov_map(coupling, AlphaTreatment::exact);
    SpoolMoments spool;
    spool.fwm_stokes = ddag.conjugate();
    spool.fwm_antistokes = coupling.adjoint() * coupling;
    spool.anomalous = map.alpha * coupling;
    spool.raman_stokes = raman_moments(pump, params, grid_s, Band::stokes);
    spool.raman_antistokes = raman_moments(pump, params, grid_a, Band::antistokes);

    GaussianMoments out;
    out.stokes_grid = grid_s;
    out.antistokes_grid = grid_a;
    out.spools = {spool, spool};
    return out;
}

double pair_production_probability(const GaussianMoments& moments, const FilterProfile& band_filter) {
    const auto& n = moments.spool(Spool::right).fwm_stokes;
    if (band_filter.amplitude.size() != n.rows())
        throw ConfigError("band filter does not match the Stokes grid");
    double p = 0.0;
    for (Eigen::Index m = 0; m < n.rows(); ++m)
        p += std::norm(band_filter.amplitude[m]) * n(m, m).real();
    return p;
}

double pair_probability_for_gain(const PumpPulse& pump, double gamma_l, const FrequencyGrid& grid_s,
                                 const FrequencyGrid& grid_a, const FilterProfile& band_filter) {
    const MatrixXc d = fwm_joint_amplitude(pump, gamma_l, grid_s, grid_a) * grid_s.spacing();
    if (band_filter.amplitude.size() != d.rows())
        throw ConfigError("band filter does not match the Stokes grid");
    return (band_filter.amplitude.cwiseAbs2().array() * d.rowwise().squaredNorm().array()).sum();
}

double calibrate_gain(double target, const PumpPulse& pump, const FrequencyGrid& grid_s, const FrequencyGrid& grid_a,
                      const FilterProfile& band_filter) {
    if (!(target >= 0.0) || target >= max_pair_probability)
        throw ConfigError("target pair probability must lie in [0, 0.2)");
    if (target == 0.0)
        return 0.0;
    // The unit-gain forward model is cached; p scales as gammaL^2 but the
    // root is still bracketed and bisected.
    const double unit = pair_probability_for_gain(pump, 1.0, grid_s, grid_a, band_filter);
    if (!(unit > 0.0))
        throw ConfigError("filtered band receives no pair emission; cannot calibrate");
    auto prob = [&](double g) { return unit * g * g; };
    double lo = 0.0;
    double hi = 1.0;
    while (prob(hi) < target)
        hi *= 2.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (prob(mid) < target)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-9 * hi)
            break;
    }
    const double g = 0.5 * (lo + hi);
    if (std::abs(prob(g) - target) > 1e-6 * target)
        throw NumericalError("gain calibration did not converge");
    return g;
}

} // namespace smf

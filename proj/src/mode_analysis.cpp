#include "smf/mode_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace smf {

namespace {

double sinc(double x) {
    if (std::abs(x) < 1e-8)
        return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
}

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    if (it == xs.begin())
        return ys.front();
    if (it == xs.end())
        return ys.back();
    const std::size_t i = static_cast<std::size_t>(it - xs.begin());
    const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return ys[i - 1] + t * (ys[i] - ys[i - 1]);
}

} // namespace

TransmissionTable parse_transmission_table(const std::string& text, const std::string& source) {
    std::vector<std::pair<double, double>> rows;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        double nm = 0.0;
        double db = 0.0;
        if (!(ls >> nm))
            continue;
        std::string rest;
        if (!(ls >> db) || (ls >> rest))
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'wavelength_nm transmission_dB'");
        if (!(nm > 0.0))
            throw ConfigError(source + ":" + std::to_string(lineno) + ": wavelength must be positive");
        rows.emplace_back(wavelength_nm_to_angular(nm), db);
    }
    if (rows.size() < 2)
        throw ConfigError(source + ": transmission table needs at least two rows");
    std::sort(rows.begin(), rows.end());
    TransmissionTable table;
    table.source = source;
    for (const auto& [w, db] : rows) {
        if (!table.omega.empty() && w == table.omega.back())
            throw ConfigError(source + ": duplicate wavelength");
        table.omega.push_back(w);
        table.loss_db.push_back(db);
    }
    return table;
}

TransmissionTable load_transmission_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open spectrum file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_transmission_table(buffer.str(), path.string());
}

FilterProfile make_profile(const FilterSpec& spec, const FrequencyGrid& grid) {
    FilterProfile profile{grid, VectorXc::Zero(static_cast<Eigen::Index>(grid.size())), spec.kind, spec.width};
    const double half_step = 1e-9 * grid.spacing();
    switch (spec.kind) {
    case ProfileKind::rectangular: {
        if (!(spec.width > 0.0))
            throw ConfigError("rectangular filter bandwidth must be positive");
        for (std::size_t m = 0; m < grid.size(); ++m) {
            const double x = grid.offset(m) - spec.center_offset;
            profile.amplitude[m] = std::abs(x) <= 0.5 * spec.width + half_step ? 1.0 : 0.0;
        }
        break;
    }
    case ProfileKind::gaussian: {
        if (!(spec.width > 0.0))
            throw ConfigError("gaussian filter FWHM must be positive");
        // |h|^2 = exp(-4 ln2 x^2 / FWHM^2)
        const double a = 2.0 * std::log(2.0) / (spec.width * spec.width);
        for (std::size_t m = 0; m < grid.size(); ++m) {
            const double x = grid.offset(m) - spec.center_offset;
            profile.amplitude[m] = std::exp(-a * x * x);
        }
        break;
    }
    case ProfileKind::tabulated: {
        if (spec.stages.empty())
            throw ConfigError("tabulated filter needs at least one spectrum stage");
        Eigen::VectorXd db = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
        for (const auto& stage : spec.stages) {
            if (grid.front() < stage.omega.front() || grid.back() > stage.omega.back())
                throw ConfigError("spectrum " + stage.source + " does not cover the frequency grid");
            for (std::size_t m = 0; m < grid.size(); ++m)
                db[m] += interpolate(stage.omega, stage.loss_db, grid.point(m));
        }
        if (!spec.absolute)
            db.array() -= db.maxCoeff();
        for (std::size_t m = 0; m < grid.size(); ++m)
            profile.amplitude[m] = std::pow(10.0, db[m] / 20.0);
        if (profile.amplitude.cwiseAbs().maxCoeff() > 1.0 + 1e-12)
            throw ConfigError("tabulated filter has transmission above 0 dB");
        break;
    }
    }
    return profile;
}

GateProfile GateProfile::rectangular(double duration) {
    GateProfile g;
    g.kind = ProfileKind::rectangular;
    g.duration = duration;
    return g;
}

GateProfile GateProfile::gaussian(double fwhm) {
    GateProfile g;
    g.kind = ProfileKind::gaussian;
    g.duration = fwhm;
    return g;
}

GateProfile GateProfile::tabulated(std::vector<double> times, std::vector<double> amplitudes) {
    if (times.size() != amplitudes.size() || times.size() < 2)
        throw ConfigError("tabulated gate needs matching time/amplitude samples (at least 2)");
    if (!std::is_sorted(times.begin(), times.end()))
        throw ConfigError("tabulated gate times must be ascending");
    for (double a : amplitudes)
        if (std::abs(a) > 1.0)
            throw ConfigError("gate amplitude exceeds 1");
    GateProfile g;
    g.kind = ProfileKind::tabulated;
    g.duration = times.back() - times.front();
    g.times = std::move(times);
    g.amplitudes = std::move(amplitudes);
    return g;
}

cplx GateProfile::transform(double delta) const {
    switch (kind) {
    case ProfileKind::rectangular:
        return duration * sinc(0.5 * delta * duration);
    case ProfileKind::gaussian: {
        const double a = 4.0 * std::log(2.0) / (duration * duration);
        return std::sqrt(constants::pi / a) * std::exp(-delta * delta / (4.0 * a));
    }
    case ProfileKind::tabulated: {
        constexpr int samples = 4096;
        const double t0 = times.front();
        const double dt = duration / (samples - 1);
        cplx sum = 0.0;
        for (int i = 0; i < samples; ++i) {
            const double t = t0 + i * dt;
            const double f = interpolate(times, amplitudes, t);
            const double wgt = (i == 0 || i == samples - 1) ? 0.5 : 1.0;
            sum += wgt * f * f * std::polar(1.0, delta * t);
        }
        return sum * dt;
    }
    }
    return 0.0;
}

double GateProfile::energy() const { return transform(0.0).real(); }

KernelMatrix build_kernel(const FilterProfile& filter, const GateProfile& gate) {
    if (!(gate.duration > 0.0))
        throw ConfigError("gate duration must be positive");
    const auto& grid = filter.grid;
    const auto n = static_cast<Eigen::Index>(grid.size());
    const double dw = grid.spacing();
    // F depends only on m - n on a uniform grid.
    std::vector<cplx> f(static_cast<std::size_t>(2 * n - 1));
    for (Eigen::Index d = -(n - 1); d <= n - 1; ++d)
        f[static_cast<std::size_t>(d + n - 1)] = gate.transform(static_cast<double>(d) * dw);
    MatrixXc k(n, n);
    const auto& h = filter.amplitude;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            k(i, j) = std::conj(h[i]) * h[j] * f[static_cast<std::size_t>(i - j + n - 1)];
    MatrixXc sym = 0.5 * (k + k.adjoint());
    for (Eigen::Index i = 0; i < n; ++i)
        sym(i, i) = sym(i, i).real();
    return {grid, std::move(sym)};
}

VectorXc ModeBasis::discrete_mode(std::size_t j) const {
    return eigenmodes.col(static_cast<Eigen::Index>(j)) * std::sqrt(grid.spacing() / constants::two_pi);
}

ModeBasis ModeBasis::truncated(double cutoff, std::size_t max_modes) const {
    std::size_t keep = 0;
    while (keep < size() && keep < max_modes && eigenvalues[static_cast<Eigen::Index>(keep)] >= cutoff)
        ++keep;
    const auto k = static_cast<Eigen::Index>(keep);
    return {grid, eigenvalues.head(k), eigenmodes.leftCols(k)};
}

ModeBasis schmidt_decompose(const KernelMatrix& kernel) {
    const auto& grid = kernel.grid;
    const auto n = static_cast<Eigen::Index>(grid.size());
    if (kernel.entries.rows() != n || kernel.entries.cols() != n)
        throw ConfigError("kernel size does not match its grid");
    const double dw = grid.spacing();

    // Rows with a zero diagonal are identically zero for a PSD kernel; they
    // carry eigenvalue 0 with unit-vector eigenmodes, so only the support is
    // diagonalized.
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < n; ++i)
        if (kernel.entries(i, i).real() > 0.0)
            support.push_back(i);
    const auto s = static_cast<Eigen::Index>(support.size());

    Eigen::VectorXd values = Eigen::VectorXd::Zero(n);
    MatrixXc vectors = MatrixXc::Zero(n, n);
    if (s > 0) {
        MatrixXc sub(s, s);
        for (Eigen::Index j = 0; j < s; ++j)
            for (Eigen::Index i = 0; i < s; ++i)
                sub(i, j) = kernel.entries(support[i], support[j]) * (dw / constants::two_pi);
        Eigen::SelfAdjointEigenSolver<MatrixXc> solver(sub);
        if (solver.info() != Eigen::Success)
            throw NumericalError("Schmidt eigensolver failed");
        // Eigen sorts ascending; emit descending.
        for (Eigen::Index j = 0; j < s; ++j) {
            const Eigen::Index src = s - 1 - j;
            values[j] = solver.eigenvalues()[src];
            for (Eigen::Index i = 0; i < s; ++i)
                vectors(support[i], j) = solver.eigenvectors()(i, src);
        }
    }
    Eigen::Index col = s;
    for (Eigen::Index i = 0; i < n; ++i)
        if (kernel.entries(i, i).real() <= 0.0)
            vectors(i, col++) = 1.0;

    if (s > 0 && values[0] > 1.0 + 1e-6)
        throw NumericalError("Schmidt eigenvalue " + std::to_string(values[0]) +
                             " exceeds 1: filter or gate amplitude above 1, or grid too coarse");

    const double scale = std::sqrt(constants::two_pi / dw);
    MatrixXc modes(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (values[j] < eigenvalue_floor)
            values[j] = 0.0;
        // phi_j = conj(v_j) scaled; phase fixed so the largest sample is real positive.
        VectorXc phi = vectors.col(j).conjugate() * scale;
        const double peak = phi.cwiseAbs().maxCoeff();
        Eigen::Index at = 0;
        while (std::abs(phi[at]) < peak * (1.0 - 1e-9))
            ++at;
        phi *= std::conj(phi[at]) / std::abs(phi[at]);
        phi[at] = std::abs(phi[at]);
        modes.col(j) = phi;
    }
    return {grid, std::move(values), std::move(modes)};
}

double effective_c(double bandwidth, double duration) {
    if (bandwidth < 0.0 || duration < 0.0)
        throw ConfigError("bandwidth and duration must be non-negative");
    return bandwidth * duration / 4.0;
}

ModeBasis rect_rect_basis(double c, std::size_t n_points) {
    if (!(c > 0.0))
        throw ConfigError("c must be positive");
    const double bandwidth = 4.0 * c; // T = 1 s
    const auto grid = FrequencyGrid::band_aligned(0.0, bandwidth, n_points);
    FilterSpec spec;
    spec.kind = ProfileKind::rectangular;
    spec.width = bandwidth;
    return schmidt_decompose(build_kernel(make_profile(spec, grid), GateProfile::rectangular(1.0)));
}

std::vector<EigenvalueRow> eigenvalue_curve(const std::vector<double>& c_values, std::size_t n_modes,
                                            std::size_t n_points) {
    std::vector<EigenvalueRow> rows;
    rows.reserve(c_values.size());
    for (double c : c_values) {
        if (c < 0.0 || !std::isfinite(c))
            throw ConfigError("c values must be non-negative");
        EigenvalueRow row{c, std::vector<double>(n_modes, 0.0)};
        // c = 0 passes nothing; all eigenvalues vanish.
        if (c > 0.0) {
            const auto basis = rect_rect_basis(c, n_points);
            for (std::size_t j = 0; j < n_modes && j < basis.size(); ++j)
                row.chi[j] = basis.eigenvalues[static_cast<Eigen::Index>(j)];
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace smf

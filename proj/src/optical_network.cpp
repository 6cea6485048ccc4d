#include "smf/optical_network.hpp"

#include <cmath>

namespace smf {

char detector_name(Detector d) { return static_cast<char>('A' + static_cast<int>(d)); }

void DetectorModel::validate() const {
    if (!(efficiency >= 0.0 && efficiency <= 1.0))
        throw ConfigError(std::string("detector ") + detector_name(name) + " efficiency must lie in [0, 1]");
    if (!(dark_mean >= 0.0))
        throw ConfigError(std::string("detector ") + detector_name(name) + " dark mean must be non-negative");
    for (Eigen::Index j = 0; j < basis.eigenvalues.size(); ++j) {
        const double w = basis.eigenvalues[j];
        if (w < -1e-9 || w > 1.0 + 1e-6 || (j > 0 && w > basis.eigenvalues[j - 1] + 1e-12))
            throw ConfigError("detector mode weights must be descending within [0, 1]");
    }
}

ModeBasis retain_modes(const ModeBasis& basis, double cutoff, std::size_t max_modes) {
    return basis.truncated(cutoff, max_modes);
}

std::vector<Eigen::Index> DetectionMoments::modes_of(Detector d) const {
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < modes.size(); ++i)
        if (modes[i].detector == d)
            out.push_back(static_cast<Eigen::Index>(i));
    return out;
}

namespace {

MatrixXc unit_modes(const ModeBasis& basis) {
    MatrixXc u(basis.eigenmodes.rows(), basis.eigenmodes.cols());
    for (std::size_t j = 0; j < basis.size(); ++j)
        u.col(static_cast<Eigen::Index>(j)) = basis.discrete_mode(j);
    return u;
}

void require_grid(const ModeBasis& basis, const FrequencyGrid& grid, const char* what) {
    if (basis.grid.size() != grid.size() || !basis.grid.compatible_with(grid) ||
        std::abs(basis.grid.center() - grid.center()) > 1e-6 * grid.spacing())
        throw ConfigError(std::string(what) + " basis grid does not match the moments grid");
}

} // namespace

DetectionMoments detection_mode_projection(const GaussianMoments& moments, const ArmBases& bases, double tau) {
    require_grid(bases.signal, moments.stokes_grid, "signal");
    require_grid(bases.idler_right, moments.antistokes_grid, "idler (C)");
    require_grid(bases.idler_left, moments.antistokes_grid, "idler (D)");

    const auto ns = static_cast<Eigen::Index>(moments.stokes_grid.size());
    const auto ka = static_cast<Eigen::Index>(bases.signal.size());
    const auto kc = static_cast<Eigen::Index>(bases.idler_right.size());
    const auto kd = static_cast<Eigen::Index>(bases.idler_left.size());
    const Eigen::Index total = 2 * ka + kc + kd;

    DetectionMoments out;
    out.tau = tau;
    for (Eigen::Index j = 0; j < ka; ++j)
        out.modes.push_back({Detector::A, static_cast<std::size_t>(j)});
    for (Eigen::Index j = 0; j < ka; ++j)
        out.modes.push_back({Detector::B, static_cast<std::size_t>(j)});
    for (Eigen::Index j = 0; j < kc; ++j)
        out.modes.push_back({Detector::C, static_cast<std::size_t>(j)});
    for (Eigen::Index j = 0; j < kd; ++j)
        out.modes.push_back({Detector::D, static_cast<std::size_t>(j)});

    const MatrixXc u = unit_modes(bases.signal);
    VectorXc phase(ns);
    for (Eigen::Index m = 0; m < ns; ++m)
        phase[m] = std::polar(1.0, 0.5 * tau * moments.stokes_grid.offset(static_cast<std::size_t>(m)));
    const double r = 1.0 / std::sqrt(2.0);

    // c_j = sum_m W[m, j] a_m, so <c^dag c> = W^H N W and <c c> = W^T M W.
    // Only the A/B, C and D column blocks of W are nonzero.
    const MatrixXc ur = phase.asDiagonal() * u * r;
    const MatrixXc ul = phase.conjugate().asDiagonal() * u * r;
    const MatrixXc uc = unit_modes(bases.idler_right);
    const MatrixXc ud = unit_modes(bases.idler_left);
    const auto& right = moments.spool(Spool::right);
    const auto& left = moments.spool(Spool::left);

    const MatrixXc xr = ur.adjoint() * right.normal_stokes() * ur;
    const MatrixXc xl = ul.adjoint() * left.normal_stokes() * ul;
    MatrixXc n = MatrixXc::Zero(total, total);
    n.block(0, 0, ka, ka) = xr + xl;
    n.block(0, ka, ka, ka) = xr - xl;
    n.block(ka, 0, ka, ka) = xr - xl;
    n.block(ka, ka, ka, ka) = xr + xl;
    n.block(2 * ka, 2 * ka, kc, kc) = uc.adjoint() * right.normal_antistokes() * uc;
    n.block(2 * ka + kc, 2 * ka + kc, kd, kd) = ud.adjoint() * left.normal_antistokes() * ud;

    const MatrixXc zr = ur.transpose() * right.anomalous * uc;
    const MatrixXc zl = ul.transpose() * left.anomalous * ud;
    MatrixXc half = MatrixXc::Zero(total, total);
    half.block(0, 2 * ka, ka, kc) = zr;
    half.block(ka, 2 * ka, ka, kc) = zr;
    half.block(0, 2 * ka + kc, ka, kd) = zl;
    half.block(ka, 2 * ka + kc, ka, kd) = -zl;
    MatrixXc m = half + half.transpose();
    out.normal = 0.5 * (n + n.adjoint());
    out.anomalous = 0.5 * (m + m.transpose());
    return out;
}

double power_fwhm(const FrequencyGrid& grid, const Eigen::VectorXd& power) {
    const Eigen::Index n = power.size();
    Eigen::Index peak = 0;
    const double top = power.maxCoeff(&peak);
    if (!(top > 0.0))
        return 0.0;
    const double half = 0.5 * top;
    auto crossing = [&](Eigen::Index from, int dir) {
        Eigen::Index i = from;
        while (i + dir >= 0 && i + dir < n && power[i + dir] >= half)
            i += dir;
        const Eigen::Index j = i + dir;
        if (j < 0 || j >= n)
            return grid.offset(static_cast<std::size_t>(i));
        // Linear interpolation between the last sample above and first below.
        const double t = (power[i] - half) / (power[i] - power[j]);
        return grid.offset(static_cast<std::size_t>(i)) + dir * t * grid.spacing();
    };
    return crossing(peak, +1) - crossing(peak, -1);
}

double hom_dip_width_estimate(const FilterProfile& signal_filter, const FilterProfile& idler_filter,
                              const PumpPulse& pump) {
    const double bs = power_fwhm(signal_filter.grid, signal_filter.power());
    const double bi = power_fwhm(idler_filter.grid, idler_filter.power());
    // Width of |Phi|^2 from the pump autoconvolution, on a grid of pump-sum offsets.
    const auto np = static_cast<Eigen::Index>(pump.grid.size());
    Eigen::VectorXd phi(2 * np - 1);
    for (Eigen::Index s = 0; s < 2 * np - 1; ++s) {
        cplx acc = 0.0;
        for (Eigen::Index k = std::max<Eigen::Index>(0, s - (np - 1)); k <= std::min(np - 1, s); ++k)
            acc += pump.amplitude[k] * pump.amplitude[s - k];
        phi[s] = std::norm(acc);
    }
    const auto sum_grid = FrequencyGrid::with_spacing(0.0, pump.grid.spacing(), static_cast<std::size_t>(2 * np - 1));
    const double bp = power_fwhm(sum_grid, phi);
    const double bandwidth = std::min(bs, bi + bp);
    if (!(bandwidth > 0.0))
        throw ConfigError("zero signal bandwidth: dip width undefined");
    return constants::two_pi / bandwidth;
}

} // namespace smf

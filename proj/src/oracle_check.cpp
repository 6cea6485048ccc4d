#include "smf/oracle_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "smf/detection_engine.hpp"

namespace smf {

namespace {

MatrixXc haar_unitary(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    MatrixXc z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index j = 0; j < z.cols(); ++j)
            z(i, j) = cplx(normal(rng), normal(rng));
    Eigen::HouseholderQR<MatrixXc> qr(z);
    MatrixXc q = qr.householderQ();
    const MatrixXc r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < q.cols(); ++j)
        q.col(j) *= r(j, j) / std::abs(r(j, j));
    return q;
}

} // namespace

OracleState random_gaussian_state(std::uint64_t seed, std::size_t max_modes) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit;
    std::uniform_int_distribution<std::size_t> n_dist(1, max_modes);
    OracleState s;
    s.n_modes = n_dist(rng);
    std::vector<std::size_t> free(s.n_modes);
    for (std::size_t i = 0; i < s.n_modes; ++i)
        free[i] = i;
    std::shuffle(free.begin(), free.end(), rng);
    while (!free.empty()) {
        const double pick = unit(rng);
        const double phase = constants::two_pi * unit(rng);
        if (free.size() >= 2 && pick < 0.4) {
            s.components.push_back(OracleComponent::two_mode_squeezed(free[0], free[1], 0.6 * unit(rng), phase));
            free.erase(free.begin(), free.begin() + 2);
        } else if (pick < 0.7) {
            s.components.push_back(OracleComponent::squeezed(free[0], 0.5 * unit(rng), phase));
            free.erase(free.begin());
        } else {
            s.components.push_back(OracleComponent::thermal(free[0], 0.5 * unit(rng)));
            free.erase(free.begin());
        }
    }
    s.unitary = haar_unitary(s.n_modes, rng);
    return s;
}

OracleCheckReport run_oracle_check(std::size_t n_states, std::uint64_t seed) {
    OracleCheckReport report;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit;
    for (std::size_t k = 0; k < n_states; ++k) {
        const auto state = random_gaussian_state(rng());
        const auto [normal, anomalous] = oracle_gaussian_moments(state);
        const auto dist = fock_photon_distribution(state);
        const auto n = static_cast<Eigen::Index>(state.n_modes);
        Eigen::VectorXd w(n);
        for (Eigen::Index i = 0; i < n; ++i)
            w[i] = unit(rng);
        for (unsigned subset = 1; subset < (1u << n); ++subset) {
            Eigen::VectorXd ws = Eigen::VectorXd::Zero(n);
            for (Eigen::Index i = 0; i < n; ++i)
                if (subset & (1u << i))
                    ws[i] = w[i];
            const double g = gaussian_no_click(normal, anomalous, ws);
            const double f = fock_oracle_expectation(dist, ws);
            report.max_deviation = std::max(report.max_deviation, std::abs(g - f));
            ++report.comparisons;
        }
        ++report.states;
    }
    for (int k = 0; k < 20; ++k) {
        const double mean = 5.0 * unit(rng);
        const double w = unit(rng);
        MatrixXc normal(1, 1);
        normal(0, 0) = mean;
        const MatrixXc anomalous = MatrixXc::Zero(1, 1);
        const double g = gaussian_no_click(normal, anomalous, Eigen::VectorXd::Constant(1, w));
        report.thermal_deviation = std::max(report.thermal_deviation, std::abs(g - 1.0 / (1.0 + w * mean)));
    }
    return report;
}

} // namespace smf

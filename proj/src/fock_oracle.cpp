#include "smf/fock_oracle.hpp"

#include <cmath>
#include <cstdint>
#include <map>

namespace smf {

OracleComponent OracleComponent::thermal(std::size_t mode, double mean) {
    OracleComponent c;
    c.kind = Kind::thermal;
    c.mode = mode;
    c.mean = mean;
    return c;
}

OracleComponent OracleComponent::squeezed(std::size_t mode, double r, double phase) {
    OracleComponent c;
    c.kind = Kind::squeezed;
    c.mode = mode;
    c.r = r;
    c.phase = phase;
    return c;
}

OracleComponent OracleComponent::two_mode_squeezed(std::size_t a, std::size_t b, double r, double phase) {
    OracleComponent c;
    c.kind = Kind::two_mode_squeezed;
    c.mode = a;
    c.partner = b;
    c.r = r;
    c.phase = phase;
    return c;
}

OracleComponent OracleComponent::fock(std::size_t mode, int n) {
    OracleComponent c;
    c.kind = Kind::fock;
    c.mode = mode;
    c.photons = n;
    return c;
}

void OracleState::validate() const {
    if (n_modes == 0 || n_modes > oracle_max_modes)
        throw ConfigError("oracle states have 1 to 4 modes");
    std::vector<int> used(n_modes, 0);
    for (const auto& c : components) {
        if (c.mode >= n_modes)
            throw ConfigError("oracle component mode out of range");
        ++used[c.mode];
        if (c.kind == OracleComponent::Kind::two_mode_squeezed) {
            if (c.partner >= n_modes || c.partner == c.mode)
                throw ConfigError("two-mode squeezer needs two distinct modes");
            ++used[c.partner];
        }
        if (c.mean < 0.0 || c.r < 0.0 || c.photons < 0)
            throw ConfigError("oracle component parameters must be non-negative");
    }
    for (int u : used)
        if (u > 1)
            throw ConfigError("oracle components must act on disjoint modes");
    if (unitary.size() != 0) {
        const auto n = static_cast<Eigen::Index>(n_modes);
        if (unitary.rows() != n || unitary.cols() != n)
            throw ConfigError("oracle unitary has the wrong size");
        if ((unitary * unitary.adjoint() - MatrixXc::Identity(n, n)).norm() > 1e-10)
            throw ConfigError("oracle mode transformation is not unitary");
    }
}

namespace {

using Occupation = std::vector<int>;

// States of fixed total photon number, indexed through a dense table over the
// occupations of all modes but the last.
struct Sector {
    std::vector<Occupation> states;
    std::vector<Eigen::Index> table;
    int base = 1;

    std::size_t key(const Occupation& o) const {
        std::size_t k = 0;
        for (std::size_t i = 0; i + 1 < o.size(); ++i)
            k = k * static_cast<std::size_t>(base) + static_cast<std::size_t>(o[i]);
        return k;
    }
    Eigen::Index index(const Occupation& o) const { return table[key(o)]; }
};

void enumerate(Occupation& cur, std::size_t mode, int left, Sector& out) {
    if (mode + 1 == cur.size()) {
        cur[mode] = left;
        out.table[out.key(cur)] = static_cast<Eigen::Index>(out.states.size());
        out.states.push_back(cur);
        return;
    }
    for (int n = left; n >= 0; --n) {
        cur[mode] = n;
        enumerate(cur, mode + 1, left - n, out);
    }
}

Sector make_sector(std::size_t k, int photons) {
    Sector s;
    s.base = photons + 1;
    std::size_t size = 1;
    for (std::size_t i = 0; i + 1 < k; ++i)
        size *= static_cast<std::size_t>(s.base);
    s.table.assign(size, -1);
    Occupation cur(k, 0);
    enumerate(cur, 0, photons, s);
    return s;
}

double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

// Single-mode squeezed vacuum amplitude on |n>.
cplx squeezed_amplitude(const OracleComponent& c, int n) {
    if (n % 2 != 0)
        return 0.0;
    const int h = n / 2;
    const double t = std::tanh(c.r);
    if (h > 0 && t == 0.0)
        return 0.0;
    const double mag = std::exp(0.5 * log_factorial(n) - h * std::log(2.0) - log_factorial(h) +
                                (h > 0 ? h * std::log(t) : 0.0)) /
                       std::sqrt(std::cosh(c.r));
    return std::polar(mag, h * c.phase);
}

cplx tmsv_amplitude(const OracleComponent& c, int n) {
    const double t = std::tanh(c.r);
    if (n > 0 && t == 0.0)
        return 0.0;
    return std::polar(std::pow(t, n) / std::cosh(c.r), n * c.phase);
}

double thermal_probability(double mean, int n) {
    if (mean == 0.0)
        return n == 0 ? 1.0 : 0.0;
    return std::pow(mean / (1.0 + mean), n) / (1.0 + mean);
}

// Total photon-number distribution of one component, up to max photons.
std::vector<double> component_number_distribution(const OracleComponent& c, int max) {
    std::vector<double> p(static_cast<std::size_t>(max) + 1, 0.0);
    for (int n = 0; n <= max; ++n) {
        switch (c.kind) {
        case OracleComponent::Kind::thermal:
            p[n] = thermal_probability(c.mean, n);
            break;
        case OracleComponent::Kind::squeezed:
            p[n] = std::norm(squeezed_amplitude(c, n));
            break;
        case OracleComponent::Kind::two_mode_squeezed:
            p[n] = n % 2 == 0 ? std::norm(tmsv_amplitude(c, n / 2)) : 0.0;
            break;
        case OracleComponent::Kind::fock:
            p[n] = n == c.photons ? 1.0 : 0.0;
            break;
        }
    }
    return p;
}

// Amplitude of a pure component on occupation a (thermal components excluded).
cplx component_amplitude(const OracleComponent& c, const Occupation& a) {
    switch (c.kind) {
    case OracleComponent::Kind::squeezed:
        return squeezed_amplitude(c, a[c.mode]);
    case OracleComponent::Kind::two_mode_squeezed:
        return a[c.mode] == a[c.partner] ? tmsv_amplitude(c, a[c.mode]) : cplx(0.0);
    case OracleComponent::Kind::fock:
        return a[c.mode] == c.photons ? cplx(1.0) : cplx(0.0);
    case OracleComponent::Kind::thermal:
        break;
    }
    return 1.0;
}

} // namespace

PhotonDistribution fock_photon_distribution(const OracleState& state, int max_photons) {
    state.validate();
    if (max_photons < 0 || max_photons > oracle_max_truncation)
        throw ConfigError("oracle truncation must lie in [0, 40]");
    const std::size_t k = state.n_modes;
    const auto kk = static_cast<Eigen::Index>(k);
    const MatrixXc u = state.unitary.size() == 0 ? MatrixXc::Identity(kk, kk) : state.unitary;

    // Total input photon number distribution; passive optics conserve it, so
    // truncating on it is exact sector by sector.
    std::vector<double> total(static_cast<std::size_t>(max_photons) + 1, 0.0);
    total[0] = 1.0;
    for (const auto& c : state.components) {
        const auto pc = component_number_distribution(c, max_photons);
        std::vector<double> next(total.size(), 0.0);
        for (std::size_t i = 0; i < total.size(); ++i)
            for (std::size_t j = 0; i + j < total.size(); ++j)
                next[i + j] += total[i] * pc[j];
        total = std::move(next);
    }
    PhotonDistribution out;
    double running = 0.0;
    int cut = -1;
    for (int n = 0; n <= max_photons; ++n) {
        running += total[static_cast<std::size_t>(n)];
        if (running >= 1.0 - 1e-12) {
            cut = n;
            break;
        }
    }
    if (cut < 0) {
        if (running < 1.0 - 1e-9)
            throw NumericalError("Fock truncation at " + std::to_string(max_photons) + " photons keeps only " +
                                 std::to_string(running) + " of the trace");
        cut = max_photons;
    }
    out.captured = running;
    out.truncation = cut;

    // rho is a thermal mixture of pure product states: group input states by
    // the occupations of the thermal modes, each group carrying one pure vector.
    std::vector<char> covered(k, 0);
    for (const auto& c : state.components) {
        covered[c.mode] = 1;
        if (c.kind == OracleComponent::Kind::two_mode_squeezed)
            covered[c.partner] = 1;
    }

    Sector prev = make_sector(k, 0);
    MatrixXc r_prev = MatrixXc::Identity(1, 1);
    for (int n = 0; n <= cut; ++n) {
        Sector cur = n == 0 ? prev : make_sector(k, n);
        const auto d = static_cast<Eigen::Index>(cur.states.size());
        MatrixXc r_cur;
        if (n == 0) {
            r_cur = r_prev;
        } else {
            // U|b> = (1/sqrt b_j) (sum_i U_ij a_i^dag) U|b - e_j>.
            r_cur = MatrixXc::Zero(d, d);
            Occupation o(k);
            for (Eigen::Index col = 0; col < d; ++col) {
                Occupation b = cur.states[static_cast<std::size_t>(col)];
                std::size_t j = 0;
                while (b[j] == 0)
                    ++j;
                const double norm = 1.0 / std::sqrt(static_cast<double>(b[j]));
                --b[j];
                const Eigen::Index pcol = prev.index(b);
                for (Eigen::Index row = 0; row < r_prev.rows(); ++row) {
                    const cplx v = r_prev(row, pcol) * norm;
                    if (v == cplx(0.0))
                        continue;
                    o = prev.states[static_cast<std::size_t>(row)];
                    for (std::size_t i = 0; i < k; ++i) {
                        const double f = std::sqrt(static_cast<double>(o[i] + 1));
                        ++o[i];
                        r_cur(cur.index(o), col) += f * u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * v;
                        --o[i];
                    }
                }
            }
        }

        std::map<std::vector<int>, VectorXc> groups;
        std::map<std::vector<int>, double> weights;
        for (Eigen::Index a = 0; a < d; ++a) {
            const auto& oa = cur.states[static_cast<std::size_t>(a)];
            bool vacuum_ok = true;
            for (std::size_t i = 0; i < k; ++i)
                if (!covered[i] && oa[i] != 0)
                    vacuum_ok = false;
            if (!vacuum_ok)
                continue;
            cplx amp = 1.0;
            for (const auto& c : state.components) {
                amp *= component_amplitude(c, oa);
                if (amp == cplx(0.0))
                    break;
            }
            if (amp == cplx(0.0))
                continue;
            std::vector<int> key;
            double p = 1.0;
            for (const auto& c : state.components)
                if (c.kind == OracleComponent::Kind::thermal) {
                    key.push_back(oa[c.mode]);
                    p *= thermal_probability(c.mean, oa[c.mode]);
                }
            if (p == 0.0)
                continue;
            auto it = groups.find(key);
            if (it == groups.end()) {
                it = groups.emplace(key, VectorXc::Zero(d)).first;
                weights[key] = p;
            }
            it->second[a] = amp;
        }
        Eigen::VectorXd diag = Eigen::VectorXd::Zero(d);
        for (const auto& [key, psi] : groups) {
            VectorXc out_psi = VectorXc::Zero(d);
            for (Eigen::Index a = 0; a < d; ++a)
                if (psi[a] != cplx(0.0))
                    out_psi += r_cur.col(a) * psi[a];
            diag += weights[key] * out_psi.cwiseAbs2();
        }
        for (Eigen::Index i = 0; i < d; ++i) {
            out.occupations.push_back(cur.states[static_cast<std::size_t>(i)]);
            out.probabilities.push_back(diag[i]);
        }
        prev = std::move(cur);
        r_prev = std::move(r_cur);
    }
    return out;
}

double fock_oracle_expectation(const PhotonDistribution& dist, const Eigen::VectorXd& weights) {
    double e = 0.0;
    for (std::size_t s = 0; s < dist.probabilities.size(); ++s) {
        double f = 1.0;
        for (std::size_t i = 0; i < dist.occupations[s].size(); ++i)
            f *= std::pow(1.0 - weights[static_cast<Eigen::Index>(i)], dist.occupations[s][i]);
        e += dist.probabilities[s] * f;
    }
    return e;
}

double fock_oracle_expectation(const OracleState& state, const Eigen::VectorXd& weights, int max_photons) {
    if (weights.size() != static_cast<Eigen::Index>(state.n_modes))
        throw ConfigError("one weight per oracle mode is required");
    for (Eigen::Index i = 0; i < weights.size(); ++i)
        if (weights[i] < 0.0 || weights[i] > 1.0)
            throw ConfigError("oracle weights must lie in [0, 1]");
    return fock_oracle_expectation(fock_photon_distribution(state, max_photons), weights);
}

double fock_oracle_click_probability(const OracleState& state, const Eigen::VectorXd& weights,
                                     const std::vector<int>& group_of_mode, const std::vector<double>& dark,
                                     unsigned subset, int max_photons) {
    if (group_of_mode.size() != state.n_modes || weights.size() != static_cast<Eigen::Index>(state.n_modes))
        throw ConfigError("one weight and group per oracle mode is required");
    const auto dist = fock_photon_distribution(state, max_photons);
    double p = 0.0;
    for (std::size_t s = 0; s < dist.probabilities.size(); ++s) {
        double term = dist.probabilities[s];
        for (std::size_t g = 0; g < dark.size(); ++g) {
            if (!((subset >> g) & 1u))
                continue;
            double silent = std::exp(-dark[g]);
            for (std::size_t i = 0; i < state.n_modes; ++i)
                if (group_of_mode[i] == static_cast<int>(g))
                    silent *= std::pow(1.0 - weights[static_cast<Eigen::Index>(i)], dist.occupations[s][i]);
            term *= 1.0 - silent;
        }
        p += term;
    }
    return p;
}

std::pair<MatrixXc, MatrixXc> oracle_gaussian_moments(const OracleState& state) {
    state.validate();
    const auto k = static_cast<Eigen::Index>(state.n_modes);
    MatrixXc n = MatrixXc::Zero(k, k);
    MatrixXc m = MatrixXc::Zero(k, k);
    for (const auto& c : state.components) {
        const auto i = static_cast<Eigen::Index>(c.mode);
        switch (c.kind) {
        case OracleComponent::Kind::thermal:
            n(i, i) = c.mean;
            break;
        case OracleComponent::Kind::squeezed:
            n(i, i) = std::sinh(c.r) * std::sinh(c.r);
            m(i, i) = std::polar(std::sinh(c.r) * std::cosh(c.r), c.phase);
            break;
        case OracleComponent::Kind::two_mode_squeezed: {
            const auto j = static_cast<Eigen::Index>(c.partner);
            n(i, i) = n(j, j) = std::sinh(c.r) * std::sinh(c.r);
            m(i, j) = m(j, i) = std::polar(std::sinh(c.r) * std::cosh(c.r), c.phase);
            break;
        }
        case OracleComponent::Kind::fock:
            throw ConfigError("Fock components have no Gaussian moments");
        }
    }
    if (state.unitary.size() == 0)
        return {n, m};
    const MatrixXc& u = state.unitary;
    return {u.conjugate() * n * u.transpose(), u * m * u.transpose()};
}

} // namespace smf

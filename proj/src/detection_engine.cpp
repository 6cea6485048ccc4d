#include "smf/detection_engine.hpp"

#include <bit>
#include <cmath>

namespace smf {

namespace {

constexpr double weight_floor = 1e-12;
constexpr double negative_clamp = 1e-12;

bool in_set(DetectorSet s, Detector d) { return (s >> static_cast<unsigned>(d)) & 1u; }

double clamp_probability(double p) {
    if (p < -negative_clamp)
        throw NumericalError("negative click probability " + std::to_string(p));
    if (p < 0.0)
        return 0.0;
    if (p > 1.0 + negative_clamp)
        throw NumericalError("click probability above 1: " + std::to_string(p));
    return std::min(p, 1.0);
}

} // namespace

DetectorSet detector_set(std::initializer_list<Detector> ds) {
    DetectorSet s = 0;
    for (Detector d : ds)
        s |= 1u << static_cast<unsigned>(d);
    return s;
}

ClickQuery make_query(const DetectionMoments& moments, const DetectorArray& detectors, DetectorSet subset) {
    ClickQuery q;
    q.subset = subset;
    q.weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(moments.modes.size()));
    for (std::size_t i = 0; i < moments.modes.size(); ++i) {
        const auto& label = moments.modes[i];
        const auto& det = detectors[static_cast<std::size_t>(label.detector)];
        if (label.index >= det.basis.size())
            throw ConfigError("detection mode outside the detector's retained basis");
        q.weights[static_cast<Eigen::Index>(i)] =
            det.efficiency * det.basis.eigenvalues[static_cast<Eigen::Index>(label.index)];
    }
    for (std::size_t d = 0; d < 4; ++d)
        q.dark[d] = detectors[d].dark_mean;
    return q;
}

double gaussian_no_click(const MatrixXc& normal, const MatrixXc& anomalous, const Eigen::VectorXd& weights) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        if (weights[i] > 1.0 + 1e-12)
            throw ConfigError("detection weight exceeds 1");
        if (weights[i] < 0.0)
            throw ConfigError("detection weight is negative");
        if (weights[i] > weight_floor)
            keep.push_back(i);
    }
    const auto k = static_cast<Eigen::Index>(keep.size());
    if (k == 0)
        return 1.0;
    // X = I + sqrt(Q) Sigma sqrt(Q), Sigma = [[N^T, M], [M^*, N]], Q = diag(w, w);
    // <:exp(-sum w n):> = det(X)^{-1/2}.
    MatrixXc x(2 * k, 2 * k);
    for (Eigen::Index b = 0; b < k; ++b) {
        for (Eigen::Index a = 0; a < k; ++a) {
            const Eigen::Index i = keep[a];
            const Eigen::Index j = keep[b];
            const double s = std::sqrt(weights[i] * weights[j]);
            x(a, b) = s * normal(j, i);
            x(a, k + b) = s * anomalous(i, j);
            x(k + a, b) = s * std::conj(anomalous(i, j));
            x(k + a, k + b) = s * normal(i, j);
        }
    }
    x.diagonal().array() += 1.0;
    MatrixXc h = 0.5 * (x + x.adjoint());
    Eigen::LLT<MatrixXc> llt(h);
    if (llt.info() != Eigen::Success)
        throw NumericalError("non-physical moments: click determinant is not positive definite");
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < 2 * k; ++i)
        logdet += 2.0 * std::log(llt.matrixLLT()(i, i).real());
    return std::exp(-0.5 * logdet);
}

double no_click_expectation(const DetectionMoments& moments, const ClickQuery& query) {
    if (query.subset == 0 || query.subset > 15u)
        throw ConfigError("click query needs a non-empty subset of A..D");
    if (query.weights.size() != static_cast<Eigen::Index>(moments.modes.size()))
        throw ConfigError("click weights must cover exactly the retained modes");
    Eigen::VectorXd w = Eigen::VectorXd::Zero(query.weights.size());
    double dark = 0.0;
    for (std::size_t i = 0; i < moments.modes.size(); ++i)
        if (in_set(query.subset, moments.modes[i].detector))
            w[static_cast<Eigen::Index>(i)] = query.weights[static_cast<Eigen::Index>(i)];
    for (unsigned d = 0; d < 4; ++d)
        if ((query.subset >> d) & 1u) {
            if (query.dark[d] < 0.0)
                throw ConfigError("dark mean must be non-negative");
            dark += query.dark[d];
        }
    return gaussian_no_click(moments.normal, moments.anomalous, w) * std::exp(-dark);
}

double inclusion_exclusion(const std::array<double, 16>& no_click, DetectorSet subset) {
    subset &= 15u;
    double p = 0.0;
    // Sum over R subset of S of (-1)^|R| E_R, with E_empty = 1.
    for (DetectorSet r = subset;; r = (r - 1) & subset) {
        const double e = r == 0 ? 1.0 : no_click[r];
        p += (std::popcount(r) % 2 == 0) ? e : -e;
        if (r == 0)
            break;
    }
    return clamp_probability(p);
}

ClickTable::ClickTable(const DetectionMoments& moments, const DetectorArray& detectors) {
    e_[0] = 1.0;
    const ClickQuery all = make_query(moments, detectors, 15u);
    for (DetectorSet s = 1; s < 16; ++s) {
        ClickQuery q = all;
        q.subset = s;
        e_[s] = no_click_expectation(moments, q);
    }
}

double ClickTable::coincidence(DetectorSet s) const { return inclusion_exclusion(e_, s); }

double ClickTable::singles(Detector d) const { return coincidence(detector_set({d})); }

CoincidenceResult coincidence_probability(const DetectionMoments& moments, const DetectorArray& detectors,
                                          DetectorSet subset) {
    if (subset == 0 || subset > 15u)
        throw ConfigError("coincidence subset must be a non-empty subset of A..D");
    std::array<double, 16> e{};
    e[0] = 1.0;
    const ClickQuery all = make_query(moments, detectors, subset);
    for (DetectorSet r = subset; r != 0; r = (r - 1) & subset) {
        ClickQuery q = all;
        q.subset = r;
        e[r] = no_click_expectation(moments, q);
    }
    return {inclusion_exclusion(e, subset), subset, moments.tau};
}

double singles_probability(const DetectionMoments& moments, const DetectorArray& detectors, Detector d) {
    return coincidence_probability(moments, detectors, detector_set({d})).probability;
}

double accidental_probability(const DetectionMoments& moments, const DetectorArray& detectors, Detector d1,
                              Detector d2) {
    if (d1 == d2)
        throw ConfigError("accidentals need two distinct detectors");
    return singles_probability(moments, detectors, d1) * singles_probability(moments, detectors, d2);
}

} // namespace smf

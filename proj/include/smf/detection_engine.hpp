#pragma once

#include <array>
#include <vector>

#include "smf/common.hpp"
#include "smf/optical_network.hpp"

namespace smf {

/// Bit i set means detector i (A=0 .. D=3) belongs to the subset.
using DetectorSet = unsigned;

DetectorSet detector_set(std::initializer_list<Detector> ds);

struct ClickQuery {
    DetectorSet subset = 0;
    Eigen::VectorXd weights;        // eta * chi per detection mode, in DetectionMoments order
    std::array<double, 4> dark{};   // mu per detector
};

using DetectorArray = std::array<DetectorModel, 4>;

ClickQuery make_query(const DetectionMoments& moments, const DetectorArray& detectors, DetectorSet subset);

/// <:exp(-sum_{M in S} n_M):> for a zero-mean Gaussian state, dark factors included.
double no_click_expectation(const DetectionMoments& moments, const ClickQuery& query);

/// Same, from raw moment matrices and per-mode weights (mode-level states).
double gaussian_no_click(const MatrixXc& normal, const MatrixXc& anomalous, const Eigen::VectorXd& weights);

struct CoincidenceResult {
    double probability = 0.0;
    DetectorSet subset = 0;
    double tau = 0.0;
};

/// Probability that every detector in S clicks, by inclusion-exclusion.
CoincidenceResult coincidence_probability(const DetectionMoments& moments, const DetectorArray& detectors,
                                          DetectorSet subset);

double singles_probability(const DetectionMoments& moments, const DetectorArray& detectors, Detector d);

/// Adjacent-slot accidental: product of the two singles.
double accidental_probability(const DetectionMoments& moments, const DetectorArray& detectors, Detector d1,
                              Detector d2);

/// No-click expectations for all 16 subsets, evaluated once.
class ClickTable {
public:
    ClickTable(const DetectionMoments& moments, const DetectorArray& detectors);
    double no_click(DetectorSet s) const { return e_[s & 15u]; }
    double coincidence(DetectorSet s) const;
    double singles(Detector d) const;

private:
    std::array<double, 16> e_{};
};

/// Inclusion-exclusion over a table of no-click expectations indexed by subset mask.
double inclusion_exclusion(const std::array<double, 16>& no_click, DetectorSet subset);

} // namespace smf

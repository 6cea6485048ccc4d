#pragma once

#include "smf/common.hpp"

namespace smf {

/// Uniform grid of angular frequencies; integrals are sum(g) * spacing().
class FrequencyGrid {
public:
    FrequencyGrid() = default;
    FrequencyGrid(double center, double span, std::size_t n_points);

    /// Grid of n_points around center whose spacing puts the edges of a
    /// band of the given width exactly halfway between two samples, so a
    /// rectangular band holds an integer number of points.
    static FrequencyGrid band_aligned(double center, double bandwidth, std::size_t n_points = 513,
                                      double span_factor = 4.0);

    /// Grid with a given spacing and point count, centered on center.
    static FrequencyGrid with_spacing(double center, double spacing, std::size_t n_points);

    double center() const { return center_; }
    double span() const { return span_; }
    std::size_t size() const { return n_; }
    double spacing() const { return span_ / static_cast<double>(n_ - 1); }

    /// Offset of point i from the center, in units of spacing (may be half-integer).
    double index_offset(std::size_t i) const { return static_cast<double>(i) - 0.5 * static_cast<double>(n_ - 1); }
    double offset(std::size_t i) const { return index_offset(i) * spacing(); }
    double point(std::size_t i) const { return center_ + offset(i); }
    double front() const { return point(0); }
    double back() const { return point(n_ - 1); }

    Eigen::VectorXd points() const;
    Eigen::VectorXd offsets() const;

    /// Same spacing to a relative tolerance.
    bool compatible_with(const FrequencyGrid& other, double rtol = 1e-9) const;
    bool operator==(const FrequencyGrid& other) const;

private:
    double center_ = 0.0;
    double span_ = 1.0;
    std::size_t n_ = 2;
};

} // namespace smf

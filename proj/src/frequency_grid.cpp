#include "smf/frequency_grid.hpp"

#include <cmath>

namespace smf {

FrequencyGrid::FrequencyGrid(double center, double span, std::size_t n_points)
    : center_(center), span_(span), n_(n_points) {
    if (n_points < 2)
        throw ConfigError("frequency grid needs at least 2 points");
    if (!(span > 0.0) || !std::isfinite(span))
        throw ConfigError("frequency grid span must be positive");
    if (!std::isfinite(center))
        throw ConfigError("frequency grid center must be finite");
}

FrequencyGrid FrequencyGrid::band_aligned(double center, double bandwidth, std::size_t n_points,
                                          double span_factor) {
    if (!(bandwidth > 0.0))
        throw ConfigError("band-aligned grid needs a positive bandwidth");
    if (n_points < 2)
        throw ConfigError("frequency grid needs at least 2 points");
    // Edges at +-k/2 spacings must sit between samples: k odd when the
    // center is a sample (n odd), k even otherwise.
    const double target = static_cast<double>(n_points - 1) / span_factor;
    long k = std::max(1L, std::lround(target));
    const bool want_odd = (n_points % 2) == 1;
    if ((k % 2 == 1) != want_odd) {
        k += (static_cast<double>(k) <= target) ? 1 : -1;
        if (k < 1)
            k += 2;
    }
    const double spacing = bandwidth / static_cast<double>(k);
    return FrequencyGrid(center, spacing * static_cast<double>(n_points - 1), n_points);
}

FrequencyGrid FrequencyGrid::with_spacing(double center, double spacing, std::size_t n_points) {
    if (!(spacing > 0.0))
        throw ConfigError("grid spacing must be positive");
    if (n_points < 2)
        throw ConfigError("frequency grid needs at least 2 points");
    return FrequencyGrid(center, spacing * static_cast<double>(n_points - 1), n_points);
}

Eigen::VectorXd FrequencyGrid::points() const {
    Eigen::VectorXd p(n_);
    for (std::size_t i = 0; i < n_; ++i)
        p[i] = point(i);
    return p;
}

Eigen::VectorXd FrequencyGrid::offsets() const {
    Eigen::VectorXd p(n_);
    for (std::size_t i = 0; i < n_; ++i)
        p[i] = offset(i);
    return p;
}

bool FrequencyGrid::compatible_with(const FrequencyGrid& other, double rtol) const {
    return std::abs(spacing() - other.spacing()) <= rtol * spacing();
}

bool FrequencyGrid::operator==(const FrequencyGrid& other) const {
    return n_ == other.n_ && center_ == other.center_ && span_ == other.span_;
}

} // namespace smf

#include "htsco/domain.hpp"
#include "htsco/errors.hpp"

#include <algorithm>
#include <cmath>

namespace htsco {

ConvexDomain ConvexDomain::ball(Vec center, double radius) {
    require(radius >= 0.0, "ball radius must be nonnegative");
    require(all_finite(center), "ball center must be finite");
    ConvexDomain d;
    d.kind_ = Kind::Ball;
    d.center_ = std::move(center);
    d.radius_ = radius;
    d.diameter_ = 2.0 * radius;
    return d;
}

ConvexDomain ConvexDomain::box(Vec lower, Vec upper) {
    require(lower.size() == upper.size(), "box bounds dimension mismatch");
    require(all_finite(lower) && all_finite(upper), "box bounds must be finite");
    for (std::size_t i = 0; i < lower.size(); ++i)
        require(lower[i] <= upper[i], "box lower bound exceeds upper bound");
    ConvexDomain d;
    d.kind_ = Kind::Box;
    d.diameter_ = dist(lower, upper);
    d.center_ = lower;
    for (std::size_t i = 0; i < lower.size(); ++i)
        d.center_[i] = 0.5 * (lower[i] + upper[i]);
    d.lower_ = std::move(lower);
    d.upper_ = std::move(upper);
    return d;
}

double ConvexDomain::radius() const {
    require(kind_ == Kind::Ball, "radius() is defined for ball domains only");
    return radius_;
}

Vec ConvexDomain::project(const Vec& x) const {
    require(x.size() == dim(), "projection dimension mismatch");
    require(all_finite(x), "cannot project a non-finite point");
    if (kind_ == Kind::Ball) {
        Vec diff = sub(x, center_);
        const double n = norm2(diff);
        // The hair of slack keeps projection exactly idempotent: a point
        // produced by the radial rescale can re-measure a few ulp outside.
        if (n <= radius_ * (1.0 + 1e-14)) return x;
        Vec out = center_;
        axpy_inplace(out, radius_ / n, diff);
        return out;
    }
    Vec out = x;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::clamp(out[i], lower_[i], upper_[i]);
    return out;
}

bool ConvexDomain::contains(const Vec& x, double tol) const {
    if (x.size() != dim()) return false;
    if (kind_ == Kind::Ball) return dist(x, center_) <= radius_ + tol;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] < lower_[i] - tol || x[i] > upper_[i] + tol) return false;
    return true;
}

Vec clip(const Vec& g, double C) {
    require(C >= 0.0, "clip threshold must be nonnegative");
    const double n = norm2(g);
    if (n <= C) return g;
    return scaled(g, C / n);
}

Vec clip_two_threshold(const Vec& g, double C, double Chat) {
    require(C >= 0.0 && Chat >= 0.0, "clip thresholds must be nonnegative");
    if (norm2(g) >= Chat) return clip(g, C);
    return g;
}

}  // namespace htsco

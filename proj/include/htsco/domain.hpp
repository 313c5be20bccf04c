#ifndef HTSCO_DOMAIN_HPP
#define HTSCO_DOMAIN_HPP

#include "htsco/vec.hpp"

#include <cstddef>

namespace htsco {

// Euclidean ball or axis-aligned box. Projection is the exact Euclidean
// projection (radial scaling for balls, coordinatewise clamp for boxes),
// which is nonexpansive and idempotent.
class ConvexDomain {
  public:
    enum class Kind { Ball, Box };

    static ConvexDomain ball(Vec center, double radius);
    static ConvexDomain box(Vec lower, Vec upper);

    Vec project(const Vec& x) const;
    bool contains(const Vec& x, double tol = 1e-9) const;

    Kind kind() const { return kind_; }
    std::size_t dim() const { return center_.size(); }
    double diameter() const { return diameter_; }
    double radius() const;  // ball only
    const Vec& center() const { return center_; }
    const Vec& lower() const { return lower_; }
    const Vec& upper() const { return upper_; }

    // Ball of the same dimension centered at `c` with radius `r`.
    static ConvexDomain ball_around(const Vec& c, double r) { return ball(c, r); }

  private:
    ConvexDomain() = default;
    Kind kind_ = Kind::Ball;
    Vec center_;
    Vec lower_, upper_;  // box bounds
    double radius_ = 0.0;
    double diameter_ = 0.0;
};

// Pi_C: radial projection onto the ball of radius C. Ties (||g|| == C)
// return g unchanged.
Vec clip(const Vec& g, double C);

// Pi_{C,Chat}: clip to C only when ||g|| >= Chat, otherwise pass through.
Vec clip_two_threshold(const Vec& g, double C, double Chat);

}  // namespace htsco

#endif

#ifndef HTSCO_VEC_HPP
#define HTSCO_VEC_HPP

#include <cmath>
#include <cstddef>
#include <vector>

namespace htsco {

using Vec = std::vector<double>;

inline Vec zeros(std::size_t d) { return Vec(d, 0.0); }

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec& add_inplace(Vec& a, const Vec& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

// a += c * b
inline Vec& axpy_inplace(Vec& a, double c, const Vec& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += c * b[i];
    return a;
}

inline Vec& scale_inplace(Vec& a, double c) {
    for (double& x : a) x *= c;
    return a;
}

inline Vec add(Vec a, const Vec& b) { return add_inplace(a, b); }

inline Vec sub(Vec a, const Vec& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    return a;
}

inline Vec scaled(Vec a, double c) { return scale_inplace(a, c); }

inline double dist(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline bool all_finite(const Vec& a) {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace htsco

#endif

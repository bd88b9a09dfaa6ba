#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace talbot::stats {

inline double mean(const std::vector<double>& v) {
    if (v.empty()) throw std::domain_error("mean of empty sample");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Unbiased sample standard deviation.
inline double stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

struct Interval {
    double low = 0.0;
    double high = 0.0;
};

// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054) {
    if (trials == 0) throw std::domain_error("wilson_interval with zero trials");
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {center - half, center + half};
}

// Upper chi-square quantile via the Wilson-Hilferty cube approximation,
// adequate for the large degrees of freedom used here.
inline double chi_square_quantile(double dof, double z_upper) {
    const double a = 2.0 / (9.0 * dof);
    const double c = 1.0 - a + z_upper * std::sqrt(a);
    return dof * c * c * c;
}

}  // namespace talbot::stats

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "anosov/error.hpp"

namespace anosov {

struct LineFit {
    double slope = 0;
    double intercept = 0;
    double stderr_slope = 0;
    std::size_t points = 0;
};

// Ordinary least squares y = a x + b with the standard error of a.
inline LineFit ols(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw InsufficientDataError("line fit needs at least two points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0)) throw InsufficientDataError("line fit needs distinct abscissae");
    LineFit f;
    f.points = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (n > 2) {
        double rss = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double r = y[i] - f.slope * x[i] - f.intercept;
            rss += r * r;
        }
        f.stderr_slope = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    }
    return f;
}

// Relative drift |a - b| / max(|a|, |b|).
inline double relative_drift(double a, double b) {
    double s = std::max(std::abs(a), std::abs(b));
    return s == 0 ? 0.0 : std::abs(a - b) / s;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    if (n < 2 || b.size() != n) return std::numeric_limits<double>::quiet_NaN();
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0 || sbb == 0) return saa == sbb ? 1.0 : 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace anosov

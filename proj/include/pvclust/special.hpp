#pragma once

#include <cmath>
#include <limits>

#include "pvclust/errors.hpp"

namespace pvclust {

// log Gamma; std::lgamma is correctly rounded enough for our use and is
// thread-safe for the positive arguments we feed it.
inline double log_gamma(double x) { return std::lgamma(x); }

namespace detail {

// Asymptotic-series coefficients for psi(x), |B_2n|/(2n) terms.
// Same expansion the classic Cephes implementation uses.
inline constexpr double kDigammaAsy[7] = {
    8.33333333333333333333e-2,  -2.10927960927960927961e-2,
    7.57575757575757575758e-3,  -4.16666666666666666667e-3,
    3.96825396825396825397e-3,  -8.33333333333333333333e-3,
    8.33333333333333333333e-2,
};

inline double polevl(double x, const double* coef, int n) {
    double ans = coef[0];
    for (int i = 1; i <= n; ++i) ans = ans * x + coef[i];
    return ans;
}

} // namespace detail

// Digamma psi(x) for x > 0: recurrence up to x >= 10, then the asymptotic
// expansion. Absolute error is well below 1e-13 over the range we use
// (concentration parameters from ~1e-3 up to ~1e6+).
inline double digamma(double x) {
    if (!(x > 0.0)) {
        throw DataError("digamma: argument must be positive");
    }
    double w = 0.0;
    while (x < 10.0) {
        w += 1.0 / x;
        x += 1.0;
    }
    double y = 0.0;
    if (x < 1.0e17) {
        const double z = 1.0 / (x * x);
        y = z * detail::polevl(z, detail::kDigammaAsy, 6);
    }
    return std::log(x) - 0.5 / x - y - w;
}

} // namespace pvclust

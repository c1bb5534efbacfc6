#include "mixent/special.hpp"

#include <cmath>
#include <stdexcept>

namespace mixent {

double digamma(double x) {
    if (!(x > 0.0)) throw std::runtime_error("digamma: requires x > 0");
    // Lift small arguments with psi(x) = psi(x+1) - 1/x, then use the
    // asymptotic series in 1/x^2 (Bernoulli-number coefficients).
    double result = 0.0;
    while (x < 6.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // psi(x) ~ ln x - 1/(2x) - 1/(12x^2) + 1/(120x^4) - 1/(252x^6)
    //          + 1/(240x^8) - 1/(132x^10) + 691/(32760x^12)
    double series = -1.0 / 12.0 + inv2 * (1.0 / 120.0 + inv2 * (-1.0 / 252.0 + inv2 * (1.0 / 240.0 + inv2 * (-1.0 / 132.0 + inv2 * (691.0 / 32760.0)))));
    result += std::log(x) - 0.5 * inv + inv2 * series;
    return result;
}

double unit_ball_log_volume(int d) {
    if (d <= 0) throw std::runtime_error("unit_ball_log_volume: d must be positive");
    // V_d = pi^{d/2} / Gamma(d/2 + 1)
    return 0.5 * d * std::log(M_PI) - std::lgamma(0.5 * d + 1.0);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::runtime_error("normal_quantile: p must be in (0,1)");
    // Acklam's rational approximation.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01,  -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double plow = 0.02425;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double chi_squared_critical(int k, double alpha) {
    if (k <= 0) throw std::runtime_error("chi_squared_critical: k must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::runtime_error("chi_squared_critical: alpha in (0,1)");
    const double z = normal_quantile(1.0 - alpha);
    const double t = 2.0 / (9.0 * k);
    const double u = 1.0 - t + z * std::sqrt(t);
    return k * u * u * u;
}

}  // namespace mixent

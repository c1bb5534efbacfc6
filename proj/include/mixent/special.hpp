#pragma once

namespace mixent {

// Digamma function, absolute error below 1e-10 for x >= 1 (checked in tests
// against the harmonic-number identity psi(n+1) = -gamma + H_n).
double digamma(double x);

// log of the volume of the unit ball in R^d.
double unit_ball_log_volume(int d);

// Standard normal quantile (inverse CDF), rational approximation with
// relative error below ~1.2e-9.
double normal_quantile(double p);

// Upper critical value of the chi-squared distribution with k degrees of
// freedom at tail probability alpha (Wilson-Hilferty cube approximation).
double chi_squared_critical(int k, double alpha);

}  // namespace mixent

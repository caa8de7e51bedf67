#pragma once

namespace aplm {

double normal_cdf(double x);

/// Standard normal quantile: Acklam's rational approximation refined with one
/// Halley step, accurate to well under 1e-9 on (0,1).
double normal_quantile(double p);

/// Chi-square with possibly fractional degrees of freedom, realized as
/// Gamma(shape = dof/2, scale = 2).
double chi_square_quantile(double p, double dof);
double chi_square_cdf(double x, double dof);
double chi_square_sf(double x, double dof);

}  // namespace aplm

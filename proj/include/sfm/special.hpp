#pragma once

// Scalar distribution functions used by the simulators and the copula code.
// Quantiles are computed by bracketed Newton iteration with a bisection
// fallback, to a relative tolerance of 1e-12 in x.

namespace sfm::special {

double normal_pdf(double x) noexcept;
double normal_cdf(double x) noexcept;
/// Upper tail 1 - Phi(x), accurate for large x.
double normal_sf(double x) noexcept;
/// Inverse of Phi (Wichura's AS 241, ~1e-16 relative). p must be in (0, 1).
double normal_quantile(double p);

/// Regularised lower / upper incomplete gamma P(a, x), Q(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);
/// Regularised incomplete beta I_x(a, b).
double ibeta(double a, double b, double x);

// Gamma(shape, rate): density rate^shape x^(shape-1) e^(-rate x) / Gamma(shape)
double gamma_cdf(double x, double shape, double rate);
double gamma_pdf(double x, double shape, double rate);
double gamma_quantile(double p, double shape, double rate);
/// x with P(X > x) = q; use for upper-tail probabilities close to 0.
double gamma_quantile_upper(double q, double shape, double rate);

double student_t_pdf(double x, double nu) noexcept;
double student_t_logpdf(double x, double nu) noexcept;
double student_t_cdf(double x, double nu);
double student_t_quantile(double p, double nu);

/// T_nu^{-1}(Phi(z)) without forming Phi(z) near 1.
double t_quantile_of_normal(double z, double nu);
/// Phi^{-1}(T_nu(x)) without forming T_nu(x) near 1.
double normal_score_of_t(double x, double nu);

/// Log density of the standard bivariate t with correlation rho.
double bivariate_t_logpdf(double x, double y, double rho, double nu) noexcept;
/// Log density of the bivariate t-copula at (u, v).
double t_copula_logpdf(double u, double v, double rho, double nu);

}  // namespace sfm::special

#pragma once

namespace rct {

/// Standard normal quantile Phi^{-1}(p) for p in (0, 1).
///
/// Wichura's AS241 (PPND16) rational approximation, relative accuracy
/// about 1e-16. Throws ParameterError outside (0, 1).
double normal_quantile(double p);

/// Standard normal CDF.
double normal_cdf(double x);

/// Two-sided critical value z such that P(|N(0,1)| > z) = alpha.
double wald_critical_value(double alpha);

}  // namespace rct

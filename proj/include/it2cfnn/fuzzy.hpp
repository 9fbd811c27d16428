#pragma once

// Scalar membership functions: the adaptive-shape generalized Gaussian and
// the interval type-2 set whose shape regulator is uncertain.

namespace it2cfnn::fuzzy {

/// Parameters of one uncertain-shape fuzzy set.
///
/// `beta` morphs the profile (small -> triangular-like, 1 -> Gaussian,
/// large -> trapezoidal-like). `delta` is the half-width of the interval
/// on beta^2 that opens the footprint of uncertainty.
struct ShapeParams {
  double m = 0.0;
  double sigma = 1.0;
  double beta = 1.0;
  double delta = 0.0;
};

/// Throws std::domain_error unless sigma > 0, delta >= 0, beta^2 - delta^2 > 0
/// and every field is finite.
void validate(const ShapeParams &p);

/// exp(-0.5 * base^exponent) with base >= 0 and exponent > 0. A zero base
/// yields exactly 1 (0^p = 0 for p > 0).
double generalized_gaussian(double squared_distance, double exponent);

/// Type-1 adaptive-shape membership exp(-0.5 * ((x - m) / sigma)^(2 beta^2)).
double mu_type1(double x, const ShapeParams &p);

/// Upper membership: exponent beta^2 + delta^2 inside |x - m| <= sigma,
/// beta^2 - delta^2 outside.
double umf(double x, const ShapeParams &p);

/// Lower membership: the mirror of umf with the two exponents swapped.
double lmf(double x, const ShapeParams &p);

/// Smallest |beta| kept after a parameter update.
inline constexpr double kMinBeta = 1e-6;

/// Relative margin keeping |delta| strictly below |beta|.
inline constexpr double kDeltaMargin = 1e-6;

/// Projects a (beta, delta) pair back into the admissible region
/// |beta| >= kMinBeta and |delta| <= |beta| (1 - kDeltaMargin). Signs are kept;
/// only squares enter the memberships.
void project_shape(double &beta, double &delta);

}  // namespace it2cfnn::fuzzy

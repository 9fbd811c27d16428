#include "it2cfnn/fuzzy.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace it2cfnn::fuzzy {

namespace {

struct Exponents {
  double inner;  // applies where |x - m| <= sigma
  double outer;
};

Exponents upper_exponents(const ShapeParams &p) {
  const double b2 = p.beta * p.beta;
  const double d2 = p.delta * p.delta;
  return {b2 + d2, b2 - d2};
}

double squared_ratio(double x, const ShapeParams &p) {
  const double u = (x - p.m) / p.sigma;
  return u * u;
}

void check_input(double x, const ShapeParams &p) {
  if (!std::isfinite(x)) {
    throw std::domain_error("membership evaluated at a non-finite point");
  }
  validate(p);
}

}  // namespace

void validate(const ShapeParams &p) {
  if (!std::isfinite(p.m) || !std::isfinite(p.sigma) || !std::isfinite(p.beta) || !std::isfinite(p.delta)) {
    throw std::domain_error("shape parameters must be finite");
  }
  if (!(p.sigma > 0.0)) {
    throw std::domain_error("sigma must be positive, got " + std::to_string(p.sigma));
  }
  if (p.delta < 0.0) {
    throw std::domain_error("delta must be non-negative, got " + std::to_string(p.delta));
  }
  if (!(p.beta * p.beta - p.delta * p.delta > 0.0)) {
    throw std::domain_error("beta^2 - delta^2 must be positive");
  }
}

double generalized_gaussian(double squared_distance, double exponent) {
  if (squared_distance == 0.0) {
    return 1.0;
  }
  return std::exp(-0.5 * std::pow(squared_distance, exponent));
}

double mu_type1(double x, const ShapeParams &p) {
  check_input(x, p);
  // ((x-m)/sigma)^(2 beta^2) == (((x-m)/sigma)^2)^(beta^2), defined for x < m too.
  return generalized_gaussian(squared_ratio(x, p), p.beta * p.beta);
}

double umf(double x, const ShapeParams &p) {
  check_input(x, p);
  const double u2 = squared_ratio(x, p);
  const Exponents e = upper_exponents(p);
  return generalized_gaussian(u2, u2 <= 1.0 ? e.inner : e.outer);
}

double lmf(double x, const ShapeParams &p) {
  check_input(x, p);
  const double u2 = squared_ratio(x, p);
  const Exponents e = upper_exponents(p);
  return generalized_gaussian(u2, u2 <= 1.0 ? e.outer : e.inner);
}

void project_shape(double &beta, double &delta) {
  if (std::abs(beta) < kMinBeta) {
    beta = std::signbit(beta) ? -kMinBeta : kMinBeta;
  }
  const double limit = std::abs(beta) * (1.0 - kDeltaMargin);
  if (std::abs(delta) > limit) {
    delta = std::signbit(delta) ? -limit : limit;
  }
}

}  // namespace it2cfnn::fuzzy

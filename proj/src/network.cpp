#include "it2cfnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "it2cfnn/fuzzy.hpp"

namespace it2cfnn {

namespace {

fuzzy::ShapeParams unit_shape(const Rule &rule, Eigen::Index j) {
  return {0.0, 1.0, std::abs(rule.beta[j]), std::abs(rule.delta[j])};
}

// -0.5 * (z^2)^p for the lower and upper memberships of one feature.
MembershipPair log_memberships(const Rule &rule, Eigen::Index j, double zj) {
  const double z2 = zj * zj;
  if (z2 == 0.0) {
    return {0.0, 0.0};
  }
  const double b2 = rule.beta[j] * rule.beta[j];
  const double d2 = rule.delta[j] * rule.delta[j];
  const bool inner = z2 <= 1.0;
  const double lower_exp = inner ? b2 - d2 : b2 + d2;
  const double upper_exp = inner ? b2 + d2 : b2 - d2;
  return {-0.5 * std::pow(z2, lower_exp), -0.5 * std::pow(z2, upper_exp)};
}

}  // namespace

Rule Rule::identity(std::size_t n, double consequent) {
  Rule r;
  r.center = Vector::Zero(static_cast<Eigen::Index>(n));
  r.transform = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  r.beta = Vector::Ones(static_cast<Eigen::Index>(n));
  r.delta = Vector::Zero(static_cast<Eigen::Index>(n));
  r.consequent = consequent;
  return r;
}

void Rule::project() {
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    fuzzy::project_shape(beta[j], delta[j]);
  }
  if (!(v1 * v1 + v2 * v2 > 0.0)) {
    v1 = 0.5;
    v2 = 0.5;
  }
}

void Rule::validate(std::size_t n) const {
  const auto size = static_cast<Eigen::Index>(n);
  if (center.size() != size || beta.size() != size || delta.size() != size || transform.rows() != size ||
      transform.cols() != size) {
    throw std::invalid_argument("rule dimensions do not match input dimensionality " + std::to_string(n));
  }
  if (!center.allFinite() || !transform.allFinite() || !beta.allFinite() || !delta.allFinite() ||
      !std::isfinite(v1) || !std::isfinite(v2) || !std::isfinite(consequent)) {
    throw std::invalid_argument("rule holds non-finite parameters");
  }
  for (Eigen::Index j = 0; j < size; ++j) {
    if (!(beta[j] * beta[j] - delta[j] * delta[j] > 0.0)) {
      throw std::invalid_argument("rule violates beta^2 - delta^2 > 0 at feature " + std::to_string(j));
    }
  }
  if (!(v1 * v1 + v2 * v2 > 0.0)) {
    throw std::invalid_argument("rule has degenerate type-reduction weights");
  }
}

Vector transform_features(const Rule &rule, const Vector &x) {
  if (x.size() != rule.center.size() || rule.transform.cols() != x.size()) {
    throw std::invalid_argument("transform_features: dimension mismatch");
  }
  return rule.transform * (x - rule.center);
}

std::vector<MembershipPair> fuzzify(const Rule &rule, const Vector &z) {
  if (z.size() != rule.beta.size()) {
    throw std::invalid_argument("fuzzify: dimension mismatch");
  }
  std::vector<MembershipPair> out(static_cast<std::size_t>(z.size()));
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const auto p = unit_shape(rule, j);
    out[static_cast<std::size_t>(j)] = {fuzzy::lmf(z[j], p), fuzzy::umf(z[j], p)};
  }
  return out;
}

FiringInterval fire(const std::vector<MembershipPair> &memberships) {
  FiringInterval fi{1.0, 1.0};
  for (const auto &m : memberships) {
    fi.lower *= m.lower;
    fi.upper *= m.upper;
  }
  return fi;
}

FiringInterval fire(const Rule &rule, const Vector &z) {
  if (z.size() != rule.beta.size()) {
    throw std::invalid_argument("fire: dimension mismatch");
  }
  if (static_cast<std::size_t>(z.size()) > kLogSpaceThreshold) {
    double log_lower = 0.0;
    double log_upper = 0.0;
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      const auto lm = log_memberships(rule, j, z[j]);
      log_lower += lm.lower;
      log_upper += lm.upper;
    }
    return {std::exp(log_lower), std::exp(log_upper)};
  }
  FiringInterval fi{1.0, 1.0};
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const auto lm = log_memberships(rule, j, z[j]);
    fi.lower *= std::exp(lm.lower);
    fi.upper *= std::exp(lm.upper);
  }
  return fi;
}

double type_reduce(double v1, double v2, FiringInterval fi) {
  const double a = v1 * v1;
  const double b = v2 * v2;
  const double s = a + b;
  if (!(s > 0.0)) {
    throw std::domain_error("type_reduce: degenerate weights v1 = v2 = 0");
  }
  return (a / s) * fi.lower + (b / s) * fi.upper;
}

std::size_t param_count(std::size_t rules, std::size_t inputs) {
  return rules * (inputs * inputs + 3 * inputs + 1);
}

std::size_t trainable_count(std::size_t rules, std::size_t inputs) {
  return rules * (inputs * inputs + 3 * inputs + 3);
}

Network::Network(std::size_t inputs, std::vector<Rule> rules, OutputMode mode)
    : n_(inputs), rules_(std::move(rules)), mode_(mode) {
  validate();
}

void Network::validate() const {
  if (n_ == 0) {
    throw std::invalid_argument("network needs at least one input");
  }
  if (rules_.empty()) {
    throw std::invalid_argument("network needs at least one rule");
  }
  for (const auto &r : rules_) {
    r.validate(n_);
  }
}

void Network::project() {
  for (auto &r : rules_) {
    r.project();
  }
}

void Network::check_input(const Vector &x) const {
  if (static_cast<std::size_t>(x.size()) != n_) {
    throw std::invalid_argument("input has " + std::to_string(x.size()) + " features, network expects " +
                                std::to_string(n_));
  }
}

ForwardResult Network::forward(const Vector &x) const {
  check_input(x);
  ForwardResult out;
  out.rules.reserve(rules_.size());
  double weighted = 0.0;
  for (const auto &r : rules_) {
    RuleTrace t;
    t.z = r.transform * (x - r.center);
    t.firing = fire(r, t.z);
    t.reduced = type_reduce(r, t.firing);
    weighted += t.reduced * r.consequent;
    out.firing_sum += t.reduced;
    out.rules.push_back(std::move(t));
  }
  out.y_hat = mode_ == OutputMode::Sum ? weighted : weighted / std::max(out.firing_sum, kMinFiringSum);
  return out;
}

double Network::predict(const Vector &x) const {
  check_input(x);
  double weighted = 0.0;
  double sum = 0.0;
  Vector z(static_cast<Eigen::Index>(n_));
  for (const auto &r : rules_) {
    z.noalias() = r.transform * (x - r.center);
    const double phi = type_reduce(r, fire(r, z));
    weighted += phi * r.consequent;
    sum += phi;
  }
  return mode_ == OutputMode::Sum ? weighted : weighted / std::max(sum, kMinFiringSum);
}

Vector Network::predict(const Matrix &inputs) const {
  Vector out(inputs.rows());
  for (Eigen::Index k = 0; k < inputs.rows(); ++k) {
    out[k] = predict(Vector(inputs.row(k).transpose()));
  }
  return out;
}

}  // namespace it2cfnn

#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace it2cfnn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One non-separable interval type-2 rule.
///
/// The antecedent fires on features z = transform * (x - center); each feature
/// is fuzzified by a unit-width uncertain-shape set centred at zero. The
/// firing interval is collapsed by an adaptive Nie-Tan weighting with weight
/// v1^2/(v1^2+v2^2) on the lower bound and v2^2/(v1^2+v2^2) on the upper bound.
struct Rule {
  Vector center;
  Matrix transform;  // rows index extracted features
  Vector beta;
  Vector delta;
  double v1 = 0.5;
  double v2 = 0.5;
  double consequent = 0.0;

  /// Identity transform, beta = 1, delta = 0, v1 = v2 = 0.5.
  static Rule identity(std::size_t n, double consequent = 0.0);

  std::size_t dim() const { return static_cast<std::size_t>(center.size()); }

  /// Restores the shape and type-reduction invariants after an update.
  void project();

  /// Throws std::invalid_argument if the rule is malformed.
  void validate(std::size_t n) const;
};

struct FiringInterval {
  double lower = 0.0;
  double upper = 0.0;
};

struct MembershipPair {
  double lower = 0.0;
  double upper = 0.0;
};

/// How rule outputs are combined.
enum class OutputMode {
  Sum,         // y = sum_i phi_i y_i
  Normalized,  // y = sum_i phi_i y_i / max(sum_i phi_i, kMinFiringSum)
};

inline constexpr double kMinFiringSum = 1e-12;

/// Above this many inputs firing products are accumulated in log space.
inline constexpr std::size_t kLogSpaceThreshold = 16;

struct RuleTrace {
  Vector z;
  FiringInterval firing;
  double reduced = 0.0;
};

struct ForwardResult {
  double y_hat = 0.0;
  double firing_sum = 0.0;
  std::vector<RuleTrace> rules;
};

Vector transform_features(const Rule &rule, const Vector &x);
std::vector<MembershipPair> fuzzify(const Rule &rule, const Vector &z);
FiringInterval fire(const std::vector<MembershipPair> &memberships);
FiringInterval fire(const Rule &rule, const Vector &z);

/// Throws std::domain_error when v1 = v2 = 0.
double type_reduce(double v1, double v2, FiringInterval fi);
inline double type_reduce(const Rule &rule, FiringInterval fi) { return type_reduce(rule.v1, rule.v2, fi); }

/// Parameter count R(n^2 + 3n + 1): transform, center, beta, delta and
/// consequent. Excludes the two type-reduction weights per rule.
std::size_t param_count(std::size_t rules, std::size_t inputs);

/// Every trainable value, R(n^2 + 3n + 3).
std::size_t trainable_count(std::size_t rules, std::size_t inputs);

class Network {
 public:
  Network() = default;
  Network(std::size_t inputs, std::vector<Rule> rules, OutputMode mode = OutputMode::Sum);

  std::size_t input_dim() const { return n_; }
  std::size_t rule_count() const { return rules_.size(); }
  OutputMode output_mode() const { return mode_; }
  void set_output_mode(OutputMode mode) { mode_ = mode; }

  const std::vector<Rule> &rules() const { return rules_; }
  std::vector<Rule> &rules() { return rules_; }
  const Rule &rule(std::size_t i) const { return rules_.at(i); }
  Rule &rule(std::size_t i) { return rules_.at(i); }

  /// Full pass keeping per-rule intermediates.
  ForwardResult forward(const Vector &x) const;

  /// Output only; no trace allocation.
  double predict(const Vector &x) const;

  /// One prediction per row of `inputs`.
  Vector predict(const Matrix &inputs) const;

  void project();
  void validate() const;

 private:
  void check_input(const Vector &x) const;

  std::size_t n_ = 0;
  std::vector<Rule> rules_;
  OutputMode mode_ = OutputMode::Sum;
};

}  // namespace it2cfnn

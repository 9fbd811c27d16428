#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "it2cfnn/data.hpp"
#include "it2cfnn/network.hpp"

namespace it2cfnn::train {

/// The six parameter groups tuned one at a time by the hierarchical LM loop.
enum class ParamGroup {
  Gamma,          // transforms, rule-major then row-major: R n^2
  Center,         // R n
  Consequent,     // R
  Beta,           // R n
  Delta,          // R n
  TypeReduction,  // (v1, v2) per rule: 2R
};

inline constexpr std::array<ParamGroup, 6> kAllGroups = {ParamGroup::Gamma, ParamGroup::Center,
                                                         ParamGroup::Consequent, ParamGroup::Beta,
                                                         ParamGroup::Delta, ParamGroup::TypeReduction};

std::string to_string(ParamGroup g);
ParamGroup parse_group(const std::string &name);

std::size_t group_size(const Network &net, ParamGroup g);

/// Rule that owns flat parameter `p` of group `g`.
std::size_t owning_rule(const Network &net, ParamGroup g, std::size_t p);

Vector get_group(const Network &net, ParamGroup g);

/// Writes the flat vector back. With `project` the rule invariants are restored.
void set_group(Network &net, ParamGroup g, const Vector &values, bool project = true);

/// e = y_hat - y
Vector error_vector(const Network &net, const data::Dataset &d);
double sum_squared_error(const Network &net, const data::Dataset &d);
double rmse(const Network &net, const data::Dataset &d);

/// Analytic d y_hat / d theta for every sample (rows) and group parameter (columns).
Matrix jacobian(const Network &net, const data::Dataset &d, ParamGroup g);

/// Central differences with step rel_step * max(1, |theta|).
Matrix fd_jacobian(const Network &net, const data::Dataset &d, ParamGroup g, double rel_step = 1e-6);

struct GradCheck {
  ParamGroup group = ParamGroup::Gamma;
  double max_rel_error = 0.0;
  std::size_t compared = 0;
  std::size_t excluded = 0;  // entries straddling a |z| = 1 kink
};

struct GradCheckTolerance {
  double rel = 1e-4;
  double abs_floor = 1e-7;
  double kink = 1e-6;
  double rel_step = 1e-6;
};

/// Compares jacobian() with fd_jacobian(). Entries whose finite-difference
/// stencil crosses, or lies within `kink` of, a |z| = 1 branch switch are
/// skipped. Differences at or below `abs_floor` count as zero error.
GradCheck check_gradient(const Network &net, const data::Dataset &d, ParamGroup g,
                         const GradCheckTolerance &tol = {});

/// A seeded random network and inputs scattered around its rule centers.
struct CheckProblem {
  Network network;
  data::Dataset data;
};

CheckProblem random_problem(std::size_t inputs, std::size_t rules, std::size_t samples, std::uint64_t seed,
                            OutputMode mode = OutputMode::Sum);

/// Trust-region scalar with its adaptation rate.
struct LmState {
  double lambda = 1.0;
  double eta = 1.001;
};

enum class LambdaEvent { Decreased, Increased, Unchanged };

/// Divide by eta on improvement, multiply on regression, keep on a tie.
LambdaEvent update_lambda(LmState &state, double prev_error, double new_error);

/// -(J^T J + lambda I)^{-1} J^T e. Falls back to a jittered LDLT solve when
/// the Cholesky factorization fails.
Vector lm_delta(const Matrix &jac, const Vector &err, double lambda);

struct StepOptions {
  bool reject_worsening = true;
  std::size_t max_retries = 10;
};

struct StepOutcome {
  bool accepted = false;
  double sse_before = 0.0;
  double sse_after = 0.0;  // SSE of the parameters left in place
  std::size_t trials = 0;
  std::vector<double> lambda_trace;  // lambda after each trial
  std::vector<double> trial_sse;     // SSE of each trial point
};

/// One damped Gauss-Newton update of group `g` on `train`. Each trial applies
/// the lambda rule; with reject_worsening a trial that raises SSE is undone
/// and retried with the enlarged lambda.
StepOutcome lm_step(Network &net, const data::Dataset &train, ParamGroup g, LmState &state,
                    const StepOptions &opts = {});

enum class SplitMode { Tail, Random };

std::string to_string(SplitMode m);
SplitMode parse_split_mode(const std::string &name);

struct TrainConfig {
  double lambda0 = 1.0;
  double eta = 1.001;
  double validation_fraction = 0.2;
  SplitMode split_mode = SplitMode::Tail;
  std::uint64_t seed = 0;
  std::size_t max_epochs = 100;
  std::size_t max_inner = 50;
  std::size_t patience = 5;
  std::vector<ParamGroup> group_order{kAllGroups.begin(), kAllGroups.end()};
  bool reject_worsening = true;
  std::size_t max_retries = 10;
  double divergence_factor = 1e6;

  void validate() const;
};

struct HistoryRow {
  std::size_t outer_epoch = 0;
  std::string group;
  std::size_t inner_iter = 0;
  double lambda = 0.0;
  double train_rmse = 0.0;
  double val_rmse = 0.0;
};

struct FitResult {
  Network network;
  std::vector<HistoryRow> history;
  double initial_val_rmse = 0.0;
  double best_val_rmse = 0.0;
  double final_train_rmse = 0.0;
  std::size_t epochs = 0;
  std::string stop_reason;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainValidation {
  data::Dataset train;
  data::Dataset validation;  // empty when validation_fraction = 0
};

/// Holds out the last (Tail) or a seeded random (Random) fraction of `d`.
TrainValidation split_validation(const data::Dataset &d, const TrainConfig &config);

/// Hierarchical LM: an outer loop over epochs, and per group an inner loop
/// that stops once the validation RMSE has not improved for `patience`
/// iterations. Each group keeps its own lambda. Returns the parameters with
/// the best validation RMSE (training RMSE when there is no validation split).
FitResult fit(Network net, const data::Dataset &d, const TrainConfig &config = {});

/// Columns outer_epoch,group,inner_iter,lambda,train_rmse,val_rmse.
void write_history_csv(std::ostream &out, const std::vector<HistoryRow> &history);
void write_history_csv(const std::string &path, const std::vector<HistoryRow> &history);

}  // namespace it2cfnn::train

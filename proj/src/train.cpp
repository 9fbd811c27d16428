#include "it2cfnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>

#include <Eigen/Cholesky>

namespace it2cfnn::train {

namespace {

constexpr double kZeroFeature = 1e-12;

std::size_t as_size(Eigen::Index i) { return static_cast<std::size_t>(i); }
Eigen::Index as_index(std::size_t i) { return static_cast<Eigen::Index>(i); }

// d phi_i / d z_j, d phi_i / d beta_j and d phi_i / d delta_j for one rule at
// one sample, where phi_i is the type-reduced firing strength.
struct FeatureDerivatives {
  Vector dz;
  Vector dbeta;
  Vector ddelta;
};

FeatureDerivatives feature_derivatives(const Rule &r, const RuleTrace &t) {
  const auto n = t.z.size();
  FeatureDerivatives fd{Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};
  const double a = r.v1 * r.v1;
  const double b = r.v2 * r.v2;
  const double wl = a / (a + b);
  const double wu = b / (a + b);
  const double phl = t.firing.lower;
  const double phu = t.firing.upper;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double z = t.z[j];
    const double z2 = z * z;
    if (z2 == 0.0) continue;
    const bool inner = z2 <= 1.0;
    const double b2 = r.beta[j] * r.beta[j];
    const double d2 = r.delta[j] * r.delta[j];
    const double pl = inner ? b2 - d2 : b2 + d2;
    const double pu = inner ? b2 + d2 : b2 - d2;
    // phi * (z^2)^p, with an underflowed firing strength annihilating the term.
    const double gl = phl == 0.0 ? 0.0 : phl * std::pow(z2, pl);
    const double gu = phu == 0.0 ? 0.0 : phu * std::pow(z2, pu);
    const double lnz2 = std::log(z2);

    if (std::abs(z) > kZeroFeature) {
      // d/dz exp(-0.5 (z^2)^p) = -p (z^2)^p / z * mu
      fd.dz[j] = -(wl * pl * gl + wu * pu * gu) / z;
    }
    fd.dbeta[j] = -r.beta[j] * lnz2 * (wl * gl + wu * gu);
    const double dpl = inner ? -2.0 * r.delta[j] : 2.0 * r.delta[j];
    fd.ddelta[j] = -0.5 * lnz2 * (wl * gl * dpl - wu * gu * dpl);
  }
  return fd;
}

void check_dataset(const Network &net, const data::Dataset &d) {
  d.validate();
  if (d.dim() != net.input_dim()) {
    throw std::invalid_argument("dataset has " + std::to_string(d.dim()) + " inputs, network expects " +
                                std::to_string(net.input_dim()));
  }
}

}  // namespace

std::string to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::Gamma:
      return "gamma";
    case ParamGroup::Center:
      return "center";
    case ParamGroup::Consequent:
      return "consequent";
    case ParamGroup::Beta:
      return "beta";
    case ParamGroup::Delta:
      return "delta";
    case ParamGroup::TypeReduction:
      return "typered";
  }
  return "?";
}

ParamGroup parse_group(const std::string &name) {
  for (auto g : kAllGroups) {
    if (to_string(g) == name) return g;
  }
  throw std::invalid_argument("unknown parameter group '" + name + "'");
}

std::size_t group_size(const Network &net, ParamGroup g) {
  const std::size_t r = net.rule_count();
  const std::size_t n = net.input_dim();
  switch (g) {
    case ParamGroup::Gamma:
      return r * n * n;
    case ParamGroup::Center:
    case ParamGroup::Beta:
    case ParamGroup::Delta:
      return r * n;
    case ParamGroup::Consequent:
      return r;
    case ParamGroup::TypeReduction:
      return 2 * r;
  }
  return 0;
}

std::size_t owning_rule(const Network &net, ParamGroup g, std::size_t p) {
  const std::size_t n = net.input_dim();
  switch (g) {
    case ParamGroup::Gamma:
      return p / (n * n);
    case ParamGroup::Center:
    case ParamGroup::Beta:
    case ParamGroup::Delta:
      return p / n;
    case ParamGroup::Consequent:
      return p;
    case ParamGroup::TypeReduction:
      return p / 2;
  }
  return 0;
}

Vector get_group(const Network &net, ParamGroup g) {
  const auto n = as_index(net.input_dim());
  Vector out(as_index(group_size(net, g)));
  Eigen::Index p = 0;
  for (const auto &r : net.rules()) {
    switch (g) {
      case ParamGroup::Gamma:
        for (Eigen::Index j = 0; j < n; ++j)
          for (Eigen::Index l = 0; l < n; ++l) out[p++] = r.transform(j, l);
        break;
      case ParamGroup::Center:
        out.segment(p, n) = r.center;
        p += n;
        break;
      case ParamGroup::Consequent:
        out[p++] = r.consequent;
        break;
      case ParamGroup::Beta:
        out.segment(p, n) = r.beta;
        p += n;
        break;
      case ParamGroup::Delta:
        out.segment(p, n) = r.delta;
        p += n;
        break;
      case ParamGroup::TypeReduction:
        out[p++] = r.v1;
        out[p++] = r.v2;
        break;
    }
  }
  return out;
}

void set_group(Network &net, ParamGroup g, const Vector &values, bool project) {
  if (as_size(values.size()) != group_size(net, g)) {
    throw std::invalid_argument("group " + to_string(g) + " expects " + std::to_string(group_size(net, g)) +
                                " values, got " + std::to_string(values.size()));
  }
  const auto n = as_index(net.input_dim());
  Eigen::Index p = 0;
  for (auto &r : net.rules()) {
    switch (g) {
      case ParamGroup::Gamma:
        for (Eigen::Index j = 0; j < n; ++j)
          for (Eigen::Index l = 0; l < n; ++l) r.transform(j, l) = values[p++];
        break;
      case ParamGroup::Center:
        r.center = values.segment(p, n);
        p += n;
        break;
      case ParamGroup::Consequent:
        r.consequent = values[p++];
        break;
      case ParamGroup::Beta:
        r.beta = values.segment(p, n);
        p += n;
        break;
      case ParamGroup::Delta:
        r.delta = values.segment(p, n);
        p += n;
        break;
      case ParamGroup::TypeReduction:
        r.v1 = values[p++];
        r.v2 = values[p++];
        break;
    }
    if (project) r.project();
  }
}

Vector error_vector(const Network &net, const data::Dataset &d) {
  check_dataset(net, d);
  return net.predict(d.inputs) - d.targets;
}

double sum_squared_error(const Network &net, const data::Dataset &d) { return error_vector(net, d).squaredNorm(); }

double rmse(const Network &net, const data::Dataset &d) {
  if (d.size() == 0) {
    throw std::invalid_argument("RMSE of an empty dataset");
  }
  return std::sqrt(sum_squared_error(net, d) / static_cast<double>(d.size()));
}

Matrix jacobian(const Network &net, const data::Dataset &d, ParamGroup g) {
  check_dataset(net, d);
  const auto n = as_index(net.input_dim());
  const std::size_t width = group_size(net, g);
  Matrix jac = Matrix::Zero(as_index(d.size()), as_index(width));
  const bool normalized = net.output_mode() == OutputMode::Normalized;

  for (Eigen::Index k = 0; k < jac.rows(); ++k) {
    const Vector x = d.inputs.row(k).transpose();
    const ForwardResult fr = net.forward(x);
    const bool floored = fr.firing_sum < kMinFiringSum;
    const double denom = std::max(fr.firing_sum, kMinFiringSum);

    for (std::size_t i = 0; i < net.rule_count(); ++i) {
      const Rule &r = net.rule(i);
      const RuleTrace &t = fr.rules[i];
      // d y_hat / d phi_i
      double g_phi = r.consequent;
      if (normalized) {
        g_phi = floored ? r.consequent / denom : (r.consequent - fr.y_hat) / denom;
      }
      const auto ii = as_index(i);
      switch (g) {
        case ParamGroup::Consequent:
          jac(k, ii) = normalized ? t.reduced / denom : t.reduced;
          break;
        case ParamGroup::TypeReduction: {
          const double a = r.v1 * r.v1;
          const double b = r.v2 * r.v2;
          const double s2 = (a + b) * (a + b);
          const double gap = t.firing.lower - t.firing.upper;
          jac(k, 2 * ii) = g_phi * gap * 2.0 * r.v1 * b / s2;
          jac(k, 2 * ii + 1) = -g_phi * gap * 2.0 * a * r.v2 / s2;
          break;
        }
        case ParamGroup::Beta:
        case ParamGroup::Delta: {
          const auto fd = feature_derivatives(r, t);
          jac.block(k, ii * n, 1, n) = g_phi * (g == ParamGroup::Beta ? fd.dbeta : fd.ddelta).transpose();
          break;
        }
        case ParamGroup::Center: {
          const auto fd = feature_derivatives(r, t);
          // z = Gamma (x - m)  =>  dz/dm = -Gamma
          jac.block(k, ii * n, 1, n) = -g_phi * (r.transform.transpose() * fd.dz).transpose();
          break;
        }
        case ParamGroup::Gamma: {
          const auto fd = feature_derivatives(r, t);
          const Vector offset = x - r.center;
          for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index l = 0; l < n; ++l) jac(k, ii * n * n + j * n + l) = g_phi * fd.dz[j] * offset[l];
          break;
        }
      }
    }
  }
  return jac;
}

Matrix fd_jacobian(const Network &net, const data::Dataset &d, ParamGroup g, double rel_step) {
  check_dataset(net, d);
  if (!(rel_step > 0.0)) {
    throw std::invalid_argument("finite-difference step must be positive");
  }
  const Vector theta = get_group(net, g);
  Matrix jac(as_index(d.size()), theta.size());
  Network probe = net;
  for (Eigen::Index p = 0; p < theta.size(); ++p) {
    const double h = rel_step * std::max(1.0, std::abs(theta[p]));
    Vector shifted = theta;
    shifted[p] = theta[p] + h;
    set_group(probe, g, shifted, false);
    const Vector plus = probe.predict(d.inputs);
    shifted[p] = theta[p] - h;
    set_group(probe, g, shifted, false);
    const Vector minus = probe.predict(d.inputs);
    jac.col(p) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

GradCheck check_gradient(const Network &net, const data::Dataset &d, ParamGroup g, const GradCheckTolerance &tol) {
  const Matrix analytic = jacobian(net, d, g);
  const Matrix numeric = fd_jacobian(net, d, g, tol.rel_step);
  const Vector theta = get_group(net, g);
  GradCheck out;
  out.group = g;

  auto branch_pattern = [&](const Network &m, std::size_t rule, const Vector &x) {
    const Rule &r = m.rule(rule);
    const Vector z = r.transform * (x - r.center);
    return z;
  };

  for (Eigen::Index p = 0; p < theta.size(); ++p) {
    const std::size_t rule = owning_rule(net, g, as_size(p));
    const double h = tol.rel_step * std::max(1.0, std::abs(theta[p]));
    Vector shifted = theta;
    shifted[p] = theta[p] + h;
    Network plus = net;
    set_group(plus, g, shifted, false);
    shifted[p] = theta[p] - h;
    Network minus = net;
    set_group(minus, g, shifted, false);

    for (Eigen::Index k = 0; k < analytic.rows(); ++k) {
      const Vector x = d.inputs.row(k).transpose();
      const Vector z0 = branch_pattern(net, rule, x);
      const Vector zp = branch_pattern(plus, rule, x);
      const Vector zm = branch_pattern(minus, rule, x);
      bool kink = false;
      for (Eigen::Index j = 0; j < z0.size() && !kink; ++j) {
        const bool near = std::abs(std::abs(z0[j]) - 1.0) < tol.kink;
        const bool crosses = (std::abs(zp[j]) <= 1.0) != (std::abs(zm[j]) <= 1.0);
        kink = near || crosses;
      }
      if (kink) {
        ++out.excluded;
        continue;
      }
      ++out.compared;
      const double a = analytic(k, p);
      const double f = numeric(k, p);
      const double diff = std::abs(a - f);
      if (diff <= tol.abs_floor) continue;
      out.max_rel_error = std::max(out.max_rel_error, diff / std::max(std::abs(a), std::abs(f)));
    }
  }
  return out;
}

CheckProblem random_problem(std::size_t inputs, std::size_t rules, std::size_t samples, std::uint64_t seed,
                            OutputMode mode) {
  if (inputs == 0 || rules == 0 || samples == 0) {
    throw std::invalid_argument("random_problem needs inputs, rules and samples >= 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(inputs);
  std::vector<Rule> rs;
  for (std::size_t i = 0; i < rules; ++i) {
    Rule r = Rule::identity(inputs, 2.0 * u(rng));
    for (Eigen::Index j = 0; j < n; ++j) {
      r.center[j] = u(rng);
      r.beta[j] = (u(rng) < 0.0 ? -1.0 : 1.0) * (1.0 + 0.4 * u(rng));
      r.delta[j] = 0.4 * std::abs(r.beta[j]) * (0.5 + 0.5 * u(rng));
      for (Eigen::Index l = 0; l < n; ++l) r.transform(j, l) = (j == l ? 1.0 : 0.0) + 0.3 * u(rng);
    }
    r.v1 = 0.6 + 0.4 * u(rng);
    r.v2 = 0.6 + 0.4 * u(rng);
    rs.push_back(std::move(r));
  }
  CheckProblem p{Network(inputs, std::move(rs), mode), {}};
  p.data.inputs.resize(static_cast<Eigen::Index>(samples), n);
  p.data.targets.resize(static_cast<Eigen::Index>(samples));
  for (Eigen::Index k = 0; k < p.data.inputs.rows(); ++k) {
    const auto &c = p.network.rule(static_cast<std::size_t>(k) % rules).center;
    for (Eigen::Index j = 0; j < n; ++j) p.data.inputs(k, j) = c[j] + 0.8 * g(rng);
    p.data.targets[k] = g(rng);
  }
  return p;
}

LambdaEvent update_lambda(LmState &state, double prev_error, double new_error) {
  if (new_error < prev_error) {
    state.lambda /= state.eta;
    return LambdaEvent::Decreased;
  }
  if (new_error > prev_error || !std::isfinite(new_error)) {
    state.lambda *= state.eta;
    return LambdaEvent::Increased;
  }
  return LambdaEvent::Unchanged;
}

Vector lm_delta(const Matrix &jac, const Vector &err, double lambda) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("lambda must be positive");
  }
  const Vector grad = jac.transpose() * err;
  Matrix normal = jac.transpose() * jac;
  normal.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(normal);
  if (llt.info() == Eigen::Success) {
    return -llt.solve(grad);
  }
  const double jitter = 1e-12 * normal.trace() / static_cast<double>(std::max<Eigen::Index>(normal.rows(), 1));
  normal.diagonal().array() += jitter;
  return -normal.ldlt().solve(grad);
}

StepOutcome lm_step(Network &net, const data::Dataset &train, ParamGroup g, LmState &state,
                    const StepOptions &opts) {
  const Vector err = error_vector(net, train);
  const Matrix jac = jacobian(net, train, g);
  const Vector theta = get_group(net, g);
  // Projection can touch other groups (beta clamps delta), so undo from a full copy.
  const Network start = net;
  StepOutcome out;
  out.sse_before = err.squaredNorm();
  out.sse_after = out.sse_before;

  for (std::size_t trial = 0; trial <= opts.max_retries; ++trial) {
    ++out.trials;
    const Vector delta = lm_delta(jac, err, state.lambda);
    double trial_sse = std::numeric_limits<double>::infinity();
    if (delta.allFinite()) {
      set_group(net, g, theta + delta);
      trial_sse = sum_squared_error(net, train);
    }
    update_lambda(state, out.sse_before, trial_sse);
    out.lambda_trace.push_back(state.lambda);
    out.trial_sse.push_back(trial_sse);

    const bool finite = std::isfinite(trial_sse);
    if (finite && (!opts.reject_worsening || trial_sse <= out.sse_before)) {
      out.accepted = true;
      out.sse_after = trial_sse;
      return out;
    }
    net = start;
  }
  return out;
}

std::string to_string(SplitMode m) { return m == SplitMode::Tail ? "tail" : "random"; }

SplitMode parse_split_mode(const std::string &name) {
  if (name == "tail") return SplitMode::Tail;
  if (name == "random") return SplitMode::Random;
  throw std::invalid_argument("unknown split mode '" + name + "'");
}

void TrainConfig::validate() const {
  if (!(lambda0 > 0.0)) throw std::invalid_argument("lambda0 must be positive");
  if (!(eta > 1.0)) throw std::invalid_argument("eta must exceed 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("validation_fraction must lie in [0, 1)");
  }
  if (group_order.empty()) throw std::invalid_argument("group order is empty");
  if (patience == 0) throw std::invalid_argument("patience must be at least 1");
}

TrainValidation split_validation(const data::Dataset &d, const TrainConfig &config) {
  d.validate();
  const auto held = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(d.size())));
  if (d.size() < held + 2) {
    throw std::invalid_argument("training needs at least 2 rows after the validation split");
  }
  if (held == 0) {
    return {d, data::Dataset{Matrix(0, d.inputs.cols()), Vector(0), d.normalization}};
  }
  if (config.split_mode == SplitMode::Tail) {
    auto s = data::split_head(d, d.size() - held);
    return {std::move(s.train), std::move(s.test)};
  }
  auto s = data::split_shuffled(d, d.size() - held, config.seed);
  return {std::move(s.train), std::move(s.test)};
}

FitResult fit(Network net, const data::Dataset &d, const TrainConfig &config) {
  config.validate();
  net.validate();
  check_dataset(net, d);
  const auto [train, val] = split_validation(d, config);
  const bool has_val = val.size() > 0;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  auto train_rmse_of = [&](double sse) { return std::sqrt(sse / static_cast<double>(train.size())); };
  auto val_rmse = [&](const Network &m) { return has_val ? rmse(m, val) : nan; };
  auto monitor = [&](const Network &m) { return has_val ? rmse(m, val) : rmse(m, train); };

  std::array<LmState, kAllGroups.size()> states;
  for (auto &s : states) s = {config.lambda0, config.eta};
  const StepOptions opts{config.reject_worsening, config.max_retries};

  FitResult result;
  Network best = net;
  double best_score = monitor(net);
  result.initial_val_rmse = best_score;
  const double divergence_limit = config.divergence_factor * std::max(best_score, 1e-12);
  result.history.push_back({0, "init", 0, config.lambda0, rmse(net, train), val_rmse(net)});

  std::size_t stale_epochs = 0;
  result.stop_reason = "max_epochs";
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    result.epochs = epoch;
    bool improved = false;
    bool progressed = false;
    for (const ParamGroup g : config.group_order) {
      LmState &state = states[static_cast<std::size_t>(g)];
      std::size_t stale = 0;
      std::size_t iter = 0;
      double current_val = val_rmse(net);
      for (std::size_t inner = 0; inner < config.max_inner; ++inner) {
        const StepOutcome step = lm_step(net, train, g, state, opts);
        const double before_val = current_val;
        double score = best_score;
        if (step.accepted) {
          score = monitor(net);
          current_val = has_val ? score : nan;
        }
        // One row per trial; a rejected trial leaves the parameters unchanged.
        for (std::size_t t = 0; t < step.trials; ++t) {
          const bool last = t + 1 == step.trials;
          const bool moved = last && step.accepted;
          result.history.push_back({epoch, to_string(g), ++iter, step.lambda_trace[t],
                                    train_rmse_of(moved ? step.sse_after : step.sse_before),
                                    moved ? current_val : before_val});
        }
        if (!step.accepted) break;
        if (!std::isfinite(score) || score > divergence_limit) {
          throw DivergenceError("validation RMSE " + std::to_string(score) + " exceeded " +
                                std::to_string(divergence_limit) + " while tuning " + to_string(g));
        }
        const bool decreased = step.sse_after < step.sse_before;
        progressed = progressed || decreased;
        if (score < best_score) {
          best_score = score;
          best = net;
          improved = true;
          stale = 0;
        } else {
          ++stale;
        }
        if (!decreased || stale >= config.patience) break;
      }
    }
    stale_epochs = improved ? 0 : stale_epochs + 1;
    if (!progressed) {
      result.stop_reason = "converged";
      break;
    }
    if (stale_epochs >= config.patience) {
      result.stop_reason = "patience";
      break;
    }
  }

  result.network = std::move(best);
  result.best_val_rmse = best_score;
  result.final_train_rmse = rmse(result.network, train);
  result.history.push_back(
      {result.epochs, "final", 0, nan, result.final_train_rmse, val_rmse(result.network)});
  return result;
}

void write_history_csv(std::ostream &out, const std::vector<HistoryRow> &history) {
  out << "outer_epoch,group,inner_iter,lambda,train_rmse,val_rmse\n";
  for (const auto &r : history) {
    out << r.outer_epoch << ',' << r.group << ',' << r.inner_iter << ',' << data::format_double(r.lambda) << ','
        << data::format_double(r.train_rmse) << ',' << data::format_double(r.val_rmse) << '\n';
  }
}

void write_history_csv(const std::string &path, const std::vector<HistoryRow> &history) {
  std::ofstream out(path);
  if (!out) {
    throw data::DataError("cannot write '" + path + "'");
  }
  write_history_csv(out, history);
}

}  // namespace it2cfnn::train

#include "it2cfnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace it2cfnn::data {

std::string to_string(NormalizationMode mode) {
  switch (mode) {
    case NormalizationMode::None:
      return "none";
    case NormalizationMode::MinMax01:
      return "minmax01";
    case NormalizationMode::ZScore:
      return "zscore";
  }
  return "none";
}

NormalizationMode parse_normalization_mode(const std::string &name) {
  if (name == "none") return NormalizationMode::None;
  if (name == "minmax01") return NormalizationMode::MinMax01;
  if (name == "zscore") return NormalizationMode::ZScore;
  throw DataError("unknown normalization mode '" + name + "'");
}

void Dataset::validate() const {
  if (inputs.rows() != targets.size()) {
    throw DataError("dataset has " + std::to_string(inputs.rows()) + " input rows but " +
                    std::to_string(targets.size()) + " targets");
  }
}

Dataset Dataset::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > size()) {
    throw DataError("slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                    ") exceeds dataset of " + std::to_string(size()) + " rows");
  }
  const auto b = static_cast<Eigen::Index>(begin);
  const auto c = static_cast<Eigen::Index>(count);
  return {inputs.middleRows(b, c), targets.segment(b, c), normalization};
}

Dataset Dataset::select(const std::vector<std::size_t> &indices) const {
  Dataset out{Matrix(static_cast<Eigen::Index>(indices.size()), inputs.cols()),
              Vector(static_cast<Eigen::Index>(indices.size())), normalization};
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= size()) {
      throw DataError("row index " + std::to_string(indices[r]) + " out of range");
    }
    const auto src = static_cast<Eigen::Index>(indices[r]);
    out.inputs.row(static_cast<Eigen::Index>(r)) = inputs.row(src);
    out.targets[static_cast<Eigen::Index>(r)] = targets[src];
  }
  return out;
}

Split split_head(const Dataset &d, std::size_t train_count) {
  if (train_count > d.size()) {
    throw DataError("cannot take " + std::to_string(train_count) + " training rows from " +
                    std::to_string(d.size()));
  }
  return {d.slice(0, train_count), d.slice(train_count, d.size() - train_count)};
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the order does not depend on the
  // standard library's shuffle.
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

Split split_shuffled(const Dataset &d, std::size_t train_count, std::uint64_t seed) {
  if (train_count > d.size()) {
    throw DataError("cannot take " + std::to_string(train_count) + " training rows from " +
                    std::to_string(d.size()));
  }
  const auto order = shuffled_order(d.size(), seed);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_count));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(train_count), order.end());
  return {d.select(train), d.select(test)};
}

// ---------------------------------------------------------------- generators

double two_hump(double x1, double x2) {
  const double a1[2][2] = {{-4.5721, -2.1415}, {-0.3855, 0.8230}};
  const double a2[2][2] = {{-2.4801, 0.8700}, {-0.3149, 0.8976}};
  const double d1[2] = {x1 + 0.7, x2 - 1.3};
  const double d2[2] = {x1 - 1.2, x2 + 0.6};
  const double z11 = a1[0][0] * d1[0] + a1[0][1] * d1[1];
  const double z12 = a1[1][0] * d1[0] + a1[1][1] * d1[1];
  const double z21 = a2[0][0] * d2[0] + a2[0][1] * d2[1];
  const double z22 = a2[1][0] * d2[0] + a2[1][1] * d2[1];
  return 10.0 * std::exp(-(std::pow(std::abs(z11), 0.6) + std::pow(std::abs(z12), 0.8))) +
         8.0 * std::exp(-(std::pow(z21, 6.0) + std::pow(z22, 4.0)));
}

Dataset synthetic_two_hump(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 3.0);
  Dataset d{Matrix(static_cast<Eigen::Index>(count), 2), Vector(static_cast<Eigen::Index>(count)), std::nullopt};
  for (Eigen::Index k = 0; k < d.inputs.rows(); ++k) {
    const double x1 = u(rng);
    const double x2 = u(rng);
    d.inputs(k, 0) = x1;
    d.inputs(k, 1) = x2;
    d.targets[k] = two_hump(x1, x2);
  }
  return d;
}

Dataset synthetic_two_hump_grid(std::size_t per_axis) {
  if (per_axis < 2) {
    throw DataError("grid needs at least 2 points per axis");
  }
  const auto count = static_cast<Eigen::Index>(per_axis * per_axis);
  Dataset d{Matrix(count, 2), Vector(count), std::nullopt};
  const double step = 5.0 / static_cast<double>(per_axis - 1);
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < per_axis; ++i) {
    for (std::size_t j = 0; j < per_axis; ++j, ++k) {
      const double x1 = -2.0 + step * static_cast<double>(i);
      const double x2 = -2.0 + step * static_cast<double>(j);
      d.inputs(k, 0) = x1;
      d.inputs(k, 1) = x2;
      d.targets[k] = two_hump(x1, x2);
    }
  }
  return d;
}

std::vector<double> mackey_glass(const MackeyGlassParams &params) {
  if (!(params.tau > 16.5)) {
    throw DataError("Mackey-Glass delay must exceed 16.5 for the chaotic regime");
  }
  if (!(params.dt > 0.0) || params.dt >= params.tau) {
    throw DataError("integration step must be positive and below the delay");
  }
  if (params.t_start < 0 || params.t_end < params.t_start) {
    throw DataError("invalid Mackey-Glass sample range");
  }
  const double h = params.dt;
  const double x0 = params.x0;
  const auto steps = static_cast<std::size_t>(std::ceil(static_cast<double>(params.t_end) / h - 1e-9)) + 1;
  auto rhs = [](double xt, double xd) { return 0.2 * xd / (1.0 + std::pow(xd, 10.0)) - 0.1 * xt; };

  // Grid values and their time derivatives; the delayed state between grid
  // points is a cubic Hermite interpolant, which keeps the scheme fourth order.
  std::vector<double> x;
  std::vector<double> dx;
  x.reserve(steps + 1);
  dx.reserve(steps + 1);
  x.push_back(x0);

  auto at = [&](double t) {
    if (t <= 0.0) return x0;
    const double pos = t / h;
    auto i = static_cast<std::size_t>(pos);
    double s = pos - static_cast<double>(i);
    if (s > 1.0 - 1e-9 && i + 1 < x.size()) {
      ++i;
      s = 0.0;
    }
    if (s < 1e-9 || i + 1 >= x.size()) return x[std::min(i, x.size() - 1)];
    if (i + 1 >= dx.size()) return x[i] + s * (x[i + 1] - x[i]);
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * x[i] + (s3 - 2 * s2 + s) * h * dx[i] + (-2 * s3 + 3 * s2) * x[i + 1] +
           (s3 - s2) * h * dx[i + 1];
  };

  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * h;
    const double xi = x[i];
    const double k1 = rhs(xi, at(t - params.tau));
    dx.push_back(k1);
    const double dh = at(t + 0.5 * h - params.tau);
    const double k2 = rhs(xi + 0.5 * h * k1, dh);
    const double k3 = rhs(xi + 0.5 * h * k2, dh);
    const double k4 = rhs(xi + h * k3, at(t + h - params.tau));
    x.push_back(xi + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  }
  dx.push_back(rhs(x.back(), at(static_cast<double>(steps) * h - params.tau)));

  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(params.t_end - params.t_start + 1));
  for (long t = params.t_start; t <= params.t_end; ++t) {
    out.push_back(at(static_cast<double>(t)));
  }
  return out;
}

SeriesSpec SeriesSpec::single(std::vector<std::size_t> lags, std::size_t horizon) {
  SeriesSpec s;
  for (auto l : lags) {
    s.lags.push_back({0, l});
  }
  s.horizon = horizon;
  return s;
}

Dataset lag_embed(const std::vector<std::vector<double>> &channels, const SeriesSpec &spec) {
  if (spec.lags.empty()) {
    throw DataError("series spec needs at least one lag");
  }
  if (spec.target_channel >= channels.size()) {
    throw DataError("target channel " + std::to_string(spec.target_channel) + " does not exist");
  }
  std::size_t length = channels[spec.target_channel].size();
  std::size_t max_back = 0;
  for (const auto &term : spec.lags) {
    if (term.channel >= channels.size()) {
      throw DataError("lag references missing channel " + std::to_string(term.channel));
    }
    if (term.lag + spec.horizon == 0) {
      throw DataError("a lag of 0 with horizon 0 would leak the target into the inputs");
    }
    length = std::min(length, channels[term.channel].size());
    max_back = std::max(max_back, term.lag + spec.horizon);
  }
  const std::size_t first = spec.first_target.value_or(max_back);
  if (first < max_back) {
    throw DataError("first target index " + std::to_string(first) + " precedes the largest lag " +
                    std::to_string(max_back));
  }
  if (first >= length) {
    throw DataError("series of length " + std::to_string(length) + " is too short for the lag structure");
  }
  const std::size_t available = length - first;
  const std::size_t rows = spec.count.value_or(available);
  if (rows > available) {
    throw DataError("series too short: " + std::to_string(rows) + " rows requested, " +
                    std::to_string(available) + " available");
  }
  Dataset d{Matrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(spec.lags.size())),
            Vector(static_cast<Eigen::Index>(rows)), std::nullopt};
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t target_index = first + r;
    for (std::size_t c = 0; c < spec.lags.size(); ++c) {
      const auto &term = spec.lags[c];
      d.inputs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          channels[term.channel][target_index - spec.horizon - term.lag];
    }
    d.targets[static_cast<Eigen::Index>(r)] = channels[spec.target_channel][target_index];
  }
  return d;
}

Dataset lag_embed(const std::vector<double> &series, const SeriesSpec &spec) {
  return lag_embed(std::vector<std::vector<double>>{series}, spec);
}

std::vector<double> add_gaussian_noise(std::vector<double> series, double std, std::uint64_t seed) {
  if (!(std >= 0.0)) {
    throw DataError("noise standard deviation must be non-negative");
  }
  if (std == 0.0) {
    return series;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, std);
  for (auto &v : series) {
    v += noise(rng);
  }
  return series;
}

Dataset add_gaussian_noise(Dataset d, double std, std::uint64_t seed, NoiseScope scope) {
  if (!(std >= 0.0)) {
    throw DataError("noise standard deviation must be non-negative");
  }
  if (std == 0.0) {
    return d;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, std);
  for (Eigen::Index k = 0; k < d.inputs.rows(); ++k) {
    if (scope != NoiseScope::Targets) {
      for (Eigen::Index j = 0; j < d.inputs.cols(); ++j) {
        d.inputs(k, j) += noise(rng);
      }
    }
    if (scope != NoiseScope::Inputs) {
      d.targets[k] += noise(rng);
    }
  }
  return d;
}

// -------------------------------------------------------------- normalization

namespace {

AffineMap fit_column(const Eigen::Ref<const Vector> &col, NormalizationMode mode, const std::string &name) {
  switch (mode) {
    case NormalizationMode::None:
      return {};
    case NormalizationMode::MinMax01: {
      const double lo = col.minCoeff();
      const double hi = col.maxCoeff();
      if (!(hi > lo)) {
        throw DataError("column " + name + " is constant; min-max normalization is undefined");
      }
      return {lo, hi - lo};
    }
    case NormalizationMode::ZScore: {
      const double mean = col.mean();
      const double var = (col.array() - mean).square().sum() / static_cast<double>(col.size());
      const double sd = std::sqrt(var);
      return {mean, sd > 0.0 ? sd : 1.0};
    }
  }
  return {};
}

}  // namespace

Normalization fit_normalization(const Dataset &d, NormalizationMode mode) {
  d.validate();
  if (d.size() == 0) {
    throw DataError("cannot fit normalization on an empty dataset");
  }
  Normalization n;
  n.mode = mode;
  for (Eigen::Index j = 0; j < d.inputs.cols(); ++j) {
    n.inputs.push_back(fit_column(d.inputs.col(j), mode, "x" + std::to_string(j + 1)));
  }
  n.target = fit_column(d.targets, mode, "y");
  return n;
}

Dataset apply_normalization(const Dataset &d, const Normalization &norm) {
  if (norm.inputs.size() != d.dim()) {
    throw DataError("normalization has " + std::to_string(norm.inputs.size()) + " input maps for " +
                    std::to_string(d.dim()) + " columns");
  }
  Dataset out = d;
  for (Eigen::Index j = 0; j < out.inputs.cols(); ++j) {
    const auto &m = norm.inputs[static_cast<std::size_t>(j)];
    for (Eigen::Index k = 0; k < out.inputs.rows(); ++k) {
      out.inputs(k, j) = m.apply(out.inputs(k, j));
    }
  }
  for (Eigen::Index k = 0; k < out.targets.size(); ++k) {
    out.targets[k] = norm.target.apply(out.targets[k]);
  }
  out.normalization = norm;
  return out;
}

Dataset normalize(const Dataset &d, NormalizationMode mode) {
  return apply_normalization(d, fit_normalization(d, mode));
}

Vector denormalize_targets(const Vector &values, const Normalization &norm) {
  Vector out(values.size());
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    out[k] = norm.target.invert(values[k]);
  }
  return out;
}

Dataset denormalize(const Dataset &d) {
  if (!d.normalization) {
    return d;
  }
  const auto &norm = *d.normalization;
  Dataset out = d;
  for (Eigen::Index j = 0; j < out.inputs.cols(); ++j) {
    const auto &m = norm.inputs[static_cast<std::size_t>(j)];
    for (Eigen::Index k = 0; k < out.inputs.rows(); ++k) {
      out.inputs(k, j) = m.invert(out.inputs(k, j));
    }
  }
  out.targets = denormalize_targets(out.targets, norm);
  out.normalization.reset();
  return out;
}

}  // namespace it2cfnn::data

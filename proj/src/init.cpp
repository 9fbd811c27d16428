#include "it2cfnn/init.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

namespace it2cfnn::init {

namespace {

double squared_distance(const Matrix &samples, std::size_t a, std::size_t b) {
  return (samples.row(static_cast<Eigen::Index>(a)) - samples.row(static_cast<Eigen::Index>(b))).squaredNorm();
}

void check_k(std::size_t samples, std::size_t k) {
  if (k < 1 || k >= samples) {
    throw ConfigError("k = " + std::to_string(k) + " must satisfy 1 <= k < N = " + std::to_string(samples));
  }
}

}  // namespace

std::vector<std::size_t> knn(const Matrix &samples, std::size_t query, std::size_t k) {
  const auto n = static_cast<std::size_t>(samples.rows());
  check_k(n, k);
  if (query >= n) {
    throw ConfigError("query index out of range");
  }
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (i != query) dist.emplace_back(squared_distance(samples, query, i), i);
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    out[i] = dist[i].second;
  }
  return out;
}

KnnIndex::KnnIndex(const Matrix &samples, std::size_t k) : k_(k) {
  const auto n = static_cast<std::size_t>(samples.rows());
  check_k(n, k);
  neighbours_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    neighbours_.push_back(knn(samples, i, k));
  }
}

double knn_density(const Matrix &samples, std::size_t i, const std::vector<std::size_t> &neighbours) {
  if (neighbours.empty()) return 0.0;
  double sum = 0.0;
  for (auto j : neighbours) {
    sum += squared_distance(samples, i, j);
  }
  return sum / static_cast<double>(neighbours.size());
}

std::vector<CandidateCenter> find_candidates(const data::Dataset &d, const KnnIndex &index) {
  d.validate();
  std::vector<CandidateCenter> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double y = d.targets[static_cast<Eigen::Index>(i)];
    bool above = true;
    bool below = true;
    for (auto j : index.neighbours(i)) {
      const double yj = d.targets[static_cast<Eigen::Index>(j)];
      above = above && y > yj;
      below = below && y < yj;
    }
    if (above || below) {
      out.push_back({i, d.row(i), y, knn_density(d.inputs, i, index.neighbours(i))});
    }
  }
  return out;
}

std::vector<CandidateCenter> find_candidates(const data::Dataset &d, std::size_t k) {
  return find_candidates(d, KnnIndex(d.inputs, k));
}

CenterSelection select_centers(const std::vector<CandidateCenter> &candidates, std::size_t rules,
                               const data::Dataset &d, const KnnIndex &index) {
  if (rules < 1) {
    throw ConfigError("at least one rule is required");
  }
  if (rules > d.size()) {
    throw ConfigError("cannot place " + std::to_string(rules) + " rules on " + std::to_string(d.size()) +
                      " samples");
  }
  std::vector<CandidateCenter> sorted = candidates;
  std::sort(sorted.begin(), sorted.end(), [](const CandidateCenter &a, const CandidateCenter &b) {
    return a.density != b.density ? a.density < b.density : a.index < b.index;
  });
  CenterSelection sel;
  for (std::size_t i = 0; i < sorted.size() && sel.centers.size() < rules; ++i) {
    sel.centers.push_back(sorted[i]);
  }
  if (sel.centers.size() == rules) {
    return sel;
  }

  std::vector<double> ys(d.targets.data(), d.targets.data() + d.targets.size());
  std::sort(ys.begin(), ys.end());
  const std::size_t mid = ys.size() / 2;
  const double median = ys.size() % 2 ? ys[mid] : 0.5 * (ys[mid - 1] + ys[mid]);

  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(d.targets[static_cast<Eigen::Index>(a)] - median) >
           std::abs(d.targets[static_cast<Eigen::Index>(b)] - median);
  });
  for (auto i : order) {
    if (sel.centers.size() == rules) break;
    const bool taken = std::any_of(sel.centers.begin(), sel.centers.end(),
                                   [i](const CandidateCenter &c) { return c.index == i; });
    if (taken) continue;
    sel.centers.push_back(
        {i, d.row(i), d.targets[static_cast<Eigen::Index>(i)], knn_density(d.inputs, i, index.neighbours(i))});
    ++sel.fallback_count;
  }
  return sel;
}

Matrix local_covariance(const Matrix &samples, const std::vector<std::size_t> &neighbours, const Vector &center) {
  const auto n = samples.cols();
  Matrix q = Matrix::Zero(n, n);
  if (neighbours.empty()) return q;
  for (auto j : neighbours) {
    const Vector d = samples.row(static_cast<Eigen::Index>(j)).transpose() - center;
    q.noalias() += d * d.transpose();
  }
  return q / static_cast<double>(neighbours.size());
}

namespace {

struct Eigensystem {
  Vector values;   // descending
  Matrix vectors;  // columns match values
};

Eigensystem sorted_eigensystem(const Matrix &covariance) {
  if (covariance.rows() != covariance.cols() || covariance.rows() == 0) {
    throw ConfigError("covariance must be a non-empty square matrix");
  }
  const Matrix sym = 0.5 * (covariance + covariance.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw ConfigError("eigendecomposition failed");
  }
  const auto n = sym.rows();
  Eigensystem es{Vector(n), Matrix(n, n)};
  // Eigen returns ascending order.
  for (Eigen::Index r = 0; r < n; ++r) {
    es.values[r] = solver.eigenvalues()[n - 1 - r];
    Vector v = solver.eigenvectors().col(n - 1 - r);
    for (Eigen::Index c = 0; c < n; ++c) {
      if (std::abs(v[c]) > 1e-12) {
        if (v[c] < 0.0) v = -v;
        break;
      }
    }
    es.vectors.col(r) = v;
  }
  const double floor = kEigenFloor * std::max(es.values[0], 1.0);
  for (Eigen::Index r = 0; r < n; ++r) {
    es.values[r] = std::max(es.values[r], floor);
  }
  return es;
}

}  // namespace

Matrix regularized_covariance(const Matrix &covariance) {
  const auto es = sorted_eigensystem(covariance);
  return es.vectors * es.values.asDiagonal() * es.vectors.transpose();
}

Matrix whitening_transform(const Matrix &covariance) {
  const auto es = sorted_eigensystem(covariance);
  const Vector inv_sqrt = es.values.array().rsqrt();
  return inv_sqrt.asDiagonal() * es.vectors.transpose();
}

std::size_t neighbourhood_size(std::size_t samples, std::size_t rules) {
  if (samples < 2) {
    throw ConfigError("initialization needs at least two samples");
  }
  if (rules < 1) {
    throw ConfigError("at least one rule is required");
  }
  return std::clamp<std::size_t>(samples / rules, 1, samples - 1);
}

InitResult initialize_detailed(const data::Dataset &d, std::size_t rules, const InitConfig &config) {
  d.validate();
  if (rules < 1 || rules > d.size()) {
    throw ConfigError("need 1 <= R <= N, got R = " + std::to_string(rules) + ", N = " + std::to_string(d.size()));
  }
  if (!(config.epsilon_delta >= 0.0) || !(config.epsilon_delta < 1.0)) {
    throw ConfigError("epsilon_delta must lie in [0, 1) so that delta < beta = 1");
  }
  const std::size_t k = neighbourhood_size(d.size(), rules);
  const KnnIndex index(d.inputs, k);
  const auto candidates = find_candidates(d, index);
  auto selection = select_centers(candidates, rules, d, index);

  const std::size_t n = d.dim();
  std::vector<Rule> out;
  InitResult result;
  for (const auto &c : selection.centers) {
    Rule r = Rule::identity(n, c.output);
    r.center = c.position;
    r.transform = whitening_transform(local_covariance(d.inputs, index.neighbours(c.index), c.position));
    r.delta.setConstant(config.epsilon_delta);
    r.v1 = 0.5;
    r.v2 = 0.5;
    r.project();
    out.push_back(std::move(r));
    result.neighbourhoods.push_back(index.neighbours(c.index));
  }
  result.network = Network(n, std::move(out), config.output_mode);
  result.centers = std::move(selection.centers);
  result.k = k;
  result.candidate_count = candidates.size();
  result.fallback_count = selection.fallback_count;
  return result;
}

Network initialize(const data::Dataset &d, std::size_t rules, double epsilon_delta) {
  InitConfig config;
  config.epsilon_delta = epsilon_delta;
  return initialize_detailed(d, rules, config).network;
}

}  // namespace it2cfnn::init

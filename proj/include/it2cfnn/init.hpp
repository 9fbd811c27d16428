#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "it2cfnn/data.hpp"
#include "it2cfnn/network.hpp"

namespace it2cfnn::init {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Indices of the k samples nearest to `query` (itself excluded), ordered by
/// squared Euclidean distance with ties broken by lower index.
std::vector<std::size_t> knn(const Matrix &samples, std::size_t query, std::size_t k);

/// Precomputed neighbourhoods for every sample.
class KnnIndex {
 public:
  KnnIndex(const Matrix &samples, std::size_t k);

  std::size_t k() const { return k_; }
  const std::vector<std::size_t> &neighbours(std::size_t i) const { return neighbours_.at(i); }

 private:
  std::size_t k_;
  std::vector<std::vector<std::size_t>> neighbours_;
};

struct CandidateCenter {
  std::size_t index = 0;
  Vector position;
  double output = 0.0;
  double density = 0.0;  // mean squared distance to the KNN; lower is denser
};

/// Mean squared distance from sample `i` to its neighbours.
double knn_density(const Matrix &samples, std::size_t i, const std::vector<std::size_t> &neighbours);

/// Samples whose target is strictly above, or strictly below, every target in
/// their KNN.
std::vector<CandidateCenter> find_candidates(const data::Dataset &d, const KnnIndex &index);
std::vector<CandidateCenter> find_candidates(const data::Dataset &d, std::size_t k);

struct CenterSelection {
  std::vector<CandidateCenter> centers;
  std::size_t fallback_count = 0;  // slots filled from the extreme-target fallback
};

/// The R densest candidates (ties by index). When fewer than R candidates
/// exist, the remaining slots take the samples farthest from the median target.
CenterSelection select_centers(const std::vector<CandidateCenter> &candidates, std::size_t rules,
                               const data::Dataset &d, const KnnIndex &index);

/// (1/K) sum (x - center)(x - center)^T over the given neighbours.
Matrix local_covariance(const Matrix &samples, const std::vector<std::size_t> &neighbours, const Vector &center);

/// Eigenvalues below kEigenFloor * max(lambda_max, 1) are raised to that floor.
inline constexpr double kEigenFloor = 1e-8;

/// Gamma = Lambda^{-1/2} Phi^T, rows ordered by descending eigenvalue and each
/// eigenvector's first nonzero component made positive.
Matrix whitening_transform(const Matrix &covariance);

/// The floored covariance that `whitening_transform` actually inverts.
Matrix regularized_covariance(const Matrix &covariance);

struct InitConfig {
  double epsilon_delta = 0.1;
  OutputMode output_mode = OutputMode::Sum;
};

struct InitResult {
  Network network;
  std::vector<CandidateCenter> centers;
  std::vector<std::vector<std::size_t>> neighbourhoods;
  std::size_t k = 0;
  std::size_t candidate_count = 0;
  std::size_t fallback_count = 0;
};

/// K used for a dataset of N samples and R rules: floor(N/R), clamped to [1, N-1].
std::size_t neighbourhood_size(std::size_t samples, std::size_t rules);

InitResult initialize_detailed(const data::Dataset &d, std::size_t rules, const InitConfig &config = {});
Network initialize(const data::Dataset &d, std::size_t rules, double epsilon_delta = 0.1);

}  // namespace it2cfnn::init

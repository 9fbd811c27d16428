#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <random>
#include <string>

#include "it2cfnn/network.hpp"

namespace support {

/// Seeded draws for the property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  double sign() { return uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0; }

  it2cfnn::Vector vector(std::size_t n, double lo, double hi) {
    it2cfnn::Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = uniform(lo, hi);
    return v;
  }

  /// A B^T B + 0.1 I style symmetric positive-definite matrix.
  it2cfnn::Matrix spd(std::size_t n) {
    it2cfnn::Matrix b(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < b.rows(); ++i)
      for (Eigen::Index j = 0; j < b.cols(); ++j) b(i, j) = normal();
    return b.transpose() * b + 0.1 * it2cfnn::Matrix::Identity(b.rows(), b.cols());
  }

  std::mt19937_64 &engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline it2cfnn::Vector vec(std::initializer_list<double> v) {
  it2cfnn::Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline it2cfnn::Matrix mat2(double a, double b, double c, double d) {
  it2cfnn::Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

/// Two-rule network whose outputs and derivatives were evaluated
/// independently at 40 significant digits.
inline it2cfnn::Network fixed_net(it2cfnn::OutputMode mode = it2cfnn::OutputMode::Sum) {
  it2cfnn::Rule r0;
  r0.center = vec({0.2, -0.1});
  r0.transform = mat2(1.5, 0.3, -0.2, 0.8);
  r0.beta = vec({1.1, 0.7});
  r0.delta = vec({0.3, 0.2});
  r0.v1 = 0.6;
  r0.v2 = 0.9;
  r0.consequent = 2.5;

  it2cfnn::Rule r1;
  r1.center = vec({-0.5, 0.4});
  r1.transform = mat2(0.9, -0.4, 0.1, 1.2);
  r1.beta = vec({0.9, 1.3});
  r1.delta = vec({0.1, 0.5});
  r1.v1 = 1.0;
  r1.v2 = 0.4;
  r1.consequent = -1.2;
  return it2cfnn::Network(2, {r0, r1}, mode);
}

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string &tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("it2cfnn_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  std::string file(const std::string &name) const { return (path_ / name).string(); }
  const std::filesystem::path &path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace support

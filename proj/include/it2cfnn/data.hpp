#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "it2cfnn/network.hpp"

namespace it2cfnn::data {

/// Raised for malformed input data or impossible dataset configurations.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NormalizationMode { None, MinMax01, ZScore };

std::string to_string(NormalizationMode mode);
NormalizationMode parse_normalization_mode(const std::string &name);

/// value -> (value - offset) / scale
struct AffineMap {
  double offset = 0.0;
  double scale = 1.0;

  double apply(double v) const { return (v - offset) / scale; }
  double invert(double v) const { return v * scale + offset; }

  bool operator==(const AffineMap &) const = default;
};

struct Normalization {
  NormalizationMode mode = NormalizationMode::None;
  std::vector<AffineMap> inputs;
  AffineMap target;

  bool operator==(const Normalization &) const = default;
};

struct Dataset {
  Matrix inputs;  // N x n
  Vector targets;
  std::optional<Normalization> normalization;

  std::size_t size() const { return static_cast<std::size_t>(targets.size()); }
  std::size_t dim() const { return static_cast<std::size_t>(inputs.cols()); }
  Vector row(std::size_t k) const { return inputs.row(static_cast<Eigen::Index>(k)).transpose(); }

  /// Contiguous block of rows [begin, begin + count).
  Dataset slice(std::size_t begin, std::size_t count) const;
  /// Rows in the given order.
  Dataset select(const std::vector<std::size_t> &indices) const;

  /// Throws DataError if row counts disagree.
  void validate() const;
};

struct Split {
  Dataset train;
  Dataset test;
};

/// First `train_count` rows train, the rest test.
Split split_head(const Dataset &d, std::size_t train_count);

/// 0..n-1 in a seeded Fisher-Yates order.
std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed);

/// Seeded shuffle, then the first `train_count` shuffled rows train.
Split split_shuffled(const Dataset &d, std::size_t train_count, std::uint64_t seed);

// ---------------------------------------------------------------- generators

/// The correlated two-hump surface on [-2, 3]^2. Fractional powers act on |z|.
double two_hump(double x1, double x2);

/// `count` points drawn uniformly from [-2, 3]^2.
Dataset synthetic_two_hump(std::size_t count, std::uint64_t seed);

/// Regular per_axis x per_axis grid over [-2, 3]^2.
Dataset synthetic_two_hump_grid(std::size_t per_axis);

struct MackeyGlassParams {
  double x0 = 1.2;
  double tau = 17.0;
  long t_start = 0;
  long t_end = 1123;
  double dt = 0.1;
};

/// Integrates dx/dt = 0.2 x(t-tau) / (1 + x(t-tau)^10) - 0.1 x(t) by RK4 with
/// cubic Hermite interpolation of the delayed state,
/// constant pre-history x0 and returns x at integer t in [t_start, t_end].
std::vector<double> mackey_glass(const MackeyGlassParams &params = {});

/// One input column: channel value `lag + horizon` steps before the target.
struct LagTerm {
  std::size_t channel = 0;
  std::size_t lag = 1;
};

struct SeriesSpec {
  std::vector<LagTerm> lags;
  std::size_t target_channel = 0;
  std::size_t horizon = 0;
  /// Index of the first target; defaults to the earliest admissible one.
  std::optional<std::size_t> first_target;
  /// Number of rows; defaults to as many as fit.
  std::optional<std::size_t> count;

  static SeriesSpec single(std::vector<std::size_t> lags, std::size_t horizon = 0);
};

/// Rows x_T = [c_{ch}[T - horizon - lag] for each term] -> c_target[T].
Dataset lag_embed(const std::vector<std::vector<double>> &channels, const SeriesSpec &spec);
Dataset lag_embed(const std::vector<double> &series, const SeriesSpec &spec);

enum class NoiseScope { Inputs, Targets, Both };

/// Adds N(0, std^2) to every value. std = 0 returns the input unchanged.
std::vector<double> add_gaussian_noise(std::vector<double> series, double std, std::uint64_t seed);
Dataset add_gaussian_noise(Dataset d, double std, std::uint64_t seed, NoiseScope scope = NoiseScope::Both);

// -------------------------------------------------------------- normalization

/// Fits per-column maps on `d`. Throws DataError for a constant column under MinMax01.
Normalization fit_normalization(const Dataset &d, NormalizationMode mode);

/// Maps inputs and targets into normalized units and attaches `norm`.
Dataset apply_normalization(const Dataset &d, const Normalization &norm);

/// Fit + apply.
Dataset normalize(const Dataset &d, NormalizationMode mode);

/// Maps model outputs back to original target units.
Vector denormalize_targets(const Vector &values, const Normalization &norm);

/// Inverse of apply_normalization.
Dataset denormalize(const Dataset &d);

// ----------------------------------------------------------------------- CSV

/// A parsed numeric CSV table.
struct Table {
  std::vector<std::string> header;  // empty when the file has none
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  /// Column index for a header name or a decimal index string.
  std::size_t column_index(const std::string &key) const;
};

/// Comma separated, '.' decimal, '#' comment lines skipped. Throws DataError
/// naming row and column on parse failure or non-finite cells.
Table read_csv(const std::string &path, bool has_header);

/// True when the first data line has a non-numeric field.
bool sniff_header(const std::string &path);

/// 17 significant digits per value.
void write_csv(const std::string &path, const std::vector<std::string> &header,
               const std::vector<std::vector<double>> &columns);

struct ColumnSpec {
  bool has_header = false;
  /// Header names or decimal indices. Empty = every column except the target.
  std::vector<std::string> inputs;
  /// Header name or index. Empty = last column.
  std::string target;
};

Dataset load_csv(const std::string &path, const ColumnSpec &spec);

/// Writes inputs followed by the target, with header x1..xn,y.
void save_csv(const Dataset &d, const std::string &path);

/// Formats with 17 significant digits.
std::string format_double(double v);

}  // namespace it2cfnn::data

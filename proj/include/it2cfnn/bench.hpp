#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "it2cfnn/data.hpp"
#include "it2cfnn/init.hpp"
#include "it2cfnn/network.hpp"
#include "it2cfnn/train.hpp"

namespace it2cfnn::bench {

inline constexpr int kRegistryVersion = 1;

/// Root mean squared difference. Throws std::invalid_argument on a length
/// mismatch or empty input.
double rmse(const Vector &predictions, const Vector &targets);

/// splitmix64 finalizer over a base seed and three stream labels.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

/// Mean over rules and features of umf - lmf evaluated at |z| = z.
double mean_fou_width(const Network &net, double z = 0.5);

enum class SourceKind { TwoHump, MackeyGlass, Csv };
enum class SplitKind { Head, Shuffled, All };

/// Where training noise goes: on the raw series before lag embedding, or on
/// the targets of a generated regression set.
enum class NoiseTarget { Series, Targets };

struct DataRecipe {
  SourceKind kind = SourceKind::MackeyGlass;
  std::size_t samples = 700;  // two-hump
  data::MackeyGlassParams mackey_glass;
  std::string csv_path;
  std::optional<bool> csv_header;     // unset: sniffed from the file
  std::vector<std::string> channels;  // CSV columns in channel order
  data::SeriesSpec series;
  data::NormalizationMode normalization = data::NormalizationMode::None;
};

struct SplitSpec {
  SplitKind kind = SplitKind::Head;
  std::size_t train = 0;
  std::optional<std::size_t> test;  // unset: every remaining row
};

/// A published number for one grid cell, with an optional baseline.
struct ReferenceValue {
  double train_std = 0.0;
  double test_std = 0.0;
  double rmse = 0.0;
  std::string baseline;
  std::optional<double> baseline_rmse;
};

struct ExperimentSpec {
  std::string name;
  std::string description;
  DataRecipe data;
  SplitSpec split;
  std::size_t rules = 2;
  init::InitConfig init;
  train::TrainConfig train;
  std::vector<double> train_noise{0.0};
  std::vector<double> test_noise{0.0};  // 0 means clean
  NoiseTarget noise_target = NoiseTarget::Series;
  std::size_t repetitions = 1;
  std::uint64_t seed = 0;
  std::vector<ReferenceValue> reference;
  std::vector<std::string> assumptions;

  /// Throws init::ConfigError.
  void validate() const;
  std::optional<ReferenceValue> reference_for(double train_std, double test_std) const;
};

/// Overlays keys of `j` onto the configs. Unknown keys throw init::ConfigError.
void apply_config(const nlohmann::json &j, init::InitConfig &init, train::TrainConfig &train);
nlohmann::json config_json(const init::InitConfig &init, const train::TrainConfig &train);

ExperimentSpec experiment_from_json(const std::string &name, const nlohmann::json &j);
nlohmann::json to_json(const ExperimentSpec &spec);

struct Registry {
  int version = kRegistryVersion;
  std::string path;
  nlohmann::json experiments;

  std::vector<std::string> names() const;
  /// Relative CSV paths resolve against the registry's directory, after an
  /// environment override named by the entry's "path_env".
  ExperimentSpec get(const std::string &name) const;
};

/// Path compiled in at build time, overridable by IT2CFNN_REGISTRY.
std::string default_registry_path();
Registry load_registry(const std::string &path = default_registry_path());

/// One trained network: a (train noise, repetition) pair.
struct RunRecord {
  double train_std = 0.0;
  std::size_t rep = 0;
  std::uint64_t train_seed = 0;
  bool ok = false;
  bool diverged = false;
  std::string error;
  std::optional<Network> network;
  double init_train_rmse = 0.0;
  double train_rmse = 0.0;
  std::vector<double> init_test_rmse;  // per test noise level
  std::vector<double> test_rmse;
  std::size_t epochs = 0;
  std::string stop_reason;
  std::vector<std::size_t> centers;  // dataset rows chosen as initial centers
};

struct Cell {
  double train_std = 0.0;
  double test_std = 0.0;
  std::vector<double> rmse;  // successful repetitions only
  std::size_t failures = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double init_mean = 0.0;
  double train_mean = 0.0;
  std::optional<ReferenceValue> reference;
};

struct RunReport {
  std::string experiment;
  std::size_t rules = 0;
  std::size_t inputs = 0;
  std::size_t param_count = 0;
  std::size_t trainable_count = 0;
  std::size_t repetitions = 0;
  std::vector<Cell> cells;
  std::vector<RunRecord> runs;
  nlohmann::json manifest;
  std::string manifest_path;  // empty when nothing was persisted
  double wall_seconds = 0.0;
};

struct RunOptions {
  std::string out_dir;    // models, histories, manifest and report; empty: none
  unsigned jobs = 1;      // worker threads over (train noise, repetition)
  std::ostream *log = nullptr;
};

/// Builds the data, initializes and trains one network per train noise level
/// and repetition, and scores it on every test noise level in original
/// target units. A failed repetition is recorded and excluded from its cell.
RunReport run_experiment(const ExperimentSpec &spec, const RunOptions &options = {});

/// Labels versus the noise actually injected. Returns one message per
/// inconsistency; empty means the manifest is consistent.
std::vector<std::string> check_manifest(const nlohmann::json &manifest);

/// One row per cell. Wall time is left out so identical runs give identical bytes.
void write_report_csv(std::ostream &out, const RunReport &report);
void write_report_csv(const std::string &path, const RunReport &report);

/// Human-readable table, including wall time.
void print_report(std::ostream &out, const RunReport &report);

}  // namespace it2cfnn::bench

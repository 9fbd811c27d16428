// Command-line front end: dataset generation, initialization, training,
// prediction, canned benchmarks and gradient checks.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "it2cfnn/bench.hpp"
#include "it2cfnn/data.hpp"
#include "it2cfnn/init.hpp"
#include "it2cfnn/model_io.hpp"
#include "it2cfnn/network.hpp"
#include "it2cfnn/train.hpp"

namespace {

using namespace it2cfnn;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct Global {
  std::uint64_t seed = 0;
  std::string config;
  std::string out = ".";
};

struct DataArgs {
  std::string path;
  std::string header = "auto";
  std::vector<std::string> inputs;
  std::string target;
};

void add_data_options(CLI::App *cmd, DataArgs &a) {
  cmd->add_option("--data", a.path, "Numeric CSV, inputs then target")->required()->check(CLI::ExistingFile);
  cmd->add_option("--header", a.header, "Header row present: yes, no or auto")
      ->check(CLI::IsMember({"yes", "no", "auto"}));
  cmd->add_option("--inputs", a.inputs, "Input columns (names or indices); default all but the target")
      ->delimiter(',');
  cmd->add_option("--target", a.target, "Target column; default the last one");
}

data::Dataset load(const DataArgs &a) {
  data::ColumnSpec spec;
  spec.has_header = a.header == "yes" || (a.header == "auto" && data::sniff_header(a.path));
  spec.inputs = a.inputs;
  spec.target = a.target;
  return data::load_csv(a.path, spec);
}

void load_config(const Global &g, init::InitConfig &ic, train::TrainConfig &tc) {
  tc.seed = g.seed;
  if (g.config.empty()) return;
  std::ifstream in(g.config);
  if (!in) throw init::ConfigError("cannot open config '" + g.config + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw init::ConfigError("config '" + g.config + "' is not valid JSON: " + e.what());
  }
  bench::apply_config(j, ic, tc);
}

std::string out_path(const Global &g, const std::string &name) {
  fs::create_directories(g.out);
  return (fs::path(g.out) / name).string();
}

double noise_level(const std::string &s) {
  if (s == "clean") return 0.0;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used != s.size() || !(v >= 0.0)) throw CLI::ValidationError("noise level", "'" + s + "' is not a std or 'clean'");
  return v;
}

// ------------------------------------------------------------------ generate

struct GenerateArgs {
  std::string kind;
  std::size_t samples = 700;
  std::size_t grid = 0;
  long t_end = 1123;
  std::vector<std::size_t> lags{6, 12, 18, 24};
  std::size_t horizon = 0;
  std::optional<std::size_t> first_target;
  std::optional<std::size_t> count;
  bool series_only = false;
  double noise = 0.0;
  std::string scope = "both";
  std::string file;
};

int run_generate(const Global &g, const GenerateArgs &a) {
  data::Dataset d;
  if (a.kind == "two-hump") {
    d = a.grid > 0 ? data::synthetic_two_hump_grid(a.grid) : data::synthetic_two_hump(a.samples, g.seed);
    if (a.noise > 0.0) {
      const auto scope = a.scope == "inputs"    ? data::NoiseScope::Inputs
                         : a.scope == "targets" ? data::NoiseScope::Targets
                                                : data::NoiseScope::Both;
      d = data::add_gaussian_noise(d, a.noise, bench::derive_seed(g.seed, 1), scope);
    }
  } else {
    data::MackeyGlassParams mg;
    mg.t_end = a.t_end;
    auto series = data::add_gaussian_noise(data::mackey_glass(mg), a.noise, bench::derive_seed(g.seed, 1));
    if (a.series_only) {
      const std::string path = out_path(g, a.file.empty() ? "mackey_glass_series.csv" : a.file);
      data::write_csv(path, {"x"}, {series});
      std::cout << "wrote " << series.size() << " samples to " << path << '\n';
      return kExitOk;
    }
    data::SeriesSpec spec = data::SeriesSpec::single(a.lags, a.horizon);
    spec.first_target = a.first_target;
    spec.count = a.count;
    d = data::lag_embed(series, spec);
  }
  const std::string path = out_path(g, a.file.empty() ? a.kind + ".csv" : a.file);
  data::save_csv(d, path);
  std::cout << "wrote " << d.size() << " rows x " << d.dim() << " inputs to " << path << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- init/train

struct ModelArgs {
  DataArgs data;
  std::size_t rules = 2;
  std::string normalize = "none";
  std::string start;  // existing model to continue from
  std::string model_file = "model.json";
  std::string history_file = "history.csv";
};

/// Training data in model units plus the normalization to store with the model.
std::pair<data::Dataset, std::optional<data::Normalization>> model_units(const data::Dataset &raw,
                                                                          const std::string &mode,
                                                                          const std::optional<data::Normalization> &fixed) {
  if (fixed) return {data::apply_normalization(raw, *fixed), fixed};
  const auto m = data::parse_normalization_mode(mode);
  if (m == data::NormalizationMode::None) return {raw, std::nullopt};
  auto norm = data::fit_normalization(raw, m);
  return {data::apply_normalization(raw, norm), norm};
}

double original_rmse(const io::ModelFile &model, const data::Dataset &raw) {
  Vector pred = model.network.predict(model.normalization ? data::apply_normalization(raw, *model.normalization).inputs
                                                          : raw.inputs);
  if (model.normalization) pred = data::denormalize_targets(pred, *model.normalization);
  return bench::rmse(pred, raw.targets);
}

int run_init(const Global &g, const ModelArgs &a) {
  init::InitConfig ic;
  train::TrainConfig tc;
  load_config(g, ic, tc);
  const data::Dataset raw = load(a.data);
  auto [d, norm] = model_units(raw, a.normalize, std::nullopt);
  const init::InitResult r = init::initialize_detailed(d, a.rules, ic);
  const io::ModelFile model{r.network, norm};
  const std::string path = out_path(g, a.model_file);
  io::save_model(path, model);
  std::cout << "K = " << r.k << ", " << r.candidate_count << " candidates, " << r.fallback_count
            << " fallback center(s)\n"
            << "initial RMSE " << original_rmse(model, raw) << "\nwrote " << path << '\n';
  return kExitOk;
}

int run_train(const Global &g, const ModelArgs &a) {
  init::InitConfig ic;
  train::TrainConfig tc;
  load_config(g, ic, tc);
  const data::Dataset raw = load(a.data);
  std::optional<io::ModelFile> start;
  if (!a.start.empty()) start = io::load_model(a.start);
  auto [d, norm] = model_units(raw, a.normalize, start ? start->normalization : std::nullopt);
  Network net = start ? start->network : init::initialize_detailed(d, a.rules, ic).network;
  const train::FitResult fr = train::fit(std::move(net), d, tc);
  const io::ModelFile model{fr.network, norm};
  const std::string model_path = out_path(g, a.model_file);
  const std::string history_path = out_path(g, a.history_file);
  io::save_model(model_path, model);
  train::write_history_csv(history_path, fr.history);
  std::cout << "stopped: " << fr.stop_reason << " after " << fr.epochs << " epoch(s)\n"
            << "train RMSE (model units) " << fr.final_train_rmse << '\n'
            << "RMSE on --data (original units) " << original_rmse(model, raw) << '\n'
            << "wrote " << model_path << " and " << history_path << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------ predict

struct PredictArgs {
  std::string model;
  std::string data;
  std::string header = "auto";
  std::string file = "predictions.csv";
};

int run_predict(const Global &g, const PredictArgs &a) {
  const io::ModelFile model = io::load_model(a.model);
  const std::size_t n = model.network.input_dim();
  const data::Table t = data::read_csv(a.data, a.header == "yes" || (a.header == "auto" && data::sniff_header(a.data)));
  if (t.columns.size() != n && t.columns.size() != n + 1) {
    throw data::DataError("'" + a.data + "' has " + std::to_string(t.columns.size()) + " columns; the model takes " +
                          std::to_string(n) + " inputs (optionally followed by a target)");
  }
  const bool has_target = t.columns.size() == n + 1;
  data::Dataset raw{Matrix(static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(n)),
                    Vector::Zero(static_cast<Eigen::Index>(t.rows())), std::nullopt};
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t r = 0; r < t.rows(); ++r) raw.inputs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t.columns[c][r];
  }
  if (has_target) {
    for (std::size_t r = 0; r < t.rows(); ++r) raw.targets[static_cast<Eigen::Index>(r)] = t.columns[n][r];
  }
  Vector pred = model.network.predict(
      model.normalization ? data::apply_normalization(raw, *model.normalization).inputs : raw.inputs);
  if (model.normalization) pred = data::denormalize_targets(pred, *model.normalization);
  const std::string path = out_path(g, a.file);
  std::vector<std::vector<double>> cols{std::vector<double>(pred.data(), pred.data() + pred.size())};
  std::vector<std::string> header{"y_hat"};
  if (has_target) {
    cols.emplace_back(raw.targets.data(), raw.targets.data() + raw.targets.size());
    header.emplace_back("y");
  }
  data::write_csv(path, header, cols);
  if (has_target) std::cout << "RMSE " << data::format_double(bench::rmse(pred, raw.targets)) << '\n';
  std::cout << "wrote " << pred.size() << " predictions to " << path << '\n';
  return kExitOk;
}

// -------------------------------------------------------------------- bench

struct BenchArgs {
  std::string name;
  std::string registry;
  std::vector<std::string> train_noise;
  std::vector<std::string> test_noise;
  std::optional<std::size_t> rules;
  std::optional<std::size_t> reps;
  std::string csv;
  unsigned jobs = 1;
  bool list = false;
  bool save = false;
};

int run_bench(const Global &g, const BenchArgs &a, bool seed_given) {
  const bench::Registry reg = bench::load_registry(a.registry.empty() ? bench::default_registry_path() : a.registry);
  if (a.list || a.name.empty()) {
    for (const auto &n : reg.names()) std::cout << n << '\n';
    return a.name.empty() && !a.list ? kExitUsage : kExitOk;
  }
  bench::ExperimentSpec spec = reg.get(a.name);
  if (!g.config.empty()) load_config(g, spec.init, spec.train);
  if (seed_given) spec.seed = g.seed;
  if (!a.train_noise.empty()) {
    spec.train_noise.clear();
    for (const auto &s : a.train_noise) spec.train_noise.push_back(noise_level(s));
  }
  if (!a.test_noise.empty()) {
    spec.test_noise.clear();
    for (const auto &s : a.test_noise) spec.test_noise.push_back(noise_level(s));
  }
  if (a.rules) spec.rules = *a.rules;
  if (a.reps) spec.repetitions = *a.reps;
  if (!a.csv.empty()) spec.data.csv_path = a.csv;
  if (spec.data.kind == bench::SourceKind::Csv && !fs::exists(spec.data.csv_path)) {
    throw data::DataError("experiment '" + spec.name + "' needs a CSV at '" + spec.data.csv_path +
                          "' (pass --csv or set the path variable)");
  }
  bench::RunOptions opts;
  opts.jobs = a.jobs;
  opts.log = &std::cerr;
  if (a.save) opts.out_dir = g.out;
  const bench::RunReport report = bench::run_experiment(spec, opts);
  bench::print_report(std::cout, report);
  const auto problems = bench::check_manifest(report.manifest);
  for (const auto &p : problems) std::cerr << "manifest check: " << p << '\n';
  if (!problems.empty()) return kExitData;
  for (const auto &r : report.runs) {
    if (r.diverged) return kExitNumeric;
  }
  return kExitOk;
}

// --------------------------------------------------------------- check-grad

struct GradArgs {
  std::size_t inputs = 3;
  std::size_t rules = 2;
  std::size_t samples = 40;
  bool normalized = false;
  double tolerance = 1e-4;
};

int run_check_grad(const Global &g, const GradArgs &a) {
  const auto p = train::random_problem(a.inputs, a.rules, a.samples, g.seed,
                                       a.normalized ? OutputMode::Normalized : OutputMode::Sum);
  double worst = 0.0;
  for (auto group : train::kAllGroups) {
    const auto c = train::check_gradient(p.network, p.data, group);
    std::printf("%-10s max rel error %.3e  (%zu compared, %zu near a kink)\n", train::to_string(group).c_str(),
                c.max_rel_error, c.compared, c.excluded);
    worst = std::max(worst, c.max_rel_error);
  }
  std::printf("max relative deviation %.3e: %s\n", worst, worst < a.tolerance ? "ok" : "FAILED");
  return worst < a.tolerance ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Interval type-2 correlation-aware fuzzy neural network toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  auto *seed_opt = app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--config", g.config, "JSON file with training settings")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory");

  GenerateArgs gen;
  auto *cmd_gen = app.add_subcommand("generate", "Write a synthetic dataset as CSV");
  cmd_gen->add_option("kind", gen.kind, "two-hump or mackey-glass")
      ->required()
      ->check(CLI::IsMember({"two-hump", "mackey-glass"}));
  cmd_gen->add_option("--samples", gen.samples, "Uniform samples (two-hump)");
  cmd_gen->add_option("--grid", gen.grid, "Points per axis of a regular grid instead (two-hump)");
  cmd_gen->add_option("--t-end", gen.t_end, "Last integer time (mackey-glass)");
  cmd_gen->add_option("--lags", gen.lags, "Lag offsets (mackey-glass)")->delimiter(',');
  cmd_gen->add_option("--horizon", gen.horizon, "Steps between the newest input and the target");
  cmd_gen->add_option("--first-target", gen.first_target, "Index of the first target");
  cmd_gen->add_option("--count", gen.count, "Number of rows");
  cmd_gen->add_flag("--series", gen.series_only, "Write the raw series instead of lagged rows");
  cmd_gen->add_option("--noise", gen.noise, "Gaussian noise std")->check(CLI::NonNegativeNumber);
  cmd_gen->add_option("--noise-scope", gen.scope, "inputs, targets or both (two-hump)")
      ->check(CLI::IsMember({"inputs", "targets", "both"}));
  cmd_gen->add_option("--file", gen.file, "Output file name inside --out");

  ModelArgs init_args;
  auto *cmd_init = app.add_subcommand("init", "Place rules from data without training");
  add_data_options(cmd_init, init_args.data);
  cmd_init->add_option("--rules", init_args.rules, "Number of rules")->check(CLI::PositiveNumber);
  cmd_init->add_option("--normalize", init_args.normalize, "none, minmax01 or zscore")
      ->check(CLI::IsMember({"none", "minmax01", "zscore"}));
  cmd_init->add_option("--model-file", init_args.model_file, "Model file name inside --out");

  ModelArgs train_args;
  auto *cmd_train = app.add_subcommand("train", "Initialize (or load) and train a network");
  add_data_options(cmd_train, train_args.data);
  cmd_train->add_option("--rules", train_args.rules, "Number of rules")->check(CLI::PositiveNumber);
  cmd_train->add_option("--normalize", train_args.normalize, "none, minmax01 or zscore")
      ->check(CLI::IsMember({"none", "minmax01", "zscore"}));
  cmd_train->add_option("--model", train_args.start, "Start from this model instead of initializing")
      ->check(CLI::ExistingFile);
  cmd_train->add_option("--model-file", train_args.model_file, "Model file name inside --out");
  cmd_train->add_option("--history-file", train_args.history_file, "History CSV name inside --out");

  PredictArgs pred;
  auto *cmd_pred = app.add_subcommand("predict", "Evaluate a saved model on a CSV");
  cmd_pred->add_option("--model", pred.model, "Model file")->required()->check(CLI::ExistingFile);
  cmd_pred->add_option("--data", pred.data, "CSV with the model's inputs, optionally then a target")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_pred->add_option("--header", pred.header, "Header row present: yes, no or auto")
      ->check(CLI::IsMember({"yes", "no", "auto"}));
  cmd_pred->add_option("--file", pred.file, "Predictions file name inside --out");

  BenchArgs ba;
  auto *cmd_bench = app.add_subcommand("bench", "Run a registered experiment");
  cmd_bench->add_option("experiment", ba.name, "Experiment name");
  cmd_bench->add_flag("--list", ba.list, "List registered experiments");
  cmd_bench->add_option("--registry", ba.registry, "Registry file");
  cmd_bench->add_option("--train-noise", ba.train_noise, "Training noise levels")->delimiter(',');
  cmd_bench->add_option("--test-noise", ba.test_noise, "Test noise levels ('clean' for none)")->delimiter(',');
  cmd_bench->add_option("--rules", ba.rules, "Override the rule count")->check(CLI::PositiveNumber);
  cmd_bench->add_option("--reps", ba.reps, "Override the repetition count")->check(CLI::PositiveNumber);
  cmd_bench->add_option("--csv", ba.csv, "Data file for CSV-backed experiments");
  cmd_bench->add_option("--jobs", ba.jobs, "Worker threads")->check(CLI::PositiveNumber);
  cmd_bench->add_flag("--save", ba.save, "Write models, histories, manifest and report CSV to --out");

  GradArgs ga;
  auto *cmd_grad = app.add_subcommand("check-grad", "Compare analytic and finite-difference Jacobians");
  cmd_grad->add_option("--inputs", ga.inputs, "Input dimension")->check(CLI::PositiveNumber);
  cmd_grad->add_option("--rules", ga.rules, "Number of rules")->check(CLI::PositiveNumber);
  cmd_grad->add_option("--samples", ga.samples, "Number of samples")->check(CLI::PositiveNumber);
  cmd_grad->add_flag("--normalized", ga.normalized, "Use the normalized output mode");
  cmd_grad->add_option("--tolerance", ga.tolerance, "Largest accepted relative deviation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (cmd_gen->parsed()) return run_generate(g, gen);
    if (cmd_init->parsed()) return run_init(g, init_args);
    if (cmd_train->parsed()) return run_train(g, train_args);
    if (cmd_pred->parsed()) return run_predict(g, pred);
    if (cmd_bench->parsed()) return run_bench(g, ba, seed_opt->count() > 0);
    if (cmd_grad->parsed()) return run_check_grad(g, ga);
  } catch (const CLI::ValidationError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const init::ConfigError &e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const train::DivergenceError &e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

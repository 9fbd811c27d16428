#include "it2cfnn/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "it2cfnn/fuzzy.hpp"
#include "it2cfnn/model_io.hpp"

#ifndef IT2CFNN_REGISTRY_PATH
#define IT2CFNN_REGISTRY_PATH "registry/experiments.json"
#endif

namespace it2cfnn::bench {

using nlohmann::json;
using init::ConfigError;

double rmse(const Vector &predictions, const Vector &targets) {
  if (predictions.size() != targets.size()) {
    throw std::invalid_argument("rmse: " + std::to_string(predictions.size()) + " predictions for " +
                                std::to_string(targets.size()) + " targets");
  }
  if (targets.size() == 0) {
    throw std::invalid_argument("rmse: empty input");
  }
  return std::sqrt((predictions - targets).squaredNorm() / static_cast<double>(targets.size()));
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  h = mix(h ^ a);
  h = mix(h ^ b);
  return mix(h ^ c);
}

double mean_fou_width(const Network &net, double z) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto &r : net.rules()) {
    for (Eigen::Index j = 0; j < r.beta.size(); ++j) {
      const fuzzy::ShapeParams p{0.0, 1.0, r.beta[j], std::abs(r.delta[j])};
      total += fuzzy::umf(z, p) - fuzzy::lmf(z, p);
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

// ------------------------------------------------------------------ enums

namespace {

std::string source_name(SourceKind k) {
  switch (k) {
    case SourceKind::TwoHump:
      return "two-hump";
    case SourceKind::MackeyGlass:
      return "mackey-glass";
    case SourceKind::Csv:
      return "csv";
  }
  return "csv";
}

SourceKind parse_source(const std::string &s) {
  if (s == "two-hump") return SourceKind::TwoHump;
  if (s == "mackey-glass") return SourceKind::MackeyGlass;
  if (s == "csv") return SourceKind::Csv;
  throw ConfigError("unknown data source '" + s + "'");
}

std::string split_name(SplitKind k) {
  switch (k) {
    case SplitKind::Head:
      return "head";
    case SplitKind::Shuffled:
      return "shuffled";
    case SplitKind::All:
      return "all";
  }
  return "head";
}

SplitKind parse_split(const std::string &s) {
  if (s == "head") return SplitKind::Head;
  if (s == "shuffled") return SplitKind::Shuffled;
  if (s == "all") return SplitKind::All;
  throw ConfigError("unknown split kind '" + s + "'");
}

std::string noise_target_name(NoiseTarget t) { return t == NoiseTarget::Series ? "series" : "targets"; }

NoiseTarget parse_noise_target(const std::string &s) {
  if (s == "series") return NoiseTarget::Series;
  if (s == "targets") return NoiseTarget::Targets;
  throw ConfigError("unknown noise target '" + s + "'");
}

std::string noise_label(double std) { return std == 0.0 ? "clean" : json(std).dump(); }

void check_keys(const json &j, std::initializer_list<const char *> allowed, const std::string &where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto &item : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char *k) { return item.key() == k; })) {
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

}  // namespace

// ----------------------------------------------------------------- config

void apply_config(const json &j, init::InitConfig &ic, train::TrainConfig &tc) {
  check_keys(j,
             {"lambda0", "eta", "validation_fraction", "split_mode", "seed", "max_epochs", "max_inner", "patience",
              "group_order", "reject_worsening", "max_retries", "divergence_factor", "epsilon_delta",
              "output_mode"},
             "config");
  try {
    if (j.contains("lambda0")) tc.lambda0 = j["lambda0"].get<double>();
    if (j.contains("eta")) tc.eta = j["eta"].get<double>();
    if (j.contains("validation_fraction")) tc.validation_fraction = j["validation_fraction"].get<double>();
    if (j.contains("split_mode")) tc.split_mode = train::parse_split_mode(j["split_mode"].get<std::string>());
    if (j.contains("seed")) tc.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("max_epochs")) tc.max_epochs = j["max_epochs"].get<std::size_t>();
    if (j.contains("max_inner")) tc.max_inner = j["max_inner"].get<std::size_t>();
    if (j.contains("patience")) tc.patience = j["patience"].get<std::size_t>();
    if (j.contains("group_order")) {
      tc.group_order.clear();
      for (const auto &g : j["group_order"]) tc.group_order.push_back(train::parse_group(g.get<std::string>()));
    }
    if (j.contains("reject_worsening")) tc.reject_worsening = j["reject_worsening"].get<bool>();
    if (j.contains("max_retries")) tc.max_retries = j["max_retries"].get<std::size_t>();
    if (j.contains("divergence_factor")) tc.divergence_factor = j["divergence_factor"].get<double>();
    if (j.contains("epsilon_delta")) ic.epsilon_delta = j["epsilon_delta"].get<double>();
    if (j.contains("output_mode")) {
      const auto mode = j["output_mode"].get<std::string>();
      if (mode == "sum") {
        ic.output_mode = OutputMode::Sum;
      } else if (mode == "normalized") {
        ic.output_mode = OutputMode::Normalized;
      } else {
        throw ConfigError("unknown output_mode '" + mode + "'");
      }
    }
  } catch (const json::exception &e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  } catch (const std::invalid_argument &e) {
    throw ConfigError(e.what());
  }
  try {
    tc.validate();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(e.what());
  }
}

json config_json(const init::InitConfig &ic, const train::TrainConfig &tc) {
  json groups = json::array();
  for (auto g : tc.group_order) groups.push_back(train::to_string(g));
  return {{"lambda0", tc.lambda0},
          {"eta", tc.eta},
          {"validation_fraction", tc.validation_fraction},
          {"split_mode", train::to_string(tc.split_mode)},
          {"seed", tc.seed},
          {"max_epochs", tc.max_epochs},
          {"max_inner", tc.max_inner},
          {"patience", tc.patience},
          {"group_order", groups},
          {"reject_worsening", tc.reject_worsening},
          {"max_retries", tc.max_retries},
          {"divergence_factor", tc.divergence_factor},
          {"epsilon_delta", ic.epsilon_delta},
          {"output_mode", ic.output_mode == OutputMode::Sum ? "sum" : "normalized"}};
}

// ------------------------------------------------------------- spec <-> json

void ExperimentSpec::validate() const {
  if (rules < 1) throw ConfigError(name + ": rules must be at least 1");
  if (repetitions < 1) throw ConfigError(name + ": repetitions must be at least 1");
  if (train_noise.empty() || test_noise.empty()) throw ConfigError(name + ": empty noise grid");
  for (double s : train_noise) {
    if (!(s >= 0.0)) throw ConfigError(name + ": noise std must be non-negative");
  }
  for (double s : test_noise) {
    if (!(s >= 0.0)) throw ConfigError(name + ": noise std must be non-negative");
  }
  if (split.kind != SplitKind::All && split.train == 0) throw ConfigError(name + ": empty training split");
  if (data.kind == SourceKind::Csv && data.csv_path.empty()) throw ConfigError(name + ": no CSV path");
  if (data.kind == SourceKind::Csv && data.channels.empty()) throw ConfigError(name + ": no CSV channels");
  if (data.kind == SourceKind::TwoHump && noise_target == NoiseTarget::Series) {
    throw ConfigError(name + ": the two-hump source has no series to perturb");
  }
  try {
    train.validate();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(name + ": " + e.what());
  }
}

std::optional<ReferenceValue> ExperimentSpec::reference_for(double train_std, double test_std) const {
  for (const auto &r : reference) {
    if (std::abs(r.train_std - train_std) < 1e-12 && std::abs(r.test_std - test_std) < 1e-12) return r;
  }
  return std::nullopt;
}

namespace {

double noise_value(const json &v) {
  if (v.is_string()) {
    if (v.get<std::string>() == "clean") return 0.0;
    throw ConfigError("noise level must be a number or \"clean\"");
  }
  return v.get<double>();
}

json noise_json(double s) { return s == 0.0 ? json("clean") : json(s); }

}  // namespace

ExperimentSpec experiment_from_json(const std::string &name, const json &j) {
  ExperimentSpec s;
  s.name = name;
  try {
    check_keys(j,
               {"description", "source", "series", "normalization", "split", "rules", "config", "noise",
                "repetitions", "seed", "reference", "assumptions"},
               "experiment '" + name + "'");
    s.description = j.value("description", "");
    const json &src = j.at("source");
    check_keys(src, {"kind", "samples", "x0", "tau", "t_start", "t_end", "dt", "path", "path_env", "header", "channels"},
               name + ".source");
    s.data.kind = parse_source(src.at("kind").get<std::string>());
    s.data.samples = src.value("samples", s.data.samples);
    auto &mg = s.data.mackey_glass;
    mg.x0 = src.value("x0", mg.x0);
    mg.tau = src.value("tau", mg.tau);
    mg.t_start = src.value("t_start", mg.t_start);
    mg.t_end = src.value("t_end", mg.t_end);
    mg.dt = src.value("dt", mg.dt);
    s.data.csv_path = src.value("path", "");
    if (src.contains("header")) s.data.csv_header = src["header"].get<bool>();
    if (src.contains("channels")) {
      for (const auto &c : src["channels"]) {
        s.data.channels.push_back(c.is_string() ? c.get<std::string>() : std::to_string(c.get<std::size_t>()));
      }
    }
    if (j.contains("series")) {
      const json &se = j["series"];
      check_keys(se, {"lags", "target_channel", "horizon", "first_target", "count"}, name + ".series");
      for (const auto &l : se.at("lags")) {
        if (l.is_array()) {
          s.data.series.lags.push_back({l.at(0).get<std::size_t>(), l.at(1).get<std::size_t>()});
        } else {
          s.data.series.lags.push_back({0, l.get<std::size_t>()});
        }
      }
      s.data.series.target_channel = se.value("target_channel", std::size_t{0});
      s.data.series.horizon = se.value("horizon", std::size_t{0});
      if (se.contains("first_target")) s.data.series.first_target = se["first_target"].get<std::size_t>();
      if (se.contains("count")) s.data.series.count = se["count"].get<std::size_t>();
    } else if (s.data.kind != SourceKind::TwoHump) {
      throw ConfigError(name + ": series sources need a \"series\" block");
    }
    s.data.normalization = data::parse_normalization_mode(j.value("normalization", "none"));
    const json &sp = j.at("split");
    check_keys(sp, {"kind", "train", "test"}, name + ".split");
    s.split.kind = parse_split(sp.at("kind").get<std::string>());
    s.split.train = sp.value("train", std::size_t{0});
    if (sp.contains("test")) s.split.test = sp["test"].get<std::size_t>();
    s.rules = j.at("rules").get<std::size_t>();
    if (j.contains("config")) apply_config(j["config"], s.init, s.train);
    if (j.contains("noise")) {
      const json &nz = j["noise"];
      check_keys(nz, {"target", "train", "test"}, name + ".noise");
      s.noise_target = parse_noise_target(nz.value("target", "series"));
      if (nz.contains("train")) {
        s.train_noise.clear();
        for (const auto &v : nz["train"]) s.train_noise.push_back(noise_value(v));
      }
      if (nz.contains("test")) {
        s.test_noise.clear();
        for (const auto &v : nz["test"]) s.test_noise.push_back(noise_value(v));
      }
    } else if (s.data.kind == SourceKind::TwoHump) {
      s.noise_target = NoiseTarget::Targets;
    }
    s.repetitions = j.value("repetitions", std::size_t{1});
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("reference")) {
      for (const auto &r : j["reference"]) {
        ReferenceValue v;
        v.train_std = noise_value(r.at("train"));
        v.test_std = noise_value(r.at("test"));
        v.rmse = r.at("rmse").get<double>();
        v.baseline = r.value("baseline", "");
        if (r.contains("baseline_rmse")) v.baseline_rmse = r["baseline_rmse"].get<double>();
        s.reference.push_back(v);
      }
    }
    if (j.contains("assumptions")) s.assumptions = j["assumptions"].get<std::vector<std::string>>();
  } catch (const json::exception &e) {
    throw ConfigError("experiment '" + name + "': " + e.what());
  } catch (const data::DataError &e) {
    throw ConfigError("experiment '" + name + "': " + e.what());
  }
  return s;
}

json to_json(const ExperimentSpec &s) {
  json src = {{"kind", source_name(s.data.kind)}};
  switch (s.data.kind) {
    case SourceKind::TwoHump:
      src["samples"] = s.data.samples;
      break;
    case SourceKind::MackeyGlass: {
      const auto &mg = s.data.mackey_glass;
      src["x0"] = mg.x0;
      src["tau"] = mg.tau;
      src["t_start"] = mg.t_start;
      src["t_end"] = mg.t_end;
      src["dt"] = mg.dt;
      break;
    }
    case SourceKind::Csv:
      src["path"] = s.data.csv_path;
      if (s.data.csv_header) src["header"] = *s.data.csv_header;
      src["channels"] = s.data.channels;
      break;
  }
  json j = {{"description", s.description},
            {"source", src},
            {"normalization", data::to_string(s.data.normalization)},
            {"rules", s.rules},
            {"config", config_json(s.init, s.train)},
            {"repetitions", s.repetitions},
            {"seed", s.seed}};
  if (s.data.kind != SourceKind::TwoHump) {
    json lags = json::array();
    for (const auto &l : s.data.series.lags) lags.push_back(json::array({l.channel, l.lag}));
    json se = {{"lags", lags}, {"target_channel", s.data.series.target_channel}, {"horizon", s.data.series.horizon}};
    if (s.data.series.first_target) se["first_target"] = *s.data.series.first_target;
    if (s.data.series.count) se["count"] = *s.data.series.count;
    j["series"] = se;
  }
  json split = {{"kind", split_name(s.split.kind)}, {"train", s.split.train}};
  if (s.split.test) split["test"] = *s.split.test;
  j["split"] = split;
  json train_noise = json::array();
  json test_noise = json::array();
  for (double v : s.train_noise) train_noise.push_back(noise_json(v));
  for (double v : s.test_noise) test_noise.push_back(noise_json(v));
  j["noise"] = {{"target", noise_target_name(s.noise_target)}, {"train", train_noise}, {"test", test_noise}};
  json refs = json::array();
  for (const auto &r : s.reference) {
    json rj = {{"train", noise_json(r.train_std)}, {"test", noise_json(r.test_std)}, {"rmse", r.rmse}};
    if (!r.baseline.empty()) rj["baseline"] = r.baseline;
    if (r.baseline_rmse) rj["baseline_rmse"] = *r.baseline_rmse;
    refs.push_back(rj);
  }
  j["reference"] = refs;
  j["assumptions"] = s.assumptions;
  return j;
}

// --------------------------------------------------------------- registry

std::vector<std::string> Registry::names() const {
  std::vector<std::string> out;
  for (const auto &item : experiments.items()) out.push_back(item.key());
  return out;
}

ExperimentSpec Registry::get(const std::string &name) const {
  if (!experiments.contains(name)) {
    std::string known;
    for (const auto &n : names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown experiment '" + name + "' (known: " + known + ")");
  }
  json entry = experiments.at(name);
  std::string env_name;
  if (entry.contains("source") && entry["source"].contains("path_env")) {
    env_name = entry["source"]["path_env"].get<std::string>();
  }
  ExperimentSpec spec = experiment_from_json(name, entry);
  if (spec.data.kind == SourceKind::Csv) {
    const char *env = env_name.empty() ? nullptr : std::getenv(env_name.c_str());
    if (env != nullptr && *env != '\0') {
      spec.data.csv_path = env;
    } else if (!spec.data.csv_path.empty() && std::filesystem::path(spec.data.csv_path).is_relative()) {
      spec.data.csv_path =
          (std::filesystem::path(path).parent_path() / spec.data.csv_path).lexically_normal().string();
    }
  }
  return spec;
}

std::string default_registry_path() {
  const char *env = std::getenv("IT2CFNN_REGISTRY");
  return env != nullptr && *env != '\0' ? std::string(env) : std::string(IT2CFNN_REGISTRY_PATH);
}

Registry load_registry(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open registry '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception &e) {
    throw ConfigError("registry '" + path + "' is not valid JSON: " + e.what());
  }
  Registry r;
  r.path = path;
  r.version = j.value("version", 0);
  if (r.version != kRegistryVersion) {
    throw ConfigError("registry '" + path + "' has version " + std::to_string(r.version) + ", expected " +
                      std::to_string(kRegistryVersion));
  }
  if (!j.contains("experiments") || !j["experiments"].is_object()) {
    throw ConfigError("registry '" + path + "' has no experiments object");
  }
  r.experiments = j["experiments"];
  return r;
}

// ---------------------------------------------------------------- running

namespace {

enum SeedStream : std::uint64_t { kDataStream = 1, kTrainNoise = 2, kTestNoise = 3 };

/// Everything shared, read-only, by the repetitions of one experiment.
struct Prepared {
  // Series sources: normalized channels. Two-hump: the clean normalized dataset.
  std::vector<std::vector<double>> channels;
  data::Dataset clean;
  std::optional<data::Normalization> normalization;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

std::vector<std::size_t> iota_rows(std::size_t begin, std::size_t count) {
  std::vector<std::size_t> rows(count);
  std::iota(rows.begin(), rows.end(), begin);
  return rows;
}

void assign_split(const ExperimentSpec &spec, Prepared &p) {
  const std::size_t n = p.clean.size();
  switch (spec.split.kind) {
    case SplitKind::All:
      p.train_rows = iota_rows(0, n);
      p.test_rows = p.train_rows;
      return;
    case SplitKind::Head:
    case SplitKind::Shuffled: {
      const std::size_t test = spec.split.test.value_or(n >= spec.split.train ? n - spec.split.train : 0);
      if (spec.split.train + test > n || test == 0) {
        throw data::DataError(spec.name + ": split " + std::to_string(spec.split.train) + "/" + std::to_string(test) +
                              " does not fit " + std::to_string(n) + " rows");
      }
      const std::vector<std::size_t> order = spec.split.kind == SplitKind::Shuffled
                                                 ? data::shuffled_order(n, derive_seed(spec.seed, kDataStream, 1))
                                                 : iota_rows(0, n);
      p.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.split.train));
      p.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(spec.split.train),
                         order.begin() + static_cast<std::ptrdiff_t>(spec.split.train + test));
      return;
    }
  }
}

std::vector<std::vector<double>> load_channels(const ExperimentSpec &spec) {
  if (spec.data.kind == SourceKind::MackeyGlass) {
    return {data::mackey_glass(spec.data.mackey_glass)};
  }
  const bool header = spec.data.csv_header.value_or(data::sniff_header(spec.data.csv_path));
  const data::Table t = data::read_csv(spec.data.csv_path, header);
  std::vector<std::vector<double>> out;
  for (const auto &key : spec.data.channels) out.push_back(t.columns.at(t.column_index(key)));
  return out;
}

Prepared prepare(const ExperimentSpec &spec) {
  Prepared p;
  const auto mode = spec.data.normalization;
  if (spec.data.kind == SourceKind::TwoHump) {
    data::Dataset raw = data::synthetic_two_hump(spec.data.samples, derive_seed(spec.seed, kDataStream));
    if (mode != data::NormalizationMode::None) {
      p.normalization = data::fit_normalization(raw, mode);
      p.clean = data::apply_normalization(raw, *p.normalization);
    } else {
      p.clean = raw;
    }
    assign_split(spec, p);
    return p;
  }
  auto raw = load_channels(spec);
  std::vector<data::AffineMap> maps(raw.size());
  if (mode != data::NormalizationMode::None) {
    // Per-channel maps over the whole series; each lag column inherits the
    // map of its channel.
    const std::size_t len = raw.front().size();
    data::Dataset cols{Matrix(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(raw.size())),
                       Vector::Zero(static_cast<Eigen::Index>(len)), std::nullopt};
    for (std::size_t c = 0; c < raw.size(); ++c) {
      if (raw[c].size() != len) throw data::DataError(spec.name + ": channels differ in length");
      for (std::size_t t = 0; t < len; ++t) cols.inputs(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = raw[c][t];
    }
    cols.targets = cols.inputs.col(0);
    maps = data::fit_normalization(cols, mode).inputs;
    data::Normalization norm;
    norm.mode = mode;
    for (const auto &l : spec.data.series.lags) norm.inputs.push_back(maps.at(l.channel));
    norm.target = maps.at(spec.data.series.target_channel);
    p.normalization = norm;
  }
  for (std::size_t c = 0; c < raw.size(); ++c) {
    for (double &v : raw[c]) v = maps[c].apply(v);
  }
  p.channels = std::move(raw);
  p.clean = data::lag_embed(p.channels, spec.data.series);
  p.clean.normalization = p.normalization;
  assign_split(spec, p);
  return p;
}

struct Perturbed {
  data::Dataset rows;
  double measured = 0.0;  // sample std of what was injected
};

double sample_std(const std::vector<double> &diffs) {
  if (diffs.empty()) return 0.0;
  const double mean = std::accumulate(diffs.begin(), diffs.end(), 0.0) / static_cast<double>(diffs.size());
  double ss = 0.0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  return std::sqrt(ss / static_cast<double>(diffs.size()));
}

/// Rows `which` of the data with noise `std` applied at the spec's noise target.
Perturbed perturb(const ExperimentSpec &spec, const Prepared &p, const std::vector<std::size_t> &which, double std,
                  std::uint64_t seed) {
  Perturbed out;
  if (std == 0.0) {
    out.rows = p.clean.select(which);
    return out;
  }
  std::vector<double> diffs;
  if (spec.noise_target == NoiseTarget::Targets) {
    data::Dataset base = p.clean.select(which);
    out.rows = data::add_gaussian_noise(base, std, seed, data::NoiseScope::Targets);
    for (Eigen::Index k = 0; k < base.targets.size(); ++k) diffs.push_back(out.rows.targets[k] - base.targets[k]);
  } else {
    std::vector<std::vector<double>> noisy;
    for (std::size_t c = 0; c < p.channels.size(); ++c) {
      noisy.push_back(data::add_gaussian_noise(p.channels[c], std, derive_seed(seed, c)));
      for (std::size_t t = 0; t < noisy[c].size(); ++t) diffs.push_back(noisy[c][t] - p.channels[c][t]);
    }
    data::Dataset all = data::lag_embed(noisy, spec.data.series);
    all.normalization = p.normalization;
    out.rows = all.select(which);
  }
  out.measured = sample_std(diffs);
  return out;
}

/// Predictions and targets mapped back to original units.
double original_rmse(const Network &net, const data::Dataset &d) {
  Vector pred = net.predict(d.inputs);
  Vector target = d.targets;
  if (d.normalization) {
    pred = data::denormalize_targets(pred, *d.normalization);
    target = data::denormalize_targets(target, *d.normalization);
  }
  return rmse(pred, target);
}

std::string file_stem(const ExperimentSpec &spec, double train_std, std::size_t rep) {
  return spec.name + "_train-" + noise_label(train_std) + "_rep" + std::to_string(rep);
}

struct Task {
  std::size_t noise_index;
  std::size_t rep;
};

struct TaskOutput {
  RunRecord record;
  json manifest;
};

TaskOutput run_task(const ExperimentSpec &spec, const Prepared &p, const Task &task, const RunOptions &options) {
  TaskOutput out;
  RunRecord &rec = out.record;
  rec.train_std = spec.train_noise[task.noise_index];
  rec.rep = task.rep;
  rec.train_seed = derive_seed(spec.seed, kTrainNoise, task.rep, task.noise_index);
  json &m = out.manifest;
  m = {{"train_std", noise_json(rec.train_std)}, {"rep", rec.rep}, {"train_seed", rec.train_seed}};
  rec.init_test_rmse.assign(spec.test_noise.size(), std::numeric_limits<double>::quiet_NaN());
  rec.test_rmse = rec.init_test_rmse;
  try {
    const Perturbed train_set = perturb(spec, p, p.train_rows, rec.train_std, rec.train_seed);
    m["train_noise_measured"] = train_set.measured;
    m["train_rows"] = train_set.rows.size();

    init::InitResult ir = init::initialize_detailed(train_set.rows, spec.rules, spec.init);
    for (const auto &c : ir.centers) rec.centers.push_back(p.train_rows.at(c.index));
    m["init"] = {{"k", ir.k}, {"candidates", ir.candidate_count}, {"fallback", ir.fallback_count},
                 {"center_rows", rec.centers}};
    rec.init_train_rmse = original_rmse(ir.network, train_set.rows);

    std::vector<data::Dataset> tests;
    json test_manifest = json::array();
    for (std::size_t t = 0; t < spec.test_noise.size(); ++t) {
      const double s = spec.test_noise[t];
      const std::uint64_t seed = derive_seed(spec.seed, kTestNoise, task.rep, t);
      Perturbed tp = perturb(spec, p, p.test_rows, s, seed);
      test_manifest.push_back({{"test_std", noise_json(s)}, {"seed", seed}, {"noise_measured", tp.measured},
                               {"rows", tp.rows.size()}});
      rec.init_test_rmse[t] = original_rmse(ir.network, tp.rows);
      tests.push_back(std::move(tp.rows));
    }

    train::FitResult fr = train::fit(ir.network, train_set.rows, spec.train);
    rec.train_rmse = original_rmse(fr.network, train_set.rows);
    rec.epochs = fr.epochs;
    rec.stop_reason = fr.stop_reason;
    for (std::size_t t = 0; t < tests.size(); ++t) {
      rec.test_rmse[t] = original_rmse(fr.network, tests[t]);
      test_manifest[t]["rmse"] = rec.test_rmse[t];
      test_manifest[t]["init_rmse"] = rec.init_test_rmse[t];
    }
    m["test"] = test_manifest;
    m["train_rmse"] = rec.train_rmse;
    m["init_train_rmse"] = rec.init_train_rmse;
    m["epochs"] = fr.epochs;
    m["stop_reason"] = fr.stop_reason;
    if (!options.out_dir.empty()) {
      const std::string stem = file_stem(spec, rec.train_std, rec.rep);
      const auto dir = std::filesystem::path(options.out_dir);
      io::save_model((dir / (stem + ".model.json")).string(), {fr.network, p.normalization});
      train::write_history_csv((dir / (stem + ".history.csv")).string(), fr.history);
      m["model"] = stem + ".model.json";
      m["history"] = stem + ".history.csv";
    }
    rec.network = std::move(fr.network);
    rec.ok = true;
  } catch (const train::DivergenceError &e) {
    rec.diverged = true;
    rec.error = e.what();
  } catch (const std::exception &e) {
    rec.error = e.what();
  }
  m["ok"] = rec.ok;
  if (!rec.ok) m["error"] = rec.error;
  return out;
}

}  // namespace

RunReport run_experiment(const ExperimentSpec &spec, const RunOptions &options) {
  const auto start = std::chrono::steady_clock::now();
  spec.validate();
  const Prepared prepared = prepare(spec);
  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);

  std::vector<Task> tasks;
  for (std::size_t i = 0; i < spec.train_noise.size(); ++i) {
    for (std::size_t r = 0; r < spec.repetitions; ++r) tasks.push_back({i, r});
  }
  std::vector<TaskOutput> outputs(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      outputs[k] = run_task(spec, prepared, tasks[k], options);
      if (options.log != nullptr) {
        const auto &rec = outputs[k].record;
        std::lock_guard<std::mutex> lock(log_mutex);
        *options.log << spec.name << " train=" << noise_label(rec.train_std) << " rep=" << rec.rep << ": "
                     << (rec.ok ? "ok, " + std::to_string(rec.epochs) + " epochs" : "failed: " + rec.error) << '\n';
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(tasks.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto &t : pool) t.join();
  }

  RunReport report;
  report.experiment = spec.name;
  report.rules = spec.rules;
  report.inputs = prepared.clean.dim();
  report.param_count = param_count(spec.rules, report.inputs);
  report.trainable_count = trainable_count(spec.rules, report.inputs);
  report.repetitions = spec.repetitions;

  json runs = json::array();
  for (auto &o : outputs) {
    runs.push_back(o.manifest);
    report.runs.push_back(std::move(o.record));
  }
  for (std::size_t i = 0; i < spec.train_noise.size(); ++i) {
    for (std::size_t t = 0; t < spec.test_noise.size(); ++t) {
      Cell c;
      c.train_std = spec.train_noise[i];
      c.test_std = spec.test_noise[t];
      c.reference = spec.reference_for(c.train_std, c.test_std);
      double init_sum = 0.0;
      double train_sum = 0.0;
      for (const auto &rec : report.runs) {
        if (rec.train_std != c.train_std) continue;
        if (!rec.ok) {
          ++c.failures;
          continue;
        }
        c.rmse.push_back(rec.test_rmse[t]);
        init_sum += rec.init_test_rmse[t];
        train_sum += rec.train_rmse;
      }
      if (c.rmse.empty()) {
        c.mean = c.min = c.max = c.init_mean = c.train_mean = std::numeric_limits<double>::quiet_NaN();
      } else {
        const auto n = static_cast<double>(c.rmse.size());
        c.mean = std::accumulate(c.rmse.begin(), c.rmse.end(), 0.0) / n;
        c.min = *std::min_element(c.rmse.begin(), c.rmse.end());
        c.max = *std::max_element(c.rmse.begin(), c.rmse.end());
        c.init_mean = init_sum / n;
        c.train_mean = train_sum / n;
      }
      report.cells.push_back(std::move(c));
    }
  }

  json &m = report.manifest;
  m = {{"experiment", spec.name},
       {"registry_version", kRegistryVersion},
       {"spec", to_json(spec)},
       {"data",
        {{"rows", prepared.clean.size()},
         {"inputs", prepared.clean.dim()},
         {"train_rows", prepared.train_rows.size()},
         {"test_rows", prepared.test_rows.size()},
         {"data_seed", derive_seed(spec.seed, kDataStream)}}},
       {"param_count", report.param_count},
       {"runs", runs}};
  if (prepared.normalization) m["normalization"] = io::to_json(*prepared.normalization);
  if (!options.out_dir.empty()) {
    const auto dir = std::filesystem::path(options.out_dir);
    report.manifest_path = (dir / (spec.name + ".manifest.json")).string();
    std::ofstream(report.manifest_path) << m.dump(2) << '\n';
    write_report_csv((dir / (spec.name + ".report.csv")).string(), report);
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<std::string> check_manifest(const json &manifest) {
  std::vector<std::string> problems;
  // A 20% band leaves room for the sampling error of a few hundred draws.
  auto check = [&](const json &label, const json &measured, const std::string &where) {
    const double want = noise_value(label);
    const double got = measured.get<double>();
    if (want == 0.0) {
      if (got != 0.0) problems.push_back(where + ": labelled clean but noise of std " + data::format_double(got) + " was applied");
    } else if (got == 0.0 || std::abs(got / want - 1.0) > 0.2) {
      problems.push_back(where + ": labelled std " + data::format_double(want) + " but measured " +
                         data::format_double(got));
    }
  };
  try {
    for (const auto &run : manifest.at("runs")) {
      if (!run.value("ok", false)) continue;
      const std::string where = "train " + run.at("train_std").dump() + " rep " + run.at("rep").dump();
      check(run.at("train_std"), run.at("train_noise_measured"), where);
      for (const auto &t : run.at("test")) {
        check(t.at("test_std"), t.at("noise_measured"), where + " test " + t.at("test_std").dump());
      }
    }
  } catch (const json::exception &e) {
    problems.push_back(std::string("malformed manifest: ") + e.what());
  }
  return problems;
}

// ---------------------------------------------------------------- reports

namespace {

std::string cell_number(double v) { return std::isnan(v) ? "" : data::format_double(v); }

}  // namespace

void write_report_csv(std::ostream &out, const RunReport &report) {
  out << "experiment,train_std,test_std,rules,param_count,repetitions,failures,rmse_mean,rmse_min,rmse_max,"
         "init_rmse_mean,train_rmse_mean,reference_rmse,baseline,baseline_rmse\n";
  for (const auto &c : report.cells) {
    out << report.experiment << ',' << noise_label(c.train_std) << ',' << noise_label(c.test_std) << ','
        << report.rules << ',' << report.param_count << ',' << report.repetitions << ',' << c.failures << ','
        << cell_number(c.mean) << ',' << cell_number(c.min) << ',' << cell_number(c.max) << ','
        << cell_number(c.init_mean) << ',' << cell_number(c.train_mean) << ',';
    if (c.reference) {
      out << data::format_double(c.reference->rmse) << ',' << c.reference->baseline << ','
          << (c.reference->baseline_rmse ? data::format_double(*c.reference->baseline_rmse) : "");
    } else {
      out << ",,";
    }
    out << '\n';
  }
}

void write_report_csv(const std::string &path, const RunReport &report) {
  std::ofstream out(path);
  if (!out) throw data::DataError("cannot write '" + path + "'");
  write_report_csv(out, report);
}

void print_report(std::ostream &out, const RunReport &report) {
  char line[256];
  std::snprintf(line, sizeof line, "%s: R=%zu, n=%zu, %zu parameters (%zu trainable), %zu repetition(s)\n",
                report.experiment.c_str(), report.rules, report.inputs, report.param_count, report.trainable_count,
                report.repetitions);
  out << line;
  std::snprintf(line, sizeof line, "%-7s %-7s %10s %10s %10s %10s %10s %10s\n", "train", "test", "mean", "min", "max",
                "init", "reference", "baseline");
  out << line;
  for (const auto &c : report.cells) {
    auto optional_cell = [](std::optional<double> v) {
      char buf[32];
      if (!v) return std::string(10, ' ');
      std::snprintf(buf, sizeof buf, "%10.4f", *v);
      return std::string(buf);
    };
    const auto ref = c.reference ? std::optional<double>(c.reference->rmse) : std::nullopt;
    const auto base = c.reference ? c.reference->baseline_rmse : std::nullopt;
    std::snprintf(line, sizeof line, "%-7s %-7s %10.4f %10.4f %10.4f %10.4f %s %s%s\n",
                  noise_label(c.train_std).c_str(), noise_label(c.test_std).c_str(), c.mean, c.min, c.max, c.init_mean,
                  optional_cell(ref).c_str(), optional_cell(base).c_str(), c.failures ? "  (failures)" : "");
    out << line;
  }
  for (const auto &rec : report.runs) {
    if (!rec.ok) out << "  train " << noise_label(rec.train_std) << " rep " << rec.rep << " failed: " << rec.error << '\n';
  }
  if (!report.manifest_path.empty()) out << "manifest: " << report.manifest_path << '\n';
  std::snprintf(line, sizeof line, "wall time: %.2f s\n", report.wall_seconds);
  out << line;
}

}  // namespace it2cfnn::bench

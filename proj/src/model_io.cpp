#include "it2cfnn/model_io.hpp"

#include <fstream>
#include <sstream>

namespace it2cfnn::io {

using nlohmann::json;

namespace {

json vector_json(const Vector &v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from(const json &j, const char *what, std::size_t n) {
  if (!j.is_array() || j.size() != n) {
    throw FormatError(std::string(what) + " must be an array of " + std::to_string(n) + " numbers");
  }
  Vector v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

json affine_json(const data::AffineMap &m) { return {{"offset", m.offset}, {"scale", m.scale}}; }

data::AffineMap affine_from(const json &j) { return {j.at("offset").get<double>(), j.at("scale").get<double>()}; }

}  // namespace

json to_json(const data::Normalization &norm) {
  json inputs = json::array();
  for (const auto &m : norm.inputs) inputs.push_back(affine_json(m));
  return {{"mode", data::to_string(norm.mode)}, {"inputs", inputs}, {"target", affine_json(norm.target)}};
}

data::Normalization normalization_from_json(const json &j) {
  data::Normalization n;
  n.mode = data::parse_normalization_mode(j.at("mode").get<std::string>());
  for (const auto &m : j.at("inputs")) n.inputs.push_back(affine_from(m));
  n.target = affine_from(j.at("target"));
  return n;
}

json to_json(const ModelFile &model) {
  const Network &net = model.network;
  json rules = json::array();
  for (const auto &r : net.rules()) {
    json transform = json::array();
    for (Eigen::Index i = 0; i < r.transform.rows(); ++i) {
      transform.push_back(vector_json(r.transform.row(i).transpose()));
    }
    rules.push_back({{"center", vector_json(r.center)},
                     {"transform", transform},
                     {"beta", vector_json(r.beta)},
                     {"delta", vector_json(r.delta)},
                     {"v1", r.v1},
                     {"v2", r.v2},
                     {"consequent", r.consequent}});
  }
  json j = {{"version", kModelVersion},
            {"n", net.input_dim()},
            {"R", net.rule_count()},
            {"output_mode", net.output_mode() == OutputMode::Sum ? "sum" : "normalized"},
            {"rules", rules}};
  if (model.normalization) {
    j["normalization"] = to_json(*model.normalization);
  }
  return j;
}

ModelFile model_from_json(const json &j) {
  try {
    if (j.at("version").get<std::string>() != kModelVersion) {
      throw FormatError("unsupported model version '" + j.at("version").get<std::string>() + "'");
    }
    const auto n = j.at("n").get<std::size_t>();
    const auto count = j.at("R").get<std::size_t>();
    const auto &rules_json = j.at("rules");
    if (!rules_json.is_array() || rules_json.size() != count) {
      throw FormatError("model declares R = " + std::to_string(count) + " but lists " +
                        std::to_string(rules_json.size()) + " rules");
    }
    std::vector<Rule> rules;
    for (const auto &rj : rules_json) {
      Rule r;
      r.center = vector_from(rj.at("center"), "center", n);
      const auto &tj = rj.at("transform");
      if (!tj.is_array() || tj.size() != n) {
        throw FormatError("transform must have " + std::to_string(n) + " rows");
      }
      r.transform.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        r.transform.row(static_cast<Eigen::Index>(i)) = vector_from(tj[i], "transform row", n).transpose();
      }
      r.beta = vector_from(rj.at("beta"), "beta", n);
      r.delta = vector_from(rj.at("delta"), "delta", n);
      r.v1 = rj.at("v1").get<double>();
      r.v2 = rj.at("v2").get<double>();
      r.consequent = rj.at("consequent").get<double>();
      rules.push_back(std::move(r));
    }
    const std::string mode = j.value("output_mode", "sum");
    if (mode != "sum" && mode != "normalized") {
      throw FormatError("unknown output_mode '" + mode + "'");
    }
    ModelFile out{Network(n, std::move(rules), mode == "sum" ? OutputMode::Sum : OutputMode::Normalized),
                  std::nullopt};
    if (j.contains("normalization")) {
      out.normalization = normalization_from_json(j.at("normalization"));
    }
    return out;
  } catch (const json::exception &e) {
    throw FormatError(std::string("malformed model document: ") + e.what());
  } catch (const std::invalid_argument &e) {
    throw FormatError(std::string("invalid model: ") + e.what());
  }
}

std::string serialize_model(const ModelFile &model) { return to_json(model).dump(2) + "\n"; }

ModelFile parse_model(const std::string &text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception &e) {
    throw FormatError(std::string("model is not valid JSON: ") + e.what());
  }
  return model_from_json(j);
}

void save_model(const std::string &path, const ModelFile &model) {
  std::ofstream out(path);
  if (!out) {
    throw FormatError("cannot write '" + path + "'");
  }
  out << serialize_model(model);
}

ModelFile load_model(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot open '" + path + "'");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

}  // namespace it2cfnn::io

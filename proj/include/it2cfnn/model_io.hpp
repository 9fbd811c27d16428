#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "it2cfnn/data.hpp"
#include "it2cfnn/network.hpp"

namespace it2cfnn::io {

inline constexpr const char *kModelVersion = "it2cfnn-v1";

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A network plus the normalization its inputs and outputs were trained in.
struct ModelFile {
  Network network;
  std::optional<data::Normalization> normalization;
};

nlohmann::json to_json(const data::Normalization &norm);
data::Normalization normalization_from_json(const nlohmann::json &j);

nlohmann::json to_json(const ModelFile &model);
ModelFile model_from_json(const nlohmann::json &j);

/// Doubles are written in shortest round-trip form, so load(save(m)) is bit-exact.
std::string serialize_model(const ModelFile &model);
ModelFile parse_model(const std::string &text);

void save_model(const std::string &path, const ModelFile &model);
ModelFile load_model(const std::string &path);

}  // namespace it2cfnn::io

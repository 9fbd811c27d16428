#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "it2cfnn/data.hpp"

namespace it2cfnn::data {

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string &line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    out.push_back(trim(field));
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

double parse_cell(const std::string &text, std::size_t row, std::size_t col) {
  const auto where = [&] { return " at row " + std::to_string(row) + ", column " + std::to_string(col + 1); };
  if (text.empty()) {
    throw DataError("empty cell" + where());
  }
  errno = 0;
  char *end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || errno == ERANGE) {
    throw DataError("cannot parse '" + text + "' as a number" + where());
  }
  if (!std::isfinite(v)) {
    throw DataError("non-finite value '" + text + "'" + where());
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t Table::column_index(const std::string &key) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == key) return i;
  }
  char *end = nullptr;
  const long idx = std::strtol(key.c_str(), &end, 10);
  if (!key.empty() && end == key.c_str() + key.size() && idx >= 0 &&
      static_cast<std::size_t>(idx) < columns.size()) {
    return static_cast<std::size_t>(idx);
  }
  throw DataError("missing column '" + key + "'");
}

Table read_csv(const std::string &path, bool has_header) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open '" + path + "'");
  }
  Table t;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto fields = split_fields(body);
    if (header_pending) {
      t.header = std::move(fields);
      t.columns.resize(t.header.size());
      header_pending = false;
      continue;
    }
    if (t.columns.empty()) {
      t.columns.resize(fields.size());
    }
    if (fields.size() != t.columns.size()) {
      throw DataError("row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " columns, expected " + std::to_string(t.columns.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      t.columns[c].push_back(parse_cell(fields[c], line_no, c));
    }
  }
  return t;
}

bool sniff_header(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open '" + path + "'");
  }
  std::string line;
  while (std::getline(in, line)) {
    const std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    for (const auto &field : split_fields(body)) {
      char *end = nullptr;
      std::strtod(field.c_str(), &end);
      if (field.empty() || end != field.c_str() + field.size()) return true;
    }
    return false;
  }
  return false;
}

void write_csv(const std::string &path, const std::vector<std::string> &header,
               const std::vector<std::vector<double>> &columns) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write '" + path + "'");
  }
  for (std::size_t c = 0; c < header.size(); ++c) {
    out << (c ? "," : "") << header[c];
  }
  if (!header.empty()) out << '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      out << (c ? "," : "") << format_double(columns[c].at(r));
    }
    out << '\n';
  }
}

Dataset load_csv(const std::string &path, const ColumnSpec &spec) {
  const Table t = read_csv(path, spec.has_header);
  if (t.columns.empty() || t.rows() == 0) {
    throw DataError("'" + path + "' holds no data rows");
  }
  const std::size_t target = spec.target.empty() ? t.columns.size() - 1 : t.column_index(spec.target);
  std::vector<std::size_t> inputs;
  if (spec.inputs.empty()) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      if (c != target) inputs.push_back(c);
    }
  } else {
    for (const auto &key : spec.inputs) {
      inputs.push_back(t.column_index(key));
    }
  }
  if (inputs.empty()) {
    throw DataError("'" + path + "' has no input columns");
  }
  const auto rows = static_cast<Eigen::Index>(t.rows());
  Dataset d{Matrix(rows, static_cast<Eigen::Index>(inputs.size())), Vector(rows), std::nullopt};
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < inputs.size(); ++c) {
      d.inputs(r, static_cast<Eigen::Index>(c)) = t.columns[inputs[c]][static_cast<std::size_t>(r)];
    }
    d.targets[r] = t.columns[target][static_cast<std::size_t>(r)];
  }
  return d;
}

void save_csv(const Dataset &d, const std::string &path) {
  d.validate();
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;
  for (Eigen::Index j = 0; j < d.inputs.cols(); ++j) {
    header.push_back("x" + std::to_string(j + 1));
    columns.emplace_back(d.inputs.col(j).data(), d.inputs.col(j).data() + d.inputs.rows());
  }
  header.emplace_back("y");
  columns.emplace_back(d.targets.data(), d.targets.data() + d.targets.size());
  write_csv(path, header, columns);
}

}  // namespace it2cfnn::data

// Copyright 2026 The CCL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dataset text files and model documents.
//
// Datasets are comma-separated with a header naming the columns
// x1..x{dim_x}, u1..u{dim_u}, optional pi*, v*, w* blocks and an optional
// integer group column k. Models are JSON documents tagged with a format
// name, a version and a kind.

#ifndef CCL_IO_HPP_
#define CCL_IO_HPP_

#include <Eigen/Dense>

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "json.hpp"

#include "ccl/constraint.hpp"
#include "ccl/core.hpp"
#include "ccl/nullspace.hpp"
#include "ccl/policy.hpp"

namespace ccl {

/// Expected dimensions of a dataset file. Required for headerless files.
struct DatasetSchema {
  Index dim_x = 0;
  Index dim_u = 0;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                  : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
      field.remove_suffix(1);
    }
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view text) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

inline std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

// Column layout: offsets of each block, -1 when absent.
struct DatasetLayout {
  Index dim_x = 0;
  Index dim_u = 0;
  Index x = -1, u = -1, pi = -1, v = -1, w = -1, k = -1;
  Index columns = 0;
};

inline DatasetLayout layout_from_header(const std::vector<std::string_view>& names) {
  // Each block must appear as a contiguous run prefix1..prefixD.
  DatasetLayout layout;
  layout.columns = static_cast<Index>(names.size());
  Index col = 0;
  const auto block = [&](std::string_view prefix, Index& offset) -> Index {
    Index count = 0;
    while (col < layout.columns) {
      const std::string_view name = names[static_cast<std::size_t>(col)];
      if (name != std::string(prefix) + std::to_string(count + 1)) break;
      if (count == 0) offset = col;
      ++count;
      ++col;
    }
    return count;
  };
  layout.dim_x = block("x", layout.x);
  layout.dim_u = block("u", layout.u);
  if (layout.dim_x == 0) throw IoError("dataset header has no x1.. columns");
  if (layout.dim_u == 0) throw IoError("dataset header has no u1.. columns");
  for (auto [prefix, offset] : {std::pair<const char*, Index*>{"pi", &layout.pi}, {"v", &layout.v}, {"w", &layout.w}}) {
    const Index count = block(prefix, *offset);
    if (count != 0 && count != layout.dim_u) {
      throw IoError(std::string("dataset header: ") + prefix + " block must have " +
                    std::to_string(layout.dim_u) + " columns");
    }
  }
  if (col < layout.columns && names[static_cast<std::size_t>(col)] == "k") layout.k = col++;
  if (col != layout.columns) {
    throw IoError("dataset header: unexpected column '" + std::string(names[static_cast<std::size_t>(col)]) + "'");
  }
  return layout;
}

// Headerless files: x, u, then either nothing, a k column, or pi/v/w and an optional k.
inline DatasetLayout layout_from_schema(const DatasetSchema& schema, Index columns) {
  if (schema.dim_x < 1 || schema.dim_u < 1) {
    throw IoError("headerless dataset needs a schema with dim_x and dim_u");
  }
  DatasetLayout layout;
  layout.dim_x = schema.dim_x;
  layout.dim_u = schema.dim_u;
  layout.x = 0;
  layout.u = schema.dim_x;
  layout.columns = columns;
  const Index base = schema.dim_x + schema.dim_u;
  const Index extra = columns - base;
  if (extra == 0) return layout;
  if (extra == 1) {
    layout.k = base;
    return layout;
  }
  if (extra == 3 * schema.dim_u || extra == 3 * schema.dim_u + 1) {
    layout.pi = base;
    layout.v = base + schema.dim_u;
    layout.w = base + 2 * schema.dim_u;
    if (extra == 3 * schema.dim_u + 1) layout.k = base + 3 * schema.dim_u;
    return layout;
  }
  throw IoError("row 1: column count " + std::to_string(columns) + " does not match dim_x=" +
                std::to_string(schema.dim_x) + ", dim_u=" + std::to_string(schema.dim_u));
}

}  // namespace detail

/// Parses a dataset from text. Errors name the offending 1-based data row.
/// When `schema` declares dimensions they must match the header.
inline DemonstrationSet parse_dataset(std::istream& in, const DatasetSchema& schema = {}) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(std::move(line));
  }
  if (lines.empty()) throw IoError("dataset is empty");

  const auto first = detail::split_fields(lines.front());
  const bool has_header = !detail::parse_double(first.front()).has_value();
  detail::DatasetLayout layout = has_header
                                     ? detail::layout_from_header(first)
                                     : detail::layout_from_schema(schema, static_cast<Index>(first.size()));
  if (schema.dim_x > 0 && schema.dim_x != layout.dim_x) {
    throw IoError("dataset has dim_x=" + std::to_string(layout.dim_x) + ", schema expects " +
                  std::to_string(schema.dim_x));
  }
  if (schema.dim_u > 0 && schema.dim_u != layout.dim_u) {
    throw IoError("dataset has dim_u=" + std::to_string(layout.dim_u) + ", schema expects " +
                  std::to_string(schema.dim_u));
  }

  const std::size_t start = has_header ? 1 : 0;
  const Index n = static_cast<Index>(lines.size() - start);
  if (n < 1) throw IoError("dataset has no data rows");
  MatrixXd table(layout.columns, n);
  std::vector<int> groups;
  for (Index r = 0; r < n; ++r) {
    const std::string row_name = "row " + std::to_string(r + 1);
    const auto fields = detail::split_fields(lines[start + static_cast<std::size_t>(r)]);
    if (static_cast<Index>(fields.size()) != layout.columns) {
      throw IoError(row_name + ": expected " + std::to_string(layout.columns) + " fields, found " +
                    std::to_string(fields.size()));
    }
    for (Index c = 0; c < layout.columns; ++c) {
      const auto value = detail::parse_double(fields[static_cast<std::size_t>(c)]);
      if (!value) {
        throw IoError(row_name + ": non-numeric token '" + std::string(fields[static_cast<std::size_t>(c)]) +
                      "' in column " + std::to_string(c + 1));
      }
      if (!std::isfinite(*value)) {
        throw IoError(row_name + ": non-finite value in column " + std::to_string(c + 1));
      }
      table(c, r) = *value;
    }
    if (layout.k >= 0) {
      const double k = table(layout.k, r);
      if (k != std::floor(k) || std::abs(k) > 1e9) throw IoError(row_name + ": group label is not an integer");
      groups.push_back(static_cast<int>(k));
    }
  }
  const auto block = [&](Index offset, Index rows) -> std::optional<MatrixXd> {
    if (offset < 0) return std::nullopt;
    return MatrixXd(table.middleRows(offset, rows));
  };
  return DemonstrationSet(*block(layout.x, layout.dim_x), *block(layout.u, layout.dim_u), std::move(groups),
                          block(layout.pi, layout.dim_u), block(layout.v, layout.dim_u),
                          block(layout.w, layout.dim_u));
}

inline DemonstrationSet load_dataset(const std::string& path, const DatasetSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  try {
    return parse_dataset(in, schema);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

/// Writes the header and one row per sample. Ground-truth channels and the
/// group column are written when present (k always, since it is cheap).
inline void write_dataset(std::ostream& out, const DemonstrationSet& data) {
  std::vector<std::pair<std::string, const MatrixXd*>> blocks{{"x", &data.states()}, {"u", &data.actions()}};
  if (data.policy()) blocks.emplace_back("pi", &*data.policy());
  if (data.task()) blocks.emplace_back("v", &*data.task());
  if (data.null()) blocks.emplace_back("w", &*data.null());
  bool first = true;
  for (const auto& [prefix, m] : blocks) {
    for (Index i = 0; i < m->rows(); ++i) {
      out << (first ? "" : ",") << prefix << (i + 1);
      first = false;
    }
  }
  out << ",k\n";
  for (Index n = 0; n < data.size(); ++n) {
    first = true;
    for (const auto& [prefix, m] : blocks) {
      for (Index i = 0; i < m->rows(); ++i) {
        out << (first ? "" : ",") << detail::format_double((*m)(i, n));
        first = false;
      }
    }
    out << ',' << data.group_ids()[static_cast<std::size_t>(n)] << '\n';
  }
}

inline void save_dataset(const DemonstrationSet& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset '" + path + "'");
  write_dataset(out, data);
  if (!out) throw IoError("failed while writing dataset '" + path + "'");
}

// ---------------------------------------------------------------------------
// Model documents

inline constexpr const char* kModelFormat = "ccl-model";
inline constexpr int kModelVersion = 1;

using AnyModel = std::variant<RbfModel, StateIndependentConstraint, StateDependentConstraintModel,
                              NullspaceComponentModel, ParametricPolicyModel, LwlPolicyModel>;

/// Kind tag: "rbf", "nhat", "alpha", "lambda", "ncl", "pi-parametric" or "pi-lwl".
inline std::string model_kind(const AnyModel& model) {
  struct Visitor {
    std::string operator()(const RbfModel&) const { return "rbf"; }
    std::string operator()(const StateIndependentConstraint&) const { return "nhat"; }
    std::string operator()(const StateDependentConstraintModel& m) const { return std::string(to_string(m.mode)); }
    std::string operator()(const NullspaceComponentModel&) const { return "ncl"; }
    std::string operator()(const ParametricPolicyModel&) const { return "pi-parametric"; }
    std::string operator()(const LwlPolicyModel&) const { return "pi-lwl"; }
  };
  return std::visit(Visitor{}, model);
}

namespace detail {

using nlohmann::json;

inline json matrix_to_json(const MatrixXd& m) {
  json data = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline MatrixXd matrix_from_json(const json& j, const std::string& what) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const json& data = j.at("data");
  if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Index>(data.size()) != rows * cols) {
    throw IoError("model field '" + what + "' has inconsistent dimensions");
  }
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)].get<double>();
  }
  return m;
}

inline json rbf_to_json(const RbfModel& rbf) {
  return {{"dim_x", rbf.dim_x()},
          {"num_basis", rbf.num_basis()},
          {"dim_out", rbf.dim_out()},
          {"width", rbf.width},
          {"centers", matrix_to_json(rbf.centers)},
          {"weights", matrix_to_json(rbf.weights)}};
}

inline RbfModel rbf_from_json(const json& j) {
  RbfModel rbf;
  rbf.width = j.at("width").get<double>();
  rbf.centers = matrix_from_json(j.at("centers"), "centers");
  rbf.weights = matrix_from_json(j.at("weights"), "weights");
  if (rbf.dim_x() != j.at("dim_x").get<Index>() || rbf.num_basis() != j.at("num_basis").get<Index>() ||
      rbf.dim_out() != j.at("dim_out").get<Index>()) {
    throw IoError("rbf dimension fields disagree with the stored matrices");
  }
  return rbf;
}

inline void check_dim(const json& doc, const char* key, Index actual) {
  if (doc.at(key).get<Index>() != actual) {
    throw IoError(std::string("model field '") + key + "' disagrees with the stored parameters");
  }
}

}  // namespace detail

inline nlohmann::json model_to_json(const AnyModel& model) {
  using detail::json;
  json doc{{"format", kModelFormat}, {"version", kModelVersion}, {"kind", model_kind(model)}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        m.validate();
        if constexpr (std::is_same_v<T, RbfModel>) {
          doc["rbf"] = detail::rbf_to_json(m);
        } else if constexpr (std::is_same_v<T, StateIndependentConstraint>) {
          doc["dim_u"] = m.dim_u;
          doc["dim_b"] = m.dim_b();
          json angles = json::array();
          for (const VectorXd& a : m.angles) angles.push_back(std::vector<double>(a.data(), a.data() + a.size()));
          doc["angles"] = std::move(angles);
        } else if constexpr (std::is_same_v<T, StateDependentConstraintModel>) {
          doc["dim_u"] = m.dim_u;
          doc["dim_phi"] = m.dim_phi;
          doc["dim_b"] = m.dim_b;
          doc["features"] = m.feature_name;
          doc["rbf"] = detail::rbf_to_json(m.rbf);
        } else if constexpr (std::is_same_v<T, NullspaceComponentModel>) {
          doc["dim_u"] = m.dim_u();
          doc["rbf"] = detail::rbf_to_json(m.rbf);
        } else if constexpr (std::is_same_v<T, ParametricPolicyModel>) {
          doc["dim_x"] = m.dim_x();
          doc["dim_u"] = m.dim_u();
          doc["basis"] = std::string(to_string(m.basis));
          doc["rbf"] = detail::rbf_to_json(m.rbf);
        } else {
          doc["dim_x"] = m.dim_x();
          doc["dim_u"] = m.dim_u();
          doc["rbf"] = detail::rbf_to_json(m.rbf);
          json maps = json::array();
          for (const MatrixXd& b : m.local_maps) maps.push_back(detail::matrix_to_json(b));
          doc["local_maps"] = std::move(maps);
        }
      },
      model);
  return doc;
}

inline AnyModel model_from_json(const nlohmann::json& doc) {
  try {
    if (!doc.is_object() || doc.value("format", std::string()) != kModelFormat) {
      throw IoError("not a ccl model document");
    }
    const int version = doc.at("version").get<int>();
    if (version != kModelVersion) {
      throw IoError("model version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kModelVersion) + ")");
    }
    const std::string kind = doc.at("kind").get<std::string>();
    AnyModel out;
    if (kind == "rbf") {
      out = detail::rbf_from_json(doc.at("rbf"));
    } else if (kind == "nhat") {
      StateIndependentConstraint m;
      m.dim_u = doc.at("dim_u").get<Index>();
      for (const auto& a : doc.at("angles")) {
        const auto values = a.get<std::vector<double>>();
        m.angles.emplace_back(Eigen::Map<const VectorXd>(values.data(), static_cast<Index>(values.size())));
      }
      detail::check_dim(doc, "dim_b", m.dim_b());
      out = std::move(m);
    } else if (kind == "alpha" || kind == "lambda") {
      StateDependentConstraintModel m;
      m.mode = kind == "alpha" ? ConstraintMode::kAlpha : ConstraintMode::kLambda;
      m.dim_u = doc.at("dim_u").get<Index>();
      m.dim_phi = doc.at("dim_phi").get<Index>();
      m.dim_b = doc.at("dim_b").get<Index>();
      m.feature_name = doc.at("features").get<std::string>();
      m.rbf = detail::rbf_from_json(doc.at("rbf"));
      out = std::move(m);
    } else if (kind == "ncl") {
      NullspaceComponentModel m{detail::rbf_from_json(doc.at("rbf"))};
      detail::check_dim(doc, "dim_u", m.dim_u());
      out = std::move(m);
    } else if (kind == "pi-parametric") {
      ParametricPolicyModel m;
      const std::string basis = doc.at("basis").get<std::string>();
      if (basis != "rbf" && basis != "linear") throw IoError("unknown policy basis '" + basis + "'");
      m.basis = basis == "rbf" ? PolicyBasis::kRbf : PolicyBasis::kLinear;
      m.rbf = detail::rbf_from_json(doc.at("rbf"));
      detail::check_dim(doc, "dim_x", m.dim_x());
      detail::check_dim(doc, "dim_u", m.dim_u());
      out = std::move(m);
    } else if (kind == "pi-lwl") {
      LwlPolicyModel m;
      m.rbf = detail::rbf_from_json(doc.at("rbf"));
      for (const auto& b : doc.at("local_maps")) m.local_maps.push_back(detail::matrix_from_json(b, "local_maps"));
      detail::check_dim(doc, "dim_x", m.dim_x());
      detail::check_dim(doc, "dim_u", m.dim_u());
      out = std::move(m);
    } else {
      throw IoError("unknown model kind '" + kind + "'");
    }
    std::visit([](const auto& m) { m.validate(); }, out);
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed model document: ") + e.what());
  } catch (const ValidationError& e) {
    throw IoError(std::string("invalid model document: ") + e.what());
  }
}

inline void save_model(const AnyModel& model, const std::string& path) {
  const nlohmann::json doc = model_to_json(model);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model '" + path + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed while writing model '" + path + "'");
}

inline AnyModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": malformed model document: " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace ccl

#endif  // CCL_IO_HPP_

#pragma once

#include "entcap/gco.hpp"
#include "entcap/linalg.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <string>

namespace entcap {

using nlohmann::json;

inline constexpr const char* toolkit_version = "0.1.0";

struct ParseError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Complex numbers serialize as [re, im] pairs; matrices as row-major nested
// arrays.  This keeps documents diffable and exact at double precision.

inline json complex_to_json(const Complex& z) {
  return json::array({z.real(), z.imag()});
}

inline Complex complex_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ParseError(where + ": expected a [re, im] pair");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row.push_back(complex_to_json(m(i, j)));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    throw ParseError(where + ": expected a nonempty array of rows");
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array()) {
    throw ParseError(where + ": rows must be arrays");
  }
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ParseError(where + ": ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(i, c) = complex_from_json(row[static_cast<std::size_t>(c)],
                                  where + "[" + std::to_string(i) + "][" +
                                      std::to_string(c) + "]");
    }
  }
  return m;
}

inline json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(complex_to_json(v(i)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// OperatorDocument: a labeled unitary on an m x n bipartite space.

struct OperatorDocument {
  std::string label;
  int dim_left = 0;
  int dim_right = 0;
  Matrix matrix;
};

inline json to_json(const OperatorDocument& doc) {
  json j;
  if (!doc.label.empty()) {
    j["label"] = doc.label;
  }
  j["dims"] = json::array({doc.dim_left, doc.dim_right});
  j["matrix"] = matrix_to_json(doc.matrix);
  return j;
}

inline OperatorDocument operator_document_from_json(const json& j) {
  OperatorDocument doc;
  if (j.contains("label")) {
    if (!j["label"].is_string()) {
      throw ParseError("label: expected a string");
    }
    doc.label = j["label"].get<std::string>();
  }
  if (!j.contains("dims") || !j["dims"].is_array() || j["dims"].size() != 2 ||
      !j["dims"][0].is_number_integer() || !j["dims"][1].is_number_integer()) {
    throw ParseError("dims: expected [m, n] integers");
  }
  doc.dim_left = j["dims"][0].get<int>();
  doc.dim_right = j["dims"][1].get<int>();
  if (doc.dim_left < 1 || doc.dim_right < 1) {
    throw ParseError("dims: entries must be positive");
  }
  if (!j.contains("matrix")) {
    throw ParseError("matrix: missing");
  }
  doc.matrix = matrix_from_json(j["matrix"], "matrix");
  const Eigen::Index d = static_cast<Eigen::Index>(doc.dim_left) * doc.dim_right;
  if (doc.matrix.rows() != d || doc.matrix.cols() != d) {
    throw ParseError("matrix: expected " + std::to_string(d) + "x" +
                     std::to_string(d) + " entries for dims [" +
                     std::to_string(doc.dim_left) + ", " +
                     std::to_string(doc.dim_right) + "]");
  }
  return doc;
}

/// Loads an operator document and validates unitarity at the file-load
/// tolerance (1e-8).
inline std::pair<OperatorDocument, UnitaryOperator> load_operator_document(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open operator file: " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("operator file " + path + ": " + e.what());
  }
  OperatorDocument doc = operator_document_from_json(j);
  try {
    UnitaryOperator u = validate_unitary(doc.matrix, 1e-8);
    return {std::move(doc), std::move(u)};
  } catch (const NotUnitaryError& e) {
    throw ParseError(std::string("matrix: ") + e.what());
  } catch (const NotSquareError& e) {
    throw ParseError(std::string("matrix: ") + e.what());
  }
}

inline void save_operator_document(const OperatorDocument& doc,
                                   const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ParseError("cannot write operator file: " + path);
  }
  out << to_json(doc).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Family description: m, n, optional control basis, members as builtin names
// ("I", "X", "Z", "QFT_POWER k", "SHIFT") or explicit n x n matrices.

inline Matrix member_from_name(const std::string& name, int n,
                               const std::string& where) {
  if (name == "I") {
    return Matrix::Identity(n, n);
  }
  if (name == "X" || name == "SHIFT") {
    return shift_operator(n);
  }
  if (name == "Z") {
    return phase_operator(n);
  }
  if (name.rfind("QFT_POWER", 0) == 0) {
    const std::string arg = name.substr(9);
    int k = 0;
    try {
      k = std::stoi(arg);
    } catch (const std::exception&) {
      throw ParseError(where + ": QFT_POWER needs an integer argument");
    }
    Matrix p = Matrix::Identity(n, n);
    const Matrix z = phase_operator(n);
    for (int i = 0; i < ((k % n) + n) % n; ++i) {
      p = p * z;
    }
    return p;
  }
  throw ParseError(where + ": unknown member name '" + name + "'");
}

inline UnitaryFamily family_from_json(const json& j) {
  for (const char* field : {"m", "n"}) {
    if (!j.contains(field) || !j[field].is_number_integer()) {
      throw ParseError(std::string(field) + ": expected an integer");
    }
  }
  const int m = j["m"].get<int>();
  const int n = j["n"].get<int>();
  if (!j.contains("members") || !j["members"].is_array()) {
    throw ParseError("members: expected an array");
  }
  std::vector<UnitaryOperator> members;
  int idx = 0;
  for (const json& e : j["members"]) {
    const std::string where = "members[" + std::to_string(idx) + "]";
    Matrix mat;
    if (e.is_string()) {
      mat = member_from_name(e.get<std::string>(), n, where);
    } else if (e.is_array()) {
      mat = matrix_from_json(e, where);
      if (mat.rows() != n || mat.cols() != n) {
        throw ParseError(where + ": expected an n x n matrix");
      }
    } else {
      throw ParseError(where + ": expected a name or a matrix");
    }
    try {
      members.push_back(validate_unitary(mat, 1e-8));
    } catch (const NotUnitaryError& err) {
      throw ParseError(where + ": " + err.what());
    }
    ++idx;
  }
  std::optional<Matrix> basis;
  if (j.contains("control_basis")) {
    basis = matrix_from_json(j["control_basis"], "control_basis");
  }
  std::string label;
  if (j.contains("label") && j["label"].is_string()) {
    label = j["label"].get<std::string>();
  }
  return UnitaryFamily::create(m, n, std::move(members), basis, label);
}

inline UnitaryFamily load_family_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open family file: " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("family file " + path + ": " + e.what());
  }
  return family_from_json(j);
}

// ---------------------------------------------------------------------------
// ResultDocument: what every CLI command emits with --json.

struct ResultDocument {
  std::string command;
  std::string label;
  std::uint64_t seed = 0;
  std::string bound_status;
  json values = json::object();
  json diagnostics = json::object();
  std::string version = toolkit_version;
};

inline json to_json(const ResultDocument& doc) {
  json j;
  j["command"] = doc.command;
  j["label"] = doc.label;
  j["seed"] = doc.seed;
  j["values"] = doc.values;
  if (!doc.bound_status.empty()) {
    j["bound_status"] = doc.bound_status;
  }
  j["diagnostics"] = doc.diagnostics;
  j["toolkit_version"] = doc.version;
  return j;
}

inline ResultDocument result_document_from_json(const json& j) {
  ResultDocument doc;
  for (const char* field : {"command", "label", "toolkit_version"}) {
    if (!j.contains(field) || !j[field].is_string()) {
      throw ParseError(std::string(field) + ": expected a string");
    }
  }
  doc.command = j["command"].get<std::string>();
  doc.label = j["label"].get<std::string>();
  if (!j.contains("seed") || !j["seed"].is_number_unsigned()) {
    throw ParseError("seed: expected an unsigned integer");
  }
  doc.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("bound_status")) {
    doc.bound_status = j["bound_status"].get<std::string>();
  }
  doc.values = j.value("values", json::object());
  doc.diagnostics = j.value("diagnostics", json::object());
  doc.version = j["toolkit_version"].get<std::string>();
  return doc;
}

inline const char* bound_status_name(BoundStatus s) {
  switch (s) {
    case BoundStatus::Exact_ClosedForm:
      return "exact_closed_form";
    case BoundStatus::NumericUpperBound:
      return "numeric_upper_bound";
    case BoundStatus::NumericEstimate:
      return "numeric_estimate";
  }
  return "unknown";
}

}  // namespace entcap

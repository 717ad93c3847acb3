#pragma once

// Input documents (JSON or CSV) and canonical JSON output.

#include <Eigen/Dense>
#include <json.hpp>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qergodic/error.hpp"
#include "qergodic/limits.hpp"

namespace qergodic::cli {

using json = nlohmann::json;

struct ChainDocument {
  Matrix Q;
  Vector pi;
  std::vector<std::string> labels;
  std::optional<Vector> observable;
  Options options;
  std::vector<std::string> warnings;
  std::string source;
};

namespace detail {

inline std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw Error(Errc::ParseError, where + " must be a number");
  return j.get<double>();
}

inline Vector vector_of(const json& j, const std::string& where) {
  if (!j.is_array()) throw Error(Errc::ParseError, where + " must be an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Index>(i)) = number(j[i], where + "[" + std::to_string(i) + "]");
  }
  return v;
}

inline void apply_options(const json& o, Options& opt) {
  if (!o.is_object()) throw Error(Errc::ParseError, "\"options\" must be an object");
  for (const auto& [key, val] : o.items()) {
    if (key == "validation_tol") {
      opt.validation_tol = number(val, key);
    } else if (key == "rho_eq_tol") {
      opt.rho_eq_tol = number(val, key);
    } else if (key == "alpha_tol") {
      opt.alpha_tol = number(val, key);
    } else if (key == "pi_restriction" || key == "exact_scalar_compare") {
      if (!val.is_boolean()) throw Error(Errc::ParseError, "option " + key + " must be boolean");
      (key == "pi_restriction" ? opt.pi_restriction : opt.exact_scalar_compare) = val.get<bool>();
    } else {
      throw Error(Errc::ParseError, "unknown option \"" + key + "\"");
    }
  }
}

inline void finish(ChainDocument& doc, bool has_pi) {
  const Index d = doc.Q.rows();
  if (!has_pi) {
    doc.pi = Vector::Constant(d, 1.0 / static_cast<double>(d));
    doc.warnings.push_back("no pi given; using the uniform distribution");
  }
  if (doc.pi.size() != d) {
    throw Error(Errc::ShapeMismatch, "pi has length " + std::to_string(doc.pi.size()) +
                                         ", expected " + std::to_string(d));
  }
  if (!doc.labels.empty() && static_cast<Index>(doc.labels.size()) != d) {
    throw Error(Errc::ShapeMismatch, "labels must name every state");
  }
  if (doc.observable && doc.observable->size() != d) {
    throw Error(Errc::ShapeMismatch, "observable must have one value per state");
  }
}

inline ChainDocument parse_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ParseError, line_col(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
  }
  if (!j.is_object()) throw Error(Errc::ParseError, "document must be a JSON object");
  ChainDocument doc;
  bool has_q = false, has_pi = false;
  for (const auto& [key, val] : j.items()) {
    if (key == "Q") {
      if (!val.is_array() || val.empty()) throw Error(Errc::ParseError, "\"Q\" must be a non-empty array of rows");
      const std::size_t d = val.size();
      doc.Q.resize(static_cast<Index>(d), static_cast<Index>(d));
      for (std::size_t r = 0; r < d; ++r) {
        if (!val[r].is_array()) throw Error(Errc::ParseError, "Q row " + std::to_string(r + 1) + " is not an array");
        if (val[r].size() != d) {
          throw Error(Errc::ShapeMismatch, "Q row " + std::to_string(r + 1) + " has " +
                                               std::to_string(val[r].size()) + " entries, expected " +
                                               std::to_string(d));
        }
        for (std::size_t c = 0; c < d; ++c) {
          doc.Q(static_cast<Index>(r), static_cast<Index>(c)) =
              number(val[r][c], "Q[" + std::to_string(r + 1) + "][" + std::to_string(c + 1) + "]");
        }
      }
      has_q = true;
    } else if (key == "pi") {
      doc.pi = vector_of(val, "pi");
      has_pi = true;
    } else if (key == "labels") {
      if (!val.is_array()) throw Error(Errc::ParseError, "\"labels\" must be an array");
      for (const auto& l : val) {
        if (!l.is_string()) throw Error(Errc::ParseError, "labels must be strings");
        doc.labels.push_back(l.get<std::string>());
      }
    } else if (key == "observable") {
      doc.observable = vector_of(val, "observable");
    } else if (key == "options") {
      apply_options(val, doc.options);
    } else if (key == "description") {
      if (!val.is_string()) throw Error(Errc::ParseError, "\"description\" must be a string");
    } else {
      throw Error(Errc::ParseError, "unknown key \"" + key + "\"");
    }
  }
  if (!has_q) throw Error(Errc::ParseError, "missing \"Q\"");
  finish(doc, has_pi);
  return doc;
}

// d rows of d comma-separated numbers, optionally followed by one pi row.
// Blank lines and lines starting with '#' are skipped.
inline ChainDocument parse_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t end = line.find(',', pos);
      if (end == std::string::npos) end = line.size();
      std::string cell = line.substr(pos, end - pos);
      const auto a = cell.find_first_not_of(" \t\r");
      const auto b = cell.find_last_not_of(" \t\r");
      cell = a == std::string::npos ? "" : cell.substr(a, b - a + 1);
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (cell.empty() || used != cell.size()) {
        throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ", column " +
                                          std::to_string(pos + 1) + ": not a number: \"" + cell + "\"");
      }
      row.push_back(x);
      pos = end + 1;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(Errc::ParseError, "empty CSV document");
  const std::size_t d = rows.front().size();
  if (rows.size() != d && rows.size() != d + 1) {
    throw Error(Errc::ShapeMismatch, "CSV needs " + std::to_string(d) + " matrix rows and an optional pi row, got " +
                                         std::to_string(rows.size()) + " rows");
  }
  ChainDocument doc;
  doc.Q.resize(static_cast<Index>(d), static_cast<Index>(d));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != d) {
      throw Error(Errc::ShapeMismatch, "CSV row " + std::to_string(r + 1) + " has " +
                                           std::to_string(rows[r].size()) + " values, expected " +
                                           std::to_string(d));
    }
  }
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) doc.Q(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  }
  const bool has_pi = rows.size() == d + 1;
  if (has_pi) doc.pi = Eigen::Map<const Vector>(rows[d].data(), static_cast<Index>(d));
  finish(doc, has_pi);
  return doc;
}

}  // namespace detail

/// JSON when the first non-blank character is '{', CSV otherwise.
inline ChainDocument parse_document_string(const std::string& text, const std::string& source = "-") {
  const auto first = text.find_first_not_of(" \t\r\n");
  ChainDocument doc = (first != std::string::npos && text[first] == '{') ? detail::parse_json(text)
                                                                          : detail::parse_csv(text);
  doc.source = source;
  return doc;
}

/// Reads `path`, or standard input for "-".
inline ChainDocument parse_document(const std::string& path) {
  std::string text;
  if (path == "-") {
    text.assign(std::istreambuf_iterator<char>(std::cin), {});
  } else {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(Errc::ParseError, "cannot open " + path);
    text.assign(std::istreambuf_iterator<char>(f), {});
  }
  return parse_document_string(text, path);
}

inline SubstochasticModel to_model(const ChainDocument& doc) {
  return validate(doc.Q, doc.pi, doc.options.validation_tol);
}

// ---------------------------------------------------------------------------
// Canonical JSON: sorted keys, two-space indent, floats with 17 significant
// digits, integers verbatim. Parsing the output and dumping again reproduces
// it byte for byte.

namespace detail {

inline std::string fmt_double(double x) {
  if (!std::isfinite(x)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s(buf);
  return s == "-0" ? "0" : s;
}

inline void dump(const json& j, std::string& out, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += inner + json(k).dump() + ": ";
        dump(v, out, indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      bool scalars = true;
      for (const auto& v : j) scalars = scalars && !v.is_structured();
      if (scalars) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          dump(j[i], out, indent + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        dump(j[i], out, indent + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case json::value_t::number_float:
      out += fmt_double(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

}  // namespace detail

inline std::string canonical_dump(const json& j) {
  std::string out;
  detail::dump(j, out, 0);
  out += "\n";
  return out;
}

}  // namespace qergodic::cli

/*
 * Copyright 2026 The hippoptd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hippoptd/types.hpp"

namespace hippoptd::io {

/// Who produced a payload. Always attached to JSON exports.
struct Provenance {
  std::string command_line;
  std::uint64_t seed = 0;
  std::string version = kVersion;
  std::string timestamp;

  /// UTC ISO-8601; honors SOURCE_DATE_EPOCH for reproducible builds.
  static std::string now_utc() {
    std::time_t t = std::time(nullptr);
    if (const char* fixed = std::getenv("SOURCE_DATE_EPOCH")) {
      t = static_cast<std::time_t>(std::strtoll(fixed, nullptr, 10));
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }
};

/// Row-major float64 payload, real or complex. Tables and traces carry column
/// names and are always real (complex quantities are split into _re/_im
/// columns by the producer).
struct Payload {
  enum class Kind { kMatrix, kVector, kTable, kTrace };

  Kind kind = Kind::kMatrix;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::string> columns;
  std::vector<double> re;
  std::vector<double> im;  // empty for real payloads
  std::map<std::string, double> summary;

  bool is_complex() const { return !im.empty(); }

  static Payload matrix(const RMatrix& m) {
    Payload p{Kind::kMatrix, static_cast<std::size_t>(m.rows()),
              static_cast<std::size_t>(m.cols())};
    p.re.reserve(m.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) p.re.push_back(m(i, j));
    return p;
  }

  static Payload matrix(const CMatrix& m) {
    Payload p{Kind::kMatrix, static_cast<std::size_t>(m.rows()),
              static_cast<std::size_t>(m.cols())};
    p.re.reserve(m.size());
    p.im.reserve(m.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        p.re.push_back(m(i, j).real());
        p.im.push_back(m(i, j).imag());
      }
    }
    return p;
  }

  static Payload vector(const RVector& v) {
    Payload p = matrix(RMatrix(v));
    p.kind = Kind::kVector;
    return p;
  }

  static Payload vector(const CVector& v) {
    Payload p = matrix(CMatrix(v));
    p.kind = Kind::kVector;
    return p;
  }

  static Payload table(std::vector<std::string> columns,
                       const std::vector<std::vector<double>>& rows,
                       Kind kind = Kind::kTable) {
    Payload p{kind, rows.size(), columns.size(), std::move(columns)};
    p.re.reserve(rows.size() * p.cols);
    for (const auto& r : rows) {
      detail::require(r.size() == p.cols, "table row width does not match header");
      p.re.insert(p.re.end(), r.begin(), r.end());
    }
    return p;
  }

  double at(std::size_t i, std::size_t j) const { return re.at(i * cols + j); }

  CMatrix to_cmatrix() const {
    CMatrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        m(i, j) = cplx(re[i * cols + j], im.empty() ? 0.0 : im[i * cols + j]);
    return m;
  }
};

inline std::string_view kind_name(Payload::Kind k) {
  switch (k) {
    case Payload::Kind::kMatrix: return "matrix";
    case Payload::Kind::kVector: return "vector";
    case Payload::Kind::kTable: return "table";
    case Payload::Kind::kTrace: return "trace";
  }
  return "matrix";
}

inline Payload::Kind parse_kind(std::string_view s) {
  if (s == "matrix") return Payload::Kind::kMatrix;
  if (s == "vector") return Payload::Kind::kVector;
  if (s == "table") return Payload::Kind::kTable;
  if (s == "trace") return Payload::Kind::kTrace;
  throw std::invalid_argument("unknown payload kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// npy (format version 1.0, little-endian, C order)

namespace detail {

inline void put_le_f64(std::string& buf, double x) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char raw[8];
  std::memcpy(raw, &bits, 8);
  buf.append(raw, 8);
}

inline double get_le_f64(const char* p) {
  std::uint64_t bits;
  std::memcpy(&bits, p, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  return std::bit_cast<double>(bits);
}

inline std::string npy_shape(const Payload& p) {
  if (p.kind == Payload::Kind::kVector) return "(" + std::to_string(p.rows * p.cols) + ",)";
  return "(" + std::to_string(p.rows) + ", " + std::to_string(p.cols) + ")";
}

}  // namespace detail

/// Serialized npy bytes: magic, version 1.0, header dict padded with spaces
/// to a 64-byte preamble boundary and closed by '\n', then the data.
inline std::string npy_bytes(const Payload& p) {
  const bool cx = p.is_complex();
  std::string header = std::string("{'descr': '") + (cx ? "<c16" : "<f8") +
                       "', 'fortran_order': False, 'shape': " + detail::npy_shape(p) + ", }";
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');
  std::string out;
  out.reserve(10 + header.size() + p.re.size() * (cx ? 16 : 8));
  out.append("\x93NUMPY", 6);
  out.push_back('\x01');
  out.push_back('\x00');
  const auto hlen = static_cast<std::uint16_t>(header.size());
  out.push_back(static_cast<char>(hlen & 0xff));
  out.push_back(static_cast<char>(hlen >> 8));
  out += header;
  for (std::size_t i = 0; i < p.re.size(); ++i) {
    detail::put_le_f64(out, p.re[i]);
    if (cx) detail::put_le_f64(out, p.im[i]);
  }
  return out;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(path, "cannot open for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError(path, "write failed");
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void export_npy(const Payload& p, const std::string& path) {
  write_file(path, npy_bytes(p));
}

inline Payload parse_npy(const std::string& bytes, const std::string& origin = "<memory>") {
  if (bytes.size() < 10 || bytes.compare(0, 6, "\x93NUMPY") != 0) {
    throw IoError(origin, "not an npy file");
  }
  if (bytes[6] != '\x01' || bytes[7] != '\x00') {
    throw IoError(origin, "unsupported npy version");
  }
  const std::size_t hlen = static_cast<unsigned char>(bytes[8]) |
                           (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < 10 + hlen) throw IoError(origin, "truncated header");
  const std::string header = bytes.substr(10, hlen);
  const bool cx = header.find("'<c16'") != std::string::npos;
  if (!cx && header.find("'<f8'") == std::string::npos) {
    throw IoError(origin, "only <f8 and <c16 payloads are supported");
  }
  if (header.find("'fortran_order': False") == std::string::npos) {
    throw IoError(origin, "only C-ordered arrays are supported");
  }
  const auto lp = header.find('(', header.find("'shape'"));
  const auto rp = header.find(')', lp);
  if (lp == std::string::npos || rp == std::string::npos) {
    throw IoError(origin, "malformed shape");
  }
  std::vector<std::size_t> dims;
  std::stringstream ss(header.substr(lp + 1, rp - lp - 1));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.find_first_not_of(' ') == std::string::npos) continue;
    dims.push_back(std::stoull(tok));
  }
  Payload p;
  if (dims.size() == 1) {
    p.kind = Payload::Kind::kVector;
    p.rows = dims[0];
    p.cols = 1;
  } else if (dims.size() == 2) {
    p.rows = dims[0];
    p.cols = dims[1];
  } else {
    throw IoError(origin, "only 1-d and 2-d arrays are supported");
  }
  const std::size_t count = p.rows * p.cols;
  const std::size_t width = cx ? 16 : 8;
  if (bytes.size() != 10 + hlen + count * width) throw IoError(origin, "data size mismatch");
  const char* data = bytes.data() + 10 + hlen;
  p.re.resize(count);
  if (cx) p.im.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    p.re[i] = detail::get_le_f64(data + i * width);
    if (cx) p.im[i] = detail::get_le_f64(data + i * width + 8);
  }
  return p;
}

inline Payload import_npy(const std::string& path) {
  return parse_npy(read_file(path), path);
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const Provenance& prov) {
  return {{"command_line", prov.command_line},
          {"seed", prov.seed},
          {"version", prov.version},
          {"timestamp", prov.timestamp}};
}

inline nlohmann::json to_json(const Payload& p, const Provenance& prov) {
  nlohmann::json j;
  j["kind"] = kind_name(p.kind);
  j["rows"] = p.rows;
  j["cols"] = p.cols;
  if (!p.columns.empty()) j["columns"] = p.columns;
  j["data_re"] = p.re;
  if (p.is_complex()) j["data_im"] = p.im;
  if (!p.summary.empty()) j["summary"] = p.summary;
  j["provenance"] = to_json(prov);
  return j;
}

/// Doubles are written in shortest round-trip form (at most 17 significant
/// digits), so re-parsing is bit exact.
inline std::string json_text(const Payload& p, const Provenance& prov) {
  return to_json(p, prov).dump(1) + "\n";
}

inline void export_json(const Payload& p, const Provenance& prov, const std::string& path) {
  write_file(path, json_text(p, prov));
}

namespace detail {

// NaN and infinities are written as null; they come back as NaN.
inline std::vector<double> numbers(const nlohmann::json& arr) {
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    out.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
  }
  return out;
}

}  // namespace detail

inline Payload from_json(const nlohmann::json& j) {
  Payload p;
  p.kind = parse_kind(j.at("kind").get<std::string>());
  p.rows = j.at("rows").get<std::size_t>();
  p.cols = j.at("cols").get<std::size_t>();
  if (j.contains("columns")) p.columns = j["columns"].get<std::vector<std::string>>();
  p.re = detail::numbers(j.at("data_re"));
  if (j.contains("data_im")) p.im = detail::numbers(j["data_im"]);
  if (j.contains("summary")) p.summary = j["summary"].get<std::map<std::string, double>>();
  if (p.re.size() != p.rows * p.cols || (!p.im.empty() && p.im.size() != p.re.size())) {
    throw std::invalid_argument("payload data does not match its shape");
  }
  return p;
}

inline Payload import_json(const std::string& path, Provenance* prov = nullptr) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(path, ex.what());
  }
  if (prov != nullptr && j.contains("provenance")) {
    const auto& pj = j["provenance"];
    prov->command_line = pj.value("command_line", "");
    prov->seed = pj.value("seed", std::uint64_t{0});
    prov->version = pj.value("version", "");
    prov->timestamp = pj.value("timestamp", "");
  }
  try {
    return from_json(j);
  } catch (const std::exception& ex) {
    throw IoError(path, ex.what());
  }
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

/// Header row then one line per row, %.17g numbers, LF endings. Complex
/// payloads get paired <name>_re,<name>_im columns.
inline std::string csv_text(const Payload& p) {
  std::vector<std::string> names = p.columns;
  if (names.empty()) {
    for (std::size_t j = 0; j < p.cols; ++j) names.push_back("c" + std::to_string(j));
  }
  std::string out;
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (j) out.push_back(',');
    if (p.is_complex()) {
      out += names[j] + "_re," + names[j] + "_im";
    } else {
      out += names[j];
    }
  }
  out.push_back('\n');
  for (std::size_t i = 0; i < p.rows; ++i) {
    for (std::size_t j = 0; j < p.cols; ++j) {
      if (j) out.push_back(',');
      out += detail::fmt17(p.re[i * p.cols + j]);
      if (p.is_complex()) {
        out.push_back(',');
        out += detail::fmt17(p.im[i * p.cols + j]);
      }
    }
    out.push_back('\n');
  }
  return out;
}

inline void export_csv(const Payload& p, const std::string& path) {
  write_file(path, csv_text(p));
}

/// Reads a real-valued CSV table written by export_csv.
inline Payload parse_csv(const std::string& text, const std::string& origin = "<memory>") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError(origin, "empty CSV");
  std::vector<std::string> columns;
  {
    std::stringstream hs(line);
    std::string name;
    while (std::getline(hs, name, ',')) columns.push_back(name);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw IoError(origin, "bad number '" + cell + "'");
      row.push_back(v);
    }
    if (row.size() != columns.size()) throw IoError(origin, "ragged CSV row");
    rows.push_back(std::move(row));
  }
  return Payload::table(std::move(columns), rows);
}

inline Payload import_csv(const std::string& path) {
  return parse_csv(read_file(path), path);
}

}  // namespace hippoptd::io

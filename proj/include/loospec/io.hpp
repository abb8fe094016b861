// Copyright 2026 the loospec authors
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

#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "loospec/errors.hpp"
#include "loospec/matrix.hpp"

namespace loospec {

// Matrix file format: UTF-8 text, first line "p,n", then p lines each with
// n comma-separated decimal literals. 17 significant digits on write so a
// read/write round trip is bit exact.

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline double parse_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\r')) ++pos;
    if (pos != s.size()) throw InvalidInput("trailing characters in number: '" + s + "'");
    return v;
  } catch (const InvalidInput&) {
    throw;
  } catch (const std::exception&) {
    throw InvalidInput("not a number: '" + s + "'");
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline void write_matrix_file(const std::string& path, const Matrix& m) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot open for writing: " + path);
  f << m.rows() << "," << m.cols() << "\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) f << ",";
      f << format_double(m(r, c));
    }
    f << "\n";
  }
  if (!f) throw InvalidInput("write failed: " + path);
}

inline Matrix read_matrix_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line)) throw InvalidInput("empty matrix file: " + path);
  auto dims = split_csv_line(line);
  if (dims.size() != 2) throw InvalidInput("bad matrix header in " + path);
  long p = 0, n = 0;
  try {
    p = std::stol(dims[0]);
    n = std::stol(dims[1]);
  } catch (const std::exception&) {
    throw InvalidInput("bad matrix header in " + path);
  }
  if (p < 1 || n < 1) throw InvalidInput("matrix dimensions must be positive in " + path);
  Matrix m(static_cast<std::size_t>(p), static_cast<std::size_t>(n));
  for (long r = 0; r < p; ++r) {
    if (!std::getline(f, line)) throw InvalidInput("truncated matrix file: " + path);
    auto cells = split_csv_line(line);
    if (cells.size() != static_cast<std::size_t>(n))
      throw InvalidInput("row " + std::to_string(r + 1) + " has wrong column count in " + path);
    for (long c = 0; c < n; ++c) m(r, c) = parse_double(cells[c]);
  }
  if (!m.all_finite()) throw InvalidInput("non-finite entries in " + path);
  return m;
}

// Assignment file: one line of comma-separated 1-based labels. In-memory
// labels are 0-based; the shift happens here.

inline void write_assignment_file(const std::string& path, const std::vector<int>& labels) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot open for writing: " + path);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) f << ",";
    f << labels[i] + 1;
  }
  f << "\n";
}

inline std::vector<int> read_assignment_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line)) throw InvalidInput("empty assignment file: " + path);
  std::vector<int> labels;
  for (const auto& cell : split_csv_line(line)) {
    int v = 0;
    try {
      v = std::stoi(cell);
    } catch (const std::exception&) {
      throw InvalidInput("bad label '" + cell + "' in " + path);
    }
    if (v < 1) throw InvalidInput("labels are 1-based in " + path);
    labels.push_back(v - 1);
  }
  return labels;
}

// Flat key=value config. '#' starts a comment line; keys are unique.

inline std::map<std::string, std::string> read_kv_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidInput("bad config line '" + line + "' in " + path);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline void write_kv_config(const std::string& path,
                            const std::map<std::string, std::string>& kv) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot open for writing: " + path);
  for (const auto& [k, v] : kv) f << k << "=" << v << "\n";
}

/// Write `content` to `path` through a temporary file and rename, so readers
/// never observe a partial file.
inline void atomic_write_text(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw InvalidInput("cannot open for writing: " + tmp);
    f << content;
    if (!f) throw InvalidInput("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InvalidInput("rename failed for " + path + ": " + ec.message());
}

}  // namespace loospec

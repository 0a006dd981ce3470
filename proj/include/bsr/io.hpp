#pragma once

// CSV plumbing. Numbers are written with 17 significant digits so a file
// read back reproduces the doubles exactly; output is byte-deterministic.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bsr/errors.hpp"
#include "bsr/fourier.hpp"

namespace bsr::io {

inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_real(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw DomainError("not a number: '" + s + "'");
  }
  if (used != s.size()) throw DomainError("trailing characters in number: '" + s + "'");
  return v;
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path.string(), "cannot open for writing");
  os << text;
  if (!os) throw IoError(path.string(), "write failed");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string(), "cannot open for reading");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Column-oriented table: a header and equal-length numeric columns, plus
/// optional leading string columns.
class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size()) {
      throw DomainError("table row has " + std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(header_.size()));
    }
    rows_.push_back(cells);
  }

  void add_row(const std::vector<double>& cells) {
    std::vector<std::string> s;
    s.reserve(cells.size());
    for (double v : cells) s.push_back(format_real(v));
    add_row(s);
  }

  std::size_t size() const { return rows_.size(); }

  std::string str() const {
    std::string out = join(header_);
    for (const auto& r : rows_) out += join(r);
    return out;
  }

  void write(const std::filesystem::path& path) const { write_text(path, str()); }

 private:
  static std::string join(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += ',';
      line += cells[i];
    }
    return line + '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Splits CSV text into trimmed cells; blank lines are skipped.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline Table spectral_table(const SpectralData& data) {
  Table t({"k", "re", "im"});
  for (int k = data.k_min(); k <= data.k_max(); ++k) {
    const auto c = data.mode(k);
    t.add_row({std::to_string(k), format_real(c.real()), format_real(c.imag())});
  }
  return t;
}

inline void write_spectral_csv(const std::filesystem::path& path, const SpectralData& data) {
  spectral_table(data).write(path);
}

/// Reads a `k,re,im` file. Rows may come in any order but every mode
/// -N/2..N/2-1 must appear exactly once.
inline SpectralData read_spectral_csv(const std::filesystem::path& path,
                                      SpectralKind kind = SpectralKind::noisy) {
  const auto rows = parse_csv(read_text(path));
  if (rows.empty() || rows[0] != std::vector<std::string>{"k", "re", "im"}) {
    throw IoError(path.string(), "expected header 'k,re,im'");
  }
  const int n = static_cast<int>(rows.size()) - 1;
  if (n < 4 || n % 2 != 0) {
    throw IoError(path.string(), "need an even number (>= 4) of modes, found " + std::to_string(n));
  }
  SpectralData out{ComplexVector::Zero(n), kind};
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "line " + std::to_string(r + 1);
    if (row.size() != 3) throw IoError(path.string(), where + ": expected 3 fields");
    try {
      const double kd = parse_real(row[0]);
      const int k = static_cast<int>(kd);
      if (kd != k || k < out.k_min() || k > out.k_max()) throw DomainError("mode " + row[0] + " out of range");
      const auto idx = static_cast<std::size_t>(k + n / 2);
      if (seen[idx]) throw DomainError("mode " + row[0] + " repeated");
      seen[idx] = true;
      out.mode(k) = {parse_real(row[1]), parse_real(row[2])};
    } catch (const DomainError& e) {
      throw IoError(path.string(), where + ": " + e.what());
    }
  }
  return out;
}

}  // namespace bsr::io

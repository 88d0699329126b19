#pragma once

#include <charconv>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>

namespace sentlabel {

/// Shortest decimal text that parses back to the same double.
inline std::string format_real(double value) {
  if (value == 0.0) return "0";  // folds -0
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw std::runtime_error("format_real: conversion failed");
  return std::string(buf, end);
}

inline double parse_real(std::string_view text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  return value;
}

inline std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Minimal CSV row writer: fields are joined with commas, no quoting.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  CsvWriter& field(std::string_view text) {
    if (!first_) out_ << ',';
    out_ << text;
    first_ = false;
    return *this;
  }
  CsvWriter& field(double value) { return field(format_real(value)); }
  template <std::integral T>
  CsvWriter& field(T value) {
    return field(std::to_string(value));
  }

  void end_row() {
    out_ << '\n';
    first_ = true;
  }

 private:
  std::ostream& out_;
  bool first_ = true;
};

// Dense analogue of the labelmatrix file:
//   densematrix v1 <rows> <cols>
//   <row of space-separated reals>

inline void write_dense(std::ostream& out, const Eigen::MatrixXd& m) {
  out << "densematrix v1 " << m.rows() << ' ' << m.cols() << '\n';
  std::string line;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) line.push_back(' ');
      line += format_real(m(i, j));
    }
    line.push_back('\n');
    out << line;
  }
}

inline Eigen::MatrixXd read_dense(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("densematrix: missing header");
  std::istringstream header(line);
  std::string magic, version;
  Eigen::Index rows = 0, cols = 0;
  if (!(header >> magic >> version >> rows >> cols) || magic != "densematrix" || version != "v1" || rows < 0 ||
      cols < 0) {
    throw std::runtime_error("densematrix: bad header '" + line + "'");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("densematrix: truncated");
    const auto fields = cols == 0 ? std::vector<std::string>{} : split(line, ' ');
    if (static_cast<Eigen::Index>(fields.size()) != cols)
      throw std::runtime_error("densematrix: row " + std::to_string(i) + " has wrong width");
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = parse_real(fields[static_cast<std::size_t>(j)]);
  }
  return m;
}

/// Write through a temporary file and rename, so readers never see a partial file.
template <class WriteFn>
void write_file_atomic(const std::filesystem::path& path, WriteFn&& write) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    write(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace sentlabel

#include "manppa/csv.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace manppa {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& M) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("write_matrix_csv: cannot open " + path.string());
  }
  std::string line;
  for (Index i = 0; i < M.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < M.cols(); ++j) {
      if (j > 0) line += ',';
      line += format_double(M(i, j));
    }
    line += '\n';
    out << line;
  }
  if (!out) {
    throw IoError("write_matrix_csv: write failed for " + path.string());
  }
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("read_matrix_csv: cannot open " + path.string());
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end) {
      double v = 0.0;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) {
        throw IoError("read_matrix_csv: bad number in " + path.string() + ": '" + line + "'");
      }
      row.push_back(v);
      p = res.ptr;
      if (p < end) {
        if (*p != ',') {
          throw IoError("read_matrix_csv: expected ',' in " + path.string());
        }
        ++p;
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError("read_matrix_csv: ragged rows in " + path.string());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw IoError("read_matrix_csv: empty file " + path.string());
  }
  Matrix M(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      M(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
  }
  return M;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("read_text_file: cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("write_text_file: cannot open " + path.string());
  }
  out << text;
  if (!out) {
    throw IoError("write_text_file: write failed for " + path.string());
  }
}

}  // namespace manppa

#include "csv_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "eigenshrink/errors.hpp"

namespace eigenshrink::cli {
namespace {

std::string where(std::size_t row, std::size_t col) {
  return "row " + std::to_string(row) + ", column " + std::to_string(col);
}

// Splits one record, honouring double quotes ("" inside quotes is a literal quote).
std::vector<std::string> split_record(const std::string& line, std::size_t row) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) throw ValidationError("unterminated quote at row " + std::to_string(row));
  cells.push_back(std::move(cur));
  return cells;
}

double parse_cell(std::string cell, std::size_t row, std::size_t col) {
  const auto b = cell.find_first_not_of(" \t");
  const auto e = cell.find_last_not_of(" \t");
  if (b == std::string::npos) throw ValidationError("empty cell at " + where(row, col));
  cell = cell.substr(b, e - b + 1);
  const char* first = cell.data();
  if (*first == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw ValidationError("non-numeric cell '" + cell + "' at " + where(row, col));
  return v;
}

}  // namespace

Eigen::MatrixXd parse_matrix_csv(const std::string& text, bool header) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  bool skipped = !header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!skipped) {
      skipped = true;
      continue;
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::size_t row = rows.size() + 1;
    const auto cells = split_record(line, row);
    std::vector<double> values;
    values.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) values.push_back(parse_cell(cells[c], row, c + 1));
    if (!rows.empty() && values.size() != rows.front().size())
      throw ValidationError("ragged row " + std::to_string(row) + " (line " + std::to_string(line_no) + "): " +
                            std::to_string(values.size()) + " cells, expected " +
                            std::to_string(rows.front().size()));
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ValidationError("CSV input has no data rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

Eigen::MatrixXd read_matrix_csv(const std::string& path, bool header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_matrix_csv(ss.str(), header);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::vector<double> read_vector_csv(const std::string& path, bool header) {
  const Eigen::MatrixXd m = read_matrix_csv(path, header);
  if (m.cols() != 1 && m.rows() != 1)
    throw ValidationError(path + ": expected a single column, got " + std::to_string(m.cols()) + " columns");
  return {m.data(), m.data() + m.size()};
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_matrix_csv(const Eigen::MatrixXd& m, std::ostream& out, const std::vector<std::string>& header) {
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  if (!header.empty()) out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_number(m(i, j));
    out << '\n';
  }
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path, const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  write_matrix_csv(m, out, header);
  if (!out) throw ValidationError("write failed for " + path);
}

}  // namespace eigenshrink::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace eigenshrink::cli {

/// Comma-separated numbers, one observation per row. Throws ValidationError naming the
/// row and column of ragged rows or non-numeric cells, and on empty input.
Eigen::MatrixXd parse_matrix_csv(const std::string& text, bool header = false);
Eigen::MatrixXd read_matrix_csv(const std::string& path, bool header = false);

/// Single-column file (or a single row) as a vector.
std::vector<double> read_vector_csv(const std::string& path, bool header = false);

/// 17 significant digits, so that reading back is exact.
void write_matrix_csv(const Eigen::MatrixXd& m, std::ostream& out, const std::vector<std::string>& header = {});
void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path, const std::vector<std::string>& header = {});

std::string format_number(double v);

}  // namespace eigenshrink::cli

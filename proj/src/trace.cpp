#include "spectra/trace.hpp"

#include <algorithm>

#include "spectra/errors.hpp"
#include "spectra/io.hpp"

namespace spectra {

void Trace::append(std::vector<double> row) {
  if (row.size() != columns.size()) {
    throw ContractViolation("trace row arity mismatch");
  }
  rows.push_back(std::move(row));
}

double Trace::last(const std::string& column) const {
  const auto it = std::find(columns.begin(), columns.end(), column);
  if (it == columns.end()) {
    throw ContractViolation("trace has no column '" + column + "'");
  }
  if (rows.empty()) {
    throw ContractViolation("trace is empty");
  }
  return rows.back()[static_cast<std::size_t>(it - columns.begin())];
}

void Trace::write_csv(const std::string& path) const {
  write_matrix_csv(path, rows, columns);
}

}  // namespace spectra

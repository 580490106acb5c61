#pragma once

// Time-indexed run records shared by the synchronous and asynchronous
// drivers, persisted as CSV. A trace has a fixed column set chosen by the
// producer, append-only rows, and a free-form summary map for run-level
// scalars (final metrics, realized bound constants, event counts).

#include <map>
#include <string>
#include <vector>

namespace spectra {

struct Trace {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::map<std::string, double> summary;
  std::string warning;  // non-empty when the run had to adjust its input

  void append(std::vector<double> row);  // arity must match columns
  // Last recorded value of a column; throws if absent or empty.
  double last(const std::string& column) const;
  void write_csv(const std::string& path) const;
};

}  // namespace spectra

#pragma once

// Small file-output helpers shared across modules. All writes go through
// atomic_write_file (write to a temp file in the target directory, then
// rename) so a crash never leaves a half-written artifact behind.

#include <string>
#include <vector>

namespace spectra {

void atomic_write_file(const std::string& path, const std::string& content);

// One row per entity, 17 significant digits, comma separated.
void write_matrix_csv(const std::string& path,
                      const std::vector<std::vector<double>>& rows,
                      const std::vector<std::string>& header = {});

std::string format_double(double v);  // %.17g

}  // namespace spectra

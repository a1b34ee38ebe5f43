#pragma once

// CSV interchange for metrics tables and bound curves.
//
// Layout: '#'-prefixed header comment lines ("# key=value"), one column
// header line, then one row per round. Floats use 17 significant digits;
// unknown values (NaN) are written as empty cells.

#include <filesystem>
#include <string>
#include <vector>

#include "otapfl/training.h"

namespace otapfl {

struct ExtraColumn {
  std::string name;
  std::vector<double> values;  // one per row
};

inline const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols{
      "round", "global_loss", "mean_personal_loss", "mean_personal_acc",
      "generic_acc", "w_dist_sq"};
  return cols;
}

std::string format_cell(double v);

/// Column header plus data rows, no comment lines.
std::string metrics_csv_body(const MetricsTable& table,
                             const std::vector<ExtraColumn>& extra = {});

/// Header comments followed by the body.
std::string metrics_csv(const MetricsTable& table,
                        const std::vector<ExtraColumn>& extra = {});

/// Strips '#' comment lines from CSV text.
std::string csv_body(const std::string& csv_text);

/// Writes via a temporary file and rename. Throws IoError.
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);

}  // namespace otapfl

#include "otapfl/metrics.h"

#include <cmath>
#include <fstream>
#include <sstream>

namespace otapfl {

std::string format_cell(double v) {
  if (std::isnan(v)) return "";
  return format_double(v);
}

std::string metrics_csv_body(const MetricsTable& table,
                             const std::vector<ExtraColumn>& extra) {
  for (const auto& c : extra) {
    if (c.values.size() != table.rows.size()) {
      throw DimensionError("extra column '" + c.name + "' has " +
                           std::to_string(c.values.size()) + " values for " +
                           std::to_string(table.rows.size()) + " rows");
    }
  }
  std::ostringstream os;
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  for (const auto& c : extra) os << ',' << c.name;
  os << '\n';
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    os << row.round << ',' << format_cell(row.global_loss) << ','
       << format_cell(row.mean_personal_loss) << ','
       << format_cell(row.mean_personal_acc) << ',' << format_cell(row.generic_acc)
       << ',' << format_cell(row.w_dist_sq);
    for (const auto& c : extra) os << ',' << format_cell(c.values[r]);
    os << '\n';
  }
  return os.str();
}

std::string metrics_csv(const MetricsTable& table,
                        const std::vector<ExtraColumn>& extra) {
  std::ostringstream os;
  for (const auto& h : table.header) os << "# " << h << '\n';
  os << metrics_csv_body(table, extra);
  return os.str();
}

std::string csv_body(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() == '#') continue;
    out << line << '\n';
  }
  return out.str();
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace otapfl

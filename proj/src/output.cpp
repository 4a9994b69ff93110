#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "crsn/harness.hpp"

namespace crsn {

namespace {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_csv(const Table& t, const nlohmann::json& header) {
  std::ostringstream out;
  out << "# " << header.dump() << '\n';
  for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << t.columns[c];
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_number(row[c]);
    out << '\n';
  }
  return out.str();
}

std::vector<std::string> write_result(const ExperimentResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kConfig, "cannot create output directory " + dir + ": " + ec.message());

  std::vector<std::string> written;
  for (const auto& t : r.tables) {
    const std::string stem = t.name.empty() ? r.experiment : r.experiment + "-" + t.name;
    const fs::path path = fs::path(dir) / (stem + "_" + r.hash + ".csv");
    const nlohmann::json header = {{"experiment", r.experiment}, {"table", t.name}, {"config_hash", r.hash},
                                   {"config", r.config}};
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::kConfig, "cannot write " + path.string());
    out << to_csv(t, header);
    written.push_back(path.string());
  }
  return written;
}

}  // namespace crsn

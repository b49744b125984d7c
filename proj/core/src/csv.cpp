#include "meltpool/csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace meltpool {

const std::vector<std::string> kScanLogColumns = {"step",       "time_s",        "x_mm",        "y_mm",
                                                  "power_W",    "speed_mm_s",    "melt_area_mm2", "lookahead_T_K"};

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_number(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("parse_number: empty field");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  // ERANGE also flags subnormal results, which are fine
  if (end != s.c_str() + s.size() || (errno == ERANGE && std::isinf(v))) throw std::invalid_argument("parse_number: bad field '" + s + "'");
  return v;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw std::out_of_range("CSV has no column '" + name + "'");
}

bool CsvTable::has_column(const std::string& name) const {
  for (const auto& h : header)
    if (h == name) return true;
  return false;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("read_csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto row = split_line(line);
    if (row.size() != t.header.size())
      throw std::invalid_argument("read_csv: wrong field count on line " + std::to_string(lineno));
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_csv(in);
}

void write_csv(std::ostream& out, const CsvTable& table) {
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << fields[i];
    }
    out << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
}

void write_csv_file(const std::string& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_csv(out, table);
  if (!out) throw std::runtime_error("write failed for " + path);
}

CsvTable scan_log_table(const std::vector<StepRecord>& records) {
  CsvTable t;
  t.header = kScanLogColumns;
  t.rows.reserve(records.size());
  for (const auto& r : records) {
    t.rows.push_back({std::to_string(r.step), format_number(r.time_s), format_number(r.x_mm), format_number(r.y_mm),
                      format_number(r.power_w), format_number(r.speed_mm_s), format_number(r.melt_area_mm2),
                      format_number(r.lookahead_temp_k)});
  }
  return t;
}

std::vector<StepRecord> scan_log_from_table(const CsvTable& table) {
  std::vector<std::size_t> col;
  for (const auto& name : kScanLogColumns) col.push_back(table.column(name));
  std::vector<StepRecord> out;
  out.reserve(table.rows.size());
  int track = 0, track_step = 0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    StepRecord r;
    r.step = static_cast<int>(parse_number(row[col[0]]));
    r.time_s = parse_number(row[col[1]]);
    r.x_mm = parse_number(row[col[2]]);
    r.y_mm = parse_number(row[col[3]]);
    r.power_w = parse_number(row[col[4]]);
    r.speed_mm_s = parse_number(row[col[5]]);
    r.melt_area_mm2 = parse_number(row[col[6]]);
    r.lookahead_temp_k = parse_number(row[col[7]]);
    if (i > 0) {
      if (r.y_mm != out.back().y_mm) {
        ++track;
        track_step = 0;
      } else {
        ++track_step;
      }
    }
    r.track = track;
    r.track_step = track_step;
    out.push_back(r);
  }
  return out;
}

void write_scan_log(const std::string& path, const std::vector<StepRecord>& records) {
  write_csv_file(path, scan_log_table(records));
}

std::vector<StepRecord> read_scan_log(const std::string& path) { return scan_log_from_table(read_csv_file(path)); }

}  // namespace meltpool

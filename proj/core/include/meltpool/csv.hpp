#pragma once

// Plain CSV with full round-trip number formatting.

#include <iosfwd>
#include <string>
#include <vector>

#include "meltpool/thermal.hpp"

namespace meltpool {

/// 17 significant digits; parse_number(format_number(x)) == x for finite x.
std::string format_number(double x);
double parse_number(const std::string& s);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Throws std::out_of_range for an unknown column.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);
void write_csv(std::ostream& out, const CsvTable& table);
void write_csv_file(const std::string& path, const CsvTable& table);

/// step,time_s,x_mm,y_mm,power_W,speed_mm_s,melt_area_mm2,lookahead_T_K
extern const std::vector<std::string> kScanLogColumns;

CsvTable scan_log_table(const std::vector<StepRecord>& records);
/// Track indices are recovered from changes of the y coordinate.
std::vector<StepRecord> scan_log_from_table(const CsvTable& table);

void write_scan_log(const std::string& path, const std::vector<StepRecord>& records);
std::vector<StepRecord> read_scan_log(const std::string& path);

}  // namespace meltpool

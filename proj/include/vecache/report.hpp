#pragma once

// Per-(scheme, capacity, speed) result rows and their CSV / JSON forms.
// Values are stored already rounded to their printed precision so that
// parse_report(emit_report(r)) == r.

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace vecache::harness {

enum class ReportFormat { Csv, Json };

/// Throws ConfigError for anything but "csv" / "json".
ReportFormat parse_format(const std::string& name);

struct ReportRow {
  std::string scheme;
  int capacity = 0;
  double speed = 0.0;            // mean vehicle speed, m/s
  double hit_pct = 0.0;          // 4 decimals
  double mean_latency_ms = 0.0;  // 4 decimals
  double uplink_mb = 0.0;        // 2 decimals
  double downlink_mb = 0.0;      // 2 decimals
  std::uint64_t seed = 0;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct Report {
  std::vector<ReportRow> rows;

  friend bool operator==(const Report&, const Report&) = default;
  const ReportRow* find(const std::string& scheme, int capacity) const;
};

inline constexpr const char* kCsvHeader =
    "scheme,capacity,speed,hit_pct,mean_latency_ms,uplink_mb,downlink_mb,seed";

double round_to(double x, int decimals);
/// bytes / 2^20, rounded to 2 decimals.
double to_mb(std::uint64_t bytes);

void emit_report(std::ostream& out, const Report& report, ReportFormat format);
std::string emit_report(const Report& report, ReportFormat format);
/// Throws ParseError on malformed input.
Report parse_report(std::istream& in, ReportFormat format);
Report parse_report(const std::string& text, ReportFormat format);

}  // namespace vecache::harness

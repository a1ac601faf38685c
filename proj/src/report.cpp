#include "vecache/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "vecache/config.hpp"
#include "vecache/error.hpp"

namespace vecache::harness {

ReportFormat parse_format(const std::string& name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "json") return ReportFormat::Json;
  throw ConfigError("unknown report format '" + name + "'");
}

const ReportRow* Report::find(const std::string& scheme, int capacity) const {
  for (const auto& r : rows)
    if (r.scheme == scheme && r.capacity == capacity) return &r;
  return nullptr;
}

double round_to(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(x * scale) / scale;
}

double to_mb(std::uint64_t bytes) { return round_to(static_cast<double>(bytes) / 1048576.0, 2); }

namespace {

std::string fixed(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

std::string shortest(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

nlohmann::json row_json(const ReportRow& r) {
  return {{"scheme", r.scheme},       {"capacity", r.capacity},   {"speed", r.speed},
          {"hit_pct", r.hit_pct},     {"mean_latency_ms", r.mean_latency_ms},
          {"uplink_mb", r.uplink_mb}, {"downlink_mb", r.downlink_mb}, {"seed", r.seed}};
}

}  // namespace

void emit_report(std::ostream& out, const Report& report, ReportFormat format) {
  if (format == ReportFormat::Json) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows) rows.push_back(row_json(r));
    out << nlohmann::json{{"rows", rows}}.dump(2) << '\n';
  } else {
    out << kCsvHeader << '\n';
    for (const auto& r : report.rows) {
      out << r.scheme << ',' << r.capacity << ',' << shortest(r.speed) << ',' << fixed(r.hit_pct, 4) << ','
          << fixed(r.mean_latency_ms, 4) << ',' << fixed(r.uplink_mb, 2) << ',' << fixed(r.downlink_mb, 2) << ','
          << r.seed << '\n';
    }
  }
  if (!out) throw std::ios_base::failure("report: write failed");
}

std::string emit_report(const Report& report, ReportFormat format) {
  std::ostringstream out;
  emit_report(out, report, format);
  return out.str();
}

Report parse_report(std::istream& in, ReportFormat format) {
  Report report;
  if (format == ReportFormat::Json) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
      for (const auto& r : j.at("rows")) {
        report.rows.push_back(ReportRow{r.at("scheme").get<std::string>(), r.at("capacity").get<int>(),
                                        r.at("speed").get<double>(), r.at("hit_pct").get<double>(),
                                        r.at("mean_latency_ms").get<double>(), r.at("uplink_mb").get<double>(),
                                        r.at("downlink_mb").get<double>(), r.at("seed").get<std::uint64_t>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(0, std::string("report json: ") + e.what());
    }
    return report;
  }

  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) return report;
  ++lineno;
  if (trim(line) != kCsvHeader) throw ParseError(lineno, "report csv: unexpected header");
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw ParseError(lineno, "report csv: expected 8 columns");
    try {
      std::size_t used = 0;
      auto num = [&](const std::string& s) {
        const double x = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return x;
      };
      ReportRow r;
      r.scheme = cells[0];
      r.capacity = std::stoi(cells[1], &used);
      if (used != cells[1].size()) throw std::invalid_argument(cells[1]);
      r.speed = num(cells[2]);
      r.hit_pct = num(cells[3]);
      r.mean_latency_ms = num(cells[4]);
      r.uplink_mb = num(cells[5]);
      r.downlink_mb = num(cells[6]);
      r.seed = std::stoull(cells[7], &used);
      if (used != cells[7].size()) throw std::invalid_argument(cells[7]);
      report.rows.push_back(r);
    } catch (const std::logic_error&) {
      throw ParseError(lineno, "report csv: malformed value");
    }
  }
  return report;
}

Report parse_report(const std::string& text, ReportFormat format) {
  std::istringstream in(text);
  return parse_report(in, format);
}

}  // namespace vecache::harness

#pragma once

// Run traces keyed by cumulative oracle calls, and their CSV form.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sepopt {

enum class Phase { dsg, ssg, handoff, bcfw };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::dsg: return "dsg";
    case Phase::ssg: return "ssg";
    case Phase::handoff: return "handoff";
    case Phase::bcfw: return "bcfw";
  }
  return "?";
}

inline Phase parse_phase(std::string_view s) {
  if (s == "dsg") return Phase::dsg;
  if (s == "ssg") return Phase::ssg;
  if (s == "handoff") return Phase::handoff;
  if (s == "bcfw") return Phase::bcfw;
  throw std::invalid_argument("unknown trace phase '" + std::string(s) + "'");
}

struct TraceRecord {
  std::uint64_t oracle_calls = 0;
  Phase phase = Phase::dsg;
  std::optional<double> dual_value;
  std::optional<double> gap_plus;
  std::optional<double> infeasibility;
  std::optional<double> f_value;

  // Working state, not serialized: the primal cost behind gap_plus.
  std::optional<double> primal_cost;

  friend bool operator==(const TraceRecord& a, const TraceRecord& b) {
    return a.oracle_calls == b.oracle_calls && a.phase == b.phase && a.dual_value == b.dual_value &&
           a.gap_plus == b.gap_plus && a.infeasibility == b.infeasibility && a.f_value == b.f_value;
  }
};

struct RunTrace {
  std::vector<TraceRecord> records;
  std::uint64_t seed = 0;
  std::string config_digest;

  void push(TraceRecord r) {
    if (!records.empty() && r.oracle_calls < records.back().oracle_calls)
      throw std::logic_error("trace: oracle_calls must be nondecreasing");
    records.push_back(std::move(r));
  }

  /// Appends another trace, shifting its call counts by offset.
  void append(const RunTrace& other, std::uint64_t offset = 0) {
    for (TraceRecord r : other.records) {
      r.oracle_calls += offset;
      push(std::move(r));
    }
  }

  /// Fills gap_plus = max(primal_cost - d_ref, 0) wherever a primal cost is known.
  void apply_reference(double d_ref) {
    for (TraceRecord& r : records)
      if (r.primal_cost) r.gap_plus = std::max(*r.primal_cost - d_ref, 0.0);
  }

  friend bool operator==(const RunTrace&, const RunTrace&) = default;
};

inline constexpr const char* kTraceFormat = "sepopt-trace v1";
inline constexpr const char* kTraceHeader = "oracle_calls,phase,dual_value,gap_plus,infeasibility,f_value";

namespace detail {

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline std::optional<double> parse_opt(std::string_view s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("trace: bad number '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace detail

inline void write_trace_csv(std::ostream& os, const RunTrace& trace) {
  os << "# " << kTraceFormat << '\n';
  os << "# seed=" << trace.seed << '\n';
  os << "# config_digest=" << trace.config_digest << '\n';
  os << kTraceHeader << '\n';
  for (const TraceRecord& r : trace.records) {
    os << r.oracle_calls << ',' << phase_name(r.phase) << ',' << detail::format_opt(r.dual_value) << ','
       << detail::format_opt(r.gap_plus) << ',' << detail::format_opt(r.infeasibility) << ','
       << detail::format_opt(r.f_value) << '\n';
  }
}

inline std::string trace_to_csv(const RunTrace& trace) {
  std::ostringstream os;
  write_trace_csv(os, trace);
  return os.str();
}

inline RunTrace read_trace_csv(std::istream& is) {
  RunTrace out;
  std::string line;
  bool header_seen = false;
  bool format_seen = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::string_view body = std::string_view(line).substr(1);
      while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      if (body == kTraceFormat) format_seen = true;
      else if (body.starts_with("seed=")) out.seed = std::stoull(std::string(body.substr(5)));
      else if (body.starts_with("config_digest=")) out.config_digest = std::string(body.substr(14));
      continue;
    }
    if (!header_seen) {
      if (line != kTraceHeader) throw std::invalid_argument("trace: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    auto cols = detail::split(line, ',');
    if (cols.size() != 6) throw std::invalid_argument("trace: line " + std::to_string(lineno) + " has wrong column count");
    TraceRecord r;
    auto res = std::from_chars(cols[0].data(), cols[0].data() + cols[0].size(), r.oracle_calls);
    if (res.ec != std::errc()) throw std::invalid_argument("trace: bad oracle_calls on line " + std::to_string(lineno));
    r.phase = parse_phase(cols[1]);
    r.dual_value = detail::parse_opt(cols[2]);
    r.gap_plus = detail::parse_opt(cols[3]);
    r.infeasibility = detail::parse_opt(cols[4]);
    r.f_value = detail::parse_opt(cols[5]);
    out.push(std::move(r));
  }
  if (!format_seen) throw std::invalid_argument("trace: missing format comment");
  if (!header_seen) throw std::invalid_argument("trace: missing header");
  return out;
}

inline RunTrace trace_from_csv(const std::string& text) {
  std::istringstream is(text);
  return read_trace_csv(is);
}

}  // namespace sepopt

#include "plight/analytics/analytics.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "plight/errors.hpp"
#include "plight/kv.hpp"

namespace plight::analytics {

double flow_density(long long vehicles, long long lanes) {
  if (lanes <= 0) throw ContractError("flow density needs a positive lane count");
  if (vehicles < 0) throw ContractError("vehicle count must be nonnegative");
  return static_cast<double>(vehicles) / static_cast<double>(lanes);
}

double cnt_entropy(std::span<const double> p) {
  if (p.size() != 3) throw ShapeError("turn probabilities must have 3 entries");
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ContractError("turn probabilities must be finite and nonnegative");
    s += v;
  }
  if (s <= 0.0) throw ContractError("turn probabilities sum to zero");
  double h = 0.0;
  double cum = 0.0;
  for (double v : p) {
    cum += v;
    const double q = cum / s;
    if (q > 0.0) h -= q * std::log2(q);
  }
  // The final q is S/S = 1 up to rounding; keep the sign clean.
  return h == 0.0 ? 0.0 : h;
}

TravelFeature route_feature(std::span<const sim::Turn> turns, double beta, double t_start) {
  if (!(beta > 0.0 && beta <= 1.0)) throw ContractError("route discount must lie in (0, 1]");
  TravelFeature f;
  double w = 1.0;
  for (sim::Turn t : turns) {
    f.v_turn[static_cast<std::size_t>(t)] += w;
    w *= beta;
  }
  f.t_start = t_start;
  return f;
}

std::vector<sim::Turn> parse_turn_list(const std::string& turns) {
  std::vector<sim::Turn> out;
  const std::string text = trim(turns);
  if (text.empty()) return out;
  std::size_t a = 0;
  while (a <= text.size()) {
    std::size_t b = text.find('|', a);
    if (b == std::string::npos) b = text.size();
    out.push_back(sim::parse_turn(trim(std::string_view(text).substr(a, b - a))));
    a = b + 1;
  }
  return out;
}

TravelFeature route_feature(const std::string& turns, double beta, double t_start) {
  const auto parsed = parse_turn_list(turns);
  return route_feature(parsed, beta, t_start);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t a = 0;
  while (true) {
    const std::size_t b = line.find(',', a);
    out.push_back(line.substr(a, b == std::string::npos ? std::string::npos : b - a));
    if (b == std::string::npos) break;
    a = b + 1;
  }
  return out;
}

}  // namespace

std::vector<TraceRecord> read_vehicle_trace(std::istream& in, const std::string& origin) {
  std::vector<TraceRecord> out;
  std::string line;
  int line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (header) {
      header = false;
      if (trim(line) != "vehicle_id,spawn_time,turns,exit_time") {
        throw ParseError(origin + ": unexpected trace header");
      }
      continue;
    }
    const auto cols = split_csv(line);
    const std::string where = origin + ":" + std::to_string(line_no);
    if (cols.size() != 4) throw ParseError(where + ": expected 4 columns");
    TraceRecord r;
    r.vehicle_id = static_cast<int>(parse_int(trim(cols[0]), where + " vehicle_id"));
    r.spawn_time = parse_double(trim(cols[1]), where + " spawn_time");
    try {
      r.turns = parse_turn_list(cols[2]);
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!trim(cols[3]).empty()) r.exit_time = parse_double(trim(cols[3]), where + " exit_time");
    out.push_back(std::move(r));
  }
  if (header) throw ParseError(origin + ": empty trace file");
  return out;
}

std::vector<TraceRecord> load_vehicle_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace file '" + path + "'");
  return read_vehicle_trace(in, path);
}

EntropyReport flow_report(const sim::FlowSpec& flow, long long vehicles, int intersections) {
  EntropyReport r;
  r.flow = flow.name;
  r.e_rho = flow_density(vehicles, static_cast<long long>(intersections) * sim::kLanesPerIntersection);
  r.h = cnt_entropy(flow.turn_probs);
  return r;
}

void write_analytics_csv(std::ostream& out, std::span<const EntropyReport> reports) {
  out << "flow,E_rho,H\n";
  for (const auto& r : reports) out << r.flow << ',' << format_double(r.e_rho) << ',' << format_double(r.h) << '\n';
}

}  // namespace plight::analytics

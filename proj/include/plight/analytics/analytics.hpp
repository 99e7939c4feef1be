#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plight/sim/flow.hpp"
#include "plight/sim/network.hpp"

namespace plight::analytics {

// Vehicles per lane per hour: vehicles / lanes.
double flow_density(long long vehicles, long long lanes);

// H = -sum_i q_i log2 q_i with q_i = (p_1 + ... + p_i) / (p_1 + p_2 + p_3).
// Zero q_i contribute 0. The q_i are not a distribution, so H is not a
// Shannon entropy; it separates permutations of the same turn ratios.
double cnt_entropy(std::span<const double> p);

// Route features. v_turn = sum_i beta^i onehot(turn_i), one-hot order
// straight/right/left; V_travel = v_turn followed by t_start.
struct TravelFeature {
  std::array<double, 3> v_turn{};
  double t_start = 0.0;

  std::array<double, 4> v_travel() const { return {v_turn[0], v_turn[1], v_turn[2], t_start}; }
};

inline constexpr double kDefaultRouteDiscount = 0.9;

TravelFeature route_feature(std::span<const sim::Turn> turns, double beta, double t_start);
// Turns given as symbols separated by '|' (e.g. "S|L"), or words.
TravelFeature route_feature(const std::string& turns, double beta, double t_start);
std::vector<sim::Turn> parse_turn_list(const std::string& turns);

struct TraceRecord {
  int vehicle_id = 0;
  double spawn_time = 0.0;
  std::vector<sim::Turn> turns;
  std::optional<double> exit_time;
};

// Reads the simulator's vehicle-trace CSV (vehicle_id,spawn_time,turns,exit_time).
std::vector<TraceRecord> read_vehicle_trace(std::istream& in, const std::string& origin = "<stream>");
std::vector<TraceRecord> load_vehicle_trace(const std::string& path);

struct EntropyReport {
  std::string flow;
  double e_rho = 0.0;  // vehicles per lane per hour
  double h = 0.0;      // bits
};

// N_lan counts the 12 incoming lanes of every intersection. Vehicle counts
// cover one hour of demand.
EntropyReport flow_report(const sim::FlowSpec& flow, long long vehicles, int intersections);

// CSV: flow,E_rho,H
void write_analytics_csv(std::ostream& out, std::span<const EntropyReport> reports);

}  // namespace plight::analytics

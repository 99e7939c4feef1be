#include "plight/sim/network.hpp"

#include <string>

#include "plight/errors.hpp"

namespace plight::sim {

bool lane_is_green(Phase phase, int lane) {
  const int side = lane / 3;
  const auto movement = static_cast<Movement>(lane % 3);
  if (movement == Movement::kRight) return true;
  const bool east_west = side == 1 || side == 3;
  switch (phase) {
    case Phase::kWeStraight: return east_west && movement == Movement::kStraight;
    case Phase::kNsStraight: return !east_west && movement == Movement::kStraight;
    case Phase::kWeLeft: return east_west && movement == Movement::kLeft;
    case Phase::kNsLeft: return !east_west && movement == Movement::kLeft;
  }
  return false;
}

char turn_symbol(Turn t) {
  switch (t) {
    case Turn::kStraight: return 'S';
    case Turn::kRight: return 'R';
    case Turn::kLeft: return 'L';
  }
  return '?';
}

Turn parse_turn(std::string_view symbol) {
  if (symbol == "S" || symbol == "s" || symbol == "straight") return Turn::kStraight;
  if (symbol == "R" || symbol == "r" || symbol == "right") return Turn::kRight;
  if (symbol == "L" || symbol == "l" || symbol == "left") return Turn::kLeft;
  throw ParseError("unknown turn symbol '" + std::string(symbol) + "'");
}

namespace {

constexpr int kRowStep[4] = {-1, 0, 1, 0};
constexpr int kColStep[4] = {0, 1, 0, -1};

}  // namespace

RoadNetwork build_grid(int rows, int cols, double free_flow_s) {
  if (rows < 1 || cols < 1) {
    throw ContractError("grid dimensions must be positive, got " + std::to_string(rows) + "x" +
                        std::to_string(cols));
  }
  if (!(free_flow_s > 0.0)) throw ContractError("free-flow travel time must be positive");

  RoadNetwork net;
  net.rows = rows;
  net.cols = cols;
  net.free_flow_s = free_flow_s;
  net.intersections.resize(static_cast<std::size_t>(rows) * cols);

  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      auto& node = net.intersections[net.id_of(r, c)];
      node.id = net.id_of(r, c);
      node.row = r;
      node.col = c;
      for (int h = 0; h < 4; ++h) {
        const int nr = r + kRowStep[h];
        const int nc = c + kColStep[h];
        if (nr >= 0 && nr < rows && nc >= 0 && nc < cols) {
          node.neighbor_by_heading[h] = net.id_of(nr, nc);
          node.neighbors.push_back(net.id_of(nr, nc));
        }
      }
    }
  }

  // Every arrival side of every intersection is fed by exactly one link: an
  // internal link from the neighbor on that side or a boundary entry.
  for (auto& node : net.intersections) {
    for (int h = 0; h < 4; ++h) {
      const auto heading = static_cast<Heading>(h);
      const int side = arrival_side(heading);
      // The upstream node lies on `side`, i.e. opposite to the heading.
      const int upstream = node.neighbor_by_heading[side];
      Link link;
      link.id = static_cast<int>(net.links.size());
      link.from = upstream;
      link.to = node.id;
      link.heading = heading;
      link.free_flow_s = free_flow_s;
      node.incoming_link[side] = link.id;
      net.links.push_back(link);
      if (upstream < 0) net.boundary_entries.push_back({link.id, node.id, heading});
    }
  }
  return net;
}

}  // namespace plight::sim

#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace plight::sim {

// Compass direction of travel. Rows grow southwards, columns eastwards.
enum class Heading : std::uint8_t { kNorth = 0, kEast = 1, kSouth = 2, kWest = 3 };

// Turn decision taken by a vehicle at an intersection.
enum class Turn : std::uint8_t { kStraight = 0, kRight = 1, kLeft = 2 };

// Movement served by an incoming lane.
enum class Movement : std::uint8_t { kLeft = 0, kStraight = 1, kRight = 2 };

// The four mutually exclusive green phases. Right turns are always permitted.
enum class Phase : std::uint8_t { kWeStraight = 0, kNsStraight = 1, kWeLeft = 2, kNsLeft = 3 };

inline constexpr int kNumPhases = 4;
inline constexpr int kNumApproaches = 4;
inline constexpr int kLanesPerIntersection = 12;

constexpr Heading turned(Heading h, Turn t) {
  const int d = static_cast<int>(h);
  switch (t) {
    case Turn::kStraight: return h;
    case Turn::kRight: return static_cast<Heading>((d + 1) % 4);
    case Turn::kLeft: return static_cast<Heading>((d + 3) % 4);
  }
  return h;
}

constexpr Movement movement_of(Turn t) {
  switch (t) {
    case Turn::kStraight: return Movement::kStraight;
    case Turn::kRight: return Movement::kRight;
    case Turn::kLeft: return Movement::kLeft;
  }
  return Movement::kStraight;
}

// Lanes are indexed by (side the vehicle arrives from) x movement. A vehicle
// heading south arrives from the north side, and so on.
constexpr int arrival_side(Heading h) { return (static_cast<int>(h) + 2) % 4; }

constexpr int lane_index(int side, Movement m) { return side * 3 + static_cast<int>(m); }

// True when the lane at `lane` has a green signal under `phase`.
bool lane_is_green(Phase phase, int lane);

char turn_symbol(Turn t);
Turn parse_turn(std::string_view symbol);

struct Link {
  int id = 0;
  int from = -1;  // upstream intersection, -1 for a boundary entry
  int to = 0;     // downstream intersection
  Heading heading = Heading::kNorth;
  double free_flow_s = 0.0;
};

struct Intersection {
  int id = 0;
  int row = 0;
  int col = 0;
  // Adjacent intersection in each heading, -1 at the grid edge.
  std::array<int, 4> neighbor_by_heading{-1, -1, -1, -1};
  // Incoming link feeding each arrival side.
  std::array<int, 4> incoming_link{-1, -1, -1, -1};
  // Ordered N, E, S, W; only existing neighbors.
  std::vector<int> neighbors;
};

struct BoundaryEntry {
  int link = 0;
  int intersection = 0;
  Heading heading = Heading::kNorth;
};

// Immutable grid topology.
struct RoadNetwork {
  int rows = 0;
  int cols = 0;
  double free_flow_s = 0.0;
  std::vector<Intersection> intersections;
  std::vector<Link> links;
  std::vector<BoundaryEntry> boundary_entries;

  int size() const { return static_cast<int>(intersections.size()); }
  int id_of(int row, int col) const { return row * cols + col; }
};

// Builds a rows x cols grid where every link has free-flow time `free_flow_s`.
RoadNetwork build_grid(int rows, int cols, double free_flow_s);

}  // namespace plight::sim

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "combot/vec3.hpp"

namespace combot {

// Collinearity tolerance for the overlay filter (point-to-segment distance, mm).
inline constexpr double kOverlayTol = 1e-6;

// Default crossing threshold: half the 1 mm beam thickness. Two centerlines
// closer than this physically collide.
inline constexpr double kDefaultCrossTol = 0.5;

// Crossing counts require both segment parameters inside (eps, 1-eps) so that
// touches at a shared junction region are not mistaken for crossings.
inline constexpr double kCrossParamEps = 1e-3;

// Cuboid design space discretized by a regular node grid. Nodes within
// `connectivity_degree` grid steps (Chebyshev distance) are joined by
// candidate beam elements.
struct DesignDomain {
  Vec3 size;                        // length x width x height, mm
  std::array<int, 3> grid{2, 2, 2}; // node counts n_x, n_y, n_z
  int connectivity_degree = 1;

  int node_count() const { return grid[0] * grid[1] * grid[2]; }
};

// One grid node. Ids are 1-based and run x-fastest, then y, then z, matching
// the node numbering used by the canonical problem cases.
struct NodeSpec {
  int id = 0;
  Vec3 base_position;
  Vec3 wander_range;        // non-negative half-range per axis, mm
  double wander_step = 0.0; // mm per offset code step; 0 disables wandering

  // Offset codes per axis lie in [-max_code, +max_code].
  int max_code(int axis) const {
    if (wander_step <= 0.0) return 0;
    const double r = axis == 0 ? wander_range.x : axis == 1 ? wander_range.y : wander_range.z;
    return static_cast<int>(r / wander_step + 1e-9);
  }
};

// Candidate beam, referencing two node ids. The unordered pair is unique
// within a structure.
struct Element {
  int id = 0;
  int node_a = 0;
  int node_b = 0;
};

struct GroundStructure {
  DesignDomain domain;
  std::vector<NodeSpec> nodes;    // index = id - 1
  std::vector<Element> elements;  // ids 1..elements.size()
};

// Discrete node-wandering offset, one code per axis.
struct OffsetCode {
  int dx = 0;
  int dy = 0;
  int dz = 0;
};

inline int grid_node_id(const DesignDomain& d, int ix, int iy, int iz) {
  return 1 + ix + iy * d.grid[0] + iz * d.grid[0] * d.grid[1];
}

namespace detail {

// Perpendicular foot parameter of p on the infinite line through a-b,
// in units of the segment length (unclamped).
inline double line_parameter(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 u = b - a;
  const double uu = u.squared_norm();
  if (uu == 0.0) return 0.0;
  return dot(p - a, u) / uu;
}

inline double point_segment_param_distance(const Vec3& p, const Vec3& a, const Vec3& b,
                                           double t) {
  const Vec3 foot = a + (b - a) * t;
  return (p - foot).norm();
}

}  // namespace detail

// Closest approach between two segments p0-p1 and q0-q1. Returns the clamped
// parameters and the distance. Clamped closest-point construction after
// Sunday's dist3D_Segment_to_Segment.
struct SegmentClosest {
  double s = 0.0;
  double t = 0.0;
  double distance = 0.0;
};

inline SegmentClosest segment_segment_closest(const Vec3& p0, const Vec3& p1, const Vec3& q0,
                                              const Vec3& q1) {
  constexpr double tiny = 1e-12;
  const Vec3 u = p1 - p0;
  const Vec3 v = q1 - q0;
  const Vec3 w = p0 - q0;
  const double a = dot(u, u);
  const double b = dot(u, v);
  const double c = dot(v, v);
  const double d = dot(u, w);
  const double e = dot(v, w);
  const double D = a * c - b * b;

  double sN, sD = D;
  double tN, tD = D;

  if (D < tiny * a * c || a < tiny || c < tiny) {
    // Near-parallel (or degenerate): pin s to p0 and project.
    sN = 0.0;
    sD = 1.0;
    tN = e;
    tD = c > tiny ? c : 1.0;
  } else {
    sN = b * e - c * d;
    tN = a * e - b * d;
    if (sN < 0.0) {
      sN = 0.0;
      tN = e;
      tD = c;
    } else if (sN > sD) {
      sN = sD;
      tN = e + b;
      tD = c;
    }
  }

  if (tN < 0.0) {
    tN = 0.0;
    if (-d < 0.0)
      sN = 0.0;
    else if (-d > a)
      sN = sD;
    else {
      sN = -d;
      sD = a;
    }
  } else if (tN > tD) {
    tN = tD;
    if (-d + b < 0.0)
      sN = 0.0;
    else if (-d + b > a)
      sN = sD;
    else {
      sN = -d + b;
      sD = a;
    }
  }

  SegmentClosest res;
  res.s = std::abs(sN) < tiny ? 0.0 : sN / sD;
  res.t = std::abs(tN) < tiny ? 0.0 : tN / tD;
  const Vec3 dp = w + u * res.s - v * res.t;
  res.distance = dp.norm();
  return res;
}

// Lays nodes on a regular grid over the cuboid and connects every node pair
// within the connectivity degree, then removes overlaying elements. An axis
// with a single node layer is collapsed to coordinate zero.
inline GroundStructure filter_overlays(const GroundStructure& structure);

inline GroundStructure build_ground_structure(const DesignDomain& domain,
                                              const Vec3& wander_range = {0, 0, 0},
                                              double wander_step = 0.0) {
  if (domain.size.x <= 0 || domain.size.y <= 0 || domain.size.z <= 0)
    throw std::invalid_argument("design domain size components must be positive");
  for (int axis = 0; axis < 3; ++axis)
    if (domain.grid[axis] < 1) throw std::invalid_argument("node grid counts must be >= 1");
  if (domain.node_count() < 2)
    throw std::invalid_argument("design domain must contain at least 2 nodes");
  if (domain.connectivity_degree < 1)
    throw std::invalid_argument("connectivity degree must be >= 1");

  GroundStructure gs;
  gs.domain = domain;

  const auto axis_len = [&](int axis) {
    return axis == 0 ? domain.size.x : axis == 1 ? domain.size.y : domain.size.z;
  };
  std::array<double, 3> step{};
  for (int axis = 0; axis < 3; ++axis)
    step[axis] = domain.grid[axis] > 1 ? axis_len(axis) / (domain.grid[axis] - 1) : 0.0;

  gs.nodes.reserve(domain.node_count());
  for (int iz = 0; iz < domain.grid[2]; ++iz)
    for (int iy = 0; iy < domain.grid[1]; ++iy)
      for (int ix = 0; ix < domain.grid[0]; ++ix) {
        NodeSpec n;
        n.id = grid_node_id(domain, ix, iy, iz);
        n.base_position = {ix * step[0], iy * step[1], iz * step[2]};
        n.wander_range = wander_range;
        n.wander_step = wander_step;
        gs.nodes.push_back(n);
      }

  const int nx = domain.grid[0], ny = domain.grid[1], nz = domain.grid[2];
  const int deg = domain.connectivity_degree;
  int next_id = 1;
  for (int iz = 0; iz < nz; ++iz)
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix) {
        const int a = grid_node_id(domain, ix, iy, iz);
        for (int jz = iz - deg; jz <= iz + deg; ++jz)
          for (int jy = iy - deg; jy <= iy + deg; ++jy)
            for (int jx = ix - deg; jx <= ix + deg; ++jx) {
              if (jx < 0 || jy < 0 || jz < 0 || jx >= nx || jy >= ny || jz >= nz) continue;
              const int b = grid_node_id(domain, jx, jy, jz);
              if (b <= a) continue;
              gs.elements.push_back({next_id++, a, b});
            }
      }

  return filter_overlays(gs);
}

// Removes every element whose open segment passes through the base position of
// a third node; such an element duplicates the chain of shorter collinear
// elements through that node. Idempotent. Surviving elements are renumbered
// 1..m in their original order.
inline GroundStructure filter_overlays(const GroundStructure& structure) {
  GroundStructure out;
  out.domain = structure.domain;
  out.nodes = structure.nodes;
  out.elements.reserve(structure.elements.size());

  int next_id = 1;
  for (const Element& el : structure.elements) {
    const Vec3& a = structure.nodes[el.node_a - 1].base_position;
    const Vec3& b = structure.nodes[el.node_b - 1].base_position;
    bool overlays = false;
    for (const NodeSpec& n : structure.nodes) {
      if (n.id == el.node_a || n.id == el.node_b) continue;
      const double t = detail::line_parameter(n.base_position, a, b);
      if (t <= 0.0 || t >= 1.0) continue;
      if (detail::point_segment_param_distance(n.base_position, a, b, t) < kOverlayTol) {
        overlays = true;
        break;
      }
    }
    if (!overlays) {
      Element kept = el;
      kept.id = next_id++;
      out.elements.push_back(kept);
    }
  }
  return out;
}

// Realized node positions: base position plus step * code per axis. Nodes in
// `anchor_mask` keep their base position regardless of codes. Returns nothing
// when a code lies outside the node's lattice bounds (invalid genome).
inline std::optional<std::vector<Vec3>> decode_positions(const GroundStructure& structure,
                                                         std::span<const OffsetCode> codes,
                                                         const std::vector<bool>& anchor_mask) {
  if (codes.size() != structure.nodes.size() || anchor_mask.size() != structure.nodes.size())
    return std::nullopt;
  std::vector<Vec3> positions(structure.nodes.size());
  for (size_t i = 0; i < structure.nodes.size(); ++i) {
    const NodeSpec& n = structure.nodes[i];
    if (anchor_mask[i]) {
      positions[i] = n.base_position;
      continue;
    }
    const OffsetCode& c = codes[i];
    if (std::abs(c.dx) > n.max_code(0) || std::abs(c.dy) > n.max_code(1) ||
        std::abs(c.dz) > n.max_code(2))
      return std::nullopt;
    positions[i] = n.base_position +
                   Vec3{c.dx * n.wander_step, c.dy * n.wander_step, c.dz * n.wander_step};
  }
  return positions;
}

// Number of unordered element pairs whose centerlines approach within
// `cross_tol` at parameters strictly interior to both segments. Pairs that
// share a node are junctions, not crossings. Positions are indexed by
// node id - 1.
inline int count_crossings(std::span<const Element> active, std::span<const Vec3> positions,
                           double cross_tol = kDefaultCrossTol,
                           double param_eps = kCrossParamEps) {
  int count = 0;
  for (size_t i = 0; i < active.size(); ++i) {
    const Element& ei = active[i];
    const Vec3& a0 = positions[ei.node_a - 1];
    const Vec3& a1 = positions[ei.node_b - 1];
    // Interior window of the segment; approaches outside it happen at the
    // node junctions.
    const Vec3 ai = a0 + (a1 - a0) * param_eps;
    const Vec3 aj = a0 + (a1 - a0) * (1.0 - param_eps);
    for (size_t j = i + 1; j < active.size(); ++j) {
      const Element& ej = active[j];
      if (ei.node_a == ej.node_a || ei.node_a == ej.node_b || ei.node_b == ej.node_a ||
          ei.node_b == ej.node_b)
        continue;
      const Vec3& b0 = positions[ej.node_a - 1];
      const Vec3& b1 = positions[ej.node_b - 1];
      const Vec3 bi = b0 + (b1 - b0) * param_eps;
      const Vec3 bj = b0 + (b1 - b0) * (1.0 - param_eps);
      if (segment_segment_closest(ai, aj, bi, bj).distance < cross_tol) ++count;
    }
  }
  return count;
}

// Sum of Euclidean element lengths over the active set.
inline double total_length(std::span<const Element> active, std::span<const Vec3> positions) {
  double sum = 0.0;
  for (const Element& el : active)
    sum += (positions[el.node_b - 1] - positions[el.node_a - 1]).norm();
  return sum;
}

}  // namespace combot

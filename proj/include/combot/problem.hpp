#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "combot/fem.hpp"
#include "combot/geometry.hpp"
#include "combot/vec3.hpp"

namespace combot {

// Nodal load given in structure node ids (1-based), unlike fem PointLoad
// which uses dense solver indices.
struct NodalLoad {
  int node = 0;
  Vec3 force;
};

// Everything that defines one synthesis task: the ground structure, where
// motion enters and leaves it, how it is held, and what it must carry.
struct SynthesisProblem {
  GroundStructure structure;

  int input_node = 0;
  Vec3 input_direction;  // unit
  double d_in = 5.0;     // prescribed input stroke, mm

  int end_effector_node = 0;
  Vec3 output_direction;  // unit, desired end effector motion

  std::vector<int> support_nodes;
  std::vector<NodalLoad> external_loads;

  Material material;
  CrossSection section;

  // Grounded spring at the end effector, the load path for mechanical
  // advantage. Acts along spring_direction.
  double spring_stiffness = 0.1;  // N/mm
  Vec3 spring_direction;          // unit; defaults to output_direction when zero

  double l_des_tot = 175.0;  // desired total beam length, mm
  double d_out_des = 1.0;    // minimum useful output stroke, mm

  bool fixed_anchors = true;  // keep input/support/end effector nodes on grid

  Vec3 spring_dir() const {
    return spring_direction == Vec3{} ? output_direction : spring_direction;
  }

  bool is_anchor(int node_id) const {
    if (!fixed_anchors) return false;
    if (node_id == input_node || node_id == end_effector_node) return true;
    for (int s : support_nodes)
      if (s == node_id) return true;
    return false;
  }
};

// Bitstring genome: one activity bit per candidate element, then per
// wandering node one offset-binary field per axis (most significant bit
// first). Anchored nodes and axes without wander freedom contribute no bits.
using Genome = std::vector<std::uint8_t>;

struct GenomeField {
  int node_id = 0;
  int axis = 0;       // 0 x, 1 y, 2 z
  int offset = 0;     // first bit within the genome
  int bits = 0;
  int max_code = 0;   // field decodes to [-max_code, +max_code]
};

// Where each decision variable lives inside the genome.
struct GenomeLayout {
  int element_count = 0;
  std::vector<GenomeField> offset_fields;
  int length = 0;  // total bits

  static GenomeLayout build(const SynthesisProblem& problem) {
    GenomeLayout layout;
    layout.element_count = static_cast<int>(problem.structure.elements.size());
    int cursor = layout.element_count;
    for (const NodeSpec& n : problem.structure.nodes) {
      if (problem.is_anchor(n.id)) continue;
      for (int axis = 0; axis < 3; ++axis) {
        const int mc = n.max_code(axis);
        if (mc == 0) continue;
        GenomeField f;
        f.node_id = n.id;
        f.axis = axis;
        f.max_code = mc;
        f.bits = 1;
        while ((1 << f.bits) < 2 * mc + 1) ++f.bits;
        f.offset = cursor;
        cursor += f.bits;
        layout.offset_fields.push_back(f);
      }
    }
    layout.length = cursor;
    return layout;
  }
};

// Genome interpreted against the ground structure: which elements exist and
// where the nodes ended up.
struct Phenotype {
  std::vector<Element> active;   // subset of structure.elements, ids intact
  std::vector<Vec3> positions;   // all structure nodes, index = id - 1
};

// Decodes activity bits and offset fields. Returns nothing when an offset
// field holds a value outside its node's lattice, which marks the genome
// invalid. Offset fields store code + max_code, so unused high patterns
// (e.g. 15 in a 4-bit field spanning -7..7) are decode errors by design.
inline std::optional<Phenotype> decode_genome(const SynthesisProblem& problem,
                                              const GenomeLayout& layout, const Genome& genome) {
  if (static_cast<int>(genome.size()) != layout.length)
    throw std::invalid_argument("genome length does not match layout");

  std::vector<OffsetCode> codes(problem.structure.nodes.size());
  for (const GenomeField& f : layout.offset_fields) {
    int value = 0;
    for (int b = 0; b < f.bits; ++b) value = (value << 1) | (genome[f.offset + b] ? 1 : 0);
    if (value > 2 * f.max_code) return std::nullopt;
    const int code = value - f.max_code;
    OffsetCode& c = codes[f.node_id - 1];
    (f.axis == 0 ? c.dx : f.axis == 1 ? c.dy : c.dz) = code;
  }

  std::vector<bool> anchors(problem.structure.nodes.size());
  for (const NodeSpec& n : problem.structure.nodes) anchors[n.id - 1] = problem.is_anchor(n.id);
  auto positions = decode_positions(problem.structure, codes, anchors);
  if (!positions) return std::nullopt;

  Phenotype ph;
  ph.positions = std::move(*positions);
  ph.active.reserve(layout.element_count);
  for (int i = 0; i < layout.element_count; ++i)
    if (genome[i]) ph.active.push_back(problem.structure.elements[i]);
  return ph;
}

inline std::string genome_to_string(const Genome& g) {
  std::string s(g.size(), '0');
  for (size_t i = 0; i < g.size(); ++i)
    if (g[i]) s[i] = '1';
  return s;
}

// Parses a 0/1 string; anything else (or a length mismatch against the
// layout) is rejected.
inline std::optional<Genome> genome_from_string(const GenomeLayout& layout,
                                                std::string_view s) {
  if (static_cast<int>(s.size()) != layout.length) return std::nullopt;
  Genome g(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '0' && s[i] != '1') return std::nullopt;
    g[i] = static_cast<std::uint8_t>(s[i] - '0');
  }
  return g;
}

// Re-encodes a phenotype's offsets into an existing genome's offset fields
// (used when repairing or seeding genomes from known structures).
inline void encode_offsets(const GenomeLayout& layout, std::span<const OffsetCode> codes,
                           Genome& genome) {
  for (const GenomeField& f : layout.offset_fields) {
    const OffsetCode& c = codes[f.node_id - 1];
    const int code = f.axis == 0 ? c.dx : f.axis == 1 ? c.dy : c.dz;
    int value = code + f.max_code;
    for (int b = f.bits - 1; b >= 0; --b) {
      genome[f.offset + b] = static_cast<std::uint8_t>(value & 1);
      value >>= 1;
    }
  }
}

// The three leg design cases studied with this toolkit. All use a 3x3x2 node
// grid, degree-1 connectivity (89 candidate elements after overlay removal),
// five supports on the body-side face, a 5 mm input stroke, and a 1 N
// worst-case external load at the end effector.
inline SynthesisProblem make_case(int index) {
  SynthesisProblem p;
  DesignDomain d;
  d.grid = {3, 3, 2};
  d.connectivity_degree = 1;

  switch (index) {
    case 1:
      d.size = {50.0, 30.0, 20.0};
      p.input_direction = {0.0, 1.0, 0.0};
      p.end_effector_node = 9;
      p.output_direction = normalized({0.0, -1.0, -1.0});
      break;
    case 2:
      d.size = {50.0, 30.0, 20.0};
      p.input_direction = {0.0, -1.0, 0.0};
      p.end_effector_node = 9;
      p.output_direction = normalized({0.0, 1.0, -1.0});
      break;
    case 3:
      d.size = {50.0, 50.0, 30.0};
      p.input_direction = {0.0, 1.0, 0.0};
      p.end_effector_node = 3;
      p.output_direction = normalized({0.0, -1.0, -1.0});
      break;
    default:
      throw std::invalid_argument("case index must be 1, 2 or 3");
  }

  p.structure = build_ground_structure(d, {1.75, 1.75, 1.75}, 0.25);
  p.input_node = 13;                      // middle of the upper body-side edge
  p.support_nodes = {1, 4, 7, 10, 16};    // body-side face, x = 0
  p.external_loads = {{p.end_effector_node, {1.0, 1.0, 1.0}}};
  p.spring_direction = p.output_direction;
  return p;
}

}  // namespace combot

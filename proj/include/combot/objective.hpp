#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <queue>
#include <span>
#include <vector>

#include "combot/fem.hpp"
#include "combot/geometry.hpp"
#include "combot/problem.hpp"

namespace combot {

// Input reactions below this (N) mean the drive meets no resistance and force
// ratios stop being meaningful.
inline constexpr double kMinInputForce = 1e-9;

// Fitness weights and evaluation mode. The fitness of a valid candidate is
//
//   GA - w1 * |u_ee|_ext - w2 * |L_tot - L_des| - w3 * n_cross [- w4 / MA]
//
// where the MA term only enters in spring mode. Invalid candidates get the
// fixed floor fitness.
struct ObjectiveParams {
  double w1 = 50.0;
  double w2 = 4.0;
  double w3 = 1.0;
  double w4 = 0.1;
  bool spring_mode = false;  // append the -w4/MA term and solve the spring case
  double cross_tol = kDefaultCrossTol;
  double invalid_fitness = -1e9;
};

enum class InvalidReason {
  none,
  decode_error,       // offset field outside the node's lattice
  short_element,      // active element below the minimum length
  disconnected_input, // no active element at the input node
  disconnected_output,// end effector missing or not linked to the input
  no_support_path,    // input/end effector component reaches no support
  singular,           // frame has an internal mechanism or floating part
  stroke_too_small,   // output stroke below the required minimum
};

inline const char* to_string(InvalidReason r) {
  switch (r) {
    case InvalidReason::none: return "none";
    case InvalidReason::decode_error: return "decode_error";
    case InvalidReason::short_element: return "short_element";
    case InvalidReason::disconnected_input: return "disconnected_input";
    case InvalidReason::disconnected_output: return "disconnected_output";
    case InvalidReason::no_support_path: return "no_support_path";
    case InvalidReason::singular: return "singular";
    case InvalidReason::stroke_too_small: return "stroke_too_small";
  }
  return "unknown";
}

// Spring load case results, present when the objective ran in spring mode or
// the caller asked for force metrics.
struct SpringMetrics {
  double input_force = 0.0;        // N, reaction at the drive
  double output_force = 0.0;       // N, spring force magnitude along its axis
  double output_along_spring = 0.0;// mm, end effector motion along the spring
  double mechanical_advantage = 0.0;
  double input_work = 0.0;         // N mm
  double spring_work = 0.0;        // N mm stored in the spring
  double total_energy = 0.0;       // N mm stored in beams plus spring
};

struct Evaluation {
  bool valid = false;
  InvalidReason reason = InvalidReason::none;
  double fitness = 0.0;

  // Geometry of the decoded candidate.
  int active_elements = 0;
  double total_length = 0.0;
  int crossings = 0;

  // Unloaded drive case.
  double d_out = 0.0;             // mm along the desired output direction
  double geometric_advantage = 0.0;
  double input_force_unloaded = 0.0;  // N

  // External load case with the drive held still.
  double d_out_external = 0.0;    // mm, end effector displacement magnitude

  std::optional<SpringMetrics> spring;
};

// Dense solver view of one phenotype. Nodes without any incident active
// element are dropped; `dense_index` maps structure node id - 1 to the solver
// index or -1.
struct ActiveModel {
  FrameModel frame;
  std::vector<int> dense_index;
  int input = -1;
  int end_effector = -1;
  std::vector<int> supports;
  std::vector<PointLoad> loads;
};

inline ActiveModel build_active_model(const SynthesisProblem& problem, const Phenotype& ph) {
  ActiveModel m;
  m.dense_index.assign(problem.structure.nodes.size(), -1);
  m.frame.material = problem.material;
  m.frame.section = problem.section;

  for (const Element& el : ph.active) {
    for (int id : {el.node_a, el.node_b}) {
      int& idx = m.dense_index[id - 1];
      if (idx < 0) {
        idx = static_cast<int>(m.frame.positions.size());
        m.frame.positions.push_back(ph.positions[id - 1]);
      }
    }
  }
  for (const Element& el : ph.active)
    m.frame.members.push_back({m.dense_index[el.node_a - 1], m.dense_index[el.node_b - 1]});

  m.input = m.dense_index[problem.input_node - 1];
  m.end_effector = m.dense_index[problem.end_effector_node - 1];
  for (int s : problem.support_nodes) {
    const int idx = m.dense_index[s - 1];
    if (idx >= 0) m.supports.push_back(idx);
  }
  for (const NodalLoad& load : problem.external_loads) {
    const int idx = m.dense_index[load.node - 1];
    if (idx >= 0) m.loads.push_back({idx, load.force});
  }
  return m;
}

namespace detail {

// Component labels over the active-element adjacency, keyed by node id - 1.
// Unused nodes keep label -1.
inline std::vector<int> connected_components(size_t node_count,
                                             std::span<const Element> active) {
  std::vector<std::vector<int>> adj(node_count);
  for (const Element& el : active) {
    adj[el.node_a - 1].push_back(el.node_b - 1);
    adj[el.node_b - 1].push_back(el.node_a - 1);
  }
  std::vector<int> label(node_count, -1);
  int next = 0;
  for (size_t start = 0; start < node_count; ++start) {
    if (label[start] >= 0 || adj[start].empty()) continue;
    const int comp = next++;
    std::queue<size_t> q;
    q.push(start);
    label[start] = comp;
    while (!q.empty()) {
      const size_t n = q.front();
      q.pop();
      for (int nb : adj[n])
        if (label[nb] < 0) {
          label[nb] = comp;
          q.push(static_cast<size_t>(nb));
        }
    }
  }
  return label;
}

}  // namespace detail

// Evaluates genomes for one synthesis problem. Construct once per problem;
// evaluate() is const and safe to call from several threads.
class Evaluator {
 public:
  Evaluator(const SynthesisProblem& problem, ObjectiveParams params)
      : problem_(problem), params_(params), layout_(GenomeLayout::build(problem)) {}

  const SynthesisProblem& problem() const { return problem_; }
  const GenomeLayout& layout() const { return layout_; }
  const ObjectiveParams& params() const { return params_; }

  // force_spring adds the spring load case even outside spring mode, without
  // touching the fitness; reports use it to attach force metrics afterwards.
  Evaluation evaluate(const Genome& genome, bool force_spring = false) const {
    Evaluation ev;
    const auto invalid = [&](InvalidReason r) {
      ev.valid = false;
      ev.reason = r;
      ev.fitness = params_.invalid_fitness;
      return ev;
    };

    const auto ph = decode_genome(problem_, layout_, genome);
    if (!ph) return invalid(InvalidReason::decode_error);

    ev.active_elements = static_cast<int>(ph->active.size());

    for (const Element& el : ph->active) {
      const double len = (ph->positions[el.node_b - 1] - ph->positions[el.node_a - 1]).norm();
      if (len < kMinElementLength) return invalid(InvalidReason::short_element);
    }

    const auto label = detail::connected_components(problem_.structure.nodes.size(), ph->active);
    const int in_comp = label[problem_.input_node - 1];
    if (in_comp < 0) return invalid(InvalidReason::disconnected_input);
    if (label[problem_.end_effector_node - 1] != in_comp)
      return invalid(InvalidReason::disconnected_output);
    bool supported = false;
    for (int s : problem_.support_nodes)
      if (label[s - 1] == in_comp) supported = true;
    if (!supported) return invalid(InvalidReason::no_support_path);

    const ActiveModel model = build_active_model(problem_, *ph);
    const FrameSolver solver(model.frame, model.supports, model.input,
                             problem_.input_direction);
    if (solver.singular()) return invalid(InvalidReason::singular);

    // Unloaded stroke: drive the input, read the end effector.
    const auto drive = solver.solve(problem_.d_in);
    const Vec3 u_ee = drive.translations[model.end_effector];
    ev.d_out = dot(u_ee, problem_.output_direction);
    ev.geometric_advantage = ev.d_out / problem_.d_in;
    ev.input_force_unloaded = drive.drive_reaction;
    if (ev.d_out < problem_.d_out_des) return invalid(InvalidReason::stroke_too_small);

    // Stiffness against the external load, drive held.
    const auto ext = solver.solve(0.0, model.loads);
    ev.d_out_external = ext.translations[model.end_effector].norm();

    ev.total_length = total_length(ph->active, ph->positions);
    ev.crossings = count_crossings(ph->active, ph->positions, params_.cross_tol);

    if (params_.spring_mode || force_spring) {
      const SpringAttachment spring{model.end_effector, problem_.spring_dir(),
                                    problem_.spring_stiffness};
      const FrameSolver spring_solver(model.frame, model.supports, model.input,
                                      problem_.input_direction, spring);
      if (spring_solver.singular()) return invalid(InvalidReason::singular);
      const auto sprung = spring_solver.solve(problem_.d_in);

      SpringMetrics sm;
      sm.input_force = sprung.drive_reaction;
      sm.output_along_spring =
          dot(sprung.translations[model.end_effector], problem_.spring_dir());
      sm.output_force = problem_.spring_stiffness * sm.output_along_spring;
      sm.input_work = 0.5 * sm.input_force * problem_.d_in;
      sm.spring_work = 0.5 * problem_.spring_stiffness * sm.output_along_spring *
                       sm.output_along_spring;
      sm.total_energy = sprung.strain_energy;
      if (std::abs(sm.input_force) < kMinInputForce) return invalid(InvalidReason::singular);
      sm.mechanical_advantage = sm.output_force / sm.input_force;
      ev.spring = sm;
    }

    ev.valid = true;
    ev.fitness = ev.geometric_advantage - params_.w1 * ev.d_out_external -
                 params_.w2 * std::abs(ev.total_length - problem_.l_des_tot) -
                 params_.w3 * ev.crossings;
    if (params_.spring_mode) {
      // MA <= 0 cannot happen for a passive structure driven against a spring
      // (the drive always does positive work), but guard the division anyway.
      const double ma = ev.spring->mechanical_advantage;
      if (!(ma > 0.0)) return invalid(InvalidReason::singular);
      ev.fitness -= params_.w4 / ma;
    }
    return ev;
  }

 private:
  const SynthesisProblem& problem_;
  ObjectiveParams params_;
  GenomeLayout layout_;
};

}  // namespace combot

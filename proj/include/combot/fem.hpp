#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "combot/vec3.hpp"

namespace combot {

// Elements shorter than this (mm) have no usable stiffness representation and
// make candidates invalid before they reach the solver.
inline constexpr double kMinElementLength = 1e-3;

// Linear-elastic isotropic material. Defaults describe a soft printable
// polymer in N/mm^2.
struct Material {
  double youngs_modulus = 800.0;
  double poisson_ratio = 0.35;

  double shear_modulus() const { return youngs_modulus / (2.0 * (1.0 + poisson_ratio)); }
};

// Solid rectangular beam section. Width lies along the local y axis, height
// along local z.
struct CrossSection {
  double width = 1.0;
  double height = 1.0;

  double area() const { return width * height; }
  // Second moments about the local axes.
  double inertia_y() const { return width * height * height * height / 12.0; }
  double inertia_z() const { return height * width * width * width / 12.0; }
  // Saint-Venant torsion constant for a solid rectangle (Roark's closed-form
  // fit; exact would need the series solution).
  double torsion_constant() const {
    const double a = std::max(width, height);
    const double b = std::min(width, height);
    const double r = b / a;
    return a * b * b * b * (1.0 / 3.0 - 0.21 * r * (1.0 - r * r * r * r / 12.0));
  }
};

// Local beam axes as rows of a rotation matrix: x along the beam, z chosen
// near the global z (or global y for near-vertical beams) so sections keep a
// stable orientation.
inline Eigen::Matrix3d beam_triad(const Vec3& a, const Vec3& b) {
  const Vec3 ex = normalized(b - a);
  Vec3 ref{0.0, 0.0, 1.0};
  if (std::abs(ex.z) > 1.0 - 1e-6) ref = {0.0, 1.0, 0.0};
  const Vec3 ey = normalized(cross(ref, ex));
  const Vec3 ez = cross(ex, ey);
  Eigen::Matrix3d r;
  r << ex.x, ex.y, ex.z, ey.x, ey.y, ey.z, ez.x, ez.y, ez.z;
  return r;
}

// 12x12 stiffness of a two-node beam in its local frame. DOF order per node:
// ux, uy, uz, rx, ry, rz.
inline Eigen::Matrix<double, 12, 12> beam_stiffness_local(const Material& mat,
                                                          const CrossSection& sec, double length) {
  if (!(length >= kMinElementLength))
    throw std::invalid_argument("beam length below minimum");
  const double l = length;
  const double ea_l = mat.youngs_modulus * sec.area() / l;
  const double gj_l = mat.shear_modulus() * sec.torsion_constant() / l;
  const double eiz = mat.youngs_modulus * sec.inertia_z();
  const double eiy = mat.youngs_modulus * sec.inertia_y();

  Eigen::Matrix<double, 12, 12> k = Eigen::Matrix<double, 12, 12>::Zero();
  k(0, 0) = k(6, 6) = ea_l;
  k(0, 6) = k(6, 0) = -ea_l;
  k(3, 3) = k(9, 9) = gj_l;
  k(3, 9) = k(9, 3) = -gj_l;

  // Bending in the x-y plane couples uy with rz.
  {
    const double c = eiz / (l * l * l);
    const int d[4] = {1, 5, 7, 11};
    const double m[4][4] = {{12, 6 * l, -12, 6 * l},
                            {6 * l, 4 * l * l, -6 * l, 2 * l * l},
                            {-12, -6 * l, 12, -6 * l},
                            {6 * l, 2 * l * l, -6 * l, 4 * l * l}};
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) k(d[i], d[j]) = c * m[i][j];
  }
  // Bending in the x-z plane couples uz with ry; rotation sign flips relative
  // to the x-y plane.
  {
    const double c = eiy / (l * l * l);
    const int d[4] = {2, 4, 8, 10};
    const double m[4][4] = {{12, -6 * l, -12, -6 * l},
                            {-6 * l, 4 * l * l, 6 * l, 2 * l * l},
                            {-12, 6 * l, 12, 6 * l},
                            {-6 * l, 2 * l * l, 6 * l, 4 * l * l}};
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) k(d[i], d[j]) = c * m[i][j];
  }
  return k;
}

// Frame ready for analysis: densely indexed nodes and the members joining
// them. Callers map structure node ids to dense indices beforehand.
struct FrameModel {
  std::vector<Vec3> positions;
  std::vector<std::array<int, 2>> members;
  Material material;
  CrossSection section;
};

struct PointLoad {
  int node = 0;
  Vec3 force;  // N, global frame
};

// Grounded linear spring acting along a fixed direction at one node,
// representing the load the mechanism works against.
struct SpringAttachment {
  int node = 0;
  Vec3 direction;  // unit
  double stiffness = 0.0;  // N/mm
};

// Assembles and factorizes one frame with its boundary conditions, then
// answers displacement-driven and force-driven load cases against the same
// factorization. Boundary conditions: support nodes are fully fixed; the
// drive node's translation along the drive direction is a prescribed DOF
// (its remaining translations and rotations stay free, so the drive acts as
// a frictionless actuator along one axis).
class FrameSolver {
 public:
  struct Solution {
    std::vector<Vec3> translations;
    std::vector<Vec3> rotations;
    double drive_reaction = 0.0;  // force conjugate to the prescribed drive DOF, N
    double strain_energy = 0.0;   // elastic energy incl. any spring, N mm
  };

  FrameSolver(const FrameModel& model, std::span<const int> support_nodes, int drive_node,
              const Vec3& drive_direction, const std::optional<SpringAttachment>& spring = {})
      : n_nodes_(static_cast<int>(model.positions.size())), drive_node_(drive_node) {
    const int ndof = 6 * n_nodes_;
    if (drive_node < 0 || drive_node >= n_nodes_)
      throw std::invalid_argument("drive node out of range");

    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(ndof, ndof);
    for (const auto& m : model.members) {
      const Vec3& pa = model.positions[m[0]];
      const Vec3& pb = model.positions[m[1]];
      const double len = (pb - pa).norm();
      const Eigen::Matrix3d r = beam_triad(pa, pb);
      Eigen::Matrix<double, 12, 12> t = Eigen::Matrix<double, 12, 12>::Zero();
      for (int blk = 0; blk < 4; ++blk) t.block<3, 3>(3 * blk, 3 * blk) = r;
      const Eigen::Matrix<double, 12, 12> ke =
          t.transpose() * beam_stiffness_local(model.material, model.section, len) * t;
      const int dof[2] = {6 * m[0], 6 * m[1]};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          k.block<6, 6>(dof[i], dof[j]) += ke.block<6, 6>(6 * i, 6 * j);
    }

    if (spring) {
      const Eigen::Vector3d s(spring->direction.x, spring->direction.y, spring->direction.z);
      k.block<3, 3>(6 * spring->node, 6 * spring->node) += spring->stiffness * s * s.transpose();
    }

    // Rotate the drive node's translation DOFs so the drive direction becomes
    // a single coordinate; prescribing it keeps the reduced system symmetric
    // positive definite.
    drive_rot_ = drive_rotation(drive_direction);
    const int dr = 6 * drive_node_;
    k.middleRows<3>(dr) = drive_rot_ * k.middleRows<3>(dr);
    k.middleCols<3>(dr) = k.middleCols<3>(dr) * drive_rot_.transpose();

    std::vector<bool> fixed(ndof, false);
    for (int s : support_nodes) {
      if (s < 0 || s >= n_nodes_) throw std::invalid_argument("support node out of range");
      for (int d = 0; d < 6; ++d) fixed[6 * s + d] = true;
    }
    drive_dof_ = dr;  // rotated coordinate 0 = motion along the drive direction
    if (fixed[drive_dof_]) throw std::invalid_argument("drive node must not be a support");
    fixed[drive_dof_] = true;

    free_dofs_.reserve(ndof);
    for (int d = 0; d < ndof; ++d)
      if (!fixed[d]) free_dofs_.push_back(d);

    const int nf = static_cast<int>(free_dofs_.size());
    Eigen::MatrixXd kff(nf, nf);
    for (int i = 0; i < nf; ++i)
      for (int j = 0; j < nf; ++j) kff(i, j) = k(free_dofs_[i], free_dofs_[j]);
    k_drive_col_ = Eigen::VectorXd(nf);
    for (int i = 0; i < nf; ++i) k_drive_col_(i) = k(free_dofs_[i], drive_dof_);
    k_full_ = std::move(k);

    ldlt_.compute(kff);
    singular_ = ldlt_.info() != Eigen::Success;
    if (!singular_ && nf > 0) {
      const auto& d = ldlt_.vectorD();
      const double dmax = d.maxCoeff();
      const double dmin = d.minCoeff();
      if (!(dmin > 0.0) || dmin < 1e-12 * dmax) singular_ = true;
    }
  }

  bool singular() const { return singular_; }

  // Prescribed drive displacement (mm along the drive direction) plus nodal
  // loads. Loads at the drive node act on its free transverse/rotation DOFs.
  Solution solve(double drive_displacement, std::span<const PointLoad> loads = {}) const {
    if (singular_) throw std::logic_error("solve on singular frame");
    const int ndof = 6 * n_nodes_;
    Eigen::VectorXd f = Eigen::VectorXd::Zero(ndof);
    for (const PointLoad& load : loads) {
      f(6 * load.node + 0) += load.force.x;
      f(6 * load.node + 1) += load.force.y;
      f(6 * load.node + 2) += load.force.z;
    }
    f.segment<3>(6 * drive_node_) = drive_rot_ * f.segment<3>(6 * drive_node_);

    const int nf = static_cast<int>(free_dofs_.size());
    Eigen::VectorXd rhs(nf);
    for (int i = 0; i < nf; ++i) rhs(i) = f(free_dofs_[i]);
    rhs -= drive_displacement * k_drive_col_;
    const Eigen::VectorXd uf = ldlt_.solve(rhs);

    Eigen::VectorXd u = Eigen::VectorXd::Zero(ndof);
    for (int i = 0; i < nf; ++i) u(free_dofs_[i]) = uf(i);
    u(drive_dof_) = drive_displacement;

    Solution sol;
    sol.drive_reaction = k_full_.row(drive_dof_).dot(u) - f(drive_dof_);
    sol.strain_energy = 0.5 * u.dot(k_full_ * u);

    // Back to global coordinates at the drive node before reading out.
    u.segment<3>(6 * drive_node_) =
        drive_rot_.transpose() * u.segment<3>(6 * drive_node_);
    sol.translations.resize(n_nodes_);
    sol.rotations.resize(n_nodes_);
    for (int n = 0; n < n_nodes_; ++n) {
      sol.translations[n] = {u(6 * n + 0), u(6 * n + 1), u(6 * n + 2)};
      sol.rotations[n] = {u(6 * n + 3), u(6 * n + 4), u(6 * n + 5)};
    }
    return sol;
  }

 private:
  // Orthonormal frame with the drive direction as its first row.
  static Eigen::Matrix3d drive_rotation(const Vec3& direction) {
    const double n = direction.norm();
    if (!(n > 0.0)) throw std::invalid_argument("drive direction must be nonzero");
    const Eigen::Vector3d d(direction.x / n, direction.y / n, direction.z / n);
    Eigen::Vector3d ref = std::abs(d.z()) > 1.0 - 1e-6 ? Eigen::Vector3d::UnitY()
                                                        : Eigen::Vector3d::UnitZ();
    const Eigen::Vector3d e1 = ref.cross(d).normalized();
    const Eigen::Vector3d e2 = d.cross(e1);
    Eigen::Matrix3d q;
    q.row(0) = d;
    q.row(1) = e1;
    q.row(2) = e2;
    return q;
  }

  int n_nodes_;
  int drive_node_;
  int drive_dof_ = 0;
  Eigen::Matrix3d drive_rot_;
  Eigen::MatrixXd k_full_;
  Eigen::VectorXd k_drive_col_;
  std::vector<int> free_dofs_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  bool singular_ = false;
};

}  // namespace combot

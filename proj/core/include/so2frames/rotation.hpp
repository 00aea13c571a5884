#pragma once

#include <Eigen/Core>

#include "so2frames/random.hpp"

namespace so2frames {

/// Fixed target axis of every local frame. Stabilizer rotations are rotations
/// about this axis, and the real harmonics use it as their polar axis.
inline const Eigen::Vector3d kTargetAxis{0.0, 1.0, 0.0};

struct EulerZYZ {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

/// Proper 3D rotation (orthogonal, det +1), acting actively on column vectors.
class Rotation {
 public:
  Rotation() : m_(Eigen::Matrix3d::Identity()) {}
  /// Throws std::invalid_argument unless the matrix is orthogonal with det +1
  /// to within 1e-12 (or `tol`).
  explicit Rotation(const Eigen::Matrix3d& m, double tol = 1e-12);

  static Rotation identity() { return Rotation(); }
  /// R = R_z(alpha) R_y(beta) R_z(gamma).
  static Rotation from_euler(double alpha, double beta, double gamma);
  /// Right-handed rotation by `angle` about `axis` (normalized internally).
  static Rotation about_axis(const Eigen::Vector3d& axis, double angle);

  /// ZYZ angles reproducing matrix(). Stable near beta = 0 and beta = pi;
  /// beta may come out negative.
  EulerZYZ to_euler() const;

  const Eigen::Matrix3d& matrix() const { return m_; }
  Rotation inverse() const { return Rotation(m_.transpose(), Unchecked{}); }
  Eigen::Vector3d apply(const Eigen::Vector3d& v) const { return m_ * v; }
  Rotation operator*(const Rotation& o) const { return Rotation(m_ * o.m_, Unchecked{}); }

 private:
  struct Unchecked {};
  Rotation(const Eigen::Matrix3d& m, Unchecked) : m_(m) {}

  Eigen::Matrix3d m_;
};

Rotation rotation_from_euler(double alpha, double beta, double gamma);

/// Uniform (Haar) random rotation via Arvo's subgroup algorithm: a random
/// rotation about z followed by a random Householder-derived map of z.
Rotation random_rotation(RandomStream& rng);

/// Stabilizer rotation: rotation about the target axis by phi.
Rotation stabilizer_rotation(double phi);

/// Real-basis Wigner-D matrix of degree l, in the basis of
/// real_spherical_harmonics, so that Y(R r) = wigner_d(l, R) * Y(r).
/// Built from the complex Wigner-D (Wigner's closed form for the small d)
/// conjugated by the complex-to-real change of basis. Throws for l > cap.
Eigen::MatrixXd wigner_d(int l, const Rotation& r);

/// Complex-to-real change of basis for degree l (rows: real m, cols: complex m).
Eigen::MatrixXcd real_basis_change(int l);

}  // namespace so2frames

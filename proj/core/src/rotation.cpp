#include "so2frames/rotation.hpp"

#include "so2frames/irreps.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace so2frames {

namespace {

using cd = std::complex<double>;

Eigen::Matrix3d rz(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

Eigen::Matrix3d ry(double b) {
  Eigen::Matrix3d m;
  m << std::cos(b), 0, std::sin(b), 0, 1, 0, -std::sin(b), 0, std::cos(b);
  return m;
}

// Maps (x, y, z) to (z, x, y): puts the harmonic polar axis y in the slot the
// textbook z-polar formulas expect.
Eigen::Matrix3d polar_permutation() {
  Eigen::Matrix3d p;
  p << 0, 0, 1, 1, 0, 0, 0, 1, 0;
  return p;
}

const std::array<double, 2 * kDegreeCap + 2>& factorials() {
  static const auto table = [] {
    std::array<double, 2 * kDegreeCap + 2> f{};
    f[0] = 1.0;
    for (std::size_t i = 1; i < f.size(); ++i) f[i] = f[i - 1] * static_cast<double>(i);
    return f;
  }();
  return table;
}

// Wigner small-d, d^l_{mp,m}(beta), closed-form sum.
double small_d(int l, int mp, int m, double beta) {
  const auto& f = factorials();
  const double c = std::cos(beta / 2), s = std::sin(beta / 2);
  const double pre = std::sqrt(f[l + mp] * f[l - mp] * f[l + m] * f[l - m]);
  double sum = 0.0;
  const int kmin = std::max(0, m - mp);
  const int kmax = std::min(l + m, l - mp);
  for (int k = kmin; k <= kmax; ++k) {
    const double denom = f[l + m - k] * f[k] * f[mp - m + k] * f[l - mp - k];
    const double sign = ((mp - m + k) % 2 == 0) ? 1.0 : -1.0;
    sum += sign / denom * std::pow(c, 2 * l + m - mp - 2 * k) * std::pow(s, mp - m + 2 * k);
  }
  return pre * sum;
}

}  // namespace

Rotation::Rotation(const Eigen::Matrix3d& m, double tol) : m_(m) {
  const double orth = (m.transpose() * m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!(orth <= tol) || !(std::abs(m.determinant() - 1.0) <= tol))
    throw std::invalid_argument("matrix is not a proper rotation");
}

Rotation Rotation::from_euler(double alpha, double beta, double gamma) {
  return Rotation(rz(alpha) * ry(beta) * rz(gamma), Unchecked{});
}

Rotation rotation_from_euler(double alpha, double beta, double gamma) {
  return Rotation::from_euler(alpha, beta, gamma);
}

Rotation Rotation::about_axis(const Eigen::Vector3d& axis, double angle) {
  const Eigen::Vector3d k = axis.normalized();
  Eigen::Matrix3d kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  const Eigen::Matrix3d m =
      Eigen::Matrix3d::Identity() + std::sin(angle) * kx + (1.0 - std::cos(angle)) * kx * kx;
  return Rotation(m, Unchecked{});
}

EulerZYZ Rotation::to_euler() const {
  const auto& r = m_;
  // Third column is (cos a sin b, sin a sin b, cos b), third row is
  // (-sin b cos g, sin b sin g, cos b).
  EulerZYZ e;
  const double sb = std::hypot(r(0, 2), r(1, 2));
  e.beta = std::atan2(sb, r(2, 2));
  if (sb > 1e-12) {
    e.alpha = std::atan2(r(1, 2), r(0, 2));
    e.gamma = std::atan2(r(2, 1), -r(2, 0));
  } else if (r(2, 2) > 0) {  // only alpha + gamma is defined; put it in alpha
    e.alpha = std::atan2(r(1, 0), r(0, 0));
    e.gamma = 0.0;
  } else {  // only alpha - gamma is defined
    e.alpha = std::atan2(-r(1, 0), -r(0, 0));
    e.gamma = 0.0;
  }
  return e;
}

Rotation random_rotation(RandomStream& rng) {
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double theta = 2.0 * std::numbers::pi * u1;
  const double phi = 2.0 * std::numbers::pi * u2;
  const Eigen::Vector3d v(std::cos(phi) * std::sqrt(u3), std::sin(phi) * std::sqrt(u3),
                          std::sqrt(1.0 - u3));
  const Eigen::Matrix3d h = Eigen::Matrix3d::Identity() - 2.0 * v * v.transpose();
  return Rotation(-h * rz(theta), 1e-10);
}

Rotation stabilizer_rotation(double phi) { return Rotation::about_axis(kTargetAxis, phi); }

Eigen::MatrixXcd real_basis_change(int l) {
  const int n = 2 * l + 1;
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(n, n);
  const double r2 = 1.0 / std::numbers::sqrt2;
  u(l, l) = 1.0;
  for (int m = 1; m <= l; ++m) {
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    u(l + m, l + m) = sign * r2;
    u(l + m, l - m) = r2;
    u(l - m, l + m) = cd(0.0, -sign * r2);
    u(l - m, l - m) = cd(0.0, r2);
  }
  return u;
}

Eigen::MatrixXd wigner_d(int l, const Rotation& r) {
  if (l < 0 || l > kDegreeCap) throw std::invalid_argument("wigner_d: degree out of range");
  if (l == 0) return Eigen::MatrixXd::Ones(1, 1);
  // Exact for the identity; the basis change alone would leave 1e-16 residue.
  if (r.matrix() == Eigen::Matrix3d::Identity()) return Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1);

  const Eigen::Matrix3d p = polar_permutation();
  const Rotation zpolar(p * r.matrix() * p.transpose(), 1e-9);
  const EulerZYZ e = zpolar.to_euler();

  const int n = 2 * l + 1;
  // Complex D in the z-polar complex harmonic basis; harmonics transform with
  // its complex conjugate: Y_c(R r) = conj(D(R)) Y_c(r).
  Eigen::MatrixXcd dconj(n, n);
  for (int mp = -l; mp <= l; ++mp)
    for (int m = -l; m <= l; ++m) {
      const cd val = std::polar(1.0, -mp * e.alpha) * small_d(l, mp, m, e.beta) *
                     std::polar(1.0, -m * e.gamma);
      dconj(mp + l, m + l) = std::conj(val);
    }
  const Eigen::MatrixXcd u = real_basis_change(l);
  const Eigen::MatrixXcd real = u * dconj * u.adjoint();
  return real.real();
}

}  // namespace so2frames

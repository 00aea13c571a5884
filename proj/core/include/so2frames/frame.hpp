#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

#include "so2frames/counter.hpp"
#include "so2frames/irreps.hpp"
#include "so2frames/rotation.hpp"

namespace so2frames {

inline constexpr int kDefaultFrameLmax = 4;

/// Local frame of a reference direction r: the rotation h with h^-1 r equal
/// to the target axis, plus cached Wigner-D matrices of h^-1 and h.
class Frame {
 public:
  Frame() : Frame(Eigen::Vector3d(kTargetAxis), Rotation::identity(), kDefaultFrameLmax) {}
  Frame(const Eigen::Vector3d& reference, const Rotation& h, int l_max);

  const Eigen::Vector3d& reference() const { return reference_; }
  /// Maps the target axis onto the reference direction.
  const Rotation& rotation() const { return h_; }
  int l_max() const { return l_max_; }
  /// D^l(h^-1): global -> local.
  const Eigen::MatrixXd& to_local_d(int l) const;
  /// D^l(h): local -> global.
  const Eigen::MatrixXd& from_local_d(int l) const;

 private:
  Eigen::Vector3d reference_;
  Rotation h_;
  int l_max_;
  std::vector<Eigen::MatrixXd> to_local_;
  std::vector<Eigen::MatrixXd> from_local_;
};

/// Canonical frame of a direction (normalized internally). h^-1 is the
/// minimal-angle rotation taking r onto the target axis, about r x v. When r
/// is exactly antiparallel to the target axis, h is the rotation by pi about x.
/// Throws std::invalid_argument for a zero or non-finite vector.
Frame frame_from_direction(const Eigen::Vector3d& r, int l_max = kDefaultFrameLmax);

/// Rotates every degree into the frame with D(h^-1) and regroups by order:
/// order m holds the channels of every degree l >= m, ascending l.
So2Features to_local(const Frame& frame, const So3Features& x, OpCounter* counter = nullptr);

/// Exact inverse of to_local; `layout` is the SO(3) layout to rebuild.
So3Features from_local(const Frame& frame, const So2Features& x, const IrrepsLayout& layout,
                       OpCounter* counter = nullptr);

/// Regrouping alone (identity frame). These are permutations, so each is the
/// other's transpose.
So2Features regroup_to_orders(const So3Features& x);
So3Features regroup_to_degrees(const So2Features& x, const IrrepsLayout& layout);

/// Applies D^l(g) to every degree block: the features of the rotated input.
So3Features rotate_so3(const So3Features& x, const Rotation& g);

using LocalMap = std::function<So2Features(const So2Features&)>;

/// Maximum deviation between the stabilizer-averaged frame evaluation
/// (1/K) sum_g (h g) Phi((h g)^-1 x) over K uniformly drawn stabilizer
/// rotations g and the single-rotation evaluation h Phi(h^-1 x).
/// Throws std::invalid_argument for K < 1.
double frame_average_check(const LocalMap& phi, const Eigen::Vector3d& direction,
                           const So3Features& x, int samples, RandomStream& rng);

namespace testing {
/// Perturbs the cached to-local Wigner matrices of every Frame constructed
/// while enabled. Used only to prove the equivariance audits can fail.
void set_corrupt_wigner_cache(bool enabled);
bool corrupt_wigner_cache();
}  // namespace testing

}  // namespace so2frames

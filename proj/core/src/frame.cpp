#include "so2frames/frame.hpp"

#include <Eigen/Geometry>

#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace so2frames {

namespace {

std::atomic<bool> g_corrupt_cache{false};

void check_cap(const Frame& frame, const IrrepsLayout& layout) {
  if (layout.max_index() > frame.l_max())
    throw LayoutError("features carry degree " + std::to_string(layout.max_index()) +
                      " above the frame cache l_max " + std::to_string(frame.l_max()));
}

}  // namespace

namespace testing {
void set_corrupt_wigner_cache(bool enabled) { g_corrupt_cache = enabled; }
bool corrupt_wigner_cache() { return g_corrupt_cache; }
}  // namespace testing

Frame::Frame(const Eigen::Vector3d& reference, const Rotation& h, int l_max)
    : reference_(reference), h_(h), l_max_(l_max) {
  if (l_max < 0 || l_max > kDegreeCap) throw std::invalid_argument("frame l_max out of range");
  const Rotation inv = h.inverse();
  for (int l = 0; l <= l_max; ++l) {
    to_local_.push_back(wigner_d(l, inv));
    from_local_.push_back(wigner_d(l, h));
  }
  if (g_corrupt_cache && l_max >= 1) to_local_[1](0, 1) += 1e-3;
}

const Eigen::MatrixXd& Frame::to_local_d(int l) const { return to_local_.at(l); }
const Eigen::MatrixXd& Frame::from_local_d(int l) const { return from_local_.at(l); }

Frame frame_from_direction(const Eigen::Vector3d& r, int l_max) {
  const double norm = r.norm();
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw std::invalid_argument("frame_from_direction: zero or non-finite direction");
  const Eigen::Vector3d rhat = r / norm;
  const Eigen::Vector3d& v = kTargetAxis;

  const Eigen::Vector3d k = rhat.cross(v);
  const double knorm = k.norm();
  Eigen::Matrix3d h_inv;
  if (knorm == 0.0) {
    if (rhat.dot(v) > 0.0) return Frame(rhat, Rotation::identity(), l_max);
    const Rotation flip = Rotation::about_axis(Eigen::Vector3d::UnitX(), std::numbers::pi);
    return Frame(rhat, flip, l_max);
  }
  // h^-1 fixes the axis n and takes the orthonormal basis (r, n, r x n) to
  // (v, n, v x n). That maps r onto v exactly even when n is only
  // approximately perpendicular to both.
  const Eigen::Vector3d n = k / knorm;
  Eigen::Matrix3d from, to;
  from.col(0) = rhat;
  from.col(1) = n;
  from.col(2) = rhat.cross(n);
  to.col(0) = v;
  to.col(1) = n;
  to.col(2) = v.cross(n);
  h_inv = to * from.transpose();
  return Frame(rhat, Rotation(h_inv.transpose(), 1e-10), l_max);
}

So3Features rotate_so3(const So3Features& x, const Rotation& g) {
  So3Features y = x;
  for (std::size_t k = 0; k < y.num_blocks(); ++k)
    y.block(k) = x.block(k) * wigner_d(x.layout()[k].index, g).transpose();
  return y;
}

So2Features regroup_to_orders(const So3Features& x) {
  const IrrepsLayout& layout = x.layout();
  So2Features out(regrouped_layout(layout));
  for (std::size_t oi = 0; oi < out.num_blocks(); ++oi) {
    const int m = out.layout()[oi].index;
    auto& dst = out.block(oi);
    int row = 0;
    for (std::size_t li = 0; li < layout.size(); ++li) {
      const int l = layout[li].index;
      if (l < m) continue;
      const auto& src = x.block(li);
      if (m == 0) {
        dst.block(row, 0, src.rows(), 1) = src.col(l);
      } else {
        dst.block(row, 0, src.rows(), 1) = src.col(l - m);
        dst.block(row, 1, src.rows(), 1) = src.col(l + m);
      }
      row += static_cast<int>(src.rows());
    }
  }
  return out;
}

So3Features regroup_to_degrees(const So2Features& x, const IrrepsLayout& layout) {
  if (!(regrouped_layout(layout) == x.layout()))
    throw LayoutError("SO(2) layout " + x.layout().to_string() + " is not the regrouping of " +
                      layout.to_string());
  So3Features out(layout);
  for (std::size_t oi = 0; oi < x.num_blocks(); ++oi) {
    const int m = x.layout()[oi].index;
    const auto& src = x.block(oi);
    int row = 0;
    for (std::size_t li = 0; li < layout.size(); ++li) {
      const int l = layout[li].index;
      if (l < m) continue;
      auto& dst = out.block(li);
      const auto rows = dst.rows();
      if (m == 0) {
        dst.col(l) = src.block(row, 0, rows, 1);
      } else {
        dst.col(l - m) = src.block(row, 0, rows, 1);
        dst.col(l + m) = src.block(row, 1, rows, 1);
      }
      row += static_cast<int>(rows);
    }
  }
  return out;
}

So2Features to_local(const Frame& frame, const So3Features& x, OpCounter* counter) {
  check_cap(frame, x.layout());
  So3Features rotated(x.layout());
  for (std::size_t i = 0; i < x.num_blocks(); ++i) {
    const int l = x.layout()[i].index;
    rotated.block(i).noalias() = x.block(i) * frame.to_local_d(l).transpose();
    count(counter, Kernel::FrameRotation,
          static_cast<std::uint64_t>(x.block(i).rows()) * (2 * l + 1) * (2 * l + 1));
  }
  return regroup_to_orders(rotated);
}

So3Features from_local(const Frame& frame, const So2Features& x, const IrrepsLayout& layout,
                       OpCounter* counter) {
  check_cap(frame, layout);
  So3Features out = regroup_to_degrees(x, layout);
  for (std::size_t i = 0; i < out.num_blocks(); ++i) {
    const int l = layout[i].index;
    out.block(i) = out.block(i) * frame.from_local_d(l).transpose();
    count(counter, Kernel::FrameRotation,
          static_cast<std::uint64_t>(out.block(i).rows()) * (2 * l + 1) * (2 * l + 1));
  }
  return out;
}

double frame_average_check(const LocalMap& phi, const Eigen::Vector3d& direction,
                           const So3Features& x, int samples, RandomStream& rng) {
  if (samples < 1) throw std::invalid_argument("frame_average_check: need at least one sample");
  const Frame frame = frame_from_direction(direction, std::max(x.layout().max_index(), 0));
  const So2Features local = to_local(frame, x);
  const So3Features single = from_local(frame, phi(local), x.layout());

  // Frame element h g acts in local coordinates as the stabilizer rotation g,
  // which is rotate_so2 by its angle.
  So2Features acc;
  for (int k = 0; k < samples; ++k) {
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    So2Features term = rotate_so2(phi(rotate_so2(local, -angle)), angle);
    if (k == 0)
      acc = std::move(term);
    else
      acc += term;
  }
  acc *= 1.0 / samples;
  const So3Features averaged = from_local(frame, acc, x.layout());
  return max_abs_diff(averaged, single);
}

}  // namespace so2frames

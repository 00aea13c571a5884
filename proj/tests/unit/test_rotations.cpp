#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "so2frames/frame.hpp"
#include "so2frames/rotation.hpp"
#include "so2frames/so2_ops.hpp"
#include "test_support.hpp"

using namespace so2frames;
using namespace so2frames::test;

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

Eigen::Matrix3d rz(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}
Eigen::Matrix3d ry(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}

}  // namespace

TEST(Rotation, EulerExamples) {
  EXPECT_EQ(max_abs(rotation_from_euler(0, 0, 0).matrix() - Eigen::Matrix3d::Identity()), 0.0);
  const Rotation r = rotation_from_euler(0.7, 0.0, 0.0);
  EXPECT_LT(max_abs(r.matrix() - rz(0.7)), 1e-15);
  EXPECT_LT((r.apply(Eigen::Vector3d::UnitZ()) - Eigen::Vector3d::UnitZ()).norm(), 1e-15);
}

TEST(Rotation, EulerComposition) {
  RandomStream rng(1, "euler");
  for (int t = 0; t < 50; ++t) {
    const double a = rng.uniform(-3, 3), b = rng.uniform(0, 3), c = rng.uniform(-3, 3);
    EXPECT_LT(max_abs(rotation_from_euler(a, b, c).matrix() - rz(a) * ry(b) * rz(c)), 1e-14);
  }
}

TEST(Rotation, EulerRoundTrip) {
  RandomStream rng(2, "euler.roundtrip");
  for (int t = 0; t < 200; ++t) {
    const Rotation r = random_rotation(rng);
    const EulerZYZ e = r.to_euler();
    EXPECT_LT(max_abs(rotation_from_euler(e.alpha, e.beta, e.gamma).matrix() - r.matrix()), 1e-12);
  }
  // near the gimbal cases
  for (double b : {0.0, 1e-9, std::numbers::pi, std::numbers::pi - 1e-9}) {
    const Rotation r = rotation_from_euler(0.3, b, -1.1);
    const EulerZYZ e = r.to_euler();
    EXPECT_LT(max_abs(rotation_from_euler(e.alpha, e.beta, e.gamma).matrix() - r.matrix()), 1e-12);
  }
}

TEST(Rotation, RandomRotationsAreProper) {
  RandomStream rng(3, "proper");
  for (int t = 0; t < 100; ++t) {
    const Eigen::Matrix3d m = random_rotation(rng).matrix();
    EXPECT_LT(max_abs(m.transpose() * m - Eigen::Matrix3d::Identity()), 1e-12);
    EXPECT_NEAR(m.determinant(), 1.0, 1e-12);
  }
}

TEST(Rotation, RejectsImproperMatrices) {
  EXPECT_THROW(Rotation(Eigen::Matrix3d(Eigen::Vector3d(1, 1, -1).asDiagonal())), std::invalid_argument);
  EXPECT_THROW(Rotation(2.0 * Eigen::Matrix3d::Identity()), std::invalid_argument);
}

TEST(Wigner, IdentityRotation) {
  for (int l = 0; l <= kDegreeCap; ++l)
    EXPECT_EQ(max_abs(wigner_d(l, Rotation::identity()) - Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1)), 0.0);
}

TEST(Wigner, DegreeOneIsTheRotationMatrix) {
  // degree 1 components are proportional to (x, y, z)
  RandomStream rng(4, "wigner.l1");
  for (int t = 0; t < 20; ++t) {
    const Rotation r = random_rotation(rng);
    EXPECT_LT(max_abs(wigner_d(1, r) - r.matrix()), 1e-14);
  }
}

TEST(Wigner, Homomorphism) {
  RandomStream rng(5, "wigner.hom");
  double worst = 0.0;
  for (int t = 0; t < 30; ++t) {
    const Rotation a = random_rotation(rng), b = random_rotation(rng);
    for (int l = 0; l <= 6; ++l) worst = std::max(worst, max_abs(wigner_d(l, a * b) - wigner_d(l, a) * wigner_d(l, b)));
  }
  EXPECT_LT(worst, 1e-11);
}

TEST(Wigner, Orthogonal) {
  RandomStream rng(6, "wigner.orth");
  double worst = 0.0;
  for (int t = 0; t < 30; ++t) {
    const Rotation r = random_rotation(rng);
    for (int l = 0; l <= kDegreeCap; ++l) {
      const Eigen::MatrixXd d = wigner_d(l, r);
      worst = std::max(worst, max_abs(d.transpose() * d - Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1)));
    }
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(Wigner, MatchesHarmonicSamples) {
  RandomStream rng(7, "wigner.samples");
  for (int t = 0; t < 10; ++t) {
    const Rotation r = random_rotation(rng);
    for (int l = 0; l <= 6; ++l) EXPECT_LT(max_abs(wigner_d(l, r) - sampled_wigner(l, r, rng)), 1e-11);
  }
}

TEST(Wigner, AxisRotationIsBlockDiagonalByOrder) {
  RandomStream rng(8, "wigner.axis");
  for (int t = 0; t < 20; ++t) {
    const double a = rng.uniform(-4, 4);
    const Rotation r(ry(a));
    for (int l = 1; l <= 6; ++l) {
      // regrouped, the matrix must equal rotate_so2 by a on one channel per degree
      const Eigen::MatrixXd d = wigner_d(l, r);
      So2Features e(IrrepsLayout::uniform(IrrepKind::SO2, 1, l));
      for (int m = 0; m <= l; ++m) {
        for (int c = 0; c < (m == 0 ? 1 : 2); ++c) {
          e.set_zero();
          e.at(m)(0, c) = 1.0;
          const So2Features want = rotate_so2(e, a);
          const int col = m == 0 ? l : (c == 0 ? l - m : l + m);
          for (int k = 0; k <= l; ++k) {
            const int rows = k == 0 ? 1 : 2;
            for (int rr = 0; rr < rows; ++rr) {
              const int row = k == 0 ? l : (rr == 0 ? l - k : l + k);
              EXPECT_NEAR(d(row, col), want.at(k)(0, rr), 1e-12);
            }
          }
        }
      }
    }
  }
}

TEST(Wigner, RejectsDegreeAboveCap) { EXPECT_THROW(wigner_d(kDegreeCap + 1, Rotation()), std::invalid_argument); }

TEST(Frame, TargetAxisGivesIdentity) {
  const Frame f = frame_from_direction(kTargetAxis);
  EXPECT_EQ(max_abs(f.rotation().matrix() - Eigen::Matrix3d::Identity()), 0.0);
}

TEST(Frame, AntipodalFallback) {
  const Frame f = frame_from_direction(-kTargetAxis);
  Eigen::Matrix3d rx_pi;
  rx_pi << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  EXPECT_LT(max_abs(f.rotation().matrix() - rx_pi), 1e-15);
  EXPECT_LT((f.rotation().inverse().apply(-kTargetAxis) - kTargetAxis).norm(), 1e-15);
}

TEST(Frame, MapsDirectionOntoTargetAxis) {
  RandomStream rng(9, "frame.random");
  for (int t = 0; t < 500; ++t) {
    const Eigen::Vector3d r = random_unit(rng);
    const Frame f = frame_from_direction(r);
    EXPECT_LT((f.rotation().inverse().apply(r) - kTargetAxis).norm(), 1e-13);
    // minimal angle: the rotation axis is perpendicular to both r and the target
    const double angle = std::acos(std::clamp((f.rotation().matrix().trace() - 1) / 2, -1.0, 1.0));
    EXPECT_NEAR(angle, std::acos(std::clamp(r.dot(kTargetAxis), -1.0, 1.0)), 1e-7);
  }
  // nearly antiparallel
  const Eigen::Vector3d r = Eigen::Vector3d(1e-9, -1.0, 2e-9).normalized();
  EXPECT_LT((frame_from_direction(r).rotation().inverse().apply(r) - kTargetAxis).norm(), 1e-13);
}

TEST(Frame, ScalingInvariant) {
  RandomStream rng(10, "frame.scale");
  for (int t = 0; t < 50; ++t) {
    const Eigen::Vector3d r = random_unit(rng) * rng.uniform(0.1, 5);
    EXPECT_LT(max_abs(frame_from_direction(r).rotation().matrix() - frame_from_direction(2 * r).rotation().matrix()),
              1e-15);
  }
}

TEST(Frame, CachedMatricesAreOrthogonal) {
  const Frame f = frame_from_direction(Eigen::Vector3d(0.3, -0.2, 0.9), 6);
  for (int l = 0; l <= 6; ++l) {
    const Eigen::MatrixXd& d = f.to_local_d(l);
    EXPECT_LT(max_abs(d.transpose() * d - Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1)), 1e-12);
    EXPECT_LT(max_abs(d * f.from_local_d(l) - Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1)), 1e-12);
  }
}

TEST(Frame, RejectsZeroAndNonFinite) {
  EXPECT_THROW(frame_from_direction(Eigen::Vector3d::Zero()), std::invalid_argument);
  EXPECT_THROW(frame_from_direction(Eigen::Vector3d(std::nan(""), 0, 1)), std::invalid_argument);
}

TEST(LocalMapping, IdentityFrameIsRegrouping) {
  RandomStream rng(11, "regroup");
  const IrrepsLayout l = layout_parse("2x0e+3x1e+1x2e");
  const So3Features x = random_features<IrrepKind::SO3>(l, rng);
  const Frame f = frame_from_direction(kTargetAxis, 2);
  const So2Features y = to_local(f, x);
  EXPECT_EQ(max_abs_diff(y, regroup_to_orders(x)), 0.0);
  // order 1: channels of degree 1 (3) then degree 2 (1), ascending degree
  EXPECT_EQ(y.layout(), layout_parse("6x0m+4x1m+1x2m"));
  EXPECT_EQ(y.at(1)(0, 0), x.at(1)(0, 0));  // x_{-1} of the first degree-1 channel
  EXPECT_EQ(y.at(1)(3, 1), x.at(2)(0, 3));  // x_{+1} of the degree-2 channel
  EXPECT_EQ(y.at(0)(2, 0), x.at(1)(0, 1));
  EXPECT_EQ(max_abs_diff(from_local(f, y, l), x), 0.0);
}

TEST(LocalMapping, OwnHarmonicsAreAxial) {
  RandomStream rng(12, "axial");
  for (int t = 0; t < 20; ++t) {
    const Eigen::Vector3d r = random_unit(rng);
    const So2Features y = to_local(frame_from_direction(r, 4), real_spherical_harmonics(4, r));
    for (int m = 1; m <= 4; ++m) EXPECT_LT(y.at(m).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(LocalMapping, StabilizerActsAsSo2Rotation) {
  RandomStream rng(13, "stabilizer");
  const IrrepsLayout l = layout_parse("2x0e+2x1e+2x2e+1x3e");
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Eigen::Vector3d r = random_unit(rng);
    const Frame f = frame_from_direction(r, 3);
    const double phi = rng.uniform(-3, 3);
    const Frame fg(r, f.rotation() * stabilizer_rotation(phi), 3);
    const So3Features x = random_features<IrrepKind::SO3>(l, rng);
    worst = std::max(worst, max_abs_diff(to_local(fg, x), rotate_so2(to_local(f, x), -phi)));
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(LocalMapping, RoundTripAndIsometry) {
  RandomStream rng(14, "roundtrip");
  const IrrepsLayout l = layout_parse("3x0e+2x1e+2x2e+1x3e+1x4e");
  for (int t = 0; t < 50; ++t) {
    const Frame f = frame_from_direction(random_unit(rng), 4);
    const So3Features x = random_features<IrrepKind::SO3>(l, rng);
    const So2Features y = to_local(f, x);
    EXPECT_LT(max_abs_diff(from_local(f, y, l), x), 1e-13);
    EXPECT_NEAR(y.squared_norm(), x.squared_norm(), 1e-12 * x.squared_norm());
  }
  const Frame f = frame_from_direction(Eigen::Vector3d(1, 2, 3));
  EXPECT_EQ(from_local(f, So2Features(regrouped_layout(l)), l).max_abs(), 0.0);
}

TEST(LocalMapping, GlobalEquivarianceChain) {
  RandomStream rng(15, "chain");
  const IrrepsLayout l = layout_parse("2x0e+2x1e+2x2e+1x3e+1x4e");
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Eigen::Vector3d r = random_unit(rng);
    const Rotation g = random_rotation(rng);
    const So3Features x = random_features<IrrepKind::SO3>(l, rng);
    const Frame f = frame_from_direction(r, 4), fg = frame_from_direction(g.apply(r), 4);
    const So3Features lhs = from_local(fg, to_local(fg, rotate_so3(x, g)), l);
    const So3Features rhs = rotate_so3(from_local(f, to_local(f, x), l), g);
    worst = std::max(worst, max_abs_diff(lhs, rhs));
  }
  EXPECT_LT(worst, 1e-11);
}

TEST(LocalMapping, RejectsDegreesAboveFrameCache) {
  const Frame f = frame_from_direction(Eigen::Vector3d(0, 0, 1), 2);
  EXPECT_THROW(to_local(f, So3Features(layout_parse("1x3e"))), LayoutError);
}

TEST(FrameAverage, IdentityMapHasNoDeviation) {
  RandomStream rng(16, "fa.identity");
  const So3Features x = random_features<IrrepKind::SO3>(layout_parse("2x0e+2x1e+1x2e"), rng);
  EXPECT_LT(frame_average_check([](const So2Features& v) { return v; }, random_unit(rng), x, 16, rng), 1e-14);
}

TEST(FrameAverage, So2LinearCollapses) {
  RandomStream rng(17, "fa.linear");
  const IrrepsLayout l = layout_parse("3x0e+2x1e+2x2e");
  const So2LinearWeights w = So2LinearWeights::random(regrouped_layout(l), regrouped_layout(l), rng);
  for (int t = 0; t < 10; ++t) {
    const So3Features x = random_features<IrrepKind::SO3>(l, rng);
    EXPECT_LT(frame_average_check([&](const So2Features& v) { return so2_linear(v, w); }, random_unit(rng), x, 64, rng),
              1e-10);
  }
}

TEST(FrameAverage, NonEquivariantMapIsDetected) {
  RandomStream rng(18, "fa.negative");
  const IrrepsLayout l = layout_parse("3x0e+2x1e+2x2e");
  // squares x_{-m} only
  const LocalMap square = [](const So2Features& v) {
    So2Features y = v;
    for (std::size_t b = 1; b < y.num_blocks(); ++b) y.block(b).col(0) = y.block(b).col(0).cwiseAbs2();
    return y;
  };
  for (int t = 0; t < 10; ++t) {
    const So3Features x = random_features<IrrepKind::SO3>(l, rng);
    EXPECT_GT(frame_average_check(square, random_unit(rng), x, 64, rng), 1e-3);
  }
  EXPECT_THROW(frame_average_check(square, kTargetAxis, So3Features(l), 0, rng), std::invalid_argument);
}

TEST(FrameAverage, CorruptedCacheBreaksRoundTrip) {
  RandomStream rng(19, "corrupt");
  const IrrepsLayout l = layout_parse("1x1e+1x2e");
  const So3Features x = random_features<IrrepKind::SO3>(l, rng);
  so2frames::testing::set_corrupt_wigner_cache(true);
  const Frame bad = frame_from_direction(Eigen::Vector3d(0.2, 0.3, 0.9), 2);
  so2frames::testing::set_corrupt_wigner_cache(false);
  EXPECT_GT(max_abs_diff(from_local(bad, to_local(bad, x), l), x), 1e-6);
  EXPECT_FALSE(so2frames::testing::corrupt_wigner_cache());
}

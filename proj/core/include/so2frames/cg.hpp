#pragma once

#include <Eigen/Core>

#include <array>
#include <map>
#include <string>
#include <vector>

#include "so2frames/counter.hpp"
#include "so2frames/irreps.hpp"
#include "so2frames/random.hpp"
#include "so2frames/so2_ops.hpp"

namespace so2frames {

/// Real-basis coupling coefficients C[m1][m2][m3] (indices offset by l), in
/// the basis of real_spherical_harmonics. Orthonormal:
/// sum_{m1,m2} C[m1][m2][m3] C[m1][m2][m3'] = delta_{m3 m3'}.
class CgTable {
 public:
  CgTable(int l1, int l2, int l3, std::vector<double> coeffs);

  int l1() const { return l1_; }
  int l2() const { return l2_; }
  int l3() const { return l3_; }
  /// Signed components, m_k in [-l_k, l_k].
  double operator()(int m1, int m2, int m3) const {
    return coeffs_[((m1 + l1_) * (2 * l2_ + 1) + (m2 + l2_)) * (2 * l3_ + 1) + (m3 + l3_)];
  }
  const std::vector<double>& coeffs() const { return coeffs_; }

 private:
  int l1_, l2_, l3_;
  std::vector<double> coeffs_;
};

/// Memoized table. Throws std::invalid_argument on a triangle violation or a
/// degree above kDegreeCap. Safe for concurrent first use.
const CgTable& cg_table(int l1, int l2, int l3);

bool triangle(int l1, int l2, int l3);

/// Per-channel path weights h_{l_i, l_f, l_o} of the reference SO(3) tensor
/// product, one entry per triangle-valid path.
struct PathWeights {
  int channels = 0;
  int l_in = 0;
  int l_filter = 0;
  int l_out = 0;
  std::map<std::array<int, 3>, Eigen::VectorXd> h;

  static PathWeights zeros(int channels, int l_in, int l_filter, int l_out);
  static PathWeights random(int channels, int l_in, int l_filter, int l_out, RandomStream& rng);
};

/// Full CG contraction f^{l_o}_c = sum_{l_i,l_f} h_c sum C x^{l_i}_c Y^{l_f}.
/// `x` has `weights.channels` channels at every degree 0..l_in, `sh` one channel
/// per degree 0..l_filter. Output has the same channels at degrees 0..l_out.
So3Features so3_tensor_product(const So3Features& x, const So3Features& sh,
                               const PathWeights& weights, OpCounter* counter = nullptr);

/// SO(2) weights (w1_m, w2_m) for one (l_i, l_o) pair, one value per channel
/// and order m = 0..min(l_i, l_o). Built from the filter paths with the
/// harmonic evaluated on the target axis, where only Y_{l_f,0} survives:
/// w1_m = sum_{l_f} h Y_{l_f,0} C[m][0][m], w2_m = sum_{l_f} h Y_{l_f,0} C[m][0][-m].
struct EscnPairWeights {
  std::vector<Eigen::VectorXd> w1;
  std::vector<Eigen::VectorXd> w2;
};
EscnPairWeights escn_weights_from_paths(const PathWeights& weights, int l_i, int l_o);

/// Assembles the channel-diagonal So2LinearWeights acting on
/// regrouped_layout(uniform(channels, l_in)) and producing
/// regrouped_layout(uniform(channels, l_out)) from every (l_i, l_o) pair.
So2LinearWeights escn_linear_weights(const PathWeights& weights);

/// Learned per-degree channel weights of the expansion: entry l3 has one weight
/// per channel of the feature at degree l3, stored n x 1 (empty when unused).
using ExpansionWeights = std::vector<Eigen::MatrixXd>;

/// (2 l1 + 1) x (2 l2 + 1) block E[m1][m2] = sum_{l3, m3} C^{l1 l2 l3}[m1][m2][m3] f^{l3}_{m3},
/// f^{l3} = sum_c w[l3][c] feature^{l3}_c. Degrees absent from the feature
/// contribute zero.
Eigen::MatrixXd expansion(const So3Features& feature, const ExpansionWeights& w, int l1, int l2);

/// Input gradients of expansion: into the feature (same layout) and the weights.
So3Features expansion_vjp(const So3Features& feature, const ExpansionWeights& w, int l1, int l2,
                          const Eigen::MatrixXd& gout, ExpansionWeights* gw);

/// Inverse direction: per-degree components f^{l3}_{m3} = sum C[m1][m2][m3] B[m1][m2]
/// for l3 = |l1-l2|..l1+l2 (entry l3 of the result; lower entries empty).
std::vector<Eigen::VectorXd> decompose_block(const Eigen::MatrixXd& block, int l1, int l2);

}  // namespace so2frames

#include "so2frames/cg.hpp"

#include "so2frames/frame.hpp"
#include "so2frames/rotation.hpp"

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <tuple>

namespace so2frames {

namespace {

using cd = std::complex<double>;

long double factorial(int n) {
  long double f = 1.0L;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Complex Clebsch-Gordan <l1 m1 l2 m2 | l3 m3>, Racah's formula.
double complex_cg(int l1, int m1, int l2, int m2, int l3, int m3) {
  if (m1 + m2 != m3) return 0.0;
  if (std::abs(m1) > l1 || std::abs(m2) > l2 || std::abs(m3) > l3) return 0.0;
  const long double pre =
      std::sqrt((2 * l3 + 1) * factorial(l3 + l1 - l2) * factorial(l3 - l1 + l2) *
                factorial(l1 + l2 - l3) / factorial(l1 + l2 + l3 + 1)) *
      std::sqrt(factorial(l3 + m3) * factorial(l3 - m3) * factorial(l1 - m1) * factorial(l1 + m1) *
                factorial(l2 - m2) * factorial(l2 + m2));
  long double sum = 0.0L;
  for (int k = 0; k <= l1 + l2 - l3; ++k) {
    const int d[5] = {l1 + l2 - l3 - k, l1 - m1 - k, l2 + m2 - k, l3 - l2 + m1 + k, l3 - l1 - m2 + k};
    bool ok = true;
    for (int v : d) ok = ok && v >= 0;
    if (!ok) continue;
    long double den = factorial(k);
    for (int v : d) den *= factorial(v);
    sum += ((k % 2 == 0) ? 1.0L : -1.0L) / den;
  }
  return static_cast<double>(pre * sum);
}

CgTable build_table(int l1, int l2, int l3) {
  const int n1 = 2 * l1 + 1, n2 = 2 * l2 + 1, n3 = 2 * l3 + 1;
  const Eigen::MatrixXcd u1 = real_basis_change(l1);
  const Eigen::MatrixXcd u2 = real_basis_change(l2);
  const Eigen::MatrixXcd u3 = real_basis_change(l3);
  std::vector<cd> t(static_cast<std::size_t>(n1) * n2 * n3, cd(0.0, 0.0));
  for (int m1 = -l1; m1 <= l1; ++m1)
    for (int m2 = -l2; m2 <= l2; ++m2) {
      const int m3 = m1 + m2;
      if (std::abs(m3) > l3) continue;
      const double c = complex_cg(l1, m1, l2, m2, l3, m3);
      if (c == 0.0) continue;
      for (int a = 0; a < n1; ++a) {
        const cd ua = std::conj(u1(a, m1 + l1));
        if (ua == cd(0.0, 0.0)) continue;
        for (int b = 0; b < n2; ++b) {
          const cd ub = std::conj(u2(b, m2 + l2));
          if (ub == cd(0.0, 0.0)) continue;
          for (int e = 0; e < n3; ++e) t[(a * n2 + b) * n3 + e] += u3(e, m3 + l3) * c * ua * ub;
        }
      }
    }
  // The real-basis tensor is a global phase times a real tensor; the phase is
  // either 1 or i depending on parity, so one of the parts vanishes.
  double re = 0.0, im = 0.0;
  for (const cd& v : t) {
    re = std::max(re, std::abs(v.real()));
    im = std::max(im, std::abs(v.imag()));
  }
  const bool use_real = re >= im;
  if (std::min(re, im) > 1e-12)
    throw std::logic_error("real coupling tensor is not phase-real");
  std::vector<double> coeffs(t.size());
  double sign = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = use_real ? t[i].real() : t[i].imag();
    if (sign == 0.0 && std::abs(v) > 1e-12) sign = v > 0.0 ? 1.0 : -1.0;
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = sign * (use_real ? t[i].real() : t[i].imag());
    coeffs[i] = std::abs(v) < 1e-15 ? 0.0 : v;
  }
  return CgTable(l1, l2, l3, std::move(coeffs));
}

void check_uniform(const So3Features& x, int channels, int l_max, const char* what) {
  if (!(x.layout() == IrrepsLayout::uniform(IrrepKind::SO3, channels, l_max)))
    throw LayoutError(std::string(what) + ": expected " + std::to_string(channels) +
                      " channels at degrees 0.." + std::to_string(l_max) + ", got " +
                      x.layout().to_string());
}

}  // namespace

CgTable::CgTable(int l1, int l2, int l3, std::vector<double> coeffs)
    : l1_(l1), l2_(l2), l3_(l3), coeffs_(std::move(coeffs)) {}

bool triangle(int l1, int l2, int l3) {
  return l1 >= 0 && l2 >= 0 && l3 >= std::abs(l1 - l2) && l3 <= l1 + l2;
}

const CgTable& cg_table(int l1, int l2, int l3) {
  if (!triangle(l1, l2, l3))
    throw std::invalid_argument("cg_table: (" + std::to_string(l1) + "," + std::to_string(l2) +
                                "," + std::to_string(l3) + ") violates the triangle rule");
  if (l1 > kDegreeCap || l2 > kDegreeCap || l3 > kDegreeCap)
    throw std::invalid_argument("cg_table: degree above cap");
  static std::mutex mu;
  static std::map<std::tuple<int, int, int>, std::unique_ptr<CgTable>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{l1, l2, l3}];
  if (!slot) slot = std::make_unique<CgTable>(build_table(l1, l2, l3));
  return *slot;
}

PathWeights PathWeights::zeros(int channels, int l_in, int l_filter, int l_out) {
  PathWeights w;
  w.channels = channels;
  w.l_in = l_in;
  w.l_filter = l_filter;
  w.l_out = l_out;
  for (int li = 0; li <= l_in; ++li)
    for (int lf = 0; lf <= l_filter; ++lf)
      for (int lo = 0; lo <= l_out; ++lo)
        if (triangle(li, lf, lo)) w.h[{li, lf, lo}] = Eigen::VectorXd::Zero(channels);
  return w;
}

PathWeights PathWeights::random(int channels, int l_in, int l_filter, int l_out, RandomStream& rng) {
  PathWeights w = zeros(channels, l_in, l_filter, l_out);
  for (auto& [key, h] : w.h)
    for (int c = 0; c < channels; ++c) h[c] = rng.uniform(-1.0, 1.0);
  return w;
}

So3Features so3_tensor_product(const So3Features& x, const So3Features& sh,
                               const PathWeights& weights, OpCounter* counter) {
  const int C = weights.channels;
  check_uniform(x, C, weights.l_in, "so3_tensor_product input");
  check_uniform(sh, 1, weights.l_filter, "so3_tensor_product filter");
  So3Features out(IrrepsLayout::uniform(IrrepKind::SO3, C, weights.l_out));
  std::uint64_t mults = 0;
  for (const auto& [key, h] : weights.h) {
    const auto [li, lf, lo] = key;
    const CgTable& cg = cg_table(li, lf, lo);
    const Eigen::MatrixXd& y = sh.block(lf);
    // coef[mi][mo] = sum_mf C[mi][mf][mo] Y[mf]
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(2 * li + 1, 2 * lo + 1);
    for (int mi = -li; mi <= li; ++mi)
      for (int mf = -lf; mf <= lf; ++mf)
        for (int mo = -lo; mo <= lo; ++mo) coef(mi + li, mo + lo) += cg(mi, mf, mo) * y(0, mf + lf);
    mults += static_cast<std::uint64_t>(2 * li + 1) * (2 * lf + 1) * (2 * lo + 1);
    const Eigen::MatrixXd acc = x.block(li) * coef;
    mults += static_cast<std::uint64_t>(C) * (2 * li + 1) * (2 * lo + 1);
    out.block(lo) += h.asDiagonal() * acc;
    mults += static_cast<std::uint64_t>(C) * (2 * lo + 1);
  }
  count(counter, Kernel::So3Tp, mults);
  return out;
}

EscnPairWeights escn_weights_from_paths(const PathWeights& weights, int l_i, int l_o) {
  if (l_i < 0 || l_o < 0 || l_i > weights.l_in || l_o > weights.l_out)
    throw std::invalid_argument("escn_weights_from_paths: degree outside the path weights");
  EscnPairWeights out;
  const int C = weights.channels;
  const int mmax = std::min(l_i, l_o);
  for (int m = 0; m <= mmax; ++m) {
    out.w1.push_back(Eigen::VectorXd::Zero(C));
    out.w2.push_back(Eigen::VectorXd::Zero(C));
  }
  bool any = false;
  for (int lf = 0; lf <= weights.l_filter; ++lf) {
    if (!triangle(l_i, lf, l_o)) continue;
    any = true;
    const CgTable& cg = cg_table(l_i, lf, l_o);
    const double y0 = std::sqrt((2 * lf + 1) / (4.0 * std::numbers::pi));
    const Eigen::VectorXd& h = weights.h.at({l_i, lf, l_o});
    for (int m = 0; m <= mmax; ++m) {
      out.w1[m] += h * (y0 * cg(m, 0, m));
      if (m > 0) out.w2[m] += h * (y0 * cg(m, 0, -m));
    }
  }
  if (!any)
    throw std::invalid_argument("escn_weights_from_paths: no filter degree couples " +
                                std::to_string(l_i) + " to " + std::to_string(l_o));
  return out;
}

So2LinearWeights escn_linear_weights(const PathWeights& weights) {
  const int C = weights.channels;
  const IrrepsLayout in = regrouped_layout(IrrepsLayout::uniform(IrrepKind::SO3, C, weights.l_in));
  const IrrepsLayout out = regrouped_layout(IrrepsLayout::uniform(IrrepKind::SO3, C, weights.l_out));
  So2LinearWeights w = So2LinearWeights::zeros(in, out);
  for (int li = 0; li <= weights.l_in; ++li)
    for (int lo = 0; lo <= weights.l_out; ++lo) {
      bool coupled = false;
      for (int lf = 0; lf <= weights.l_filter; ++lf) coupled = coupled || triangle(li, lf, lo);
      if (!coupled) continue;
      const EscnPairWeights pw = escn_weights_from_paths(weights, li, lo);
      for (int m = 0; m <= std::min(li, lo); ++m) {
        const int k = out.find(m);
        const int r = (lo - m) * C, c = (li - m) * C;
        w.w1[k].block(r, c, C, C) = pw.w1[m].asDiagonal();
        if (m > 0) w.w2[k].block(r, c, C, C) = pw.w2[m].asDiagonal();
      }
    }
  return w;
}

Eigen::MatrixXd expansion(const So3Features& feature, const ExpansionWeights& w, int l1, int l2) {
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(2 * l1 + 1, 2 * l2 + 1);
  for (int l3 = std::abs(l1 - l2); l3 <= l1 + l2; ++l3) {
    if (!feature.has(l3) || l3 >= static_cast<int>(w.size()) || w[l3].size() == 0) continue;
    const Eigen::MatrixXd& fb = feature.at(l3);
    if (w[l3].rows() != fb.rows())
      throw LayoutError("expansion: weight count at degree " + std::to_string(l3) +
                        " does not match the feature channels");
    const Eigen::RowVectorXd f = w[l3].transpose() * fb;
    const CgTable& cg = cg_table(l1, l2, l3);
    for (int m1 = -l1; m1 <= l1; ++m1)
      for (int m2 = -l2; m2 <= l2; ++m2) {
        double s = 0.0;
        for (int m3 = -l3; m3 <= l3; ++m3) s += cg(m1, m2, m3) * f[m3 + l3];
        block(m1 + l1, m2 + l2) += s;
      }
  }
  return block;
}

So3Features expansion_vjp(const So3Features& feature, const ExpansionWeights& w, int l1, int l2,
                          const Eigen::MatrixXd& gout, ExpansionWeights* gw) {
  So3Features gf(feature.layout());
  const std::vector<Eigen::VectorXd> gcomp = decompose_block(gout, l1, l2);
  for (int l3 = std::abs(l1 - l2); l3 <= l1 + l2; ++l3) {
    if (!feature.has(l3) || l3 >= static_cast<int>(w.size()) || w[l3].size() == 0) continue;
    const Eigen::RowVectorXd g = gcomp[l3].transpose();
    gf.at(l3) += w[l3] * g;
    if (gw != nullptr) (*gw)[l3] += feature.at(l3) * g.transpose();
  }
  return gf;
}

std::vector<Eigen::VectorXd> decompose_block(const Eigen::MatrixXd& block, int l1, int l2) {
  if (block.rows() != 2 * l1 + 1 || block.cols() != 2 * l2 + 1)
    throw LayoutError("decompose_block: block shape does not match degrees");
  std::vector<Eigen::VectorXd> out(l1 + l2 + 1);
  for (int l3 = std::abs(l1 - l2); l3 <= l1 + l2; ++l3) {
    const CgTable& cg = cg_table(l1, l2, l3);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(2 * l3 + 1);
    for (int m1 = -l1; m1 <= l1; ++m1)
      for (int m2 = -l2; m2 <= l2; ++m2)
        for (int m3 = -l3; m3 <= l3; ++m3) f[m3 + l3] += cg(m1, m2, m3) * block(m1 + l1, m2 + l2);
    out[l3] = std::move(f);
  }
  return out;
}

}  // namespace so2frames

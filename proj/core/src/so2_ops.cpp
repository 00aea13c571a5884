#include "so2frames/so2_ops.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace so2frames {

namespace {

using cd = std::complex<double>;

void require_layout(const IrrepsLayout& got, const IrrepsLayout& want, const char* what) {
  if (!(got == want))
    throw LayoutError(std::string(what) + ": layout " + got.to_string() + ", expected " +
                      want.to_string());
}

// Complex view of a block: x_{+m} + i x_{-m}, or the real column for m = 0.
Eigen::VectorXcd to_complex(const Eigen::MatrixXd& block, int m) {
  Eigen::VectorXcd z(block.rows());
  for (Eigen::Index c = 0; c < block.rows(); ++c)
    z[c] = m == 0 ? cd(block(c, 0), 0.0) : cd(block(c, 1), block(c, 0));
  return z;
}

Eigen::MatrixXd from_complex(const Eigen::VectorXcd& z, int m) {
  Eigen::MatrixXd block(z.size(), m == 0 ? 1 : 2);
  for (Eigen::Index c = 0; c < z.size(); ++c) {
    if (m == 0) {
      block(c, 0) = z[c].real();
    } else {
      block(c, 0) = z[c].imag();
      block(c, 1) = z[c].real();
    }
  }
  return block;
}

// Real multiplies in one channel-wise product of operands at orders a and b.
std::uint64_t product_cost(int a, int b) {
  if (a == 0 && b == 0) return 1;
  if (a == 0 || b == 0) return 2;
  return 4;
}

enum class Step { Plus, ConjRight, ConjLeft };

Step step_kind(int acc_order, int m, int sign) {
  if (sign > 0) return Step::Plus;
  return acc_order > m ? Step::ConjRight : Step::ConjLeft;
}

int step_order(int acc_order, int m, int sign) {
  return sign > 0 ? acc_order + m : std::abs(acc_order - m);
}

cd apply_step(Step s, cd a, cd b) {
  switch (s) {
    case Step::Plus: return a * b;
    case Step::ConjRight: return a * std::conj(b);
    case Step::ConjLeft: return std::conj(a) * b;
  }
  return {};
}

// Gradients of one step with respect to both operands, given the output
// gradient G in the convention dL = Re(conj(G) d out).
std::pair<cd, cd> step_grad(Step s, cd a, cd b, cd g) {
  switch (s) {
    case Step::Plus: return {g * std::conj(b), g * std::conj(a)};
    case Step::ConjRight: return {g * b, std::conj(g) * a};
    case Step::ConjLeft: return {std::conj(g) * b, g * a};
  }
  return {};
}

cd project(cd g, int m) { return m == 0 ? cd(g.real(), 0.0) : g; }

}  // namespace

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

So2LinearWeights So2LinearWeights::zeros(const IrrepsLayout& in, const IrrepsLayout& out) {
  if (in.kind() != IrrepKind::SO2 || out.kind() != IrrepKind::SO2)
    throw LayoutError("So2LinearWeights: layouts must be SO(2)");
  So2LinearWeights w;
  w.in = in;
  w.out = out;
  for (const auto& e : out.entries()) {
    const int cin = in.multiplicity(e.index);
    w.w1.push_back(Eigen::MatrixXd::Zero(e.multiplicity, cin));
    w.w2.push_back(e.index == 0 ? Eigen::MatrixXd() : Eigen::MatrixXd::Zero(e.multiplicity, cin));
  }
  return w;
}

So2LinearWeights So2LinearWeights::random(const IrrepsLayout& in, const IrrepsLayout& out,
                                          RandomStream& rng) {
  So2LinearWeights w = zeros(in, out);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const int m = out[k].index;
    const int cin = static_cast<int>(w.w1[k].cols());
    const int fan_in = m == 0 ? cin : 2 * cin;
    w.w1[k] = init_uniform(w.w1[k].rows(), cin, fan_in, rng);
    if (m > 0) w.w2[k] = init_uniform(w.w2[k].rows(), cin, fan_in, rng);
  }
  return w;
}

void So2LinearWeights::visit(const std::string& prefix, const ParamVisitor& f) {
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::string m = std::to_string(out[k].index);
    f(prefix + ".w1_" + m, w1[k]);
    if (out[k].index > 0) f(prefix + ".w2_" + m, w2[k]);
  }
}

So2Features so2_linear(const So2Features& x, const So2LinearWeights& w, OpCounter* counter) {
  require_layout(x.layout(), w.in, "so2_linear");
  So2Features z(w.out);
  for (std::size_t k = 0; k < w.out.size(); ++k) {
    const int m = w.out[k].index;
    const int ii = w.in.find(m);
    if (ii < 0) continue;
    const Eigen::MatrixXd& xb = x.block(ii);
    Eigen::MatrixXd& zb = z.block(k);
    const auto cost = static_cast<std::uint64_t>(w.w1[k].rows() * w.w1[k].cols());
    if (m == 0) {
      zb.noalias() = w.w1[k] * xb;
      count(counter, Kernel::So2Linear, cost);
    } else {
      zb.col(1).noalias() = w.w1[k] * xb.col(1) - w.w2[k] * xb.col(0);
      zb.col(0).noalias() = w.w1[k] * xb.col(0) + w.w2[k] * xb.col(1);
      count(counter, Kernel::So2Linear, 4 * cost);
    }
  }
  return z;
}

So2Features so2_linear_vjp(const So2Features& x, const So2LinearWeights& w, const So2Features& gout,
                           So2LinearWeights* gw) {
  require_layout(x.layout(), w.in, "so2_linear_vjp");
  require_layout(gout.layout(), w.out, "so2_linear_vjp gradient");
  So2Features gx(w.in);
  for (std::size_t k = 0; k < w.out.size(); ++k) {
    const int m = w.out[k].index;
    const int ii = w.in.find(m);
    if (ii < 0) continue;
    const Eigen::MatrixXd& xb = x.block(ii);
    const Eigen::MatrixXd& g = gout.block(k);
    Eigen::MatrixXd& gxb = gx.block(ii);
    if (m == 0) {
      gxb.noalias() += w.w1[k].transpose() * g;
      if (gw != nullptr) gw->w1[k].noalias() += g * xb.transpose();
    } else {
      gxb.col(1).noalias() += w.w1[k].transpose() * g.col(1) + w.w2[k].transpose() * g.col(0);
      gxb.col(0).noalias() += w.w1[k].transpose() * g.col(0) - w.w2[k].transpose() * g.col(1);
      if (gw != nullptr) {
        gw->w1[k].noalias() += g.col(1) * xb.col(1).transpose() + g.col(0) * xb.col(0).transpose();
        gw->w2[k].noalias() += g.col(0) * xb.col(1).transpose() - g.col(1) * xb.col(0).transpose();
      }
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Gate
// ---------------------------------------------------------------------------

So2Gate So2Gate::create(const IrrepsLayout& in, int out_scalars, RandomStream& rng) {
  const int c0 = in.multiplicity(0);
  if (c0 < 1) throw LayoutError("so2 gate needs m = 0 channels");
  So2Gate g;
  g.in = in;
  std::vector<IrrepEntry> entries = in.entries();
  entries.front().multiplicity = out_scalars;
  g.out = IrrepsLayout(IrrepKind::SO2, entries);
  g.mlp = Mlp::create({c0, c0, c0, out_scalars + g.gate_count()}, rng, true);
  return g;
}

So2Gate So2Gate::zeros_like() const {
  So2Gate g = *this;
  g.mlp = mlp.zeros_like();
  return g;
}

int So2Gate::gate_count() const {
  int n = 0;
  for (const auto& e : in.entries())
    if (e.index > 0) n += e.multiplicity;
  return n;
}

So2Features so2_gate(const So2Features& x, const So2Gate& gate) {
  require_layout(x.layout(), gate.in, "so2_gate");
  const int scalars = gate.out.multiplicity(0);
  if (gate.mlp.out_dim() != scalars + gate.gate_count())
    throw LayoutError("so2_gate: MLP output width does not match scalars + gates");
  const Eigen::VectorXd o = mlp_forward(gate.mlp, x.at(0).col(0));
  So2Features y(gate.out);
  y.at(0).col(0) = o.head(scalars);
  int idx = scalars;
  for (std::size_t i = 1; i < x.num_blocks(); ++i)
    for (Eigen::Index c = 0; c < x.block(i).rows(); ++c)
      y.block(i).row(c) = sigmoid(o[idx++]) * x.block(i).row(c);
  return y;
}

So2Features so2_gate_vjp(const So2Features& x, const So2Gate& gate, const So2Features& gout,
                         So2Gate* ggate) {
  require_layout(x.layout(), gate.in, "so2_gate_vjp");
  require_layout(gout.layout(), gate.out, "so2_gate_vjp gradient");
  MlpTape tape;
  const Eigen::VectorXd o = mlp_forward(gate.mlp, x.at(0).col(0), &tape);
  const int scalars = gate.out.multiplicity(0);
  Eigen::VectorXd go(o.size());
  go.head(scalars) = gout.at(0).col(0);
  So2Features gx(gate.in);
  int idx = scalars;
  for (std::size_t i = 1; i < x.num_blocks(); ++i)
    for (Eigen::Index c = 0; c < x.block(i).rows(); ++c) {
      const double s = sigmoid(o[idx]);
      gx.block(i).row(c) = s * gout.block(i).row(c);
      go[idx] = s * (1.0 - s) * gout.block(i).row(c).dot(x.block(i).row(c));
      ++idx;
    }
  gx.at(0).col(0) = mlp_vjp(gate.mlp, tape, go, ggate != nullptr ? &ggate->mlp : nullptr);
  return gx;
}

// ---------------------------------------------------------------------------
// LayerNorm
// ---------------------------------------------------------------------------

So2LayerNorm So2LayerNorm::identity(const IrrepsLayout& layout) {
  So2LayerNorm ln;
  ln.layout = layout;
  for (const auto& e : layout.entries()) {
    ln.gain.push_back(Eigen::MatrixXd::Ones(e.multiplicity, 1));
    ln.bias.push_back(Eigen::MatrixXd::Zero(e.multiplicity, 1));
  }
  return ln;
}

So2LayerNorm So2LayerNorm::zeros_like() const {
  So2LayerNorm z = *this;
  for (auto& g : z.gain) g.setZero();
  for (auto& b : z.bias) b.setZero();
  return z;
}

void So2LayerNorm::visit(const std::string& prefix, const ParamVisitor& f) {
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const std::string m = std::to_string(layout[k].index);
    f(prefix + ".gain_" + m, gain[k]);
    f(prefix + ".bias_" + m, bias[k]);
  }
}

namespace {

struct NormStats {
  Eigen::VectorXd n;     // signed value (scalar branch) or norm per channel
  Eigen::VectorXd yhat;  // normalized
  double sigma = 1.0;
};

NormStats norm_stats(const Eigen::MatrixXd& x, bool scalar, double eps) {
  NormStats s;
  if (scalar)
    s.n = x.col(0);
  else
    s.n = (x.rowwise().squaredNorm().array() + eps * eps).sqrt().matrix();
  const double mu = s.n.mean();
  const Eigen::VectorXd centered = s.n.array() - mu;
  const double var = centered.squaredNorm() / static_cast<double>(s.n.size());
  s.sigma = std::sqrt(var + eps * eps);
  s.yhat = centered / s.sigma;
  return s;
}

}  // namespace

Eigen::MatrixXd norm_layernorm(const Eigen::MatrixXd& x, const Eigen::VectorXd& gain,
                               const Eigen::VectorXd& bias, bool scalar, double eps) {
  if (x.rows() == 0) return x;
  const NormStats s = norm_stats(x, scalar, eps);
  const Eigen::VectorXd a = s.yhat.cwiseProduct(gain) + bias;
  if (scalar) return a;
  Eigen::MatrixXd y(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.rows(); ++c) y.row(c) = (a[c] / s.n[c]) * x.row(c);
  return y;
}

Eigen::MatrixXd norm_layernorm_vjp(const Eigen::MatrixXd& x, const Eigen::VectorXd& gain,
                                   const Eigen::VectorXd& bias, bool scalar, double eps,
                                   const Eigen::MatrixXd& gout, Eigen::VectorXd* ggain,
                                   Eigen::VectorXd* gbias) {
  if (x.rows() == 0) return x;
  const NormStats s = norm_stats(x, scalar, eps);
  const Eigen::Index C = x.rows();
  Eigen::VectorXd ga(C);
  Eigen::VectorXd gx_dot(C);  // G_c . x_c
  if (scalar) {
    ga = gout.col(0);
  } else {
    for (Eigen::Index c = 0; c < C; ++c) {
      gx_dot[c] = gout.row(c).dot(x.row(c));
      ga[c] = gx_dot[c] / s.n[c];
    }
  }
  if (ggain != nullptr) *ggain += ga.cwiseProduct(s.yhat);
  if (gbias != nullptr) *gbias += ga;
  const Eigen::VectorXd gy = ga.cwiseProduct(gain);
  const double mean_gy = gy.mean();
  const double mean_gyy = gy.cwiseProduct(s.yhat).mean();
  Eigen::VectorXd gn = ((gy.array() - mean_gy - s.yhat.array() * mean_gyy) / s.sigma).matrix();
  if (scalar) return gn;

  const Eigen::VectorXd a = s.yhat.cwiseProduct(gain) + bias;
  Eigen::MatrixXd gx(C, x.cols());
  for (Eigen::Index c = 0; c < C; ++c) {
    const double n = s.n[c];
    const double gnc = gn[c] - a[c] * gx_dot[c] / (n * n);
    gx.row(c) = (a[c] / n) * gout.row(c) + (gnc / n) * x.row(c);
  }
  return gx;
}

So2Features so2_layernorm(const So2Features& x, const So2LayerNorm& ln) {
  require_layout(x.layout(), ln.layout, "so2_layernorm");
  So2Features y(ln.layout);
  for (std::size_t k = 0; k < ln.layout.size(); ++k)
    y.block(k) = norm_layernorm(x.block(k), ln.gain[k].col(0), ln.bias[k].col(0),
                                ln.layout[k].index == 0, ln.eps);
  return y;
}

So2Features so2_layernorm_vjp(const So2Features& x, const So2LayerNorm& ln, const So2Features& gout,
                              So2LayerNorm* gln) {
  require_layout(x.layout(), ln.layout, "so2_layernorm_vjp");
  require_layout(gout.layout(), ln.layout, "so2_layernorm_vjp gradient");
  So2Features gx(ln.layout);
  for (std::size_t k = 0; k < ln.layout.size(); ++k) {
    Eigen::VectorXd gg = Eigen::VectorXd::Zero(ln.gain[k].rows());
    Eigen::VectorXd gb = Eigen::VectorXd::Zero(ln.bias[k].rows());
    gx.block(k) = norm_layernorm_vjp(x.block(k), ln.gain[k].col(0), ln.bias[k].col(0),
                                     ln.layout[k].index == 0, ln.eps, gout.block(k), &gg, &gb);
    if (gln != nullptr) {
      gln->gain[k].col(0) += gg;
      gln->bias[k].col(0) += gb;
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Tensor product
// ---------------------------------------------------------------------------

namespace {

void check_pair(const Eigen::MatrixXd& x1, int m1, const Eigen::MatrixXd& x2, int m2, int sign,
                int m_max) {
  if (m1 < 0 || m2 < 0 || m1 > m_max || m2 > m_max)
    throw std::invalid_argument("so2_tp_pair: order out of range");
  if (sign != 1 && sign != -1) throw std::invalid_argument("so2_tp_pair: sign must be +1 or -1");
  if (sign > 0 && m1 + m2 > m_max) throw std::invalid_argument("so2_tp_pair: m1 + m2 exceeds m_max");
  if (sign < 0 && m1 <= m2) throw std::invalid_argument("so2_tp_pair: sign -1 needs m1 > m2");
  if (x1.rows() != x2.rows()) throw LayoutError("so2_tp_pair: channel counts differ");
  if (x1.cols() != (m1 == 0 ? 1 : 2) || x2.cols() != (m2 == 0 ? 1 : 2))
    throw LayoutError("so2_tp_pair: block width does not match order");
}

}  // namespace

Eigen::MatrixXd so2_tp_pair(const Eigen::MatrixXd& x1, int m1, const Eigen::MatrixXd& x2, int m2,
                            int sign, int m_max, OpCounter* counter) {
  check_pair(x1, m1, x2, m2, sign, m_max);
  const Step s = sign > 0 ? Step::Plus : Step::ConjRight;
  const Eigen::VectorXcd z1 = to_complex(x1, m1), z2 = to_complex(x2, m2);
  Eigen::VectorXcd z(z1.size());
  for (Eigen::Index c = 0; c < z.size(); ++c) z[c] = apply_step(s, z1[c], z2[c]);
  count(counter, Kernel::So2Tp, product_cost(m1, m2) * static_cast<std::uint64_t>(z.size()));
  return from_complex(z, step_order(m1, m2, sign));
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> so2_tp_pair_vjp(const Eigen::MatrixXd& x1, int m1,
                                                            const Eigen::MatrixXd& x2, int m2,
                                                            int sign, const Eigen::MatrixXd& gout) {
  check_pair(x1, m1, x2, m2, sign, kDegreeCap);
  const Step s = sign > 0 ? Step::Plus : Step::ConjRight;
  const int mo = step_order(m1, m2, sign);
  const Eigen::VectorXcd z1 = to_complex(x1, m1), z2 = to_complex(x2, m2), g = to_complex(gout, mo);
  Eigen::VectorXcd g1(z1.size()), g2(z2.size());
  for (Eigen::Index c = 0; c < g.size(); ++c) {
    const auto [a, b] = step_grad(s, z1[c], z2[c], g[c]);
    g1[c] = project(a, m1);
    g2[c] = project(b, m2);
  }
  return {from_complex(g1, m1), from_complex(g2, m2)};
}

bool So2TpPath::operator<(const So2TpPath& o) const {
  if (orders != o.orders) return orders < o.orders;
  return signs < o.signs;
}

namespace {

void extend_paths(int m_max, int v, So2TpPath& cur, int acc, std::vector<So2TpPath>& out) {
  const std::size_t k = cur.signs.size();
  if (k == static_cast<std::size_t>(v)) {
    cur.out = acc;
    out.push_back(cur);
    return;
  }
  const int m = cur.orders[k];
  if (acc + m <= m_max) {
    cur.signs.push_back(1);
    extend_paths(m_max, v, cur, acc + m, out);
    cur.signs.pop_back();
  }
  if (acc > 0 && m > 0 && acc != m) {
    cur.signs.push_back(-1);
    extend_paths(m_max, v, cur, std::abs(acc - m), out);
    cur.signs.pop_back();
  }
}

}  // namespace

std::vector<So2TpPath> enumerate_tp_paths(int m_max, int v) {
  if (v < 2) throw std::invalid_argument("enumerate_tp_paths: v must be >= 2");
  if (m_max < 0) throw std::invalid_argument("enumerate_tp_paths: m_max must be >= 0");
  std::vector<So2TpPath> paths;
  std::vector<int> orders(v, 0);
  while (true) {
    So2TpPath cur;
    cur.orders = orders;
    cur.signs = {1};
    extend_paths(m_max, v, cur, orders[0], paths);
    int pos = v - 1;
    while (pos >= 0 && orders[pos] == m_max) orders[pos--] = 0;
    if (pos < 0) break;
    ++orders[pos];
  }
  std::sort(paths.begin(), paths.end());
  return paths;
}

So2TpWeights So2TpWeights::zeros(int m_max, int v, int channels) {
  So2TpWeights w;
  w.m_max = m_max;
  w.v = v;
  w.channels = channels;
  w.paths = enumerate_tp_paths(m_max, v);
  w.w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(w.paths.size()), channels);
  return w;
}

So2TpWeights So2TpWeights::random(int m_max, int v, int channels, RandomStream& rng) {
  So2TpWeights w = zeros(m_max, v, channels);
  // Each output order receives many paths; scale by the path count per order.
  const int fan_in = std::max<int>(1, static_cast<int>(w.paths.size()) / (m_max + 1));
  w.w = init_uniform(w.w.rows(), channels, fan_in, rng);
  return w;
}

So2TpWeights So2TpWeights::zeros_like() const {
  So2TpWeights z = *this;
  z.w.setZero();
  return z;
}

IrrepsLayout So2TpWeights::layout() const {
  return IrrepsLayout::uniform(IrrepKind::SO2, channels, m_max);
}

namespace {

std::vector<std::vector<Eigen::VectorXcd>> complex_operands(const std::vector<So2Features>& xs,
                                                            const So2TpWeights& weights,
                                                            const char* what) {
  if (static_cast<int>(xs.size()) != weights.v)
    throw std::invalid_argument(std::string(what) + ": arity " + std::to_string(xs.size()) +
                                " does not match path arity " + std::to_string(weights.v));
  const IrrepsLayout layout = weights.layout();
  std::vector<std::vector<Eigen::VectorXcd>> z(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    require_layout(xs[k].layout(), layout, what);
    for (int m = 0; m <= weights.m_max; ++m) z[k].push_back(to_complex(xs[k].block(m), m));
  }
  return z;
}

}  // namespace

So2Features so2_tp_contract(const std::vector<So2Features>& xs, const So2TpWeights& weights,
                            OpCounter* counter) {
  const auto z = complex_operands(xs, weights, "so2_tp_contract");
  const Eigen::Index C = weights.channels;
  std::vector<Eigen::VectorXcd> out(weights.m_max + 1, Eigen::VectorXcd::Zero(C));
  std::uint64_t mults = 0;
  Eigen::VectorXcd acc(C);
  for (std::size_t p = 0; p < weights.paths.size(); ++p) {
    const So2TpPath& path = weights.paths[p];
    int order = path.orders[0];
    acc = z[0][order];
    for (int k = 1; k < weights.v; ++k) {
      const int m = path.orders[k];
      const Step s = step_kind(order, m, path.signs[k]);
      const Eigen::VectorXcd& x = z[k][m];
      for (Eigen::Index c = 0; c < C; ++c) acc[c] = apply_step(s, acc[c], x[c]);
      mults += product_cost(order, m) * static_cast<std::uint64_t>(C);
      order = step_order(order, m, path.signs[k]);
    }
    for (Eigen::Index c = 0; c < C; ++c) out[order][c] += weights.w(p, c) * acc[c];
    mults += (order == 0 ? 1u : 2u) * static_cast<std::uint64_t>(C);
  }
  count(counter, Kernel::So2Tp, mults);
  So2Features y(weights.layout());
  for (int m = 0; m <= weights.m_max; ++m) y.block(m) = from_complex(out[m], m);
  return y;
}

std::vector<So2Features> so2_tp_contract_vjp(const std::vector<So2Features>& xs,
                                             const So2TpWeights& weights, const So2Features& gout,
                                             So2TpWeights* gweights) {
  const auto z = complex_operands(xs, weights, "so2_tp_contract_vjp");
  const IrrepsLayout layout = weights.layout();
  require_layout(gout.layout(), layout, "so2_tp_contract_vjp gradient");
  const Eigen::Index C = weights.channels;
  std::vector<Eigen::VectorXcd> g_out;
  for (int m = 0; m <= weights.m_max; ++m) g_out.push_back(to_complex(gout.block(m), m));
  std::vector<std::vector<Eigen::VectorXcd>> gz(
      xs.size(), std::vector<Eigen::VectorXcd>(weights.m_max + 1, Eigen::VectorXcd::Zero(C)));

  std::vector<Eigen::VectorXcd> accs(weights.v);
  std::vector<int> acc_orders(weights.v);
  for (std::size_t p = 0; p < weights.paths.size(); ++p) {
    const So2TpPath& path = weights.paths[p];
    acc_orders[0] = path.orders[0];
    accs[0] = z[0][path.orders[0]];
    for (int k = 1; k < weights.v; ++k) {
      const int m = path.orders[k];
      const Step s = step_kind(acc_orders[k - 1], m, path.signs[k]);
      accs[k].resize(C);
      for (Eigen::Index c = 0; c < C; ++c) accs[k][c] = apply_step(s, accs[k - 1][c], z[k][m][c]);
      acc_orders[k] = step_order(acc_orders[k - 1], m, path.signs[k]);
    }
    const int mo = acc_orders[weights.v - 1];
    Eigen::VectorXcd g(C);
    for (Eigen::Index c = 0; c < C; ++c) {
      const cd go = g_out[mo][c];
      if (gweights != nullptr)
        gweights->w(p, c) += (std::conj(go) * accs[weights.v - 1][c]).real();
      g[c] = weights.w(p, c) * go;
    }
    for (int k = weights.v - 1; k >= 1; --k) {
      const int m = path.orders[k];
      const Step s = step_kind(acc_orders[k - 1], m, path.signs[k]);
      for (Eigen::Index c = 0; c < C; ++c) {
        const auto [ga, gb] = step_grad(s, accs[k - 1][c], z[k][m][c], g[c]);
        gz[k][m][c] += project(gb, m);
        g[c] = project(ga, acc_orders[k - 1]);
      }
    }
    gz[0][path.orders[0]] += g;
  }

  std::vector<So2Features> gx;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    So2Features gk(layout);
    for (int m = 0; m <= weights.m_max; ++m) gk.block(m) = from_complex(gz[k][m], m);
    gx.push_back(std::move(gk));
  }
  return gx;
}

// ---------------------------------------------------------------------------
// FFN
// ---------------------------------------------------------------------------

So2Ffn So2Ffn::create(const IrrepsLayout& io, RandomStream& rng) {
  std::vector<IrrepEntry> doubled = io.entries();
  for (auto& e : doubled) e.multiplicity *= 2;
  const IrrepsLayout hidden(IrrepKind::SO2, doubled);
  So2Ffn f;
  RandomStream r1 = rng.split("lin1"), rg = rng.split("gate"), r2 = rng.split("lin2");
  f.lin1 = So2LinearWeights::random(hidden, hidden, r1);
  f.gate = So2Gate::create(hidden, hidden.multiplicity(0), rg);
  f.lin2 = So2LinearWeights::random(hidden, io, r2);
  return f;
}

So2Ffn So2Ffn::zeros_like() const {
  So2Ffn z;
  z.lin1 = lin1.zeros_like();
  z.gate = gate.zeros_like();
  z.lin2 = lin2.zeros_like();
  return z;
}

void So2Ffn::visit(const std::string& prefix, const ParamVisitor& f) {
  lin1.visit(prefix + ".lin1", f);
  gate.visit(prefix + ".gate", f);
  lin2.visit(prefix + ".lin2", f);
}

So2Features so2_ffn(const So2Features& mi, const So2Features& mj, const So2Ffn& ffn,
                    OpCounter* counter) {
  require_layout(mi.layout(), mj.layout(), "so2_ffn");
  const So2Features a = so2_linear(concat_channels(mi, mj), ffn.lin1, counter);
  return so2_linear(so2_gate(a, ffn.gate), ffn.lin2, counter);
}

std::pair<So2Features, So2Features> so2_ffn_vjp(const So2Features& mi, const So2Features& mj,
                                                const So2Ffn& ffn, const So2Features& gout,
                                                So2Ffn* gffn) {
  require_layout(mi.layout(), mj.layout(), "so2_ffn_vjp");
  const So2Features c = concat_channels(mi, mj);
  const So2Features a = so2_linear(c, ffn.lin1);
  const So2Features b = so2_gate(a, ffn.gate);
  const So2Features gb = so2_linear_vjp(b, ffn.lin2, gout, gffn ? &gffn->lin2 : nullptr);
  const So2Features ga = so2_gate_vjp(a, ffn.gate, gb, gffn ? &gffn->gate : nullptr);
  const So2Features gc = so2_linear_vjp(c, ffn.lin1, ga, gffn ? &gffn->lin1 : nullptr);
  return split_channels(gc, mi.layout(), mj.layout());
}

}  // namespace so2frames

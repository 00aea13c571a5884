#include "so2frames/so3_layers.hpp"

#include "so2frames/so2_ops.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace so2frames {

namespace {

void require_layout(const IrrepsLayout& got, const IrrepsLayout& want, const char* what) {
  if (!(got == want))
    throw LayoutError(std::string(what) + ": layout " + got.to_string() + ", expected " +
                      want.to_string());
}

}  // namespace

// ---------------------------------------------------------------------------
// Self-interaction
// ---------------------------------------------------------------------------

So3Linear So3Linear::random(const IrrepsLayout& in, const IrrepsLayout& out, RandomStream& rng) {
  So3Linear lin;
  lin.in = in;
  lin.out = out;
  for (const auto& e : out.entries()) {
    const int cin = in.multiplicity(e.index);
    lin.w.push_back(init_uniform(e.multiplicity, cin, cin, rng));
  }
  const int c0 = out.multiplicity(0);
  lin.bias = init_uniform(c0, 1, std::max(1, in.multiplicity(0)), rng);
  return lin;
}

So3Linear So3Linear::zeros_like() const {
  So3Linear z = *this;
  for (auto& m : z.w) m.setZero();
  z.bias.setZero();
  return z;
}

void So3Linear::visit(const std::string& prefix, const ParamVisitor& f) {
  for (std::size_t k = 0; k < out.size(); ++k) f(prefix + ".w_" + std::to_string(out[k].index), w[k]);
  if (bias.rows() > 0) f(prefix + ".bias", bias);
}

So3Features so3_linear(const So3Features& x, const So3Linear& lin) {
  require_layout(x.layout(), lin.in, "so3_linear");
  So3Features y(lin.out);
  for (std::size_t k = 0; k < lin.out.size(); ++k) {
    const int l = lin.out[k].index;
    const int ii = lin.in.find(l);
    if (ii >= 0) y.block(k).noalias() = lin.w[k] * x.block(ii);
    if (l == 0) y.block(k).col(0) += lin.bias.col(0);
  }
  return y;
}

So3Features so3_linear_vjp(const So3Features& x, const So3Linear& lin, const So3Features& gout,
                           So3Linear* glin) {
  require_layout(x.layout(), lin.in, "so3_linear_vjp");
  require_layout(gout.layout(), lin.out, "so3_linear_vjp gradient");
  So3Features gx(lin.in);
  for (std::size_t k = 0; k < lin.out.size(); ++k) {
    const int l = lin.out[k].index;
    const int ii = lin.in.find(l);
    if (ii >= 0) {
      gx.block(ii).noalias() += lin.w[k].transpose() * gout.block(k);
      if (glin != nullptr) glin->w[k].noalias() += gout.block(k) * x.block(ii).transpose();
    }
    if (l == 0 && glin != nullptr) glin->bias.col(0) += gout.block(k).col(0);
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Gate
// ---------------------------------------------------------------------------

So3Gate So3Gate::create(const IrrepsLayout& in, RandomStream& rng) {
  const int c0 = in.multiplicity(0);
  if (c0 < 1) throw LayoutError("so3 gate needs degree-0 channels");
  So3Gate g;
  g.in = in;
  g.out = in;
  g.mlp = Mlp::create({c0, c0, c0, c0 + g.gate_count()}, rng, true);
  return g;
}

So3Gate So3Gate::zeros_like() const {
  So3Gate g = *this;
  g.mlp = mlp.zeros_like();
  return g;
}

int So3Gate::gate_count() const {
  int n = 0;
  for (const auto& e : in.entries())
    if (e.index > 0) n += e.multiplicity;
  return n;
}

So3Features so3_gate(const So3Features& x, const So3Gate& gate) {
  require_layout(x.layout(), gate.in, "so3_gate");
  const Eigen::VectorXd o = mlp_forward(gate.mlp, x.at(0).col(0));
  const int scalars = gate.out.multiplicity(0);
  So3Features y(gate.out);
  y.at(0).col(0) = o.head(scalars);
  int idx = scalars;
  for (std::size_t i = 1; i < x.num_blocks(); ++i)
    for (Eigen::Index c = 0; c < x.block(i).rows(); ++c)
      y.block(i).row(c) = sigmoid(o[idx++]) * x.block(i).row(c);
  return y;
}

So3Features so3_gate_vjp(const So3Features& x, const So3Gate& gate, const So3Features& gout,
                         So3Gate* ggate) {
  require_layout(x.layout(), gate.in, "so3_gate_vjp");
  require_layout(gout.layout(), gate.out, "so3_gate_vjp gradient");
  MlpTape tape;
  const Eigen::VectorXd o = mlp_forward(gate.mlp, x.at(0).col(0), &tape);
  const int scalars = gate.out.multiplicity(0);
  Eigen::VectorXd go(o.size());
  go.head(scalars) = gout.at(0).col(0);
  So3Features gx(gate.in);
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
// Equivariant layer norm
// ---------------------------------------------------------------------------

EquivariantLayerNorm EquivariantLayerNorm::identity(const IrrepsLayout& layout) {
  EquivariantLayerNorm ln;
  ln.layout = layout;
  for (const auto& e : layout.entries()) {
    ln.gain.push_back(Eigen::MatrixXd::Ones(e.multiplicity, 1));
    ln.bias.push_back(Eigen::MatrixXd::Zero(e.multiplicity, 1));
  }
  return ln;
}

EquivariantLayerNorm EquivariantLayerNorm::zeros_like() const {
  EquivariantLayerNorm z = *this;
  for (auto& g : z.gain) g.setZero();
  for (auto& b : z.bias) b.setZero();
  return z;
}

void EquivariantLayerNorm::visit(const std::string& prefix, const ParamVisitor& f) {
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const std::string l = std::to_string(layout[k].index);
    f(prefix + ".gain_" + l, gain[k]);
    f(prefix + ".bias_" + l, bias[k]);
  }
}

So3Features equivariant_layernorm_so3(const So3Features& x, const EquivariantLayerNorm& ln) {
  require_layout(x.layout(), ln.layout, "equivariant_layernorm_so3");
  So3Features y(ln.layout);
  for (std::size_t k = 0; k < ln.layout.size(); ++k)
    y.block(k) = norm_layernorm(x.block(k), ln.gain[k].col(0), ln.bias[k].col(0),
                                ln.layout[k].index == 0, ln.eps);
  return y;
}

So3Features equivariant_layernorm_so3_vjp(const So3Features& x, const EquivariantLayerNorm& ln,
                                          const So3Features& gout, EquivariantLayerNorm* gln) {
  require_layout(x.layout(), ln.layout, "equivariant_layernorm_so3_vjp");
  require_layout(gout.layout(), ln.layout, "equivariant_layernorm_so3_vjp gradient");
  So3Features gx(ln.layout);
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
// Invariants
// ---------------------------------------------------------------------------

Eigen::VectorXd degree_inner_products(const So3Features& hi, const So3Features& hj) {
  require_layout(hj.layout(), hi.layout(), "degree_inner_products");
  Eigen::VectorXd s(hi.layout().channels());
  Eigen::Index p = 0;
  for (std::size_t k = 0; k < hi.num_blocks(); ++k)
    for (Eigen::Index c = 0; c < hi.block(k).rows(); ++c)
      s[p++] = hi.block(k).row(c).dot(hj.block(k).row(c));
  return s;
}

std::pair<So3Features, So3Features> degree_inner_products_vjp(const So3Features& hi,
                                                              const So3Features& hj,
                                                              const Eigen::VectorXd& gout) {
  require_layout(hj.layout(), hi.layout(), "degree_inner_products_vjp");
  So3Features gi(hi.layout()), gj(hj.layout());
  Eigen::Index p = 0;
  for (std::size_t k = 0; k < hi.num_blocks(); ++k)
    for (Eigen::Index c = 0; c < hi.block(k).rows(); ++c) {
      gi.block(k).row(c) = gout[p] * hj.block(k).row(c);
      gj.block(k).row(c) = gout[p] * hi.block(k).row(c);
      ++p;
    }
  return {std::move(gi), std::move(gj)};
}

double RadialBasis::envelope(double r) const {
  if (r >= cutoff) return 0.0;
  return 0.5 * (std::cos(std::numbers::pi * r / cutoff) + 1.0);
}

Eigen::VectorXd RadialBasis::operator()(double r) const {
  if (!(r > 0.0) || !(r <= cutoff))
    throw std::invalid_argument("rbf: distance " + std::to_string(r) + " outside (0, cutoff]");
  const double env = envelope(r);
  const double w = width();
  Eigen::VectorXd out(count);
  for (int k = 0; k < count; ++k) {
    const double t = (r - center(k)) / w;
    out[k] = env * std::exp(-0.5 * t * t);
  }
  return out;
}

PairEmbed PairEmbed::create(int s_dim, int rbf_dim, int width, int out_dim, RandomStream& rng) {
  PairEmbed p;
  RandomStream rs = rng.split("lin_s"), rr = rng.split("lin_rbf"), rm = rng.split("mlp");
  p.lin_s = Mlp::create({s_dim, width}, rs);
  p.lin_rbf = Mlp::create({rbf_dim, width}, rr);
  p.mlp = Mlp::create({width, width, out_dim}, rm);
  return p;
}

PairEmbed PairEmbed::zeros_like() const {
  return PairEmbed{lin_s.zeros_like(), lin_rbf.zeros_like(), mlp.zeros_like()};
}

void PairEmbed::visit(const std::string& prefix, const ParamVisitor& f) {
  lin_s.visit(prefix + ".lin_s", f);
  lin_rbf.visit(prefix + ".lin_rbf", f);
  mlp.visit(prefix + ".mlp", f);
}

Eigen::VectorXd pair_embed(const Eigen::VectorXd& s, const Eigen::VectorXd& rbf, const PairEmbed& p) {
  const Eigen::VectorXd a = mlp_forward(p.lin_s, s);
  const Eigen::VectorXd b = mlp_forward(p.lin_rbf, rbf);
  return mlp_forward(p.mlp, a.cwiseProduct(b));
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> pair_embed_vjp(const Eigen::VectorXd& s,
                                                           const Eigen::VectorXd& rbf,
                                                           const PairEmbed& p,
                                                           const Eigen::VectorXd& gout,
                                                           PairEmbed* gp) {
  MlpTape ta, tb, tm;
  const Eigen::VectorXd a = mlp_forward(p.lin_s, s, &ta);
  const Eigen::VectorXd b = mlp_forward(p.lin_rbf, rbf, &tb);
  mlp_forward(p.mlp, a.cwiseProduct(b), &tm);
  const Eigen::VectorXd gab = mlp_vjp(p.mlp, tm, gout, gp ? &gp->mlp : nullptr);
  Eigen::VectorXd gs = mlp_vjp(p.lin_s, ta, gab.cwiseProduct(b), gp ? &gp->lin_s : nullptr);
  Eigen::VectorXd gr = mlp_vjp(p.lin_rbf, tb, gab.cwiseProduct(a), gp ? &gp->lin_rbf : nullptr);
  return {std::move(gs), std::move(gr)};
}

NodeEmbedding NodeEmbedding::random(const std::vector<int>& elements, int width, RandomStream& rng) {
  NodeEmbedding e;
  e.elements = elements;
  // Embedding rows act like one-hot inputs, so fan-in is 1.
  e.table = init_uniform(static_cast<Eigen::Index>(elements.size()), width, 1, rng);
  return e;
}

NodeEmbedding NodeEmbedding::zeros_like() const {
  NodeEmbedding z = *this;
  z.table.setZero();
  return z;
}

int NodeEmbedding::row(int atomic_number) const {
  for (std::size_t i = 0; i < elements.size(); ++i)
    if (elements[i] == atomic_number) return static_cast<int>(i);
  throw std::invalid_argument("unknown element Z=" + std::to_string(atomic_number));
}

So3Features node_embed(int atomic_number, const NodeEmbedding& emb, const IrrepsLayout& layout) {
  if (layout.multiplicity(0) != emb.table.cols())
    throw LayoutError("node_embed: degree-0 width does not match the embedding table");
  So3Features h(layout);
  h.at(0).col(0) = emb.table.row(emb.row(atomic_number)).transpose();
  return h;
}

}  // namespace so2frames

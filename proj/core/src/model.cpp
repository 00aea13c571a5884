#include "so2frames/model.hpp"

#include "so2frames/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace so2frames {

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

MoleculeGraph MoleculeGraph::build(std::vector<int> atomic_numbers,
                                   std::vector<Eigen::Vector3d> positions, double cutoff) {
  if (atomic_numbers.size() != positions.size())
    throw std::invalid_argument("MoleculeGraph: one position per atom required");
  if (!(cutoff > 0.0)) throw std::invalid_argument("MoleculeGraph: cutoff must be positive");
  MoleculeGraph g;
  g.z_ = std::move(atomic_numbers);
  g.pos_ = std::move(positions);
  g.cutoff_ = cutoff;
  for (const auto& p : g.pos_)
    if (!p.allFinite()) throw std::invalid_argument("MoleculeGraph: non-finite position");
  const int n = static_cast<int>(g.z_.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const Eigen::Vector3d d = g.pos_[j] - g.pos_[i];
      const double r = d.norm();
      if (r == 0.0)
        throw std::invalid_argument("MoleculeGraph: atoms " + std::to_string(i) + " and " +
                                    std::to_string(j) + " coincide");
      if (r < cutoff) g.edges_.push_back(GraphEdge{i, j, r, d / r});
    }
  return g;
}

int MoleculeGraph::find_edge(int i, int j) const {
  for (std::size_t e = 0; e < edges_.size(); ++e)
    if (edges_[e].i == i && edges_[e].j == j) return static_cast<int>(e);
  return -1;
}

int MoleculeGraph::nearest_edge(int i) const {
  int best = -1;
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    if (edges_[e].i != i) continue;
    if (best < 0 || edges_[e].distance < edges_[best].distance) best = static_cast<int>(e);
  }
  return best;
}

MoleculeGraph MoleculeGraph::transformed(const Rotation& g, const Eigen::Vector3d& shift) const {
  std::vector<Eigen::Vector3d> pos;
  for (const auto& p : pos_) pos.push_back(g.apply(p) + shift);
  return build(z_, std::move(pos), cutoff_);
}

MoleculeGraph MoleculeGraph::permuted(const std::vector<int>& perm) const {
  if (perm.size() != z_.size()) throw std::invalid_argument("permuted: permutation size mismatch");
  std::vector<int> z;
  std::vector<Eigen::Vector3d> pos;
  for (int k : perm) {
    z.push_back(z_.at(k));
    pos.push_back(pos_.at(k));
  }
  return build(std::move(z), std::move(pos), cutoff_);
}

// ---------------------------------------------------------------------------
// Config and parameters
// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
  const IrrepsLayout h = hidden_layout();
  if (h.kind() != IrrepKind::SO3) throw std::invalid_argument("hidden layout must be SO(3)");
  const int L = h.max_index();
  if (L > kDegreeCap) throw std::invalid_argument("hidden layout exceeds the degree cap");
  for (int l = 0; l <= L; ++l)
    if (h.multiplicity(l) < 1)
      throw std::invalid_argument("hidden layout must carry every degree 0.." + std::to_string(L));
  int orbital_max = 0;
  for (int z : elements) {
    const auto it = basis.orbitals.find(z);
    if (it == basis.orbitals.end())
      throw std::invalid_argument("element Z=" + std::to_string(z) + " missing from the basis");
    for (int l : it->second) orbital_max = std::max(orbital_max, l);
  }
  if (2 * orbital_max > L)
    throw std::invalid_argument("hidden l_max " + std::to_string(L) +
                                " cannot couple orbital degree " + std::to_string(orbital_max));
  if (m_max < 0 || m_max > L) throw std::invalid_argument("m_max must lie in [0, l_max]");
  if (v < 2) throw std::invalid_argument("v must be >= 2");
  if (tp_channels < 1) throw std::invalid_argument("tp_channels must be >= 1");
  if (layers < 0) throw std::invalid_argument("layers must be >= 0");
  if (!(cutoff > 0.0)) throw std::invalid_argument("cutoff must be positive");
  if (rbf_count < 1 || embed_width < 1) throw std::invalid_argument("rbf_count and embed_width must be >= 1");
}

LayerParams LayerParams::zeros_like() const {
  LayerParams z;
  z.si_in = si_in.zeros_like();
  z.gate_in = gate_in.zeros_like();
  z.msg_linear = msg_linear.zeros_like();
  z.msg_gate = msg_gate.zeros_like();
  z.msg_scale = msg_scale.zeros_like();
  z.si_out = si_out.zeros_like();
  z.gate_out = gate_out.zeros_like();
  z.norm = norm.zeros_like();
  for (const auto& w : tp_in) z.tp_in.push_back(w.zeros_like());
  z.tp = tp.zeros_like();
  z.tp_out = tp_out.zeros_like();
  z.ffn = ffn.zeros_like();
  z.pair_norm = pair_norm.zeros_like();
  return z;
}

void LayerParams::visit(const std::string& prefix, const ParamVisitor& f) {
  si_in.visit(prefix + ".si_in", f);
  gate_in.visit(prefix + ".gate_in", f);
  msg_linear.visit(prefix + ".msg_linear", f);
  msg_gate.visit(prefix + ".msg_gate", f);
  msg_scale.visit(prefix + ".msg_scale", f);
  si_out.visit(prefix + ".si_out", f);
  gate_out.visit(prefix + ".gate_out", f);
  norm.visit(prefix + ".norm", f);
  for (std::size_t k = 0; k < tp_in.size(); ++k) tp_in[k].visit(prefix + ".tp_in" + std::to_string(k), f);
  tp.visit(prefix + ".tp", f);
  tp_out.visit(prefix + ".tp_out", f);
  ffn.visit(prefix + ".ffn", f);
  pair_norm.visit(prefix + ".pair_norm", f);
}

ModelParams ModelParams::init(const ModelConfig& config) {
  config.validate();
  const IrrepsLayout hidden = config.hidden_layout();
  const IrrepsLayout local = regrouped_layout(hidden);
  const IrrepsLayout tp_layout = IrrepsLayout::uniform(IrrepKind::SO2, config.tp_channels, config.m_max);
  RandomStream root(config.seed, "model");

  ModelParams p;
  p.config = config;
  RandomStream re = root.split("embed");
  p.embed = NodeEmbedding::random(config.elements, hidden.multiplicity(0), re);
  RandomStream rp = root.split("pair_init");
  p.pair_init = PairEmbed::create(hidden.channels(), config.rbf_count, config.embed_width,
                                  local.multiplicity(0), rp);
  for (int k = 0; k < config.layers; ++k) {
    RandomStream rl = root.split("layer" + std::to_string(k));
    LayerParams lp;
    RandomStream r1 = rl.split("si_in"), r2 = rl.split("gate_in"), r3 = rl.split("msg_linear"),
                 r4 = rl.split("msg_gate"), r5 = rl.split("msg_scale"), r6 = rl.split("si_out"),
                 r7 = rl.split("gate_out"), r8 = rl.split("tp"), r9 = rl.split("tp_out"),
                 r10 = rl.split("ffn");
    lp.si_in = So3Linear::random(hidden, hidden, r1);
    lp.gate_in = So3Gate::create(hidden, r2);
    lp.msg_linear = So2LinearWeights::random(local, local, r3);
    lp.msg_gate = So2Gate::create(local, local.multiplicity(0), r4);
    lp.msg_scale = PairEmbed::create(hidden.channels(), config.rbf_count, config.embed_width,
                                     hidden.channels(), r5);
    lp.si_out = So3Linear::random(hidden, hidden, r6);
    lp.gate_out = So3Gate::create(hidden, r7);
    lp.norm = EquivariantLayerNorm::identity(hidden);
    for (int s = 0; s < config.v; ++s) {
      RandomStream rs = rl.split("tp_in" + std::to_string(s));
      lp.tp_in.push_back(So2LinearWeights::random(local, tp_layout, rs));
    }
    lp.tp = So2TpWeights::random(config.m_max, config.v, config.tp_channels, r8);
    lp.tp_out = So2LinearWeights::random(tp_layout, local, r9);
    lp.ffn = So2Ffn::create(local, r10);
    lp.pair_norm = So2LayerNorm::identity(local);
    p.layers.push_back(std::move(lp));
  }
  RandomStream rx = root.split("expansion");
  p.expansion = ExpansionSet::random(config.elements, config.basis, hidden, rx);
  return p;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  z.config = config;
  z.embed = embed.zeros_like();
  z.pair_init = pair_init.zeros_like();
  for (const auto& l : layers) z.layers.push_back(l.zeros_like());
  z.expansion = expansion.zeros_like();
  return z;
}

void ModelParams::visit(const ParamVisitor& f) {
  embed.visit("embed", f);
  pair_init.visit("pair_init", f);
  for (std::size_t k = 0; k < layers.size(); ++k) layers[k].visit("layer" + std::to_string(k), f);
  expansion.visit("expansion", f);
}

std::size_t ModelParams::parameter_count() {
  std::size_t n = 0;
  visit([&](const std::string&, Eigen::MatrixXd& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

GraphGeometry GraphGeometry::build(const MoleculeGraph& graph, const ModelConfig& config) {
  const int L = config.l_max();
  const RadialBasis rbf{config.cutoff, config.rbf_count};
  GraphGeometry geo;
  for (const auto& e : graph.edges()) {
    geo.edge_frames.push_back(frame_from_direction(e.direction, L));
    geo.rbf.push_back(rbf(e.distance));
  }
  for (std::size_t i = 0; i < graph.num_atoms(); ++i) {
    const int e = graph.nearest_edge(static_cast<int>(i));
    if (e < 0)
      geo.node_frames.emplace_back(Eigen::Vector3d(kTargetAxis), Rotation::identity(), L);
    else
      geo.node_frames.push_back(geo.edge_frames[e]);
  }
  return geo;
}

std::vector<AssemblyEdge> GraphGeometry::assembly_edges(const MoleculeGraph& graph) const {
  std::vector<AssemblyEdge> out;
  for (std::size_t e = 0; e < graph.edges().size(); ++e)
    out.push_back(AssemblyEdge{graph.edges()[e].i, graph.edges()[e].j, &edge_frames[e]});
  return out;
}

// ---------------------------------------------------------------------------
// Forward with tape
// ---------------------------------------------------------------------------

namespace {

// Multiplies every (degree, channel) vector by its own scalar; scalars are
// ordered degrees ascending, channels ascending.
So3Features scale_channels(const So3Features& x, const Eigen::VectorXd& q) {
  So3Features y = x;
  Eigen::Index p = 0;
  for (std::size_t k = 0; k < y.num_blocks(); ++k)
    for (Eigen::Index c = 0; c < y.block(k).rows(); ++c) y.block(k).row(c) *= q[p++];
  return y;
}

Eigen::VectorXd scale_channels_qgrad(const So3Features& x, const So3Features& g) {
  Eigen::VectorXd gq(x.layout().channels());
  Eigen::Index p = 0;
  for (std::size_t k = 0; k < x.num_blocks(); ++k)
    for (Eigen::Index c = 0; c < x.block(k).rows(); ++c) gq[p++] = x.block(k).row(c).dot(g.block(k).row(c));
  return gq;
}

struct EdgeTape {
  Eigen::VectorXd s, q;
  So2Features local, lin, gated;
  So3Features back, msg;
};

struct NodeTape {
  So2Features local;
  std::vector<So2Features> slots;
  So2Features tp, out;
};

struct PairTape {
  So2Features mi, mj, sum;
};

struct LayerTape {
  std::vector<So3Features> h_in, a, u, agg, d, h1, h2, h3;
  std::vector<So2Features> x_in;
  std::vector<EdgeTape> edges;
  std::vector<NodeTape> nodes;
  std::vector<PairTape> pairs;
};

struct Tape {
  std::vector<So3Features> h0;
  std::vector<Eigen::VectorXd> s0;
  std::vector<LayerTape> layers;
};

// Parallel unless a counter is attached (counters are not thread-safe).
void for_each(std::size_t n, OpCounter* counter, const std::function<void(std::size_t)>& fn) {
  if (counter != nullptr) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
  } else {
    parallel_for(n, fn);
  }
}

ModelOutput forward_impl(const MoleculeGraph& graph, const GraphGeometry& geo,
                         const ModelParams& params, OpCounter* counter, Tape* tape) {
  const ModelConfig& cfg = params.config;
  const IrrepsLayout hidden = cfg.hidden_layout();
  const IrrepsLayout local = regrouped_layout(hidden);
  const auto& edges = graph.edges();
  const std::size_t n = graph.num_atoms(), E = edges.size();
  const auto& z = graph.atomic_numbers();

  std::vector<So3Features> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = node_embed(z[i], params.embed, hidden);
  std::vector<So2Features> x(E);
  std::vector<Eigen::VectorXd> s0(E);
  for_each(E, counter, [&](std::size_t e) {
    s0[e] = degree_inner_products(h[edges[e].i], h[edges[e].j]);
    x[e] = So2Features(local);
    x[e].at(0).col(0) = pair_embed(s0[e], geo.rbf[e], params.pair_init);
  });
  if (tape != nullptr) {
    tape->h0 = h;
    tape->s0 = s0;
    tape->layers.clear();
  }

  for (const LayerParams& lp : params.layers) {
    LayerTape lt;
    lt.h_in = h;
    lt.x_in = x;
    lt.a.resize(n);
    lt.u.resize(n);
    for_each(n, counter, [&](std::size_t i) {
      lt.a[i] = so3_linear(h[i], lp.si_in);
      lt.u[i] = so3_gate(lt.a[i], lp.gate_in);
    });
    lt.edges.resize(E);
    for_each(E, counter, [&](std::size_t e) {
      const GraphEdge& ed = edges[e];
      const Frame& f = geo.edge_frames[e];
      EdgeTape& et = lt.edges[e];
      et.s = degree_inner_products(h[ed.i], h[ed.j]);
      et.q = pair_embed(et.s, geo.rbf[e], lp.msg_scale);
      et.local = to_local(f, lt.u[ed.j], counter);
      et.lin = so2_linear(et.local, lp.msg_linear, counter);
      et.gated = so2_gate(et.lin, lp.msg_gate);
      et.back = from_local(f, et.gated, hidden, counter);
      et.msg = scale_channels(et.back, et.q);
    });
    lt.agg.assign(n, So3Features(hidden));
    for (std::size_t e = 0; e < E; ++e) lt.agg[edges[e].i] += lt.edges[e].msg;
    lt.d.resize(n);
    lt.h1.resize(n);
    lt.h2.resize(n);
    lt.h3.resize(n);
    lt.nodes.resize(n);
    for_each(n, counter, [&](std::size_t i) {
      lt.d[i] = so3_linear(lt.agg[i], lp.si_out);
      lt.h1[i] = h[i] + so3_gate(lt.d[i], lp.gate_out);
      lt.h2[i] = equivariant_layernorm_so3(lt.h1[i], lp.norm);
      const Frame& f = geo.node_frames[i];
      NodeTape& nt = lt.nodes[i];
      nt.local = to_local(f, lt.h2[i], counter);
      for (const auto& w : lp.tp_in) nt.slots.push_back(so2_linear(nt.local, w, counter));
      nt.tp = so2_tp_contract(nt.slots, lp.tp, counter);
      nt.out = so2_linear(nt.tp, lp.tp_out, counter);
      lt.h3[i] = lt.h2[i] + from_local(f, nt.out, hidden, counter);
    });
    lt.pairs.resize(E);
    std::vector<So2Features> x_next(E);
    for_each(E, counter, [&](std::size_t e) {
      const Frame& f = geo.edge_frames[e];
      PairTape& pt = lt.pairs[e];
      pt.mi = to_local(f, lt.h3[edges[e].i], counter);
      pt.mj = to_local(f, lt.h3[edges[e].j], counter);
      pt.sum = x[e] + so2_ffn(pt.mi, pt.mj, lp.ffn, counter);
      x_next[e] = so2_layernorm(pt.sum, lp.pair_norm);
    });
    h = lt.h3;
    x = std::move(x_next);
    if (tape != nullptr) tape->layers.push_back(std::move(lt));
  }
  return ModelOutput{std::move(h), std::move(x)};
}

void backward_impl(const MoleculeGraph& graph, const GraphGeometry& geo, const ModelParams& params,
                   const Tape& tape, std::vector<So3Features> gh, std::vector<So2Features> gx,
                   ModelParams& grads) {
  const IrrepsLayout hidden = params.config.hidden_layout();
  const auto& edges = graph.edges();
  const std::size_t n = graph.num_atoms(), E = edges.size();

  for (std::size_t k = params.layers.size(); k-- > 0;) {
    const LayerParams& lp = params.layers[k];
    LayerParams& gp = grads.layers[k];
    const LayerTape& lt = tape.layers[k];

    // Off-diagonal track.
    std::vector<So3Features> gh3 = gh;
    std::vector<So2Features> gx_in(E);
    for (std::size_t e = 0; e < E; ++e) {
      const Frame& f = geo.edge_frames[e];
      const PairTape& pt = lt.pairs[e];
      gx_in[e] = so2_layernorm_vjp(pt.sum, lp.pair_norm, gx[e], &gp.pair_norm);
      const auto [gmi, gmj] = so2_ffn_vjp(pt.mi, pt.mj, lp.ffn, gx_in[e], &gp.ffn);
      gh3[edges[e].i] += from_local(f, gmi, hidden);
      gh3[edges[e].j] += from_local(f, gmj, hidden);
    }

    // Node update and layer norm.
    std::vector<So3Features> gh1(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Frame& f = geo.node_frames[i];
      const NodeTape& nt = lt.nodes[i];
      So3Features gh2 = gh3[i];
      const So2Features gout = to_local(f, gh3[i]);
      const So2Features gtp = so2_linear_vjp(nt.tp, lp.tp_out, gout, &gp.tp_out);
      const auto gslots = so2_tp_contract_vjp(nt.slots, lp.tp, gtp, &gp.tp);
      So2Features glocal(nt.local.layout());
      for (std::size_t s = 0; s < lp.tp_in.size(); ++s)
        glocal += so2_linear_vjp(nt.local, lp.tp_in[s], gslots[s], &gp.tp_in[s]);
      gh2 += from_local(f, glocal, hidden);
      gh1[i] = equivariant_layernorm_so3_vjp(lt.h1[i], lp.norm, gh2, &gp.norm);
    }

    // Node-wise interaction.
    std::vector<So3Features> gh_in = gh1;
    std::vector<So3Features> gagg(n);
    for (std::size_t i = 0; i < n; ++i) {
      const So3Features gd = so3_gate_vjp(lt.d[i], lp.gate_out, gh1[i], &gp.gate_out);
      gagg[i] = so3_linear_vjp(lt.agg[i], lp.si_out, gd, &gp.si_out);
    }
    std::vector<So3Features> gu(n, So3Features(hidden));
    for (std::size_t e = 0; e < E; ++e) {
      const GraphEdge& ed = edges[e];
      const Frame& f = geo.edge_frames[e];
      const EdgeTape& et = lt.edges[e];
      const So3Features& gmsg = gagg[ed.i];
      const Eigen::VectorXd gq = scale_channels_qgrad(et.back, gmsg);
      const So3Features gback = scale_channels(gmsg, et.q);
      const So2Features ggated = to_local(f, gback);
      const So2Features glin = so2_gate_vjp(et.lin, lp.msg_gate, ggated, &gp.msg_gate);
      const So2Features glocal = so2_linear_vjp(et.local, lp.msg_linear, glin, &gp.msg_linear);
      gu[ed.j] += from_local(f, glocal, hidden);
      const auto gs = pair_embed_vjp(et.s, geo.rbf[e], lp.msg_scale, gq, &gp.msg_scale).first;
      const auto [ghi, ghj] = degree_inner_products_vjp(lt.h_in[ed.i], lt.h_in[ed.j], gs);
      gh_in[ed.i] += ghi;
      gh_in[ed.j] += ghj;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const So3Features ga = so3_gate_vjp(lt.a[i], lp.gate_in, gu[i], &gp.gate_in);
      gh_in[i] += so3_linear_vjp(lt.h_in[i], lp.si_in, ga, &gp.si_in);
    }
    gh = std::move(gh_in);
    gx = std::move(gx_in);
  }

  // Embeddings.
  for (std::size_t e = 0; e < E; ++e) {
    const Eigen::VectorXd gv = gx[e].at(0).col(0);
    const auto gs = pair_embed_vjp(tape.s0[e], geo.rbf[e], params.pair_init, gv, &grads.pair_init).first;
    const auto [ghi, ghj] = degree_inner_products_vjp(tape.h0[edges[e].i], tape.h0[edges[e].j], gs);
    gh[edges[e].i] += ghi;
    gh[edges[e].j] += ghj;
  }
  const auto& z = graph.atomic_numbers();
  for (std::size_t i = 0; i < n; ++i)
    grads.embed.table.row(params.embed.row(z[i])) += gh[i].at(0).col(0).transpose();
}

}  // namespace

ModelOutput forward(const MoleculeGraph& graph, const ModelParams& params, OpCounter* counter) {
  const GraphGeometry geo = GraphGeometry::build(graph, params.config);
  return forward_impl(graph, geo, params, counter, nullptr);
}

BlockMatrix predict(const MoleculeGraph& graph, const ModelParams& params) {
  const GraphGeometry geo = GraphGeometry::build(graph, params.config);
  const ModelOutput out = forward_impl(graph, geo, params, nullptr, nullptr);
  const OrbitalLayout layout = build_orbital_layout(graph.atomic_numbers(), params.config.basis);
  return assemble(out.node, out.pair, geo.assembly_edges(graph), params.expansion, layout);
}

ModelParams backward(const MoleculeGraph& graph, const ModelParams& params,
                     const std::vector<So3Features>& gnode, const std::vector<So2Features>& gpair) {
  const GraphGeometry geo = GraphGeometry::build(graph, params.config);
  Tape tape;
  forward_impl(graph, geo, params, nullptr, &tape);
  ModelParams grads = params.zeros_like();
  backward_impl(graph, geo, params, tape, gnode, gpair, grads);
  return grads;
}

LossAndGrad mae_loss_and_grad(const MoleculeGraph& graph, const ModelParams& params,
                              const BlockMatrix& target) {
  const GraphGeometry geo = GraphGeometry::build(graph, params.config);
  Tape tape;
  const ModelOutput out = forward_impl(graph, geo, params, nullptr, &tape);
  const OrbitalLayout layout = build_orbital_layout(graph.atomic_numbers(), params.config.basis);
  const auto aedges = geo.assembly_edges(graph);
  LossAndGrad r;
  r.prediction = assemble(out.node, out.pair, aedges, params.expansion, layout);
  if (r.prediction.data.rows() != target.data.rows() || r.prediction.data.cols() != target.data.cols())
    throw std::invalid_argument("mae_loss_and_grad: target dimension does not match the molecule");
  const Eigen::MatrixXd diff = r.prediction.data - target.data;
  const double count = static_cast<double>(diff.size());
  r.loss = diff.cwiseAbs().sum() / count;
  const Eigen::MatrixXd gh =
      diff.unaryExpr([count](double d) { return d > 0.0 ? 1.0 / count : (d < 0.0 ? -1.0 / count : 0.0); });
  r.grad = params.zeros_like();
  const AssemblyGrad ag = assemble_vjp(out.node, out.pair, aedges, params.expansion, layout, gh,
                                       &r.grad.expansion);
  backward_impl(graph, geo, params, tape, ag.node, ag.pair, r.grad);
  return r;
}

FitResult fit_demo(const MoleculeGraph& graph, const BlockMatrix& target, int steps,
                   std::uint64_t seed, const ModelConfig& config, const FitOptions& options) {
  if (steps < 0) throw std::invalid_argument("fit_demo: steps must be >= 0");
  ModelConfig cfg = config;
  cfg.seed = seed;
  FitResult result;
  result.params = ModelParams::init(cfg);

  std::vector<Eigen::MatrixXd*> p;
  result.params.visit([&](const std::string&, Eigen::MatrixXd& m) { p.push_back(&m); });
  std::vector<Eigen::MatrixXd> m1, m2;
  for (auto* q : p) {
    m1.push_back(Eigen::MatrixXd::Zero(q->rows(), q->cols()));
    m2.push_back(Eigen::MatrixXd::Zero(q->rows(), q->cols()));
  }
  for (int step = 0; step < steps; ++step) {
    LossAndGrad lg = mae_loss_and_grad(graph, result.params, target);
    if (!std::isfinite(lg.loss))
      throw std::runtime_error("fit_demo: non-finite loss at step " + std::to_string(step));
    result.losses.push_back(lg.loss);
    std::vector<Eigen::MatrixXd*> g;
    lg.grad.visit([&](const std::string&, Eigen::MatrixXd& m) { g.push_back(&m); });
    const double t = step + 1;
    const double c1 = 1.0 - std::pow(options.beta1, t);
    const double c2 = 1.0 - std::pow(options.beta2, t);
    for (std::size_t k = 0; k < p.size(); ++k) {
      m1[k] = options.beta1 * m1[k] + (1.0 - options.beta1) * *g[k];
      m2[k] = options.beta2 * m2[k] + (1.0 - options.beta2) * g[k]->cwiseProduct(*g[k]);
      *p[k] -= (options.learning_rate * (m1[k] / c1).array() /
                ((m2[k] / c2).array().sqrt() + options.adam_eps))
                   .matrix();
    }
  }
  const BlockMatrix final_pred = predict(graph, result.params);
  const double final_loss = (final_pred.data - target.data).cwiseAbs().mean();
  if (!std::isfinite(final_loss)) throw std::runtime_error("fit_demo: non-finite final loss");
  result.losses.push_back(final_loss);
  return result;
}

SyntheticTarget gen_synthetic_target(const MoleculeGraph& graph, std::uint64_t seed,
                                     const ModelConfig& config, bool overlap) {
  ModelConfig cfg = config;
  cfg.seed = mix_seed(seed, "target.h");
  SyntheticTarget t;
  t.h = predict(graph, ModelParams::init(cfg));
  const OrbitalLayout& layout = t.h.layout;
  t.s = BlockMatrix{layout, Eigen::MatrixXd::Identity(layout.dim(), layout.dim())};
  if (overlap) {
    cfg.seed = mix_seed(seed, "target.s");
    BlockMatrix s = predict(graph, ModelParams::init(cfg));
    // The Frobenius norm bounds the spectral radius and, unlike row sums, does
    // not change when the molecule is rotated.
    const double lambda = s.data.norm() + 1.0;
    s.data += lambda * Eigen::MatrixXd::Identity(layout.dim(), layout.dim());
    t.s = std::move(s);
  }
  return t;
}

}  // namespace so2frames

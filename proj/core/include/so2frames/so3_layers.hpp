#pragma once

#include <Eigen/Core>

#include <string>
#include <utility>
#include <vector>

#include "so2frames/irreps.hpp"
#include "so2frames/mlp.hpp"

namespace so2frames {

/// Self-interaction: per-degree channel mixing with a bias on degree 0.
struct So3Linear {
  IrrepsLayout in;
  IrrepsLayout out;
  std::vector<Eigen::MatrixXd> w;  // per out degree: C_out x C_in (C_in = 0 if absent)
  Eigen::MatrixXd bias;            // C_out(0) x 1, or 0 x 1

  static So3Linear random(const IrrepsLayout& in, const IrrepsLayout& out, RandomStream& rng);
  So3Linear zeros_like() const;
  void visit(const std::string& prefix, const ParamVisitor& f);
};

So3Features so3_linear(const So3Features& x, const So3Linear& lin);
So3Features so3_linear_vjp(const So3Features& x, const So3Linear& lin, const So3Features& gout,
                           So3Linear* glin);

/// Gate on the node track: an MLP on the degree-0 channels yields new
/// degree-0 values and one sigmoid gate per channel of every degree l > 0.
struct So3Gate {
  IrrepsLayout in;
  IrrepsLayout out;
  Mlp mlp;

  static So3Gate create(const IrrepsLayout& in, RandomStream& rng);
  So3Gate zeros_like() const;
  int gate_count() const;
  void visit(const std::string& prefix, const ParamVisitor& f) { mlp.visit(prefix + ".mlp", f); }
};

So3Features so3_gate(const So3Features& x, const So3Gate& gate);
So3Features so3_gate_vjp(const So3Features& x, const So3Gate& gate, const So3Features& gout,
                         So3Gate* ggate);

/// Norm-based layer norm per degree (standard layer norm on degree 0); the
/// same kernel as so2_layernorm applied to (channel, degree) vectors. A degree
/// with one channel keeps only its direction (output bias * x / |x|).
struct EquivariantLayerNorm {
  IrrepsLayout layout;
  std::vector<Eigen::MatrixXd> gain;
  std::vector<Eigen::MatrixXd> bias;
  double eps = 1e-8;

  static EquivariantLayerNorm identity(const IrrepsLayout& layout);
  EquivariantLayerNorm zeros_like() const;
  void visit(const std::string& prefix, const ParamVisitor& f);
};

So3Features equivariant_layernorm_so3(const So3Features& x, const EquivariantLayerNorm& ln);
So3Features equivariant_layernorm_so3_vjp(const So3Features& x, const EquivariantLayerNorm& ln,
                                          const So3Features& gout, EquivariantLayerNorm* gln);

/// Channel-wise inner products <h_i^l, h_j^l>, degrees ascending; length
/// layout.channels().
Eigen::VectorXd degree_inner_products(const So3Features& hi, const So3Features& hj);
std::pair<So3Features, So3Features> degree_inner_products_vjp(const So3Features& hi,
                                                              const So3Features& hj,
                                                              const Eigen::VectorXd& gout);

/// Gaussian radial basis with a cosine envelope. Centers cutoff*(k+1)/K for
/// k = 0..K-1, width cutoff/K.
struct RadialBasis {
  double cutoff = 15.0;
  int count = 32;

  double center(int k) const { return cutoff * (k + 1) / count; }
  double width() const { return cutoff / count; }
  double envelope(double r) const;
  /// Throws std::invalid_argument unless 0 < r <= cutoff.
  Eigen::VectorXd operator()(double r) const;
};

/// MLP(Linear(s) * Linear(rbf)), the pair embedding and the message scaling.
struct PairEmbed {
  Mlp lin_s;    // single layer
  Mlp lin_rbf;  // single layer
  Mlp mlp;

  static PairEmbed create(int s_dim, int rbf_dim, int width, int out_dim, RandomStream& rng);
  PairEmbed zeros_like() const;
  void visit(const std::string& prefix, const ParamVisitor& f);
};

Eigen::VectorXd pair_embed(const Eigen::VectorXd& s, const Eigen::VectorXd& rbf, const PairEmbed& p);
/// Gradients with respect to s and rbf.
std::pair<Eigen::VectorXd, Eigen::VectorXd> pair_embed_vjp(const Eigen::VectorXd& s,
                                                           const Eigen::VectorXd& rbf,
                                                           const PairEmbed& p,
                                                           const Eigen::VectorXd& gout,
                                                           PairEmbed* gp);

/// One learned degree-0 row per element.
struct NodeEmbedding {
  std::vector<int> elements;
  Eigen::MatrixXd table;  // elements x C_0

  static NodeEmbedding random(const std::vector<int>& elements, int width, RandomStream& rng);
  NodeEmbedding zeros_like() const;
  /// Row of an element; throws std::invalid_argument when unknown.
  int row(int atomic_number) const;
  void visit(const std::string& prefix, const ParamVisitor& f) { f(prefix + ".table", table); }
};

/// Features of `layout` holding the element's row at degree 0, zero elsewhere.
So3Features node_embed(int atomic_number, const NodeEmbedding& emb, const IrrepsLayout& layout);

}  // namespace so2frames

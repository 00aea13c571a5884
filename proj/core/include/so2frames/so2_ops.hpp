#pragma once

#include <Eigen/Core>

#include <string>
#include <utility>
#include <vector>

#include "so2frames/counter.hpp"
#include "so2frames/irreps.hpp"
#include "so2frames/mlp.hpp"

namespace so2frames {

// Every op below has a forward function and a `_vjp` companion. The VJP takes
// the forward inputs (the tape is the inputs themselves; intermediates are
// recomputed), returns input gradients, and adds parameter gradients into an
// optional accumulator of the parameter type.

// ---------------------------------------------------------------------------
// SO(2) Linear
// ---------------------------------------------------------------------------

/// Per-order complex weights. Entry k belongs to out[k]. For m > 0 the order
/// acts as (w1 + i w2) on x_{+m} + i x_{-m}; for m = 0 only w1 is used and w2
/// is 0 x 0. An output order missing from the input layout gets C_out x 0
/// matrices and produces zeros; input orders missing from the output are dropped.
struct So2LinearWeights {
  IrrepsLayout in;
  IrrepsLayout out;
  std::vector<Eigen::MatrixXd> w1;
  std::vector<Eigen::MatrixXd> w2;

  static So2LinearWeights zeros(const IrrepsLayout& in, const IrrepsLayout& out);
  static So2LinearWeights random(const IrrepsLayout& in, const IrrepsLayout& out, RandomStream& rng);
  So2LinearWeights zeros_like() const { return zeros(in, out); }
  void visit(const std::string& prefix, const ParamVisitor& f);
};

So2Features so2_linear(const So2Features& x, const So2LinearWeights& w, OpCounter* counter = nullptr);
So2Features so2_linear_vjp(const So2Features& x, const So2LinearWeights& w, const So2Features& gout,
                           So2LinearWeights* gw);

// ---------------------------------------------------------------------------
// SO(2) Gate
// ---------------------------------------------------------------------------

/// MLP on every m = 0 channel. Its output is the new m = 0 block followed by
/// one gate logit per m > 0 channel (orders ascending, channels ascending).
struct So2Gate {
  IrrepsLayout in;
  IrrepsLayout out;  // in, with the m = 0 multiplicity replaced
  Mlp mlp;

  /// Two SiLU hidden layers of width = input m = 0 channel count; final bias 0.
  static So2Gate create(const IrrepsLayout& in, int out_scalars, RandomStream& rng);
  So2Gate zeros_like() const;
  int gate_count() const;
  void visit(const std::string& prefix, const ParamVisitor& f) { mlp.visit(prefix + ".mlp", f); }
};

So2Features so2_gate(const So2Features& x, const So2Gate& gate);
So2Features so2_gate_vjp(const So2Features& x, const So2Gate& gate, const So2Features& gout,
                         So2Gate* ggate);

// ---------------------------------------------------------------------------
// SO(2) LayerNorm
// ---------------------------------------------------------------------------

/// Norm-based layer norm per order. m = 0 is a standard layer norm over
/// channels; m > 0 keeps each channel's direction and replaces its norm n by
/// ((n - mean) / std) * g + b, statistics taken over the channels of the order.
/// eps enters in quadrature: std = sqrt(var + eps^2), n = sqrt(|x|^2 + eps^2).
struct So2LayerNorm {
  IrrepsLayout layout;
  std::vector<Eigen::MatrixXd> gain;  // per order, mult x 1
  std::vector<Eigen::MatrixXd> bias;  // per order, mult x 1
  double eps = 1e-8;

  static So2LayerNorm identity(const IrrepsLayout& layout);
  So2LayerNorm zeros_like() const;
  void visit(const std::string& prefix, const ParamVisitor& f);
};

So2Features so2_layernorm(const So2Features& x, const So2LayerNorm& ln);
So2Features so2_layernorm_vjp(const So2Features& x, const So2LayerNorm& ln, const So2Features& gout,
                              So2LayerNorm* gln);

/// Layer-norm kernel shared with the SO(3) variant. Rows of `x` are channels,
/// columns are components of one irrep; `scalar` selects the standard
/// (signed, mean-subtracted) branch. Gains/biases are column vectors.
Eigen::MatrixXd norm_layernorm(const Eigen::MatrixXd& x, const Eigen::VectorXd& gain,
                               const Eigen::VectorXd& bias, bool scalar, double eps);
Eigen::MatrixXd norm_layernorm_vjp(const Eigen::MatrixXd& x, const Eigen::VectorXd& gain,
                                   const Eigen::VectorXd& bias, bool scalar, double eps,
                                   const Eigen::MatrixXd& gout, Eigen::VectorXd* ggain,
                                   Eigen::VectorXd* gbias);

// ---------------------------------------------------------------------------
// SO(2) tensor product
// ---------------------------------------------------------------------------

/// Channel-wise product of an order-m1 block and an order-m2 block.
/// sign +1: order m1 + m2, complex product x1 * x2.
/// sign -1: requires m1 > m2, order m1 - m2, x1 * conj(x2).
/// Throws std::invalid_argument for orders outside [0, m_max] or m1 <= m2 with sign -1.
Eigen::MatrixXd so2_tp_pair(const Eigen::MatrixXd& x1, int m1, const Eigen::MatrixXd& x2, int m2,
                            int sign, int m_max = kDegreeCap, OpCounter* counter = nullptr);
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> so2_tp_pair_vjp(const Eigen::MatrixXd& x1, int m1,
                                                            const Eigen::MatrixXd& x2, int m2,
                                                            int sign, const Eigen::MatrixXd& gout);

/// One v-fold path. The product is chained left to right: acc = x_1, then for
/// k >= 2 acc is combined with x_k. signs[0] is always +1. A -1 step subtracts
/// the smaller order from the larger (conjugating the smaller-order operand);
/// equal orders and steps with an order-0 operand never use -1.
struct So2TpPath {
  std::vector<int> orders;
  std::vector<int> signs;
  int out = 0;
  bool operator==(const So2TpPath&) const = default;
  bool operator<(const So2TpPath& o) const;
};

/// Every valid path with all orders and intermediate orders in [0, m_max],
/// lexicographic in (orders, signs). Throws for v < 2 or m_max < 0.
std::vector<So2TpPath> enumerate_tp_paths(int m_max, int v);

/// Paths with one weight per (path, channel).
struct So2TpWeights {
  int m_max = 0;
  int v = 2;
  int channels = 0;
  std::vector<So2TpPath> paths;
  Eigen::MatrixXd w;  // paths x channels

  static So2TpWeights zeros(int m_max, int v, int channels);
  static So2TpWeights random(int m_max, int v, int channels, RandomStream& rng);
  So2TpWeights zeros_like() const;
  /// Uniform layout of the operands and the result: `channels` at every order 0..m_max.
  IrrepsLayout layout() const;
  void visit(const std::string& prefix, const ParamVisitor& f) { f(prefix + ".w", w); }
};

So2Features so2_tp_contract(const std::vector<So2Features>& xs, const So2TpWeights& weights,
                            OpCounter* counter = nullptr);
std::vector<So2Features> so2_tp_contract_vjp(const std::vector<So2Features>& xs,
                                             const So2TpWeights& weights, const So2Features& gout,
                                             So2TpWeights* gweights);

// ---------------------------------------------------------------------------
// Off-diagonal FFN: Linear(Gate(Linear(m_i || m_j)))
// ---------------------------------------------------------------------------

struct So2Ffn {
  So2LinearWeights lin1;
  So2Gate gate;
  So2LinearWeights lin2;

  /// `io` is the layout of each input and of the output; the hidden layout has
  /// twice its multiplicities.
  static So2Ffn create(const IrrepsLayout& io, RandomStream& rng);
  So2Ffn zeros_like() const;
  void visit(const std::string& prefix, const ParamVisitor& f);
};

So2Features so2_ffn(const So2Features& mi, const So2Features& mj, const So2Ffn& ffn,
                    OpCounter* counter = nullptr);
std::pair<So2Features, So2Features> so2_ffn_vjp(const So2Features& mi, const So2Features& mj,
                                                const So2Ffn& ffn, const So2Features& gout,
                                                So2Ffn* gffn);

}  // namespace so2frames

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "so2frames/cg.hpp"
#include "so2frames/counter.hpp"
#include "so2frames/frame.hpp"
#include "so2frames/hamiltonian.hpp"
#include "so2frames/irreps.hpp"
#include "so2frames/so2_ops.hpp"
#include "so2frames/so3_layers.hpp"

namespace so2frames {

struct GraphEdge {
  int i = 0;
  int j = 0;
  double distance = 0.0;
  Eigen::Vector3d direction;  // (p_j - p_i) / |p_j - p_i|
};

/// Atoms plus every ordered pair closer than the cutoff, sorted by (i, j).
class MoleculeGraph {
 public:
  /// Throws std::invalid_argument for coincident atoms, non-finite positions
  /// or mismatched lengths.
  static MoleculeGraph build(std::vector<int> atomic_numbers, std::vector<Eigen::Vector3d> positions,
                             double cutoff);

  const std::vector<int>& atomic_numbers() const { return z_; }
  const std::vector<Eigen::Vector3d>& positions() const { return pos_; }
  double cutoff() const { return cutoff_; }
  std::size_t num_atoms() const { return z_.size(); }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  /// Edge index of (i, j), or -1.
  int find_edge(int i, int j) const;
  /// Edge to the nearest neighbor of atom i (smallest index on ties), or -1.
  int nearest_edge(int i) const;

  /// Same atoms with positions g p + shift.
  MoleculeGraph transformed(const Rotation& g, const Eigen::Vector3d& shift) const;
  /// Atom k of the result is atom perm[k] of this graph.
  MoleculeGraph permuted(const std::vector<int>& perm) const;

 private:
  std::vector<int> z_;
  std::vector<Eigen::Vector3d> pos_;
  double cutoff_ = 15.0;
  std::vector<GraphEdge> edges_;
};

struct ModelConfig {
  std::string hidden = "8x0e+8x1e+4x2e+4x3e+2x4e";
  int m_max = 4;
  int v = 3;
  int tp_channels = 4;
  int layers = 3;
  double cutoff = 15.0;
  int rbf_count = 32;
  int embed_width = 16;
  std::vector<int> elements = {1, 6, 7, 8, 9};
  BasisConfig basis = BasisConfig::default_basis();
  std::uint64_t seed = 0;

  IrrepsLayout hidden_layout() const { return layout_parse(hidden); }
  /// SO(2) layout of pair features and local messages.
  IrrepsLayout local_layout() const { return regrouped_layout(hidden_layout()); }
  int l_max() const { return hidden_layout().max_index(); }
  /// Throws std::invalid_argument describing the first inconsistency.
  void validate() const;
};

struct LayerParams {
  // Node-wise interaction.
  So3Linear si_in;
  So3Gate gate_in;
  So2LinearWeights msg_linear;
  So2Gate msg_gate;
  PairEmbed msg_scale;
  So3Linear si_out;
  So3Gate gate_out;
  EquivariantLayerNorm norm;
  // Node update.
  std::vector<So2LinearWeights> tp_in;
  So2TpWeights tp;
  So2LinearWeights tp_out;
  // Off-diagonal track.
  So2Ffn ffn;
  So2LayerNorm pair_norm;

  LayerParams zeros_like() const;
  void visit(const std::string& prefix, const ParamVisitor& f);
};

struct ModelParams {
  ModelConfig config;
  NodeEmbedding embed;
  PairEmbed pair_init;
  std::vector<LayerParams> layers;
  ExpansionSet expansion;

  /// Deterministic initialization from config.seed.
  static ModelParams init(const ModelConfig& config);
  ModelParams zeros_like() const;
  void visit(const ParamVisitor& f);
  std::size_t parameter_count();
};

/// Frames and radial features of one graph.
struct GraphGeometry {
  std::vector<Frame> edge_frames;
  std::vector<Frame> node_frames;  // nearest-neighbor frame, identity when isolated
  std::vector<Eigen::VectorXd> rbf;

  static GraphGeometry build(const MoleculeGraph& graph, const ModelConfig& config);
  std::vector<AssemblyEdge> assembly_edges(const MoleculeGraph& graph) const;
};

struct ModelOutput {
  std::vector<So3Features> node;  // global frame
  std::vector<So2Features> pair;  // each in its own edge frame
};

ModelOutput forward(const MoleculeGraph& graph, const ModelParams& params,
                    OpCounter* counter = nullptr);

/// forward followed by assemble.
BlockMatrix predict(const MoleculeGraph& graph, const ModelParams& params);

struct LossAndGrad {
  double loss = 0.0;
  BlockMatrix prediction;
  ModelParams grad;
};

/// Mean absolute error over all matrix entries and its parameter gradient.
LossAndGrad mae_loss_and_grad(const MoleculeGraph& graph, const ModelParams& params,
                              const BlockMatrix& target);

/// Reverse pass for an arbitrary output cotangent (used by the gradient checks).
ModelParams backward(const MoleculeGraph& graph, const ModelParams& params,
                     const std::vector<So3Features>& gnode, const std::vector<So2Features>& gpair);

struct FitOptions {
  double learning_rate = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct FitResult {
  /// losses[k] is the loss before update k; the last entry is the loss after
  /// the final update, so there are steps + 1 entries.
  std::vector<double> losses;
  ModelParams params;
};

/// Adam on the MAE loss from ModelParams::init(config with seed). Throws
/// std::runtime_error when a loss becomes non-finite.
FitResult fit_demo(const MoleculeGraph& graph, const BlockMatrix& target, int steps,
                   std::uint64_t seed, const ModelConfig& config, const FitOptions& options = {});

struct SyntheticTarget {
  BlockMatrix h;
  BlockMatrix s;
};

/// Target from a frozen random-parameter model. S is the identity, or with
/// `overlap` a second frozen model's matrix shifted by its Frobenius norm plus
/// one (eigenvalues >= 1, and the shift is rotation invariant so S stays
/// block-equivariant).
SyntheticTarget gen_synthetic_target(const MoleculeGraph& graph, std::uint64_t seed,
                                     const ModelConfig& config, bool overlap = false);

}  // namespace so2frames

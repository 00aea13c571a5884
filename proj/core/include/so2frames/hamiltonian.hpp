#pragma once

#include <Eigen/Core>

#include <compare>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "so2frames/cg.hpp"
#include "so2frames/frame.hpp"
#include "so2frames/irreps.hpp"
#include "so2frames/rotation.hpp"

namespace so2frames {

/// Element -> ordered orbital degrees.
struct BasisConfig {
  std::map<int, std::vector<int>> orbitals;

  /// H -> [0, 0, 1]; C, N, O, F -> [0, 0, 0, 1, 1, 2].
  static BasisConfig default_basis();
  int max_degree() const;
};

class OrbitalLayout {
 public:
  OrbitalLayout() = default;
  OrbitalLayout(std::vector<int> atomic_numbers, std::vector<std::vector<int>> orbitals);

  const std::vector<int>& atomic_numbers() const { return atomic_numbers_; }
  std::size_t num_atoms() const { return orbitals_.size(); }
  const std::vector<int>& orbitals(std::size_t atom) const { return orbitals_[atom]; }
  /// First row of orbital s of an atom.
  int offset(std::size_t atom, std::size_t s) const { return offsets_[atom][s]; }
  int atom_offset(std::size_t atom) const { return atom_offsets_[atom]; }
  int atom_dim(std::size_t atom) const { return atom_offsets_[atom + 1] - atom_offsets_[atom]; }
  /// Atom owning a matrix row.
  int atom_of_row(int row) const;
  int dim() const { return atom_offsets_.empty() ? 0 : atom_offsets_.back(); }

  bool operator==(const OrbitalLayout& o) const {
    return atomic_numbers_ == o.atomic_numbers_ && orbitals_ == o.orbitals_;
  }

 private:
  std::vector<int> atomic_numbers_;
  std::vector<std::vector<int>> orbitals_;
  std::vector<std::vector<int>> offsets_;
  std::vector<int> atom_offsets_;
};

/// Throws std::invalid_argument for an element missing from the basis.
OrbitalLayout build_orbital_layout(const std::vector<int>& atomic_numbers, const BasisConfig& basis);

struct BlockMatrix {
  OrbitalLayout layout;
  Eigen::MatrixXd data;

  static BlockMatrix zeros(const OrbitalLayout& layout);
  /// Sub-block of orbitals (i, s) x (j, t).
  Eigen::Block<Eigen::MatrixXd> block(std::size_t i, std::size_t s, std::size_t j, std::size_t t);
  Eigen::Block<const Eigen::MatrixXd> block(std::size_t i, std::size_t s, std::size_t j,
                                            std::size_t t) const;
};

/// Block-diagonal Wigner matrix over all orbitals of a layout.
Eigen::MatrixXd orbital_wigner(const OrbitalLayout& layout, const Rotation& g);

/// Active block rotation: every (s, t) sub-block becomes D^{l_s}(g) B D^{l_t}(g)^T,
/// i.e. the matrix an equivariant model predicts for the rotated molecule.
BlockMatrix block_rotate(const BlockMatrix& h, const Rotation& g);

/// Key of one expansion: (Z_i, orbital s) x (Z_j, orbital t). Diagonal keys
/// have Z_i == Z_j and refer to the same atom.
struct ExpansionKey {
  int zi = 0;
  int s = 0;
  int zj = 0;
  int t = 0;
  auto operator<=>(const ExpansionKey&) const = default;
  std::string name() const;
};

struct ExpansionSet {
  std::map<ExpansionKey, ExpansionWeights> diag;
  std::map<ExpansionKey, ExpansionWeights> offdiag;

  /// Weights for every element pair of `elements` and every orbital pair,
  /// sized for `features` (one weight per channel at each degree needed).
  static ExpansionSet random(const std::vector<int>& elements, const BasisConfig& basis,
                             const IrrepsLayout& features, RandomStream& rng);
  ExpansionSet zeros_like() const;
  void visit(const std::string& prefix, const ParamVisitor& f);
};

/// Edge of an assembly: pair features of (i, j) expressed in `frame`.
struct AssemblyEdge {
  int i = 0;
  int j = 0;
  const Frame* frame = nullptr;
};

/// Builds H: diagonal atom-blocks from node features, off-diagonal atom-blocks
/// from from_local(pair features), then H <- (H + H^T) / 2. Pairs without an
/// edge stay zero.
BlockMatrix assemble(const std::vector<So3Features>& node, const std::vector<So2Features>& pair,
                     const std::vector<AssemblyEdge>& edges, const ExpansionSet& weights,
                     const OrbitalLayout& layout);

/// Gradients of assemble with respect to node features, pair features and weights.
struct AssemblyGrad {
  std::vector<So3Features> node;
  std::vector<So2Features> pair;
};
AssemblyGrad assemble_vjp(const std::vector<So3Features>& node, const std::vector<So2Features>& pair,
                          const std::vector<AssemblyEdge>& edges, const ExpansionSet& weights,
                          const OrbitalLayout& layout, const Eigen::MatrixXd& gout,
                          ExpansionSet* gweights);

struct Eigensystem {
  Eigen::VectorXd eps;  // ascending
  Eigen::MatrixXd c;    // columns S-orthonormal
};

/// Cyclic Jacobi eigensolver for a symmetric matrix; eigenvalues ascending.
Eigensystem jacobi_eigensolve(const Eigen::MatrixXd& a);

/// H C = S C diag(eps) through S = L L^T and a Jacobi solve of L^-1 H L^-T.
/// Throws std::invalid_argument when S is not positive definite.
Eigensystem generalized_eigensolve(const Eigen::MatrixXd& h, const Eigen::MatrixXd& s);

struct Metrics {
  double mae_diag = 0.0;
  double mae_offdiag = 0.0;
  double mae_all = 0.0;
  double mae_eps = 0.0;
  double cosine_psi = 0.0;
};

/// Throws std::invalid_argument on dimension mismatch or n_occ outside [1, N].
Metrics metrics(const BlockMatrix& h_pred, const BlockMatrix& h_true, const Eigen::MatrixXd& s,
                int n_occ);

/// Mean absolute error over the entries of diagonal atom-blocks, off-diagonal
/// atom-blocks, and all entries.
std::tuple<double, double, double> block_maes(const BlockMatrix& a, const BlockMatrix& b);

}  // namespace so2frames

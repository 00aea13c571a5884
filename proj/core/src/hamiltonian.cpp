#include "so2frames/hamiltonian.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace so2frames {

BasisConfig BasisConfig::default_basis() {
  BasisConfig b;
  b.orbitals[1] = {0, 0, 1};
  for (int z : {6, 7, 8, 9}) b.orbitals[z] = {0, 0, 0, 1, 1, 2};
  return b;
}

int BasisConfig::max_degree() const {
  int l = 0;
  for (const auto& [z, ls] : orbitals)
    for (int v : ls) l = std::max(l, v);
  return l;
}

OrbitalLayout::OrbitalLayout(std::vector<int> atomic_numbers, std::vector<std::vector<int>> orbitals)
    : atomic_numbers_(std::move(atomic_numbers)), orbitals_(std::move(orbitals)) {
  if (atomic_numbers_.size() != orbitals_.size())
    throw std::invalid_argument("OrbitalLayout: one orbital list per atom required");
  int row = 0;
  atom_offsets_.push_back(0);
  for (const auto& ls : orbitals_) {
    std::vector<int> off;
    for (int l : ls) {
      if (l < 0 || l > kDegreeCap) throw std::invalid_argument("OrbitalLayout: orbital degree out of range");
      off.push_back(row);
      row += 2 * l + 1;
    }
    offsets_.push_back(std::move(off));
    atom_offsets_.push_back(row);
  }
}

int OrbitalLayout::atom_of_row(int row) const {
  const auto it = std::upper_bound(atom_offsets_.begin(), atom_offsets_.end(), row);
  return static_cast<int>(it - atom_offsets_.begin()) - 1;
}

OrbitalLayout build_orbital_layout(const std::vector<int>& atomic_numbers, const BasisConfig& basis) {
  std::vector<std::vector<int>> orbitals;
  for (int z : atomic_numbers) {
    const auto it = basis.orbitals.find(z);
    if (it == basis.orbitals.end())
      throw std::invalid_argument("no basis entry for element Z=" + std::to_string(z));
    orbitals.push_back(it->second);
  }
  return OrbitalLayout(atomic_numbers, std::move(orbitals));
}

BlockMatrix BlockMatrix::zeros(const OrbitalLayout& layout) {
  return BlockMatrix{layout, Eigen::MatrixXd::Zero(layout.dim(), layout.dim())};
}

Eigen::Block<Eigen::MatrixXd> BlockMatrix::block(std::size_t i, std::size_t s, std::size_t j,
                                                 std::size_t t) {
  const int ls = layout.orbitals(i)[s], lt = layout.orbitals(j)[t];
  return data.block(layout.offset(i, s), layout.offset(j, t), 2 * ls + 1, 2 * lt + 1);
}

Eigen::Block<const Eigen::MatrixXd> BlockMatrix::block(std::size_t i, std::size_t s, std::size_t j,
                                                       std::size_t t) const {
  const int ls = layout.orbitals(i)[s], lt = layout.orbitals(j)[t];
  return data.block(layout.offset(i, s), layout.offset(j, t), 2 * ls + 1, 2 * lt + 1);
}

Eigen::MatrixXd orbital_wigner(const OrbitalLayout& layout, const Rotation& g) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(layout.dim(), layout.dim());
  std::vector<Eigen::MatrixXd> cache;
  for (int l = 0; l <= kDegreeCap; ++l) cache.push_back(Eigen::MatrixXd());
  for (std::size_t a = 0; a < layout.num_atoms(); ++a)
    for (std::size_t s = 0; s < layout.orbitals(a).size(); ++s) {
      const int l = layout.orbitals(a)[s];
      if (cache[l].size() == 0) cache[l] = wigner_d(l, g);
      const int o = layout.offset(a, s);
      d.block(o, o, 2 * l + 1, 2 * l + 1) = cache[l];
    }
  return d;
}

BlockMatrix block_rotate(const BlockMatrix& h, const Rotation& g) {
  const Eigen::MatrixXd d = orbital_wigner(h.layout, g);
  return BlockMatrix{h.layout, d * h.data * d.transpose()};
}

std::string ExpansionKey::name() const {
  return "Z" + std::to_string(zi) + "s" + std::to_string(s) + "_Z" + std::to_string(zj) + "t" +
         std::to_string(t);
}

namespace {

ExpansionWeights random_expansion(int ls, int lt, const IrrepsLayout& features, RandomStream& rng) {
  ExpansionWeights w(ls + lt + 1);
  for (int l3 = std::abs(ls - lt); l3 <= ls + lt; ++l3) {
    const int c = features.multiplicity(l3);
    if (c > 0) w[l3] = init_uniform(c, 1, c, rng);
  }
  return w;
}

const ExpansionWeights& lookup(const std::map<ExpansionKey, ExpansionWeights>& m,
                               const ExpansionKey& k) {
  const auto it = m.find(k);
  if (it == m.end()) throw std::invalid_argument("no expansion weights for " + k.name());
  return it->second;
}

}  // namespace

ExpansionSet ExpansionSet::random(const std::vector<int>& elements, const BasisConfig& basis,
                                  const IrrepsLayout& features, RandomStream& rng) {
  ExpansionSet set;
  for (int zi : elements)
    for (int zj : elements) {
      const auto& oi = basis.orbitals.at(zi);
      const auto& oj = basis.orbitals.at(zj);
      for (std::size_t s = 0; s < oi.size(); ++s)
        for (std::size_t t = 0; t < oj.size(); ++t) {
          const ExpansionKey key{zi, static_cast<int>(s), zj, static_cast<int>(t)};
          RandomStream ro = rng.split("offdiag." + key.name());
          set.offdiag[key] = random_expansion(oi[s], oj[t], features, ro);
          if (zi == zj) {
            RandomStream rd = rng.split("diag." + key.name());
            set.diag[key] = random_expansion(oi[s], oj[t], features, rd);
          }
        }
    }
  return set;
}

ExpansionSet ExpansionSet::zeros_like() const {
  ExpansionSet z = *this;
  for (auto* m : {&z.diag, &z.offdiag})
    for (auto& [k, w] : *m)
      for (auto& v : w) v.setZero();
  return z;
}

void ExpansionSet::visit(const std::string& prefix, const ParamVisitor& f) {
  for (auto& [k, w] : diag)
    for (std::size_t l = 0; l < w.size(); ++l)
      if (w[l].size() > 0) f(prefix + ".diag." + k.name() + ".l" + std::to_string(l), w[l]);
  for (auto& [k, w] : offdiag)
    for (std::size_t l = 0; l < w.size(); ++l)
      if (w[l].size() > 0) f(prefix + ".offdiag." + k.name() + ".l" + std::to_string(l), w[l]);
}

BlockMatrix assemble(const std::vector<So3Features>& node, const std::vector<So2Features>& pair,
                     const std::vector<AssemblyEdge>& edges, const ExpansionSet& weights,
                     const OrbitalLayout& layout) {
  if (node.size() != layout.num_atoms()) throw LayoutError("assemble: one node feature per atom");
  if (pair.size() != edges.size()) throw LayoutError("assemble: one pair feature per edge");
  BlockMatrix h = BlockMatrix::zeros(layout);
  const auto& z = layout.atomic_numbers();
  for (std::size_t i = 0; i < layout.num_atoms(); ++i) {
    const auto& oi = layout.orbitals(i);
    for (std::size_t s = 0; s < oi.size(); ++s)
      for (std::size_t t = 0; t < oi.size(); ++t) {
        const ExpansionKey key{z[i], static_cast<int>(s), z[i], static_cast<int>(t)};
        h.block(i, s, i, t) = expansion(node[i], lookup(weights.diag, key), oi[s], oi[t]);
      }
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& edge = edges[e];
    if (edge.frame == nullptr) throw std::invalid_argument("assemble: edge without frame");
    const So3Features g = from_local(*edge.frame, pair[e], node[edge.i].layout());
    const auto& oi = layout.orbitals(edge.i);
    const auto& oj = layout.orbitals(edge.j);
    for (std::size_t s = 0; s < oi.size(); ++s)
      for (std::size_t t = 0; t < oj.size(); ++t) {
        const ExpansionKey key{z[edge.i], static_cast<int>(s), z[edge.j], static_cast<int>(t)};
        h.block(edge.i, s, edge.j, t) = expansion(g, lookup(weights.offdiag, key), oi[s], oj[t]);
      }
  }
  h.data = 0.5 * (h.data + h.data.transpose()).eval();
  return h;
}

AssemblyGrad assemble_vjp(const std::vector<So3Features>& node, const std::vector<So2Features>& pair,
                          const std::vector<AssemblyEdge>& edges, const ExpansionSet& weights,
                          const OrbitalLayout& layout, const Eigen::MatrixXd& gout,
                          ExpansionSet* gweights) {
  const Eigen::MatrixXd ga = 0.5 * (gout + gout.transpose());
  BlockMatrix gblocks{layout, ga};
  AssemblyGrad grad;
  const auto& z = layout.atomic_numbers();
  for (std::size_t i = 0; i < layout.num_atoms(); ++i) {
    So3Features gi(node[i].layout());
    const auto& oi = layout.orbitals(i);
    for (std::size_t s = 0; s < oi.size(); ++s)
      for (std::size_t t = 0; t < oi.size(); ++t) {
        const ExpansionKey key{z[i], static_cast<int>(s), z[i], static_cast<int>(t)};
        gi += expansion_vjp(node[i], lookup(weights.diag, key), oi[s], oi[t],
                            gblocks.block(i, s, i, t), gweights ? &gweights->diag.at(key) : nullptr);
      }
    grad.node.push_back(std::move(gi));
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& edge = edges[e];
    const So3Features g = from_local(*edge.frame, pair[e], node[edge.i].layout());
    So3Features gg(g.layout());
    const auto& oi = layout.orbitals(edge.i);
    const auto& oj = layout.orbitals(edge.j);
    for (std::size_t s = 0; s < oi.size(); ++s)
      for (std::size_t t = 0; t < oj.size(); ++t) {
        const ExpansionKey key{z[edge.i], static_cast<int>(s), z[edge.j], static_cast<int>(t)};
        gg += expansion_vjp(g, lookup(weights.offdiag, key), oi[s], oj[t],
                            gblocks.block(edge.i, s, edge.j, t),
                            gweights ? &gweights->offdiag.at(key) : nullptr);
      }
    grad.pair.push_back(to_local(*edge.frame, gg));
  }
  return grad;
}

Eigensystem jacobi_eigensolve(const Eigen::MatrixXd& input) {
  const Eigen::Index n = input.rows();
  if (input.cols() != n) throw std::invalid_argument("jacobi_eigensolve: matrix not square");
  Eigen::MatrixXd a = 0.5 * (input + input.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = a.squaredNorm();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-32 * scale || off == 0.0) break;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return a(x, x) < a(y, y); });
  Eigensystem out;
  out.eps.resize(n);
  out.c.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.eps[k] = a(order[k], order[k]);
    out.c.col(k) = v.col(order[k]);
  }
  return out;
}

Eigensystem generalized_eigensolve(const Eigen::MatrixXd& h, const Eigen::MatrixXd& s) {
  if (h.rows() != h.cols() || s.rows() != s.cols() || h.rows() != s.rows())
    throw std::invalid_argument("generalized_eigensolve: dimension mismatch");
  const Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (s + s.transpose()));
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("generalized_eigensolve: S is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  const auto lt = l.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd y = lt.solve(h);                        // L^-1 H
  Eigen::MatrixXd m = lt.solve(y.transpose()).transpose();      // L^-1 H L^-T
  m = 0.5 * (m + m.transpose()).eval();
  Eigensystem es = jacobi_eigensolve(m);
  es.c = l.transpose().triangularView<Eigen::Upper>().solve(es.c);
  return es;
}

std::tuple<double, double, double> block_maes(const BlockMatrix& a, const BlockMatrix& b) {
  if (a.data.rows() != b.data.rows() || a.data.cols() != b.data.cols())
    throw std::invalid_argument("metrics: dimension mismatch");
  const OrbitalLayout& layout = b.layout;
  double diag = 0.0, off = 0.0;
  std::size_t nd = 0, no = 0;
  const Eigen::Index n = a.data.rows();
  std::vector<int> atom(n);
  for (Eigen::Index r = 0; r < n; ++r) atom[r] = layout.atom_of_row(static_cast<int>(r));
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < n; ++r) {
      const double d = std::abs(a.data(r, c) - b.data(r, c));
      if (atom[r] == atom[c]) {
        diag += d;
        ++nd;
      } else {
        off += d;
        ++no;
      }
    }
  const double all = (diag + off) / static_cast<double>(nd + no);
  return {nd ? diag / nd : 0.0, no ? off / no : 0.0, all};
}

Metrics metrics(const BlockMatrix& h_pred, const BlockMatrix& h_true, const Eigen::MatrixXd& s,
                int n_occ) {
  const Eigen::Index n = h_true.data.rows();
  if (h_pred.data.rows() != n || s.rows() != n || s.cols() != n)
    throw std::invalid_argument("metrics: dimension mismatch");
  if (n_occ < 1 || n_occ > n) throw std::invalid_argument("metrics: n_occ outside [1, N]");
  Metrics m;
  std::tie(m.mae_diag, m.mae_offdiag, m.mae_all) = block_maes(h_pred, h_true);

  const Eigensystem ep = generalized_eigensolve(h_pred.data, s);
  const Eigensystem et = generalized_eigensolve(h_true.data, s);
  m.mae_eps = (ep.eps - et.eps).cwiseAbs().mean();

  double total = 0.0;
  int k = 0;
  while (k < n_occ) {
    int end = k + 1;
    while (end < n_occ && std::abs(et.eps[end] - et.eps[end - 1]) < 1e-8) ++end;
    const int size = end - k;
    if (size == 1) {
      const Eigen::VectorXd a = ep.c.col(k), b = et.c.col(k);
      // sqrt of the product of squares, so that a == b gives exactly 1.
      total += std::abs(a.dot(b)) / std::sqrt(a.squaredNorm() * b.squaredNorm());
    } else if (ep.c.middleCols(k, size) == et.c.middleCols(k, size)) {
      total += size;
    } else {
      // Degenerate cluster: cosines of the principal angles between the spans.
      const Eigen::MatrixXd qa = Eigen::HouseholderQR<Eigen::MatrixXd>(ep.c.middleCols(k, size))
                                     .householderQ() * Eigen::MatrixXd::Identity(n, size);
      const Eigen::MatrixXd qb = Eigen::HouseholderQR<Eigen::MatrixXd>(et.c.middleCols(k, size))
                                     .householderQ() * Eigen::MatrixXd::Identity(n, size);
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(qa.transpose() * qb);
      total += std::min<double>(svd.singularValues().sum(), size);
    }
    k = end;
  }
  m.cosine_psi = total / n_occ;
  return m;
}

}  // namespace so2frames

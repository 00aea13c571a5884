#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "so2frames/cg.hpp"
#include "so2frames/frame.hpp"
#include "so2frames/so2_ops.hpp"

namespace so2frames::cli {

ModelConfig demo_config() {
  ModelConfig c;
  c.hidden = "8x0e+8x1e+4x2e";
  c.m_max = 1;
  c.v = 2;
  c.tp_channels = 2;
  c.layers = 1;
  c.rbf_count = 8;
  c.embed_width = 8;
  c.elements = {1};
  return c;
}

FitOptions demo_fit_options() {
  FitOptions o;
  o.learning_rate = 1.5e-3;
  o.beta1 = 0.995;
  o.beta2 = 0.999;
  return o;
}

std::string hidden_with_lmax(const std::string& hidden, int l_max) {
  if (l_max < 0 || l_max > kDegreeCap) throw std::invalid_argument("--lmax out of range");
  const IrrepsLayout h = layout_parse(hidden);
  std::vector<IrrepEntry> entries;
  int last = 1;
  for (int l = 0; l <= l_max; ++l) {
    if (h.find(l) >= 0) last = h.multiplicity(l);
    entries.push_back(IrrepEntry{l, last});
  }
  return layout_format(IrrepsLayout(IrrepKind::SO3, entries));
}

MoleculeGraph molecule_graph(const Molecule& m, const ModelConfig& config) {
  return MoleculeGraph::build(m.atomic_numbers, m.positions, config.cutoff);
}

// ---------------------------------------------------------------------------

GenResult cmd_gen(const GenOptions& opt, const ModelConfig& config) {
  if (!(opt.min_dist > 0.0)) throw std::invalid_argument("min_dist must be positive");
  if (opt.n_atoms < 1) throw std::invalid_argument("n_atoms must be >= 1");
  if (opt.elements.empty()) throw std::invalid_argument("element list is empty");
  RandomStream rz(opt.seed, "gen.elements");
  RandomStream rp(opt.seed, "gen.positions");
  // Box wide enough for rejection sampling to succeed quickly, small enough
  // that every pair stays well inside the cutoff for a handful of atoms.
  const double side = opt.min_dist * (1.0 + 1.5 * std::cbrt(static_cast<double>(opt.n_atoms)));
  GenResult r;
  Molecule& mol = r.molecule;
  for (int a = 0; a < opt.n_atoms; ++a) {
    mol.atomic_numbers.push_back(opt.elements[rz.below(opt.elements.size())]);
    bool placed = false;
    for (int t = 0; t < opt.max_retries && !placed; ++t) {
      const Eigen::Vector3d p(rp.uniform(0.0, side), rp.uniform(0.0, side), rp.uniform(0.0, side));
      placed = std::all_of(mol.positions.begin(), mol.positions.end(),
                           [&](const Eigen::Vector3d& q) { return (p - q).norm() >= opt.min_dist; });
      if (placed) mol.positions.push_back(p);
    }
    if (!placed)
      throw std::runtime_error("gen: could not place atom " + std::to_string(a) + " after " +
                               std::to_string(opt.max_retries) + " attempts");
  }
  ModelConfig cfg = config;
  cfg.elements = opt.elements;
  const MoleculeGraph g = molecule_graph(mol, cfg);
  const SyntheticTarget t = gen_synthetic_target(g, opt.seed, cfg, opt.overlap);
  r.h = t.h;
  r.s = t.s;
  mol.hamiltonian = t.h.data;
  mol.overlap = t.s.data;

  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mol.positions.size(); ++i)
    for (std::size_t j = i + 1; j < mol.positions.size(); ++j)
      dmin = std::min(dmin, (mol.positions[i] - mol.positions[j]).norm());
  r.report.command = "gen";
  r.report.seed = opt.seed;
  r.report.config = config_to_json(cfg);
  r.report.count("atoms", mol.atomic_numbers.size());
  r.report.count("edges", g.edges().size());
  r.report.count("orbitals", static_cast<std::uint64_t>(t.h.layout.dim()));
  if (mol.positions.size() > 1) {
    Check c{"min_pair_distance", CheckKind::Value, dmin};
    c.lower = opt.min_dist;
    r.report.checks.push_back(c);
  }
  return r;
}

void write_gen_outputs(const GenResult& r, const std::string& out) {
  write_json(out, molecule_to_json(r.molecule));
  std::string stem = out;
  if (stem.size() > 5 && stem.compare(stem.size() - 5, 5, ".json") == 0) stem.resize(stem.size() - 5);
  write_matrix(stem + ".H.json", r.h);
  write_matrix(stem + ".S.json", r.s);
}

// ---------------------------------------------------------------------------

RunReport cmd_check_equiv(const Molecule& mol, const ModelParams& params, const EquivOptions& opt) {
  const ModelConfig& cfg = params.config;
  const IrrepsLayout hidden = cfg.hidden_layout();
  const MoleculeGraph g = molecule_graph(mol, cfg);
  const GraphGeometry geo = GraphGeometry::build(g, cfg);
  const ModelOutput base = forward(g, params);
  const BlockMatrix base_h = predict(g, params);

  RandomStream rng(opt.seed, "check_equiv.rotations");
  double node_dev = 0.0, pair_dev = 0.0, block_dev = 0.0, identity_dev = 0.0;
  std::uint64_t edge_mismatch = 0;
  for (int trial = 0; trial < opt.trials; ++trial) {
    const Rotation rot = trial == 0 ? Rotation::identity() : random_rotation(rng);
    const MoleculeGraph gr = g.transformed(rot, Eigen::Vector3d::Zero());
    if (gr.edges().size() != g.edges().size()) {
      ++edge_mismatch;
      continue;
    }
    const GraphGeometry geo_r = GraphGeometry::build(gr, cfg);
    const ModelOutput out = forward(gr, params);
    double nd = 0.0, pd = 0.0;
    for (std::size_t i = 0; i < g.num_atoms(); ++i)
      nd = std::max(nd, max_abs_diff(out.node[i], rotate_so3(base.node[i], rot)));
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
      const So3Features a = from_local(geo_r.edge_frames[e], out.pair[e], hidden);
      const So3Features b = rotate_so3(from_local(geo.edge_frames[e], base.pair[e], hidden), rot);
      pd = std::max(pd, max_abs_diff(a, b));
    }
    const BlockMatrix hr = predict(gr, params);
    const double bd = (hr.data - block_rotate(base_h, rot).data).cwiseAbs().maxCoeff();
    node_dev = std::max(node_dev, nd);
    pair_dev = std::max(pair_dev, pd);
    block_dev = std::max(block_dev, bd);
    if (trial == 0) identity_dev = std::max({nd, pd, bd});
  }
  RunReport r;
  r.command = "check-equiv";
  r.seed = opt.seed;
  r.config = config_to_json(cfg);
  r.count("trials", static_cast<std::uint64_t>(opt.trials));
  r.count("edge_set_changes", edge_mismatch, 0);
  r.exact_zero("identity_trial_deviation", identity_dev);
  r.max_error("node_track_deviation", node_dev, opt.tolerance);
  r.max_error("pair_track_deviation", pair_dev, opt.tolerance);
  r.max_error("block_deviation", block_dev, opt.tolerance);
  return r;
}

// ---------------------------------------------------------------------------

std::uint64_t brute_force_path_count(int m_max, int v) {
  std::uint64_t n = 0;
  std::vector<int> orders(v, 0);
  while (true) {
    for (int mask = 0; mask < (1 << (v - 1)); ++mask) {
      // Bit k set means the (k+1)-th operand enters conjugated.
      int acc = orders[0];
      bool ok = true;
      for (int k = 1; k < v && ok; ++k) {
        const int m = orders[k];
        if (mask & (1 << (k - 1))) {
          ok = acc > 0 && m > 0 && acc != m;
          acc = std::abs(acc - m);
        } else {
          acc += m;
        }
        ok = ok && acc <= m_max;
      }
      if (ok) ++n;
    }
    int k = 0;
    while (k < v && orders[k] == m_max) orders[k++] = 0;
    if (k == v) break;
    ++orders[k];
  }
  return n;
}

double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fitted_slope: need two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  return sxy / sxx;
}

namespace {

template <class F>
double median_seconds(int repeats, F&& f) {
  std::vector<double> t;
  for (int k = 0; k < std::max(1, repeats); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

template <IrrepKind K>
void fill_normal(Features<K>& x, RandomStream& rng) {
  for (std::size_t b = 0; b < x.num_blocks(); ++b)
    for (Eigen::Index k = 0; k < x.block(b).size(); ++k) x.block(b).data()[k] = rng.normal();
}

}  // namespace

RunReport cmd_bench(const BenchOptions& opt) {
  if (opt.l_min < 1 || opt.l_max > kDegreeCap || opt.l_max - opt.l_min < 1)
    throw std::invalid_argument("bench: L range must be two or more degrees within [1, 8]");
  if (opt.m_min < 1 || opt.m_max - opt.m_min < 1)
    throw std::invalid_argument("bench: M range must be two or more orders starting at 1 or above");
  if (opt.channels < 1) throw std::invalid_argument("bench: channels must be >= 1");
  RunReport r;
  r.command = "bench";
  r.seed = opt.seed;
  r.config = Json{{"l_range", {opt.l_min, opt.l_max}}, {"m_range", {opt.m_min, opt.m_max}},
                  {"channels", opt.channels},         {"repeats", opt.repeats}};
  RandomStream root(opt.seed, "bench");

  std::vector<double> lx, lx1, so3_y, so2_y;
  Json per_l = Json::array();
  for (int L = opt.l_min; L <= opt.l_max; ++L) {
    RandomStream rng = root.split("L" + std::to_string(L));
    const PathWeights pw = PathWeights::random(opt.channels, L, L, L, rng);
    So3Features x(IrrepsLayout::uniform(IrrepKind::SO3, opt.channels, L));
    fill_normal(x, rng);
    const Eigen::Vector3d dir = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
    const So3Features sh = real_spherical_harmonics(L, dir);
    const So2LinearWeights lin = escn_linear_weights(pw);
    const Frame f = frame_from_direction(dir, L);

    OpCounter c_so3, c_so2;
    so3_tensor_product(x, sh, pw, &c_so3);
    from_local(f, so2_linear(to_local(f, x, &c_so2), lin, &c_so2), x.layout(), &c_so2);
    const double t_so3 = median_seconds(opt.repeats, [&] { so3_tensor_product(x, sh, pw); });
    const double t_so2 = median_seconds(opt.repeats, [&] {
      from_local(f, so2_linear(to_local(f, x), lin), x.layout());
    });
    per_l.push_back(Json{{"L", L},
                         {"so3_tp", c_so3[Kernel::So3Tp]},
                         {"frame_rotation", c_so2[Kernel::FrameRotation]},
                         {"so2_linear", c_so2[Kernel::So2Linear]},
                         {"rotation_plus_so2_linear", c_so2.multiply_count}});
    r.timing("median_seconds.so3_tp.L" + std::to_string(L), t_so3);
    r.timing("median_seconds.rotation_so2_linear.L" + std::to_string(L), t_so2);
    lx.push_back(std::log(static_cast<double>(L)));
    lx1.push_back(std::log(static_cast<double>(L + 1)));
    so3_y.push_back(std::log(static_cast<double>(c_so3[Kernel::So3Tp])));
    so2_y.push_back(std::log(static_cast<double>(c_so2.multiply_count)));
  }
  r.data["per_degree"] = per_l;
  // Degree-indexed containers hold L+1 degrees, so counts are polynomials
  // in L+1; the log(L) slopes are kept for reference.
  r.slope("slope.so3_tp", fitted_slope(lx1, so3_y), 5.0, 6.5);
  r.slope("slope.rotation_so2_linear", fitted_slope(lx1, so2_y), 2.5, 3.5);
  r.slope("slope_vs_log_L.so3_tp", fitted_slope(lx, so3_y));
  r.slope("slope_vs_log_L.rotation_so2_linear", fitted_slope(lx, so2_y));

  for (int v : {2, 3})
    for (int m = 0; m <= 4; ++m)
      r.count("paths.v" + std::to_string(v) + ".M" + std::to_string(m), enumerate_tp_paths(m, v).size(),
              brute_force_path_count(m, v));

  std::vector<double> mx, paths2, paths3, tp_y;
  Json per_m = Json::array();
  for (int M = opt.m_min; M <= opt.m_max; ++M) {
    RandomStream rng = root.split("M" + std::to_string(M));
    const So2TpWeights w = So2TpWeights::random(M, 2, opt.channels, rng);
    std::vector<So2Features> xs(2, So2Features(w.layout()));
    for (auto& x : xs) fill_normal(x, rng);
    OpCounter c;
    so2_tp_contract(xs, w, &c);
    const std::size_t p2 = enumerate_tp_paths(M, 2).size(), p3 = enumerate_tp_paths(M, 3).size();
    per_m.push_back(Json{{"M", M}, {"paths_v2", p2}, {"paths_v3", p3}, {"so2_tp_v2", c[Kernel::So2Tp]}});
    r.timing("median_seconds.so2_tp_v2.M" + std::to_string(M),
             median_seconds(opt.repeats, [&] { so2_tp_contract(xs, w); }));
    mx.push_back(std::log(static_cast<double>(M)));
    paths2.push_back(std::log(static_cast<double>(p2)));
    paths3.push_back(std::log(static_cast<double>(p3)));
    tp_y.push_back(std::log(static_cast<double>(c[Kernel::So2Tp])));
  }
  r.data["per_order"] = per_m;
  r.slope("slope.paths_v2", fitted_slope(mx, paths2), 1.7, 2.3);
  r.slope("slope.paths_v3", fitted_slope(mx, paths3));
  r.slope("slope.so2_tp_v2", fitted_slope(mx, tp_y));
  return r;
}

// ---------------------------------------------------------------------------

FitRun cmd_fit(const Molecule& mol, int steps, std::uint64_t seed, const ModelConfig& config,
               const FitOptions& options) {
  if (!mol.hamiltonian) throw IoError("fit: molecule file has no \"hamiltonian\" target");
  const MoleculeGraph g = molecule_graph(mol, config);
  const OrbitalLayout layout = build_orbital_layout(mol.atomic_numbers, config.basis);
  if (mol.hamiltonian->rows() != layout.dim() || mol.hamiltonian->cols() != layout.dim())
    throw IoError("fit: target is " + std::to_string(mol.hamiltonian->rows()) + "x" +
                  std::to_string(mol.hamiltonian->cols()) + " but the basis gives dimension " +
                  std::to_string(layout.dim()));
  const BlockMatrix target{layout, *mol.hamiltonian};

  FitRun run;
  run.fit = fit_demo(g, target, steps, seed, config, options);
  std::ostringstream csv;
  csv.precision(17);
  csv << "step,loss\n";
  for (std::size_t k = 0; k < run.fit.losses.size(); ++k) csv << k << "," << run.fit.losses[k] << "\n";
  run.csv = csv.str();

  RunReport& r = run.report;
  r.command = "fit";
  r.seed = seed;
  r.config = config_to_json(run.fit.params.config);
  r.count("steps", static_cast<std::uint64_t>(steps));
  r.count("parameters", run.fit.params.parameter_count());
  r.value("initial_loss", run.fit.losses.front());
  r.value("final_loss", run.fit.losses.back());
  std::uint64_t nonfinite = 0;
  for (double l : run.fit.losses) nonfinite += std::isfinite(l) ? 0 : 1;
  r.count("non_finite_losses", nonfinite, 0);
  return run;
}

BlockMatrix cmd_predict(const Molecule& mol, const ModelParams& params) {
  return predict(molecule_graph(mol, params.config), params);
}

RunReport cmd_metrics(const BlockMatrix& pred, const BlockMatrix& truth,
                      const std::optional<Eigen::MatrixXd>& s, int n_occ) {
  if (pred.data.rows() != truth.data.rows() || pred.data.cols() != truth.data.cols())
    throw IoError("metrics: matrices have different dimensions");
  if (!(pred.layout == truth.layout)) throw IoError("metrics: orbital layouts differ");
  const Eigen::MatrixXd smat = s ? *s : Eigen::MatrixXd::Identity(truth.data.rows(), truth.data.cols());
  const Metrics m = metrics(pred, truth, smat, n_occ);
  RunReport r;
  r.command = "metrics";
  r.config = Json{{"n_occ", n_occ}, {"dimension", truth.data.rows()}};
  r.value("mae_diag", m.mae_diag);
  r.value("mae_offdiag", m.mae_offdiag);
  r.value("mae_all", m.mae_all);
  r.value("mae_eps", m.mae_eps);
  r.value("cosine_psi", m.cosine_psi);
  return r;
}

}  // namespace so2frames::cli

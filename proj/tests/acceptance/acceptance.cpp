// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "commands.hpp"
#include "so2frames/cg.hpp"
#include "so2frames/frame.hpp"
#include "so2frames/hamiltonian.hpp"
#include "so2frames/model.hpp"
#include "so2frames/so2_ops.hpp"
#include "so2frames/so3_layers.hpp"
#include "test_support.hpp"

using namespace so2frames;
using namespace so2frames::test;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. CG tensor product with a harmonic filter vs rotate, SO(2) linear, rotate back.
Outcome escn_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  RandomStream rng(101, "acceptance.escn");
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int l_in = static_cast<int>(rng.below(5));
    const int l_f = static_cast<int>(rng.below(5));
    const int l_out = static_cast<int>(rng.below(5));
    const int channels = 1 + static_cast<int>(rng.below(3));
    const PathWeights w = PathWeights::random(channels, l_in, l_f, l_out, rng);
    const Eigen::Vector3d dir = random_unit(rng);
    const So3Features x = random_features<IrrepKind::SO3>(IrrepsLayout::uniform(IrrepKind::SO3, channels, l_in), rng);
    const So3Features ref = so3_tensor_product(x, real_spherical_harmonics(l_f, dir), w);
    const Frame f = frame_from_direction(dir, std::max({l_in, l_out, 1}));
    const So3Features got = from_local(f, so2_linear(to_local(f, x), escn_linear_weights(w)), ref.layout());
    const double scale = ref.max_abs();
    worst = std::max(worst, scale > 0 ? max_abs_diff(got, ref) / scale : got.max_abs());
  }
  const double t = seconds_since(t0);
  return {worst < 1e-10 && t < 10.0,
          "max_rel=" + fmt("%.3g", worst) + " (< 1e-10), " + fmt("%.2f", t) + " s (< 10 s)"};
}

// 2. Multiply-count slopes over L = 2..8.
Outcome complexity_slopes() {
  const auto t0 = std::chrono::steady_clock::now();
  RandomStream rng(102, "acceptance.slopes");
  std::vector<double> xl, xl1, y3, y2;
  for (int L = 2; L <= 8; ++L) {
    const PathWeights w = PathWeights::random(1, L, L, L, rng);
    const So3Features x = random_features<IrrepKind::SO3>(IrrepsLayout::uniform(IrrepKind::SO3, 1, L), rng);
    const Eigen::Vector3d dir = random_unit(rng);
    OpCounter c3, c2;
    so3_tensor_product(x, real_spherical_harmonics(L, dir), w, &c3);
    const Frame f = frame_from_direction(dir, L);
    from_local(f, so2_linear(to_local(f, x, &c2), escn_linear_weights(w), &c2), x.layout(), &c2);
    xl.push_back(std::log(static_cast<double>(L)));
    xl1.push_back(std::log(static_cast<double>(L + 1)));
    y3.push_back(std::log(static_cast<double>(c3[Kernel::So3Tp])));
    y2.push_back(std::log(static_cast<double>(c2.multiply_count)));
  }
  const double s3 = slope(xl1, y3), s2 = slope(xl1, y2);
  const double t = seconds_since(t0);
  const bool ok = s3 >= 5.0 && s3 <= 6.5 && s2 >= 2.5 && s2 <= 3.5 && t < 60.0;
  return {ok, "so3_tp=" + fmt("%.4f", s3) + " in [5, 6.5], rotation+so2_linear=" + fmt("%.4f", s2) +
                  " in [2.5, 3.5] (vs log(L+1); vs log(L): " + fmt("%.3f", slope(xl, y3)) + ", " +
                  fmt("%.3f", slope(xl, y2)) + "), " + fmt("%.2f", t) + " s"};
}

// 3. Enumerated SO(2) product paths vs exhaustive search; v = 2 growth.
Outcome path_counts() {
  bool ok = true;
  std::string counts;
  for (int v : {2, 3})
    for (int m = 0; m <= 4; ++m) {
      const std::uint64_t got = enumerate_tp_paths(m, v).size();
      const std::uint64_t want = exhaustive_path_count(m, v);
      ok = ok && got == want;
      counts += " " + std::to_string(got) + (got == want ? "" : "!=" + std::to_string(want));
    }
  std::vector<double> x, y;
  for (int m = 2; m <= 8; ++m) {
    x.push_back(std::log(static_cast<double>(m)));
    y.push_back(std::log(static_cast<double>(enumerate_tp_paths(m, 2).size())));
  }
  const double s = slope(x, y);
  ok = ok && std::abs(s - 2.0) <= 0.3;
  return {ok, "counts v2,v3 M0..4:" + counts + "; v2 slope=" + fmt("%.4f", s) + " (2 +- 0.3)"};
}

Molecule five_atom_molecule() {
  cli::GenOptions opt;
  opt.seed = 7;
  opt.n_atoms = 5;
  return cli::cmd_gen(opt, ModelConfig{}).molecule;
}

// 4. predict(g mol) vs the rotated prediction, rotation matrices from harmonic samples.
Outcome block_equivariance() {
  const auto t0 = std::chrono::steady_clock::now();
  const Molecule mol = five_atom_molecule();
  ModelConfig cfg;
  cfg.seed = 4;
  const ModelParams params = ModelParams::init(cfg);
  const MoleculeGraph g = MoleculeGraph::build(mol.atomic_numbers, mol.positions, cfg.cutoff);
  const BlockMatrix h = predict(g, params);
  RandomStream rng(104, "acceptance.rotations");
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Rotation rot = random_rotation(rng);
    const Eigen::MatrixXd o = sampled_orbital_rotation(h.layout, rot, rng);
    const BlockMatrix hr = predict(g.transformed(rot, Eigen::Vector3d::Zero()), params);
    worst = std::max(worst, (hr.data - o * h.data * o.transpose()).cwiseAbs().maxCoeff());
  }
  const double t = seconds_since(t0);
  return {worst < 1e-9 && t < 60.0, "atoms=5 orbitals=" + std::to_string(h.layout.dim()) + " max_dev=" +
                                        fmt("%.3g", worst) + " (< 1e-9), " + fmt("%.2f", t) + " s (< 60 s)"};
}

// 5. Stabilizer-averaged frame evaluation, assembled from full frames h g.
double averaged_deviation(const LocalMap& phi, const Eigen::Vector3d& dir, const So3Features& x, int k,
                          RandomStream& rng) {
  const int l = x.layout().max_index();
  const Frame f = frame_from_direction(dir, l);
  const So3Features single = from_local(f, phi(to_local(f, x)), x.layout());
  So3Features acc(x.layout());
  for (int s = 0; s < k; ++s) {
    const Rotation hg = f.rotation() * stabilizer_rotation(2.0 * std::numbers::pi * rng.uniform());
    const Frame fg(dir, hg, l);
    acc += from_local(fg, phi(to_local(fg, x)), x.layout());
  }
  acc *= 1.0 / k;
  return max_abs_diff(acc, single);
}

Outcome frame_averaging() {
  RandomStream rng(105, "acceptance.frame_average");
  const IrrepsLayout so3 = layout_parse("4x0e+3x1e+3x2e+2x3e");
  const IrrepsLayout local = regrouped_layout(so3);
  const So2LinearWeights lin = So2LinearWeights::random(local, local, rng);
  const So2Gate gate = So2Gate::create(local, local.multiplicity(0), rng);
  const So2LayerNorm ln = So2LayerNorm::identity(local);
  const LocalMap equivariant = [&](const So2Features& x) { return so2_layernorm(so2_gate(so2_linear(x, lin), gate), ln); };
  const Eigen::MatrixXd dense = random_matrix(local.dim(), local.dim(), rng);
  const LocalMap generic = [&](const So2Features& x) {
    So2Features y(x.layout());
    y.unflatten(dense * x.flatten());
    return y;
  };
  double eq = 0.0, neg = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Vector3d dir = random_unit(rng);
    const So3Features x = random_features<IrrepKind::SO3>(so3, rng);
    eq = std::max({eq, averaged_deviation(equivariant, dir, x, 64, rng),
                   frame_average_check(equivariant, dir, x, 64, rng)});
    neg = std::min({neg, averaged_deviation(generic, dir, x, 64, rng), frame_average_check(generic, dir, x, 64, rng)});
  }
  return {eq < 1e-10 && neg > 1e-3,
          "K=64 equivariant max_dev=" + fmt("%.3g", eq) + " (< 1e-10), non-equivariant min_dev=" + fmt("%.3g", neg) +
              " (> 1e-3)"};
}

// 6. Rotations about the target axis: per order m the pair (x_{-m}, x_{+m})
// turns by m alpha, everything else is untouched. Derived from the azimuth
// of the harmonics advancing by alpha under R_y(alpha).
Outcome wigner_axis_blocks() {
  RandomStream rng(106, "acceptance.axis");
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const double a = rng.uniform(-std::numbers::pi, std::numbers::pi);
    Eigen::Matrix3d ry;
    ry << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
    const Rotation r(ry);
    for (int l = 0; l <= 6; ++l) {
      Eigen::MatrixXd want = Eigen::MatrixXd::Zero(2 * l + 1, 2 * l + 1);
      want(l, l) = 1.0;
      for (int m = 1; m <= l; ++m) {
        const double c = std::cos(m * a), s = std::sin(m * a);
        want(l - m, l - m) = c;
        want(l - m, l + m) = s;
        want(l + m, l - m) = -s;
        want(l + m, l + m) = c;
      }
      worst = std::max(worst, (wigner_d(l, r) - want).cwiseAbs().maxCoeff());
    }
  }
  return {worst < 1e-12, "l<=6, 50 angles, max_dev=" + fmt("%.3g", worst) + " (< 1e-12)"};
}

// 7. Every op's VJP against central differences along random directions.
struct GradCase {
  std::string name;
  std::function<double(RandomStream&)> run;  // worst relative error
};

template <class Value, class Grad>
double probe(FlatView& view, Value value, Grad grad, RandomStream& rng) {
  return directional_fd_error(view, value, grad(), 20, rng);
}

std::vector<GradCase> grad_cases() {
  std::vector<GradCase> cases;
  const IrrepsLayout so3 = layout_parse("3x0e+3x1e+2x2e");
  const IrrepsLayout so2 = regrouped_layout(so3);

  cases.push_back({"so2_linear", [=](RandomStream& rng) {
    So2Features x = random_features<IrrepKind::SO2>(so2, rng);
    So2LinearWeights w = So2LinearWeights::random(so2, layout_parse("4x0m+3x1m+2x2m+1x3m"), rng);
    const So2Features gout = random_features<IrrepKind::SO2>(w.out, rng);
    FlatView v;
    v.add(x);
    v.add_params(w);
    return probe(v, [&] { return gout.dot(so2_linear(x, w)); }, [&] {
      So2LinearWeights gw = w.zeros_like();
      So2Features gx = so2_linear_vjp(x, w, gout, &gw);
      FlatView g;
      g.add(gx);
      g.add_params(gw);
      return g.get();
    }, rng);
  }});
  cases.push_back({"so2_gate", [=](RandomStream& rng) {
    So2Features x = random_features<IrrepKind::SO2>(so2, rng);
    So2Gate gate = So2Gate::create(so2, 5, rng);
    const So2Features gout = random_features<IrrepKind::SO2>(gate.out, rng);
    FlatView v;
    v.add(x);
    v.add_params(gate);
    return probe(v, [&] { return gout.dot(so2_gate(x, gate)); }, [&] {
      So2Gate gg = gate.zeros_like();
      So2Features gx = so2_gate_vjp(x, gate, gout, &gg);
      FlatView g;
      g.add(gx);
      g.add_params(gg);
      return g.get();
    }, rng);
  }});
  cases.push_back({"so2_layernorm", [=](RandomStream& rng) {
    So2Features x = random_features<IrrepKind::SO2>(so2, rng);
    So2LayerNorm ln = So2LayerNorm::identity(so2);
    ln.visit("", [&](const std::string&, Eigen::MatrixXd& m) { m += 0.3 * random_matrix(m.rows(), m.cols(), rng); });
    const So2Features gout = random_features<IrrepKind::SO2>(so2, rng);
    FlatView v;
    v.add(x);
    v.add_params(ln);
    return probe(v, [&] { return gout.dot(so2_layernorm(x, ln)); }, [&] {
      So2LayerNorm gl = ln.zeros_like();
      So2Features gx = so2_layernorm_vjp(x, ln, gout, &gl);
      FlatView g;
      g.add(gx);
      g.add_params(gl);
      return g.get();
    }, rng);
  }});
  for (const auto& [m1, m2, sign] : std::vector<std::tuple<int, int, int>>{{2, 1, 1}, {3, 1, -1}, {0, 2, 1}}) {
    cases.push_back({"so2_tp_pair(" + std::to_string(m1) + "," + std::to_string(m2) + "," + std::to_string(sign) + ")",
                     [=](RandomStream& rng) {
      Eigen::MatrixXd x1 = random_matrix(3, m1 == 0 ? 1 : 2, rng);
      Eigen::MatrixXd x2 = random_matrix(3, m2 == 0 ? 1 : 2, rng);
      const Eigen::MatrixXd y = so2_tp_pair(x1, m1, x2, m2, sign);
      const Eigen::MatrixXd gout = random_matrix(y.rows(), y.cols(), rng);
      FlatView v;
      v.add(x1);
      v.add(x2);
      return probe(v, [&] { return (gout.array() * so2_tp_pair(x1, m1, x2, m2, sign).array()).sum(); }, [&] {
        auto [g1, g2] = so2_tp_pair_vjp(x1, m1, x2, m2, sign, gout);
        FlatView g;
        g.add(g1);
        g.add(g2);
        return g.get();
      }, rng);
    }});
  }
  for (int vv : {2, 3}) {
    cases.push_back({"so2_tp_contract(v=" + std::to_string(vv) + ")", [=](RandomStream& rng) {
      So2TpWeights w = So2TpWeights::random(3, vv, 2, rng);
      std::vector<So2Features> xs;
      for (int k = 0; k < vv; ++k) xs.push_back(random_features<IrrepKind::SO2>(w.layout(), rng));
      const So2Features gout = random_features<IrrepKind::SO2>(w.layout(), rng);
      FlatView v;
      v.add_vector(xs);
      v.add_params(w);
      return probe(v, [&] { return gout.dot(so2_tp_contract(xs, w)); }, [&] {
        So2TpWeights gw = w.zeros_like();
        std::vector<So2Features> gx = so2_tp_contract_vjp(xs, w, gout, &gw);
        FlatView g;
        g.add_vector(gx);
        g.add_params(gw);
        return g.get();
      }, rng);
    }});
  }
  cases.push_back({"so2_ffn", [=](RandomStream& rng) {
    So2Features mi = random_features<IrrepKind::SO2>(so2, rng);
    So2Features mj = random_features<IrrepKind::SO2>(so2, rng);
    So2Ffn ffn = So2Ffn::create(so2, rng);
    const So2Features gout = random_features<IrrepKind::SO2>(so2, rng);
    FlatView v;
    v.add(mi);
    v.add(mj);
    v.add_params(ffn);
    return probe(v, [&] { return gout.dot(so2_ffn(mi, mj, ffn)); }, [&] {
      So2Ffn gf = ffn.zeros_like();
      auto [gi, gj] = so2_ffn_vjp(mi, mj, ffn, gout, &gf);
      FlatView g;
      g.add(gi);
      g.add(gj);
      g.add_params(gf);
      return g.get();
    }, rng);
  }});
  cases.push_back({"to_local", [=](RandomStream& rng) {
    const Frame f = frame_from_direction(random_unit(rng), so3.max_index());
    So3Features x = random_features<IrrepKind::SO3>(so3, rng);
    const So2Features gout = random_features<IrrepKind::SO2>(so2, rng);
    FlatView v;
    v.add(x);
    return probe(v, [&] { return gout.dot(to_local(f, x)); }, [&] { return from_local(f, gout, so3).flatten(); }, rng);
  }});
  cases.push_back({"from_local", [=](RandomStream& rng) {
    const Frame f = frame_from_direction(random_unit(rng), so3.max_index());
    So2Features x = random_features<IrrepKind::SO2>(so2, rng);
    const So3Features gout = random_features<IrrepKind::SO3>(so3, rng);
    FlatView v;
    v.add(x);
    return probe(v, [&] { return gout.dot(from_local(f, x, so3)); }, [&] { return to_local(f, gout).flatten(); }, rng);
  }});
  cases.push_back({"so3_linear", [=](RandomStream& rng) {
    So3Features x = random_features<IrrepKind::SO3>(so3, rng);
    So3Linear lin = So3Linear::random(so3, layout_parse("2x0e+4x1e+1x2e+1x3e"), rng);
    const So3Features gout = random_features<IrrepKind::SO3>(lin.out, rng);
    FlatView v;
    v.add(x);
    v.add_params(lin);
    return probe(v, [&] { return gout.dot(so3_linear(x, lin)); }, [&] {
      So3Linear gl = lin.zeros_like();
      So3Features gx = so3_linear_vjp(x, lin, gout, &gl);
      FlatView g;
      g.add(gx);
      g.add_params(gl);
      return g.get();
    }, rng);
  }});
  cases.push_back({"so3_gate", [=](RandomStream& rng) {
    So3Features x = random_features<IrrepKind::SO3>(so3, rng);
    So3Gate gate = So3Gate::create(so3, rng);
    const So3Features gout = random_features<IrrepKind::SO3>(gate.out, rng);
    FlatView v;
    v.add(x);
    v.add_params(gate);
    return probe(v, [&] { return gout.dot(so3_gate(x, gate)); }, [&] {
      So3Gate gg = gate.zeros_like();
      So3Features gx = so3_gate_vjp(x, gate, gout, &gg);
      FlatView g;
      g.add(gx);
      g.add_params(gg);
      return g.get();
    }, rng);
  }});
  cases.push_back({"equivariant_layernorm", [=](RandomStream& rng) {
    So3Features x = random_features<IrrepKind::SO3>(so3, rng);
    EquivariantLayerNorm ln = EquivariantLayerNorm::identity(so3);
    ln.visit("", [&](const std::string&, Eigen::MatrixXd& m) { m += 0.3 * random_matrix(m.rows(), m.cols(), rng); });
    const So3Features gout = random_features<IrrepKind::SO3>(so3, rng);
    FlatView v;
    v.add(x);
    v.add_params(ln);
    return probe(v, [&] { return gout.dot(equivariant_layernorm_so3(x, ln)); }, [&] {
      EquivariantLayerNorm gl = ln.zeros_like();
      So3Features gx = equivariant_layernorm_so3_vjp(x, ln, gout, &gl);
      FlatView g;
      g.add(gx);
      g.add_params(gl);
      return g.get();
    }, rng);
  }});
  cases.push_back({"degree_inner_products", [=](RandomStream& rng) {
    So3Features hi = random_features<IrrepKind::SO3>(so3, rng);
    So3Features hj = random_features<IrrepKind::SO3>(so3, rng);
    const Eigen::VectorXd gout = random_matrix(so3.channels(), 1, rng);
    FlatView v;
    v.add(hi);
    v.add(hj);
    return probe(v, [&] { return gout.dot(degree_inner_products(hi, hj)); }, [&] {
      auto [gi, gj] = degree_inner_products_vjp(hi, hj, gout);
      FlatView g;
      g.add(gi);
      g.add(gj);
      return g.get();
    }, rng);
  }});
  cases.push_back({"pair_embed", [=](RandomStream& rng) {
    Eigen::VectorXd s = random_matrix(5, 1, rng);
    Eigen::VectorXd rbf = random_matrix(6, 1, rng);
    PairEmbed p = PairEmbed::create(5, 6, 4, 7, rng);
    const Eigen::VectorXd gout = random_matrix(7, 1, rng);
    FlatView v;
    v.add(s);
    v.add(rbf);
    v.add_params(p);
    return probe(v, [&] { return gout.dot(pair_embed(s, rbf, p)); }, [&] {
      PairEmbed gp = p.zeros_like();
      auto [gs, gr] = pair_embed_vjp(s, rbf, p, gout, &gp);
      FlatView g;
      g.add(gs);
      g.add(gr);
      g.add_params(gp);
      return g.get();
    }, rng);
  }});
  cases.push_back({"mlp", [=](RandomStream& rng) {
    Eigen::VectorXd x = random_matrix(4, 1, rng);
    Mlp mlp = Mlp::create({4, 5, 5, 3}, rng);
    const Eigen::VectorXd gout = random_matrix(3, 1, rng);
    FlatView v;
    v.add(x);
    v.add_params(mlp);
    return probe(v, [&] { return gout.dot(mlp_forward(mlp, x)); }, [&] {
      MlpTape tape;
      mlp_forward(mlp, x, &tape);
      Mlp gm = mlp.zeros_like();
      Eigen::VectorXd gx = mlp_vjp(mlp, tape, gout, &gm);
      FlatView g;
      g.add(gx);
      g.add_params(gm);
      return g.get();
    }, rng);
  }});
  cases.push_back({"expansion", [=](RandomStream& rng) {
    const IrrepsLayout feat = layout_parse("2x0e+2x1e+2x2e+1x3e");
    So3Features x = random_features<IrrepKind::SO3>(feat, rng);
    ExpansionSet set = ExpansionSet::random({8}, BasisConfig::default_basis(), feat, rng);
    ExpansionWeights w = set.offdiag.at(ExpansionKey{8, 3, 8, 5});  // p x d
    const Eigen::MatrixXd gout = random_matrix(3, 5, rng);
    FlatView v;
    v.add(x);
    v.add_vector(w);
    return probe(v, [&] { return (gout.array() * expansion(x, w, 1, 2).array()).sum(); }, [&] {
      ExpansionWeights gw = w;
      for (auto& m : gw) m.setZero();
      So3Features gx = expansion_vjp(x, w, 1, 2, gout, &gw);
      FlatView g;
      g.add(gx);
      g.add_vector(gw);
      return g.get();
    }, rng);
  }});
  cases.push_back({"assemble", [=](RandomStream& rng) {
    ModelConfig cfg;
    cfg.hidden = "2x0e+2x1e+2x2e+1x3e+1x4e";
    cfg.elements = {1, 8};
    const MoleculeGraph graph =
        MoleculeGraph::build({8, 1, 1}, {{0, 0, 0}, {1.8, 0.2, -0.1}, {-0.6, 1.7, 0.3}}, cfg.cutoff);
    const GraphGeometry geo = GraphGeometry::build(graph, cfg);
    const auto edges = geo.assembly_edges(graph);
    const OrbitalLayout layout = build_orbital_layout(graph.atomic_numbers(), cfg.basis);
    std::vector<So3Features> node;
    for (std::size_t a = 0; a < graph.num_atoms(); ++a)
      node.push_back(random_features<IrrepKind::SO3>(cfg.hidden_layout(), rng));
    std::vector<So2Features> pair;
    for (std::size_t e = 0; e < graph.edges().size(); ++e)
      pair.push_back(random_features<IrrepKind::SO2>(cfg.local_layout(), rng));
    ExpansionSet w = ExpansionSet::random(cfg.elements, cfg.basis, cfg.hidden_layout(), rng);
    const Eigen::MatrixXd gout = random_matrix(layout.dim(), layout.dim(), rng);
    FlatView v;
    v.add_vector(node);
    v.add_vector(pair);
    v.add_params(w);
    return probe(v, [&] { return (gout.array() * assemble(node, pair, edges, w, layout).data.array()).sum(); }, [&] {
      ExpansionSet gw = w.zeros_like();
      AssemblyGrad ag = assemble_vjp(node, pair, edges, w, layout, gout, &gw);
      FlatView g;
      g.add_vector(ag.node);
      g.add_vector(ag.pair);
      g.add_params(gw);
      return g.get();
    }, rng);
  }});
  cases.push_back({"model", [=](RandomStream& rng) {
    ModelConfig cfg;
    cfg.hidden = "4x0e+3x1e+2x2e+2x3e+2x4e";
    cfg.elements = {1, 8};
    cfg.layers = 2;
    cfg.m_max = 2;
    cfg.v = 3;
    cfg.tp_channels = 2;
    cfg.rbf_count = 8;
    cfg.embed_width = 8;
    cfg.seed = 17;
    const MoleculeGraph graph =
        MoleculeGraph::build({8, 1, 1}, {{0, 0, 0}, {1.8, 0.2, -0.1}, {-0.6, 1.7, 0.3}}, cfg.cutoff);
    ModelParams params = ModelParams::init(cfg);
    const ModelOutput out0 = forward(graph, params);
    std::vector<So3Features> gnode;
    std::vector<So2Features> gpair;
    for (const auto& n : out0.node) gnode.push_back(random_features<IrrepKind::SO3>(n.layout(), rng));
    for (const auto& p : out0.pair) gpair.push_back(random_features<IrrepKind::SO2>(p.layout(), rng));
    FlatView v;
    params.visit([&](const std::string&, Eigen::MatrixXd& m) { v.add(m); });
    return probe(v, [&] {
      const ModelOutput o = forward(graph, params);
      double s = 0.0;
      for (std::size_t a = 0; a < o.node.size(); ++a) s += gnode[a].dot(o.node[a]);
      for (std::size_t e = 0; e < o.pair.size(); ++e) s += gpair[e].dot(o.pair[e]);
      return s;
    }, [&] {
      ModelParams gp = backward(graph, params, gnode, gpair);
      FlatView g;
      gp.visit([&](const std::string&, Eigen::MatrixXd& m) { g.add(m); });
      return g.get();
    }, rng);
  }});
  return cases;
}

Outcome gradient_contract() {
  RandomStream rng(107, "acceptance.gradients");
  bool ok = true;
  double worst = 0.0;
  std::string worst_op, failed;
  int n = 0;
  for (const auto& c : grad_cases()) {
    RandomStream r = rng.split(c.name);
    const double e = c.run(r);
    ++n;
    if (!(e < 1e-5)) {
      ok = false;
      failed += " " + c.name + "=" + fmt("%.3g", e);
    }
    if (e > worst) {
      worst = e;
      worst_op = c.name;
    }
  }
  return {ok, std::to_string(n) + " ops x 20 probes, step 1e-6, max_rel=" + fmt("%.3g", worst) + " (" + worst_op +
                  ") (< 1e-5)" + (failed.empty() ? "" : "; failing:" + failed)};
}

// 8. Fit demo on H3.
Outcome fit_demo_run() {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelConfig cfg = cli::demo_config();
  const MoleculeGraph g = MoleculeGraph::build({1, 1, 1}, {{0, 0, 0}, {1.8, 0.1, 0}, {-0.5, 1.7, 0.2}}, cfg.cutoff);
  const SyntheticTarget target = gen_synthetic_target(g, 13, cfg);
  const FitResult a = fit_demo(g, target.h, 2000, 3, cfg, cli::demo_fit_options());
  const FitResult b = fit_demo(g, target.h, 2000, 3, cfg, cli::demo_fit_options());
  const double t = seconds_since(t0);

  std::vector<double> means;
  for (int w = 0; w < 20; ++w) {
    double s = 0.0;
    for (int k = 0; k < 100; ++k) s += a.losses[w * 100 + k];
    means.push_back(s / 100.0);
  }
  int rises = 0;
  for (std::size_t w = 1; w < means.size(); ++w) rises += means[w] >= means[w - 1];
  const double best = *std::min_element(a.losses.begin(), a.losses.end());
  const bool same = a.losses == b.losses;
  return {rises == 0 && best < 1e-3 && same && t < 300.0,
          "initial=" + fmt("%.3g", a.losses.front()) + " min=" + fmt("%.3g", best) +
              " (< 1e-3), non-decreasing windows=" + std::to_string(rises) + " of 19, deterministic=" +
              (same ? "yes" : "no") + ", " + fmt("%.1f", t) + " s for two runs (< 300 s each)"};
}

// 9. Generalized eigensolver residuals and the metrics fixed point.
Outcome eigensolver() {
  RandomStream rng(109, "acceptance.eigen");
  double res = 0.0, orth = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(64));
    const Eigen::MatrixXd a = random_matrix(n, n, rng);
    const Eigen::MatrixXd h = 0.5 * (a + a.transpose());
    const Eigen::MatrixXd b = random_matrix(n, n, rng);
    const Eigen::MatrixXd s = b * b.transpose() / n + Eigen::MatrixXd::Identity(n, n);
    const Eigensystem es = generalized_eigensolve(h, s);
    res = std::max(res, (h * es.c - s * es.c * es.eps.asDiagonal()).cwiseAbs().maxCoeff());
    orth = std::max(orth, (es.c.transpose() * s * es.c - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff());
  }
  const cli::GenResult gen = cli::cmd_gen([] {
    cli::GenOptions o;
    o.seed = 9;
    return o;
  }(), ModelConfig{});
  const Metrics m = metrics(gen.h, gen.h, gen.s.data, 5);
  const bool fixed = m.mae_diag == 0.0 && m.mae_offdiag == 0.0 && m.mae_all == 0.0 && m.mae_eps == 0.0 &&
                     m.cosine_psi == 1.0;
  return {res < 1e-8 && orth < 1e-8 && fixed,
          "50 pairs N<=64: residual=" + fmt("%.3g", res) + " S-orthonormality=" + fmt("%.3g", orth) +
              " (< 1e-8); metrics(H,H) zeros and cosine 1: " + (fixed ? "yes" : "no")};
}

// 10. Reports of two identical runs.
Outcome determinism() {
  const Molecule mol = five_atom_molecule();
  ModelConfig cfg;
  cfg.seed = 10;
  const ModelParams params = ModelParams::init(cfg);
  cli::EquivOptions eo;
  eo.seed = 10;
  const std::string e1 = cli::cmd_check_equiv(mol, params, eo).to_json(false).dump();
  const std::string e2 = cli::cmd_check_equiv(mol, params, eo).to_json(false).dump();
  cli::BenchOptions bo;
  bo.seed = 10;
  bo.repeats = 1;
  const std::string b1 = cli::cmd_bench(bo).to_json(false).dump();
  const std::string b2 = cli::cmd_bench(bo).to_json(false).dump();
  return {e1 == e2 && b1 == b2, std::string("check_equiv identical=") + (e1 == e2 ? "yes" : "no") +
                                    " (" + std::to_string(e1.size()) + " bytes), bench identical=" +
                                    (b1 == b2 ? "yes" : "no") + " (" + std::to_string(b1.size()) + " bytes)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"escn_equivalence", escn_equivalence}, {"complexity_slopes", complexity_slopes},
      {"so2_tp_path_counts", path_counts},   {"block_equivariance", block_equivariance},
      {"frame_averaging", frame_averaging},   {"wigner_axis_blocks", wigner_axis_blocks},
      {"gradient_contract", gradient_contract}, {"fit_demo", fit_demo_run},
      {"eigensolver", eigensolver},           {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

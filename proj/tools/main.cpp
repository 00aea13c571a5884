#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "commands.hpp"
#include "so2frames/frame.hpp"

using namespace so2frames;
using namespace so2frames::cli;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::optional<int> lmax, mmax, v, layers;
  std::optional<double> cutoff;
  std::string config_path;
  std::string out;
  bool json = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Run seed");
  sub->add_option("--lmax", c.lmax, "Highest hidden degree");
  sub->add_option("--mmax", c.mmax, "Highest SO(2) order in the node-update product");
  sub->add_option("--v", c.v, "Operand count of the node-update product");
  sub->add_option("--layers", c.layers, "Layer count");
  sub->add_option("--cutoff", c.cutoff, "Neighbor cutoff (Bohr)");
  sub->add_option("--config", c.config_path, "Model config JSON");
  sub->add_option("--out", c.out, "Output path");
  sub->add_flag("--json", c.json, "Print the report as JSON");
}

ModelConfig resolve_config(const Common& c, ModelConfig base = {}) {
  ModelConfig cfg = c.config_path.empty() ? base : config_from_json(read_json(c.config_path), base);
  if (c.lmax) cfg.hidden = hidden_with_lmax(cfg.hidden, *c.lmax);
  if (c.mmax) cfg.m_max = *c.mmax;
  if (c.v) cfg.v = *c.v;
  if (c.layers) cfg.layers = *c.layers;
  if (c.cutoff) cfg.cutoff = *c.cutoff;
  cfg.seed = c.seed;
  cfg.validate();
  return cfg;
}

int emit(const RunReport& r, const Common& c, bool write_out) {
  if (c.json)
    std::cout << r.to_json().dump(2) << "\n";
  else
    std::cout << r.to_text();
  if (write_out && !c.out.empty()) write_json(c.out, r.to_json());
  return r.all_pass() ? 0 : 1;
}

std::pair<int, int> parse_range(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("range must look like LO:HI, got " + s);
  return {std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"so2frames: equivariant Hamiltonian matrices from edge-aligned frames"};
  app.require_subcommand(1);

  Common gen_c, eq_c, bench_c, fit_c, pred_c, met_c;

  auto* gen = app.add_subcommand("gen", "Sample a molecule and synthetic (H, S) targets");
  add_common(gen, gen_c);
  GenOptions gen_o;
  bool no_overlap = false;
  gen->add_option("--atoms", gen_o.n_atoms, "Atom count");
  gen->add_option("--elements", gen_o.elements, "Atomic numbers to draw from")->delimiter(',');
  gen->add_option("--min-dist", gen_o.min_dist, "Minimum pair distance (Bohr)");
  gen->add_flag("--identity-overlap", no_overlap, "Use S = I");

  auto* eq = app.add_subcommand("check-equiv", "Rotation equivariance audit");
  add_common(eq, eq_c);
  std::string eq_mol, eq_ckpt;
  EquivOptions eq_o;
  bool corrupt = false;
  eq->add_option("--molecule", eq_mol, "Molecule JSON")->required();
  eq->add_option("--checkpoint", eq_ckpt, "Checkpoint JSON (default: fresh initialization)");
  eq->add_option("--trials", eq_o.trials, "Rotation trials, the first is the identity");
  eq->add_option("--tolerance", eq_o.tolerance, "Maximum allowed deviation");
  eq->add_flag("--corrupt-wigner-cache", corrupt)->group("");

  auto* bench = app.add_subcommand("bench", "Multiply-count scaling benchmark");
  add_common(bench, bench_c);
  std::string l_range = "2:8", m_range = "2:8";
  BenchOptions bench_o;
  bench->add_option("--L-range", l_range, "Degrees LO:HI");
  bench->add_option("--M-range", m_range, "Orders LO:HI");
  bench->add_option("--channels", bench_o.channels, "Channels per degree");
  bench->add_option("--repeats", bench_o.repeats, "Timing repeats (median reported)");

  auto* fit = app.add_subcommand("fit", "Fit the model to a molecule's stored Hamiltonian");
  add_common(fit, fit_c);
  std::string fit_mol;
  int steps = 2000;
  bool use_demo = false;
  std::optional<double> fit_lr;
  fit->add_option("--molecule", fit_mol, "Molecule JSON with a \"hamiltonian\" entry")->required();
  fit->add_option("--steps", steps, "Adam steps");
  fit->add_option("--lr", fit_lr, "Learning rate");
  fit->add_flag("--demo", use_demo, "Start from the small demo configuration");

  auto* pred = app.add_subcommand("predict", "Predict a Hamiltonian matrix");
  add_common(pred, pred_c);
  std::string pred_mol, pred_ckpt;
  pred->add_option("--molecule", pred_mol, "Molecule JSON")->required();
  pred->add_option("--checkpoint", pred_ckpt, "Checkpoint JSON")->required();

  auto* met = app.add_subcommand("metrics", "Compare a predicted matrix with a reference");
  add_common(met, met_c);
  std::string met_pred, met_true, met_overlap, met_mol;
  int n_occ = 1;
  met->add_option("--pred", met_pred, "Predicted matrix file")->required();
  met->add_option("--true", met_true, "Reference matrix file")->required();
  met->add_option("--overlap", met_overlap, "Overlap matrix file (default identity)");
  met->add_option("--molecule", met_mol, "Molecule JSON supplying the layout for binary files");
  met->add_option("--n-occ", n_occ, "Occupied orbital count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      if (gen_c.out.empty()) throw IoError("gen: --out is required");
      gen_o.seed = gen_c.seed;
      gen_o.overlap = !no_overlap;
      ModelConfig cfg = resolve_config(gen_c);
      GenResult r = cmd_gen(gen_o, cfg);
      write_gen_outputs(r, gen_c.out);
      return emit(r.report, gen_c, false);
    }
    if (eq->parsed()) {
      testing::set_corrupt_wigner_cache(corrupt);
      const Molecule mol = molecule_from_json(read_json(eq_mol));
      const ModelParams params =
          eq_ckpt.empty() ? ModelParams::init(resolve_config(eq_c)) : checkpoint_from_json(read_json(eq_ckpt));
      eq_o.seed = eq_c.seed;
      return emit(cmd_check_equiv(mol, params, eq_o), eq_c, true);
    }
    if (bench->parsed()) {
      std::tie(bench_o.l_min, bench_o.l_max) = parse_range(l_range);
      std::tie(bench_o.m_min, bench_o.m_max) = parse_range(m_range);
      bench_o.seed = bench_c.seed;
      return emit(cmd_bench(bench_o), bench_c, true);
    }
    if (fit->parsed()) {
      const ModelConfig cfg = resolve_config(fit_c, use_demo ? demo_config() : ModelConfig{});
      const Molecule mol = molecule_from_json(read_json(fit_mol));
      FitOptions fit_o = use_demo ? demo_fit_options() : FitOptions{};
      if (fit_lr) fit_o.learning_rate = *fit_lr;
      FitRun run = cmd_fit(mol, steps, fit_c.seed, cfg, fit_o);
      if (!fit_c.out.empty()) {
        write_json(fit_c.out, checkpoint_to_json(run.fit.params));
        std::string stem = fit_c.out;
        if (stem.size() > 5 && stem.compare(stem.size() - 5, 5, ".json") == 0) stem.resize(stem.size() - 5);
        write_text(stem + ".loss.csv", run.csv);
      }
      return emit(run.report, fit_c, false);
    }
    if (pred->parsed()) {
      if (pred_c.out.empty()) throw IoError("predict: --out is required");
      const Molecule mol = molecule_from_json(read_json(pred_mol));
      const ModelParams params = checkpoint_from_json(read_json(pred_ckpt));
      write_matrix(pred_c.out, cmd_predict(mol, params));
      return 0;
    }
    if (met->parsed()) {
      std::optional<OrbitalLayout> layout;
      if (!met_mol.empty()) {
        const Molecule mol = molecule_from_json(read_json(met_mol));
        layout = build_orbital_layout(mol.atomic_numbers, resolve_config(met_c).basis);
      }
      BlockMatrix p = read_matrix(met_pred, layout);
      BlockMatrix t = read_matrix(met_true, layout);
      // A binary file without --molecule gets a placeholder layout; borrow
      // the other file's layout when it has one.
      const auto placeholder = [](const BlockMatrix& m) {
        return m.layout.num_atoms() == 1 && m.layout.atomic_numbers()[0] == 0;
      };
      if (placeholder(p) && !placeholder(t) && p.data.rows() == t.layout.dim()) p.layout = t.layout;
      if (placeholder(t) && !placeholder(p) && t.data.rows() == p.layout.dim()) t.layout = p.layout;
      std::optional<Eigen::MatrixXd> s;
      if (!met_overlap.empty()) s = read_matrix(met_overlap, layout).data;
      return emit(cmd_metrics(p, t, s, n_occ), met_c, true);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

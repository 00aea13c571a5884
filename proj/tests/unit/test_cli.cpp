#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "commands.hpp"
#include "so2frames/frame.hpp"
#include "so2frames/serialize.hpp"
#include "test_support.hpp"

using namespace so2frames;
using namespace so2frames::test;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("so2frames_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (scratch_dir() / name).string(); }

// Exit status of the CLI binary; stdout goes to `out` when given.
int run_cli(const std::string& args, const std::string& out = "/dev/null") {
  const std::string cmd = std::string(SO2FRAMES_CLI) + " " + args + " > " + out + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Json without_timing(Json j) {
  Json kept = Json::array();
  for (const auto& c : j["checks"])
    if (c["kind"] != "timing") kept.push_back(c);
  j["checks"] = kept;
  return j;
}

cli::GenResult small_gen(std::uint64_t seed, int atoms = 3, std::vector<int> elements = {1, 6, 7, 8}) {
  cli::GenOptions opt;
  opt.seed = seed;
  opt.n_atoms = atoms;
  opt.elements = std::move(elements);
  return cli::cmd_gen(opt, ModelConfig{});
}

}  // namespace

// --- gen --------------------------------------------------------------------

TEST(CliGen, TwoAtomsDeterministicAndSpaced) {
  const cli::GenResult a = small_gen(3, 2), b = small_gen(3, 2);
  ASSERT_EQ(a.molecule.atomic_numbers.size(), 2u);
  EXPECT_EQ(molecule_to_json(a.molecule).dump(), molecule_to_json(b.molecule).dump());
  EXPECT_EQ(a.report.to_json(false).dump(), b.report.to_json(false).dump());
  EXPECT_GE((a.molecule.positions[0] - a.molecule.positions[1]).norm(), cli::GenOptions{}.min_dist);
  EXPECT_NE(molecule_to_json(small_gen(4, 2).molecule).dump(), molecule_to_json(a.molecule).dump());
  ASSERT_TRUE(a.molecule.hamiltonian && a.molecule.overlap);
  EXPECT_EQ(*a.molecule.hamiltonian, a.h.data);
  EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(a.s.data).info(), Eigen::Success);
}

TEST(CliGen, MinimumDistanceOverManyAtoms) {
  const cli::GenResult r = small_gen(5, 8);
  const auto& p = r.molecule.positions;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j) EXPECT_GE((p[i] - p[j]).norm(), 1.5);
  cli::GenOptions crowded;
  crowded.n_atoms = 200;  // the box is sized for a handful of atoms
  crowded.max_retries = 1;
  EXPECT_THROW(cli::cmd_gen(crowded, ModelConfig{}), std::runtime_error);
}

// --- check-equiv ------------------------------------------------------------

TEST(CliCheckEquiv, IdentityTrialIsExactAndAuditPasses) {
  const cli::GenResult g = small_gen(6);
  ModelConfig c;
  c.seed = 2;
  cli::EquivOptions opt;
  opt.trials = 4;
  const cli::RunReport r = cli::cmd_check_equiv(g.molecule, ModelParams::init(c), opt);
  EXPECT_TRUE(r.all_pass());
  EXPECT_EQ(r.find("identity_trial_deviation")->value, 0.0);
  EXPECT_EQ(*r.find("edge_set_changes")->count, 0u);
  EXPECT_LT(r.find("block_deviation")->value, 1e-9);
}

TEST(CliCheckEquiv, CorruptedWignerCacheFails) {
  const cli::GenResult g = small_gen(6);
  cli::EquivOptions opt;
  opt.trials = 3;
  so2frames::testing::set_corrupt_wigner_cache(true);
  const cli::RunReport r = cli::cmd_check_equiv(g.molecule, ModelParams::init(ModelConfig{}), opt);
  so2frames::testing::set_corrupt_wigner_cache(false);
  EXPECT_FALSE(r.all_pass());
  EXPECT_GT(r.find("block_deviation")->value, 1e-6);
}

// --- bench ------------------------------------------------------------------

TEST(CliBench, PathCountsAndSlopes) {
  cli::BenchOptions opt;
  opt.l_max = 5;
  opt.m_max = 6;
  opt.repeats = 1;
  const cli::RunReport r = cli::cmd_bench(opt);
  EXPECT_EQ(*r.find("paths.v2.M4")->count, exhaustive_path_count(4, 2));
  EXPECT_EQ(*r.find("paths.v3.M3")->count, exhaustive_path_count(3, 3));
  EXPECT_EQ(cli::brute_force_path_count(4, 3), exhaustive_path_count(4, 3));
  EXPECT_TRUE(r.find("slope.so3_tp")->gated());
  EXPECT_GT(r.find("slope.so3_tp")->value, r.find("slope.rotation_so2_linear")->value);
  EXPECT_EQ(r.to_json(false).dump(), cli::cmd_bench(opt).to_json(false).dump());
}

// --- fit / predict / metrics ------------------------------------------------

TEST(CliFit, ZeroStepsKeepsInitAndSeedsRepeat) {
  const cli::GenResult g = small_gen(8, 3, {1});
  const ModelConfig c = cli::demo_config();
  cli::FitRun f0 = cli::cmd_fit(g.molecule, 0, 4, c);
  ModelConfig ic = c;
  ic.seed = 4;
  ModelParams init = ModelParams::init(ic);
  EXPECT_EQ(checkpoint_to_json(f0.fit.params).dump(), checkpoint_to_json(init).dump());
  const cli::FitRun a = cli::cmd_fit(g.molecule, 5, 4, c), b = cli::cmd_fit(g.molecule, 5, 4, c);
  EXPECT_EQ(a.csv, b.csv);
  EXPECT_EQ(*a.report.find("non_finite_losses")->count, 0u);
  for (double l : a.fit.losses) EXPECT_TRUE(std::isfinite(l));
  cli::FitRun c2 = cli::cmd_fit(g.molecule, 5, 5, c);
  EXPECT_NE(a.csv, c2.csv);
  Molecule bare = g.molecule;
  bare.hamiltonian.reset();
  EXPECT_THROW(cli::cmd_fit(bare, 1, 4, c), IoError);
}

TEST(CliMetrics, SelfComparisonAndPredictRoundTrip) {
  const cli::GenResult g = small_gen(9);
  const cli::RunReport self = cli::cmd_metrics(g.h, g.h, g.s.data, 3);
  EXPECT_EQ(self.find("mae_all")->value, 0.0);
  EXPECT_EQ(self.find("mae_eps")->value, 0.0);
  EXPECT_EQ(self.find("cosine_psi")->value, 1.0);

  ModelConfig c;
  c.seed = 1;
  ModelParams params = ModelParams::init(c);
  const BlockMatrix pred = cli::cmd_predict(g.molecule, params);
  EXPECT_EQ(pred.data, predict(cli::molecule_graph(g.molecule, c), params).data);
  for (const std::string ext : {".json", ".bin"}) {
    write_matrix(path("pred" + ext), pred);
    const BlockMatrix back = read_matrix(path("pred" + ext), pred.layout);
    EXPECT_EQ(back.data, pred.data) << ext;
    EXPECT_EQ(back.layout, pred.layout);
  }
  const cli::RunReport m = cli::cmd_metrics(read_matrix(path("pred.bin"), pred.layout), g.h, g.s.data, 3);
  EXPECT_EQ(m.find("mae_all")->value, std::get<2>(block_maes(pred, g.h)));
}

// --- serialization ----------------------------------------------------------

TEST(Serialize, FeaturesRoundTrip) {
  RandomStream rng(10, "serialize.features");
  const So3Features x = random_features<IrrepKind::SO3>(layout_parse("3x0e+2x1e+1x4e"), rng);
  EXPECT_EQ(max_abs_diff(so3_features_from_json(Json::parse(features_to_json(x).dump())), x), 0.0);
  const So2Features y = random_features<IrrepKind::SO2>(layout_parse("3x0m+2x1m+1x4m"), rng);
  EXPECT_EQ(max_abs_diff(so2_features_from_json(Json::parse(features_to_json(y).dump())), y), 0.0);
  EXPECT_THROW(so2_features_from_json(features_to_json(x)), IoError);
  Json bad = features_to_json(x);
  bad["data"][1].erase(0);
  EXPECT_THROW(so3_features_from_json(bad), IoError);
}

TEST(Serialize, MoleculeConfigAndCheckpoint) {
  const cli::GenResult g = small_gen(11);
  const Molecule m = molecule_from_json(Json::parse(molecule_to_json(g.molecule).dump()));
  EXPECT_EQ(m.atomic_numbers, g.molecule.atomic_numbers);
  for (std::size_t a = 0; a < m.positions.size(); ++a) EXPECT_EQ(m.positions[a], g.molecule.positions[a]);
  EXPECT_EQ(*m.hamiltonian, *g.molecule.hamiltonian);
  EXPECT_EQ(*m.overlap, *g.molecule.overlap);

  ModelConfig c;
  c.hidden = "6x0e+4x1e+2x2e+2x3e+2x4e";
  c.layers = 2;
  c.seed = 31;
  const ModelConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back).dump(), config_to_json(c).dump());
  Json extra = config_to_json(c);
  extra["learning_rate"] = 0.1;
  EXPECT_THROW(config_from_json(extra), IoError);
  EXPECT_EQ(config_from_json(Json{{"layers", 1}}).layers, 1);

  ModelParams p = ModelParams::init(c);
  ModelParams q = checkpoint_from_json(Json::parse(checkpoint_to_json(p).dump()));
  std::vector<Eigen::MatrixXd> pa, qa;
  p.visit([&](const std::string&, Eigen::MatrixXd& x) { pa.push_back(x); });
  q.visit([&](const std::string&, Eigen::MatrixXd& x) { qa.push_back(x); });
  ASSERT_EQ(pa.size(), qa.size());
  for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_EQ(pa[k], qa[k]);
  Json broken = checkpoint_to_json(p);
  broken["parameters"].erase(broken["parameters"].begin());
  EXPECT_THROW(checkpoint_from_json(broken), IoError);
}

TEST(Serialize, BinaryMatrixFormat) {
  const Eigen::Matrix2d m = (Eigen::Matrix2d() << 1.5, -2.0, 0.25, 3.0).finished();
  write_matrix_binary(path("m.bin"), m);
  const std::string raw = slurp(path("m.bin"));
  ASSERT_EQ(raw.size(), 8u + 8u + 4u * 8u);
  EXPECT_EQ(raw.substr(0, 8), "SO2FMAT1");
  EXPECT_EQ(static_cast<unsigned char>(raw[8]), 2u);
  double second;
  std::memcpy(&second, raw.data() + 24, 8);
  EXPECT_EQ(second, -2.0);  // row-major
  EXPECT_EQ(read_matrix_binary(path("m.bin")), Eigen::MatrixXd(m));
  write_text(path("junk.bin"), "not a matrix");
  EXPECT_THROW(read_matrix_binary(path("junk.bin")), IoError);
  write_text(path("short.bin"), raw.substr(0, raw.size() - 3));
  EXPECT_THROW(read_matrix_binary(path("short.bin")), IoError);
  EXPECT_THROW(read_matrix_binary(path("missing.bin")), IoError);
}

// --- the binary -------------------------------------------------------------

TEST(CliBinary, ExitCodes) {
  const std::string mol = path("exit.mol.json");
  ASSERT_EQ(run_cli("gen --seed 2 --atoms 3 --out " + mol), 0);
  EXPECT_TRUE(fs::exists(path("exit.mol.H.json")));
  EXPECT_TRUE(fs::exists(path("exit.mol.S.json")));
  EXPECT_EQ(run_cli("check-equiv --molecule " + mol + " --trials 3"), 0);
  EXPECT_EQ(run_cli("check-equiv --molecule " + mol + " --trials 3 --corrupt-wigner-cache"), 1);
  EXPECT_EQ(run_cli("check-equiv --molecule " + path("nope.json")), 2);
  EXPECT_EQ(run_cli("bench --L-range 2-5"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("metrics --pred " + path("exit.mol.H.json") + " --true " + path("exit.mol.H.json") + " --n-occ 2"), 0);
}

TEST(CliBinary, ReportsRepeatExceptTiming) {
  const std::string args = "bench --L-range 2:4 --M-range 2:4 --repeats 1 --json";
  ASSERT_EQ(run_cli(args, path("b1.json")), 0);
  ASSERT_EQ(run_cli(args, path("b2.json")), 0);
  const Json a = Json::parse(slurp(path("b1.json"))), b = Json::parse(slurp(path("b2.json")));
  EXPECT_EQ(without_timing(a).dump(), without_timing(b).dump());
  EXPECT_GT(a["checks"].size(), without_timing(a)["checks"].size());
}

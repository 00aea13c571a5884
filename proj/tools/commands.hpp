#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "report.hpp"
#include "so2frames/hamiltonian.hpp"
#include "so2frames/model.hpp"
#include "so2frames/serialize.hpp"

namespace so2frames::cli {

/// Small configuration used by the fit demo: H-only, l_max 2, one layer.
ModelConfig demo_config();
/// Adam settings of the fit demo. The L1 loss makes the gradient sign flip
/// near the optimum; the long first-moment average damps the oscillation.
FitOptions demo_fit_options();

/// Hidden layout truncated or extended (repeating the last multiplicity) to
/// degrees 0..l_max.
std::string hidden_with_lmax(const std::string& hidden, int l_max);

MoleculeGraph molecule_graph(const Molecule& m, const ModelConfig& config);

struct GenOptions {
  std::uint64_t seed = 0;
  int n_atoms = 5;
  std::vector<int> elements = {1, 6, 7, 8};
  double min_dist = 1.5;  // Bohr
  bool overlap = true;
  int max_retries = 10000;
};

struct GenResult {
  Molecule molecule;  // carries the target H and S
  BlockMatrix h;
  BlockMatrix s;
  RunReport report;
};

/// Rejection-sampled positions, then synthetic targets from `config`.
/// Throws std::runtime_error when sampling fails after max_retries per atom.
GenResult cmd_gen(const GenOptions& opt, const ModelConfig& config);
/// Writes <out> (molecule with targets), <stem>.H.json and <stem>.S.json.
void write_gen_outputs(const GenResult& r, const std::string& out);

struct EquivOptions {
  std::uint64_t seed = 0;
  int trials = 20;
  double tolerance = 1e-9;
};

/// Node-track, pair-track and block-level deviations over random rotations.
/// Trial 0 is always the identity.
RunReport cmd_check_equiv(const Molecule& mol, const ModelParams& params, const EquivOptions& opt);

struct BenchOptions {
  int l_min = 2;
  int l_max = 8;
  int m_min = 2;
  int m_max = 8;
  int channels = 1;
  int repeats = 3;
  std::uint64_t seed = 0;
};

/// Multiply counts per degree/order, fitted log-log slopes and, as timing
/// entries, median wall-clock times.
RunReport cmd_bench(const BenchOptions& opt);

/// Path count by exhaustive search over all order tuples and sign tuples.
std::uint64_t brute_force_path_count(int m_max, int v);

/// Least-squares slope of y against x.
double fitted_slope(const std::vector<double>& x, const std::vector<double>& y);

struct FitRun {
  FitResult fit;
  RunReport report;
  std::string csv;  // step,loss
};

/// Fits `config` to the molecule's stored Hamiltonian. Throws IoError when
/// the molecule has no target.
FitRun cmd_fit(const Molecule& mol, int steps, std::uint64_t seed, const ModelConfig& config,
               const FitOptions& options = {});

BlockMatrix cmd_predict(const Molecule& mol, const ModelParams& params);

/// Five-number report; S defaults to the identity.
RunReport cmd_metrics(const BlockMatrix& pred, const BlockMatrix& truth,
                      const std::optional<Eigen::MatrixXd>& s, int n_occ);

}  // namespace so2frames::cli

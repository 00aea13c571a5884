#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "so2frames/hamiltonian.hpp"
#include "so2frames/irreps.hpp"
#include "so2frames/model.hpp"

namespace so2frames {

/// Malformed or unreadable files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::json;

// Features: {"layout": "4x0e+2x1e", "data": [[row, ...] per block]}.
Json features_to_json(const So3Features& x);
Json features_to_json(const So2Features& x);
So3Features so3_features_from_json(const Json& j);
So2Features so2_features_from_json(const Json& j);

// Matrices. JSON form: {"atomic_numbers", "layout": per-atom orbital lists,
// "data": row-major nested arrays}. Binary form: "SO2FMAT1", N as uint64 LE,
// then N*N float64 LE row-major; it carries no layout.
Json matrix_to_json(const BlockMatrix& m);
BlockMatrix matrix_from_json(const Json& j);
void write_matrix_binary(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_binary(const std::string& path);

/// Writes binary when the path ends in ".bin", JSON otherwise.
void write_matrix(const std::string& path, const BlockMatrix& m);
/// Reads either format (detected by magic). A binary file takes `layout` when
/// given, else a single pseudo-atom holding all rows as s orbitals.
BlockMatrix read_matrix(const std::string& path, const std::optional<OrbitalLayout>& layout = {});

/// {"atoms": [{"z", "pos"}], optional "overlap", optional "hamiltonian"}.
struct Molecule {
  std::vector<int> atomic_numbers;
  std::vector<Eigen::Vector3d> positions;  // Bohr
  std::optional<Eigen::MatrixXd> overlap;
  std::optional<Eigen::MatrixXd> hamiltonian;
};

Json molecule_to_json(const Molecule& m);
Molecule molecule_from_json(const Json& j);

Json config_to_json(const ModelConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
ModelConfig config_from_json(const Json& j, ModelConfig base = {});

/// {"config": ..., "parameters": {name: {"rows", "cols", "data"}}}.
Json checkpoint_to_json(ModelParams& p);
ModelParams checkpoint_from_json(const Json& j);

Json read_json(const std::string& path);
void write_json(const std::string& path, const Json& j);
void write_text(const std::string& path, const std::string& text);

}  // namespace so2frames

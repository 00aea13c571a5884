#include "so2frames/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace so2frames {

namespace {

constexpr char kMatrixMagic[8] = {'S', 'O', '2', 'F', 'M', 'A', 'T', '1'};

Json dense_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd dense_from_json(const Json& j, Eigen::Index cols_if_empty = 0) {
  if (!j.is_array()) throw IoError("matrix data must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : cols_if_empty;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != cols)
      throw IoError("matrix rows must all have the same length");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

template <IrrepKind K>
Json features_json(const Features<K>& x) {
  Json data = Json::array();
  for (std::size_t k = 0; k < x.num_blocks(); ++k) data.push_back(dense_to_json(x.block(k)));
  return Json{{"layout", layout_format(x.layout())}, {"data", std::move(data)}};
}

template <IrrepKind K>
Features<K> features_from(const Json& j) {
  try {
    const IrrepsLayout layout = layout_parse(j.at("layout").get<std::string>());
    if (layout.kind() != K) throw IoError("features layout has the wrong group");
    Features<K> x(layout);
    const Json& data = j.at("data");
    if (data.size() != x.num_blocks()) throw IoError("features data does not match its layout");
    for (std::size_t k = 0; k < x.num_blocks(); ++k) {
      const Eigen::MatrixXd b = dense_from_json(data[k], x.block(k).cols());
      if (b.rows() != x.block(k).rows() || b.cols() != x.block(k).cols())
        throw IoError("features block " + std::to_string(k) + " has the wrong shape");
      x.block(k) = b;
    }
    return x;
  } catch (const Json::exception& e) {
    throw IoError(std::string("features: ") + e.what());
  }
}

void put_u64(std::ostream& os, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) os.put(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) {
    const int c = is.get();
    if (c == EOF) throw IoError("truncated binary matrix header");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * b);
  }
  return v;
}

bool has_matrix_magic(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char buf[8] = {};
  is.read(buf, 8);
  return is.gcount() == 8 && std::memcmp(buf, kMatrixMagic, 8) == 0;
}

}  // namespace

Json features_to_json(const So3Features& x) { return features_json(x); }
Json features_to_json(const So2Features& x) { return features_json(x); }
So3Features so3_features_from_json(const Json& j) { return features_from<IrrepKind::SO3>(j); }
So2Features so2_features_from_json(const Json& j) { return features_from<IrrepKind::SO2>(j); }

Json matrix_to_json(const BlockMatrix& m) {
  Json layout = Json::array();
  for (std::size_t a = 0; a < m.layout.num_atoms(); ++a) layout.push_back(m.layout.orbitals(a));
  return Json{{"atomic_numbers", m.layout.atomic_numbers()}, {"layout", layout},
              {"data", dense_to_json(m.data)}};
}

BlockMatrix matrix_from_json(const Json& j) {
  try {
    const auto orbitals = j.at("layout").get<std::vector<std::vector<int>>>();
    std::vector<int> z(orbitals.size(), 0);
    if (j.contains("atomic_numbers")) z = j.at("atomic_numbers").get<std::vector<int>>();
    BlockMatrix m{OrbitalLayout(z, orbitals), dense_from_json(j.at("data"))};
    if (m.data.rows() != m.layout.dim() || m.data.cols() != m.layout.dim())
      throw IoError("matrix is " + std::to_string(m.data.rows()) + "x" + std::to_string(m.data.cols()) +
                    " but its layout has dimension " + std::to_string(m.layout.dim()));
    return m;
  } catch (const Json::exception& e) {
    throw IoError(std::string("matrix: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("matrix: ") + e.what());
  }
}

void write_matrix_binary(const std::string& path, const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw IoError("binary matrices must be square");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os.write(kMatrixMagic, 8);
  put_u64(os, static_cast<std::uint64_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_u64(os, std::bit_cast<std::uint64_t>(m(r, c)));
  if (!os) throw IoError("write failed for " + path);
}

Eigen::MatrixXd read_matrix_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[8] = {};
  is.read(magic, 8);
  if (is.gcount() != 8 || std::memcmp(magic, kMatrixMagic, 8) != 0)
    throw IoError(path + " is not a binary matrix file");
  const std::uint64_t n = get_u64(is);
  if (n > 1u << 16) throw IoError(path + ": implausible dimension " + std::to_string(n));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      try {
        m(r, c) = std::bit_cast<double>(get_u64(is));
      } catch (const IoError&) {
        throw IoError(path + ": truncated matrix data");
      }
    }
  if (is.peek() != EOF) throw IoError(path + ": trailing bytes after matrix data");
  return m;
}

void write_matrix(const std::string& path, const BlockMatrix& m) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0)
    write_matrix_binary(path, m.data);
  else
    write_json(path, matrix_to_json(m));
}

BlockMatrix read_matrix(const std::string& path, const std::optional<OrbitalLayout>& layout) {
  if (!has_matrix_magic(path)) return matrix_from_json(read_json(path));
  Eigen::MatrixXd data = read_matrix_binary(path);
  OrbitalLayout l = layout ? *layout
                           : OrbitalLayout({0}, {std::vector<int>(static_cast<std::size_t>(data.rows()), 0)});
  if (l.dim() != data.rows())
    throw IoError(path + ": dimension " + std::to_string(data.rows()) + " does not match layout " +
                  std::to_string(l.dim()));
  return BlockMatrix{std::move(l), std::move(data)};
}

Json molecule_to_json(const Molecule& m) {
  Json atoms = Json::array();
  for (std::size_t a = 0; a < m.atomic_numbers.size(); ++a) {
    const auto& p = m.positions[a];
    atoms.push_back(Json{{"z", m.atomic_numbers[a]}, {"pos", {p.x(), p.y(), p.z()}}});
  }
  Json j{{"atoms", atoms}};
  if (m.overlap) j["overlap"] = dense_to_json(*m.overlap);
  if (m.hamiltonian) j["hamiltonian"] = dense_to_json(*m.hamiltonian);
  return j;
}

Molecule molecule_from_json(const Json& j) {
  try {
    Molecule m;
    for (const auto& a : j.at("atoms")) {
      m.atomic_numbers.push_back(a.at("z").get<int>());
      const auto p = a.at("pos").get<std::vector<double>>();
      if (p.size() != 3) throw IoError("atom position must have three components");
      m.positions.emplace_back(p[0], p[1], p[2]);
    }
    if (j.contains("overlap")) m.overlap = dense_from_json(j.at("overlap"));
    if (j.contains("hamiltonian")) m.hamiltonian = dense_from_json(j.at("hamiltonian"));
    return m;
  } catch (const Json::exception& e) {
    throw IoError(std::string("molecule: ") + e.what());
  }
}

Json config_to_json(const ModelConfig& c) {
  Json basis = Json::object();
  for (const auto& [z, ls] : c.basis.orbitals) basis[std::to_string(z)] = ls;
  return Json{{"hidden", c.hidden},           {"l_max", c.l_max()},
              {"m_max", c.m_max},             {"v", c.v},
              {"tp_channels", c.tp_channels}, {"layers", c.layers},
              {"cutoff", c.cutoff},           {"rbf_count", c.rbf_count},
              {"embed_width", c.embed_width}, {"elements", c.elements},
              {"basis", basis},               {"seed", c.seed}};
}

ModelConfig config_from_json(const Json& j, ModelConfig c) {
  static const std::set<std::string> known = {"hidden", "l_max", "m_max", "v", "tp_channels", "layers",
                                              "cutoff", "rbf_count", "embed_width", "elements",
                                              "basis", "seed"};
  try {
    if (!j.is_object()) throw IoError("config must be a JSON object");
    for (const auto& [k, v] : j.items())
      if (!known.count(k)) throw IoError("config: unknown key '" + k + "'");
    if (j.contains("hidden")) c.hidden = j["hidden"].get<std::string>();
    if (j.contains("m_max")) c.m_max = j["m_max"].get<int>();
    if (j.contains("v")) c.v = j["v"].get<int>();
    if (j.contains("tp_channels")) c.tp_channels = j["tp_channels"].get<int>();
    if (j.contains("layers")) c.layers = j["layers"].get<int>();
    if (j.contains("cutoff")) c.cutoff = j["cutoff"].get<double>();
    if (j.contains("rbf_count")) c.rbf_count = j["rbf_count"].get<int>();
    if (j.contains("embed_width")) c.embed_width = j["embed_width"].get<int>();
    if (j.contains("elements")) c.elements = j["elements"].get<std::vector<int>>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("basis")) {
      c.basis.orbitals.clear();
      for (const auto& [z, ls] : j["basis"].items()) c.basis.orbitals[std::stoi(z)] = ls.get<std::vector<int>>();
    }
    // l_max is derived from the hidden layout; a stored value must agree.
    if (j.contains("l_max") && j["l_max"].get<int>() != c.l_max())
      throw IoError("config: l_max disagrees with the hidden layout");
    return c;
  } catch (const Json::exception& e) {
    throw IoError(std::string("config: ") + e.what());
  }
}

Json checkpoint_to_json(ModelParams& p) {
  Json params = Json::object();
  p.visit([&](const std::string& name, Eigen::MatrixXd& m) {
    Json data = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    params[name] = Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
  });
  return Json{{"config", config_to_json(p.config)}, {"parameters", std::move(params)}};
}

ModelParams checkpoint_from_json(const Json& j) {
  try {
    const ModelConfig cfg = config_from_json(j.at("config"));
    ModelParams p = ModelParams::init(cfg);
    const Json& params = j.at("parameters");
    std::size_t seen = 0;
    p.visit([&](const std::string& name, Eigen::MatrixXd& m) {
      if (!params.contains(name)) throw IoError("checkpoint: missing parameter " + name);
      const Json& e = params[name];
      const auto rows = e.at("rows").get<Eigen::Index>(), cols = e.at("cols").get<Eigen::Index>();
      const Json& data = e.at("data");
      if (rows != m.rows() || cols != m.cols() || static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw IoError("checkpoint: parameter " + name + " has the wrong shape");
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[r * cols + c].get<double>();
      ++seen;
    });
    if (seen != params.size()) throw IoError("checkpoint: unexpected extra parameters");
    return p;
  } catch (const Json::exception& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
}

Json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  try {
    return Json::parse(is);
  } catch (const Json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(1) + "\n"); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << text;
  if (!os) throw IoError("write failed for " + path);
}

}  // namespace so2frames

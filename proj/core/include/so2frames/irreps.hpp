#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace so2frames {

/// Highest degree/order any container or Wigner cache may carry.
inline constexpr int kDegreeCap = 8;

enum class IrrepKind { SO3, SO2 };

struct IrrepEntry {
  int index = 0;         // degree l (SO3) or order m (SO2)
  int multiplicity = 0;  // channel count
  bool operator==(const IrrepEntry&) const = default;
};

/// Thrown for malformed layout strings and for any shape/layout mismatch
/// detected at an operation boundary.
class LayoutError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Ordered (index, multiplicity) list. Entries are strictly ascending by index.
class IrrepsLayout {
 public:
  IrrepsLayout() = default;
  IrrepsLayout(IrrepKind kind, std::vector<IrrepEntry> entries);

  /// Same multiplicity for every index 0..max_index.
  static IrrepsLayout uniform(IrrepKind kind, int multiplicity, int max_index);

  IrrepKind kind() const { return kind_; }
  const std::vector<IrrepEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const IrrepEntry& operator[](std::size_t i) const { return entries_[i]; }

  /// Component width of one channel at this index: 2l+1 for SO3,
  /// 1 (m = 0) or 2 (m > 0) for SO2.
  int width(int index) const;
  /// Total scalar length, sum of multiplicity * width.
  std::size_t dim() const;
  /// Total channel count, sum of multiplicities.
  int channels() const;
  int max_index() const { return entries_.empty() ? -1 : entries_.back().index; }
  /// Position of `index` in entries(), or -1 when absent.
  int find(int index) const;
  int multiplicity(int index) const;

  std::string to_string() const;

  bool operator==(const IrrepsLayout&) const = default;

 private:
  IrrepKind kind_ = IrrepKind::SO3;
  std::vector<IrrepEntry> entries_;
};

/// Parses "4x0e+2x1e" (SO3) or "4x0m+2x1m" (SO2). Entries may appear in any
/// order; the result is sorted. Throws LayoutError on malformed tokens,
/// duplicate indices or mixed suffixes.
IrrepsLayout layout_parse(std::string_view spec);
std::string layout_format(const IrrepsLayout& layout);

/// The SO(2) layout obtained by regrouping an SO(3) layout by order: order m
/// carries the channels of every degree l >= m, in ascending l.
IrrepsLayout regrouped_layout(const IrrepsLayout& so3);

/// Multi-channel irrep coefficients. Block i belongs to layout()[i] and has
/// shape (multiplicity, width). SO3 columns run m = -l..l; SO2 columns are
/// (x_{-m}, x_{+m}) for m > 0 and a single column for m = 0.
template <IrrepKind K>
class Features {
 public:
  Features() : layout_(K, {}) {}
  explicit Features(IrrepsLayout layout);

  static Features zeros(const IrrepsLayout& layout) { return Features(layout); }

  const IrrepsLayout& layout() const { return layout_; }
  std::size_t num_blocks() const { return blocks_.size(); }
  Eigen::MatrixXd& block(std::size_t i) { return blocks_[i]; }
  const Eigen::MatrixXd& block(std::size_t i) const { return blocks_[i]; }
  /// Block of a given degree/order; throws LayoutError when absent.
  Eigen::MatrixXd& at(int index);
  const Eigen::MatrixXd& at(int index) const;
  bool has(int index) const { return layout_.find(index) >= 0; }

  /// Flattened view in block order, row-major within each block.
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& flat);

  void set_zero();
  Features& operator+=(const Features& other);
  Features& operator-=(const Features& other);
  Features& operator*=(double s);
  void axpy(double a, const Features& x);
  double dot(const Features& other) const;
  double squared_norm() const { return dot(*this); }
  double max_abs() const;

 private:
  void check_same_layout(const Features& other) const;

  IrrepsLayout layout_;
  std::vector<Eigen::MatrixXd> blocks_;
};

using So3Features = Features<IrrepKind::SO3>;
using So2Features = Features<IrrepKind::SO2>;

template <IrrepKind K>
Features<K> operator+(Features<K> a, const Features<K>& b) {
  a += b;
  return a;
}
template <IrrepKind K>
Features<K> operator-(Features<K> a, const Features<K>& b) {
  a -= b;
  return a;
}
template <IrrepKind K>
Features<K> operator*(double s, Features<K> a) {
  a *= s;
  return a;
}

template <IrrepKind K>
double max_abs_diff(const Features<K>& a, const Features<K>& b) {
  return (a - b).max_abs();
}

/// Channel-wise concatenation per index (a's channels first). Both inputs
/// must cover the same indices.
So2Features concat_channels(const So2Features& a, const So2Features& b);
/// Inverse of concat_channels; `first` gives the channel count of the head.
std::pair<So2Features, So2Features> split_channels(const So2Features& x,
                                                   const IrrepsLayout& first,
                                                   const IrrepsLayout& second);

// ---------------------------------------------------------------------------
// Harmonic bases
// ---------------------------------------------------------------------------

/// Real orthonormal spherical harmonics, one channel per degree 0..l_max.
///
/// The polar axis is the fixed target axis y. Within a degree, component
/// m > 0 carries the cos(m psi) part and m < 0 the sin(m psi) part of the
/// azimuth psi measured from z towards x; no Condon-Shortley phase. With this
/// choice degree 1 is (x, y, z) * sqrt(3 / 4pi).
So3Features real_spherical_harmonics(int l_max, const Eigen::Vector3d& direction);

/// B^0 = [1], B^m(delta) = [sin(m delta), cos(m delta)] for m = 1..m_max.
So2Features circular_harmonics(int m_max, double delta);

/// Action of the stabilizer rotation by `phi` on SO(2) features: per order m,
/// (x_{-m}, x_{+m}) <- [[cos m phi, sin m phi], [-sin m phi, cos m phi]] (x_{-m}, x_{+m}).
/// In the complex view x_{+m} + i x_{-m} this is multiplication by e^{i m phi}.
So2Features rotate_so2(const So2Features& x, double phi);

}  // namespace so2frames

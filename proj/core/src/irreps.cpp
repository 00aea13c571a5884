#include "so2frames/irreps.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

namespace so2frames {

namespace {

char suffix_of(IrrepKind kind) { return kind == IrrepKind::SO3 ? 'e' : 'm'; }

int parse_int(std::string_view text, std::string_view token) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
    throw LayoutError("malformed irreps token '" + std::string(token) + "'");
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

IrrepsLayout::IrrepsLayout(IrrepKind kind, std::vector<IrrepEntry> entries)
    : kind_(kind), entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.index < 0) throw LayoutError("negative irrep index");
    if (e.index > kDegreeCap)
      throw LayoutError("irrep index " + std::to_string(e.index) + " exceeds cap " +
                        std::to_string(kDegreeCap));
    if (e.multiplicity <= 0) throw LayoutError("multiplicity must be positive");
    if (i > 0 && entries_[i - 1].index >= e.index)
      throw LayoutError("irreps entries must be strictly ascending");
  }
}

IrrepsLayout IrrepsLayout::uniform(IrrepKind kind, int multiplicity, int max_index) {
  std::vector<IrrepEntry> entries;
  for (int i = 0; i <= max_index; ++i) entries.push_back({i, multiplicity});
  return IrrepsLayout(kind, std::move(entries));
}

int IrrepsLayout::width(int index) const {
  if (kind_ == IrrepKind::SO3) return 2 * index + 1;
  return index == 0 ? 1 : 2;
}

std::size_t IrrepsLayout::dim() const {
  std::size_t total = 0;
  for (const auto& e : entries_) total += static_cast<std::size_t>(e.multiplicity * width(e.index));
  return total;
}

int IrrepsLayout::channels() const {
  int total = 0;
  for (const auto& e : entries_) total += e.multiplicity;
  return total;
}

int IrrepsLayout::find(int index) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].index == index) return static_cast<int>(i);
  return -1;
}

int IrrepsLayout::multiplicity(int index) const {
  const int i = find(index);
  return i < 0 ? 0 : entries_[i].multiplicity;
}

std::string IrrepsLayout::to_string() const { return layout_format(*this); }

IrrepsLayout layout_parse(std::string_view spec) {
  spec = trim(spec);
  if (spec.empty()) throw LayoutError("empty irreps spec");

  std::vector<IrrepEntry> entries;
  char suffix = 0;
  while (true) {
    const auto plus = spec.find('+');
    const auto token = trim(spec.substr(0, plus));
    const auto x = token.find('x');
    if (x == std::string_view::npos || token.size() < x + 3)
      throw LayoutError("malformed irreps token '" + std::string(token) + "'");
    const char s = token.back();
    if (s != 'e' && s != 'm')
      throw LayoutError("irreps token '" + std::string(token) + "' must end in 'e' or 'm'");
    if (suffix != 0 && s != suffix) throw LayoutError("mixed 'e' and 'm' suffixes in irreps spec");
    suffix = s;

    const int mult = parse_int(token.substr(0, x), token);
    const int index = parse_int(token.substr(x + 1, token.size() - x - 2), token);
    if (mult <= 0) throw LayoutError("multiplicity must be positive in '" + std::string(token) + "'");
    for (const auto& e : entries)
      if (e.index == index)
        throw LayoutError("duplicate irrep index " + std::to_string(index));
    entries.push_back({index, mult});

    if (plus == std::string_view::npos) break;
    spec = spec.substr(plus + 1);
  }
  std::sort(entries.begin(), entries.end(),
            [](const IrrepEntry& a, const IrrepEntry& b) { return a.index < b.index; });
  return IrrepsLayout(suffix == 'e' ? IrrepKind::SO3 : IrrepKind::SO2, std::move(entries));
}

std::string layout_format(const IrrepsLayout& layout) {
  std::string out;
  for (const auto& e : layout.entries()) {
    if (!out.empty()) out += '+';
    out += std::to_string(e.multiplicity) + 'x' + std::to_string(e.index) + suffix_of(layout.kind());
  }
  return out;
}

IrrepsLayout regrouped_layout(const IrrepsLayout& so3) {
  if (so3.kind() != IrrepKind::SO3) throw LayoutError("regrouped_layout expects an SO3 layout");
  std::vector<IrrepEntry> entries;
  for (int m = 0; m <= so3.max_index(); ++m) {
    int mult = 0;
    for (const auto& e : so3.entries())
      if (e.index >= m) mult += e.multiplicity;
    if (mult > 0) entries.push_back({m, mult});
  }
  return IrrepsLayout(IrrepKind::SO2, std::move(entries));
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

template <IrrepKind K>
Features<K>::Features(IrrepsLayout layout) : layout_(std::move(layout)) {
  if (layout_.kind() != K) throw LayoutError("feature container kind does not match layout kind");
  blocks_.reserve(layout_.size());
  for (const auto& e : layout_.entries())
    blocks_.push_back(Eigen::MatrixXd::Zero(e.multiplicity, layout_.width(e.index)));
}

template <IrrepKind K>
Eigen::MatrixXd& Features<K>::at(int index) {
  const int i = layout_.find(index);
  if (i < 0) throw LayoutError("layout has no index " + std::to_string(index));
  return blocks_[i];
}

template <IrrepKind K>
const Eigen::MatrixXd& Features<K>::at(int index) const {
  const int i = layout_.find(index);
  if (i < 0) throw LayoutError("layout has no index " + std::to_string(index));
  return blocks_[i];
}

template <IrrepKind K>
Eigen::VectorXd Features<K>::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(layout_.dim()));
  Eigen::Index k = 0;
  for (const auto& b : blocks_)
    for (Eigen::Index r = 0; r < b.rows(); ++r)
      for (Eigen::Index c = 0; c < b.cols(); ++c) flat[k++] = b(r, c);
  return flat;
}

template <IrrepKind K>
void Features<K>::unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(layout_.dim()))
    throw LayoutError("flat vector length does not match layout");
  Eigen::Index k = 0;
  for (auto& b : blocks_)
    for (Eigen::Index r = 0; r < b.rows(); ++r)
      for (Eigen::Index c = 0; c < b.cols(); ++c) b(r, c) = flat[k++];
}

template <IrrepKind K>
void Features<K>::set_zero() {
  for (auto& b : blocks_) b.setZero();
}

template <IrrepKind K>
void Features<K>::check_same_layout(const Features& other) const {
  if (!(layout_ == other.layout_))
    throw LayoutError("layout mismatch: " + layout_.to_string() + " vs " + other.layout_.to_string());
}

template <IrrepKind K>
Features<K>& Features<K>::operator+=(const Features& other) {
  check_same_layout(other);
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i] += other.blocks_[i];
  return *this;
}

template <IrrepKind K>
Features<K>& Features<K>::operator-=(const Features& other) {
  check_same_layout(other);
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i] -= other.blocks_[i];
  return *this;
}

template <IrrepKind K>
Features<K>& Features<K>::operator*=(double s) {
  for (auto& b : blocks_) b *= s;
  return *this;
}

template <IrrepKind K>
void Features<K>::axpy(double a, const Features& x) {
  check_same_layout(x);
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i] += a * x.blocks_[i];
}

template <IrrepKind K>
double Features<K>::dot(const Features& other) const {
  check_same_layout(other);
  double s = 0.0;
  for (std::size_t i = 0; i < blocks_.size(); ++i) s += blocks_[i].cwiseProduct(other.blocks_[i]).sum();
  return s;
}

template <IrrepKind K>
double Features<K>::max_abs() const {
  double m = 0.0;
  for (const auto& b : blocks_)
    if (b.size() > 0) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

template class Features<IrrepKind::SO3>;
template class Features<IrrepKind::SO2>;

So2Features concat_channels(const So2Features& a, const So2Features& b) {
  const auto& la = a.layout();
  const auto& lb = b.layout();
  if (la.size() != lb.size()) throw LayoutError("concat_channels: order sets differ");
  std::vector<IrrepEntry> entries;
  for (std::size_t i = 0; i < la.size(); ++i) {
    if (la[i].index != lb[i].index) throw LayoutError("concat_channels: order sets differ");
    entries.push_back({la[i].index, la[i].multiplicity + lb[i].multiplicity});
  }
  So2Features out(IrrepsLayout(IrrepKind::SO2, std::move(entries)));
  for (std::size_t i = 0; i < la.size(); ++i) {
    out.block(i).topRows(a.block(i).rows()) = a.block(i);
    out.block(i).bottomRows(b.block(i).rows()) = b.block(i);
  }
  return out;
}

std::pair<So2Features, So2Features> split_channels(const So2Features& x, const IrrepsLayout& first,
                                                   const IrrepsLayout& second) {
  So2Features a(first), b(second);
  if (first.size() != x.num_blocks() || second.size() != x.num_blocks())
    throw LayoutError("split_channels: layout mismatch");
  for (std::size_t i = 0; i < x.num_blocks(); ++i) {
    if (first[i].multiplicity + second[i].multiplicity != x.block(i).rows())
      throw LayoutError("split_channels: channel counts do not add up");
    a.block(i) = x.block(i).topRows(first[i].multiplicity);
    b.block(i) = x.block(i).bottomRows(second[i].multiplicity);
  }
  return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// Harmonics
// ---------------------------------------------------------------------------

So3Features real_spherical_harmonics(int l_max, const Eigen::Vector3d& direction) {
  if (l_max < 0 || l_max > kDegreeCap) throw LayoutError("l_max out of range");
  if (!(std::abs(direction.norm() - 1.0) <= 1e-12))
    throw std::invalid_argument("real_spherical_harmonics: direction must be a unit vector");

  // Polar coordinate t = cos(theta) along y; in-plane (a, b) = (z, x).
  const double t = direction.y();
  const double a = direction.z();
  const double b = direction.x();

  So3Features out(IrrepsLayout::uniform(IrrepKind::SO3, 1, l_max));

  // q[l][m] = P_l^m(t) / sin^m(theta), a polynomial in t.
  std::vector<std::vector<double>> q(l_max + 1, std::vector<double>(l_max + 1, 0.0));
  double diag = 1.0;
  for (int m = 0; m <= l_max; ++m) {
    if (m > 0) diag *= (2 * m - 1);
    q[m][m] = diag;
    if (m + 1 <= l_max) q[m + 1][m] = (2 * m + 1) * t * diag;
    for (int l = m + 2; l <= l_max; ++l)
      q[l][m] = ((2 * l - 1) * t * q[l - 1][m] - (l + m - 1) * q[l - 2][m]) / (l - m);
  }

  // (a + i b)^m = sin^m(theta) e^{i m psi}
  std::vector<double> re(l_max + 1), im(l_max + 1);
  re[0] = 1.0;
  im[0] = 0.0;
  for (int m = 1; m <= l_max; ++m) {
    re[m] = re[m - 1] * a - im[m - 1] * b;
    im[m] = re[m - 1] * b + im[m - 1] * a;
  }

  for (int l = 0; l <= l_max; ++l) {
    auto& blk = out.at(l);
    double fact_ratio = 1.0;  // (l - m)! / (l + m)!
    for (int m = 0; m <= l; ++m) {
      if (m > 0) fact_ratio /= static_cast<double>((l + m) * (l - m + 1));
      const double norm = std::sqrt((2 * l + 1) / (4.0 * std::numbers::pi) * fact_ratio);
      if (m == 0) {
        blk(0, l) = norm * q[l][0];
      } else {
        blk(0, l + m) = std::numbers::sqrt2 * norm * q[l][m] * re[m];
        blk(0, l - m) = std::numbers::sqrt2 * norm * q[l][m] * im[m];
      }
    }
  }
  return out;
}

So2Features circular_harmonics(int m_max, double delta) {
  So2Features out(IrrepsLayout::uniform(IrrepKind::SO2, 1, m_max));
  out.at(0)(0, 0) = 1.0;
  for (int m = 1; m <= m_max; ++m) {
    out.at(m)(0, 0) = std::sin(m * delta);
    out.at(m)(0, 1) = std::cos(m * delta);
  }
  return out;
}

So2Features rotate_so2(const So2Features& x, double phi) {
  So2Features out = x;
  for (std::size_t i = 0; i < x.num_blocks(); ++i) {
    const int m = x.layout()[i].index;
    if (m == 0) continue;
    const double c = std::cos(m * phi), s = std::sin(m * phi);
    const auto& in = x.block(i);
    auto& o = out.block(i);
    o.col(0) = c * in.col(0) + s * in.col(1);
    o.col(1) = -s * in.col(0) + c * in.col(1);
  }
  return out;
}

}  // namespace so2frames

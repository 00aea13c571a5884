#include "report.hpp"

#include <cstdio>
#include <sstream>

namespace so2frames::cli {

namespace {

const char* kind_name(CheckKind k) {
  switch (k) {
    case CheckKind::MaxError: return "max_error";
    case CheckKind::Count: return "count";
    case CheckKind::Slope: return "slope";
    case CheckKind::Value: return "value";
    case CheckKind::Timing: return "timing";
  }
  return "value";
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

bool Check::pass() const {
  if (expected && (!count || *count != *expected)) return false;
  if (lower && !(value >= *lower)) return false;
  if (upper) {
    const bool strict = kind == CheckKind::MaxError && !inclusive;
    if (strict ? !(value < *upper) : !(value <= *upper)) return false;
  }
  return true;
}

void RunReport::max_error(const std::string& name, double v, double tolerance) {
  Check c{name, CheckKind::MaxError, v};
  c.upper = tolerance;
  checks.push_back(c);
}

void RunReport::exact_zero(const std::string& name, double v) {
  Check c{name, CheckKind::MaxError, v};
  c.upper = 0.0;
  c.inclusive = true;
  checks.push_back(c);
}

void RunReport::count(const std::string& name, std::uint64_t v, std::optional<std::uint64_t> expected) {
  Check c{name, CheckKind::Count, static_cast<double>(v)};
  c.count = v;
  c.expected = expected;
  checks.push_back(c);
}

void RunReport::slope(const std::string& name, double v, std::optional<double> lo, std::optional<double> hi) {
  Check c{name, CheckKind::Slope, v};
  c.lower = lo;
  c.upper = hi;
  checks.push_back(c);
}

void RunReport::value(const std::string& name, double v) { checks.push_back(Check{name, CheckKind::Value, v}); }

void RunReport::timing(const std::string& name, double seconds) {
  checks.push_back(Check{name, CheckKind::Timing, seconds});
}

bool RunReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass()) return false;
  return true;
}

const Check* RunReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

Json RunReport::to_json(bool include_timing) const {
  Json list = Json::array();
  for (const auto& c : checks) {
    if (c.kind == CheckKind::Timing && !include_timing) continue;
    Json j{{"name", c.name}, {"kind", kind_name(c.kind)}};
    if (c.count)
      j["value"] = *c.count;
    else
      j["value"] = c.value;
    if (c.lower) j["lower"] = *c.lower;
    if (c.upper) j["upper"] = *c.upper;
    if (c.expected) j["expected"] = *c.expected;
    j["verdict"] = !c.gated() ? "INFO" : (c.pass() ? "PASS" : "FAIL");
    list.push_back(std::move(j));
  }
  return Json{{"command", command}, {"seed", seed},       {"config", config},
              {"checks", list},     {"data", data},       {"verdict", all_pass() ? "PASS" : "FAIL"}};
}

std::string RunReport::to_text() const {
  std::ostringstream os;
  os << command << " (seed " << seed << ")\n";
  for (const auto& c : checks) {
    os << (!c.gated() ? "INFO" : (c.pass() ? "PASS" : "FAIL")) << "  " << c.name << " = "
       << (c.count ? std::to_string(*c.count) : fmt(c.value));
    if (c.kind == CheckKind::Timing) os << " s";
    if (c.expected) os << "  (expected " << *c.expected << ")";
    if (c.lower && c.upper)
      os << "  (range [" << fmt(*c.lower) << ", " << fmt(*c.upper) << "])";
    else if (c.upper)
      os << "  (tolerance " << fmt(*c.upper) << ")";
    else if (c.lower)
      os << "  (minimum " << fmt(*c.lower) << ")";
    os << "\n";
  }
  os << "verdict: " << (all_pass() ? "PASS" : "FAIL") << "\n";
  return os.str();
}

}  // namespace so2frames::cli

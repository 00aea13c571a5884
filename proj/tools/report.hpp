#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "so2frames/serialize.hpp"

namespace so2frames::cli {

enum class CheckKind { MaxError, Count, Slope, Value, Timing };

/// One recorded number and, when bounds are set, its verdict.
struct Check {
  Check(std::string n, CheckKind k, double v) : name(std::move(n)), kind(k), value(v) {}

  std::string name;
  CheckKind kind = CheckKind::Value;
  double value = 0.0;
  std::optional<std::uint64_t> count;  // exact integer for CheckKind::Count
  std::optional<double> lower;         // pass requires value >= lower
  std::optional<double> upper;         // pass requires value < upper (max errors) or <= upper (slopes)
  std::optional<std::uint64_t> expected;
  bool inclusive = false;  // upper bound admits equality

  bool gated() const { return lower || upper || expected; }
  bool pass() const;
};

struct RunReport {
  std::string command;
  Json config = Json::object();
  std::uint64_t seed = 0;
  std::vector<Check> checks;
  /// Deterministic tables (counts per degree and the like).
  Json data = Json::object();

  /// Passes when value < tolerance.
  void max_error(const std::string& name, double value, double tolerance);
  /// Passes only when value is exactly zero.
  void exact_zero(const std::string& name, double value);
  void count(const std::string& name, std::uint64_t value, std::optional<std::uint64_t> expected = {});
  /// Passes when lo <= value <= hi.
  void slope(const std::string& name, double value, std::optional<double> lo = {},
             std::optional<double> hi = {});
  void value(const std::string& name, double value);
  /// Informational only, never gated; dropped by to_json(false).
  void timing(const std::string& name, double seconds);

  bool all_pass() const;
  const Check* find(const std::string& name) const;
  Json to_json(bool include_timing = true) const;
  std::string to_text() const;
};

}  // namespace so2frames::cli

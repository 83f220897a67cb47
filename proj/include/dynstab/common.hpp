#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dynstab {

// Exact rational arithmetic end-to-end; verdicts compare payoffs for strict
// inequalities, so no floating point appears anywhere in the solver.
using Rational = boost::multiprecision::cpp_rational;

using AgentId = int;

enum class Side { A, B };

inline Side opposite(Side s) { return s == Side::A ? Side::B : Side::A; }
inline const char* side_name(Side s) { return s == Side::A ? "A" : "B"; }

/// base^exp for exp >= 0.
inline Rational rational_pow(const Rational& base, int exp) {
  if (exp < 0) throw std::domain_error("rational_pow: negative exponent");
  Rational out{1};
  for (int i = 0; i < exp; ++i) out *= base;
  return out;
}

inline std::string rational_str(const Rational& r) {
  return r.str();
}

inline constexpr std::uint64_t kDefaultEnumerationLimit = 10'000'000;

/// Thrown when exhaustive matching enumeration would exceed the budget.
struct EconomyTooLarge : std::runtime_error {
  std::uint64_t limit;
  explicit EconomyTooLarge(std::uint64_t lim)
      : std::runtime_error("economy too large: candidate matchings exceed limit " +
                           std::to_string(lim)),
        limit(lim) {}
};

/// Thrown when the game's strategy space exceeds the search budget.
struct GameTooLarge : std::runtime_error {
  std::uint64_t limit;
  explicit GameTooLarge(std::uint64_t lim)
      : std::runtime_error("game too large: strategy space exceeds limit " + std::to_string(lim)),
        limit(lim) {}
};

/// Malformed or out-of-schema input document.
struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

struct UnsupportedConfiguration : std::invalid_argument {
  explicit UnsupportedConfiguration(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace dynstab

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace jqc::props {

inline constexpr int kDefaultCases = 200;

/// Thrown by a property check when a case violates the property.
struct Violation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Property {
  std::string module;
  std::string name;
  /// Checks one random case; throws Violation on failure.
  std::function<void(std::mt19937_64&)> check;
};

struct Outcome {
  bool passed = true;
  int cases = 0;
  std::string message;
};

/// Runs `cases` independent cases; case k uses seed (base_seed, k).
Outcome run(const Property& p, int cases = kDefaultCases, std::uint64_t base_seed = 20240601);

/// Every module invariant.
const std::vector<Property>& all_properties();

}  // namespace jqc::props

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace jqc {

inline constexpr double kNormTol = 1e-9;

/**
 * @brief Dense probability table over the 2^n outcomes of an n-bit register.
 */
class ProbDist {
 public:
  ProbDist() = default;
  explicit ProbDist(int register_size);
  /// Takes ownership of `probs`; validates size, non-negativity and norm.
  ProbDist(int register_size, std::vector<double> probs);

  /// Normalizes non-negative weights; throws if their total is zero.
  static ProbDist from_weights(int register_size, std::vector<double> weights);

  int register_size() const { return register_size_; }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& values() const { return probs_; }
  double total() const;

 private:
  int register_size_ = 0;
  std::vector<double> probs_;
};

/**
 * @brief Sparse outcome counts; `shots` always equals the sum of counts.
 */
class CountsTable {
 public:
  CountsTable() = default;
  explicit CountsTable(int register_size) : register_size_(register_size) {}

  int register_size() const { return register_size_; }
  std::uint64_t shots() const { return shots_; }
  const std::map<std::uint64_t, std::uint64_t>& counts() const { return counts_; }

  void add(std::uint64_t outcome, std::uint64_t count = 1);
  std::uint64_t count(std::uint64_t outcome) const;

  ProbDist normalized() const;

  friend bool operator==(const CountsTable&, const CountsTable&) = default;

 private:
  int register_size_ = 0;
  std::uint64_t shots_ = 0;
  std::map<std::uint64_t, std::uint64_t> counts_;
};

/// Bitstring with the most significant qubit first.
std::string to_bitstring(std::uint64_t value, int width);
std::uint64_t from_bitstring(const std::string& bits);

}  // namespace jqc

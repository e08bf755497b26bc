#include "jqc/prob.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace jqc {

namespace {
std::size_t table_size(int register_size) {
  if (register_size < 0 || register_size > 30) {
    throw std::invalid_argument("register size out of range for a dense table");
  }
  return std::size_t{1} << register_size;
}
}  // namespace

ProbDist::ProbDist(int register_size)
    : register_size_(register_size), probs_(table_size(register_size), 0.0) {
  probs_[0] = 1.0;
}

ProbDist::ProbDist(int register_size, std::vector<double> probs)
    : register_size_(register_size), probs_(std::move(probs)) {
  if (probs_.size() != table_size(register_size)) {
    throw std::invalid_argument("ProbDist: table length does not match register size");
  }
  for (double v : probs_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("ProbDist: negative or non-finite entry");
    }
  }
  if (std::abs(total() - 1.0) > kNormTol) {
    throw std::invalid_argument("ProbDist: entries do not sum to 1");
  }
}

ProbDist ProbDist::from_weights(int register_size, std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("ProbDist: negative or non-finite weight");
    }
    sum += w;
  }
  if (!(sum > 0.0)) throw std::domain_error("ProbDist: all weights are zero");
  for (double& w : weights) w /= sum;
  return {register_size, std::move(weights)};
}

double ProbDist::total() const {
  return std::accumulate(probs_.begin(), probs_.end(), 0.0);
}

void CountsTable::add(std::uint64_t outcome, std::uint64_t count) {
  if (register_size_ < 64 && (outcome >> register_size_) != 0) {
    throw std::invalid_argument("outcome exceeds register size");
  }
  if (count == 0) return;
  counts_[outcome] += count;
  shots_ += count;
}

std::uint64_t CountsTable::count(std::uint64_t outcome) const {
  auto it = counts_.find(outcome);
  return it == counts_.end() ? 0 : it->second;
}

ProbDist CountsTable::normalized() const {
  std::vector<double> w(table_size(register_size_), 0.0);
  for (const auto& [k, c] : counts_) w[k] = static_cast<double>(c);
  return ProbDist::from_weights(register_size_, std::move(w));
}

std::string to_bitstring(std::uint64_t value, int width) {
  std::string s(static_cast<std::size_t>(width), '0');
  for (int b = 0; b < width; ++b) {
    if ((value >> b) & 1U) s[static_cast<std::size_t>(width - 1 - b)] = '1';
  }
  return s;
}

std::uint64_t from_bitstring(const std::string& bits) {
  if (bits.empty() || bits.size() > 64) throw std::invalid_argument("bad bitstring length");
  std::uint64_t v = 0;
  for (char c : bits) {
    if (c != '0' && c != '1') throw std::invalid_argument("bad bitstring '" + bits + "'");
    v = (v << 1) | static_cast<std::uint64_t>(c == '1');
  }
  return v;
}

}  // namespace jqc

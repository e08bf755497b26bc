#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jqc/pauli.hpp"
#include "jqc/statevector.hpp"

namespace jqc {

enum class Topology { Chain, Ladder };

std::string to_string(Topology t);
Topology topology_from_string(std::string_view s);

/**
 * @brief Assignment of every unordered qubit pair (s < t) to a symmetry class.
 *
 * Pairs are stored in row-major upper-triangle order: (0,1), (0,2), ...,
 * (0,N-1), (1,2), ... Class indices are contiguous from 0.
 */
class ClassMap {
 public:
  ClassMap() = default;
  /// `pair_classes` in upper-triangle order; validates contiguity.
  ClassMap(int num_qubits, std::vector<int> pair_classes);

  int num_qubits() const { return num_qubits_; }
  int num_classes() const { return num_classes_; }
  int num_pairs() const { return static_cast<int>(classes_.size()); }
  int class_of(int s, int t) const;
  const std::vector<int>& pair_classes() const { return classes_; }

  static int pair_index(int num_qubits, int s, int t);

  friend bool operator==(const ClassMap&, const ClassMap&) = default;

 private:
  int num_qubits_ = 0;
  int num_classes_ = 0;
  std::vector<int> classes_;
};

/**
 * Chain: one class per distance |s-t| (L-1 classes).
 * Ladder (N = 2L, rungs i <-> i+L): same-chain distance classes kept
 * separate per chain (2(L-1)), plus one class per inter-chain site offset
 * (L). L = 4 gives 10 classes over 28 pairs.
 */
ClassMap build_class_map(Topology topology, int sites);

/// Every pair its own class (N(N-1)/2 parameters).
ClassMap build_all_pairs_map(int num_qubits);

/// Override file: one `s t class_index` line per pair.
ClassMap read_class_map(std::istream& is, int num_qubits);
void write_class_map(std::ostream& os, const ClassMap& map);

/**
 * @brief Two-body spin Jastrow factor exp(J), J = sum_{s<t} lambda_c(s,t) Z_s Z_t.
 */
class JastrowParams {
 public:
  JastrowParams() = default;
  /// Zero coefficients.
  explicit JastrowParams(ClassMap map);
  JastrowParams(ClassMap map, std::vector<double> lambda);

  int num_qubits() const { return map_.num_qubits(); }
  int num_classes() const { return map_.num_classes(); }
  const ClassMap& class_map() const { return map_; }
  const std::vector<double>& lambda() const { return lambda_; }
  double pair_lambda(int s, int t) const { return lambda_[static_cast<std::size_t>(map_.class_of(s, t))]; }

  JastrowParams with_lambda(std::vector<double> lambda) const;
  JastrowParams scaled(double factor) const;

 private:
  ClassMap map_;
  std::vector<double> lambda_;
};

/// J evaluated on a computational basis state (qubit k = bit k of `bits`).
double log_weight(std::uint64_t bits, const JastrowParams& jp);
/// Bitstring overload, most significant qubit first; length must equal N.
double log_weight(std::string_view bits, const JastrowParams& jp);
/// J(i) for every i in [0, 2^N).
std::vector<double> log_weight_table(const JastrowParams& jp);

/// J as a Pauli sum.
PauliSum jastrow_operator(const JastrowParams& jp);

inline constexpr int kMaxTruncationOrder = 4;

struct TruncationSpec {
  int order = 1;
};

/// (I + J)^s expanded and merged.
PauliSum truncated_projector(const JastrowParams& jp, TruncationSpec spec);

/// exp(J) expanded exactly as prod over pairs of (cosh l + sinh l Z_s Z_t).
PauliSum exponential_projector(const JastrowParams& jp);

/// <P'HP'> / <P'P'> on psi, with P' = (I + J)^s, evaluated via Pauli sums.
double transformed_energy(const StateVector& psi, const PauliSum& h,
                          const JastrowParams& jp, TruncationSpec spec);

/// Same quotient computed by applying (1 + J(i))^s to the amplitudes.
double truncated_state_energy(const StateVector& psi, const PauliSum& h,
                              const JastrowParams& jp, TruncationSpec spec);

std::size_t term_count(const JastrowParams& jp, TruncationSpec spec);

}  // namespace jqc

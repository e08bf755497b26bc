#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "jqc/jastrow.hpp"
#include "jqc/pauli.hpp"
#include "jqc/prob.hpp"
#include "jqc/statevector.hpp"

namespace jqc {

/// How ancilla weights are applied to the 2L-bit counts.
enum class WeightMode {
  /// w(j) = exp(2 J(j)): matches exp(J) applied to amplitudes.
  Squared,
  /// w(j) = exp(J(j)), the formula read literally.
  Literal,
};

enum class ReconstructionMode {
  /// Positive-amplitude formula.
  Positive,
  /// Column signs solved against an independent bare-circuit measurement.
  SignSolved,
};

struct SamplingConfig {
  std::uint64_t shots = 8192;  // per basis
  int repetitions = 12;
  std::uint64_t seed = 1;
  WeightMode weight_mode = WeightMode::Squared;
  ReconstructionMode reconstruction = ReconstructionMode::Positive;

  void validate() const;
};

/// Stream seed for (repetition, basis group, purpose); stable across runs.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t repetition, std::uint64_t stream);

/**
 * @brief Appends CNOT(q_k -> q_{L+k}) copies and system post-rotations.
 *
 * Qubits [0, L) hold the system, [L, 2L) the ancilla copy; outcome index is
 * j * 2^L + i with ancilla j in the high bits.
 */
Circuit build_entangled_copy(const Circuit& c, const MeasurementBasis& basis);

/// Bare circuit followed by post-rotations, no ancillas.
Circuit build_rotated(const Circuit& c, const MeasurementBasis& basis);

/// Exact outcome distribution of psi after the post-rotations of `basis`.
ProbDist direct_distribution(const StateVector& psi, const MeasurementBasis& basis);

/// Multinomial draw of `shots` outcomes from |psi|^2.
CountsTable sample_counts(const StateVector& psi, std::uint64_t shots, std::uint64_t seed);

/// Multiplies entry j*2^L + i by w(j) and renormalizes.
ProbDist reweight(const ProbDist& raw, const JastrowParams& jp,
                  WeightMode mode = WeightMode::Squared);
ProbDist reweight(const CountsTable& raw, const JastrowParams& jp,
                  WeightMode mode = WeightMode::Squared);

/**
 * @brief Lambda_b(i,j) = 2^{m/2} U_b(i,j), U_b the tensor product of the
 * post-rotation unitaries and m the number of X/Y axes.
 */
class LambdaMatrix {
 public:
  explicit LambdaMatrix(MeasurementBasis basis);

  const MeasurementBasis& basis() const { return basis_; }
  int num_qubits() const { return basis_.size(); }
  std::size_t dimension() const { return dim_; }
  cplx operator()(std::size_t i, std::size_t j) const { return entries_[i * dim_ + j]; }
  bool is_real() const;

 private:
  MeasurementBasis basis_;
  std::size_t dim_ = 0;
  std::vector<cplx> entries_;
};

inline constexpr int kMaxLambdaQubits = 12;

LambdaMatrix lambda_matrix(const MeasurementBasis& basis);

/// Column multipliers s_k in [-1, 1].
struct SignVector {
  std::vector<double> s;

  static SignVector ones(std::size_t n) { return {std::vector<double>(n, 1.0)}; }
  /// Entries rounded to +-1 (zero maps to +1).
  SignVector snapped() const;
};

/// P(i) = |sum_j Lambda(i,j) sqrt(pbar(j 2^L + i))|^2, renormalized.
ProbDist reconstruct_reduced(const ProbDist& pbar, const LambdaMatrix& lambda);
/// Same with column j of Lambda scaled by signs.s[j].
ProbDist reconstruct_reduced(const ProbDist& pbar, const LambdaMatrix& lambda,
                             const SignVector& signs);

struct SignSolveConfig {
  /// Projected-gradient iterations per attempt.
  int max_iterations = 1500;
  double gradient_tol = 1e-13;
  bool discrete_refinement = true;
  /// Extra attempts from random sign vectors while the residual exceeds
  /// `target_residual`.
  int max_restarts = 1024;
  double target_residual = 1e-6;
  std::uint64_t seed = 0x5151;
};

struct SignSolveResult {
  SignVector signs;
  ProbDist reduced;
  /// Euclidean distance between `reduced` and the reference.
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/**
 * @brief Finds column signs so the reconstruction matches an independently
 * measured reference `p0` (no entangled copy, no Jastrow).
 *
 * Starts at all +1, runs box-projected gradient descent on
 * sum_i (R_i(s) - p0_i)^2, then a greedy single-flip search on the rounded
 * signs, keeping the better of the two. While the residual stays above
 * `target_residual`, further attempts start from seeded random sign vectors.
 */
SignSolveResult solve_signs(const ProbDist& pbar, const ProbDist& p0,
                            const MeasurementBasis& basis, const SignSolveConfig& cfg = {});

/// (sum_i |p(i) - p0(i)|^2)^{1/2}.
double reconstruction_error(const ProbDist& p, const ProbDist& p0);

struct SampledEnergy {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::vector<double> per_repetition;

  /// Sample standard deviation across repetitions.
  double dispersion() const;
};

/**
 * @brief JQC energy through the entangled-copy sampling pipeline.
 *
 * For every basis group and repetition: sample the extended circuit, reweight
 * by the ancilla Jastrow weights, reconstruct the reduced distribution and
 * evaluate the group's diagonal terms.
 */
SampledEnergy jqc_energy_sampled(const PauliSum& h, const Circuit& c,
                                 std::span<const double> theta, const JastrowParams& jp,
                                 const SamplingConfig& cfg);
SampledEnergy jqc_energy_sampled(const ModelSpec& model, const Circuit& c,
                                 std::span<const double> theta, const JastrowParams& jp,
                                 const SamplingConfig& cfg);

/// Energy of h from per-basis reduced distributions (keyed like group_by_basis).
double energy_from_distributions(const Grouping& groups, std::span<const ProbDist> reduced);

// Counts file: `# qubits=<n> shots=<S> basis=<axes>` header, then
// `bitstring count` rows with the most significant qubit first.
struct CountsFile {
  CountsTable counts;
  std::string basis;
};
void write_counts(std::ostream& os, const CountsTable& counts, const std::string& basis);
CountsFile read_counts(std::istream& is);

}  // namespace jqc

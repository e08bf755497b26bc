#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jqc/jastrow.hpp"
#include "jqc/pauli.hpp"
#include "jqc/statevector.hpp"

namespace jqc {

using Objective = std::function<double(std::span<const double>)>;

/// Per-coordinate box; +-infinity for unbounded coordinates.
struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;

  static Bounds unbounded(std::size_t n);
  void clamp(std::span<double> x) const;
};

struct OptimizerConfig {
  // Stage 1: bounded Nelder-Mead.
  int stage1_max_evals = 3000;
  double stage1_initial_step = 0.3;
  double stage1_ftol = 1e-12;
  // Stage 2: BFGS with central finite differences.
  int stage2_max_iters = 400;
  double gradient_tol = 1e-9;
  double fd_step = 1e-6;
  int restarts = 5;
  std::uint64_t seed = 1;
  std::optional<std::chrono::steady_clock::time_point> deadline;
  bool record_trace = false;

  void validate() const;
};

struct TraceEntry {
  int restart = 0;
  int evaluation = 0;
  int stage = 0;
  double f = 0.0;
  std::vector<double> x;
};

struct MinimizeResult {
  std::vector<double> x;
  double f = 0.0;
  int evaluations = 0;
  bool converged = false;
  bool budget_exhausted = false;
  bool timed_out = false;
  std::vector<TraceEntry> trace;
};

/**
 * @brief Two-stage local minimization: bounded Nelder-Mead, then BFGS with
 * central-difference gradients. The best point ever evaluated is returned,
 * so f* <= f(x0).
 *
 * Throws std::domain_error if f(x0) is not finite; later non-finite values
 * are treated as +inf.
 */
MinimizeResult minimize(const Objective& f, std::span<const double> x0,
                        const OptimizerConfig& cfg, const Bounds& bounds, int restart = 0);
MinimizeResult minimize(const Objective& f, std::span<const double> x0,
                        const OptimizerConfig& cfg);

/// Central differences, switching to one-sided steps at active bounds.
std::vector<double> finite_difference_gradient(const Objective& f, std::span<const double> x,
                                               double step, const Bounds& bounds);

/// CSV: `restart,evaluation,stage,f,p0,p1,...`.
void write_trace_csv(std::ostream& os, std::span<const TraceEntry> trace);

// ----------------------------------------------------------------------------

inline constexpr double kLambdaBound = 2.0;

/// Circuit angles followed by Jastrow class coefficients.
struct ParameterVector {
  std::vector<double> theta;
  std::vector<double> lambda;

  std::vector<double> flatten() const;
  static ParameterVector split(std::span<const double> flat, std::size_t theta_count);
};

/// Which projector the JQC energy uses.
struct ProjectorChoice {
  bool truncated = false;  // false: exp(J)
  TruncationSpec truncation{};
};

enum class Ansatz {
  /// build_ry_cnot(n, depth).
  RyCnot,
  /// One Hadamard per qubit, no parameters; depth is ignored.
  Hadamard,
};

std::string to_string(Ansatz a);
Ansatz ansatz_from_string(std::string_view s);

/**
 * @brief Everything needed to evaluate circuit and JQC energies of one model.
 */
class VqeProblem {
 public:
  VqeProblem(const ModelSpec& model, int depth, std::optional<ClassMap> class_map = std::nullopt,
             std::uint64_t initial_bits = 0, Ansatz ansatz = Ansatz::RyCnot);

  const ModelSpec& model() const { return model_; }
  int depth() const { return depth_; }
  const PauliSum& hamiltonian() const { return h_; }
  const Circuit& circuit() const { return circuit_; }
  const ClassMap& class_map() const { return class_map_; }
  const StateVector& initial_state() const { return initial_; }
  int num_theta() const { return circuit_.num_params(); }
  int num_lambda() const { return class_map_.num_classes(); }

  StateVector circuit_state(std::span<const double> theta) const;
  double circuit_energy(std::span<const double> theta) const;
  double jqc_energy(std::span<const double> theta, std::span<const double> lambda,
                    const ProjectorChoice& projector = {}) const;
  /// Ground-state energy, computed once.
  double exact_energy() const;

 private:
  ModelSpec model_;
  int depth_;
  PauliSum h_;
  Circuit circuit_;
  ClassMap class_map_;
  StateVector initial_;
  mutable std::optional<double> exact_;
};

/// Default symmetry classes: chain for spin models, ladder for Hubbard.
ClassMap default_class_map(const ModelSpec& model);

enum class JointMode {
  /// JQC restarts start from random angles, independent of the circuit run.
  Independent,
  /// Restart 0 starts at (theta_c, 0); others alternate warm and random.
  WarmStart,
};

struct PairOptions {
  JointMode joint_mode = JointMode::WarmStart;
  ProjectorChoice projector{};
};

struct PairResult {
  double e_circuit = 0.0;
  std::vector<double> theta_circuit;
  double e_jqc = 0.0;
  ParameterVector jqc;
  double e_exact = 0.0;
  bool timed_out = false;
  std::vector<TraceEntry> trace;
};

/// Best-of-R circuit-only optimization, then best-of-R joint optimization.
PairResult optimize_pair(const VqeProblem& problem, const OptimizerConfig& cfg,
                         const PairOptions& options = {});

inline constexpr double kGainCap = 1e10;

struct GainRecord {
  double e_circuit = 0.0;
  double e_jqc = 0.0;
  double e_exact = 0.0;
  double gain = 1.0;
  bool capped = false;
};

/// (E_c - E_exact) / (E_JQC - E_exact), capped when the denominator vanishes.
GainRecord computational_gain(double e_circuit, double e_jqc, double e_exact);

}  // namespace jqc

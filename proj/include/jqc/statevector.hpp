#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "jqc/pauli.hpp"

namespace jqc {

class JastrowParams;

/**
 * @brief Dense 2^N amplitude vector. Qubit k is bit k of the index.
 */
class StateVector {
 public:
  StateVector() = default;
  /// |0...0> on `num_qubits` qubits.
  explicit StateVector(int num_qubits);
  /// Adopts `amplitudes` (length must be a power of two); not renormalized.
  explicit StateVector(std::vector<cplx> amplitudes);

  static StateVector basis_state(int num_qubits, std::uint64_t index);

  int num_qubits() const { return num_qubits_; }
  std::size_t dimension() const { return amps_.size(); }
  std::span<const cplx> amplitudes() const { return amps_; }
  std::span<cplx> amplitudes() { return amps_; }
  const cplx& operator[](std::size_t i) const { return amps_[i]; }
  cplx& operator[](std::size_t i) { return amps_[i]; }

  double norm() const;
  /// Scales to unit norm; throws std::domain_error below `min_norm`.
  void normalize(double min_norm = 1e-300);
  /// |amplitude|^2 per index.
  std::vector<double> probabilities() const;

 private:
  int num_qubits_ = 0;
  std::vector<cplx> amps_;
};

cplx inner_product(const StateVector& a, const StateVector& b);

// ----------------------------------------------------------------------------
// Gates and circuits

enum class GateKind { Ry, H, CNOT, PostRotation };

struct Gate {
  GateKind kind = GateKind::H;
  int target = 0;
  int control = -1;                       // CNOT only
  PauliLetter axis = PauliLetter::Z;      // PostRotation only
  double angle = 0.0;                     // fixed Ry angle when not parametrized
  int param_slot = -1;                    // >= 0 when the angle comes from theta

  static Gate ry(int target, double angle) { return {GateKind::Ry, target, -1, PauliLetter::Z, angle, -1}; }
  static Gate ry_param(int target, int slot) { return {GateKind::Ry, target, -1, PauliLetter::Z, 0.0, slot}; }
  static Gate h(int target) { return {GateKind::H, target}; }
  static Gate cnot(int control, int target) { return {GateKind::CNOT, target, control}; }
  static Gate post_rotation(int target, PauliLetter axis) {
    return {GateKind::PostRotation, target, -1, axis};
  }
};

class Circuit {
 public:
  Circuit() = default;
  explicit Circuit(int num_qubits);

  int num_qubits() const { return num_qubits_; }
  int num_params() const { return num_params_; }
  const std::vector<Gate>& gates() const { return gates_; }

  /// Appends a gate; parametrized Ry gates must use the next free slot or an
  /// existing one.
  void append(const Gate& g);
  /// Appends a parametrized Ry on a fresh slot and returns the slot.
  int append_ry_param(int target);

  /// Re-targets this circuit's gates onto a wider register (same indices).
  Circuit widened(int num_qubits) const;

 private:
  int num_qubits_ = 0;
  int num_params_ = 0;
  std::vector<Gate> gates_;
};

/// d blocks of L parametrized Ry rotations followed by CNOT(q_i -> q_{i+1}).
Circuit build_ry_cnot(int num_qubits, int depth);

/// H on every qubit.
Circuit build_hadamard_layer(int num_qubits);

void apply_gate(StateVector& psi, const Gate& g, std::span<const double> theta);

/// Runs `c` on |0...0>.
StateVector run_circuit(const Circuit& c, std::span<const double> theta);
/// Runs `c` on a given initial state (copied).
StateVector run_circuit(const Circuit& c, std::span<const double> theta,
                        const StateVector& initial);

/// <psi|P|psi> for every term, summed; imaginary residue checked.
double expectation(const PauliSum& h, const StateVector& psi);
/// h|psi> (no normalization).
StateVector apply_pauli_sum(const PauliSum& h, const StateVector& psi);

/// Multiplies amplitude i by exp(J(i)) and renormalizes.
StateVector apply_jastrow_exact(const StateVector& psi, const JastrowParams& jp);

struct GroundState {
  double energy = 0.0;
  StateVector state;
};

struct EigenSolverConfig {
  int dense_max_qubits = 10;
  double tolerance = 1e-10;
  int max_iterations = 5000;
};

/// Lowest eigenpair; dense for small registers, Lanczos above.
GroundState exact_ground_state(const PauliSum& h, const EigenSolverConfig& cfg = {});

/// Debug dump: `index re im` per amplitude above 1e-12.
void write_state(std::ostream& os, const StateVector& psi);

}  // namespace jqc

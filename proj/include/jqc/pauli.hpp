#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace jqc {

using cplx = std::complex<double>;

/// Maximum register width representable by the bit-mask Pauli encoding.
inline constexpr int kMaxQubits = 32;

/// Coefficients with magnitude below this are pruned from a PauliSum.
inline constexpr double kPruneTol = 1e-14;

enum class PauliLetter : std::uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

char to_char(PauliLetter p);
PauliLetter letter_from_char(char c);

/**
 * @brief A Pauli string on N qubits in symplectic (x, z) form.
 *
 * Qubit k corresponds to bit k of both masks: X -> x only, Z -> z only,
 * Y -> both. The phase is an integer power of i, so the represented
 * operator is i^phase * P(letters).
 */
class PauliString {
 public:
  PauliString() = default;
  explicit PauliString(int num_qubits);
  PauliString(int num_qubits, std::uint64_t x_mask, std::uint64_t z_mask,
              int phase = 0);

  /// Parses a letter string with qubit 0 as the rightmost character.
  static PauliString from_letters(std::string_view letters);

  /// Single-qubit or two-qubit convenience constructors.
  static PauliString single(int num_qubits, int qubit, PauliLetter p);
  static PauliString pair(int num_qubits, int q1, PauliLetter p1, int q2,
                          PauliLetter p2);

  int num_qubits() const { return num_qubits_; }
  std::uint64_t x_mask() const { return x_; }
  std::uint64_t z_mask() const { return z_; }
  /// Exponent of i in {0,1,2,3}.
  int phase() const { return phase_; }
  cplx phase_factor() const;

  PauliLetter letter(int qubit) const;
  bool is_identity() const { return x_ == 0 && z_ == 0; }
  bool is_diagonal() const { return x_ == 0; }
  int weight() const;

  /// Letters with qubit 0 rightmost, phase dropped.
  std::string letters() const;

  /// Packed 2-bit code per qubit with qubit N-1 most significant. Integer
  /// order of the code equals lexicographic order of letters().
  std::uint64_t sort_key() const;

  PauliString without_phase() const { return {num_qubits_, x_, z_, 0}; }

  friend PauliString operator*(const PauliString& a, const PauliString& b);
  friend bool operator==(const PauliString& a, const PauliString& b) {
    return a.num_qubits_ == b.num_qubits_ && a.x_ == b.x_ && a.z_ == b.z_ &&
           a.phase_ == b.phase_;
  }

 private:
  int num_qubits_ = 0;
  std::uint64_t x_ = 0;
  std::uint64_t z_ = 0;
  int phase_ = 0;
};

struct PauliKeyLess {
  bool operator()(const PauliString& a, const PauliString& b) const {
    return a.sort_key() < b.sort_key();
  }
};

/**
 * @brief Weighted sum of phase-free Pauli strings.
 *
 * Phases are folded into the coefficients on insertion, duplicate strings are
 * merged and terms with |coeff| < kPruneTol are dropped. Iteration order is
 * lexicographic in the letter string, which makes text dumps reproducible.
 */
class PauliSum {
 public:
  using TermMap = std::map<PauliString, cplx, PauliKeyLess>;

  PauliSum() = default;
  explicit PauliSum(int num_qubits) : num_qubits_(num_qubits) {}

  static PauliSum identity(int num_qubits, cplx coeff = 1.0);

  int num_qubits() const { return num_qubits_; }
  const TermMap& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  /// Adds coeff * p (p's phase is folded in).
  void add(const PauliString& p, cplx coeff = 1.0);
  void add(const PauliSum& other, cplx scale = 1.0);

  cplx coefficient(const PauliString& p) const;
  /// Coefficient of the identity string.
  cplx constant() const;

  bool is_hermitian(double tol = 1e-12) const;
  bool is_diagonal() const;

  PauliSum operator+(const PauliSum& rhs) const;
  PauliSum operator*(cplx scale) const;

  friend bool operator==(const PauliSum& a, const PauliSum& b);

 private:
  void prune(TermMap::iterator it);

  int num_qubits_ = 0;
  TermMap terms_;
};

/// Canonical product a*b with merged coefficients.
PauliSum multiply(const PauliSum& a, const PauliSum& b);

/// Text form: one `<re> <im> <letters>` line per term, lexicographic order.
void write_pauli_sum(std::ostream& os, const PauliSum& h);
PauliSum read_pauli_sum(std::istream& is);

// ----------------------------------------------------------------------------
// Model Hamiltonians

enum class ModelKind { Ising, Heisenberg, Hubbard };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(std::string_view s);

struct ModelSpec {
  ModelKind kind = ModelKind::Ising;
  int sites = 2;
  double field = 1.0;           // Ising transverse field
  double xy_coupling = 1.0;     // Heisenberg XY coupling
  double hopping = 1.0;         // Hubbard t
  double onsite = 4.0;          // Hubbard U
  /// Ising only: use +field * sum X instead of the default -field * sum X.
  bool positive_field_sign = false;

  int num_qubits() const { return kind == ModelKind::Hubbard ? 2 * sites : sites; }
  /// The swept parameter: field, xy coupling or U/4t.
  double control_parameter() const;
  void validate() const;
};

/// Builds the open-chain nearest-neighbour Hamiltonian of the model.
PauliSum build_model(const ModelSpec& spec);

// ----------------------------------------------------------------------------
// Measurement bases

/// Post-rotation axis per system qubit; index k is qubit k.
struct MeasurementBasis {
  std::vector<PauliLetter> axes;

  int size() const { return static_cast<int>(axes.size()); }
  /// Number of X/Y axes (rotations that are not the identity).
  int rotated_count() const;
  std::string to_string() const;  // qubit 0 rightmost, like letters()
  static MeasurementBasis uniform(int n, PauliLetter axis);
  static MeasurementBasis from_string(std::string_view s);

  friend auto operator<=>(const MeasurementBasis&, const MeasurementBasis&) = default;
};

struct BasisGroup {
  MeasurementBasis basis;
  /// Terms in their original letters.
  PauliSum terms;
  /// Same terms after the post-rotation: Z/I letters only.
  PauliSum diagonal_terms;
};

/**
 * @brief Splits h into groups measurable in all-Z, all-X or all-Y bases.
 *
 * Terms that mix letter types get a dedicated basis each; `unassigned`
 * reports how many such fallbacks happened. A constant-only sum yields a
 * single Z group holding the identity coefficient.
 */
struct Grouping {
  std::vector<BasisGroup> groups;
  int unassigned = 0;
};
Grouping group_by_basis(const PauliSum& h);

/// Maps a string measurable in `basis` to its Z-form after post-rotation.
PauliString rotate_to_z(const PauliString& p, const MeasurementBasis& basis);

class ProbDist;

/// sum_i p(i) * <i|h_b|i> for a Z/I-only sum.
double diagonal_expectation(const PauliSum& h_b, const ProbDist& p);

}  // namespace jqc

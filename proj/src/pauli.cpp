#include "jqc/pauli.hpp"

#include <bit>
#include <cmath>
#include <iomanip>
#include <optional>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "jqc/prob.hpp"

namespace jqc {

namespace {

void check_width(int n) {
  if (n < 0 || n > kMaxQubits) {
    throw std::invalid_argument("Pauli register width out of range: " +
                                std::to_string(n));
  }
}

std::uint64_t bit(int q) { return std::uint64_t{1} << q; }

// Single-qubit product table: letter and power of i for a*b.
struct LetterProduct {
  PauliLetter letter;
  int phase;
};

LetterProduct multiply_letters(PauliLetter a, PauliLetter b) {
  using enum PauliLetter;
  if (a == I) return {b, 0};
  if (b == I) return {a, 0};
  if (a == b) return {I, 0};
  // Cyclic X->Y->Z gives +i, anti-cyclic gives -i.
  const int ai = static_cast<int>(a);
  const int bi = static_cast<int>(b);
  const auto c = static_cast<PauliLetter>(6 - ai - bi);
  const bool cyclic = (ai % 3) + 1 == bi;
  return {c, cyclic ? 1 : 3};
}

cplx i_power(int k) {
  switch (k & 3) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

}  // namespace

char to_char(PauliLetter p) {
  static constexpr char kChars[] = {'I', 'X', 'Y', 'Z'};
  return kChars[static_cast<int>(p)];
}

PauliLetter letter_from_char(char c) {
  switch (c) {
    case 'I': case 'i': return PauliLetter::I;
    case 'X': case 'x': return PauliLetter::X;
    case 'Y': case 'y': return PauliLetter::Y;
    case 'Z': case 'z': return PauliLetter::Z;
    default:
      throw std::invalid_argument(std::string("invalid Pauli letter '") + c + "'");
  }
}

// ----------------------------------------------------------------------------

PauliString::PauliString(int num_qubits) : num_qubits_(num_qubits) {
  check_width(num_qubits);
}

PauliString::PauliString(int num_qubits, std::uint64_t x_mask,
                         std::uint64_t z_mask, int phase)
    : num_qubits_(num_qubits), x_(x_mask), z_(z_mask), phase_(phase & 3) {
  check_width(num_qubits);
  const std::uint64_t allowed = num_qubits == 64 ? ~std::uint64_t{0} : bit(num_qubits) - 1;
  if ((x_mask | z_mask) & ~allowed) {
    throw std::invalid_argument("Pauli mask exceeds register width");
  }
}

PauliString PauliString::from_letters(std::string_view letters) {
  const int n = static_cast<int>(letters.size());
  check_width(n);
  std::uint64_t x = 0, z = 0;
  for (int pos = 0; pos < n; ++pos) {
    const int q = n - 1 - pos;
    switch (letter_from_char(letters[pos])) {
      case PauliLetter::I: break;
      case PauliLetter::X: x |= bit(q); break;
      case PauliLetter::Y: x |= bit(q); z |= bit(q); break;
      case PauliLetter::Z: z |= bit(q); break;
    }
  }
  return {n, x, z, 0};
}

PauliString PauliString::single(int num_qubits, int qubit, PauliLetter p) {
  if (qubit < 0 || qubit >= num_qubits) {
    throw std::invalid_argument("qubit index out of range");
  }
  std::uint64_t x = 0, z = 0;
  if (p == PauliLetter::X || p == PauliLetter::Y) x = bit(qubit);
  if (p == PauliLetter::Z || p == PauliLetter::Y) z = bit(qubit);
  return {num_qubits, x, z, 0};
}

PauliString PauliString::pair(int num_qubits, int q1, PauliLetter p1, int q2,
                              PauliLetter p2) {
  if (q1 == q2) throw std::invalid_argument("pair requires distinct qubits");
  return single(num_qubits, q1, p1) * single(num_qubits, q2, p2);
}

cplx PauliString::phase_factor() const { return i_power(phase_); }

PauliLetter PauliString::letter(int qubit) const {
  const bool xb = (x_ >> qubit) & 1U;
  const bool zb = (z_ >> qubit) & 1U;
  if (xb && zb) return PauliLetter::Y;
  if (xb) return PauliLetter::X;
  if (zb) return PauliLetter::Z;
  return PauliLetter::I;
}

int PauliString::weight() const { return std::popcount(x_ | z_); }

std::string PauliString::letters() const {
  std::string s(static_cast<std::size_t>(num_qubits_), 'I');
  for (int q = 0; q < num_qubits_; ++q) {
    s[static_cast<std::size_t>(num_qubits_ - 1 - q)] = to_char(letter(q));
  }
  return s;
}

std::uint64_t PauliString::sort_key() const {
  std::uint64_t key = 0;
  for (int q = num_qubits_ - 1; q >= 0; --q) {
    key = (key << 2) | static_cast<std::uint64_t>(letter(q));
  }
  return key;
}

PauliString operator*(const PauliString& a, const PauliString& b) {
  if (a.num_qubits_ != b.num_qubits_) {
    throw std::invalid_argument("Pauli string size mismatch");
  }
  int phase = a.phase_ + b.phase_;
  std::uint64_t touched = (a.x_ | a.z_) & (b.x_ | b.z_);
  while (touched) {
    const int q = std::countr_zero(touched);
    touched &= touched - 1;
    phase += multiply_letters(a.letter(q), b.letter(q)).phase;
  }
  return {a.num_qubits_, a.x_ ^ b.x_, a.z_ ^ b.z_, phase};
}

// ----------------------------------------------------------------------------

PauliSum PauliSum::identity(int num_qubits, cplx coeff) {
  PauliSum s(num_qubits);
  s.add(PauliString(num_qubits), coeff);
  return s;
}

void PauliSum::prune(TermMap::iterator it) {
  if (std::abs(it->second) < kPruneTol) terms_.erase(it);
}

void PauliSum::add(const PauliString& p, cplx coeff) {
  if (p.num_qubits() != num_qubits_) {
    throw std::invalid_argument("PauliSum size mismatch: term has " +
                                std::to_string(p.num_qubits()) + " qubits, sum has " +
                                std::to_string(num_qubits_));
  }
  const cplx c = coeff * p.phase_factor();
  auto [it, inserted] = terms_.try_emplace(p.without_phase(), c);
  if (!inserted) it->second += c;
  prune(it);
}

void PauliSum::add(const PauliSum& other, cplx scale) {
  if (other.num_qubits_ != num_qubits_) {
    throw std::invalid_argument("PauliSum size mismatch");
  }
  for (const auto& [p, c] : other.terms_) add(p, c * scale);
}

cplx PauliSum::coefficient(const PauliString& p) const {
  auto it = terms_.find(p.without_phase());
  return it == terms_.end() ? cplx{} : it->second * p.phase_factor();
}

cplx PauliSum::constant() const { return coefficient(PauliString(num_qubits_)); }

bool PauliSum::is_hermitian(double tol) const {
  for (const auto& [p, c] : terms_) {
    if (std::abs(c.imag()) > tol) return false;
  }
  return true;
}

bool PauliSum::is_diagonal() const {
  for (const auto& [p, c] : terms_) {
    if (!p.is_diagonal()) return false;
  }
  return true;
}

PauliSum PauliSum::operator+(const PauliSum& rhs) const {
  PauliSum out = *this;
  out.add(rhs);
  return out;
}

PauliSum PauliSum::operator*(cplx scale) const {
  PauliSum out(num_qubits_);
  out.add(*this, scale);
  return out;
}

bool operator==(const PauliSum& a, const PauliSum& b) {
  return a.num_qubits_ == b.num_qubits_ && a.terms_ == b.terms_;
}

PauliSum multiply(const PauliSum& a, const PauliSum& b) {
  if (a.num_qubits() != b.num_qubits()) {
    throw std::invalid_argument("multiply: size mismatch (" +
                                std::to_string(a.num_qubits()) + " vs " +
                                std::to_string(b.num_qubits()) + ")");
  }
  PauliSum out(a.num_qubits());
  for (const auto& [pa, ca] : a.terms()) {
    for (const auto& [pb, cb] : b.terms()) {
      out.add(pa * pb, ca * cb);
    }
  }
  return out;
}

void write_pauli_sum(std::ostream& os, const PauliSum& h) {
  std::ostringstream line;
  for (const auto& [p, c] : h.terms()) {
    line.str({});
    line << std::setprecision(17) << c.real() << ' ' << c.imag() << ' '
         << p.letters() << '\n';
    os << line.str();
  }
}

PauliSum read_pauli_sum(std::istream& is) {
  std::string text;
  int lineno = 0;
  std::optional<PauliSum> out;
  while (std::getline(is, text)) {
    ++lineno;
    if (text.empty() || text[0] == '#') continue;
    std::istringstream ss(text);
    double re = 0, im = 0;
    std::string letters;
    if (!(ss >> re >> im >> letters)) {
      throw std::runtime_error("malformed Pauli term at line " + std::to_string(lineno));
    }
    const auto p = PauliString::from_letters(letters);
    if (!out) out.emplace(p.num_qubits());
    out->add(p, {re, im});
  }
  if (!out) throw std::runtime_error("empty Pauli sum file");
  return *out;
}

// ----------------------------------------------------------------------------

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Ising: return "ising";
    case ModelKind::Heisenberg: return "heisenberg";
    case ModelKind::Hubbard: return "hubbard";
  }
  return "unknown";
}

ModelKind model_kind_from_string(std::string_view s) {
  if (s == "ising") return ModelKind::Ising;
  if (s == "heisenberg") return ModelKind::Heisenberg;
  if (s == "hubbard") return ModelKind::Hubbard;
  throw std::invalid_argument("unknown model kind '" + std::string(s) + "'");
}

double ModelSpec::control_parameter() const {
  switch (kind) {
    case ModelKind::Ising: return field;
    case ModelKind::Heisenberg: return xy_coupling;
    case ModelKind::Hubbard: return onsite / (4.0 * hopping);
  }
  return 0.0;
}

void ModelSpec::validate() const {
  if (sites < 2) throw std::invalid_argument("model requires at least 2 sites");
  if (num_qubits() > kMaxQubits) throw std::invalid_argument("model too large");
  for (double v : {field, xy_coupling, hopping, onsite}) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite model parameter");
  }
}

PauliSum build_model(const ModelSpec& spec) {
  spec.validate();
  using enum PauliLetter;
  const int n = spec.num_qubits();
  const int l = spec.sites;
  PauliSum h(n);
  switch (spec.kind) {
    case ModelKind::Ising: {
      const double sign = spec.positive_field_sign ? 1.0 : -1.0;
      for (int k = 0; k + 1 < l; ++k) h.add(PauliString::pair(n, k, Z, k + 1, Z), -1.0);
      for (int k = 0; k < l; ++k) h.add(PauliString::single(n, k, X), sign * spec.field);
      break;
    }
    case ModelKind::Heisenberg: {
      for (int k = 0; k + 1 < l; ++k) {
        h.add(PauliString::pair(n, k, Z, k + 1, Z), -1.0);
        h.add(PauliString::pair(n, k, X, k + 1, X), spec.xy_coupling);
        h.add(PauliString::pair(n, k, Y, k + 1, Y), spec.xy_coupling);
      }
      break;
    }
    case ModelKind::Hubbard: {
      // Spin-up chain on qubits [0, L), spin-down chain on [L, 2L).
      const double hop = -0.5 * spec.hopping;
      for (int chain = 0; chain < 2; ++chain) {
        for (int i = 0; i + 1 < l; ++i) {
          const int a = chain * l + i;
          h.add(PauliString::pair(n, a, X, a + 1, X), hop);
          h.add(PauliString::pair(n, a, Y, a + 1, Y), hop);
        }
      }
      for (int i = 0; i < l; ++i) {
        h.add(PauliString::pair(n, i, Z, i + l, Z), 0.25 * spec.onsite);
      }
      h.add(PauliString(n), 0.25 * spec.onsite * l);
      break;
    }
  }
  return h;
}

// ----------------------------------------------------------------------------

int MeasurementBasis::rotated_count() const {
  int m = 0;
  for (auto a : axes) m += (a == PauliLetter::X || a == PauliLetter::Y) ? 1 : 0;
  return m;
}

std::string MeasurementBasis::to_string() const {
  std::string s(axes.size(), 'Z');
  for (std::size_t k = 0; k < axes.size(); ++k) s[axes.size() - 1 - k] = to_char(axes[k]);
  return s;
}

MeasurementBasis MeasurementBasis::uniform(int n, PauliLetter axis) {
  return {std::vector<PauliLetter>(static_cast<std::size_t>(n), axis)};
}

MeasurementBasis MeasurementBasis::from_string(std::string_view s) {
  MeasurementBasis b;
  b.axes.resize(s.size());
  for (std::size_t pos = 0; pos < s.size(); ++pos) {
    b.axes[s.size() - 1 - pos] = letter_from_char(s[pos]);
  }
  return b;
}

PauliString rotate_to_z(const PauliString& p, const MeasurementBasis& basis) {
  if (basis.size() != p.num_qubits()) {
    throw std::invalid_argument("basis length does not match Pauli string");
  }
  std::uint64_t z = 0;
  for (int q = 0; q < p.num_qubits(); ++q) {
    const auto l = p.letter(q);
    if (l == PauliLetter::I) continue;
    const auto axis = basis.axes[static_cast<std::size_t>(q)];
    const auto effective = axis == PauliLetter::I ? PauliLetter::Z : axis;
    if (l != effective) {
      throw std::invalid_argument("term " + p.letters() +
                                  " is not diagonal in basis " + basis.to_string());
    }
    z |= bit(q);
  }
  return {p.num_qubits(), 0, z, p.phase()};
}

Grouping group_by_basis(const PauliSum& h) {
  const int n = h.num_qubits();
  Grouping out;
  auto find_or_add = [&](const MeasurementBasis& b) -> BasisGroup& {
    for (auto& g : out.groups) {
      if (g.basis == b) return g;
    }
    out.groups.push_back({b, PauliSum(n), PauliSum(n)});
    return out.groups.back();
  };

  for (const auto& [p, c] : h.terms()) {
    MeasurementBasis basis;
    if (p.is_identity()) {
      basis = MeasurementBasis::uniform(n, PauliLetter::Z);
    } else {
      std::uint8_t seen = 0;
      for (int q = 0; q < n; ++q) {
        const auto l = p.letter(q);
        if (l != PauliLetter::I) seen |= static_cast<std::uint8_t>(1U << static_cast<int>(l));
      }
      if (std::popcount(seen) == 1) {
        basis = MeasurementBasis::uniform(
            n, static_cast<PauliLetter>(std::countr_zero(static_cast<unsigned>(seen))));
      } else {
        ++out.unassigned;
        basis.axes.resize(static_cast<std::size_t>(n));
        for (int q = 0; q < n; ++q) {
          const auto l = p.letter(q);
          basis.axes[static_cast<std::size_t>(q)] = l == PauliLetter::I ? PauliLetter::Z : l;
        }
      }
    }
    auto& g = find_or_add(basis);
    g.terms.add(p, c);
    g.diagonal_terms.add(rotate_to_z(p, basis), c);
  }
  return out;
}

double diagonal_expectation(const PauliSum& h_b, const ProbDist& p) {
  if (!h_b.is_diagonal()) {
    throw std::invalid_argument("diagonal_expectation: non-diagonal term present");
  }
  if (h_b.num_qubits() != p.register_size()) {
    throw std::invalid_argument("diagonal_expectation: register size mismatch");
  }
  if (std::abs(p.total() - 1.0) > kNormTol) {
    throw std::invalid_argument("diagonal_expectation: distribution is not normalized");
  }
  double e = 0.0;
  for (const auto& [term, c] : h_b.terms()) {
    const std::uint64_t z = term.z_mask();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double pi = p[i];
      if (pi == 0.0) continue;
      acc += (std::popcount(i & z) & 1) ? -pi : pi;
    }
    e += c.real() * acc;
  }
  return e;
}

}  // namespace jqc

#include "jqc/statevector.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>

#include "jqc/jastrow.hpp"

namespace jqc {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kImagErrorTol = 1e-8;

cplx i_power(int k) {
  switch (k & 3) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

// Matrix element factor of a phase-free Pauli string on basis state i:
// P|i> = factor(i) |i ^ x>.
struct TermAction {
  std::uint64_t x;
  std::uint64_t z;
  cplx coeff;  // includes i^{#Y}

  TermAction(const PauliString& p, cplx c)
      : x(p.x_mask()), z(p.z_mask()), coeff(c * i_power(std::popcount(p.x_mask() & p.z_mask()))) {}

  cplx factor(std::uint64_t i) const {
    return (std::popcount(i & z) & 1) ? -coeff : coeff;
  }
};

std::vector<TermAction> term_actions(const PauliSum& h) {
  std::vector<TermAction> out;
  out.reserve(h.size());
  for (const auto& [p, c] : h.terms()) out.emplace_back(p, c);
  return out;
}

void check_qubit(int q, int n) {
  if (q < 0 || q >= n) throw std::invalid_argument("gate qubit index out of range");
}

template <typename PairOp>
void for_each_pair(StateVector& psi, int target, PairOp&& op) {
  const std::size_t stride = std::size_t{1} << target;
  const std::size_t dim = psi.dimension();
  for (std::size_t base = 0; base < dim; base += 2 * stride) {
    for (std::size_t i = base; i < base + stride; ++i) op(psi[i], psi[i + stride]);
  }
}

void apply_terms(const std::vector<TermAction>& actions, std::span<const cplx> in,
                 std::span<cplx> out) {
  std::fill(out.begin(), out.end(), cplx{});
  for (const auto& t : actions) {
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (in[i] == cplx{}) continue;
      out[i ^ t.x] += t.factor(i) * in[i];
    }
  }
}

}  // namespace

// ----------------------------------------------------------------------------

StateVector::StateVector(int num_qubits) : num_qubits_(num_qubits) {
  if (num_qubits < 0 || num_qubits > 30) {
    throw std::invalid_argument("state vector width out of range");
  }
  amps_.assign(std::size_t{1} << num_qubits, cplx{});
  amps_[0] = 1.0;
}

StateVector::StateVector(std::vector<cplx> amplitudes) : amps_(std::move(amplitudes)) {
  if (amps_.empty() || !std::has_single_bit(amps_.size())) {
    throw std::invalid_argument("state vector length must be a power of two");
  }
  num_qubits_ = std::countr_zero(amps_.size());
}

StateVector StateVector::basis_state(int num_qubits, std::uint64_t index) {
  StateVector s(num_qubits);
  if (index >= s.dimension()) throw std::invalid_argument("basis index out of range");
  s.amps_[0] = 0.0;
  s.amps_[index] = 1.0;
  return s;
}

double StateVector::norm() const {
  double s = 0.0;
  for (const auto& a : amps_) s += std::norm(a);
  return std::sqrt(s);
}

void StateVector::normalize(double min_norm) {
  const double n = norm();
  if (!(n >= min_norm) || !std::isfinite(n)) {
    throw std::domain_error("state norm vanished during normalization");
  }
  for (auto& a : amps_) a /= n;
}

std::vector<double> StateVector::probabilities() const {
  std::vector<double> p(amps_.size());
  std::transform(amps_.begin(), amps_.end(), p.begin(), [](cplx a) { return std::norm(a); });
  return p;
}

cplx inner_product(const StateVector& a, const StateVector& b) {
  if (a.dimension() != b.dimension()) throw std::invalid_argument("inner product size mismatch");
  cplx s{};
  for (std::size_t i = 0; i < a.dimension(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

// ----------------------------------------------------------------------------

Circuit::Circuit(int num_qubits) : num_qubits_(num_qubits) {
  if (num_qubits < 1 || num_qubits > 30) throw std::invalid_argument("circuit width out of range");
}

void Circuit::append(const Gate& g) {
  check_qubit(g.target, num_qubits_);
  if (g.kind == GateKind::CNOT) {
    check_qubit(g.control, num_qubits_);
    if (g.control == g.target) throw std::invalid_argument("CNOT control equals target");
  }
  if (g.kind == GateKind::Ry && g.param_slot >= 0) {
    if (g.param_slot > num_params_) throw std::invalid_argument("parameter slot skips ahead");
    num_params_ = std::max(num_params_, g.param_slot + 1);
  }
  gates_.push_back(g);
}

int Circuit::append_ry_param(int target) {
  const int slot = num_params_;
  append(Gate::ry_param(target, slot));
  return slot;
}

Circuit Circuit::widened(int num_qubits) const {
  if (num_qubits < num_qubits_) throw std::invalid_argument("cannot narrow a circuit");
  Circuit out(num_qubits);
  for (const auto& g : gates_) out.append(g);
  return out;
}

Circuit build_ry_cnot(int num_qubits, int depth) {
  if (num_qubits < 1 || depth < 0) throw std::invalid_argument("build_ry_cnot: bad size");
  Circuit c(num_qubits);
  for (int block = 0; block < depth; ++block) {
    for (int q = 0; q < num_qubits; ++q) c.append_ry_param(q);
    for (int q = 0; q + 1 < num_qubits; ++q) c.append(Gate::cnot(q, q + 1));
  }
  return c;
}

Circuit build_hadamard_layer(int num_qubits) {
  Circuit c(num_qubits);
  for (int q = 0; q < num_qubits; ++q) c.append(Gate::h(q));
  return c;
}

void apply_gate(StateVector& psi, const Gate& g, std::span<const double> theta) {
  check_qubit(g.target, psi.num_qubits());
  switch (g.kind) {
    case GateKind::Ry: {
      const double angle = g.param_slot >= 0 ? theta[static_cast<std::size_t>(g.param_slot)] : g.angle;
      const double c = std::cos(0.5 * angle);
      const double s = std::sin(0.5 * angle);
      for_each_pair(psi, g.target, [c, s](cplx& a0, cplx& a1) {
        const cplx b0 = c * a0 - s * a1;
        a1 = s * a0 + c * a1;
        a0 = b0;
      });
      break;
    }
    case GateKind::H:
      for_each_pair(psi, g.target, [](cplx& a0, cplx& a1) {
        const cplx b0 = kInvSqrt2 * (a0 + a1);
        a1 = kInvSqrt2 * (a0 - a1);
        a0 = b0;
      });
      break;
    case GateKind::CNOT: {
      check_qubit(g.control, psi.num_qubits());
      const std::size_t cbit = std::size_t{1} << g.control;
      const std::size_t tbit = std::size_t{1} << g.target;
      for (std::size_t i = 0; i < psi.dimension(); ++i) {
        if ((i & cbit) && !(i & tbit)) std::swap(psi[i], psi[i | tbit]);
      }
      break;
    }
    case GateKind::PostRotation:
      if (g.axis == PauliLetter::X) {
        for_each_pair(psi, g.target, [](cplx& a0, cplx& a1) {
          const cplx b0 = kInvSqrt2 * (a0 + a1);
          a1 = kInvSqrt2 * (a0 - a1);
          a0 = b0;
        });
      } else if (g.axis == PauliLetter::Y) {
        const cplx i{0.0, 1.0};
        for_each_pair(psi, g.target, [i](cplx& a0, cplx& a1) {
          const cplx b0 = kInvSqrt2 * (a0 - i * a1);
          a1 = kInvSqrt2 * (a0 + i * a1);
          a0 = b0;
        });
      }
      break;
  }
}

StateVector run_circuit(const Circuit& c, std::span<const double> theta) {
  return run_circuit(c, theta, StateVector(c.num_qubits()));
}

StateVector run_circuit(const Circuit& c, std::span<const double> theta,
                        const StateVector& initial) {
  if (static_cast<int>(theta.size()) != c.num_params()) {
    throw std::invalid_argument("run_circuit: expected " + std::to_string(c.num_params()) +
                                " parameters, got " + std::to_string(theta.size()));
  }
  if (initial.num_qubits() != c.num_qubits()) {
    throw std::invalid_argument("run_circuit: initial state size mismatch");
  }
  StateVector psi = initial;
  for (const auto& g : c.gates()) apply_gate(psi, g, theta);
  return psi;
}

double expectation(const PauliSum& h, const StateVector& psi) {
  if (h.num_qubits() != psi.num_qubits()) {
    throw std::invalid_argument("expectation: size mismatch");
  }
  if (!h.is_hermitian()) throw std::invalid_argument("expectation: operator is not Hermitian");
  cplx e{};
  for (const auto& t : term_actions(h)) {
    cplx acc{};
    for (std::size_t i = 0; i < psi.dimension(); ++i) {
      acc += std::conj(psi[i ^ t.x]) * t.factor(i) * psi[i];
    }
    e += acc;
  }
  if (std::abs(e.imag()) > kImagErrorTol) {
    throw std::runtime_error("expectation: imaginary residue " + std::to_string(e.imag()));
  }
  return e.real();
}

StateVector apply_pauli_sum(const PauliSum& h, const StateVector& psi) {
  if (h.num_qubits() != psi.num_qubits()) {
    throw std::invalid_argument("apply_pauli_sum: size mismatch");
  }
  StateVector out = psi;
  apply_terms(term_actions(h), psi.amplitudes(), out.amplitudes());
  return out;
}

StateVector apply_jastrow_exact(const StateVector& psi, const JastrowParams& jp) {
  if (jp.num_qubits() != psi.num_qubits()) {
    throw std::invalid_argument("apply_jastrow_exact: register size mismatch");
  }
  const auto logw = log_weight_table(jp);
  // Shift by the maximum so the largest factor is 1; the shift cancels on
  // renormalization.
  const double shift = *std::max_element(logw.begin(), logw.end());
  StateVector out = psi;
  for (std::size_t i = 0; i < out.dimension(); ++i) out[i] *= std::exp(logw[i] - shift);
  out.normalize();
  return out;
}

// ----------------------------------------------------------------------------

namespace {

GroundState dense_ground_state(const PauliSum& h) {
  const int n = h.num_qubits();
  const std::size_t dim = std::size_t{1} << n;
  const auto actions = term_actions(h);
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim),
                                              static_cast<Eigen::Index>(dim));
  for (const auto& t : actions) {
    for (std::size_t i = 0; i < dim; ++i) {
      m(static_cast<Eigen::Index>(i ^ t.x), static_cast<Eigen::Index>(i)) += t.factor(i);
    }
  }
  GroundState gs;
  if (m.imag().cwiseAbs().maxCoeff() < 1e-14) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.real());
    gs.energy = es.eigenvalues()(0);
    std::vector<cplx> v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = es.eigenvectors()(static_cast<Eigen::Index>(i), 0);
    gs.state = StateVector(std::move(v));
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
    gs.energy = es.eigenvalues()(0);
    std::vector<cplx> v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = es.eigenvectors()(static_cast<Eigen::Index>(i), 0);
    gs.state = StateVector(std::move(v));
  }
  gs.state.normalize();
  return gs;
}

// Explicitly restarted Lanczos with full reorthogonalization.
GroundState lanczos_ground_state(const PauliSum& h, const EigenSolverConfig& cfg) {
  const int n = h.num_qubits();
  const std::size_t dim = std::size_t{1} << n;
  const auto actions = term_actions(h);
  const int krylov = static_cast<int>(std::min<std::size_t>(dim, 100));

  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> gauss;
  std::vector<cplx> start(dim);
  for (auto& a : start) a = gauss(rng);

  auto normalize = [](std::vector<cplx>& v) {
    double s = 0;
    for (auto& a : v) s += std::norm(a);
    s = std::sqrt(s);
    for (auto& a : v) a /= s;
    return s;
  };
  auto dot = [](const std::vector<cplx>& a, const std::vector<cplx>& b) {
    cplx s{};
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
  };
  normalize(start);

  int matvecs = 0;
  std::vector<cplx> w(dim);
  while (matvecs < cfg.max_iterations) {
    std::vector<std::vector<cplx>> basis{start};
    std::vector<double> alpha, beta;
    for (int k = 0; k < krylov && matvecs < cfg.max_iterations; ++k) {
      apply_terms(actions, basis[static_cast<std::size_t>(k)], w);
      ++matvecs;
      const double a = dot(basis[static_cast<std::size_t>(k)], w).real();
      alpha.push_back(a);
      // Full reorthogonalization, twice for stability.
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& v : basis) {
          const cplx c = dot(v, w);
          for (std::size_t i = 0; i < dim; ++i) w[i] -= c * v[i];
        }
      }
      double b = 0;
      for (auto& x : w) b += std::norm(x);
      b = std::sqrt(b);
      if (b < 1e-13 || k + 1 == krylov) break;
      beta.push_back(b);
      for (auto& x : w) x /= b;
      basis.push_back(w);
    }

    const auto m = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      t(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const double theta = es.eigenvalues()(0);
    std::vector<cplx> ritz(dim, cplx{});
    for (Eigen::Index j = 0; j < m; ++j) {
      const double c = es.eigenvectors()(j, 0);
      const auto& v = basis[static_cast<std::size_t>(j)];
      for (std::size_t i = 0; i < dim; ++i) ritz[i] += c * v[i];
    }
    normalize(ritz);

    apply_terms(actions, ritz, w);
    ++matvecs;
    double resid = 0;
    for (std::size_t i = 0; i < dim; ++i) resid += std::norm(w[i] - theta * ritz[i]);
    resid = std::sqrt(resid);
    if (resid < cfg.tolerance * std::max(1.0, std::abs(theta))) {
      GroundState gs;
      gs.state = StateVector(std::move(ritz));
      gs.energy = expectation(h, gs.state);
      return gs;
    }
    start = std::move(ritz);
  }
  throw std::runtime_error("Lanczos did not converge within " +
                           std::to_string(cfg.max_iterations) + " iterations");
}

}  // namespace

GroundState exact_ground_state(const PauliSum& h, const EigenSolverConfig& cfg) {
  if (h.num_qubits() > 16) throw std::invalid_argument("exact_ground_state: at most 16 qubits");
  if (!h.is_hermitian()) throw std::invalid_argument("exact_ground_state: non-Hermitian operator");
  if (h.num_qubits() <= cfg.dense_max_qubits) return dense_ground_state(h);
  return lanczos_ground_state(h, cfg);
}

void write_state(std::ostream& os, const StateVector& psi) {
  os << std::setprecision(17);
  for (std::size_t i = 0; i < psi.dimension(); ++i) {
    if (std::abs(psi[i]) > 1e-12) os << i << ' ' << psi[i].real() << ' ' << psi[i].imag() << '\n';
  }
}

}  // namespace jqc

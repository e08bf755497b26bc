#include "jqc/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace jqc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_reduced_sizes(const ProbDist& pbar, int system_qubits) {
  if (pbar.register_size() != 2 * system_qubits) {
    throw std::invalid_argument("expected a " + std::to_string(2 * system_qubits) +
                                "-bit distribution, got " + std::to_string(pbar.register_size()));
  }
}

// Nonzero entries A(i,j) = Lambda(i,j) * sqrt(pbar(j 2^L + i)).
struct SparseEntry {
  std::uint32_t i;
  std::uint32_t j;
  cplx a;
};

std::vector<SparseEntry> weighted_entries(const ProbDist& pbar, const LambdaMatrix& lambda) {
  const int l = lambda.num_qubits();
  check_reduced_sizes(pbar, l);
  const std::size_t dim = lambda.dimension();
  std::vector<SparseEntry> out;
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double p = pbar[(j << l) + i];
      if (p == 0.0) continue;
      const cplx a = lambda(i, j) * std::sqrt(p);
      if (a == cplx{}) continue;
      out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), a});
    }
  }
  return out;
}

// Unnormalized R_i(s) = |sum_j s_j A(i,j)|^2, also returning the inner sums.
std::vector<double> raw_reconstruction(const std::vector<SparseEntry>& entries,
                                       std::span<const double> s, std::size_t dim,
                                       std::vector<cplx>* sums = nullptr) {
  std::vector<cplx> v(dim, cplx{});
  for (const auto& e : entries) v[e.i] += s[e.j] * e.a;
  std::vector<double> r(dim);
  for (std::size_t i = 0; i < dim; ++i) r[i] = std::norm(v[i]);
  if (sums) *sums = std::move(v);
  return r;
}

ProbDist normalize_reduced(std::vector<double> r, int l) {
  double total = std::accumulate(r.begin(), r.end(), 0.0);
  if (!(total > 0.0)) throw std::domain_error("reconstruction produced an all-zero distribution");
  for (auto& x : r) x /= total;
  return {l, std::move(r)};
}

}  // namespace

void SamplingConfig::validate() const {
  if (shots < 1) throw std::invalid_argument("shots must be >= 1");
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t repetition, std::uint64_t stream) {
  return splitmix64(splitmix64(seed + repetition) ^ splitmix64(0xabcdef12345ULL + stream));
}

// ----------------------------------------------------------------------------

Circuit build_entangled_copy(const Circuit& c, const MeasurementBasis& basis) {
  const int l = c.num_qubits();
  if (basis.size() != l) throw std::invalid_argument("basis length does not match circuit");
  Circuit out = c.widened(2 * l);
  for (int k = 0; k < l; ++k) out.append(Gate::cnot(k, l + k));
  for (int k = 0; k < l; ++k) {
    const auto axis = basis.axes[static_cast<std::size_t>(k)];
    if (axis == PauliLetter::X || axis == PauliLetter::Y) out.append(Gate::post_rotation(k, axis));
  }
  return out;
}

Circuit build_rotated(const Circuit& c, const MeasurementBasis& basis) {
  if (basis.size() != c.num_qubits()) throw std::invalid_argument("basis length does not match circuit");
  Circuit out = c;
  for (int k = 0; k < c.num_qubits(); ++k) {
    const auto axis = basis.axes[static_cast<std::size_t>(k)];
    if (axis == PauliLetter::X || axis == PauliLetter::Y) out.append(Gate::post_rotation(k, axis));
  }
  return out;
}

ProbDist direct_distribution(const StateVector& psi, const MeasurementBasis& basis) {
  if (basis.size() != psi.num_qubits()) throw std::invalid_argument("basis length does not match state");
  StateVector rotated = psi;
  for (int k = 0; k < psi.num_qubits(); ++k) {
    apply_gate(rotated, Gate::post_rotation(k, basis.axes[static_cast<std::size_t>(k)]), {});
  }
  return ProbDist::from_weights(psi.num_qubits(), rotated.probabilities());
}

CountsTable sample_counts(const StateVector& psi, std::uint64_t shots, std::uint64_t seed) {
  const auto probs = psi.probabilities();
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-8) throw std::invalid_argument("sample_counts: state not normalized");
  std::mt19937_64 rng(seed);
  CountsTable table(psi.num_qubits());
  // Sequential conditional binomials give an exact multinomial draw.
  std::uint64_t remaining = shots;
  double mass = total;
  for (std::size_t i = 0; i < probs.size() && remaining > 0; ++i) {
    if (probs[i] <= 0.0) continue;
    std::uint64_t k = remaining;
    const double p = probs[i] / mass;
    if (p < 1.0) {
      std::binomial_distribution<std::uint64_t> binom(remaining, std::max(0.0, p));
      k = binom(rng);
    }
    table.add(i, k);
    remaining -= k;
    mass -= probs[i];
    if (mass <= 0.0) mass = 0.0;
  }
  if (remaining > 0) {
    // Floating-point leftovers go to the last populated outcome.
    std::size_t last = probs.size() - 1;
    while (last > 0 && probs[last] <= 0.0) --last;
    table.add(last, remaining);
  }
  return table;
}

ProbDist reweight(const ProbDist& raw, const JastrowParams& jp, WeightMode mode) {
  const int l = jp.num_qubits();
  check_reduced_sizes(raw, l);
  const auto logw = log_weight_table(jp);
  const double scale = mode == WeightMode::Squared ? 2.0 : 1.0;
  // Shift by the largest weight among populated ancilla strings.
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (raw[k] > 0.0) shift = std::max(shift, scale * logw[k >> l]);
  }
  std::vector<double> w(raw.size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (raw[k] == 0.0) continue;
    w[k] = raw[k] * std::exp(scale * logw[k >> l] - shift);
    total += w[k];
  }
  if (!(total > 0.0)) {
    throw std::domain_error("reweight: total Jastrow weight is zero (all samples filtered out)");
  }
  for (auto& x : w) x /= total;
  return {raw.register_size(), std::move(w)};
}

ProbDist reweight(const CountsTable& raw, const JastrowParams& jp, WeightMode mode) {
  return reweight(raw.normalized(), jp, mode);
}

// ----------------------------------------------------------------------------

LambdaMatrix::LambdaMatrix(MeasurementBasis basis) : basis_(std::move(basis)) {
  const int l = basis_.size();
  if (l < 1 || l > kMaxLambdaQubits) throw std::invalid_argument("lambda_matrix: basis length out of range");
  dim_ = std::size_t{1} << l;
  const double r = 0.70710678118654752440;
  const cplx i_unit{0.0, 1.0};
  // Single-qubit post-rotation unitaries, row-major.
  auto unitary = [&](PauliLetter axis, int row, int col) -> cplx {
    switch (axis) {
      case PauliLetter::X: return (row == 1 && col == 1) ? -r : r;
      case PauliLetter::Y:
        if (col == 0) return r;
        return row == 0 ? -i_unit * r : i_unit * r;
      default: return row == col ? 1.0 : 0.0;
    }
  };
  const double prefactor = std::pow(2.0, 0.5 * basis_.rotated_count());
  entries_.resize(dim_ * dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j < dim_; ++j) {
      cplx u = prefactor;
      for (int k = 0; k < l && u != cplx{}; ++k) {
        u *= unitary(basis_.axes[static_cast<std::size_t>(k)], static_cast<int>((i >> k) & 1U),
                     static_cast<int>((j >> k) & 1U));
      }
      entries_[i * dim_ + j] = u;
    }
  }
}

bool LambdaMatrix::is_real() const {
  return std::all_of(entries_.begin(), entries_.end(), [](cplx c) { return c.imag() == 0.0; });
}

LambdaMatrix lambda_matrix(const MeasurementBasis& basis) { return LambdaMatrix(basis); }

SignVector SignVector::snapped() const {
  SignVector out = *this;
  for (auto& v : out.s) v = v < 0.0 ? -1.0 : 1.0;
  return out;
}

ProbDist reconstruct_reduced(const ProbDist& pbar, const LambdaMatrix& lambda) {
  return reconstruct_reduced(pbar, lambda, SignVector::ones(lambda.dimension()));
}

ProbDist reconstruct_reduced(const ProbDist& pbar, const LambdaMatrix& lambda,
                             const SignVector& signs) {
  if (signs.s.size() != lambda.dimension()) throw std::invalid_argument("sign vector length mismatch");
  const auto entries = weighted_entries(pbar, lambda);
  return normalize_reduced(raw_reconstruction(entries, signs.s, lambda.dimension()),
                           lambda.num_qubits());
}

namespace {

// Column-major view of A(i,j) with incremental residual bookkeeping.
class SignProblem {
 public:
  SignProblem(const std::vector<SparseEntry>& entries, const ProbDist& p0, std::size_t dim)
      : p0_(p0), dim_(dim), columns_(dim) {
    for (const auto& e : entries) columns_[e.j].push_back({e.i, e.a});
  }

  std::size_t dimension() const { return dim_; }

  double objective(std::span<const double> s, std::vector<double>* grad,
                   std::vector<cplx>* sums_out = nullptr) const {
    std::vector<cplx> v(dim_, cplx{});
    for (std::size_t j = 0; j < dim_; ++j) {
      for (const auto& [i, a] : columns_[j]) v[i] += s[j] * a;
    }
    double f = 0.0;
    std::vector<double> d(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
      d[i] = std::norm(v[i]) - p0_[i];
      f += d[i] * d[i];
    }
    if (grad) {
      grad->assign(dim_, 0.0);
      for (std::size_t j = 0; j < dim_; ++j) {
        double acc = 0.0;
        for (const auto& [i, a] : columns_[j]) acc += d[i] * (std::conj(v[i]) * a).real();
        (*grad)[j] = 4.0 * acc;
      }
    }
    if (sums_out) *sums_out = std::move(v);
    return f;
  }

  // Greedy single-sign flips on a +-1 vector until no flip lowers f.
  double flip_search(std::vector<double>& s) const {
    std::vector<cplx> v;
    double f = objective(s, nullptr, &v);
    bool improved = true;
    while (improved) {
      improved = false;
      for (std::size_t k = 0; k < dim_; ++k) {
        double delta = 0.0;
        for (const auto& [i, a] : columns_[k]) {
          const double before = std::norm(v[i]) - p0_[i];
          const double after = std::norm(v[i] - 2.0 * s[k] * a) - p0_[i];
          delta += after * after - before * before;
        }
        if (delta < -1e-15 * std::max(f, 1e-300) && delta < 0.0) {
          for (const auto& [i, a] : columns_[k]) v[i] -= 2.0 * s[k] * a;
          s[k] = -s[k];
          f += delta;
          improved = true;
        }
      }
    }
    return objective(s, nullptr);
  }

  // Alternating projections on a +-1 vector: impose the target moduli on the
  // reconstructed amplitudes, pull back through A^dagger, keep the signs.
  void alternate_projections(std::vector<double>& s, int max_rounds) const {
    std::vector<cplx> v;
    for (int round = 0; round < max_rounds; ++round) {
      objective(s, nullptr, &v);
      for (std::size_t i = 0; i < dim_; ++i) {
        const double m = std::abs(v[i]);
        v[i] = m > 0.0 ? v[i] * (std::sqrt(p0_[i]) / m) : cplx{std::sqrt(p0_[i])};
      }
      bool changed = false;
      for (std::size_t j = 0; j < dim_; ++j) {
        double acc = 0.0;
        for (const auto& [i, a] : columns_[j]) acc += (std::conj(a) * v[i]).real();
        const double next = acc < 0.0 ? -1.0 : 1.0;
        if (next != s[j]) {
          s[j] = next;
          changed = true;
        }
      }
      if (!changed) break;
    }
  }

 private:
  struct Cell {
    std::uint32_t i;
    cplx a;
  };
  const ProbDist& p0_;
  std::size_t dim_;
  std::vector<std::vector<Cell>> columns_;
};

// Box-projected gradient descent with Barzilai-Borwein steps.
double projected_descent(const SignProblem& prob, std::vector<double>& s,
                         const SignSolveConfig& cfg, int& iterations, bool& converged) {
  const std::size_t dim = prob.dimension();
  std::vector<double> g, s_new, g_new, s_prev, g_prev;
  double f = prob.objective(s, &g);
  double step = 1.0;
  converged = false;
  for (int it = 0; it < cfg.max_iterations; ++it, ++iterations) {
    double pg = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      pg = std::max(pg, std::abs(std::clamp(s[k] - g[k], -1.0, 1.0) - s[k]));
    }
    if (pg < cfg.gradient_tol || f < 1e-30) {
      converged = true;
      break;
    }
    if (!s_prev.empty()) {
      double sy = 0.0, ss = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double ds = s[k] - s_prev[k];
        sy += ds * (g[k] - g_prev[k]);
        ss += ds * ds;
      }
      step = sy > 0.0 ? std::clamp(ss / sy, 1e-10, 1e10) : 1.0;
    }
    bool accepted = false;
    double f_new = f;
    for (int bt = 0; bt < 60; ++bt) {
      s_new = s;
      double decrease = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        s_new[k] = std::clamp(s[k] - step * g[k], -1.0, 1.0);
        decrease += g[k] * (s[k] - s_new[k]);
      }
      f_new = prob.objective(s_new, &g_new);
      if (f_new <= f - 1e-4 * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      converged = true;
      break;
    }
    s_prev = std::move(s);
    g_prev = std::move(g);
    s = s_new;
    g = g_new;
    f = f_new;
  }
  return f;
}

}  // namespace

constexpr int kProjectionRounds = 200;

SignSolveResult solve_signs(const ProbDist& pbar, const ProbDist& p0,
                            const MeasurementBasis& basis, const SignSolveConfig& cfg) {
  const LambdaMatrix lambda(basis);
  const int l = lambda.num_qubits();
  if (p0.register_size() != l) throw std::invalid_argument("solve_signs: reference size mismatch");
  const std::size_t dim = lambda.dimension();
  const auto entries = weighted_entries(pbar, lambda);
  const SignProblem prob(entries, p0, dim);

  SignSolveResult res;
  std::vector<double> best;
  double best_f = std::numeric_limits<double>::infinity();
  bool any_converged = false;
  auto consider = [&](const std::vector<double>& s, double f) {
    if (f < best_f) {
      best_f = f;
      best = s;
    }
  };

  std::mt19937_64 rng(cfg.seed);
  for (int attempt = 0; attempt <= cfg.max_restarts; ++attempt) {
    std::vector<double> s(dim, 1.0);
    if (attempt > 0) {
      for (auto& v : s) v = (rng() & 1U) ? 1.0 : -1.0;
    }
    if (attempt == 0) {
      bool converged = false;
      const double f = projected_descent(prob, s, cfg, res.iterations, converged);
      any_converged = converged;
      consider(s, f);
    }
    if (cfg.discrete_refinement) {
      auto d = SignVector{s}.snapped().s;
      prob.alternate_projections(d, kProjectionRounds);
      consider(d, prob.flip_search(d));
    }
    const auto reduced = normalize_reduced(raw_reconstruction(entries, best, dim), l);
    if (reconstruction_error(reduced, p0) <= cfg.target_residual) break;
  }

  res.converged = any_converged;
  res.signs = SignVector{std::move(best)};
  res.reduced = normalize_reduced(raw_reconstruction(entries, res.signs.s, dim), l);
  res.residual = reconstruction_error(res.reduced, p0);
  return res;
}

double reconstruction_error(const ProbDist& p, const ProbDist& p0) {
  if (p.register_size() != p0.register_size()) {
    throw std::invalid_argument("reconstruction_error: register size mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - p0[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// ----------------------------------------------------------------------------

double SampledEnergy::dispersion() const {
  const std::size_t m = per_repetition.size();
  if (m < 2) return 0.0;
  double var = 0.0;
  for (double e : per_repetition) var += (e - mean) * (e - mean);
  return std::sqrt(var / static_cast<double>(m - 1));
}

double energy_from_distributions(const Grouping& groups, std::span<const ProbDist> reduced) {
  if (reduced.size() != groups.groups.size()) throw std::invalid_argument("one distribution per group expected");
  double e = 0.0;
  for (std::size_t g = 0; g < reduced.size(); ++g) {
    e += diagonal_expectation(groups.groups[g].diagonal_terms, reduced[g]);
  }
  return e;
}

SampledEnergy jqc_energy_sampled(const PauliSum& h, const Circuit& c,
                                 std::span<const double> theta, const JastrowParams& jp,
                                 const SamplingConfig& cfg) {
  cfg.validate();
  const int l = c.num_qubits();
  if (h.num_qubits() != l || jp.num_qubits() != l) {
    throw std::invalid_argument("jqc_energy_sampled: register sizes disagree");
  }
  const Grouping grouping = group_by_basis(h);

  // Pre-measurement states do not depend on the repetition.
  struct Prepared {
    StateVector extended;
    StateVector bare;
    LambdaMatrix lambda;
    bool rotated;
  };
  std::vector<Prepared> prepared;
  for (const auto& g : grouping.groups) {
    prepared.push_back({run_circuit(build_entangled_copy(c, g.basis), theta),
                        run_circuit(build_rotated(c, g.basis), theta), LambdaMatrix(g.basis),
                        g.basis.rotated_count() > 0});
  }

  SampledEnergy out;
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    std::vector<ProbDist> reduced;
    for (std::size_t g = 0; g < grouping.groups.size(); ++g) {
      const auto& p = prepared[g];
      const auto counts =
          sample_counts(p.extended, cfg.shots, derive_seed(cfg.seed, static_cast<std::uint64_t>(rep), 2 * g));
      const ProbDist pbar = reweight(counts, jp, cfg.weight_mode);
      if (cfg.reconstruction == ReconstructionMode::SignSolved && p.rotated) {
        const auto ref = sample_counts(p.bare, cfg.shots,
                                       derive_seed(cfg.seed, static_cast<std::uint64_t>(rep), 2 * g + 1));
        const auto solved =
            solve_signs(counts.normalized(), ref.normalized(), grouping.groups[g].basis);
        reduced.push_back(reconstruct_reduced(pbar, p.lambda, solved.signs));
      } else {
        reduced.push_back(reconstruct_reduced(pbar, p.lambda));
      }
    }
    out.per_repetition.push_back(energy_from_distributions(grouping, reduced));
  }
  const double m = static_cast<double>(out.per_repetition.size());
  out.mean = std::accumulate(out.per_repetition.begin(), out.per_repetition.end(), 0.0) / m;
  out.stderr_ = out.dispersion() / std::sqrt(m);
  return out;
}

SampledEnergy jqc_energy_sampled(const ModelSpec& model, const Circuit& c,
                                 std::span<const double> theta, const JastrowParams& jp,
                                 const SamplingConfig& cfg) {
  return jqc_energy_sampled(build_model(model), c, theta, jp, cfg);
}

// ----------------------------------------------------------------------------

void write_counts(std::ostream& os, const CountsTable& counts, const std::string& basis) {
  os << "# qubits=" << counts.register_size() << " shots=" << counts.shots() << " basis=" << basis << '\n';
  for (const auto& [k, c] : counts.counts()) os << to_bitstring(k, counts.register_size()) << ' ' << c << '\n';
}

CountsFile read_counts(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("#", 0) != 0) {
    throw std::runtime_error("counts file: missing '# qubits=... shots=... basis=...' header");
  }
  int qubits = -1;
  long long shots = -1;
  std::string basis;
  std::istringstream header(line.substr(1));
  std::string field;
  while (header >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const auto key = field.substr(0, eq);
    const auto value = field.substr(eq + 1);
    if (key == "qubits") qubits = std::stoi(value);
    else if (key == "shots") shots = std::stoll(value);
    else if (key == "basis") basis = value;
  }
  if (qubits <= 0 || shots < 0) throw std::runtime_error("counts file: incomplete header");
  CountsFile out{CountsTable(qubits), basis};
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string bits;
    std::uint64_t count = 0;
    if (!(row >> bits >> count) || static_cast<int>(bits.size()) != qubits) {
      throw std::runtime_error("counts file: malformed row at line " + std::to_string(lineno));
    }
    out.counts.add(from_bitstring(bits), count);
  }
  if (out.counts.shots() != static_cast<std::uint64_t>(shots)) {
    throw std::runtime_error("counts file: row counts do not sum to the header shot total");
  }
  return out;
}

}  // namespace jqc

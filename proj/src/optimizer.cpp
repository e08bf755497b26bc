#include "jqc/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "jqc/measurement.hpp"

namespace jqc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Counts evaluations, tracks the incumbent and enforces budget and deadline.
class EvalContext {
 public:
  EvalContext(const Objective& f, const OptimizerConfig& cfg, const Bounds& bounds, int restart,
              MinimizeResult& out)
      : f_(f), cfg_(cfg), bounds_(bounds), restart_(restart), out_(out) {}

  double operator()(std::span<const double> x, int stage) {
    std::vector<double> xc(x.begin(), x.end());
    bounds_.clamp(xc);
    double v = f_(xc);
    if (!std::isfinite(v)) v = kInf;
    ++out_.evaluations;
    if (cfg_.record_trace) out_.trace.push_back({restart_, out_.evaluations, stage, v, xc});
    if (v < out_.f) {
      out_.f = v;
      out_.x = std::move(xc);
    }
    return v;
  }

  bool out_of_time() const {
    if (cfg_.deadline && std::chrono::steady_clock::now() > *cfg_.deadline) {
      out_.timed_out = true;
      return true;
    }
    return false;
  }

  const Bounds& bounds() const { return bounds_; }

 private:
  const Objective& f_;
  const OptimizerConfig& cfg_;
  const Bounds& bounds_;
  int restart_;
  MinimizeResult& out_;
};

void nelder_mead(EvalContext& eval, std::span<const double> x0, const OptimizerConfig& cfg,
                 double f0) {
  const std::size_t n = x0.size();
  if (n == 0) return;
  std::vector<std::vector<double>> simplex(n + 1, std::vector<double>(x0.begin(), x0.end()));
  std::vector<double> fv(n + 1, f0);
  int evals = 0;
  for (std::size_t k = 0; k < n; ++k) {
    auto& v = simplex[k + 1];
    v[k] += cfg.stage1_initial_step;
    // Step inward if the vertex left the box.
    if (v[k] > eval.bounds().upper[k]) v[k] = x0[k] - cfg.stage1_initial_step;
    eval.bounds().clamp(v);
    fv[k + 1] = eval(v, 1);
    ++evals;
  }

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  auto point = [&](double coef, const std::vector<double>& worst, std::vector<double>& dst) {
    for (std::size_t k = 0; k < n; ++k) dst[k] = centroid[k] + coef * (worst[k] - centroid[k]);
    eval.bounds().clamp(dst);
  };

  while (evals < cfg.stage1_max_evals) {
    if (eval.out_of_time()) return;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

    double spread = std::abs(fv[worst] - fv[best]);
    double size = 0.0;
    for (std::size_t v = 0; v <= n; ++v) {
      for (std::size_t k = 0; k < n; ++k) size = std::max(size, std::abs(simplex[v][k] - simplex[best][k]));
    }
    if (spread <= cfg.stage1_ftol * (std::abs(fv[best]) + 1e-12) && size < 1e-8) return;
    if (size < 1e-12) return;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t v = 0; v <= n; ++v) {
      if (v == worst) continue;
      for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[v][k] / static_cast<double>(n);
    }

    point(-1.0, simplex[worst], trial);
    const double fr = eval(trial, 1);
    ++evals;
    if (fr < fv[best]) {
      point(-2.0, simplex[worst], trial2);
      const double fe = eval(trial2, 1);
      ++evals;
      if (fe < fr) {
        simplex[worst] = trial2;
        fv[worst] = fe;
      } else {
        simplex[worst] = trial;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      simplex[worst] = trial;
      fv[worst] = fr;
      continue;
    }
    // Contraction: outside if the reflection beat the worst, inside otherwise.
    const bool outside = fr < fv[worst];
    point(outside ? -0.5 : 0.5, simplex[worst], trial2);
    const double fc = eval(trial2, 1);
    ++evals;
    if (fc < std::min(fr, fv[worst])) {
      simplex[worst] = trial2;
      fv[worst] = fc;
      continue;
    }
    // Shrink towards the best vertex.
    for (std::size_t v = 0; v <= n; ++v) {
      if (v == best) continue;
      for (std::size_t k = 0; k < n; ++k) {
        simplex[v][k] = simplex[best][k] + 0.5 * (simplex[v][k] - simplex[best][k]);
      }
      fv[v] = eval(simplex[v], 1);
      ++evals;
    }
  }
}

std::vector<double> fd_gradient(EvalContext& eval, std::span<const double> x, double h,
                                const Bounds& bounds) {
  const std::size_t n = x.size();
  std::vector<double> g(n), xp(x.begin(), x.end());
  for (std::size_t k = 0; k < n; ++k) {
    const double lo = bounds.lower[k], hi = bounds.upper[k];
    const double up = std::min(x[k] + h, hi);
    const double down = std::max(x[k] - h, lo);
    xp[k] = up;
    const double fu = eval(xp, 2);
    xp[k] = down;
    const double fd = eval(xp, 2);
    xp[k] = x[k];
    g[k] = up > down ? (fu - fd) / (up - down) : 0.0;
  }
  return g;
}

void bfgs(EvalContext& eval, std::vector<double> x, double fx, const OptimizerConfig& cfg,
          MinimizeResult& out) {
  const std::size_t n = x.size();
  if (n == 0) {
    out.converged = true;
    return;
  }
  const Bounds& bounds = eval.bounds();
  std::vector<double> hinv(n * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) hinv[k * n + k] = 1.0;
  auto g = fd_gradient(eval, x, cfg.fd_step, bounds);
  std::vector<double> p(n), xn(n), s(n), y(n), hy(n);
  int stalls = 0;

  for (int iter = 0; iter < cfg.stage2_max_iters; ++iter) {
    if (eval.out_of_time()) return;
    double gmax = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      // Ignore gradient components pushing against an active bound.
      const bool at_lo = x[k] <= bounds.lower[k] && g[k] > 0.0;
      const bool at_hi = x[k] >= bounds.upper[k] && g[k] < 0.0;
      if (!at_lo && !at_hi) gmax = std::max(gmax, std::abs(g[k]));
    }
    if (gmax < cfg.gradient_tol) {
      out.converged = true;
      return;
    }
    for (std::size_t r = 0; r < n; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < n; ++c) acc -= hinv[r * n + c] * g[c];
      p[r] = acc;
    }
    double slope = std::inner_product(p.begin(), p.end(), g.begin(), 0.0);
    if (slope >= 0.0) {
      // Not a descent direction: reset to steepest descent.
      std::fill(hinv.begin(), hinv.end(), 0.0);
      for (std::size_t k = 0; k < n; ++k) {
        hinv[k * n + k] = 1.0;
        p[k] = -g[k];
      }
      slope = -std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
    }
    double step = 1.0, fn = kInf;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      for (std::size_t k = 0; k < n; ++k) xn[k] = x[k] + step * p[k];
      bounds.clamp(xn);
      fn = eval(xn, 2);
      if (fn <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      out.converged = true;  // line search cannot improve at FD resolution
      return;
    }
    auto gn = fd_gradient(eval, xn, cfg.fd_step, bounds);
    double sy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = xn[k] - x[k];
      y[k] = gn[k] - g[k];
      sy += s[k] * y[k];
    }
    if (sy > 1e-16) {
      for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) acc += hinv[r * n + c] * y[c];
        hy[r] = acc;
      }
      const double yhy = std::inner_product(y.begin(), y.end(), hy.begin(), 0.0);
      const double rho = 1.0 / sy;
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
          hinv[r * n + c] += -rho * (hy[r] * s[c] + s[r] * hy[c]) + (rho * rho * yhy + rho) * s[r] * s[c];
        }
      }
    }
    stalls = (fx - fn < 1e-15 * std::max(1.0, std::abs(fx))) ? stalls + 1 : 0;
    x = xn;
    g = std::move(gn);
    fx = fn;
    if (stalls >= 3) {
      out.converged = true;
      return;
    }
  }
  out.budget_exhausted = true;
}

}  // namespace

Bounds Bounds::unbounded(std::size_t n) {
  return {std::vector<double>(n, -kInf), std::vector<double>(n, kInf)};
}

void Bounds::clamp(std::span<double> x) const {
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::clamp(x[k], lower[k], upper[k]);
}

void OptimizerConfig::validate() const {
  if (stage1_max_evals < 1 || stage2_max_iters < 1 || restarts < 1) {
    throw std::invalid_argument("optimizer budgets must be >= 1");
  }
  if (!(fd_step > 0.0) || !(stage1_initial_step > 0.0)) {
    throw std::invalid_argument("optimizer steps must be positive");
  }
}

MinimizeResult minimize(const Objective& f, std::span<const double> x0,
                        const OptimizerConfig& cfg, const Bounds& bounds, int restart) {
  cfg.validate();
  if (bounds.lower.size() != x0.size() || bounds.upper.size() != x0.size()) {
    throw std::invalid_argument("minimize: bounds size mismatch");
  }
  MinimizeResult out;
  out.f = kInf;
  std::vector<double> start(x0.begin(), x0.end());
  bounds.clamp(start);
  EvalContext eval(f, cfg, bounds, restart, out);
  const double f0 = eval(start, 0);
  if (!std::isfinite(f0)) throw std::domain_error("minimize: objective is not finite at x0");

  nelder_mead(eval, start, cfg, f0);
  if (out.timed_out) return out;
  const auto x1 = out.x;
  bfgs(eval, x1, out.f, cfg, out);
  return out;
}

MinimizeResult minimize(const Objective& f, std::span<const double> x0,
                        const OptimizerConfig& cfg) {
  return minimize(f, x0, cfg, Bounds::unbounded(x0.size()));
}

std::vector<double> finite_difference_gradient(const Objective& f, std::span<const double> x,
                                               double step, const Bounds& bounds) {
  OptimizerConfig cfg;
  MinimizeResult scratch;
  scratch.f = kInf;
  EvalContext eval(f, cfg, bounds, 0, scratch);
  return fd_gradient(eval, x, step, bounds);
}

void write_trace_csv(std::ostream& os, std::span<const TraceEntry> trace) {
  std::size_t width = 0;
  for (const auto& t : trace) width = std::max(width, t.x.size());
  os << "restart,evaluation,stage,f";
  for (std::size_t k = 0; k < width; ++k) os << ",p" << k;
  os << '\n' << std::setprecision(17);
  for (const auto& t : trace) {
    os << t.restart << ',' << t.evaluation << ',' << t.stage << ',' << t.f;
    for (double v : t.x) os << ',' << v;
    os << '\n';
  }
}

// ----------------------------------------------------------------------------

std::vector<double> ParameterVector::flatten() const {
  std::vector<double> out = theta;
  out.insert(out.end(), lambda.begin(), lambda.end());
  return out;
}

ParameterVector ParameterVector::split(std::span<const double> flat, std::size_t theta_count) {
  if (flat.size() < theta_count) throw std::invalid_argument("parameter vector too short");
  return {{flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(theta_count)},
          {flat.begin() + static_cast<std::ptrdiff_t>(theta_count), flat.end()}};
}

ClassMap default_class_map(const ModelSpec& model) {
  return build_class_map(model.kind == ModelKind::Hubbard ? Topology::Ladder : Topology::Chain,
                         model.sites);
}

std::string to_string(Ansatz a) { return a == Ansatz::Hadamard ? "hadamard" : "ry-cnot"; }

Ansatz ansatz_from_string(std::string_view s) {
  if (s == "ry-cnot") return Ansatz::RyCnot;
  if (s == "hadamard") return Ansatz::Hadamard;
  throw std::invalid_argument("unknown ansatz '" + std::string(s) + "'");
}

VqeProblem::VqeProblem(const ModelSpec& model, int depth, std::optional<ClassMap> class_map,
                       std::uint64_t initial_bits, Ansatz ansatz)
    : model_(model),
      depth_(depth),
      h_(build_model(model)),
      circuit_(ansatz == Ansatz::Hadamard ? build_hadamard_layer(model.num_qubits())
                                          : build_ry_cnot(model.num_qubits(), depth)),
      class_map_(class_map ? std::move(*class_map) : default_class_map(model)),
      initial_(StateVector::basis_state(model.num_qubits(), initial_bits)) {
  if (class_map_.num_qubits() != model.num_qubits()) {
    throw std::invalid_argument("class map register size does not match the model");
  }
}

StateVector VqeProblem::circuit_state(std::span<const double> theta) const {
  return run_circuit(circuit_, theta, initial_);
}

double VqeProblem::circuit_energy(std::span<const double> theta) const {
  return expectation(h_, circuit_state(theta));
}

double VqeProblem::jqc_energy(std::span<const double> theta, std::span<const double> lambda,
                              const ProjectorChoice& projector) const {
  if (std::all_of(lambda.begin(), lambda.end(), [](double l) { return l == 0.0; })) {
    return circuit_energy(theta);
  }
  const JastrowParams jp(class_map_, {lambda.begin(), lambda.end()});
  const StateVector psi = circuit_state(theta);
  if (projector.truncated) return truncated_state_energy(psi, h_, jp, projector.truncation);
  return expectation(h_, apply_jastrow_exact(psi, jp));
}

double VqeProblem::exact_energy() const {
  if (!exact_) exact_ = exact_ground_state(h_).energy;
  return *exact_;
}

namespace {

std::vector<double> random_angles(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& v : out) v = u(rng);
  return out;
}

std::vector<double> initial_lambda(std::mt19937_64& rng, int n, int restart) {
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  if (restart == 0) return out;
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (auto& v : out) v = u(rng);
  return out;
}

}  // namespace

PairResult optimize_pair(const VqeProblem& problem, const OptimizerConfig& cfg,
                         const PairOptions& options) {
  cfg.validate();
  PairResult res;
  res.e_exact = problem.exact_energy();
  const int nt = problem.num_theta();
  const int nl = problem.num_lambda();

  // Circuit-only.
  const Bounds theta_bounds = Bounds::unbounded(static_cast<std::size_t>(nt));
  const Objective circuit_obj = [&](std::span<const double> x) { return problem.circuit_energy(x); };
  res.e_circuit = kInf;
  if (nt == 0) res.e_circuit = problem.circuit_energy({});
  for (int r = 0; r < cfg.restarts && nt > 0; ++r) {
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(r), 0));
    const auto x0 = random_angles(rng, nt);
    auto m = minimize(circuit_obj, x0, cfg, theta_bounds, r);
    res.timed_out |= m.timed_out;
    if (cfg.record_trace) res.trace.insert(res.trace.end(), m.trace.begin(), m.trace.end());
    if (m.f < res.e_circuit) {
      res.e_circuit = m.f;
      res.theta_circuit = m.x;
    }
    if (m.timed_out) break;
  }

  // Joint circuit + Jastrow.
  Bounds joint_bounds = Bounds::unbounded(static_cast<std::size_t>(nt + nl));
  for (int k = 0; k < nl; ++k) {
    joint_bounds.lower[static_cast<std::size_t>(nt + k)] = -kLambdaBound;
    joint_bounds.upper[static_cast<std::size_t>(nt + k)] = kLambdaBound;
  }
  const Objective joint_obj = [&](std::span<const double> x) {
    return problem.jqc_energy(x.first(static_cast<std::size_t>(nt)),
                              x.subspan(static_cast<std::size_t>(nt)), options.projector);
  };
  res.e_jqc = kInf;
  for (int r = 0; r < cfg.restarts; ++r) {
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(r), 1));
    ParameterVector start;
    const bool warm = options.joint_mode == JointMode::WarmStart && r % 2 == 0;
    start.theta = warm ? res.theta_circuit : random_angles(rng, nt);
    start.lambda = initial_lambda(rng, nl, r);
    const auto x0 = start.flatten();
    auto m = minimize(joint_obj, x0, cfg, joint_bounds, cfg.restarts + r);
    res.timed_out |= m.timed_out;
    if (cfg.record_trace) res.trace.insert(res.trace.end(), m.trace.begin(), m.trace.end());
    if (m.f < res.e_jqc) {
      res.e_jqc = m.f;
      res.jqc = ParameterVector::split(m.x, static_cast<std::size_t>(nt));
    }
    if (m.timed_out) break;
  }
  return res;
}

GainRecord computational_gain(double e_circuit, double e_jqc, double e_exact) {
  constexpr double kTol = 1e-9;
  if (e_circuit < e_exact - kTol || e_jqc < e_exact - kTol) {
    throw std::invalid_argument("computational_gain: energy below the exact ground state");
  }
  GainRecord g{e_circuit, e_jqc, e_exact, 1.0, false};
  const double den = e_jqc - e_exact;
  if (den < 1e-10) {
    g.gain = kGainCap;
    g.capped = true;
    return g;
  }
  g.gain = (e_circuit - e_exact) / den;
  return g;
}

}  // namespace jqc

#include "jqc/jastrow.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace jqc {

std::string to_string(Topology t) { return t == Topology::Chain ? "chain" : "ladder"; }

Topology topology_from_string(std::string_view s) {
  if (s == "chain") return Topology::Chain;
  if (s == "ladder") return Topology::Ladder;
  throw std::invalid_argument("unknown topology '" + std::string(s) + "'");
}

// ----------------------------------------------------------------------------

int ClassMap::pair_index(int n, int s, int t) {
  if (s > t) std::swap(s, t);
  if (s < 0 || t >= n || s == t) throw std::invalid_argument("invalid qubit pair");
  // Pairs before row s: sum_{r<s} (n-1-r).
  return s * (2 * n - s - 1) / 2 + (t - s - 1);
}

ClassMap::ClassMap(int num_qubits, std::vector<int> pair_classes)
    : num_qubits_(num_qubits), classes_(std::move(pair_classes)) {
  if (num_qubits < 2) throw std::invalid_argument("class map needs at least 2 qubits");
  if (static_cast<int>(classes_.size()) != num_qubits * (num_qubits - 1) / 2) {
    throw std::invalid_argument("class map does not cover every pair");
  }
  const int max_class = *std::max_element(classes_.begin(), classes_.end());
  std::vector<bool> used(static_cast<std::size_t>(max_class + 1), false);
  for (int c : classes_) {
    if (c < 0) throw std::invalid_argument("negative class index");
    used[static_cast<std::size_t>(c)] = true;
  }
  if (std::find(used.begin(), used.end(), false) != used.end()) {
    throw std::invalid_argument("class indices are not contiguous from 0");
  }
  num_classes_ = max_class + 1;
}

int ClassMap::class_of(int s, int t) const {
  return classes_[static_cast<std::size_t>(pair_index(num_qubits_, s, t))];
}

ClassMap build_class_map(Topology topology, int sites) {
  if (sites < 2) throw std::invalid_argument("build_class_map: at least 2 sites");
  const int n = topology == Topology::Chain ? sites : 2 * sites;
  std::vector<int> classes;
  classes.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (int s = 0; s < n; ++s) {
    for (int t = s + 1; t < n; ++t) {
      if (topology == Topology::Chain) {
        classes.push_back(t - s - 1);
        continue;
      }
      const int chain_s = s / sites, chain_t = t / sites;
      const int offset = std::abs(s % sites - t % sites);
      if (chain_s == chain_t) {
        classes.push_back(chain_s * (sites - 1) + offset - 1);
      } else {
        classes.push_back(2 * (sites - 1) + offset);
      }
    }
  }
  return {n, std::move(classes)};
}

ClassMap build_all_pairs_map(int num_qubits) {
  std::vector<int> classes(static_cast<std::size_t>(num_qubits * (num_qubits - 1) / 2));
  for (std::size_t i = 0; i < classes.size(); ++i) classes[i] = static_cast<int>(i);
  return {num_qubits, std::move(classes)};
}

ClassMap read_class_map(std::istream& is, int num_qubits) {
  const int pairs = num_qubits * (num_qubits - 1) / 2;
  std::vector<int> classes(static_cast<std::size_t>(pairs), -1);
  std::string text;
  int lineno = 0;
  while (std::getline(is, text)) {
    ++lineno;
    if (text.empty() || text[0] == '#') continue;
    std::istringstream ss(text);
    int s = 0, t = 0, c = 0;
    if (!(ss >> s >> t >> c)) {
      throw std::runtime_error("class map: malformed line " + std::to_string(lineno));
    }
    auto& slot = classes[static_cast<std::size_t>(ClassMap::pair_index(num_qubits, s, t))];
    if (slot >= 0) throw std::runtime_error("class map: duplicate pair at line " + std::to_string(lineno));
    slot = c;
  }
  if (std::find(classes.begin(), classes.end(), -1) != classes.end()) {
    throw std::runtime_error("class map: some pairs are unassigned");
  }
  return {num_qubits, std::move(classes)};
}

void write_class_map(std::ostream& os, const ClassMap& map) {
  for (int s = 0; s < map.num_qubits(); ++s) {
    for (int t = s + 1; t < map.num_qubits(); ++t) os << s << ' ' << t << ' ' << map.class_of(s, t) << '\n';
  }
}

// ----------------------------------------------------------------------------

JastrowParams::JastrowParams(ClassMap map)
    : map_(std::move(map)), lambda_(static_cast<std::size_t>(map_.num_classes()), 0.0) {}

JastrowParams::JastrowParams(ClassMap map, std::vector<double> lambda)
    : map_(std::move(map)), lambda_(std::move(lambda)) {
  if (static_cast<int>(lambda_.size()) != map_.num_classes()) {
    throw std::invalid_argument("lambda length " + std::to_string(lambda_.size()) +
                                " does not match " + std::to_string(map_.num_classes()) + " classes");
  }
}

JastrowParams JastrowParams::with_lambda(std::vector<double> lambda) const {
  return {map_, std::move(lambda)};
}

JastrowParams JastrowParams::scaled(double factor) const {
  auto l = lambda_;
  for (auto& v : l) v *= factor;
  return {map_, std::move(l)};
}

double log_weight(std::uint64_t bits, const JastrowParams& jp) {
  const int n = jp.num_qubits();
  const auto& classes = jp.class_map().pair_classes();
  const auto& lambda = jp.lambda();
  double acc = 0.0;
  std::size_t pair = 0;
  for (int s = 0; s < n; ++s) {
    const bool bs = (bits >> s) & 1U;
    for (int t = s + 1; t < n; ++t, ++pair) {
      const bool bt = (bits >> t) & 1U;
      const double l = lambda[static_cast<std::size_t>(classes[pair])];
      acc += bs == bt ? l : -l;
    }
  }
  return acc;
}

double log_weight(std::string_view bits, const JastrowParams& jp) {
  if (static_cast<int>(bits.size()) != jp.num_qubits()) {
    throw std::invalid_argument("log_weight: bitstring length does not match register");
  }
  std::uint64_t v = 0;
  for (char c : bits) {
    if (c != '0' && c != '1') throw std::invalid_argument("log_weight: invalid bit");
    v = (v << 1) | static_cast<std::uint64_t>(c == '1');
  }
  return log_weight(v, jp);
}

std::vector<double> log_weight_table(const JastrowParams& jp) {
  const std::size_t dim = std::size_t{1} << jp.num_qubits();
  std::vector<double> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = log_weight(i, jp);
  return out;
}

PauliSum jastrow_operator(const JastrowParams& jp) {
  const int n = jp.num_qubits();
  PauliSum j(n);
  for (int s = 0; s < n; ++s) {
    for (int t = s + 1; t < n; ++t) {
      j.add(PauliString::pair(n, s, PauliLetter::Z, t, PauliLetter::Z), jp.pair_lambda(s, t));
    }
  }
  return j;
}

PauliSum truncated_projector(const JastrowParams& jp, TruncationSpec spec) {
  if (spec.order < 0 || spec.order > kMaxTruncationOrder) {
    throw std::invalid_argument("truncation order must lie in [0, 4]");
  }
  const int n = jp.num_qubits();
  const PauliSum factor = PauliSum::identity(n) + jastrow_operator(jp);
  PauliSum p = PauliSum::identity(n);
  for (int k = 0; k < spec.order; ++k) p = multiply(p, factor);
  return p;
}

PauliSum exponential_projector(const JastrowParams& jp) {
  const int n = jp.num_qubits();
  PauliSum p = PauliSum::identity(n);
  for (int s = 0; s < n; ++s) {
    for (int t = s + 1; t < n; ++t) {
      const double l = jp.pair_lambda(s, t);
      if (l == 0.0) continue;
      PauliSum f = PauliSum::identity(n, std::cosh(l));
      f.add(PauliString::pair(n, s, PauliLetter::Z, t, PauliLetter::Z), std::sinh(l));
      p = multiply(p, f);
    }
  }
  return p;
}

double transformed_energy(const StateVector& psi, const PauliSum& h,
                          const JastrowParams& jp, TruncationSpec spec) {
  if (psi.num_qubits() != h.num_qubits() || jp.num_qubits() != h.num_qubits()) {
    throw std::invalid_argument("transformed_energy: size mismatch");
  }
  const PauliSum p = truncated_projector(jp, spec);
  const double den = expectation(multiply(p, p), psi);
  if (!(den > 1e-12)) {
    throw std::domain_error("transformed_energy: vanishing normalization (negligible overlap)");
  }
  return expectation(multiply(p, multiply(h, p)), psi) / den;
}

double truncated_state_energy(const StateVector& psi, const PauliSum& h,
                              const JastrowParams& jp, TruncationSpec spec) {
  if (spec.order < 0 || spec.order > kMaxTruncationOrder) {
    throw std::invalid_argument("truncation order must lie in [0, 4]");
  }
  const auto logw = log_weight_table(jp);
  StateVector phi = psi;
  for (std::size_t i = 0; i < phi.dimension(); ++i) phi[i] *= std::pow(1.0 + logw[i], spec.order);
  const double n2 = std::norm(phi.norm());
  if (!(n2 > 1e-12)) {
    throw std::domain_error("truncated_state_energy: vanishing normalization");
  }
  phi.normalize();
  return expectation(h, phi);
}

std::size_t term_count(const JastrowParams& jp, TruncationSpec spec) {
  return truncated_projector(jp, spec).size();
}

}  // namespace jqc

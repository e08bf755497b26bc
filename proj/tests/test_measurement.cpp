#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "jqc/experiments.hpp"
#include "jqc/measurement.hpp"
#include "oracles.hpp"

using namespace jqc;

namespace {

ModelSpec ising(int l, double g) {
  ModelSpec m;
  m.sites = l;
  m.field = g;
  return m;
}

const double kLambdaStar = 0.5 * std::log((1 + std::sqrt(5.0)) / 2);

StateVector with_ancilla(const StateVector& psi) {
  std::vector<cplx> wide(std::size_t{1} << (2 * psi.num_qubits()), cplx{0.0});
  for (std::size_t i = 0; i < psi.dimension(); ++i) wide[i] = psi[i];
  return StateVector(std::move(wide));
}

ProbDist exact_pbar(const StateVector& psi, const MeasurementBasis& b) {
  const StateVector ext = run_circuit(build_entangled_copy(Circuit(psi.num_qubits()), b), {}, with_ancilla(psi));
  return {2 * psi.num_qubits(), ext.probabilities()};
}

}  // namespace

TEST(EntangledCopy, PreMeasurementState) {
  const Circuit c = build_entangled_copy(build_hadamard_layer(2), MeasurementBasis::from_string("ZZ"));
  const StateVector psi = run_circuit(c, {});
  for (std::size_t k = 0; k < 16; ++k) {
    const bool diag = (k >> 2) == (k & 3);
    EXPECT_NEAR(std::abs(psi[k] - cplx(diag ? 0.5 : 0.0)), 0.0, 1e-15) << k;
  }
}

TEST(EntangledCopy, GateCount) {
  const Circuit base = build_ry_cnot(3, 2);
  const Circuit c = build_entangled_copy(base, MeasurementBasis::from_string("XZY"));
  EXPECT_EQ(c.num_qubits(), 6);
  EXPECT_EQ(c.gates().size(), base.gates().size() + 3 + 2);
  EXPECT_EQ(c.num_params(), base.num_params());
}

TEST(EntangledCopy, AncillaCopiesSystemInEveryBasis) {
  std::mt19937_64 rng(1);
  for (const char* b : {"ZZ", "XX", "YY", "XZ"}) {
    const StateVector psi = run_circuit(build_entangled_copy(Circuit(2), MeasurementBasis::from_string(b)), {},
                                        with_ancilla(StateVector::basis_state(2, 2)));
    // Ancilla holds the pre-rotation bits 10 regardless of the basis.
    for (std::size_t k = 0; k < 16; ++k) {
      if (std::norm(psi[k]) > 1e-15) EXPECT_EQ(k >> 2, 2U) << b;
    }
  }
}

TEST(SampleCounts, DeltaAndDeterminism) {
  const CountsTable zero = sample_counts(StateVector(3), 1000, 9);
  EXPECT_EQ(zero.count(0), 1000U);
  EXPECT_EQ(zero.shots(), 1000U);

  const StateVector plus = run_circuit(build_hadamard_layer(3), {});
  EXPECT_EQ(sample_counts(plus, 5000, 42), sample_counts(plus, 5000, 42));
  EXPECT_NE(sample_counts(plus, 5000, 42), sample_counts(plus, 5000, 43));
}

TEST(SampleCounts, UniformFrequencies) {
  const StateVector plus = run_circuit(build_hadamard_layer(2), {});
  const std::uint64_t shots = 1'000'000;
  const CountsTable c = sample_counts(plus, shots, 2024);
  const double sigma = std::sqrt(0.25 * 0.75 / static_cast<double>(shots));
  for (std::uint64_t k = 0; k < 4; ++k) {
    EXPECT_LT(std::abs(static_cast<double>(c.count(k)) / static_cast<double>(shots) - 0.25), 5 * sigma);
  }
}

TEST(Reweight, ZeroLambdaAndSingleOutcome) {
  const JastrowParams zero(build_class_map(Topology::Chain, 2));
  const ProbDist p(4, std::vector<double>{0.1, 0.2, 0, 0, 0, 0.3, 0, 0, 0, 0, 0.1, 0, 0, 0, 0, 0.3});
  const ProbDist r = reweight(p, zero);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(r[i], p[i], 1e-15);

  CountsTable one(4);
  one.add(6, 17);
  const JastrowParams jp(build_class_map(Topology::Chain, 2), {1.3});
  EXPECT_NEAR(reweight(one, jp)[6], 1.0, 1e-15);
}

TEST(Reweight, MatchesExactJastrowOnPlusState) {
  CountsTable c(4);
  for (std::uint64_t i : {0U, 5U, 10U, 15U}) c.add(i, 100);
  const JastrowParams jp(build_class_map(Topology::Chain, 2), {kLambdaStar});
  const ProbDist r = reweight(c, jp);
  const StateVector ref = apply_jastrow_exact(run_circuit(build_hadamard_layer(2), {}), jp);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(r[i * 4 + i], std::norm(ref[i]), 1e-14);

  // Literal mode uses exp(J): the ratio of diagonal weights is e^{2 lambda}, not e^{4 lambda}.
  const ProbDist lit = reweight(c, jp, WeightMode::Literal);
  EXPECT_NEAR(lit[0] / lit[5], std::exp(2 * kLambdaStar), 1e-12);
}

TEST(LambdaMatrix, ZZIsIdentity) {
  const LambdaMatrix l = lambda_matrix(MeasurementBasis::from_string("ZZ"));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(l(i, j), cplx(i == j ? 1.0 : 0.0));
}

TEST(LambdaMatrix, XXHadamardPattern) {
  const LambdaMatrix l = lambda_matrix(MeasurementBasis::from_string("XX"));
  const int pattern[4][4] = {{1, 1, 1, 1}, {1, -1, 1, -1}, {1, 1, -1, -1}, {1, -1, -1, 1}};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(std::abs(l(i, j) - cplx(pattern[i][j])), 0.0, 1e-15);
  EXPECT_TRUE(l.is_real());
}

TEST(LambdaMatrix, MixedBasisTensorForm) {
  // Qubit 1 rotated by H, qubit 0 left alone: sqrt(2) (H (x) I).
  const LambdaMatrix l = lambda_matrix(MeasurementBasis::from_string("XI"));
  const oracle::Mat h = (oracle::letter_matrix('X') + oracle::letter_matrix('Z')) / std::sqrt(2.0);
  const oracle::Mat ref = std::sqrt(2.0) * oracle::embed_1q(h, 1, 2);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      EXPECT_NEAR(std::abs(l(i, j) - ref(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))), 0.0, 1e-15);
}

TEST(LambdaMatrix, YBasisIsComplex) {
  EXPECT_FALSE(lambda_matrix(MeasurementBasis::from_string("YZ")).is_real());
}

TEST(Reconstruct, ZBasisPicksDiagonal) {
  std::vector<double> w(16, 0.0);
  w[0] = 0.2;
  w[5] = 0.3;
  w[10] = 0.1;
  w[15] = 0.4;
  const ProbDist p = reconstruct_reduced(ProbDist(4, w), lambda_matrix(MeasurementBasis::from_string("ZZ")));
  EXPECT_NEAR(p[0], 0.2, 1e-15);
  EXPECT_NEAR(p[1], 0.3, 1e-15);
  EXPECT_NEAR(p[2], 0.1, 1e-15);
  EXPECT_NEAR(p[3], 0.4, 1e-15);
}

TEST(Reconstruct, PositiveStatesIncludingY) {
  std::mt19937_64 rng(8);
  for (int l = 1; l <= 4; ++l) {
    const StateVector psi = oracle::random_positive_state(rng, l);
    for (const char* axes : {"X", "Y", "Z"}) {
      const auto b = MeasurementBasis::uniform(l, axes[0] == 'X' ? PauliLetter::X : axes[0] == 'Y' ? PauliLetter::Y : PauliLetter::Z);
      const ProbDist rec = reconstruct_reduced(exact_pbar(psi, b), lambda_matrix(b));
      const ProbDist ref = direct_distribution(psi, b);
      EXPECT_LT(reconstruction_error(rec, ref), 1e-12) << "L=" << l << " " << axes;
    }
  }
}

TEST(Reconstruct, SignsRecoverRealStates) {
  std::mt19937_64 rng(12);
  const StateVector psi = random_real_state(3, 77);
  const auto b = MeasurementBasis::uniform(3, PauliLetter::X);
  SignVector s;
  for (std::size_t j = 0; j < 8; ++j) s.s.push_back(psi[j].real() < 0 ? -1.0 : 1.0);
  const ProbDist rec = reconstruct_reduced(exact_pbar(psi, b), lambda_matrix(b), s);
  EXPECT_LT(reconstruction_error(rec, direct_distribution(psi, b)), 1e-12);
}

TEST(SolveSigns, PositiveStateKeepsAllPlus) {
  std::mt19937_64 rng(10);
  const StateVector psi = oracle::random_positive_state(rng, 4);
  const auto b = MeasurementBasis::uniform(4, PauliLetter::X);
  const SignSolveResult r = solve_signs(exact_pbar(psi, b), direct_distribution(psi, b), b);
  for (double s : r.signs.s) EXPECT_NEAR(s, 1.0, 1e-3);
  EXPECT_LT(r.residual, 1e-6);
}

TEST(SolveSigns, RandomRealStateSmallError) {
  const StateVector psi = random_real_state(5, 31);
  const auto b = MeasurementBasis::uniform(5, PauliLetter::X);
  const SignSolveResult r = solve_signs(exact_pbar(psi, b), direct_distribution(psi, b), b);
  EXPECT_TRUE(std::isfinite(r.residual));
  EXPECT_LE(reconstruction_error(r.reduced, direct_distribution(psi, b)), 0.1);
}

TEST(ReconstructionError, Examples) {
  const ProbDist a(2, {0.5, 0.5, 0, 0});
  EXPECT_EQ(reconstruction_error(a, a), 0.0);
  EXPECT_NEAR(reconstruction_error(ProbDist(2, {1, 0, 0, 0}), ProbDist(2, {0, 0, 1, 0})), std::sqrt(2.0), 1e-15);
  EXPECT_THROW(reconstruction_error(a, ProbDist(3)), std::invalid_argument);
}

TEST(ReconstructionError, ShotScaling) {
  std::mt19937_64 rng(21);
  const StateVector psi = oracle::random_positive_state(rng, 4);
  const ProbDist exact(4, psi.probabilities());
  std::vector<double> shots{1e3, 1e4, 1e5}, err;
  for (double s : shots) {
    double acc = 0.0;
    for (int k = 0; k < 20; ++k) {
      acc += reconstruction_error(sample_counts(psi, static_cast<std::uint64_t>(s), 100 + k).normalized(), exact);
    }
    err.push_back(acc / 20);
  }
  EXPECT_NEAR(oracle::log_log_slope(shots, err), -0.5, 0.1);
}

TEST(SampledEnergy, ZeroLambdaMatchesBareCircuit) {
  const ModelSpec m = ising(3, 0.8);
  const Circuit c = build_ry_cnot(3, 1);
  const std::vector<double> theta{0.4, 1.1, 2.0};
  SamplingConfig sc;
  sc.shots = 20000;
  const SampledEnergy se = jqc_energy_sampled(m, c, theta, JastrowParams(build_class_map(Topology::Chain, 3)), sc);
  const double bare = expectation(build_model(m), run_circuit(c, theta));
  EXPECT_LT(std::abs(se.mean - bare), 3 * se.stderr_);
  EXPECT_EQ(se.per_repetition.size(), 12U);
}

TEST(SampledEnergy, TwoQubitFixedPoint) {
  const ModelSpec m = ising(2, 1.0);
  const JastrowParams jp(build_class_map(Topology::Chain, 2), {kLambdaStar});
  const SampledEnergy se = jqc_energy_sampled(m, build_hadamard_layer(2), {}, jp, SamplingConfig{});
  EXPECT_LT(std::abs(se.mean + std::sqrt(5.0)), 3 * se.stderr_);
  EXPECT_LT(se.stderr_, 0.05);
}

TEST(SampledEnergy, ConvergesWithShots) {
  // Bias plus noise of the estimator shrinks like shots^{-1/2} over four decades.
  const ModelSpec m = ising(3, 1.2);
  const Circuit c = build_ry_cnot(3, 1);
  const std::vector<double> theta{0.9, 0.3, 1.7};
  const JastrowParams jp(build_class_map(Topology::Chain, 3), {0.3, -0.1});
  const double exact = expectation(build_model(m), apply_jastrow_exact(run_circuit(c, theta), jp));
  std::vector<double> shots{1e3, 1e4, 1e5, 1e6}, rms;
  for (double s : shots) {
    SamplingConfig sc;
    sc.shots = static_cast<std::uint64_t>(s);
    sc.repetitions = 40;
    const SampledEnergy se = jqc_energy_sampled(m, c, theta, jp, sc);
    double acc = 0.0;
    for (double e : se.per_repetition) acc += (e - exact) * (e - exact);
    rms.push_back(std::sqrt(acc / static_cast<double>(se.per_repetition.size())));
  }
  EXPECT_NEAR(oracle::log_log_slope(shots, rms), -0.5, 0.1);
}

TEST(SampledEnergy, SignSolvedModeOnRealCircuit) {
  // Ry-CNOT at d = 2 produces negative amplitudes; the sign-solved estimate
  // stays close to the exact JQC energy.
  const ModelSpec m = ising(3, 1.0);
  const Circuit c = build_ry_cnot(3, 2);
  const std::vector<double> theta{0.4, 2.5, -1.0, 1.2, 0.3, -2.2};
  const JastrowParams jp(build_class_map(Topology::Chain, 3), {0.2, 0.05});
  const double exact = expectation(build_model(m), apply_jastrow_exact(run_circuit(c, theta), jp));
  SamplingConfig sc;
  sc.shots = 200000;
  sc.repetitions = 4;
  sc.reconstruction = ReconstructionMode::SignSolved;
  const SampledEnergy se = jqc_energy_sampled(m, c, theta, jp, sc);
  EXPECT_LT(std::abs(se.mean - exact), 0.05 * std::abs(exact));
}

TEST(SamplingConfig, Validation) {
  SamplingConfig sc;
  sc.shots = 0;
  EXPECT_THROW(sc.validate(), std::invalid_argument);
  sc.shots = 10;
  sc.repetitions = 0;
  EXPECT_THROW(sc.validate(), std::invalid_argument);
}

TEST(CountsFile, RoundTripAndValidation) {
  CountsTable c(4);
  c.add(0b0101, 7);
  c.add(0b1111, 3);
  std::stringstream ss;
  write_counts(ss, c, "ZZ");
  const CountsFile f = read_counts(ss);
  EXPECT_EQ(f.counts, c);
  EXPECT_EQ(f.basis, "ZZ");

  std::istringstream bad("# qubits=4 shots=11 basis=ZZ\n0101 7\n1111 3\n");
  EXPECT_THROW(read_counts(bad), std::runtime_error);
  std::istringstream width("# qubits=4 shots=7 basis=ZZ\n101 7\n");
  EXPECT_THROW(read_counts(width), std::runtime_error);
}

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "jqc/optimizer.hpp"

using namespace jqc;

namespace {

const double kLambdaStar = 0.5 * std::log((1 + std::sqrt(5.0)) / 2);

ModelSpec ising(int l, double g) {
  ModelSpec m;
  m.sites = l;
  m.field = g;
  return m;
}

}  // namespace

TEST(Minimize, ConvexBowl) {
  const std::vector<double> a{0.3, -1.2, 2.0, 0.7};
  const Objective f = [&](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - a[i]) * (x[i] - a[i]);
    return s;
  };
  const std::vector<double> x0(4, 0.0);
  const MinimizeResult r = minimize(f, x0, OptimizerConfig{});
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(r.x[i], a[i], 1e-6);
  EXPECT_TRUE(r.converged);
}

TEST(Minimize, RespectsBounds) {
  const Objective f = [](std::span<const double> x) { return (x[0] - 5.0) * (x[0] - 5.0); };
  const std::vector<double> x0{0.0};
  const MinimizeResult r = minimize(f, x0, OptimizerConfig{}, Bounds{{-1.0}, {2.0}});
  EXPECT_NEAR(r.x[0], 2.0, 1e-9);
}

TEST(Minimize, NonFiniteStartThrows) {
  const Objective f = [](std::span<const double>) { return std::numeric_limits<double>::quiet_NaN(); };
  const std::vector<double> x0{0.0};
  EXPECT_THROW(minimize(f, x0, OptimizerConfig{}), std::domain_error);
}

TEST(Minimize, DeadlineStopsEarly) {
  int calls = 0;
  const Objective f = [&](std::span<const double> x) {
    ++calls;
    return std::sin(3 * x[0]) + x[1] * x[1];
  };
  OptimizerConfig cfg;
  cfg.deadline = std::chrono::steady_clock::now();
  const std::vector<double> x0{1.0, 1.0};
  const MinimizeResult r = minimize(f, x0, cfg);
  EXPECT_TRUE(r.timed_out);
  EXPECT_LE(r.f, std::sin(3.0) + 1.0);
  EXPECT_LT(calls, 10);
}

TEST(Minimize, TraceCsv) {
  const Objective f = [](std::span<const double> x) { return x[0] * x[0]; };
  OptimizerConfig cfg;
  cfg.record_trace = true;
  const std::vector<double> x0{1.0};
  const MinimizeResult r = minimize(f, x0, cfg);
  ASSERT_FALSE(r.trace.empty());
  std::ostringstream ss;
  write_trace_csv(ss, r.trace);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "restart,evaluation,stage,f,p0");
}

TEST(OptimizerConfig, Validation) {
  OptimizerConfig cfg;
  cfg.restarts = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = OptimizerConfig{};
  cfg.fd_step = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(ParameterVector, FlattenSplit) {
  const ParameterVector p{{1, 2, 3}, {4, 5}};
  const auto flat = p.flatten();
  EXPECT_EQ(flat, (std::vector<double>{1, 2, 3, 4, 5}));
  const auto back = ParameterVector::split(flat, 3);
  EXPECT_EQ(back.theta, p.theta);
  EXPECT_EQ(back.lambda, p.lambda);
}

TEST(VqeProblem, TwoQubitFixedPoint) {
  const VqeProblem p(ising(2, 1.0), 0, std::nullopt, 0, Ansatz::Hadamard);
  EXPECT_EQ(p.num_theta(), 0);
  EXPECT_EQ(p.num_lambda(), 1);
  const Objective f = [&](std::span<const double> l) { return p.jqc_energy({}, l); };
  const std::vector<double> x0{0.0};
  const MinimizeResult r = minimize(f, x0, OptimizerConfig{}, Bounds{{-kLambdaBound}, {kLambdaBound}});
  EXPECT_NEAR(r.x[0], kLambdaStar, 1e-4);
  EXPECT_NEAR(r.f, -std::sqrt(5.0), 1e-8);
}

TEST(VqeProblem, ZeroLambdaIsCircuitEnergy) {
  const VqeProblem p(ising(3, 0.7), 2);
  const std::vector<double> theta{0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, lambda{0.0, 0.0};
  EXPECT_EQ(p.jqc_energy(theta, lambda), p.circuit_energy(theta));
}

TEST(OptimizePair, DepthZeroStartsFromZeroState) {
  const VqeProblem p(ising(3, 1.0), 0);
  OptimizerConfig cfg;
  cfg.restarts = 2;
  const PairResult r = optimize_pair(p, cfg);
  EXPECT_NEAR(r.e_circuit, -2.0, 1e-12);  // <000| H |000> = -(L - 1)
  EXPECT_LE(r.e_jqc, r.e_circuit);
}

TEST(OptimizePair, IsingFourSitesDepthOne) {
  const VqeProblem p(ising(4, 1.0), 1);
  OptimizerConfig cfg;
  cfg.restarts = 10;
  const PairResult r = optimize_pair(p, cfg);
  EXPECT_LT(r.e_jqc - r.e_exact, r.e_circuit - r.e_exact);
  EXPECT_GE(r.e_jqc, r.e_exact - 1e-9);
}

TEST(OptimizePair, HubbardGainIncreasesWithDepth) {
  ModelSpec m;
  m.kind = ModelKind::Hubbard;
  m.sites = 2;
  m.hopping = 1.0;
  m.onsite = 4.0;
  std::vector<double> gains;
  for (int d = 1; d <= 3; ++d) {
    const VqeProblem p(m, d, std::nullopt, 0b0101);
    OptimizerConfig cfg;
    cfg.restarts = 5;
    const PairResult r = optimize_pair(p, cfg);
    gains.push_back(computational_gain(r.e_circuit, r.e_jqc, r.e_exact).gain);
  }
  for (std::size_t i = 1; i < gains.size(); ++i) EXPECT_GE(gains[i], gains[i - 1]) << "d=" << i + 1;
}

TEST(OptimizePair, TruncatedProjectorMode) {
  const VqeProblem p(ising(4, 1.0), 1);
  OptimizerConfig cfg;
  cfg.restarts = 2;
  PairOptions po;
  po.projector.truncated = true;
  po.projector.truncation.order = 2;
  const PairResult r = optimize_pair(p, cfg, po);
  EXPECT_LE(r.e_jqc, r.e_circuit);
  EXPECT_NEAR(p.jqc_energy(r.jqc.theta, r.jqc.lambda, po.projector), r.e_jqc, 1e-12);
}

TEST(ComputationalGain, EdgeCases) {
  EXPECT_DOUBLE_EQ(computational_gain(-1.0, -1.0, -2.0).gain, 1.0);
  const GainRecord capped = computational_gain(-1.0, -2.0, -2.0);
  EXPECT_TRUE(capped.capped);
  EXPECT_EQ(capped.gain, kGainCap);
  EXPECT_NEAR(computational_gain(-1.0, -1.9, -2.0).gain, 10.0, 1e-12);
  EXPECT_THROW(computational_gain(-3.0, -1.0, -2.0), std::invalid_argument);
}

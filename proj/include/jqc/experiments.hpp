#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "jqc/jastrow.hpp"
#include "jqc/measurement.hpp"
#include "jqc/optimizer.hpp"
#include "jqc/pauli.hpp"

namespace jqc {

inline constexpr std::string_view kVersion = "1.0.0";

enum class ExperimentKind { Sweep, Gain, LambdaScan, Reconstruct, Dispersion, DumpH };

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(std::string_view s);

/// Config validation failure; what() reads `<source>:<line>: <pointer>: <message>`.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string source, int line, std::string pointer, const std::string& message);
  int line() const { return line_; }
  const std::string& pointer() const { return pointer_; }

 private:
  int line_;
  std::string pointer_;
};

enum class GainMode { Exponential, ImplementationB };

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Sweep;
  /// Cartesian product of the model grid, sites outermost.
  std::vector<ModelSpec> models;
  std::vector<int> depths{1};
  Ansatz ansatz = Ansatz::RyCnot;
  JointMode joint_mode = JointMode::WarmStart;
  OptimizerConfig optimizer{};
  SamplingConfig sampling{};
  /// Empty: automatic class map.
  std::string class_map_file;
  std::string output;
  bool json_mirror = false;
  std::uint64_t seed = 1;
  double row_time_limit = 300.0;  // seconds

  // gain
  GainMode gain_mode = GainMode::Exponential;
  int truncation_order = 2;

  // lambda-scan, dispersion
  std::vector<double> lambda_scale{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::uint64_t> shots{8192};

  // reconstruct
  std::vector<int> sizes;
  int states_per_size = 25;

  /// Canonical text the config hash is computed from.
  std::string canonical;
};

/// Parses and validates; `source` names the document in error messages.
ExperimentConfig parse_config(std::string_view text, const std::string& source = "config");
ExperimentConfig load_config(const std::string& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

/// One output row. Cells are pre-formatted; columns follow result_schema(kind).
struct ResultRecord {
  std::vector<std::string> cells;
  double wall_time = 0.0;
};

/// Column names, the trailing `wall_time` column included.
const std::vector<std::string>& result_schema(ExperimentKind kind);

struct ResultTable {
  ExperimentKind kind = ExperimentKind::Sweep;
  std::vector<ResultRecord> rows;
};

/// Relative error (e - e_exact) / |e_exact|.
double relative_error(double e, double e_exact);

struct RunOptions {
  int threads = 1;
  std::optional<std::uint64_t> seed;
  std::optional<WeightMode> weight_mode;
};

/// Runs every row of the experiment; row order is independent of `threads`.
ResultTable run_experiment(ExperimentConfig cfg, const RunOptions& options = {});

/// `#` provenance lines, header, then rows.
void write_csv(std::ostream& os, const ExperimentConfig& cfg, const ResultTable& table);
void write_json(std::ostream& os, const ExperimentConfig& cfg, const ResultTable& table);

/// Parsed CSV: provenance lines, header, rows. Throws if a row does not match the header.
struct ParsedCsv {
  std::vector<std::string> provenance;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
ParsedCsv read_csv(std::istream& is);

/// Normalized state with i.i.d. standard normal real amplitudes.
StateVector random_real_state(int num_qubits, std::uint64_t seed);

struct ReconstructionBench {
  double e_direct = 0.0;
  double e_reconstructed = 0.0;
  double e_jastrow = 0.0;
  /// Largest per-basis error against the exact direct distribution.
  double eps = 0.0;
  std::vector<double> lambda;
  bool timed_out = false;
};

/**
 * @brief Entangled-copy reconstruction of a given state's energy.
 *
 * Signs are solved per rotated basis against the direct distribution; the
 * rounded candidate with the smallest total residual is then shared by all
 * bases. The Jastrow step minimizes over lambda at fixed counts, starting
 * from zero. shots = 0 uses exact probabilities.
 */
ReconstructionBench reconstruction_bench(const StateVector& psi, const PauliSum& h,
                                         const ClassMap& map, std::uint64_t shots,
                                         std::uint64_t seed, const OptimizerConfig& opt,
                                         WeightMode mode = WeightMode::Squared);

/// One Hamiltonian per model in the grid, separated by `# <model>` lines.
void dump_hamiltonians(std::ostream& os, const ExperimentConfig& cfg);

}  // namespace jqc

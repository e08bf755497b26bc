#include "jqc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace jqc {

using nlohmann::json;

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Sweep: return "sweep";
    case ExperimentKind::Gain: return "gain";
    case ExperimentKind::LambdaScan: return "lambda-scan";
    case ExperimentKind::Reconstruct: return "reconstruct";
    case ExperimentKind::Dispersion: return "dispersion";
    case ExperimentKind::DumpH: return "dump-h";
  }
  return "?";
}

ExperimentKind experiment_kind_from_string(std::string_view s) {
  for (auto k : {ExperimentKind::Sweep, ExperimentKind::Gain, ExperimentKind::LambdaScan,
                 ExperimentKind::Reconstruct, ExperimentKind::Dispersion, ExperimentKind::DumpH}) {
    if (s == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown experiment kind '" + std::string(s) + "'");
}

ConfigError::ConfigError(std::string source, int line, std::string pointer, const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + (pointer.empty() ? "/" : pointer) +
                         ": " + message),
      line_(line),
      pointer_(std::move(pointer)) {}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double relative_error(double e, double e_exact) {
  if (e_exact == 0.0) throw std::domain_error("relative_error: exact energy is zero");
  return (e - e_exact) / std::abs(e_exact);
}

// ----------------------------------------------------------------------------
// Config parsing

namespace {

// Input iterator that records how far the parser has read.
class TrackingIterator {
 public:
  using iterator_category = std::input_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  TrackingIterator() = default;
  TrackingIterator(const char* p, const char** cursor) : p_(p), cursor_(cursor) {}

  reference operator*() const {
    if (cursor_ && p_ > *cursor_) *cursor_ = p_;
    return *p_;
  }
  TrackingIterator& operator++() {
    ++p_;
    return *this;
  }
  TrackingIterator operator++(int) {
    auto t = *this;
    ++p_;
    return t;
  }
  bool operator==(const TrackingIterator& o) const { return p_ == o.p_; }
  bool operator!=(const TrackingIterator& o) const { return p_ != o.p_; }

 private:
  const char* p_ = nullptr;
  const char** cursor_ = nullptr;
};

std::string escape_pointer_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

// Builds the DOM while mapping every JSON pointer to its source line.
class LocatingSax : public nlohmann::detail::json_sax_dom_parser<json> {
  using Base = nlohmann::detail::json_sax_dom_parser<json>;

 public:
  LocatingSax(json& root, std::string_view text, const char** cursor)
      : Base(root, false), text_(text), cursor_(cursor) {}

  std::map<std::string, int> lines;
  std::string error;
  std::size_t error_pos = 0;

  bool null() { note_value(); return Base::null(); }
  bool boolean(bool v) { note_value(); return Base::boolean(v); }
  bool number_integer(number_integer_t v) { note_value(); return Base::number_integer(v); }
  bool number_unsigned(number_unsigned_t v) { note_value(); return Base::number_unsigned(v); }
  bool number_float(number_float_t v, const string_t& s) { note_value(); return Base::number_float(v, s); }
  bool string(string_t& v) { note_value(); return Base::string(v); }
  bool binary(binary_t& v) { note_value(); return Base::binary(v); }

  bool start_object(std::size_t n) {
    note_value();
    frames_.push_back({true, "", 0});
    return Base::start_object(n);
  }
  bool key(string_t& k) {
    frames_.back().key = escape_pointer_token(k);
    lines[current_path()] = line_now();
    return Base::key(k);
  }
  bool end_object() {
    frames_.pop_back();
    return Base::end_object();
  }
  bool start_array(std::size_t n) {
    note_value();
    frames_.push_back({false, "", -1});
    return Base::start_array(n);
  }
  bool end_array() {
    frames_.pop_back();
    return Base::end_array();
  }
  template <class Exception>
  bool parse_error(std::size_t pos, const std::string&, const Exception& ex) {
    error = ex.what();
    error_pos = pos;
    return false;
  }

  int line_at(std::size_t offset) const {
    offset = std::min(offset, text_.size());
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
  }

 private:
  struct Frame {
    bool object;
    std::string key;
    int index;
  };

  int line_now() const {
    const std::size_t off = *cursor_ ? static_cast<std::size_t>(*cursor_ - text_.data()) : 0;
    return line_at(off);
  }

  std::string current_path() const {
    std::string p;
    for (const auto& f : frames_) p += "/" + (f.object ? f.key : std::to_string(f.index));
    return p;
  }

  void note_value() {
    if (frames_.empty()) {
      lines[""] = line_now();
    } else if (!frames_.back().object) {
      ++frames_.back().index;
      lines[current_path()] = line_now();
    }
  }

  std::string_view text_;
  const char** cursor_;
  std::vector<Frame> frames_;
};

class ConfigReader {
 public:
  ConfigReader(std::string source, std::map<std::string, int> lines)
      : source_(std::move(source)), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& msg) const {
    std::string p = pointer;
    auto it = lines_.find(p);
    while (it == lines_.end() && !p.empty()) {
      p = p.substr(0, p.rfind('/'));
      it = lines_.find(p);
    }
    throw ConfigError(source_, it == lines_.end() ? 1 : it->second, pointer, msg);
  }

  void check_keys(const json& obj, const std::string& ptr, std::initializer_list<std::string_view> allowed) const {
    if (!obj.is_object()) fail(ptr, "expected an object");
    for (const auto& [k, v] : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
        fail(ptr + "/" + escape_pointer_token(k), "unknown key '" + k + "'");
      }
    }
  }

  double number(const json& v, const std::string& ptr) const {
    if (!v.is_number()) fail(ptr, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(ptr, "expected a finite number");
    return x;
  }

  long long integer(const json& v, const std::string& ptr, long long lo, long long hi) const {
    if (!v.is_number_integer()) fail(ptr, "expected an integer");
    const long long x = v.get<long long>();
    if (x < lo || x > hi) fail(ptr, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
  }

  std::string string(const json& v, const std::string& ptr) const {
    if (!v.is_string()) fail(ptr, "expected a string");
    return v.get<std::string>();
  }

  bool boolean(const json& v, const std::string& ptr) const {
    if (!v.is_boolean()) fail(ptr, "expected true or false");
    return v.get<bool>();
  }

  // A scalar or a non-empty array of scalars.
  std::vector<double> number_grid(const json& v, const std::string& ptr) const {
    if (!v.is_array()) return {number(v, ptr)};
    if (v.empty()) fail(ptr, "grid must not be empty");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], ptr + "/" + std::to_string(i)));
    return out;
  }

  std::vector<long long> integer_grid(const json& v, const std::string& ptr, long long lo, long long hi) const {
    if (!v.is_array()) return {integer(v, ptr, lo, hi)};
    if (v.empty()) fail(ptr, "grid must not be empty");
    std::vector<long long> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(integer(v[i], ptr + "/" + std::to_string(i), lo, hi));
    return out;
  }

  template <class F>
  auto enum_value(const json& v, const std::string& ptr, F parse) const {
    const auto s = string(v, ptr);
    try {
      return parse(s);
    } catch (const std::invalid_argument& e) {
      fail(ptr, e.what());
    }
  }

 private:
  std::string source_;
  std::map<std::string, int> lines_;
};

constexpr long long kMaxShots = 1'000'000'000'000LL;

void read_optimizer(const ConfigReader& r, const json& j, OptimizerConfig& o) {
  const std::string p = "/optimizer";
  r.check_keys(j, p, {"restarts", "stage1_max_evals", "stage1_initial_step", "stage1_ftol",
                      "stage2_max_iters", "gradient_tol", "fd_step"});
  if (j.contains("restarts")) o.restarts = static_cast<int>(r.integer(j["restarts"], p + "/restarts", 1, 1000));
  if (j.contains("stage1_max_evals"))
    o.stage1_max_evals = static_cast<int>(r.integer(j["stage1_max_evals"], p + "/stage1_max_evals", 0, 10'000'000));
  if (j.contains("stage1_initial_step")) o.stage1_initial_step = r.number(j["stage1_initial_step"], p + "/stage1_initial_step");
  if (j.contains("stage1_ftol")) o.stage1_ftol = r.number(j["stage1_ftol"], p + "/stage1_ftol");
  if (j.contains("stage2_max_iters"))
    o.stage2_max_iters = static_cast<int>(r.integer(j["stage2_max_iters"], p + "/stage2_max_iters", 0, 10'000'000));
  if (j.contains("gradient_tol")) o.gradient_tol = r.number(j["gradient_tol"], p + "/gradient_tol");
  if (j.contains("fd_step")) o.fd_step = r.number(j["fd_step"], p + "/fd_step");
  try {
    o.validate();
  } catch (const std::invalid_argument& e) {
    r.fail(p, e.what());
  }
}

void read_sampling(const ConfigReader& r, const json& j, SamplingConfig& s) {
  const std::string p = "/sampling";
  r.check_keys(j, p, {"shots", "repetitions", "weight", "reconstruction"});
  if (j.contains("shots")) s.shots = static_cast<std::uint64_t>(r.integer(j["shots"], p + "/shots", 1, kMaxShots));
  if (j.contains("repetitions")) s.repetitions = static_cast<int>(r.integer(j["repetitions"], p + "/repetitions", 1, 100000));
  if (j.contains("weight")) {
    s.weight_mode = r.enum_value(j["weight"], p + "/weight", [](const std::string& v) {
      if (v == "squared") return WeightMode::Squared;
      if (v == "literal") return WeightMode::Literal;
      throw std::invalid_argument("expected 'squared' or 'literal'");
    });
  }
  if (j.contains("reconstruction")) {
    s.reconstruction = r.enum_value(j["reconstruction"], p + "/reconstruction", [](const std::string& v) {
      if (v == "positive") return ReconstructionMode::Positive;
      if (v == "sign-solved") return ReconstructionMode::SignSolved;
      throw std::invalid_argument("expected 'positive' or 'sign-solved'");
    });
  }
}

std::vector<ModelSpec> read_models(const ConfigReader& r, const json& j, const std::vector<long long>* sizes) {
  const std::string p = "/model";
  r.check_keys(j, p, {"kind", "sites", "field", "xy_coupling", "hopping", "onsite", "positive_field_sign"});
  if (!j.contains("kind")) r.fail(p, "missing key 'kind'");
  const ModelKind kind = r.enum_value(j["kind"], p + "/kind", [](const std::string& v) { return model_kind_from_string(v); });
  std::vector<long long> sites;
  if (sizes) {
    if (j.contains("sites")) r.fail(p + "/sites", "use the top-level 'sizes' list for this experiment");
    sites = *sizes;
  } else {
    if (!j.contains("sites")) r.fail(p, "missing key 'sites'");
    sites = r.integer_grid(j["sites"], p + "/sites", 2, 16);
  }
  auto grid = [&](const char* key, double def) {
    return j.contains(key) ? r.number_grid(j[key], p + "/" + key) : std::vector<double>{def};
  };
  const auto field = grid("field", 1.0);
  const auto xy = grid("xy_coupling", 1.0);
  const auto hopping = grid("hopping", 1.0);
  const auto onsite = grid("onsite", 4.0);
  const bool positive = j.contains("positive_field_sign") && r.boolean(j["positive_field_sign"], p + "/positive_field_sign");

  std::vector<ModelSpec> out;
  for (auto l : sites) {
    auto push = [&](ModelSpec m, const char* key) {
      m.kind = kind;
      m.sites = static_cast<int>(l);
      m.positive_field_sign = positive;
      try {
        m.validate();
      } catch (const std::invalid_argument& e) {
        r.fail(p + "/" + key, e.what());
      }
      out.push_back(m);
    };
    switch (kind) {
      case ModelKind::Ising:
        for (double g : field) { ModelSpec m; m.field = g; push(m, "field"); }
        break;
      case ModelKind::Heisenberg:
        for (double x : xy) { ModelSpec m; m.xy_coupling = x; push(m, "xy_coupling"); }
        break;
      case ModelKind::Hubbard:
        for (double t : hopping)
          for (double u : onsite) { ModelSpec m; m.hopping = t; m.onsite = u; push(m, "onsite"); }
        break;
    }
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::string& source) {
  json doc;
  const char* cursor = nullptr;
  LocatingSax sax(doc, text, &cursor);
  TrackingIterator first(text.data(), &cursor), last(text.data() + text.size(), &cursor);
  const bool ok = json::sax_parse(first, last, &sax);
  if (!ok) {
    throw ConfigError(source, sax.line_at(sax.error_pos == 0 ? 0 : sax.error_pos - 1), "",
                      sax.error.empty() ? "malformed JSON" : sax.error);
  }
  const ConfigReader r(source, sax.lines);
  r.check_keys(doc, "", {"kind", "model", "depths", "ansatz", "joint_mode", "optimizer", "sampling",
                         "jastrow", "gain", "lambda_scale", "shots", "sizes", "states_per_size",
                         "row_time_limit", "output", "json_mirror", "seed"});

  ExperimentConfig cfg;
  if (!doc.contains("kind")) r.fail("", "missing key 'kind'");
  cfg.kind = r.enum_value(doc["kind"], "/kind", [](const std::string& v) { return experiment_kind_from_string(v); });
  if (cfg.kind == ExperimentKind::Dispersion) cfg.shots = {320000};

  std::vector<long long> sizes;
  if (cfg.kind == ExperimentKind::Reconstruct) {
    if (!doc.contains("sizes")) r.fail("", "missing key 'sizes'");
    sizes = r.integer_grid(doc["sizes"], "/sizes", 2, 12);
    for (auto l : sizes) cfg.sizes.push_back(static_cast<int>(l));
  } else if (doc.contains("sizes")) {
    r.fail("/sizes", "only used by the reconstruct experiment");
  }
  if (!doc.contains("model")) r.fail("", "missing key 'model'");
  cfg.models = read_models(r, doc["model"], cfg.kind == ExperimentKind::Reconstruct ? &sizes : nullptr);

  if (doc.contains("depths")) {
    cfg.depths.clear();
    for (auto d : r.integer_grid(doc["depths"], "/depths", 0, 64)) cfg.depths.push_back(static_cast<int>(d));
  }
  if (doc.contains("ansatz")) {
    cfg.ansatz = r.enum_value(doc["ansatz"], "/ansatz", [](const std::string& v) { return ansatz_from_string(v); });
  }
  if (doc.contains("joint_mode")) {
    cfg.joint_mode = r.enum_value(doc["joint_mode"], "/joint_mode", [](const std::string& v) {
      if (v == "warm-start") return JointMode::WarmStart;
      if (v == "independent") return JointMode::Independent;
      throw std::invalid_argument("expected 'warm-start' or 'independent'");
    });
  }
  if (doc.contains("optimizer")) read_optimizer(r, doc["optimizer"], cfg.optimizer);
  if (doc.contains("sampling")) read_sampling(r, doc["sampling"], cfg.sampling);
  if (doc.contains("jastrow")) {
    const auto& j = doc["jastrow"];
    r.check_keys(j, "/jastrow", {"class_map"});
    if (j.contains("class_map")) {
      const auto v = r.string(j["class_map"], "/jastrow/class_map");
      if (v != "auto") {
        if (!std::filesystem::exists(v)) r.fail("/jastrow/class_map", "file '" + v + "' does not exist");
        cfg.class_map_file = v;
      }
    }
  }
  if (doc.contains("gain")) {
    const auto& j = doc["gain"];
    r.check_keys(j, "/gain", {"mode", "order"});
    if (j.contains("mode")) {
      cfg.gain_mode = r.enum_value(j["mode"], "/gain/mode", [](const std::string& v) {
        if (v == "exponential") return GainMode::Exponential;
        if (v == "implementation-b") return GainMode::ImplementationB;
        throw std::invalid_argument("expected 'exponential' or 'implementation-b'");
      });
    }
    if (j.contains("order")) cfg.truncation_order = static_cast<int>(r.integer(j["order"], "/gain/order", 0, kMaxTruncationOrder));
  }
  if (doc.contains("lambda_scale")) cfg.lambda_scale = r.number_grid(doc["lambda_scale"], "/lambda_scale");
  if (doc.contains("shots")) {
    cfg.shots.clear();
    const long long lo = cfg.kind == ExperimentKind::Reconstruct ? 0 : 1;
    for (auto s : r.integer_grid(doc["shots"], "/shots", lo, kMaxShots)) cfg.shots.push_back(static_cast<std::uint64_t>(s));
  }
  if (cfg.kind == ExperimentKind::Reconstruct && !doc.contains("shots")) cfg.shots = {0};
  if (doc.contains("states_per_size")) {
    cfg.states_per_size = static_cast<int>(r.integer(doc["states_per_size"], "/states_per_size", 1, 100000));
  }
  if (doc.contains("row_time_limit")) {
    cfg.row_time_limit = r.number(doc["row_time_limit"], "/row_time_limit");
    if (!(cfg.row_time_limit > 0.0)) r.fail("/row_time_limit", "must be positive");
  }
  if (doc.contains("output")) {
    cfg.output = r.string(doc["output"], "/output");
    const auto parent = std::filesystem::path(cfg.output).parent_path();
    if (cfg.output.empty()) r.fail("/output", "must not be empty");
    if (!parent.empty() && !std::filesystem::is_directory(parent)) {
      r.fail("/output", "directory '" + parent.string() + "' does not exist");
    }
  }
  if (doc.contains("json_mirror")) cfg.json_mirror = r.boolean(doc["json_mirror"], "/json_mirror");
  if (doc.contains("seed")) cfg.seed = static_cast<std::uint64_t>(r.integer(doc["seed"], "/seed", 0, INT64_MAX));

  const bool needs_depth = cfg.kind == ExperimentKind::Sweep || cfg.kind == ExperimentKind::Gain ||
                           cfg.kind == ExperimentKind::LambdaScan || cfg.kind == ExperimentKind::Dispersion;
  if (needs_depth && cfg.ansatz == Ansatz::RyCnot) {
    for (std::size_t i = 0; i < cfg.depths.size(); ++i) {
      if (cfg.depths[i] < 1) r.fail("/depths/" + std::to_string(i), "depth must be >= 1 for the ry-cnot ansatz");
    }
  }
  cfg.canonical = doc.dump();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text, path);
}

// ----------------------------------------------------------------------------
// Schema and formatting

const std::vector<std::string>& result_schema(ExperimentKind kind) {
  static const std::vector<std::string> optimize = {
      "kind", "model", "sites", "parameter", "depth", "mode", "restarts", "e_circuit", "e_jqc",
      "e_exact", "rel_circuit", "rel_jqc", "gain", "gain_capped", "lambda", "status", "wall_time"};
  static const std::vector<std::string> scan = {
      "kind", "model", "sites", "parameter", "depth", "scale", "shots", "repetitions", "e_jqc_exact",
      "e_sampled", "stderr", "dispersion", "e_circuit", "e_exact", "rel_sampled", "status", "wall_time"};
  static const std::vector<std::string> reconstruct = {
      "kind", "model", "sites", "parameter", "state", "shots", "e_direct", "e_reconstructed",
      "e_jastrow", "e_exact", "eps", "lambda", "status", "wall_time"};
  static const std::vector<std::string> none;
  switch (kind) {
    case ExperimentKind::Sweep:
    case ExperimentKind::Gain: return optimize;
    case ExperimentKind::LambdaScan:
    case ExperimentKind::Dispersion: return scan;
    case ExperimentKind::Reconstruct: return reconstruct;
    case ExperimentKind::DumpH: return none;
  }
  return none;
}

namespace {

std::string fmt_num(double v) {
  if (!std::isfinite(v)) throw std::domain_error("non-finite value in result row");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

std::string fmt_list(std::span<const double> v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += fmt_num(v[i]);
  }
  return out;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Task {
  ModelSpec model;
  int depth = 0;
  int state = 0;
};

std::vector<Task> make_tasks(const ExperimentConfig& cfg) {
  std::vector<Task> tasks;
  for (const auto& m : cfg.models) {
    if (cfg.kind == ExperimentKind::Reconstruct) {
      for (int s = 0; s < cfg.states_per_size; ++s) tasks.push_back({m, 0, s});
    } else {
      for (int d : cfg.depths) tasks.push_back({m, d, 0});
    }
  }
  return tasks;
}

std::optional<ClassMap> load_class_map(const ExperimentConfig& cfg, int num_qubits) {
  if (cfg.class_map_file.empty()) return std::nullopt;
  std::ifstream in(cfg.class_map_file);
  if (!in) throw std::runtime_error("cannot open class map '" + cfg.class_map_file + "'");
  return read_class_map(in, num_qubits);
}

std::vector<ResultRecord> run_optimize_task(const ExperimentConfig& cfg, const Task& t, std::uint64_t seed) {
  const auto t0 = Clock::now();
  VqeProblem problem(t.model, t.depth, load_class_map(cfg, t.model.num_qubits()), 0, cfg.ansatz);
  OptimizerConfig opt = cfg.optimizer;
  opt.seed = seed;
  opt.deadline = t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(cfg.row_time_limit));
  PairOptions po;
  po.joint_mode = cfg.joint_mode;
  std::string mode = "exponential";
  if (cfg.kind == ExperimentKind::Gain && cfg.gain_mode == GainMode::ImplementationB) {
    po.projector.truncated = true;
    po.projector.truncation.order = cfg.truncation_order;
    mode = "implementation-b:" + std::to_string(cfg.truncation_order);
  }
  const PairResult pr = optimize_pair(problem, opt, po);
  const GainRecord g = computational_gain(pr.e_circuit, pr.e_jqc, pr.e_exact);
  ResultRecord rec;
  rec.cells = {to_string(cfg.kind), to_string(t.model.kind), std::to_string(t.model.sites),
               fmt_num(t.model.control_parameter()), std::to_string(t.depth), mode,
               std::to_string(opt.restarts), fmt_num(pr.e_circuit), fmt_num(pr.e_jqc), fmt_num(pr.e_exact),
               fmt_num(relative_error(pr.e_circuit, pr.e_exact)), fmt_num(relative_error(pr.e_jqc, pr.e_exact)),
               fmt_num(g.gain), g.capped ? "1" : "0", fmt_list(pr.jqc.lambda), pr.timed_out ? "timeout" : "ok"};
  rec.wall_time = seconds_since(t0);
  return {rec};
}

std::vector<ResultRecord> run_scan_task(const ExperimentConfig& cfg, const Task& t, std::uint64_t seed) {
  const auto t0 = Clock::now();
  VqeProblem problem(t.model, t.depth, load_class_map(cfg, t.model.num_qubits()), 0, cfg.ansatz);
  OptimizerConfig opt = cfg.optimizer;
  opt.seed = seed;
  opt.deadline = t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(cfg.row_time_limit));
  PairOptions po;
  po.joint_mode = cfg.joint_mode;
  const PairResult pr = optimize_pair(problem, opt, po);
  const std::string status = pr.timed_out ? "timeout" : "ok";
  const double opt_time = seconds_since(t0);

  std::vector<ResultRecord> rows;
  std::uint64_t row = 0;
  for (double scale : cfg.lambda_scale) {
    std::vector<double> lambda = pr.jqc.lambda;
    for (auto& l : lambda) l *= scale;
    const JastrowParams jp(problem.class_map(), lambda);
    const double e_exact_path = problem.jqc_energy(pr.jqc.theta, lambda);
    for (std::uint64_t shots : cfg.shots) {
      const auto r0 = Clock::now();
      SamplingConfig sc = cfg.sampling;
      sc.shots = shots;
      sc.seed = derive_seed(seed, row++, 0x5ca1e);
      const SampledEnergy se = jqc_energy_sampled(problem.hamiltonian(), problem.circuit(), pr.jqc.theta, jp, sc);
      ResultRecord rec;
      rec.cells = {to_string(cfg.kind), to_string(t.model.kind), std::to_string(t.model.sites),
                   fmt_num(t.model.control_parameter()), std::to_string(t.depth), fmt_num(scale),
                   std::to_string(shots), std::to_string(sc.repetitions), fmt_num(e_exact_path),
                   fmt_num(se.mean), fmt_num(se.stderr_), fmt_num(se.dispersion()), fmt_num(pr.e_circuit),
                   fmt_num(pr.e_exact), fmt_num(relative_error(se.mean, pr.e_exact)), status};
      rec.wall_time = seconds_since(r0) + (rows.empty() ? opt_time : 0.0);
      rows.push_back(std::move(rec));
    }
  }
  return rows;
}

std::vector<ResultRecord> run_reconstruct_task(const ExperimentConfig& cfg, const Task& t, std::uint64_t seed) {
  const PauliSum h = build_model(t.model);
  const double e_exact = exact_ground_state(h).energy;
  const auto map = load_class_map(cfg, t.model.num_qubits()).value_or(default_class_map(t.model));
  const StateVector psi = random_real_state(t.model.num_qubits(), derive_seed(seed, 0, 0x57a7e));
  std::vector<ResultRecord> rows;
  std::uint64_t k = 0;
  for (std::uint64_t shots : cfg.shots) {
    const auto t0 = Clock::now();
    OptimizerConfig opt = cfg.optimizer;
    opt.restarts = 1;
    opt.deadline = t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(cfg.row_time_limit));
    const auto b = reconstruction_bench(psi, h, map, shots, derive_seed(seed, ++k, 0x5a3b), opt,
                                        cfg.sampling.weight_mode);
    ResultRecord rec;
    rec.cells = {to_string(cfg.kind), to_string(t.model.kind), std::to_string(t.model.sites),
                 fmt_num(t.model.control_parameter()), std::to_string(t.state), std::to_string(shots),
                 fmt_num(b.e_direct), fmt_num(b.e_reconstructed), fmt_num(b.e_jastrow), fmt_num(e_exact),
                 fmt_num(b.eps), fmt_list(b.lambda), b.timed_out ? "timeout" : "ok"};
    rec.wall_time = seconds_since(t0);
    rows.push_back(std::move(rec));
  }
  return rows;
}

}  // namespace

ResultTable run_experiment(ExperimentConfig cfg, const RunOptions& options) {
  if (options.seed) cfg.seed = *options.seed;
  if (options.weight_mode) cfg.sampling.weight_mode = *options.weight_mode;
  if (options.threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (cfg.kind == ExperimentKind::DumpH) throw std::invalid_argument("dump-h produces no result table");

  const auto tasks = make_tasks(cfg);
  std::vector<std::vector<ResultRecord>> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const std::uint64_t seed = cfg.seed ^ static_cast<std::uint64_t>(i);
      try {
        switch (cfg.kind) {
          case ExperimentKind::Sweep:
          case ExperimentKind::Gain: results[i] = run_optimize_task(cfg, tasks[i], seed); break;
          case ExperimentKind::LambdaScan:
          case ExperimentKind::Dispersion: results[i] = run_scan_task(cfg, tasks[i], seed); break;
          case ExperimentKind::Reconstruct: results[i] = run_reconstruct_task(cfg, tasks[i], seed); break;
          case ExperimentKind::DumpH: break;
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::min<int>(options.threads, static_cast<int>(std::max<std::size_t>(tasks.size(), 1)));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ResultTable table;
  table.kind = cfg.kind;
  for (auto& rs : results) {
    for (auto& r : rs) table.rows.push_back(std::move(r));
  }
  return table;
}

// ----------------------------------------------------------------------------
// Output

namespace {

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt_time(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_csv(std::ostream& os, const ExperimentConfig& cfg, const ResultTable& table) {
  const auto& schema = result_schema(table.kind);
  os << "# jqc " << kVersion << '\n';
  os << "# kind=" << to_string(table.kind) << " config_hash=" << hex64(fnv1a(cfg.canonical))
     << " seed=" << cfg.seed << '\n';
  for (std::size_t i = 0; i < schema.size(); ++i) os << (i ? "," : "") << schema[i];
  os << '\n';
  for (const auto& r : table.rows) {
    if (r.cells.size() + 1 != schema.size()) throw std::logic_error("result row does not match the schema");
    for (const auto& c : r.cells) os << c << ',';
    os << fmt_time(r.wall_time) << '\n';
  }
}

void write_json(std::ostream& os, const ExperimentConfig& cfg, const ResultTable& table) {
  const auto& schema = result_schema(table.kind);
  json doc;
  doc["version"] = std::string(kVersion);
  doc["kind"] = to_string(table.kind);
  doc["config_hash"] = hex64(fnv1a(cfg.canonical));
  doc["seed"] = cfg.seed;
  doc["columns"] = schema;
  json rows = json::array();
  for (const auto& r : table.rows) {
    json row = json::object();
    for (std::size_t i = 0; i < r.cells.size(); ++i) row[schema[i]] = r.cells[i];
    row["wall_time"] = r.wall_time;
    rows.push_back(std::move(row));
  }
  doc["rows"] = std::move(rows);
  os << doc.dump(1) << '\n';
}

ParsedCsv read_csv(std::istream& is) {
  ParsedCsv out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      out.provenance.push_back(line);
      continue;
    }
    auto cells = split_csv(line);
    if (out.header.empty()) {
      out.header = std::move(cells);
      continue;
    }
    if (cells.size() != out.header.size()) {
      throw std::runtime_error("csv row " + std::to_string(out.rows.size() + 1) + " has " +
                               std::to_string(cells.size()) + " fields, header has " +
                               std::to_string(out.header.size()));
    }
    out.rows.push_back(std::move(cells));
  }
  if (out.header.empty()) throw std::runtime_error("csv has no header");
  return out;
}

void dump_hamiltonians(std::ostream& os, const ExperimentConfig& cfg) {
  for (const auto& m : cfg.models) {
    if (cfg.models.size() > 1) {
      os << "# " << to_string(m.kind) << " sites=" << m.sites << " parameter=" << fmt_num(m.control_parameter())
         << '\n';
    }
    write_pauli_sum(os, build_model(m));
  }
}

// ----------------------------------------------------------------------------
// Random-state reconstruction

StateVector random_real_state(int num_qubits, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<cplx> amps(std::size_t{1} << num_qubits);
  for (auto& a : amps) a = normal(rng);
  StateVector psi(std::move(amps));
  psi.normalize();
  return psi;
}

namespace {

ProbDist maybe_sample(const StateVector& psi, std::uint64_t shots, std::uint64_t seed) {
  if (shots == 0) return ProbDist(psi.num_qubits(), psi.probabilities());
  return sample_counts(psi, shots, seed).normalized();
}

}  // namespace

ReconstructionBench reconstruction_bench(const StateVector& psi, const PauliSum& h,
                                         const ClassMap& map, std::uint64_t shots,
                                         std::uint64_t seed, const OptimizerConfig& opt,
                                         WeightMode mode) {
  const int l = psi.num_qubits();
  if (h.num_qubits() != l || map.num_qubits() != l) throw std::invalid_argument("reconstruction_bench: size mismatch");
  const std::size_t dim = psi.dimension();
  const Grouping grouping = group_by_basis(h);
  const std::size_t ng = grouping.groups.size();

  std::vector<cplx> wide(std::size_t{1} << (2 * l), cplx{0.0});
  for (std::size_t i = 0; i < dim; ++i) wide[i] = psi[i];
  const StateVector wide_psi(std::move(wide));

  std::vector<ProbDist> pbar(ng), p0(ng), p0_exact(ng);
  std::vector<LambdaMatrix> lambdas;
  for (std::size_t g = 0; g < ng; ++g) {
    const auto& basis = grouping.groups[g].basis;
    const StateVector ext = run_circuit(build_entangled_copy(Circuit(l), basis), {}, wide_psi);
    pbar[g] = maybe_sample(ext, shots, derive_seed(seed, g, 0));
    p0_exact[g] = direct_distribution(psi, basis);
    p0[g] = shots == 0 ? p0_exact[g]
                       : sample_counts(run_circuit(build_rotated(Circuit(l), basis), {}, psi), shots,
                                       derive_seed(seed, g, 1))
                             .normalized();
    lambdas.push_back(lambda_matrix(basis));
  }

  std::vector<SignVector> candidates{SignVector::ones(dim)};
  for (std::size_t g = 0; g < ng; ++g) {
    if (grouping.groups[g].basis.rotated_count() == 0) continue;
    candidates.push_back(solve_signs(pbar[g], p0[g], grouping.groups[g].basis).signs.snapped());
  }
  SignVector signs;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    double total = 0.0;
    for (std::size_t g = 0; g < ng; ++g) {
      if (grouping.groups[g].basis.rotated_count() == 0) continue;
      const double e = reconstruction_error(reconstruct_reduced(pbar[g], lambdas[g], c), p0[g]);
      total += e * e;
    }
    if (total < best) {
      best = total;
      signs = c;
    }
  }

  ReconstructionBench out;
  out.e_direct = expectation(h, psi);
  auto energy = [&](const std::vector<ProbDist>& weighted) {
    std::vector<ProbDist> reduced;
    for (std::size_t g = 0; g < ng; ++g) reduced.push_back(reconstruct_reduced(weighted[g], lambdas[g], signs));
    return energy_from_distributions(grouping, reduced);
  };
  for (std::size_t g = 0; g < ng; ++g) {
    out.eps = std::max(out.eps, reconstruction_error(reconstruct_reduced(pbar[g], lambdas[g], signs), p0_exact[g]));
  }
  out.e_reconstructed = energy(pbar);

  const JastrowParams base(map);
  const Objective f = [&](std::span<const double> lambda) {
    const JastrowParams jp = base.with_lambda({lambda.begin(), lambda.end()});
    std::vector<ProbDist> weighted;
    for (const auto& p : pbar) weighted.push_back(reweight(p, jp, mode));
    return energy(weighted);
  };
  const std::size_t nl = static_cast<std::size_t>(map.num_classes());
  Bounds bounds{std::vector<double>(nl, -kLambdaBound), std::vector<double>(nl, kLambdaBound)};
  const std::vector<double> x0(nl, 0.0);
  const MinimizeResult m = minimize(f, x0, opt, bounds);
  out.e_jastrow = m.f;
  out.lambda = m.x;
  out.timed_out = m.timed_out;
  return out;
}

}  // namespace jqc

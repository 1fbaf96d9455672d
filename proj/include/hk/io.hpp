#pragma once

// File formats and run configuration. Needs nlohmann/json on the include path.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "json.hpp"

#include "hk/clustering.hpp"
#include "hk/density.hpp"
#include "hk/dynamics.hpp"
#include "hk/experiments.hpp"
#include "hk/random.hpp"
#include "hk/stability.hpp"
#include "hk/state.hpp"

namespace hk {

using json = nlohmann::json;

/// Invalid configuration document; the message starts with the offending path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Numbers

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw IoError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

inline std::int64_t parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw IoError("not an integer: '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kTrajectoryHeader = "t,agent_index,opinion,weight";
inline constexpr std::string_view kSweepHeader = "L,n,cluster_index,position,weight,convergence_time";
inline constexpr std::string_view kClustersHeader = "cluster_index,position,weight,first_agent,last_agent";

/// Long format, one row per (snapshot, agent).
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << kTrajectoryHeader << '\n';
  for (const auto& s : traj.snapshots) {
    const std::string t = std::to_string(s.time());
    for (std::size_t i = 0; i < s.size(); ++i) {
      os << t << ',' << i << ',' << format_double(s.opinion(i)) << ',' << format_double(s.weight(i)) << '\n';
    }
  }
}

/// Inverse of write_trajectory_csv. Rows must be grouped by t with agents in order.
inline Trajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTrajectoryHeader) throw IoError("trajectory csv: bad header");
  Trajectory traj;
  std::vector<double> x;
  std::vector<double> w;
  std::int64_t t = 0;
  auto flush = [&] {
    if (!x.empty()) traj.snapshots.emplace_back(std::move(x), std::move(w), t);
    x.clear();
    w.clear();
  };
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 4) throw IoError("trajectory csv line " + std::to_string(lineno) + ": expected 4 fields");
    const std::int64_t row_t = parse_int(f[0]);
    const std::int64_t idx = parse_int(f[1]);
    if (row_t != t && !x.empty()) flush();
    t = row_t;
    if (idx != static_cast<std::int64_t>(x.size())) {
      throw IoError("trajectory csv line " + std::to_string(lineno) + ": agent index out of sequence");
    }
    x.push_back(parse_double(f[2]));
    w.push_back(parse_double(f[3]));
  }
  flush();
  return traj;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << kSweepHeader << '\n';
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.positions.size(); ++k) {
      os << format_double(r.L) << ',' << r.n << ',' << k << ',' << format_double(r.positions[k]) << ','
         << format_double(r.weights[k]) << ',' << r.convergence_time << '\n';
    }
  }
}

inline void write_clusters_csv(std::ostream& os, const std::vector<Cluster>& clusters) {
  os << kClustersHeader << '\n';
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const auto& c = clusters[k];
    os << k << ',' << format_double(c.position) << ',' << format_double(c.weight) << ',' << c.members.lo << ','
       << c.members.hi << '\n';
  }
}

/// Writes through a callback into `path`, creating parent directories.
template <class F>
void write_file(const std::filesystem::path& path, F&& fill) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  fill(os);
  os.flush();
  if (!os) throw IoError("write failed: " + path.string());
}

inline void write_json_file(const std::filesystem::path& path, const json& doc) {
  write_file(path, [&](std::ostream& os) { os << doc.dump(2) << '\n'; });
}

// ---------------------------------------------------------------------------
// Run configuration

struct DensityScenario {
  std::vector<DensityPiece> pieces;
  std::size_t n = 0;
  bool random = false;  // inverse-CDF draws instead of quantiles
  QuantileRule rule = QuantileRule::Midpoint;
};

struct SweepScenario {
  double L_min = 4.5;
  double L_max = 5.5;
  double L_step = 0.1;
  double agents_per_unit = 1000.0;
};

struct StabilityOptions {
  bool empirical = false;
  EmpiricalOptions empirical_options;
};

struct ContinuumOptions {
  double window = 0.5;
  double probe_delta = 1e-3;
  int probe_trials = 16;
};

struct OutputSpec {
  std::string trajectory = "trajectory.csv";  // empty disables
  std::string summary = "summary.json";
  std::string table = "table.csv";  // clusters, sweep rows or per-step checks
};

struct RunConfig {
  std::variant<std::monostate, PresetName, OpinionState, DensityScenario, SweepScenario> scenario;
  SimParams params;
  std::optional<std::uint64_t> seed;
  OutputSpec outputs;
  StabilityOptions stability;
  ContinuumOptions continuum;

  [[nodiscard]] bool needs_seed() const {
    const auto* d = std::get_if<DensityScenario>(&scenario);
    return (d != nullptr && d->random) ||
           (std::holds_alternative<PresetName>(scenario) && std::get<PresetName>(scenario) == PresetName::Fig5Conjecture);
  }
};

namespace detail {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  [[nodiscard]] std::string at(std::string_view key) const { return path_ + "." + std::string(key); }

  void require_object() const {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  void only_keys(std::initializer_list<std::string_view> allowed) const {
    require_object();
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool ok = false;
      for (auto a : allowed) ok = ok || it.key() == a;
      if (!ok) throw ConfigError(at(it.key()) + ": unknown key");
    }
  }

  [[nodiscard]] bool has(std::string_view key) const { return j_.contains(std::string(key)); }
  [[nodiscard]] const json& get(std::string_view key) const { return j_.at(std::string(key)); }

  [[nodiscard]] double number(std::string_view key) const {
    const json& v = get(key);
    if (!v.is_number()) throw ConfigError(at(key) + ": expected a number");
    return v.get<double>();
  }

  [[nodiscard]] std::int64_t integer(std::string_view key) const {
    const json& v = get(key);
    if (!v.is_number_integer()) throw ConfigError(at(key) + ": expected an integer");
    return v.get<std::int64_t>();
  }

  [[nodiscard]] bool boolean(std::string_view key) const {
    const json& v = get(key);
    if (!v.is_boolean()) throw ConfigError(at(key) + ": expected true or false");
    return v.get<bool>();
  }

  [[nodiscard]] std::string string(std::string_view key) const {
    const json& v = get(key);
    if (!v.is_string()) throw ConfigError(at(key) + ": expected a string");
    return v.get<std::string>();
  }

  [[nodiscard]] std::vector<double> numbers(std::string_view key) const {
    const json& v = get(key);
    if (!v.is_array()) throw ConfigError(at(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(at(key) + "[" + std::to_string(i) + "]: expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  [[nodiscard]] Reader child(std::string_view key) const { return Reader(get(key), at(key)); }

 private:
  const json& j_;
  std::string path_;
};

inline SimParams parse_params(const Reader& r) {
  r.only_keys({"fixed_point_tol", "max_steps", "record_every"});
  SimParams p;
  if (r.has("fixed_point_tol")) {
    p.fixed_point_tol = r.number("fixed_point_tol");
    if (!(p.fixed_point_tol >= 0.0)) throw ConfigError(r.at("fixed_point_tol") + ": must be >= 0");
  }
  if (r.has("max_steps")) {
    p.max_steps = r.integer("max_steps");
    if (p.max_steps < 1) throw ConfigError(r.at("max_steps") + ": must be >= 1");
  }
  if (r.has("record_every")) {
    p.record_every = r.integer("record_every");
    if (p.record_every < 1) throw ConfigError(r.at("record_every") + ": must be >= 1");
  }
  return p;
}

inline OpinionState parse_opinions(const Reader& root) {
  const auto x = root.numbers("opinions");
  if (x.empty()) throw ConfigError(root.at("opinions") + ": needs at least one agent");
  std::vector<double> w(x.size(), 1.0);
  if (root.has("weights")) {
    w = root.numbers("weights");
    if (w.size() != x.size()) throw ConfigError(root.at("weights") + ": length differs from opinions");
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!(w[i] > 0.0)) throw ConfigError(root.at("weights") + "[" + std::to_string(i) + "]: must be positive");
    }
  }
  return OpinionState::from_unsorted(x, w);
}

inline DensityScenario parse_density(const Reader& r) {
  r.only_keys({"pieces", "n", "sampling", "rule"});
  DensityScenario d;
  if (!r.has("pieces")) throw ConfigError(r.at("pieces") + ": required");
  const json& pieces = r.get("pieces");
  if (!pieces.is_array() || pieces.empty()) throw ConfigError(r.at("pieces") + ": expected a non-empty array");
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const Reader p(pieces[k], r.at("pieces") + "[" + std::to_string(k) + "]");
    p.only_keys({"a", "b", "density"});
    for (auto key : {"a", "b", "density"}) {
      if (!p.has(key)) throw ConfigError(p.at(key) + ": required");
    }
    d.pieces.push_back({p.number("a"), p.number("b"), p.number("density")});
  }
  try {
    DensitySpec check(d.pieces);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(r.at("pieces") + ": " + e.what());
  }
  if (!r.has("n")) throw ConfigError(r.at("n") + ": required");
  const std::int64_t n = r.integer("n");
  if (n < 1) throw ConfigError(r.at("n") + ": must be >= 1");
  d.n = static_cast<std::size_t>(n);
  if (r.has("sampling")) {
    const std::string s = r.string("sampling");
    if (s == "random") {
      d.random = true;
    } else if (s != "quantile") {
      throw ConfigError(r.at("sampling") + ": expected \"quantile\" or \"random\"");
    }
  }
  if (r.has("rule")) {
    const std::string s = r.string("rule");
    if (s == "right_endpoint") {
      d.rule = QuantileRule::RightEndpoint;
    } else if (s != "midpoint") {
      throw ConfigError(r.at("rule") + ": expected \"midpoint\" or \"right_endpoint\"");
    }
  }
  return d;
}

inline SweepScenario parse_sweep(const Reader& r) {
  r.only_keys({"L_min", "L_max", "L_step", "agents_per_unit"});
  SweepScenario s;
  if (r.has("L_min")) s.L_min = r.number("L_min");
  if (r.has("L_max")) s.L_max = r.number("L_max");
  if (r.has("L_step")) s.L_step = r.number("L_step");
  if (r.has("agents_per_unit")) s.agents_per_unit = r.number("agents_per_unit");
  if (!(s.L_min > 0.0)) throw ConfigError(r.at("L_min") + ": must be positive");
  if (!(s.L_max >= s.L_min)) throw ConfigError(r.at("L_max") + ": must be >= L_min");
  if (!(s.L_step > 0.0)) throw ConfigError(r.at("L_step") + ": must be positive");
  if (!(s.agents_per_unit > 0.0)) throw ConfigError(r.at("agents_per_unit") + ": must be positive");
  return s;
}

inline StabilityOptions parse_stability(const Reader& r) {
  r.only_keys({"empirical", "grid_step", "deltas", "stability_eps"});
  StabilityOptions s;
  if (r.has("empirical")) s.empirical = r.boolean("empirical");
  auto& o = s.empirical_options;
  if (r.has("grid_step")) o.grid_step = r.number("grid_step");
  if (r.has("deltas")) o.deltas = r.numbers("deltas");
  if (r.has("stability_eps")) o.stability_eps = r.number("stability_eps");
  if (!(o.grid_step > 0.0)) throw ConfigError(r.at("grid_step") + ": must be positive");
  if (o.deltas.empty()) throw ConfigError(r.at("deltas") + ": must not be empty");
  for (std::size_t k = 0; k < o.deltas.size(); ++k) {
    if (!(o.deltas[k] > 0.0) || (k > 0 && !(o.deltas[k] < o.deltas[k - 1]))) {
      throw ConfigError(r.at("deltas") + "[" + std::to_string(k) + "]: must be positive and strictly decreasing");
    }
  }
  if (!(o.stability_eps > 0.0)) throw ConfigError(r.at("stability_eps") + ": must be positive");
  return s;
}

inline ContinuumOptions parse_continuum(const Reader& r) {
  r.only_keys({"window", "probe_delta", "probe_trials"});
  ContinuumOptions c;
  if (r.has("window")) c.window = r.number("window");
  if (r.has("probe_delta")) c.probe_delta = r.number("probe_delta");
  if (r.has("probe_trials")) c.probe_trials = static_cast<int>(r.integer("probe_trials"));
  if (!(c.window > 0.0)) throw ConfigError(r.at("window") + ": must be positive");
  if (!(c.probe_delta >= 0.0)) throw ConfigError(r.at("probe_delta") + ": must be >= 0");
  if (c.probe_trials < 1) throw ConfigError(r.at("probe_trials") + ": must be >= 1");
  return c;
}

inline OutputSpec parse_outputs(const Reader& r) {
  r.only_keys({"trajectory", "summary", "table"});
  OutputSpec o;
  if (r.has("trajectory")) o.trajectory = r.string("trajectory");
  if (r.has("summary")) o.summary = r.string("summary");
  if (r.has("table")) o.table = r.string("table");
  return o;
}

}  // namespace detail

inline RunConfig config_from_json(const json& doc) {
  const detail::Reader root(doc, "$");
  root.only_keys({"preset", "opinions", "weights", "density", "sweep", "params", "seed", "outputs", "stability",
                  "continuum"});
  RunConfig cfg;

  int sources = 0;
  for (auto key : {"preset", "opinions", "density", "sweep"}) sources += root.has(key) ? 1 : 0;
  if (sources != 1) {
    throw ConfigError("$: exactly one of \"preset\", \"opinions\", \"density\", \"sweep\" is required");
  }
  if (root.has("weights") && !root.has("opinions")) throw ConfigError(root.at("weights") + ": needs \"opinions\"");

  if (root.has("preset")) {
    const auto p = parse_preset(root.string("preset"));
    if (!p) throw ConfigError(root.at("preset") + ": unknown preset");
    cfg.scenario = *p;
  } else if (root.has("opinions")) {
    try {
      cfg.scenario = detail::parse_opinions(root);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(root.at("opinions") + ": " + e.what());
    }
  } else if (root.has("density")) {
    cfg.scenario = detail::parse_density(root.child("density"));
  } else {
    cfg.scenario = detail::parse_sweep(root.child("sweep"));
  }

  if (root.has("params")) cfg.params = detail::parse_params(root.child("params"));
  if (root.has("seed")) {
    const json& s = root.get("seed");
    if (!s.is_number_unsigned()) throw ConfigError(root.at("seed") + ": expected a nonnegative integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  if (root.has("outputs")) cfg.outputs = detail::parse_outputs(root.child("outputs"));
  if (root.has("stability")) cfg.stability = detail::parse_stability(root.child("stability"));
  if (root.has("continuum")) cfg.continuum = detail::parse_continuum(root.child("continuum"));
  return cfg;
}

/// Parses a JSON config document. Seed presence is checked by the caller,
/// since a command-line seed may still be supplied.
inline RunConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("$: malformed JSON: ") + e.what());
  }
  return config_from_json(doc);
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

/// Initial state of an explicit or density scenario.
inline OpinionState initial_state(const RunConfig& cfg) {
  if (const auto* s = std::get_if<OpinionState>(&cfg.scenario)) return *s;
  if (const auto* d = std::get_if<DensityScenario>(&cfg.scenario)) {
    const DensitySpec spec(d->pieces);
    if (!d->random) return discretize(spec, d->n, d->rule);
    if (!cfg.seed) throw ConfigError("$.seed: required when density.sampling is \"random\"");
    SeededGenerator gen(*cfg.seed);
    return sample(spec, d->n, gen, 1.0 / static_cast<double>(d->n));
  }
  throw ConfigError("$: scenario needs \"opinions\" or \"density\"");
}

// ---------------------------------------------------------------------------
// Summaries

inline json to_json(const Cluster& c) {
  return {{"position", c.position}, {"weight", c.weight}, {"first_agent", c.members.lo}, {"last_agent", c.members.hi}};
}

inline json to_json(const std::vector<Cluster>& cs) {
  json a = json::array();
  for (const auto& c : cs) a.push_back(to_json(c));
  return a;
}

inline json to_json(const StabilityVerdict& v) {
  json viol = json::array();
  for (const auto& p : v.violations) {
    viol.push_back({{"a", p.a}, {"b", p.b}, {"distance", p.distance}, {"bound", p.bound}});
  }
  json bnd = json::array();
  for (const auto& p : v.boundary_pairs) {
    bnd.push_back({{"a", p.a}, {"b", p.b}, {"distance", p.distance}, {"bound", p.bound}});
  }
  return {{"status", to_string(v.status)}, {"violations", viol}, {"boundary_pairs", bnd}};
}

inline json to_json(const EquilibriumSummary& s) {
  return {{"clusters", to_json(s.clusters)},
          {"stability", to_json(s.verdict)},
          {"converged", s.converged},
          {"convergence_time", s.convergence_time},
          {"steps", s.steps}};
}

inline json to_json(const SimParams& p) {
  return {{"fixed_point_tol", p.fixed_point_tol}, {"max_steps", p.max_steps}, {"record_every", p.record_every}};
}

/// Copy of the trajectory keeping snapshots at multiples of `every` steps
/// after the first one, plus the last.
inline Trajectory thin(const Trajectory& traj, std::int64_t every) {
  if (every < 1) throw std::invalid_argument("every must be >= 1");
  Trajectory out;
  out.fixed_point_tol = traj.fixed_point_tol;
  out.step_stats = traj.step_stats;
  if (traj.snapshots.empty()) return out;
  const std::int64_t t0 = traj.snapshots.front().time();
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const auto& s = traj.snapshots[k];
    if ((s.time() - t0) % every == 0 || k + 1 == traj.snapshots.size()) out.snapshots.push_back(s);
  }
  return out;
}

}  // namespace hk

// Command-line driver: simulate, sweep, stability, continuum, preset <name>.
// Exit status: 0 success, 1 configuration error, 2 runtime failure.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "hk/clustering.hpp"
#include "hk/continuum.hpp"
#include "hk/dynamics.hpp"
#include "hk/experiments.hpp"
#include "hk/io.hpp"
#include "hk/stability.hpp"

namespace fs = std::filesystem;
using namespace hk;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::optional<std::int64_t> max_steps;
  std::optional<double> tol;
};

RunConfig load(const Globals& g, RunConfig fallback = {}) {
  RunConfig cfg = g.config.empty() ? std::move(fallback) : load_config(g.config);
  if (g.seed) cfg.seed = g.seed;
  if (g.max_steps) {
    if (*g.max_steps < 1) throw ConfigError("--max-steps: must be >= 1");
    cfg.params.max_steps = *g.max_steps;
  }
  if (g.tol) {
    if (!(*g.tol >= 0.0)) throw ConfigError("--tol: must be >= 0");
    cfg.params.fixed_point_tol = *g.tol;
  }
  if (cfg.needs_seed() && !cfg.seed) throw ConfigError("$.seed: required by this scenario (or pass --seed)");
  return cfg;
}

fs::path out(const Globals& g, const std::string& name) { return fs::path(g.out_dir) / name; }

json header(const char* command, const RunConfig& cfg) {
  json j{{"command", command}, {"params", to_json(cfg.params)}};
  if (cfg.seed) {
    j["seed"] = *cfg.seed;
    j["generator"] = SeededGenerator::kAlgorithm;
  }
  return j;
}

void write_trajectory(const Globals& g, const RunConfig& cfg, const Trajectory& traj) {
  if (cfg.outputs.trajectory.empty()) return;
  write_file(out(g, cfg.outputs.trajectory), [&](std::ostream& os) { write_trajectory_csv(os, traj); });
}

void write_summary(const Globals& g, const RunConfig& cfg, const json& doc) {
  if (!cfg.outputs.summary.empty()) write_json_file(out(g, cfg.outputs.summary), doc);
}

void write_table(const Globals& g, const RunConfig& cfg, const std::function<void(std::ostream&)>& fill) {
  if (!cfg.outputs.table.empty()) write_file(out(g, cfg.outputs.table), fill);
}

int run_simulate(const Globals& g) {
  const RunConfig cfg = load(g);
  const OpinionState x0 = initial_state(cfg);
  const SimRun run = simulate(x0, cfg.params);
  const EquilibriumSummary s = summarize_run(run);
  write_trajectory(g, cfg, run.trajectory);
  write_table(g, cfg, [&](std::ostream& os) { write_clusters_csv(os, s.clusters); });
  json doc = header("simulate", cfg);
  doc["n"] = x0.size();
  doc["result"] = to_json(s);
  write_summary(g, cfg, doc);
  std::cout << "n=" << x0.size() << " clusters=" << s.clusters.size() << " converged=" << s.converged
            << " t=" << s.convergence_time << " " << to_string(s.verdict.status) << "\n";
  return 0;
}

int run_sweep(const Globals& g) {
  RunConfig fallback;
  fallback.scenario = SweepScenario{};
  const RunConfig cfg = load(g, fallback);
  const auto* sw = std::get_if<SweepScenario>(&cfg.scenario);
  if (sw == nullptr) throw ConfigError("$.sweep: the sweep command needs a \"sweep\" block");
  const auto rows = bifurcation_sweep(sw->L_min, sw->L_max, sw->L_step, sw->agents_per_unit, cfg.params);
  write_table(g, cfg, [&](std::ostream& os) { write_sweep_csv(os, rows); });
  json doc = header("sweep", cfg);
  doc["sweep"] = {{"L_min", sw->L_min}, {"L_max", sw->L_max}, {"L_step", sw->L_step},
                  {"agents_per_unit", sw->agents_per_unit}};
  json counts = json::array();
  for (const auto& r : rows) counts.push_back({{"L", r.L}, {"clusters", r.positions.size()}});
  doc["cluster_counts"] = counts;
  const auto first = first_multi_cluster_L(rows);
  doc["first_multi_cluster_L"] = first ? json(*first) : json(nullptr);
  write_summary(g, cfg, doc);
  std::cout << "rows=" << rows.size() << " first_multi_cluster_L=" << (first ? format_double(*first) : "none")
            << "\n";
  return 0;
}

int run_stability(const Globals& g) {
  const RunConfig cfg = load(g);
  const SimRun run = simulate(initial_state(cfg), cfg.params);
  if (!run.result.converged) throw std::runtime_error("run did not reach a fixed point within max_steps");
  const Equilibrium eq = certify_equilibrium(run.result, cfg.params.fixed_point_tol);
  json doc = header("stability", cfg);
  doc["clusters"] = to_json(eq.clusters);
  doc["analytic"] = to_json(classify(eq));
  if (cfg.stability.empirical) {
    const auto emp = empirical_stability(eq, cfg.stability.empirical_options, cfg.params);
    doc["empirical"] = {{"verdict", to_string(emp.verdict)}};
    write_table(g, cfg, [&](std::ostream& os) {
      os << "delta,sup_displacement,argsup_position,all_converged\n";
      for (const auto& r : emp.table) {
        os << format_double(r.delta) << ',' << format_double(r.sup_displacement) << ','
           << format_double(r.argsup_position) << ',' << (r.all_converged ? 1 : 0) << '\n';
      }
    });
  } else {
    write_table(g, cfg, [&](std::ostream& os) { write_clusters_csv(os, eq.clusters); });
  }
  write_summary(g, cfg, doc);
  std::cout << "clusters=" << eq.clusters.size() << " analytic=" << doc["analytic"]["status"].get<std::string>();
  if (doc.contains("empirical")) std::cout << " empirical=" << doc["empirical"]["verdict"].get<std::string>();
  std::cout << "\n";
  return 0;
}

int run_continuum(const Globals& g) {
  const RunConfig cfg = load(g);
  const OpinionState x0 = initial_state(cfg);
  const auto& opt = cfg.continuum;
  json doc = header("continuum", cfg);
  doc["n"] = x0.size();
  if (x0.span_width() >= opt.window) {
    const auto reg = regularity_bounds(x0, opt.window);
    doc["regularity"] = {{"window", reg.window}, {"m_hat", reg.m_hat}, {"M_hat", reg.M_hat}, {"regular", reg.regular()}};
    if (reg.regular()) {
      const auto probe = continuity_probe(x0, opt.probe_delta, opt.probe_trials, cfg.seed.value_or(0), opt.window);
      doc["continuity"] = {{"delta", opt.probe_delta},
                           {"probe_seed", cfg.seed.value_or(0)},
                           {"max_response", probe.max_response},
                           {"bound", probe.bound}};
    }
  }

  std::ostringstream table;
  table << "t,potential,dV,bound,holds,identity_error,epsilon_star\n";
  OpinionState cur = x0;
  bool all_hold = true;
  double worst_identity = 0.0;
  std::int64_t steps = 0;
  for (; steps < cfg.params.max_steps; ++steps) {
    const auto ly = lyapunov_decrement(cur);
    const auto res = laplacian_residual(cur);
    const auto mu = distance_to_F(cur);
    all_hold = all_hold && ly.holds;
    worst_identity = std::max(worst_identity, res.identity_error);
    table << cur.time() << ',' << format_double(ly.potential_before) << ',' << format_double(ly.dV) << ','
          << format_double(ly.bound) << ',' << (ly.holds ? 1 : 0) << ',' << format_double(res.identity_error) << ','
          << format_double(mu.epsilon_star) << '\n';
    OpinionState next = step(cur);
    const bool fixed = max_abs_change(cur.opinions(), next.opinions()) <= cfg.params.fixed_point_tol &&
                       is_fixed_point(cur, cfg.params.fixed_point_tol);
    if (fixed) break;
    cur = std::move(next);
  }
  write_table(g, cfg, [&](std::ostream& os) { os << table.str(); });
  doc["steps"] = steps;
  doc["lyapunov_all_hold"] = all_hold;
  doc["max_identity_error"] = worst_identity;
  doc["final_epsilon_star"] = distance_to_F(cur).epsilon_star;
  write_summary(g, cfg, doc);
  std::cout << "steps=" << steps << " lyapunov_all_hold=" << all_hold << "\n";
  return 0;
}

int run_preset(const Globals& g, const std::string& name_arg) {
  RunConfig fallback;
  std::optional<PresetName> name;
  if (!name_arg.empty()) {
    name = parse_preset(name_arg);
    if (!name) throw ConfigError("preset: unknown name '" + name_arg + "'");
    fallback.scenario = *name;
  }
  RunConfig cfg = g.config.empty() ? fallback : load_config(g.config);
  if (name) cfg.scenario = *name;
  const auto* p = std::get_if<PresetName>(&cfg.scenario);
  if (p == nullptr) throw ConfigError("$.preset: no preset named on the command line or in the config");
  if (*p == PresetName::Fig5Conjecture && !cfg.seed && !g.seed) cfg.seed = 1;
  {
    Globals gg = g;
    gg.config.clear();
    cfg = load(gg, cfg);
  }

  json doc = header("preset", cfg);
  doc["preset"] = std::string(preset_name(*p));
  switch (*p) {
    case PresetName::Fig4StableLt2: {
      const SimRun run = simulate(fig4_initial_state(), cfg.params);
      const auto s = summarize_run(run);
      write_trajectory(g, cfg, run.trajectory);
      write_table(g, cfg, [&](std::ostream& os) { write_clusters_csv(os, s.clusters); });
      doc["result"] = to_json(s);
      if (s.clusters.size() == 2) doc["distance"] = s.clusters[1].position - s.clusters[0].position;
      std::cout << "clusters=" << s.clusters.size() << " " << to_string(s.verdict.status) << "\n";
      break;
    }
    case PresetName::Fig5Conjecture: {
      const auto st = conjecture_study({501, 5001}, *cfg.seed, 20, cfg.params);
      write_table(g, cfg, [&](std::ostream& os) {
        os << "n,seed,status,clusters,convergence_time\n";
        for (const auto& o : st.outcomes) {
          os << o.n << ',' << o.seed << ',' << to_string(o.summary.verdict.status) << ','
             << o.summary.clusters.size() << ',' << o.summary.convergence_time << '\n';
        }
      });
      doc["density_ratio"] = kConjectureDensityRatio;
      doc["ns"] = st.ns;
      doc["stable_fraction"] = st.stable_fraction;
      doc["flipped_seeds"] = st.flipped_seeds;
      std::cout << "stable_fraction=" << st.stable_fraction.front() << "->" << st.stable_fraction.back()
                << " flipped=" << st.flipped_seeds.size() << "\n";
      break;
    }
    case PresetName::Metastable: {
      const auto rep = metastable_run(5.0, 1000.0, cfg.params);
      write_trajectory(g, cfg, thin(rep.trajectory, cfg.params.record_every));
      json phases = json::array();
      for (const auto& ph : rep.phases) {
        phases.push_back({{"start", ph.start},
                          {"end", ph.end},
                          {"gap_at_start", ph.gap_at_start},
                          {"gap_at_end", ph.gap_at_end},
                          {"ends_in_merge", ph.ends_in_merge}});
      }
      write_table(g, cfg, [&](std::ostream& os) { write_clusters_csv(os, rep.summary.clusters); });
      doc["L"] = rep.L;
      doc["n"] = rep.n;
      doc["result"] = to_json(rep.summary);
      doc["phases"] = phases;
      std::cout << "phases=" << rep.phases.size() << " clusters=" << rep.summary.clusters.size() << "\n";
      break;
    }
    case PresetName::SlowConvergence: {
      const auto rows = slow_convergence_study({5, 51, 501}, cfg.params);
      json arr = json::array();
      for (const auto& r : rows) {
        arr.push_back({{"n", r.n}, {"convergence_time", r.convergence_time}, {"clusters", to_json(r.clusters)}});
      }
      write_table(g, cfg, [&](std::ostream& os) {
        os << "n,convergence_time,clusters\n";
        for (const auto& r : rows) os << r.n << ',' << r.convergence_time << ',' << r.clusters.size() << '\n';
      });
      doc["rows"] = arr;
      for (const auto& r : rows) std::cout << "n=" << r.n << " t=" << r.convergence_time << "\n";
      break;
    }
  }
  write_summary(g, cfg, doc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bounded-confidence opinion dynamics"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--seed", g.seed, "Seed for random scenarios");
  app.add_option("--out-dir", g.out_dir, "Directory for output files");
  app.add_option("--max-steps", g.max_steps, "Step limit");
  app.add_option("--tol", g.tol, "Fixed-point tolerance");

  auto* sim = app.add_subcommand("simulate", "Run one scenario to a fixed point");
  auto* sweep = app.add_subcommand("sweep", "Cluster positions versus interval length");
  auto* stab = app.add_subcommand("stability", "Classify the equilibrium reached by a scenario");
  auto* cont = app.add_subcommand("continuum", "Operator and potential checks along a run");
  auto* pre = app.add_subcommand("preset", "Run a named scenario");
  std::string preset_arg;
  pre->add_option("name", preset_arg, "fig4_stable_lt2 | fig5_conjecture | metastable | slow_convergence");
  for (auto* s : {sim, sweep, stab, cont, pre}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*sim) return run_simulate(g);
    if (*sweep) return run_sweep(g);
    if (*stab) return run_stability(g);
    if (*cont) return run_continuum(g);
    return run_preset(g, preset_arg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

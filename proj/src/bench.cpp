#include "tdgame/bench.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <future>
#include <numeric>
#include <sstream>

namespace tdgame {

using nlohmann::json;

void ExperimentPlan::validate() const {
  scenario.validate();
  if (methods.empty()) throw DomainError("methods: must not be empty");
  if (algorithms.empty()) throw DomainError("algorithms: must not be empty");
  if (k_values.empty()) throw DomainError("k_values: must not be empty");
  for (int k : k_values) {
    if (k < 1) throw DomainError("k_values: every K must be >= 1");
  }
  if (repetitions < 1) throw DomainError("repetitions: must be >= 1");
  if (workers < 1) throw DomainError("workers: must be >= 1");
}

ExperimentPlan plan_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw DomainError("plan: expected an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "scenario" && key != "methods" && key != "algorithms" && key != "k_values" &&
        key != "repetitions" && key != "workers" && key != "output_dir" && key != "overrides") {
      throw DomainError(key + ": unknown field");
    }
  }
  ExperimentPlan plan;
  if (!j.contains("scenario")) throw DomainError("scenario: missing");
  json scenario_doc;
  const json& s = j.at("scenario");
  if (s.is_string()) {
    const std::filesystem::path p = base_dir / s.get<std::string>();
    std::ifstream in(p);
    if (!in) throw DomainError("scenario: cannot open " + p.string());
    try {
      scenario_doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw DomainError("scenario: " + p.string() + ": " + e.what());
    }
  } else if (s.is_object()) {
    scenario_doc = s;
  } else {
    throw DomainError("scenario: expected a path or an object");
  }
  // Overrides are applied on top of the fully populated document.
  json effective = to_json(scenario_from_json(scenario_doc));
  if (j.contains("overrides")) {
    for (const auto& o : j.at("overrides")) apply_override(effective, o.get<std::string>());
  }
  plan.scenario = scenario_from_json(effective);

  try {
    for (const auto& m : j.value("methods", json::array())) plan.methods.push_back(parse_method(m.get<std::string>()));
    for (const auto& a : j.value("algorithms", json::array())) {
      plan.algorithms.push_back(parse_algorithm(a.get<std::string>()));
    }
    plan.k_values = j.value("k_values", std::vector<int>{});
    plan.repetitions = j.value("repetitions", 1);
    plan.workers = j.value("workers", 1);
    plan.output_dir = j.value("output_dir", std::string("results"));
  } catch (const json::exception& e) {
    throw DomainError(std::string("plan: ") + e.what());
  }
  return plan;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open plan file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DomainError(path.string() + ": parse error: " + e.what());
  }
  return plan_from_json(j, path.parent_path());
}

CellResult run_cell(const ScenarioConfig& scenario, Algorithm algorithm, Method method, int k,
                    int repetitions, const Profile& initial) {
  CellResult cell;
  cell.algorithm = algorithm;
  cell.method = method;
  cell.k = k;
  ScenarioConfig cfg = scenario;
  cfg.solver.algorithm = algorithm;
  cfg.solver.method = method;
  cfg.solver.k_iters = k;
  const Initializer init = [&](const std::vector<State>&) { return initial; };

  try {
    std::vector<std::vector<double>> times;
    for (int rep = 0; rep < repetitions; ++rep) {
      ClosedLoopRecord r = run_closed_loop(cfg, cfg.solver, init);
      times.push_back(r.wall_times);
      if (rep == 0) cell.record = std::move(r);
    }
    const std::size_t n_instants = cell.record.wall_times.size();
    for (std::size_t t = 0; t < n_instants; ++t) {
      std::vector<double> samples;
      for (const auto& rep : times) samples.push_back(rep[t]);
      cell.median_solver_times.push_back(summarize_times(samples).median);
    }

    const CostModel<double> model(cfg);
    for (std::size_t t = 0; t < n_instants; ++t) {
      const auto start = std::chrono::steady_clock::now();
      OracleResult o = oracle_solve(model, cell.record.states[t], cfg, algorithm, cfg.oracle,
                                    cell.record.warmstarts[t]);
      const auto stop = std::chrono::steady_clock::now();
      cell.oracle_times.push_back(std::chrono::duration<double>(stop - start).count());
      cell.oracle_profiles.push_back(std::move(o.profile));
    }
    cell.report = build_error_report(cell.record, cell.oracle_profiles, cfg);
    cell.report.solver_time = summarize_times(cell.median_solver_times);
    cell.report.oracle_time = summarize_times(cell.oracle_times);
    cell.ok = true;
  } catch (const ClosedLoopError& e) {
    cell.record = e.partial();
    cell.error = e.what();
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  return cell;
}

ExperimentResult run_experiment(const ExperimentPlan& plan) {
  plan.validate();
  ExperimentResult result;

  struct Job {
    Algorithm algorithm;
    Method method;
    int k;
  };
  std::vector<Job> jobs;
  std::vector<std::pair<Algorithm, Profile>> initials;
  std::vector<std::string> init_errors;
  for (Algorithm a : plan.algorithms) {
    try {
      initials.emplace_back(a, oracle_solve(plan.scenario.initial_states, plan.scenario, a,
                                            plan.scenario.oracle)
                                   .profile);
    } catch (const std::exception& e) {
      CellResult failed;
      failed.algorithm = a;
      failed.error = std::string("t = 0 oracle: ") + e.what();
      result.cells.push_back(std::move(failed));
      result.all_ok = false;
      continue;
    }
    for (Method m : plan.methods) {
      for (int k : plan.k_values) jobs.push_back({a, m, k});
    }
  }
  auto initial_for = [&](Algorithm a) -> const Profile& {
    for (const auto& [alg, p] : initials) {
      if (alg == a) return p;
    }
    throw std::logic_error("missing initial profile");
  };

  std::vector<CellResult> cells(jobs.size());
  const auto workers = static_cast<std::size_t>(plan.workers);
  for (std::size_t begin = 0; begin < jobs.size(); begin += workers) {
    std::vector<std::future<CellResult>> batch;
    for (std::size_t j = begin; j < std::min(jobs.size(), begin + workers); ++j) {
      const Job job = jobs[j];
      batch.push_back(std::async(workers == 1 ? std::launch::deferred : std::launch::async, [&, job] {
        return run_cell(plan.scenario, job.algorithm, job.method, job.k, plan.repetitions,
                        initial_for(job.algorithm));
      }));
    }
    for (std::size_t j = 0; j < batch.size(); ++j) cells[begin + j] = batch[j].get();
  }
  for (auto& c : cells) {
    result.all_ok = result.all_ok && c.ok;
    result.cells.push_back(std::move(c));
  }
  return result;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string error_csv_name(Algorithm a, Method m, int k) {
  return "errors_" + to_string(a) + "_" + to_string(m) + "_K" + std::to_string(k) + ".csv";
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

json timing_json(const TimingSummary& t) {
  return {{"median_seconds", t.median}, {"mean_seconds", t.mean}, {"total_seconds", t.total}};
}

}  // namespace

void write_error_csv(const std::filesystem::path& path, const CellResult& cell) {
  std::ofstream out = open_out(path);
  out << "t,error,min_pairwise_distance,solver_seconds,oracle_seconds\n";
  for (std::size_t t = 1; t < cell.oracle_profiles.size(); ++t) {
    out << t << ',' << format_number(cell.report.per_instant[t - 1]) << ','
        << format_number(min_pairwise_distance(cell.record.states[t])) << ','
        << format_number(cell.median_solver_times[t]) << ',' << format_number(cell.oracle_times[t])
        << '\n';
  }
}

json summary_json(const ExperimentPlan& plan, const ExperimentResult& result) {
  json cells = json::array();
  for (const CellResult& c : result.cells) {
    json entry = {{"algorithm", to_string(c.algorithm)},
                  {"method", to_string(c.method)},
                  {"K", c.k},
                  {"status", c.ok ? "ok" : "failed"}};
    if (c.ok) {
      entry["errors_csv"] = error_csv_name(c.algorithm, c.method, c.k);
      entry["mean_error"] = c.report.mean_error;
      entry["max_error"] = c.report.max_error;
      entry["instants"] = c.report.per_instant.size();
      entry["solver_time"] = timing_json(c.report.solver_time);
      entry["oracle_time"] = timing_json(c.report.oracle_time);
    } else {
      entry["error"] = c.error;
    }
    cells.push_back(entry);
  }
  return {{"scenario", to_json(plan.scenario)},
          {"repetitions", plan.repetitions},
          {"all_ok", result.all_ok},
          {"cells", cells}};
}

void write_experiment_outputs(const ExperimentPlan& plan, const ExperimentResult& result) {
  std::filesystem::create_directories(plan.output_dir);
  for (const CellResult& c : result.cells) {
    if (c.ok) write_error_csv(plan.output_dir / error_csv_name(c.algorithm, c.method, c.k), c);
  }
  open_out(plan.output_dir / "summary.json") << summary_json(plan, result).dump(2) << '\n';
  open_out(plan.output_dir / "effective_config.json") << to_json(plan.scenario).dump(2) << '\n';

  std::ofstream by_k = open_out(plan.output_dir / "error_vs_K.csv");
  by_k << "algorithm,method,K,mean_error,max_error\n";
  std::ofstream timing = open_out(plan.output_dir / "timing_comparison.csv");
  timing << "algorithm,solver,K,median_seconds,mean_seconds,total_seconds\n";
  for (const CellResult& c : result.cells) {
    if (!c.ok) continue;
    by_k << to_string(c.algorithm) << ',' << to_string(c.method) << ',' << c.k << ','
         << format_number(c.report.mean_error) << ',' << format_number(c.report.max_error) << '\n';
    const auto row = [&](const std::string& solver, const TimingSummary& t) {
      timing << to_string(c.algorithm) << ',' << solver << ',' << c.k << ',' << format_number(t.median)
             << ',' << format_number(t.mean) << ',' << format_number(t.total) << '\n';
    };
    row(to_string(c.method), c.report.solver_time);
    row("oracle", c.report.oracle_time);
  }
}

void write_simulation_outputs(const std::filesystem::path& dir, const ScenarioConfig& cfg,
                              const ClosedLoopRecord& record) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out = open_out(dir / "trajectory.csv");
    out << "t,vehicle,rx,ry,vx,vy,ux,uy\n";
    for (std::size_t t = 0; t < record.states.size(); ++t) {
      for (std::size_t i = 0; i < record.states[t].size(); ++i) {
        const State& x = record.states[t][i];
        out << t << ',' << i << ',' << format_number(x(0)) << ',' << format_number(x(1)) << ','
            << format_number(x(2)) << ',' << format_number(x(3)) << ',';
        if (t < record.applied_inputs.size()) {
          const Input& u = record.applied_inputs[t][i];
          out << format_number(u(0)) << ',' << format_number(u(1));
        } else {
          out << ',';
        }
        out << '\n';
      }
    }
  }
  {
    std::ofstream out = open_out(dir / "timing.csv");
    out << "t,solver_seconds,iterations,jacobian_rebuilds,inner_solves\n";
    for (std::size_t t = 0; t < record.wall_times.size(); ++t) {
      const IterationTrace& tr = record.traces[t];
      out << t << ',' << format_number(record.wall_times[t]) << ',' << tr.iterations << ','
          << tr.jacobian_rebuilds << ',' << tr.inner_solves << '\n';
    }
  }
  {
    json instants = json::array();
    for (std::size_t t = 0; t < record.profiles.size(); ++t) {
      const IterationTrace& tr = record.traces[t];
      const VectorXd& w = record.warmstarts[t].flat();
      const VectorXd& p = record.profiles[t].flat();
      instants.push_back({{"t", t},
                          {"warmstart", std::vector<double>(w.data(), w.data() + w.size())},
                          {"profile", std::vector<double>(p.data(), p.data() + p.size())},
                          {"step_norms", tr.step_norms},
                          {"grad_norms", tr.grad_norms},
                          {"iterations", tr.iterations},
                          {"jacobian_rebuilds", tr.jacobian_rebuilds},
                          {"inner_solves", tr.inner_solves}});
    }
    open_out(dir / "profile_trace.json")
        << json{{"n_vehicles", cfg.n_vehicles}, {"horizon_T", cfg.horizon_T}, {"instants", instants}}
               .dump(1)
        << '\n';
  }
  open_out(dir / "effective_config.json") << to_json(cfg).dump(2) << '\n';
}

std::vector<double> read_error_column(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string t, e;
    std::getline(row, t, ',');
    std::getline(row, e, ',');
    out.push_back(std::stod(e));
  }
  return out;
}

}  // namespace tdgame

#include "tdgame/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace tdgame {

using nlohmann::json;

std::string to_string(Method m) {
  return m == Method::newton ? "newton" : "newton_kantorovich";
}

std::string to_string(Algorithm a) {
  return a == Algorithm::potential ? "potential" : "best_response";
}

std::string to_string(SweepOrder o) {
  return o == SweepOrder::gauss_seidel ? "gauss_seidel" : "jacobi";
}

std::string to_string(Padding p) {
  return p == Padding::duplicate_last ? "duplicate_last" : "zero";
}

std::string to_string(SpeedModel m) { return m == SpeedModel::lane ? "lane" : "euclidean"; }

Method parse_method(const std::string& s) {
  if (s == "newton") return Method::newton;
  if (s == "newton_kantorovich" || s == "nk") return Method::newton_kantorovich;
  throw DomainError("solver.method: unknown method '" + s + "'");
}

Algorithm parse_algorithm(const std::string& s) {
  if (s == "potential") return Algorithm::potential;
  if (s == "best_response" || s == "br") return Algorithm::best_response;
  throw DomainError("solver.algorithm: unknown algorithm '" + s + "'");
}

namespace {

SweepOrder parse_order(const std::string& s) {
  if (s == "gauss_seidel") return SweepOrder::gauss_seidel;
  if (s == "jacobi") return SweepOrder::jacobi;
  throw DomainError("solver.br_order: unknown order '" + s + "'");
}

Padding parse_padding(const std::string& s) {
  if (s == "duplicate_last") return Padding::duplicate_last;
  if (s == "zero") return Padding::zero;
  throw DomainError("padding: unknown padding '" + s + "'");
}

SpeedModel parse_speed_model(const std::string& s) {
  if (s == "lane") return SpeedModel::lane;
  if (s == "euclidean") return SpeedModel::euclidean;
  throw DomainError("speed_model: unknown model '" + s + "'");
}

bool finite(double v) { return std::isfinite(v); }

// Reads j[key] into out when present; type errors are reported with the field path.
template <typename T>
void read(const json& j, const std::string& key, const std::string& path, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DomainError(path + key + ": " + e.what());
  }
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw DomainError((path.empty() ? "<root>" : path) + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw DomainError(path + key + ": unknown field");
  }
}

}  // namespace

std::vector<std::string> validation_errors(const ScenarioConfig& cfg) {
  std::vector<std::string> errs;
  auto require = [&](bool ok, const std::string& field, const std::string& msg) {
    if (!ok) errs.push_back(field + ": " + msg);
  };
  require(cfg.n_vehicles >= 1, "n_vehicles", "must be >= 1");
  require(cfg.horizon_T >= 1, "horizon_T", "must be >= 1");
  require(cfg.sim_steps >= 1, "sim_steps", "must be >= 1");
  require(finite(cfg.dt) && cfg.dt > 0, "dt", "must be > 0");
  require(finite(cfg.delta) && cfg.delta > 0, "delta", "must be > 0");
  require(finite(cfg.u_max) && cfg.u_max > 0, "u_max", "must be > 0");
  require(finite(cfg.alpha), "alpha", "must be finite");
  require(finite(cfg.beta), "beta", "must be finite");
  require(finite(cfg.safety_floor) && cfg.safety_floor >= 0, "safety_floor", "must be >= 0");
  require(cfg.solver.k_iters >= 1, "solver.k_iters", "must be >= 1");
  require(finite(cfg.solver.mu) && cfg.solver.mu >= 0, "solver.mu", "must be >= 0");
  require(finite(cfg.solver.eps_br) && cfg.solver.eps_br > 0, "solver.eps_br", "must be > 0");
  require(cfg.solver.max_br_sweeps >= 1, "solver.max_br_sweeps", "must be >= 1");
  require(finite(cfg.solver.converge_tol) && cfg.solver.converge_tol > 0, "solver.converge_tol",
          "must be > 0");
  require(cfg.solver.max_converge_iters >= 1, "solver.max_converge_iters", "must be >= 1");
  require(cfg.oracle.n_starts >= 1, "oracle.n_starts", "must be >= 1");
  require(finite(cfg.oracle.converge_tol) && cfg.oracle.converge_tol > 0, "oracle.converge_tol",
          "must be > 0");
  require(cfg.oracle.max_iters >= 1, "oracle.max_iters", "must be >= 1");

  const auto n = static_cast<std::size_t>(std::max(cfg.n_vehicles, 0));
  require(cfg.initial_states.size() == n, "initial_states",
          "has " + std::to_string(cfg.initial_states.size()) + " entries, expected n_vehicles = " +
              std::to_string(n));
  require(cfg.v_ref.size() == n, "v_ref",
          "has " + std::to_string(cfg.v_ref.size()) + " entries, expected n_vehicles = " +
              std::to_string(n));
  for (std::size_t i = 0; i < cfg.v_ref.size(); ++i) {
    require(finite(cfg.v_ref[i]) && cfg.v_ref[i] > 0, "v_ref[" + std::to_string(i) + "]",
            "must be > 0");
  }
  for (std::size_t i = 0; i < cfg.initial_states.size(); ++i) {
    require(cfg.initial_states[i].allFinite(), "initial_states[" + std::to_string(i) + "]",
            "must be finite");
  }
  if (!cfg.headings.empty()) {
    require(cfg.headings.size() == n, "headings",
            "has " + std::to_string(cfg.headings.size()) + " entries, expected n_vehicles = " +
                std::to_string(n));
    for (std::size_t i = 0; i < cfg.headings.size(); ++i) {
      require(finite(cfg.headings[i]), "headings[" + std::to_string(i) + "]", "must be finite");
    }
  } else if (cfg.speed_model == SpeedModel::lane) {
    for (std::size_t i = 0; i < cfg.initial_states.size(); ++i) {
      require(cfg.initial_states[i].tail<2>().norm() > 0,
              "initial_states[" + std::to_string(i) + "]",
              "zero initial velocity leaves the lane heading undefined; set headings");
    }
  }
  return errs;
}

void ScenarioConfig::validate() const {
  const auto errs = validation_errors(*this);
  if (errs.empty()) return;
  std::ostringstream msg;
  for (std::size_t k = 0; k < errs.size(); ++k) msg << (k ? "; " : "") << errs[k];
  throw DomainError(msg.str());
}

std::vector<Eigen::Vector2d> ScenarioConfig::lane_directions() const {
  std::vector<Eigen::Vector2d> dirs;
  for (std::size_t i = 0; i < initial_states.size(); ++i) {
    if (!headings.empty()) {
      dirs.emplace_back(std::cos(headings[i]), std::sin(headings[i]));
      continue;
    }
    const Eigen::Vector2d v = initial_states[i].tail<2>();
    const double norm = v.norm();
    dirs.push_back(norm > 0 ? Eigen::Vector2d(v / norm) : Eigen::Vector2d(1.0, 0.0));
  }
  return dirs;
}

ScenarioConfig default_scenario() {
  ScenarioConfig cfg;
  cfg.n_vehicles = 5;
  cfg.v_ref.assign(5, 5.0);
  // Four lanes through the origin plus one offset eastbound lane, all 20 m
  // upstream of their crossing point, travelling at the reference speed.
  cfg.initial_states = {
      State(-20.0, -1.5, 5.0, 0.0),   // eastbound
      State(20.0, 1.5, -5.0, 0.0),    // westbound
      State(1.5, -20.0, 0.0, 5.0),    // northbound
      State(-1.5, 20.0, 0.0, -5.0),   // southbound
      State(-20.0, -6.0, 5.0, 0.0),   // offset eastbound
  };
  return cfg;
}

ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig cfg;
  check_keys(j, "", {"n_vehicles", "dt", "horizon_T", "sim_steps", "alpha", "beta", "delta",
                     "u_max", "v_ref", "initial_states", "speed_model", "headings",
                     "safety_floor", "padding", "solver", "oracle"});
  read(j, "n_vehicles", "", cfg.n_vehicles);
  read(j, "dt", "", cfg.dt);
  read(j, "horizon_T", "", cfg.horizon_T);
  read(j, "sim_steps", "", cfg.sim_steps);
  read(j, "alpha", "", cfg.alpha);
  read(j, "beta", "", cfg.beta);
  read(j, "delta", "", cfg.delta);
  read(j, "u_max", "", cfg.u_max);
  read(j, "safety_floor", "", cfg.safety_floor);
  read(j, "headings", "", cfg.headings);
  if (j.contains("speed_model")) {
    std::string m;
    read(j, "speed_model", "", m);
    cfg.speed_model = parse_speed_model(m);
  }
  if (j.contains("padding")) {
    std::string p;
    read(j, "padding", "", p);
    cfg.padding = parse_padding(p);
  }

  if (j.contains("v_ref")) {
    const json& v = j.at("v_ref");
    if (v.is_number()) {
      cfg.v_ref.assign(static_cast<std::size_t>(std::max(cfg.n_vehicles, 0)), v.get<double>());
    } else {
      read(j, "v_ref", "", cfg.v_ref);
    }
  }

  if (j.contains("initial_states")) {
    const json& states = j.at("initial_states");
    if (!states.is_array()) throw DomainError("initial_states: expected an array");
    for (std::size_t i = 0; i < states.size(); ++i) {
      const std::string path = "initial_states[" + std::to_string(i) + "].";
      const json& s = states[i];
      check_keys(s, path, {"rx", "ry", "vx", "vy"});
      State x = State::Zero();
      read(s, "rx", path, x(0));
      read(s, "ry", path, x(1));
      read(s, "vx", path, x(2));
      read(s, "vy", path, x(3));
      cfg.initial_states.push_back(x);
    }
  }

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    const std::string path = "solver.";
    check_keys(s, path, {"method", "algorithm", "K", "mu", "eps_br", "max_br_sweeps",
                         "converge_tol", "max_converge_iters", "br_order"});
    std::string str;
    if (s.contains("method")) {
      read(s, "method", path, str);
      cfg.solver.method = parse_method(str);
    }
    if (s.contains("algorithm")) {
      read(s, "algorithm", path, str);
      cfg.solver.algorithm = parse_algorithm(str);
    }
    if (s.contains("br_order")) {
      read(s, "br_order", path, str);
      cfg.solver.br_order = parse_order(str);
    }
    read(s, "K", path, cfg.solver.k_iters);
    read(s, "mu", path, cfg.solver.mu);
    read(s, "eps_br", path, cfg.solver.eps_br);
    read(s, "max_br_sweeps", path, cfg.solver.max_br_sweeps);
    read(s, "converge_tol", path, cfg.solver.converge_tol);
    read(s, "max_converge_iters", path, cfg.solver.max_converge_iters);
  }

  if (j.contains("oracle")) {
    const json& o = j.at("oracle");
    const std::string path = "oracle.";
    check_keys(o, path, {"n_starts", "seed", "converge_tol", "max_iters"});
    read(o, "n_starts", path, cfg.oracle.n_starts);
    read(o, "seed", path, cfg.oracle.seed);
    read(o, "converge_tol", path, cfg.oracle.converge_tol);
    read(o, "max_iters", path, cfg.oracle.max_iters);
  }
  return cfg;
}

json to_json(const ScenarioConfig& cfg) {
  json states = json::array();
  for (const State& x : cfg.initial_states) {
    states.push_back({{"rx", x(0)}, {"ry", x(1)}, {"vx", x(2)}, {"vy", x(3)}});
  }
  return {
      {"n_vehicles", cfg.n_vehicles},
      {"dt", cfg.dt},
      {"horizon_T", cfg.horizon_T},
      {"sim_steps", cfg.sim_steps},
      {"alpha", cfg.alpha},
      {"beta", cfg.beta},
      {"delta", cfg.delta},
      {"u_max", cfg.u_max},
      {"v_ref", cfg.v_ref},
      {"initial_states", states},
      {"speed_model", to_string(cfg.speed_model)},
      {"headings", cfg.headings},
      {"safety_floor", cfg.safety_floor},
      {"padding", to_string(cfg.padding)},
      {"solver",
       {{"method", to_string(cfg.solver.method)},
        {"algorithm", to_string(cfg.solver.algorithm)},
        {"K", cfg.solver.k_iters},
        {"mu", cfg.solver.mu},
        {"eps_br", cfg.solver.eps_br},
        {"max_br_sweeps", cfg.solver.max_br_sweeps},
        {"converge_tol", cfg.solver.converge_tol},
        {"max_converge_iters", cfg.solver.max_converge_iters},
        {"br_order", to_string(cfg.solver.br_order)}}},
      {"oracle",
       {{"n_starts", cfg.oracle.n_starts},
        {"seed", cfg.oracle.seed},
        {"converge_tol", cfg.oracle.converge_tol},
        {"max_iters", cfg.oracle.max_iters}}},
  };
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DomainError(path.string() + ": parse error: " + e.what());
  }
  return scenario_from_json(j);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw DomainError("override '" + assignment + "': expected key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (dot == std::string::npos) {
      json parsed;
      try {
        parsed = json::parse(value);
      } catch (const json::parse_error&) {
        parsed = value;  // bare strings such as method names
      }
      (*node)[part] = parsed;
      break;
    }
    node = &(*node)[part];
    if (!node->is_object()) throw DomainError("override '" + key + "': " + part + " is not a section");
    start = dot + 1;
  }
}

}  // namespace tdgame

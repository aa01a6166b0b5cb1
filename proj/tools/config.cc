#include "config.h"

#include "json.hpp"
#include "splitroa/csv.h"

namespace splitroa::cli {
namespace {

using nlohmann::json;

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

std::string index(const std::string& prefix, std::size_t i) {
  return prefix + "[" + std::to_string(i) + "]";
}

const json& require(const json& j, const std::string& key, const std::string& prefix) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(join(prefix, key), "missing");
  return j.at(key);
}

double as_real(const json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError(field, "expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ConfigError(field, "expected an integer");
  return j.get<int>();
}

const json& as_array(const json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field, "expected an array");
  return j;
}

std::vector<double> real_list(const json& j, const std::string& field) {
  std::vector<double> out;
  for (std::size_t i = 0; i < as_array(j, field).size(); ++i) out.push_back(as_real(j[i], index(field, i)));
  return out;
}

std::vector<int> int_list(const json& j, const std::string& field) {
  std::vector<int> out;
  for (std::size_t i = 0; i < as_array(j, field).size(); ++i) out.push_back(as_int(j[i], index(field, i)));
  return out;
}

Box box_from(const json& j, const std::string& field) {
  Box box;
  for (std::size_t i = 0; i < as_array(j, field).size(); ++i) {
    const auto f = index(field, i);
    const auto v = real_list(j[i], f);
    if (v.size() != 2) throw ConfigError(f, "expected [lo, hi]");
    if (!(v[0] < v[1])) throw ConfigError(f, "empty interval");
    box.push_back({v[0], v[1]});
  }
  return box;
}

Polynomial polynomial_from(const json& j, int nvars, const std::string& field) {
  Polynomial p(nvars);
  for (std::size_t i = 0; i < as_array(j, field).size(); ++i) {
    const auto f = index(field, i);
    const auto exps = int_list(require(j[i], "exponents", f), join(f, "exponents"));
    if (static_cast<int>(exps.size()) != nvars) {
      throw ConfigError(join(f, "exponents"), "expected " + std::to_string(nvars) +
                                                  " exponents (t, states, inputs)");
    }
    for (int e : exps) {
      if (e < 0 || e > 255) throw ConfigError(join(f, "exponents"), "exponent out of range");
    }
    p.add_term(Monomial(std::span<const int>(exps)), as_real(require(j[i], "coeff", f), join(f, "coeff")));
  }
  return p;
}

std::vector<Polynomial> polynomial_list(const json& j, int nvars, const std::string& field) {
  std::vector<Polynomial> out;
  for (std::size_t i = 0; i < as_array(j, field).size(); ++i) {
    out.push_back(polynomial_from(j[i], nvars, index(field, i)));
  }
  return out;
}

SystemSpec inline_system(const json& j) {
  const std::string p = "system";
  SystemSpec sys;
  sys.name = j.contains("name") ? j.at("name").get<std::string>() : "inline";
  sys.n = as_int(require(j, "n", p), "system.n");
  sys.m = as_int(require(j, "m", p), "system.m");
  if (sys.n < 1) throw ConfigError("system.n", "must be >= 1");
  if (sys.m < 0) throw ConfigError("system.m", "must be >= 0");
  if (sys.nvars() > kMaxVars) throw ConfigError("system.n", "too many states and inputs");
  sys.horizon = as_real(require(j, "T", p), "system.T");
  sys.dynamics = polynomial_list(require(j, "f", p), sys.nvars(), "system.f");
  sys.state_box = box_from(require(j, "state_box", p), "system.state_box");
  sys.input_box = box_from(require(j, "input_box", p), "system.input_box");
  if (j.contains("state_constraints")) {
    sys.extra_state_constraints = polynomial_list(j.at("state_constraints"), sys.nvars(), "system.state_constraints");
  }
  if (j.contains("input_constraints")) {
    sys.input_constraints = polynomial_list(j.at("input_constraints"), sys.nvars(), "system.input_constraints");
  } else {
    for (int k = 0; k < sys.m; ++k) {
      const auto& iv = sys.input_box[static_cast<std::size_t>(k)];
      const auto u = Polynomial::variable(sys.nvars(), sys.u_var(k));
      sys.input_constraints.push_back((Polynomial::constant(sys.nvars(), iv.hi) - u) *
                                      (u - Polynomial::constant(sys.nvars(), iv.lo)));
    }
  }
  if (j.contains("target_constraints")) {
    sys.target_constraints = polynomial_list(j.at("target_constraints"), sys.nvars(), "system.target_constraints");
  } else {
    sys.target_constraints = {origin_target(sys.n, sys.m)};
  }
  return sys;
}

SystemSpec parse_system(const json& root) {
  const json& j = require(root, "system", "");
  SystemSpec sys;
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "double-integrator") {
      sys = double_integrator();
    } else if (name == "brockett") {
      sys = brockett_integrator();
    } else {
      throw ConfigError("system", "unknown built-in system '" + name + "'");
    }
    if (root.contains("T")) sys.horizon = as_real(root.at("T"), "T");
  } else if (j.is_object()) {
    sys = inline_system(j);
  } else {
    throw ConfigError("system", "expected a built-in name or an object");
  }
  try {
    sys.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("system", e.what());
  }
  return sys;
}

SplitConfig parse_splits(const json& root, const SystemSpec& sys) {
  if (!root.contains("splits")) return equidistant_splits(sys, 0, std::vector<int>(static_cast<std::size_t>(sys.n), 0));
  const json& j = root.at("splits");
  if (!j.is_object()) throw ConfigError("splits", "expected an object");
  SplitConfig splits;
  if (j.contains("equidistant")) {
    const json& e = j.at("equidistant");
    const int time = e.contains("time") ? as_int(e.at("time"), "splits.equidistant.time") : 0;
    std::vector<int> counts(static_cast<std::size_t>(sys.n), 0);
    if (e.contains("state")) counts = int_list(e.at("state"), "splits.equidistant.state");
    if (static_cast<int>(counts.size()) != sys.n) {
      throw ConfigError("splits.equidistant.state", "expected one count per state");
    }
    if (time < 0) throw ConfigError("splits.equidistant.time", "must be >= 0");
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i] < 0) throw ConfigError(index("splits.equidistant.state", i), "must be >= 0");
    }
    return equidistant_splits(sys, time, counts);
  }
  if (j.contains("time")) splits.time_splits = real_list(j.at("time"), "splits.time");
  splits.state_splits.assign(static_cast<std::size_t>(sys.n), {});
  if (j.contains("state")) {
    const json& s = as_array(j.at("state"), "splits.state");
    if (static_cast<int>(s.size()) != sys.n) throw ConfigError("splits.state", "expected one list per state");
    for (std::size_t i = 0; i < s.size(); ++i) splits.state_splits[i] = real_list(s[i], index("splits.state", i));
  }
  for (double t : splits.time_splits) {
    if (!(t > 0.0 && t < sys.horizon)) throw ConfigError("splits.time", "split outside (0, T)");
  }
  for (std::size_t i = 0; i < splits.state_splits.size(); ++i) {
    for (double x : splits.state_splits[i]) {
      if (!(x > sys.state_box[i].lo && x < sys.state_box[i].hi)) {
        throw ConfigError(index("splits.state", i), "split outside the state box");
      }
    }
  }
  // Sorting makes the flattened layout canonical.
  return unflatten_theta(layout_of(splits), flatten_theta(splits));
}

OptimizerConfig parse_optimizer(const json& root) {
  OptimizerConfig cfg;
  if (!root.contains("optimizer")) return cfg;
  const json& j = root.at("optimizer");
  if (!j.is_object()) throw ConfigError("optimizer", "expected an object");
  if (j.contains("stepsize")) cfg.stepsize = as_real(j.at("stepsize"), "optimizer.stepsize");
  if (j.contains("beta1")) cfg.beta1 = as_real(j.at("beta1"), "optimizer.beta1");
  if (j.contains("beta2")) cfg.beta2 = as_real(j.at("beta2"), "optimizer.beta2");
  if (j.contains("eps")) cfg.eps = as_real(j.at("eps"), "optimizer.eps");
  if (j.contains("iters")) cfg.max_iters = as_int(j.at("iters"), "optimizer.iters");
  if (j.contains("min_gap_fraction")) {
    cfg.min_gap_fraction = as_real(j.at("min_gap_fraction"), "optimizer.min_gap_fraction");
  }
  if (j.contains("max_consecutive_failures")) {
    cfg.max_consecutive_failures =
        as_int(j.at("max_consecutive_failures"), "optimizer.max_consecutive_failures");
  }
  if (j.contains("fd_step")) cfg.fd.eps_f = as_real(j.at("fd_step"), "optimizer.fd_step");
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("optimizer", e.what());
  }
  return cfg;
}

GradMethod grad_from(const json& j, const std::string& field) {
  if (!j.is_string()) throw ConfigError(field, "expected \"qr\", \"lsqr\" or \"fd\"");
  try {
    return parse_grad_method(j.get<std::string>());
  } catch (const std::invalid_argument&) {
    throw ConfigError(field, "expected \"qr\", \"lsqr\" or \"fd\"");
  }
}

BenchmarkConfig parse_benchmark(const json& root) {
  BenchmarkConfig b;
  if (!root.contains("benchmark")) return b;
  const json& j = root.at("benchmark");
  if (!j.is_object()) throw ConfigError("benchmark", "expected an object");
  if (j.contains("param_counts")) b.param_counts = int_list(j.at("param_counts"), "benchmark.param_counts");
  if (j.contains("count_degree")) b.count_degree = as_int(j.at("count_degree"), "benchmark.count_degree");
  if (b.count_degree < 2 || b.count_degree % 2 != 0) {
    throw ConfigError("benchmark.count_degree", "must be even and >= 2");
  }
  if (j.contains("degrees")) b.degrees = int_list(j.at("degrees"), "benchmark.degrees");
  if (j.contains("degree_params")) b.degree_params = as_int(j.at("degree_params"), "benchmark.degree_params");
  if (j.contains("methods")) {
    b.methods.clear();
    const json& m = as_array(j.at("methods"), "benchmark.methods");
    for (std::size_t i = 0; i < m.size(); ++i) b.methods.push_back(grad_from(m[i], index("benchmark.methods", i)));
  }
  if (j.contains("split_kind")) {
    b.split_kind = j.at("split_kind").get<std::string>();
    if (b.split_kind != "state" && b.split_kind != "time") {
      throw ConfigError("benchmark.split_kind", "expected \"state\" or \"time\"");
    }
  }
  for (int c : b.param_counts) {
    if (c < 1) throw ConfigError("benchmark.param_counts", "counts must be >= 1");
  }
  for (int d : b.degrees) {
    if (d < 2 || d % 2 != 0) throw ConfigError("benchmark.degrees", "degrees must be even and >= 2");
  }
  return b;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("<root>", "expected an object");
  try {
    RunConfig cfg;
    cfg.system = parse_system(root);
    if (root.contains("degree")) cfg.degree = as_int(root.at("degree"), "degree");
    if (cfg.degree < 2 || cfg.degree % 2 != 0) throw ConfigError("degree", "must be even and >= 2");
    cfg.splits = parse_splits(root, cfg.system);
    cfg.optimizer = parse_optimizer(root);
    if (root.contains("grad")) cfg.optimizer.grad_method = grad_from(root.at("grad"), "grad");
    if (root.contains("tol")) cfg.tol = as_real(root.at("tol"), "tol");
    if (!(cfg.tol > 0.0)) throw ConfigError("tol", "must be positive");
    if (root.contains("max_solver_iters")) {
      cfg.max_solver_iters = as_int(root.at("max_solver_iters"), "max_solver_iters");
    }
    if (root.contains("seed")) {
      if (!root.at("seed").is_number_unsigned()) throw ConfigError("seed", "expected a non-negative integer");
      cfg.seed = root.at("seed").get<std::uint64_t>();
    }
    if (root.contains("out")) cfg.out_dir = root.at("out").get<std::string>();
    if (root.contains("mc_samples")) cfg.mc_samples = as_int(root.at("mc_samples"), "mc_samples");
    if (cfg.mc_samples < 1) throw ConfigError("mc_samples", "must be >= 1");
    if (root.contains("grid_resolution")) cfg.grid_resolution = as_int(root.at("grid_resolution"), "grid_resolution");
    if (cfg.grid_resolution < 2) throw ConfigError("grid_resolution", "must be >= 2");
    cfg.benchmark = parse_benchmark(root);
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError("<root>", std::string("unexpected value type: ") + e.what());
  }
}

RunConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError("--config", e.what());
  }
  return parse_config(text);
}

Polynomial parse_polynomial(const std::string& json_text, int nvars) {
  return polynomial_from(json::parse(json_text), nvars, "polynomial");
}

SplitProblem make_problem(const RunConfig& config) {
  SplitProblem p;
  p.sys = config.system;
  p.layout = layout_of(config.splits);
  p.degree = config.degree;
  p.solver.tol = config.tol;
  p.solver.max_iter = config.max_solver_iters;
  return p;
}

}  // namespace splitroa::cli

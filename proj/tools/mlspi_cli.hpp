#pragma once

// Batch front end. Every subcommand reads one JSON config whose "command"
// field names it, validates the whole document before computing anything,
// and writes its results under --out. Outputs depend only on the config and
// the seed, so reruns are byte-identical.
//
// Exit codes: 0 ok, 1 config/schema/input-format error, 2 capacity or
// resource error (including dataset/params mismatch), 3 numerical
// divergence or non-convergence.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mlspi/mlspi.hpp"
#include "mlspi/serialization.hpp"

namespace mlspi::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kConfigError = 1, kResourceError = 2, kDivergence = 3 };

/// Config document does not match the command's schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data inconsistent with the configured model.
class MismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Could not create or write an output file.
class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Typed, path-aware view of one JSON object. Keys are marked as seen when
/// read; finish() rejects anything left over.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(where() + "must be a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  double number(const std::string& key) {
    const json& v = require(key);
    if (!v.is_number()) throw SchemaError(name(key) + " must be a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : mark(key, fallback); }

  std::int64_t integer(const std::string& key) {
    const json& v = require(key);
    if (!v.is_number_integer()) throw SchemaError(name(key) + " must be an integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
      throw SchemaError(name(key) + " is out of range");
    return v.get<std::int64_t>();
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    return has(key) ? integer(key) : mark(key, fallback);
  }

  std::size_t count(const std::string& key) {
    const std::int64_t v = integer(key);
    if (v < 0) throw SchemaError(name(key) + " must be >= 0");
    return static_cast<std::size_t>(v);
  }
  std::size_t count(const std::string& key, std::size_t fallback) { return has(key) ? count(key) : mark(key, fallback); }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return mark(key, fallback);
    const json& v = require(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw SchemaError(name(key) + " must be an unsigned 64-bit integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return mark(key, fallback);
    const json& v = require(key);
    if (!v.is_boolean()) throw SchemaError(name(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const json& v = require(key);
    if (!v.is_string()) throw SchemaError(name(key) + " must be a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : mark(key, fallback);
  }

  std::optional<std::string> optional_string(const std::string& key) {
    if (!has(key)) return mark(key, std::optional<std::string>());
    return string(key);
  }

  Fields object(const std::string& key) { return Fields(require(key), name(key)); }
  std::optional<Fields> optional_object(const std::string& key) {
    if (!has(key)) {
      seen_.insert(key);
      return std::nullopt;
    }
    return object(key);
  }

  std::vector<int> int_list(const std::string& key) {
    const json& v = require(key);
    if (!v.is_array()) throw SchemaError(name(key) + " must be an array of integers");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) throw SchemaError(name(key) + " must be an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }

  /// Rejects keys that were never read.
  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw SchemaError("unknown key '" + name(key) + "'");
  }

  const std::string& path() const noexcept { return path_; }
  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& require(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) throw SchemaError("missing required field '" + name(key) + "'");
    return j_.at(key);
  }
  template <class T>
  T mark(const std::string& key, T value) {
    seen_.insert(key);
    return value;
  }
  std::string where() const { return path_.empty() ? "config " : "'" + path_ + "' "; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

struct Options {
  std::string command;
  fs::path config;
  fs::path out = "out";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

/// Progress messages on the error stream, silenced by --quiet.
class Log {
 public:
  Log(std::ostream& err, bool quiet) : err_(err), quiet_(quiet) {}
  void info(const std::string& msg) const {
    if (!quiet_) err_ << msg << '\n';
  }
  void warn(const std::string& msg) const {
    if (!quiet_) err_ << "warning: " << msg << '\n';
  }

 private:
  std::ostream& err_;
  bool quiet_;
};

struct Context {
  Options opts;
  json doc;
  Log log;

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : opts.config.parent_path() / path;
  }
};

// ---- parsing helpers -------------------------------------------------------

inline GameParams parse_params(Fields f) {
  GameParams p;
  const std::int64_t m = f.integer("m"), L = f.integer("L");
  if (m > 1000 || m < 0 || L > 1000000 || L < 0) throw SchemaError("params.m or params.L out of range");
  p.m = static_cast<int>(m);
  p.L = static_cast<int>(L);
  p.lambda = f.number("lambda");
  p.mu = f.number("mu");
  p.c_a = f.number("c_a");
  p.c_b = f.number("c_b");
  p.gamma = f.number("gamma");
  f.finish();
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw SchemaError(e.what());
  }
  return p;
}

inline ExplorationSchedule parse_exploration(std::optional<Fields> f) {
  ExplorationSchedule s;
  if (!f) return s;
  s.eps0 = f->number("eps0", s.eps0);
  s.eps_min = f->number("eps_min", s.eps_min);
  s.eps_decay = f->number("eps_decay", s.eps_decay);
  f->finish();
  try {
    s.validate();
  } catch (const DomainError& e) {
    throw SchemaError(e.what());
  }
  return s;
}

inline EvaluationOptions parse_inner(std::optional<Fields> f) {
  EvaluationOptions o;
  if (!f) return o;
  o.tol = f->number("tol", o.tol);
  o.max_iter = f->count("max_iter", o.max_iter);
  o.divergence_norm = f->number("divergence_norm", o.divergence_norm);
  const std::string mode = f->string("target_mode", "observed_successor");
  if (mode == "observed_successor")
    o.mode = TargetMode::ObservedSuccessor;
  else if (mode == "empirical_kernel")
    o.mode = TargetMode::EmpiricalKernel;
  else
    throw SchemaError(f->name("target_mode") + " must be \"observed_successor\" or \"empirical_kernel\"");
  f->finish();
  if (!(o.tol > 0.0)) throw SchemaError(f->name("tol") + " must be > 0");
  if (o.max_iter == 0) throw SchemaError(f->name("max_iter") + " must be >= 1");
  if (!(o.divergence_norm > 0.0)) throw SchemaError(f->name("divergence_norm") + " must be > 0");
  return o;
}

inline std::optional<State> parse_x0(Fields& f, const GameParams& params) {
  if (!f.has("x0")) {
    f.optional_string("x0");
    return std::nullopt;
  }
  State x(f.int_list("x0"));
  try {
    validate_state(x, params);
  } catch (const DomainError& e) {
    throw SchemaError(f.name("x0") + ": " + e.what());
  }
  return x;
}

inline json read_json_file(const fs::path& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + what + " '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(what + " '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline MixedPolicy load_policy(const fs::path& path, const std::string& player, const GameParams& params,
                               std::size_t cap) {
  const json j = read_json_file(path, "policy file");
  if (j.contains("player") && j.at("player") != player)
    throw FormatError("policy file '" + path.string() + "' holds a " + j.at("player").dump() + " policy, expected \"" +
                      player + "\"");
  MixedPolicy policy = policy_from_json(j, cap);
  if (policy.space().m() != params.m || policy.space().L() != params.L)
    throw MismatchError("policy file '" + path.string() + "' is for m=" + std::to_string(policy.space().m()) +
                        ", L=" + std::to_string(policy.space().L()));
  return policy;
}

inline AttackerSpec parse_attacker(std::optional<Fields> f, const Context& ctx, const GameParams& params,
                                   std::size_t cap, const std::string& fallback, bool allow_learner) {
  if (!f) {
    if (fallback == "best_responder") return BestResponderAttacker{};
    return RandomUniformAttacker{};
  }
  const std::string type = f->string("type");
  AttackerSpec spec = RandomUniformAttacker{};
  if (type == "random_uniform") {
    spec = RandomUniformAttacker{};
  } else if (type == "best_responder") {
    spec = BestResponderAttacker{f->boolean("explore", true)};
  } else if (type == "mirror_learner") {
    if (!allow_learner) throw SchemaError(f->name("type") + " \"mirror_learner\" needs training data");
    spec = MirrorLearnerAttacker{};
  } else if (type == "fixed_mixed") {
    const fs::path path = ctx.resolve(f->string("policy"));
    f->finish();
    return FixedMixedAttacker{load_policy(path, "attacker", params, cap)};
  } else {
    throw SchemaError(f->name("type") +
                      " must be one of \"random_uniform\", \"best_responder\", \"mirror_learner\", \"fixed_mixed\"");
  }
  f->finish();
  return spec;
}

inline json attacker_json(const AttackerSpec& spec) {
  json j = {{"type", attacker_name(spec)}};
  if (const auto* br = std::get_if<BestResponderAttacker>(&spec)) j["explore"] = br->explore;
  return j;
}

// ---- output helpers --------------------------------------------------------

inline void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw OutputError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw OutputError("write failed for '" + path.string() + "'");
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline void warn_if_unstable(const GameParams& p, const Log& log) {
  if (!p.is_stable())
    log.warn("lambda >= m * mu: the queue is not stable; buffers will sit near capacity");
}

inline std::size_t parse_state_cap(Fields& f) {
  const std::size_t cap = f.count("state_cap", kDefaultStateCap);
  if (cap == 0) throw SchemaError("state_cap must be >= 1");
  return cap;
}

/// Largest state space on which evaluate runs the exact solver.
inline constexpr std::size_t kDefaultExploitabilityCap = 20'000;

// ---- commands --------------------------------------------------------------

inline int cmd_solve_exact(Context& ctx) {
  Fields f(ctx.doc, "");
  f.string("command");
  const GameParams params = parse_params(f.object("params"));
  SolverOptions opts;
  opts.tol = f.number("tol", opts.tol);
  opts.max_iter = f.count("max_iter", opts.max_iter);
  opts.state_cap = parse_state_cap(f);
  f.seed("seed", 0);
  f.finish();
  if (!(opts.tol > 0.0)) throw SchemaError("tol must be > 0");
  if (opts.max_iter == 0) throw SchemaError("max_iter must be >= 1");
  warn_if_unstable(params, ctx.log);

  const TabularGame game(params, opts.state_cap);
  ctx.log.info("solve-exact: " + std::to_string(game.space().size()) + " states");
  const ShapleyResult r = shapley_value_iteration(game, opts);
  ctx.log.info("converged after " + std::to_string(r.iterations) + " iterations");

  prepare_out(ctx.opts.out);
  write_json(ctx.opts.out / "q_star.json", to_json(r.q));
  write_json(ctx.opts.out / "v_star.json",
             {{"m", params.m}, {"L", params.L}, {"states", state_list_json(game.space())}, {"v", r.v}});
  write_json(ctx.opts.out / "alpha_star.json", to_json(r.alpha, "attacker"));
  write_json(ctx.opts.out / "beta_star.json", to_json(r.beta, "defender"));
  std::ostringstream log;
  log << "iteration,sup_diff\n";
  for (std::size_t i = 0; i < r.sup_diffs.size(); ++i) log << i + 1 << ',' << format_real(r.sup_diffs[i]) << '\n';
  write_text(ctx.opts.out / "convergence.csv", log.str());
  write_json(ctx.opts.out / "solve_exact.json", {{"command", "solve-exact"},
                                                 {"params", to_json(params)},
                                                 {"tol", opts.tol},
                                                 {"max_iter", opts.max_iter},
                                                 {"states", game.space().size()},
                                                 {"iterations", r.iterations},
                                                 {"bellman_residual", bellman_residual(r.q, game)}});
  return kOk;
}

inline void write_train_outputs(const fs::path& out, const TrainReport& report, const TrainConfig& cfg,
                                bool diverged) {
  json j = {{"command", "train"},
            {"params", to_json(cfg.params)},
            {"seed", cfg.seed},
            {"n", cfg.n},
            {"attacker", attacker_json(cfg.attacker)},
            {"diverged", diverged}};
  const json body = to_json(report);
  for (const auto& [key, value] : body.items()) j[key] = value;
  write_json(out / "train_report.json", j);
  std::ostringstream csv;
  write_theta_trace_csv(csv, report, cfg.params.feature_dim());
  write_text(out / "theta_trace.csv", csv.str());
  if (report.beta_final) write_json(out / "policy.json", to_json(*report.beta_final, "defender"));
  if (!report.theta_trace.empty()) write_json(out / "theta.json", to_json(report.theta_trace.back()));
}

inline int cmd_train(Context& ctx) {
  Fields f(ctx.doc, "");
  f.string("command");
  TrainConfig cfg;
  cfg.params = parse_params(f.object("params"));
  cfg.state_cap = parse_state_cap(f);
  cfg.n = f.count("n");
  cfg.max_outer_iters = f.count("max_outer_iters", cfg.max_outer_iters);
  cfg.theta_tol = f.number("theta_tol", cfg.theta_tol);
  cfg.seed = f.seed("seed", 0);
  cfg.exploration = parse_exploration(f.optional_object("exploration"));
  cfg.inner = parse_inner(f.optional_object("inner"));
  cfg.attacker = parse_attacker(f.optional_object("attacker"), ctx, cfg.params, cfg.state_cap, "random_uniform", true);
  cfg.x0 = parse_x0(f, cfg.params);
  const bool save_dataset = f.boolean("save_dataset", false);
  f.finish();
  if (ctx.opts.seed) cfg.seed = *ctx.opts.seed;
  try {
    cfg.validate();
  } catch (const DomainError& e) {
    throw SchemaError(e.what());
  }
  warn_if_unstable(cfg.params, ctx.log);

  prepare_out(ctx.opts.out);
  ctx.log.info("train: n=" + std::to_string(cfg.n) + ", up to " + std::to_string(cfg.max_outer_iters) +
               " outer iterations, attacker " + attacker_name(cfg.attacker));
  TrainReport report;
  try {
    report = train(cfg);
  } catch (const TrainingDiverged& e) {
    write_train_outputs(ctx.opts.out, e.partial(), cfg, true);
    throw;
  }
  write_train_outputs(ctx.opts.out, report, cfg, false);
  if (save_dataset) {
    std::ostringstream ds;
    write_dataset(ds, report.last_dataset, cfg.params);
    write_text(ctx.opts.out / "last_dataset.txt", ds.str());
  }
  ctx.log.info(std::string(report.converged ? "converged" : "stopped") + " after " +
               std::to_string(report.theta_trace.size()) + " outer iterations");
  return kOk;
}

inline int cmd_evaluate(Context& ctx) {
  Fields f(ctx.doc, "");
  f.string("command");
  const GameParams params = parse_params(f.object("params"));
  const std::size_t cap = parse_state_cap(f);
  const fs::path policy_path = ctx.resolve(f.string("policy"));
  const std::size_t n_rollouts = f.count("n_rollouts");
  if (n_rollouts == 0) throw SchemaError("n_rollouts must be >= 1");
  const double truncation = f.number("truncation", 1e-3);
  if (!(truncation > 0.0)) throw SchemaError("truncation must be > 0");
  const std::size_t horizon_cfg = f.count("horizon", 0);
  const std::uint64_t config_seed = f.seed("seed", 0);
  const std::uint64_t seed = ctx.opts.seed.value_or(config_seed);
  const bool want_exploitability = f.boolean("exploitability", true);
  const std::size_t exploit_cap = f.count("exploitability_cap", kDefaultExploitabilityCap);
  const AttackerSpec spec = parse_attacker(f.optional_object("attacker"), ctx, params, cap, "best_responder", false);
  const std::optional<State> x0 = parse_x0(f, params);
  f.finish();
  warn_if_unstable(params, ctx.log);

  const MixedPolicy beta = load_policy(policy_path, "defender", params, cap);
  const std::size_t horizon = horizon_cfg > 0 ? horizon_cfg : horizon_for_truncation(params, truncation);
  Attacker attacker(spec, params, cap);
  attacker.prepare(beta);
  const InitialDistribution start = x0 ? InitialDistribution::at(*x0) : InitialDistribution::empty_system(params);
  const State start_state = *start.point;
  ctx.log.info("evaluate: " + std::to_string(n_rollouts) + " rollouts of horizon " + std::to_string(horizon));
  const RolloutEstimate est = evaluate_policy_rollout(beta, attacker, horizon, n_rollouts, params, CounterRng(seed), start);

  json j = {{"command", "evaluate"},
            {"params", to_json(params)},
            {"seed", seed},
            {"attacker", attacker_json(spec)},
            {"x0", start_state.values()},
            {"horizon", horizon},
            {"n_rollouts", n_rollouts},
            {"mean_discounted_cost", est.mean},
            {"standard_error", est.standard_error}};
  j["exploitability"] = nullptr;
  if (want_exploitability) {
    try {
      const TabularGame game(params, exploit_cap);
      const ShapleyResult mpe = shapley_value_iteration(game);
      double v_sup = 0.0;
      for (double v : mpe.v) v_sup = std::max(v_sup, std::abs(v));
      const double gap = exploitability_gap(beta, game, mpe.v);
      j["exploitability"] = {{"gap", gap}, {"v_star_sup", v_sup}, {"relative", v_sup > 0 ? gap / v_sup : 0.0}};
    } catch (const CapacityError& e) {
      ctx.log.warn(std::string("exploitability skipped: ") + e.what());
    }
  }
  prepare_out(ctx.opts.out);
  write_json(ctx.opts.out / "evaluation.json", j);
  return kOk;
}

inline Dataset load_dataset(const fs::path& path, const GameParams& params) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset '" + path.string() + "'");
  Dataset ds = read_dataset(in);
  if (ds.empty()) throw FormatError("dataset '" + path.string() + "' holds no samples");
  try {
    ds.check_compatible(params);
  } catch (const DomainError& e) {
    throw MismatchError("dataset '" + path.string() + "' does not match params: " + e.what());
  }
  return ds;
}

inline int cmd_bound(Context& ctx) {
  Fields f(ctx.doc, "");
  f.string("command");
  const GameParams params = parse_params(f.object("params"));
  const std::size_t cap = parse_state_cap(f);
  const std::string dataset_name = f.string("dataset");
  const std::optional<std::string> policy_name = f.optional_string("policy");
  const double delta = f.number("delta", 0.1);
  if (!(delta > 0.0 && delta < 1.0)) throw SchemaError("delta must lie in (0, 1)");
  EvaluationOptions inner = parse_inner(f.optional_object("inner"));
  f.seed("seed", 0);
  f.finish();
  warn_if_unstable(params, ctx.log);

  const Dataset ds = load_dataset(ctx.resolve(dataset_name), params);
  const TabularGame game(params, cap);
  const MixedPolicy beta = policy_name ? load_policy(ctx.resolve(*policy_name), "defender", params, cap)
                                       : shapley_value_iteration(game).beta;
  ctx.log.info("bound: n=" + std::to_string(ds.size()));
  const EvaluationResult fit = evaluate_policy(ds, beta, params, inner);
  const Eigen::MatrixXd phi = feature_matrix(ds);
  const Eigen::VectorXd q_true = values_on_samples(defender_q(beta, game), ds);
  BoundReport report = theorem1_bound(ds, phi, params, delta, q_true);
  report.measured_error = sigma_norm(q_true - phi * fit.theta);

  json j = {{"command", "bound"},
            {"params", to_json(params)},
            {"dataset", dataset_name},
            {"policy", policy_name ? json(*policy_name) : json("equilibrium")}};
  const json body = to_json(report);
  for (const auto& [key, value] : body.items()) j[key] = value;
  j["holds"] = *report.measured_error <= report.total;
  j["theta"] = to_json(fit.theta);
  j["inner_converged"] = fit.converged;
  j["inner_iterations"] = fit.iterations;
  prepare_out(ctx.opts.out);
  write_json(ctx.opts.out / "bound.json", j);
  return kOk;
}

inline int cmd_collect(Context& ctx) {
  Fields f(ctx.doc, "");
  f.string("command");
  const GameParams params = parse_params(f.object("params"));
  const std::size_t cap = parse_state_cap(f);
  const std::string mode = f.string("mode", "trajectory");
  const std::uint64_t config_seed = f.seed("seed", 0);
  const std::uint64_t seed = ctx.opts.seed.value_or(config_seed);
  CounterRng rng(seed);
  Dataset ds;
  json summary = {{"command", "collect"}, {"params", to_json(params)}, {"seed", seed}, {"mode", mode}};

  if (mode == "exhaustive") {
    const std::size_t visits = f.count("visits");
    if (visits == 0) throw SchemaError("visits must be >= 1");
    f.finish();
    const StateSpace space(params, cap);
    ds = collect_exhaustive(params, visits, rng);
    summary["visits"] = visits;
  } else if (mode == "trajectory") {
    const std::size_t n = f.count("n");
    if (n == 0) throw SchemaError("n must be >= 1");
    const std::optional<std::string> policy_name = f.optional_string("policy");
    const ExplorationSchedule schedule = parse_exploration(f.optional_object("exploration"));
    const AttackerSpec spec = parse_attacker(f.optional_object("attacker"), ctx, params, cap, "random_uniform", false);
    const std::optional<State> x0 = parse_x0(f, params);
    f.finish();
    const StateSpace space(params, cap);
    const MixedPolicy beta =
        policy_name ? load_policy(ctx.resolve(*policy_name), "defender", params, cap) : MixedPolicy::uniform(space);
    Attacker attacker(spec, params, cap);
    attacker.prepare(beta);
    ds = collect(beta, attacker, n, schedule, params, rng,
                 x0 ? InitialDistribution::at(*x0) : InitialDistribution::empty_system(params))
             .data;
    summary["n"] = n;
    summary["attacker"] = attacker_json(spec);
  } else {
    throw SchemaError("mode must be \"trajectory\" or \"exhaustive\"");
  }
  warn_if_unstable(params, ctx.log);
  ctx.log.info("collect: " + std::to_string(ds.size()) + " samples");
  summary["samples"] = ds.size();
  summary["distinct_triples"] = ds.counts().size();

  prepare_out(ctx.opts.out);
  std::ostringstream text;
  write_dataset(text, ds, params);
  write_text(ctx.opts.out / "dataset.txt", text.str());
  write_json(ctx.opts.out / "collect.json", summary);
  return kOk;
}

// ---- entry point -----------------------------------------------------------

inline int dispatch(Context& ctx) {
  if (ctx.opts.command == "solve-exact") return cmd_solve_exact(ctx);
  if (ctx.opts.command == "train") return cmd_train(ctx);
  if (ctx.opts.command == "evaluate") return cmd_evaluate(ctx);
  if (ctx.opts.command == "bound") return cmd_bound(ctx);
  return cmd_collect(ctx);
}

/// Runs one subcommand; returns the process exit code.
inline int run_command(const Options& opts, std::ostream& err) {
  Context ctx{opts, json(), Log(err, opts.quiet)};
  try {
    try {
      ctx.doc = read_json_file(opts.config, "config");
    } catch (const FormatError& e) {
      throw SchemaError(e.what());
    }
    if (!ctx.doc.is_object()) throw SchemaError("config must be a JSON object");
    if (!ctx.doc.contains("command")) throw SchemaError("missing required field 'command'");
    if (!ctx.doc.at("command").is_string()) throw SchemaError("command must be a string");
    if (ctx.doc.at("command").get<std::string>() != opts.command)
      throw SchemaError("config is for command '" + ctx.doc.at("command").get<std::string>() + "', not '" +
                        opts.command + "'");
    return dispatch(ctx);
  } catch (const SchemaError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const FormatError& e) {
    err << "input error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DomainError& e) {
    err << "input error: " << e.what() << '\n';
    return kConfigError;
  } catch (const CapacityError& e) {
    err << "capacity error: " << e.what() << '\n';
    return kResourceError;
  } catch (const MismatchError& e) {
    err << "mismatch: " << e.what() << '\n';
    return kResourceError;
  } catch (const OutputError& e) {
    err << "output error: " << e.what() << '\n';
    return kResourceError;
  } catch (const InsufficientData& e) {
    err << "insufficient data: " << e.what() << '\n';
    return kResourceError;
  } catch (const DegenerateFeatures& e) {
    err << "degenerate features: " << e.what() << '\n';
    return kResourceError;
  } catch (const DivergenceError& e) {
    err << "diverged: " << e.what() << '\n';
    return kDivergence;
  } catch (const ConvergenceError& e) {
    err << "did not converge: " << e.what() << '\n';
    return kDivergence;
  }
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Minimax LSPI for the parallel-queue routing game"};
  app.require_subcommand(1);
  Options opts;
  std::uint64_t seed = 0;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"solve-exact", "Shapley value iteration on the full state space"},
      {"train", "Minimax LSPI training run"},
      {"evaluate", "Rollout cost and exploitability of a defender policy"},
      {"bound", "Evaluation-error bound terms for a stored dataset"},
      {"collect", "Generate a transition dataset"}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config, "JSON config file")->required();
    sub->add_option("--out", opts.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Overrides the config seed");
    sub->add_flag("--quiet", opts.quiet, "No progress output");
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    for (const CLI::App* sub : subs)
      if (sub->parsed()) err << sub->help();
    return kConfigError;
  }
  for (const CLI::App* sub : subs)
    if (sub->parsed()) {
      opts.command = sub->get_name();
      if (sub->count("--seed")) opts.seed = seed;
    }
  return run_command(opts, err);
}

/// Convenience overload for in-process callers.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"mlspi"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace mlspi::cli

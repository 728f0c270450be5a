#pragma once

// File formats.
//
// Dataset: one sample per line, six whitespace-separated fields
//
//     <x> <a> <b> <r> <x_next> <dt>
//
// where states are comma-separated occupancies ("2,0,1") and reals are
// printed with 17 significant digits so a write/read cycle is exact. Lines
// starting with '#' are comments; the writer emits "# mlspi-dataset v1 m=<m>
// L=<L> n=<n>" as the first line.
//
// Policies, Q tables, weights and reports are JSON (nlohmann::json).

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mlspi/bound.hpp"
#include "mlspi/evaluation.hpp"
#include "mlspi/exact_solver.hpp"
#include "mlspi/game_model.hpp"
#include "mlspi/lspi.hpp"
#include "mlspi/state_space.hpp"

namespace mlspi {

using json = nlohmann::ordered_json;

/// Malformed input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline State parse_state(const std::string& text) {
  std::vector<int> q;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      std::size_t used = 0;
      q.push_back(std::stoi(part, &used));
      if (used != part.size()) throw FormatError("bad state component '" + part + "'");
    } catch (const std::logic_error&) {
      throw FormatError("bad state '" + text + "'");
    }
  }
  if (q.empty()) throw FormatError("empty state");
  return State(std::move(q));
}

inline void write_dataset(std::ostream& out, const Dataset& ds, const GameParams& params) {
  out << "# mlspi-dataset v1 m=" << params.m << " L=" << params.L << " n=" << ds.size() << '\n';
  for (const auto& s : ds.samples())
    out << to_string(s.x) << ' ' << s.a << ' ' << s.b << ' ' << format_real(s.r) << ' ' << to_string(s.x_next)
        << ' ' << format_real(s.dt) << '\n';
}

/// Reads a dataset; the result is frozen.
inline Dataset read_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string x, x_next, a, b, r, dt, extra;
    if (!(fields >> x >> a >> b >> r >> x_next >> dt) || (fields >> extra))
      throw FormatError("dataset line " + std::to_string(lineno) + ": expected 6 fields");
    try {
      Sample s{parse_state(x), std::stoi(a), std::stoi(b), std::stod(r), parse_state(x_next), std::stod(dt)};
      ds.append(std::move(s));
    } catch (const FormatError& e) {
      throw FormatError("dataset line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::exception& e) {
      throw FormatError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  ds.freeze();
  return ds;
}

inline json to_json(const GameParams& p) {
  return {{"m", p.m}, {"L", p.L}, {"lambda", p.lambda}, {"mu", p.mu},
          {"c_a", p.c_a}, {"c_b", p.c_b}, {"gamma", p.gamma}};
}

inline json state_list_json(const StateSpace& space) {
  json states = json::array();
  for (std::size_t s = 0; s < space.size(); ++s) states.push_back(space.state(s).values());
  return states;
}

/// {"player", "m", "L", "states": [[...]], "probs": [[p0, p1], ...]}
inline json to_json(const MixedPolicy& policy, const std::string& player) {
  json probs = json::array();
  for (const auto& d : policy.probs()) probs.push_back({d[0], d[1]});
  return {{"player", player},
          {"m", policy.space().m()},
          {"L", policy.space().L()},
          {"states", state_list_json(policy.space())},
          {"probs", std::move(probs)}};
}

inline MixedPolicy policy_from_json(const json& j, std::size_t cap = kDefaultStateCap) {
  try {
    const StateSpace space(j.at("m").get<int>(), j.at("L").get<int>(), cap);
    const json& probs = j.at("probs");
    if (!probs.is_array() || probs.size() != space.size())
      throw FormatError("policy: 'probs' must hold one entry per state");
    std::vector<ActionDist> dists;
    dists.reserve(space.size());
    for (const auto& d : probs) {
      if (!d.is_array() || d.size() != 2) throw FormatError("policy: each entry needs two probabilities");
      dists.push_back({d[0].get<double>(), d[1].get<double>()});
    }
    if (j.contains("states")) {
      const json& states = j.at("states");
      if (states.size() != space.size()) throw FormatError("policy: 'states' length mismatch");
      for (std::size_t s = 0; s < space.size(); ++s)
        if (states[s].get<std::vector<int>>() != space.state(s).values())
          throw FormatError("policy: states not in lexicographic order");
    }
    return MixedPolicy(space, std::move(dists));
  } catch (const json::exception& e) {
    throw FormatError(std::string("policy: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("policy: ") + e.what());
  }
}

/// {"m", "L", "states", "q": [[[q00, q01], [q10, q11]], ...]} with rows a.
inline json to_json(const QTable& q) {
  json rows = json::array();
  for (std::size_t s = 0; s < q.space().size(); ++s) {
    const Matrix2x2 g = q.matrix(s);
    rows.push_back({{g[0][0], g[0][1]}, {g[1][0], g[1][1]}});
  }
  return {{"m", q.space().m()}, {"L", q.space().L()}, {"states", state_list_json(q.space())}, {"q", std::move(rows)}};
}

inline QTable qtable_from_json(const json& j, std::size_t cap = kDefaultStateCap) {
  try {
    QTable q(StateSpace(j.at("m").get<int>(), j.at("L").get<int>(), cap));
    const json& rows = j.at("q");
    if (rows.size() != q.space().size()) throw FormatError("qtable: wrong number of states");
    for (std::size_t s = 0; s < rows.size(); ++s)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) q(s, a, b) = rows[s].at(static_cast<std::size_t>(a)).at(static_cast<std::size_t>(b)).get<double>();
    return q;
  } catch (const json::exception& e) {
    throw FormatError(std::string("qtable: ") + e.what());
  }
}

inline json to_json(const WeightVector& theta) {
  return std::vector<double>(theta.data(), theta.data() + theta.size());
}

inline json to_json(const BoundReport& r) {
  json j = {{"e_p", r.e_p},   {"e_st", r.e_st},     {"e_sa", r.e_sa},   {"total", r.total},
            {"nu_min", r.nu_min}, {"c_p_hat", r.c_p_hat}, {"delta", r.delta}, {"n", r.n}};
  j["measured_error"] = r.measured_error ? json(*r.measured_error) : json(nullptr);
  return j;
}

inline json to_json(const IterationDiagnostics& d) {
  return {{"iteration", d.iteration},
          {"td_error", d.td_error},
          {"epsilon", d.epsilon},
          {"dataset_size", d.dataset_size},
          {"inner_iterations", d.inner_iterations},
          {"inner_converged", d.inner_converged},
          {"theta_change", d.theta_change}};
}

inline json to_json(const TrainReport& r) {
  json trace = json::array();
  for (const auto& t : r.theta_trace) trace.push_back(to_json(t));
  json diags = json::array();
  for (const auto& d : r.diagnostics) diags.push_back(to_json(d));
  json j = {{"converged", r.converged}, {"iterations", r.theta_trace.size()}, {"theta_trace", std::move(trace)},
            {"diagnostics", std::move(diags)}};
  j["theta_final"] = r.theta_trace.empty() ? json(nullptr) : to_json(r.theta_trace.back());
  return j;
}

/// iteration,theta_1..theta_d,td_error,epsilon,dataset_size,inner_iterations,theta_change
inline void write_theta_trace_csv(std::ostream& out, const TrainReport& r, int d) {
  out << "iteration";
  for (int i = 1; i <= d; ++i) out << ",theta_" << i;
  out << ",td_error,epsilon,dataset_size,inner_iterations,theta_change\n";
  for (std::size_t k = 0; k < r.theta_trace.size(); ++k) {
    const auto& diag = r.diagnostics[k];
    out << diag.iteration;
    for (Eigen::Index i = 0; i < r.theta_trace[k].size(); ++i) out << ',' << format_real(r.theta_trace[k][i]);
    out << ',' << format_real(diag.td_error) << ',' << format_real(diag.epsilon) << ',' << diag.dataset_size << ','
        << diag.inner_iterations << ',' << format_real(diag.theta_change) << '\n';
  }
}

}  // namespace mlspi

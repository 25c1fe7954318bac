#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "asep/core.hpp"
#include "asep/errors.hpp"
#include "asep/exact.hpp"
#include "asep/identities.hpp"
#include "asep/marginals.hpp"
#include "asep/moments.hpp"
#include "asep/oracles.hpp"

namespace asep::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "1.0.0";
inline constexpr const char* kLibraryVersion = "0.1.0";

/// Settings shared by every command; a config file fills the ones not given on
/// the command line.
struct Common {
  double tol = 1e-10;
  int max_nodes = 512;
  std::optional<double> radius;
  unsigned threads = 0;
  int max_particles = 5;
};

/// "0,1,3" -> {0, 1, 3}.
inline std::vector<Site> parse_sites(const std::string& s) {
  std::vector<Site> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) throw DomainError("empty entry in site list '" + s + "'");
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(tok, &used);
    } catch (const std::exception&) {
      throw DomainError("cannot parse site '" + tok + "'");
    }
    if (used != tok.size()) throw DomainError("cannot parse site '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw DomainError("site list is empty");
  return out;
}

/// "-5..10" -> {-5, ..., 10}.
inline std::vector<Site> parse_range(const std::string& s) {
  const auto dots = s.find("..", 1);
  if (dots == std::string::npos) throw DomainError("range must look like a..b, got '" + s + "'");
  const auto a = parse_sites(s.substr(0, dots)), b = parse_sites(s.substr(dots + 2));
  if (a.size() != 1 || b.size() != 1 || b[0] < a[0]) throw DomainError("bad range '" + s + "'");
  if (b[0] - a[0] > 100000) throw DomainError("range wider than 10^5 sites");
  std::vector<Site> v;
  for (Site x = a[0]; x <= b[0]; ++x) v.push_back(x);
  return v;
}

/// JSON text with every double written to 17 significant digits.
inline void dump17(const json& j, std::string& out, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string pad0(static_cast<std::size_t>(indent * depth), ' ');
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{";
      out += nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += std::string(",") + nl;
        first = false;
        out += pad + json(it.key()).dump() + (indent > 0 ? ": " : ":");
        dump17(it.value(), out, indent, depth + 1);
      }
      out += nl + pad0 + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[";
      out += nl;
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += std::string(",") + nl;
        out += pad;
        dump17(j[i], out, indent, depth + 1);
      }
      out += nl + pad0 + "]";
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out += buf;
      return;
    }
    default:
      out += j.dump();
  }
}

inline std::string dump17(const json& j, int indent = 2) {
  std::string s;
  dump17(j, s, indent, 0);
  return s;
}

inline json base_record(const std::string& command, json params) {
  json r;
  r["schema_version"] = kSchemaVersion;
  r["library_version"] = kLibraryVersion;
  r["command"] = command;
  r["params"] = std::move(params);
  r["status"] = "ok";
  return r;
}

inline json error_record(const std::string& command, json params, const char* kind, const std::string& message,
                         int exit_code) {
  json r = base_record(command, std::move(params));
  r["status"] = "error";
  r["error"] = {{"type", kind}, {"message", message}, {"exit_code", exit_code}};
  return r;
}

inline QuadOptions quad_from(const Common& c) {
  QuadOptions q;
  q.tol = c.tol;
  q.max_nodes = c.max_nodes;
  q.threads = c.threads;
  return q;
}

inline json common_json(const Common& c) {
  json j{{"tol", c.tol}, {"max_nodes", c.max_nodes}, {"threads", resolve_threads(c.threads)}};
  if (c.radius) j["radius"] = *c.radius;
  return j;
}

// ---------------------------------------------------------------- transition

struct TransitionArgs {
  std::vector<Site> y, x;
  double t = 0.0, p = 0.5;
  std::string method = "contour";  // contour | determinant | oracle
  std::string route = "auto";      // contour only: auto | direct | dual
  Common common;
};

inline json transition_params(const TransitionArgs& a) {
  json j{{"y", a.y}, {"x", a.x}, {"t", a.t}, {"p", a.p}, {"method", a.method}};
  if (a.method == "contour") j["route"] = a.route;
  j.update(common_json(a.common));
  return j;
}

inline Route parse_route(const std::string& s) {
  if (s == "auto") return Route::automatic;
  if (s == "direct") return Route::direct;
  if (s == "dual") return Route::dual;
  throw DomainError("route must be auto, direct or dual");
}

inline json cmd_transition(const TransitionArgs& a) {
  json rec = base_record("transition", transition_params(a));
  const TransitionQuery q{Configuration(a.y), Configuration(a.x), a.t, ModelParams::from_p(a.p)};
  q.validate();
  if (a.method == "contour") {
    TransitionOptions o;
    o.tol = a.common.tol;
    o.max_particles = a.common.max_particles;
    o.route = parse_route(a.route);
    o.quad = quad_from(a.common);
    const auto r = transition_probability(q, o);
    rec["value"] = r.value;
    rec["error_estimate"] = r.error_estimate;
    rec["imag"] = r.imag;
    rec["nodes_used"] = r.nodes_used;
    rec["radius"] = r.radius;
    rec["route"] = route_name(r.route);
  } else if (a.method == "determinant") {
    TransitionOptions o;
    o.tol = a.common.tol;
    o.quad = quad_from(a.common);
    const auto r = tasep_transition_determinant(q, o);
    rec["value"] = r.value;
    rec["error_estimate"] = r.error_estimate;
    rec["nodes_used"] = r.nodes_used;
    rec["radius"] = r.radius;
  } else if (a.method == "oracle") {
    UniformizationOptions o;
    o.tol = std::min(a.common.tol, 1e-12);
    const auto d = master_equation_uniformization(q.Y, q.t, q.params, o);
    rec["value"] = d.at(q.X);
    rec["error_estimate"] = d.tail_bound;
    rec["poisson_terms"] = d.poisson_terms;
    rec["states"] = d.prob.size();
  } else {
    throw DomainError("transition method must be contour, determinant or oracle");
  }
  return rec;
}

// ------------------------------------------------------------------ marginal

struct MarginalArgs {
  std::vector<Site> y;
  bool step = false;
  int m = 1;
  std::vector<Site> xs;
  double t = 0.0, p = 0.5;
  // small | large | tu | corollary | oracle | mc, plus the single-formula paths
  // first-small | first-large | second | cdf | series | tasep
  std::string method = "small";
  std::string route = "auto";
  long long runs = 100000;
  std::uint64_t seed = 1;
  double series_tol = 1e-8;
  Common common;
};

inline json marginal_params(const MarginalArgs& a) {
  json j;
  if (a.step)
    j["step"] = true;
  else
    j["y"] = a.y;
  j["m"] = a.m;
  j["x"] = a.xs;
  j["t"] = a.t;
  j["p"] = a.p;
  j["method"] = a.method;
  if (a.method == "small" || a.method == "large" || a.method == "tu") j["route"] = a.route;
  if (a.method == "mc") {
    j["runs"] = a.runs;
    j["seed"] = a.seed;
  }
  if (a.method == "corollary" || a.method == "series") j["series_tol"] = a.series_tol;
  j.update(common_json(a.common));
  return j;
}

inline json result_row(Site x, const MarginalResult& r) {
  json row{{"x", x}, {"value", r.value}, {"error_estimate", r.error_estimate}, {"nodes_used", r.nodes_used}};
  if (r.imag != 0.0) row["imag"] = r.imag;
  if (r.radius > 0.0) row["radius"] = r.radius;
  if (r.terms > 0) row["terms"] = r.terms;
  row["route"] = route_name(r.route);
  if (r.truncation_bound > 0.0 || r.sigma_reached > 0) {
    row["truncation_bound"] = r.truncation_bound;
    row["truncation_estimate"] = r.truncation_estimate;
    row["cutoff"] = r.sigma_reached;
    row["surrogate_bound"] = r.surrogate_bound;
  }
  return row;
}

inline json cmd_marginal(const MarginalArgs& a) {
  json rec = base_record("marginal", marginal_params(a));
  if (a.xs.empty()) throw DomainError("marginal needs --x or --x-range");
  const auto mp = ModelParams::from_p(a.p);
  if (!(a.t >= 0.0) || !std::isfinite(a.t)) throw DomainError("t must be finite and nonnegative");
  if (a.m < 1) throw DomainError("particle index m must be >= 1");
  json rows = json::array();
  const std::string& me = a.method;

  if (a.step) {
    SeriesControl c;
    c.tol = a.series_tol;
    c.quad = quad_from(a.common);
    if (me == "corollary") {
      for (Site x : a.xs) rows.push_back(result_row(x, step_ic_mth_particle(a.m, x, a.t, mp, c)));
    } else if (me == "tasep") {
      for (Site x : a.xs) rows.push_back(result_row(x, tasep_left_mth_pmf(a.m, x, a.t, mp, std::min(a.common.tol, 1e-12))));
    } else if (me != "mc") {
      throw DomainError("with --step the method must be corollary, tasep or mc");
    }
  }
  const Configuration Y = a.step ? step_window(a.m, a.t) : Configuration(a.y);
  if (!a.step && a.m > static_cast<int>(Y.size()))
    throw DomainError("particle index m must lie in 1..N (got " + std::to_string(a.m) + ")");

  if (me == "mc") {
    if (a.runs < 1 || a.runs > 100'000'000) throw DomainError("runs must lie in 1..10^8");
    const auto b = gillespie_simulate(Y, a.t, mp, static_cast<int>(a.runs), a.seed, a.common.threads);
    const auto counts = b.marginal_counts(a.m);
    const double n = static_cast<double>(a.runs);
    for (Site x : a.xs) {
      const auto it = counts.find(x);
      const double f = it == counts.end() ? 0.0 : static_cast<double>(it->second) / n;
      rows.push_back({{"x", x}, {"value", f}, {"error_estimate", std::sqrt(f * (1.0 - f) / n)}});
    }
    rec["seed"] = a.seed;
    if (a.step) rec["window"] = static_cast<long long>(Y.size());
  } else if (!a.step) {
    MarginalOptions o;
    o.tol = a.common.tol;
    o.radius_override = a.common.radius;
    o.quad = quad_from(a.common);
    const Route route = parse_route(a.route);
    std::vector<MarginalResult> res;
    if (me == "oracle") {
      UniformizationOptions uo;
      uo.tol = std::min(a.common.tol, 1e-12);
      const auto d = marginal_from_distribution(master_equation_uniformization(Y, a.t, mp, uo), a.m);
      for (Site x : a.xs) rows.push_back({{"x", x}, {"value", d.at(x)}, {"error_estimate", d.tail_bound}});
    } else if (me == "series") {
      SeriesControl c;
      c.tol = a.series_tol;
      c.quad = quad_from(a.common);
      for (Site x : a.xs) rows.push_back(result_row(x, mth_particle_infinite(Y, a.m, x, a.t, mp, c)));
    } else {
      MarginalEngine eng(Y, a.t, mp, o);
      if (me == "small")
        res = eng.mth_small(a.m, a.xs, route);
      else if (me == "large")
        res = eng.mth_large(a.m, a.xs, route);
      else if (me == "tu")
        res = eng.mth_tu(a.m, a.xs, route);
      else if (me == "first-small" || me == "first-large" || me == "cdf") {
        if (a.m != 1) throw DomainError(me + " is for m = 1");
        if (me == "first-small")
          res = eng.first_small(a.xs);
        else if (me == "first-large")
          res = eng.first_large(a.xs);
        else
          for (Site x : a.xs) res.push_back(first_particle_cdf(Y, x, a.t, mp, o));
      } else if (me == "second") {
        if (a.m != 2) throw DomainError("second is for m = 2");
        res = eng.second(a.xs);
      } else {
        throw DomainError("unknown marginal method '" + me + "'");
      }
      for (std::size_t i = 0; i < res.size(); ++i) rows.push_back(result_row(a.xs[i], res[i]));
    }
  }
  rec["results"] = rows;
  if (rows.size() == 1) {
    rec["value"] = rows[0]["value"];
    rec["error_estimate"] = rows[0]["error_estimate"];
  }
  return rec;
}

/// x,value,error_estimate rows for plotting.
inline std::string marginal_csv(const json& rec) {
  std::string s = "x,value,error_estimate\n";
  char buf[96];
  for (const auto& row : rec.at("results")) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g\n", row.at("x").get<long long>(), row.at("value").get<double>(),
                  row.at("error_estimate").get<double>());
    s += buf;
  }
  return s;
}

// -------------------------------------------------------------------- expect

struct ExpectArgs {
  std::vector<Site> y;
  double t = 0.0, p = 0.5;
  Common common;
};

inline json cmd_expect(const ExpectArgs& a) {
  json params{{"y", a.y}, {"t", a.t}, {"p", a.p}};
  params.update(common_json(a.common));
  json rec = base_record("expect", params);
  MomentOptions o;
  o.tol = a.common.tol;
  o.quad = quad_from(a.common);
  const auto r = expected_first_particle(Configuration(a.y), a.t, ModelParams::from_p(a.p), o);
  rec["value"] = r.value;
  rec["error_estimate"] = r.error_estimate;
  rec["psi"] = r.psi;
  return rec;
}

// ------------------------------------------------------------------ simulate

struct SimulateArgs {
  std::vector<Site> y;
  bool step = false;
  int m = 1;  // with --step: the window is sized for this particle
  double t = 0.0, p = 0.5;
  long long runs = 10000;
  std::uint64_t seed = 1;
  bool histogram = false;
  Common common;
};

inline json cmd_simulate(const SimulateArgs& a) {
  json params;
  if (a.step)
    params["step"] = true;
  else
    params["y"] = a.y;
  params["m"] = a.m;
  params["t"] = a.t;
  params["p"] = a.p;
  params["runs"] = a.runs;
  params["seed"] = a.seed;
  params["threads"] = resolve_threads(a.common.threads);
  json rec = base_record("simulate", params);
  if (a.runs < 1 || a.runs > 100'000'000) throw DomainError("runs must lie in 1..10^8");
  const auto mp = ModelParams::from_p(a.p);
  const Configuration Y = a.step ? step_window(a.m, a.t) : Configuration(a.y);
  const auto b = gillespie_simulate(Y, a.t, mp, static_cast<int>(a.runs), a.seed, a.common.threads);
  const int n = a.step ? std::min<int>(a.m, b.n_particles) : b.n_particles;
  json means = json::array(), errs = json::array();
  for (int i = 1; i <= n; ++i) {
    NeumaierSum s, s2;
    for (int r = 0; r < b.n_runs; ++r) {
      const double v = static_cast<double>(b.position(r, i));
      s += v;
      s2 += v * v;
    }
    const double mean = s.value() / b.n_runs;
    const double var = std::max(0.0, s2.value() / b.n_runs - mean * mean);
    means.push_back(mean);
    errs.push_back(std::sqrt(var / std::max(1, b.n_runs - 1)));
  }
  rec["value"] = means;
  rec["error_estimate"] = errs;
  rec["seed"] = a.seed;
  if (a.step) rec["window"] = static_cast<long long>(Y.size());
  if (a.histogram) {
    json h = json::object();
    for (const auto& [x, c] : b.marginal_counts(a.m)) h[std::to_string(x)] = c;
    rec["histogram"] = h;
  }
  return rec;
}

// -------------------------------------------------------------------- verify

struct VerifyArgs {
  std::string suite = "identities";  // identities | consistency | oracle
  std::uint64_t seed = 20240601;
  Common common;
};

inline json check_row(const std::string& name, double err, double tol, json extra = json::object()) {
  json row{{"name", name}, {"max_error", err}, {"tol", tol}, {"passed", err < tol}};
  row.update(extra);
  return row;
}

inline json identity_row(const IdentityReport& r) {
  json row{{"name", r.name}, {"n", r.n}, {"p", r.params.p()}, {"max_error", r.max_rel_error}, {"tol", r.tol},
           {"passed", r.passed}, {"samples", r.samples}, {"resampled", r.resampled}, {"seed", r.seed}};
  if (r.m >= 0) row["m"] = r.m;
  if (r.name == "perm_identity_dual") row["route_agreement"] = r.route_agreement;
  return row;
}

inline json suite_identities(const VerifyArgs& a) {
  json checks = json::array();
  IdentityOptions o;
  o.seed = a.seed;
  for (double p : {0.3, 0.5, 0.7, 0.9}) {
    const auto mp = ModelParams::from_p(p);
    for (int n = 1; n <= 7; ++n) {
      checks.push_back(identity_row(check_perm_identity(n, mp, o)));
      checks.push_back(identity_row(check_perm_identity_dual(n, mp, o)));
    }
    for (int n = 1; n <= 6; ++n)
      for (int m = 0; m <= n; ++m) {
        if (m < n) checks.push_back(identity_row(check_subset_identity(n, m, mp, o)));
        checks.push_back(identity_row(check_simple_subset_identity(n, m, mp, o)));
      }
    checks.push_back(identity_row(check_bracket_recursion(30, mp)));
    IdentityOptions ob = o;
    ob.samples = 20;
    ob.tol = 1e-12;
    for (int n = 2; n <= 5; ++n) checks.push_back(identity_row(check_bethe_boundary(n, mp, ob)));
  }
  return checks;
}

/// The small, large and (T,U) m-particle paths against each other, plus the
/// m = 1 and m = 2 specializations.
inline json suite_consistency(const VerifyArgs& a) {
  json checks = json::array();
  MarginalOptions o;
  o.tol = a.common.tol;
  o.quad = quad_from(a.common);
  const Configuration Y{0, 2, 5};
  std::vector<Site> xs;
  for (Site x = -4; x <= 9; ++x) xs.push_back(x);
  for (double p : {0.3, 0.7}) {
    const auto mp = ModelParams::from_p(p);
    MarginalEngine eng(Y, 1.0, mp, o);
    for (int m = 1; m <= 3; ++m) {
      const auto s = eng.mth_small(m, xs), l = eng.mth_large(m, xs), tu = eng.mth_tu(m, xs);
      double d_sl = 0.0, d_st = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        d_sl = std::max(d_sl, std::abs(s[i].value - l[i].value));
        d_st = std::max(d_st, std::abs(s[i].value - tu[i].value));
      }
      const json ctx{{"p", p}, {"m", m}};
      checks.push_back(check_row("small_vs_large", d_sl, 1e-8, ctx));
      checks.push_back(check_row("small_vs_tu", d_st, 1e-8, ctx));
    }
    // The first and second particle formulas have no reflected route; left of
    // y_1 their small contour amplifies roundoff, so they are compared near y_m.
    std::vector<Site> near1{-1, 0, 1, 2, 3, 4}, near2{-1, 0, 1, 2, 3, 4, 5};
    const auto f1 = eng.first_small(near1), f2 = eng.first_large(near1), g1 = eng.mth_small(1, near1);
    const auto sec = eng.second(near2), g2 = eng.mth_small(2, near2);
    double d1 = 0.0, d12 = 0.0, d2 = 0.0;
    for (std::size_t i = 0; i < near1.size(); ++i) {
      d1 = std::max(d1, std::abs(f1[i].value - f2[i].value));
      d12 = std::max(d12, std::abs(f1[i].value - g1[i].value));
    }
    for (std::size_t i = 0; i < near2.size(); ++i) d2 = std::max(d2, std::abs(sec[i].value - g2[i].value));
    checks.push_back(check_row("first_small_vs_first_large", d1, 1e-9, {{"p", p}}));
    checks.push_back(check_row("first_small_vs_mth_small", d12, 1e-8, {{"p", p}}));
    checks.push_back(check_row("second_vs_mth_small", d2, 1e-9, {{"p", p}}));
  }
  return checks;
}

/// Contour values against the uniformization oracle.
inline json suite_oracle(const VerifyArgs& a) {
  json checks = json::array();
  for (double p : {0.3, 0.7}) {
    const auto mp = ModelParams::from_p(p);
    const Configuration Y{0, 1, 3};
    const double t = 0.5;
    UniformizationOptions uo;
    const auto d = master_equation_uniformization(Y, t, mp, uo);
    std::vector<Configuration> xs;
    for (const auto& [x, v] : d.prob)
      if (v > 1e-4) xs.push_back(x);
    TransitionOptions to;
    to.tol = a.common.tol;
    to.quad = quad_from(a.common);
    const auto res = transition_probabilities(Y, xs, t, mp, to);
    double dt = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) dt = std::max(dt, std::abs(res[i].value - d.at(xs[i])));
    checks.push_back(check_row("transition_vs_uniformization", dt, 1e-8, {{"p", p}, {"configurations", xs.size()}}));

    MarginalOptions o;
    o.tol = a.common.tol;
    MarginalEngine eng(Y, t, mp, o);
    std::vector<Site> sites;
    for (Site x = -3; x <= 6; ++x) sites.push_back(x);
    for (int m = 1; m <= 3; ++m) {
      const auto md = marginal_from_distribution(d, m);
      const auto s = eng.mth_small(m, sites);
      double dm = 0.0;
      for (std::size_t i = 0; i < sites.size(); ++i) dm = std::max(dm, std::abs(s[i].value - md.at(sites[i])));
      checks.push_back(check_row("marginal_vs_uniformization", dm, 1e-7, {{"p", p}, {"m", m}}));
    }
  }
  return checks;
}

inline json cmd_verify(const VerifyArgs& a) {
  json params{{"suite", a.suite}, {"seed", a.seed}};
  params.update(common_json(a.common));
  json rec = base_record("verify", params);
  json checks;
  if (a.suite == "identities")
    checks = suite_identities(a);
  else if (a.suite == "consistency")
    checks = suite_consistency(a);
  else if (a.suite == "oracle")
    checks = suite_oracle(a);
  else
    throw DomainError("suite must be identities, consistency or oracle");
  int failed = 0;
  for (const auto& c : checks) failed += c.at("passed").get<bool>() ? 0 : 1;
  rec["checks"] = checks;
  rec["summary"] = {{"total", checks.size()}, {"passed", static_cast<int>(checks.size()) - failed}, {"failed", failed}};
  if (a.suite == "identities") rec["seed"] = a.seed;
  return rec;
}

/// Runs a command, stamping wall time and turning library errors into error
/// records. Returns the exit code.
template <class Fn>
int run_command(const std::string& command, const json& params, Fn&& fn, json& out) {
  const auto t0 = std::chrono::steady_clock::now();
  int code = 0;
  try {
    out = fn();
    if (out.contains("summary") && out["summary"]["failed"].get<int>() > 0) code = 4;
  } catch (const Error& e) {
    out = error_record(command, params, e.kind(), e.what(), e.exit_code());
    code = e.exit_code();
  } catch (const std::exception& e) {
    out = error_record(command, params, "internal_error", e.what(), 4);
    code = 4;
  }
  out["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return code;
}

}  // namespace asep::cli

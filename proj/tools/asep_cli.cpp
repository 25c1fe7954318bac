#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "asep/cli.hpp"

using asep::cli::json;

namespace {

void add_common(CLI::App* sub, asep::cli::Common& c, bool radius) {
  sub->add_option("--tol", c.tol, "quadrature tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--max-nodes", c.max_nodes, "node cap per circle (power of two)")->check(CLI::PositiveNumber);
  if (radius) sub->add_option("--radius", c.radius, "override the contour radius");
}

std::vector<asep::Site> sites_or_empty(const std::string& s) {
  return s.empty() ? std::vector<asep::Site>{} : asep::cli::parse_sites(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ASEP contour-integral engine"};
  app.set_config("--config", "", "INI/TOML file with default option values; flags on the command line win");
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = 0;
  bool csv = false;
  int indent = 2;
  app.add_option("--threads", threads, "worker cap (falls back to ASEP_THREADS, then 1)");
  app.add_flag("--csv", csv, "write site,value,error rows for marginal sweeps");
  app.add_option("--indent", indent, "JSON indent; 0 for one line")->check(CLI::Range(0, 8));

  asep::cli::TransitionArgs ta;
  std::string t_y, t_x;
  auto* tr = app.add_subcommand("transition", "P_Y(X; t)");
  tr->add_option("--y", t_y, "initial sites, comma separated")->required();
  tr->add_option("--x", t_x, "final sites, comma separated")->required();
  tr->add_option("--t", ta.t, "time")->required();
  tr->add_option("--p", ta.p, "right hop rate")->required();
  tr->add_option("--method", ta.method)->check(CLI::IsMember({"contour", "determinant", "oracle"}));
  tr->add_option("--route", ta.route)->check(CLI::IsMember({"auto", "direct", "dual"}));
  tr->add_option("--max-particles", ta.common.max_particles, "N cap for the contour sum");
  add_common(tr, ta.common, false);

  asep::cli::MarginalArgs ma;
  std::string m_y, m_x, m_range;
  auto* mg = app.add_subcommand("marginal", "P(x_m(t) = x)");
  auto* my = mg->add_option("--y", m_y, "initial sites, comma separated");
  auto* ms = mg->add_flag("--step", ma.step, "step initial data on the positive integers");
  my->excludes(ms);
  mg->add_option("--m", ma.m, "particle index")->required();
  auto* mx = mg->add_option("--x", m_x, "site");
  auto* mr = mg->add_option("--x-range", m_range, "sites a..b");
  mx->excludes(mr);
  mg->add_option("--t", ma.t, "time")->required();
  mg->add_option("--p", ma.p, "right hop rate")->required();
  mg->add_option("--method", ma.method)
      ->check(CLI::IsMember({"small", "large", "tu", "corollary", "oracle", "mc", "first-small", "first-large", "second",
                             "cdf", "series", "tasep"}));
  mg->add_option("--route", ma.route)->check(CLI::IsMember({"auto", "direct", "dual"}));
  mg->add_option("--runs", ma.runs, "Monte Carlo runs");
  mg->add_option("--seed", ma.seed, "Monte Carlo seed");
  mg->add_option("--series-tol", ma.series_tol, "truncation tolerance for the infinite sums");
  add_common(mg, ma.common, true);

  asep::cli::ExpectArgs ea;
  std::string e_y;
  auto* ex = app.add_subcommand("expect", "E x_1(t)");
  ex->add_option("--y", e_y, "initial sites")->required();
  ex->add_option("--t", ea.t)->required();
  ex->add_option("--p", ea.p)->required();
  add_common(ex, ea.common, false);

  asep::cli::VerifyArgs va;
  auto* ve = app.add_subcommand("verify", "run a verification suite");
  ve->add_option("--suite", va.suite)->check(CLI::IsMember({"identities", "consistency", "oracle"}));
  ve->add_option("--seed", va.seed, "sampler seed for the identity suite");
  add_common(ve, va.common, false);

  asep::cli::SimulateArgs sa;
  std::string s_y;
  auto* si = app.add_subcommand("simulate", "Gillespie runs");
  auto* sy = si->add_option("--y", s_y, "initial sites");
  auto* ss = si->add_flag("--step", sa.step, "step initial data, windowed for particle --m");
  sy->excludes(ss);
  si->add_option("--m", sa.m, "particle for the histogram and the step window");
  si->add_option("--t", sa.t)->required();
  si->add_option("--p", sa.p)->required();
  si->add_option("--runs", sa.runs);
  si->add_option("--seed", sa.seed);
  si->add_flag("--histogram", sa.histogram, "include the x_m histogram");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  json out;
  int code = 0;
  const auto run = [&](const std::string& name, auto&& params, auto&& fn) {
    code = asep::cli::run_command(name, params, fn, out);
  };
  try {
    if (*tr) {
      ta.common.threads = threads;
      ta.y = asep::cli::parse_sites(t_y);
      ta.x = asep::cli::parse_sites(t_x);
      run("transition", asep::cli::transition_params(ta), [&] { return asep::cli::cmd_transition(ta); });
    } else if (*mg) {
      ma.common.threads = threads;
      if (!ma.step) {
        if (m_y.empty()) throw asep::DomainError("marginal needs --y or --step");
        ma.y = asep::cli::parse_sites(m_y);
      }
      if (!m_range.empty())
        ma.xs = asep::cli::parse_range(m_range);
      else
        ma.xs = sites_or_empty(m_x);
      if (ma.step && ma.method == "small") ma.method = "corollary";
      run("marginal", asep::cli::marginal_params(ma), [&] { return asep::cli::cmd_marginal(ma); });
    } else if (*ex) {
      ea.common.threads = threads;
      ea.y = asep::cli::parse_sites(e_y);
      run("expect", json{{"y", ea.y}, {"t", ea.t}, {"p", ea.p}}, [&] { return asep::cli::cmd_expect(ea); });
    } else if (*ve) {
      va.common.threads = threads;
      run("verify", json{{"suite", va.suite}}, [&] { return asep::cli::cmd_verify(va); });
      if (out.contains("checks"))
        for (const auto& c : out["checks"])
          std::cerr << (c["passed"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << ' '
                    << asep::cli::dump17(c, 0) << '\n';
    } else if (*si) {
      sa.common.threads = threads;
      if (!sa.step) {
        if (s_y.empty()) throw asep::DomainError("simulate needs --y or --step");
        sa.y = asep::cli::parse_sites(s_y);
      }
      run("simulate", json{{"t", sa.t}, {"p", sa.p}}, [&] { return asep::cli::cmd_simulate(sa); });
    }
  } catch (const asep::Error& e) {
    out = asep::cli::error_record(app.get_subcommands().front()->get_name(), json::object(), e.kind(), e.what(),
                                  e.exit_code());
    code = e.exit_code();
  }

  if (csv && code == 0 && out.contains("results"))
    std::cout << asep::cli::marginal_csv(out);
  else
    std::cout << asep::cli::dump17(out, indent) << '\n';
  return code;
}

#include <gtest/gtest.h>

#include "asep/cli.hpp"

using namespace asep;
using asep::cli::json;

TEST(Cli, ParsesSitesAndRanges) {
  EXPECT_EQ(cli::parse_sites("0,-2,5"), (std::vector<Site>{0, -2, 5}));
  EXPECT_EQ(cli::parse_range("-2..1"), (std::vector<Site>{-2, -1, 0, 1}));
  EXPECT_THROW(cli::parse_sites("1,,2"), DomainError);
  EXPECT_THROW(cli::parse_sites("1,a"), DomainError);
  EXPECT_THROW(cli::parse_range("3..1"), DomainError);
  EXPECT_THROW(cli::parse_range("3"), DomainError);
}

TEST(Cli, FloatsUseSeventeenDigits) {
  json j{{"a", 0.1}, {"b", 1.0}, {"c", std::vector<double>{2.5}}, {"n", 3}};
  const auto s = cli::dump17(j, 0);
  EXPECT_NE(s.find("0.10000000000000001"), std::string::npos);
  EXPECT_NE(s.find("\"n\":3"), std::string::npos);
  EXPECT_EQ(json::parse(s)["a"].get<double>(), 0.1);
}

TEST(Cli, TransitionAtTimeZero) {
  cli::TransitionArgs a;
  a.y = {0, 1};
  a.x = {0, 1};
  a.t = 0.0;
  const auto r = cli::cmd_transition(a);
  EXPECT_NEAR(r["value"].get<double>(), 1.0, 1e-12);
  EXPECT_EQ(r["schema_version"], cli::kSchemaVersion);
}

TEST(Cli, ContourAgreesWithOracle) {
  cli::TransitionArgs a;
  a.y = {0, 1};
  a.x = {1, 3};
  a.t = 1.0;
  a.p = 0.6;
  const double c = cli::cmd_transition(a)["value"].get<double>();
  a.method = "oracle";
  EXPECT_NEAR(c, cli::cmd_transition(a)["value"].get<double>(), 1e-8);
}

TEST(Cli, ErrorsMapToExitCodes) {
  cli::TransitionArgs a;
  a.y = {0, 1};
  a.x = {0, 1};
  a.t = 1.0;
  a.p = 0.0;
  a.route = "direct";
  json out;
  const int code =
      cli::run_command("transition", cli::transition_params(a), [&] { return cli::cmd_transition(a); }, out);
  EXPECT_EQ(code, 2);
  EXPECT_EQ(out["status"], "error");
  EXPECT_EQ(out["error"]["message"], "small-contour requires p>0; use duality");

  cli::MarginalArgs m;
  m.y = {0, 1};
  m.m = 1;
  m.xs = {0};
  m.t = 1.0;
  m.method = "small";
  m.common.max_nodes = 8;  // below the starting grid
  EXPECT_EQ(cli::run_command("marginal", json::object(), [&] { return cli::cmd_marginal(m); }, out), 3);
  EXPECT_EQ(out["error"]["exit_code"], 3);
  m.common.max_nodes = 512;
  m.common.tol = 1e-300;
  m.route = "direct";
  m.t = 3.0;
  const int c3 = cli::run_command("marginal", json::object(), [&] { return cli::cmd_marginal(m); }, out);
  EXPECT_TRUE(c3 == 0 || c3 == 3);  // either the noise floor is met or the budget stops it
}

TEST(Cli, StepMarginalAtTimeZero) {
  cli::MarginalArgs m;
  m.step = true;
  m.m = 1;
  m.xs = {1};
  m.method = "corollary";
  EXPECT_NEAR(cli::cmd_marginal(m)["value"].get<double>(), 1.0, 1e-8);
}

TEST(Cli, SweepSmallVersusLarge) {
  cli::MarginalArgs m;
  m.y = {0, 2, 5};
  m.m = 2;
  m.t = 1.0;
  m.p = 0.7;
  m.xs = cli::parse_range("-5..10");
  const auto s = cli::cmd_marginal(m);
  m.method = "large";
  const auto l = cli::cmd_marginal(m);
  double worst = 0.0;
  for (std::size_t i = 0; i < m.xs.size(); ++i)
    worst = std::max(worst, std::abs(s["results"][i]["value"].get<double>() - l["results"][i]["value"].get<double>()));
  EXPECT_LT(worst, 1e-8);
  const auto csv = cli::marginal_csv(s);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 16);
}

TEST(Cli, MonteCarloIsDeterministic) {
  cli::MarginalArgs m;
  m.y = {0, 1};
  m.m = 1;
  m.t = 1.0;
  m.xs = {-1, 0, 1};
  m.method = "mc";
  m.runs = 20000;
  m.seed = 7;
  EXPECT_EQ(cli::dump17(cli::cmd_marginal(m)), cli::dump17(cli::cmd_marginal(m)));
}

TEST(Cli, ExpectDrift) {
  cli::ExpectArgs e;
  e.y = {0};
  e.t = 2.0;
  e.p = 0.8;
  EXPECT_NEAR(cli::cmd_expect(e)["value"].get<double>(), 1.2, 1e-15);
}

TEST(Cli, VerifyIdentitiesPasses) {
  cli::VerifyArgs v;
  json out;
  EXPECT_EQ(cli::run_command("verify", json::object(), [&] { return cli::cmd_verify(v); }, out), 0);
  EXPECT_EQ(out["summary"]["failed"], 0);
  EXPECT_GT(out["summary"]["total"].get<int>(), 100);
}

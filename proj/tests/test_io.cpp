#include <cmath>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "fractal_sl/io.hpp"

using namespace fsl;

TEST(Numbers, ExactStrings) {
  EXPECT_DOUBLE_EQ(parse_exact("1/3"), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(parse_exact("-2/5"), -0.4);
  EXPECT_DOUBLE_EQ(parse_exact("0.25"), 0.25);
  EXPECT_THROW(parse_exact("ln2"), ConfigError);
  EXPECT_THROW(parse_exact("1/0"), ConfigError);
  EXPECT_THROW(parse_exact(""), ConfigError);
}

TEST(Numbers, SeventeenDigitsRoundTrip) {
  for (double v : {1.0 / 3.0, 14.435187654321, -2783.8718905380747, 1e-300, 6.02214076e23}) {
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
}

TEST(Config, ExplicitLists) {
  const auto j = nlohmann::json::parse(R"({"a":["1/3","1/3","1/3"],"d":[0.5,0,0.5],"beta":[0,"1/2","1/2"]})");
  const auto p = params_from_json(j);
  EXPECT_NEAR(p.mean(), 0.5, 1e-15);
}

TEST(Config, Builtins) {
  EXPECT_EQ(params_from_json(nlohmann::json::parse(R"({"builtin":"cantor"})")).size(), 3u);
  const auto t = params_from_json(nlohmann::json::parse(R"({"builtin":"tilde_P","params":["1/5"]})"));
  EXPECT_NEAR(t.d()[1], -0.2, 1e-15);
  EXPECT_NEAR(parse_builtin_spec("P_a_delta:1/4,0.1").d()[1], -0.2, 1e-15);
  EXPECT_THROW(parse_builtin_spec("nope"), ConfigError);
  EXPECT_THROW(parse_builtin_spec("tilde_P"), ConfigError);
}

TEST(Config, FieldDiagnostics) {
  try {
    params_from_json(nlohmann::json::parse(R"({"a":[0.5,"x"],"d":[0.5,0.5],"beta":[0,0.5]})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("a[1]"), std::string::npos);
  }
  try {
    params_from_json(nlohmann::json::parse(R"({"a":[0.5,0.5],"beta":[0,0.5]})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'d'"), std::string::npos);
  }
  EXPECT_THROW(params_from_json(nlohmann::json::parse(R"({"a":[0.5,0.5],"d":[2,2],"beta":[0,0]})")),
               ConfigError);
}

TEST(Config, SyntaxErrorLineColumn) {
  try {
    parse_json_text("{\n  \"a\": [1,\n  ]\n}", "cfg.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("cfg.json:3:"), std::string::npos) << e.what();
  }
}

TEST(Config, Renewal) {
  const auto prob = renewal_from_json(nlohmann::json::parse(R"({"u":["1/2"],"v":[0.5],"x":[1],"x2":[0]})"));
  EXPECT_TRUE(prob.coupled);
  EXPECT_EQ(prob.u[0], 0.5);
  EXPECT_EQ(prob.x1.entries.size(), 1u);
  const auto scalar = renewal_from_json(nlohmann::json::parse(R"({"u":[0.5,0.5],"x":[1]})"));
  EXPECT_FALSE(scalar.coupled);
  EXPECT_THROW(renewal_from_json(nlohmann::json::parse(R"({"x":[1]})")), ConfigError);
}

TEST(Csv, SpectrumRoundTrip) {
  EigenOptions opt;
  opt.count = 5;
  opt.depth = 6;
  std::vector<SpectrumReport> reps{eigenvalues(hat_p(), opt)};
  opt.side = Side::minus;
  opt.count = 2;
  reps.push_back(eigenvalues(hat_p(), opt));
  std::ostringstream out;
  write_spectrum_csv(out, reps);
  EXPECT_EQ(out.str().rfind("# fractal-sl v1\n", 0), 0u);
  std::istringstream in(out.str());
  const auto back = read_spectrum_csv(in);
  ASSERT_EQ(back.size(), 2u);
  for (const auto& orig : reps) {
    const auto& got = back[orig.side == Side::plus ? 0 : 1];
    EXPECT_EQ(got.side, orig.side);
    EXPECT_EQ(got.depth, orig.depth);
    EXPECT_EQ(got.coverage, orig.coverage);
    ASSERT_EQ(got.eigenvalues.size(), orig.eigenvalues.size());
    for (std::size_t i = 0; i < got.eigenvalues.size(); ++i) {
      EXPECT_EQ(got.eigenvalues[i].lambda, orig.eigenvalues[i].lambda);
      EXPECT_EQ(got.eigenvalues[i].depth_shift_rel, orig.eigenvalues[i].depth_shift_rel);
    }
  }
  std::ostringstream again;
  write_spectrum_csv(again, back);
  EXPECT_EQ(again.str(), out.str());
}

TEST(Csv, RejectsUnversioned) {
  std::istringstream in("n,lambda,side,bracket_rel_width,depth_shift_rel\n1,2,+,0,0\n");
  EXPECT_THROW(read_spectrum_csv(in), ConfigError);
}

TEST(Csv, RenewalColumns) {
  const auto sol = solve_coupled(RenewalSystem::coupled({0.5}, {0.5}), unit_impulse(), {}, 2);
  std::ostringstream out;
  write_renewal_csv(out, sol);
  EXPECT_NE(out.str().find("n,z1,z2,limit\n"), std::string::npos);
  EXPECT_NE(out.str().find("\n1,0.5,0.5,0.5\n"), std::string::npos);
}

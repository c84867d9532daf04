#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "nehari/cli/checks.hpp"
#include "nehari/cli/commands.hpp"
#include "nehari/cli/config.hpp"
#include "nehari/cli/models.hpp"
#include "nehari/cli/report.hpp"
#include "nehari/error.hpp"

namespace fs = std::filesystem;
using namespace nehari;
using namespace nehari::cli;
using nlohmann::json;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "<no error>";
}

// Scratch directory unique to the running test.
fs::path scratch() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  auto dir = fs::temp_directory_path() /
             ("nehari_" + std::string(info->test_suite_name()) + "_" + info->name() + "_" +
              std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write(const fs::path& dir, const std::string& name, const std::string& text) {
  std::ofstream(dir / name) << text;
  return dir / name;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cmd(const std::string& cmd, RunOptions opts) {
  std::ostringstream out, err;
  const int code = run(cmd, opts, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(ConfigIni, SectionsCommentsAndTypes) {
  const auto cfg = Config::parse_ini(
      "# header\n[problem]\nkind = semilinear_cc  ; trailing\nq = 1.5\n\n[solve]\ncontinuity = yes\n"
      "list = 0.25, 0.5,0.75\n",
      "a.ini");
  EXPECT_EQ(cfg.get_string("problem", "kind"), "semilinear_cc");
  EXPECT_DOUBLE_EQ(cfg.get_double("problem", "q"), 1.5);
  EXPECT_TRUE(cfg.get_bool("solve", "continuity"));
  EXPECT_EQ(cfg.get_doubles("solve", "list"), (std::vector<double>{0.25, 0.5, 0.75}));
  EXPECT_EQ(cfg.get_int("solve", "missing", 7), 7);
  EXPECT_TRUE(cfg.has_section("solve"));
  EXPECT_FALSE(cfg.has("problem", "r"));
}

TEST(ConfigIni, ErrorsPointAtTheLine) {
  EXPECT_EQ(error_of([] { Config::parse_ini("[a]\nx = 1\nx = 2\n", "f.ini"); }).rfind("f.ini:3:", 0), 0u);
  EXPECT_EQ(error_of([] { Config::parse_ini("x = 1\n", "f.ini"); }).rfind("f.ini:1:", 0), 0u);
  EXPECT_EQ(error_of([] { Config::parse_ini("[a]\n[a]\n", "f.ini"); }).rfind("f.ini:2:", 0), 0u);
  EXPECT_EQ(error_of([] { Config::parse_ini("[a\n", "f.ini"); }).rfind("f.ini:1:", 0), 0u);
  EXPECT_EQ(error_of([] { Config::parse_ini("[a]\njunk\n", "f.ini"); }).rfind("f.ini:2:", 0), 0u);
  const auto cfg = Config::parse_ini("[a]\n\nn = seven\n", "f.ini");
  EXPECT_EQ(error_of([&] { cfg.get_int("a", "n"); }).rfind("f.ini:3:", 0), 0u);
  EXPECT_EQ(error_of([&] { cfg.get_double("a", "n"); }).rfind("f.ini:3:", 0), 0u);
  EXPECT_NE(error_of([&] { cfg.get_double("a", "absent"); }).find("f.ini:1:"), std::string::npos);
}

TEST(ConfigIni, UnknownKeysAndSections) {
  const auto cfg = Config::parse_ini("[a]\nx = 1\ny = 2\n[b]\nz = 3\n", "f.ini");
  EXPECT_EQ(error_of([&] { cfg.require_known({{"a", {"x", "y"}}}); }).rfind("f.ini:4:", 0), 0u);
  EXPECT_EQ(error_of([&] { cfg.require_known({{"a", {"x"}}, {"b", {"z"}}}); }).rfind("f.ini:3:", 0), 0u);
  EXPECT_NO_THROW(cfg.require_known({{"a", {"x", "y"}}, {"b", {"z"}}}));
}

TEST(ConfigJson, ValuesAndLines) {
  const std::string text =
      "{\n  \"problem\": {\"kind\": \"pq_laplacian\", \"p\": 3},\n  \"prescribed\": {\n    \"rho\": [0.5, 0.9],\n"
      "    \"bad\": true\n  }\n}\n";
  const auto cfg = Config::parse_json(text, "c.json");
  EXPECT_EQ(cfg.get_string("problem", "kind"), "pq_laplacian");
  EXPECT_DOUBLE_EQ(cfg.get_double("problem", "p"), 3.0);
  EXPECT_EQ(cfg.get_doubles("prescribed", "rho"), (std::vector<double>{0.5, 0.9}));
  EXPECT_TRUE(cfg.get_bool("prescribed", "bad"));
  EXPECT_EQ(error_of([&] { cfg.fail("prescribed", "bad", "nope"); }), "c.json:5: nope");
  EXPECT_EQ(error_of([] { Config::parse_json("{\n\"a\": {\n\"x\": }\n}", "d.json"); }).rfind("d.json:3:", 0), 0u);
  EXPECT_NE(error_of([] { Config::parse_json("[1, 2]", "e.json"); }), "<no error>");
}

TEST(ConfigLoad, DispatchesOnContent) {
  const auto dir = scratch();
  const auto j = write(dir, "x.cfg", "  {\"grid\": {\"n\": 9}}");
  EXPECT_EQ(Config::load(j.string()).get_int("grid", "n"), 9);
  const auto i = write(dir, "y.cfg", "[grid]\nn = 11\n");
  EXPECT_EQ(Config::load(i.string()).get_int("grid", "n"), 11);
  EXPECT_THROW(Config::load((dir / "absent.ini").string()), ConfigError);
}

TEST(Models, ExponentOrderingAnchoredAtKey) {
  const auto cfg = Config::parse_ini("[problem]\nkind = pq_laplacian\np = 3\nq = 4\nr1 = 1.5\nr2 = 5\n", "m.ini");
  const auto msg = error_of([&] { parse_model(cfg, ""); });
  EXPECT_EQ(msg.rfind("m.ini:3:", 0), 0u) << msg;
  EXPECT_NE(msg.find("q = 4"), std::string::npos);
}

TEST(Models, SubcriticalExponentIn2D) {
  const auto ok = Config::parse_ini("[problem]\nkind = semilinear_cc\nr = 6\n[grid]\ndim = 2\n", "m.ini");
  EXPECT_NO_THROW(parse_model(ok, ""));
  const auto bad = Config::parse_ini("[problem]\nkind = affine\np = 1.5\nq = 1.2\nr = 7\n", "m.ini");
  EXPECT_EQ(error_of([&] { parse_model(bad, ""); }).rfind("m.ini:5:", 0), 0u);
}

TEST(Models, InapplicableKeysRejected) {
  const auto cfg = Config::parse_ini("[problem]\nkind = homogeneous\nr2 = 4\n", "m.ini");
  EXPECT_EQ(error_of([&] { parse_model(cfg, ""); }).rfind("m.ini:3:", 0), 0u);
  const auto grid = Config::parse_ini("[problem]\nkind = semilinear_cc\n[grid]\nnx = 9\n", "m.ini");
  EXPECT_EQ(error_of([&] { parse_model(grid, ""); }).rfind("m.ini:4:", 0), 0u);
  const auto kind = Config::parse_ini("[problem]\nkind = mystery\n", "m.ini");
  EXPECT_EQ(error_of([&] { parse_model(kind, ""); }).rfind("m.ini:2:", 0), 0u);
}

TEST(Report, AssertionsAndSummary) {
  Report rep("solve");
  EXPECT_TRUE(rep.check("g", "small", 1e-9, "<=", 1e-6).pass);
  const auto& a = rep.check("g", "big", 2.0, "<", 1.0);
  EXPECT_FALSE(a.pass);
  EXPECT_DOUBLE_EQ(a.margin, -1.0);
  EXPECT_TRUE(rep.require("h", "flag", true).pass);
  EXPECT_FALSE(rep.group_passed("g"));
  EXPECT_TRUE(rep.group_passed("h"));
  EXPECT_FALSE(rep.passed(false));
  const json j = rep.to_json(false);
  EXPECT_EQ(j["summary"]["assertions"], 3);
  EXPECT_EQ(j["summary"]["failed"], 1);
  EXPECT_EQ(j["assertions"][1]["name"], "big");
  EXPECT_EQ(j["assertions"][1]["relation"], "<");
}

TEST(Report, StrictTurnsWarningsIntoFailures) {
  Report rep("prescribed");
  rep.check("g", "x", 1.0, ">=", 0.0);
  rep.warn("watch out");
  EXPECT_TRUE(rep.passed(false));
  EXPECT_FALSE(rep.passed(true));
  rep.fail("run", "boom");
  EXPECT_FALSE(rep.passed(false));
  EXPECT_FALSE(rep.to_json(false)["failures"].empty());
}

TEST(Report, SeriesCsvRoundTripsDoubles) {
  const auto dir = scratch();
  const double x = 0.1 + 0.2;
  write_series(dir / "s.csv", {"t", "value"}, {{x, 1.0 / 3.0}});
  std::ifstream in(dir / "s.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "t,value");
  EXPECT_EQ(std::stod(row.substr(0, row.find(','))), x);
}

TEST(Commands, FiberingQuadraticExample) {
  const auto dir = scratch();
  RunOptions o;
  o.config = std::string(NEHARI_SOURCE_DIR) + "/configs/fibering_quadratic.ini";
  o.out = (dir / "out").string();
  const auto r = run_cmd("fibering", o);
  ASSERT_EQ(r.code, kOk) << r.err;
  const json rep = read_json(dir / "out" / "report.json");
  EXPECT_NEAR(rep["records"]["threshold"]["lambda_u"].get<double>(), 0.25, 1e-12);
  const auto& first = rep["records"]["runs"][0];
  EXPECT_EQ(first["kind"], "two_roots");
  EXPECT_NEAR(first["t_plus"].get<double>(), 0.25, 1e-12);
  EXPECT_NEAR(first["t_minus"].get<double>(), 0.75, 1e-12);
  EXPECT_EQ(rep["records"]["runs"][1]["kind"], "degenerate");
  EXPECT_EQ(rep["records"]["runs"][2]["kind"], "no_roots");
  for (int k = 0; k < 3; ++k) EXPECT_TRUE(fs::exists(dir / "out" / ("series_" + std::to_string(k) + ".csv")));
  EXPECT_TRUE(fs::exists(dir / "out" / "timing.json"));
}

TEST(Commands, SeriesHasExtremaAtTheRoots) {
  const auto dir = scratch();
  RunOptions o;
  o.config = std::string(NEHARI_SOURCE_DIR) + "/configs/fibering_quadratic.ini";
  o.out = dir.string();
  ASSERT_EQ(run_cmd("fibering", o).code, kOk);
  std::ifstream in(dir / "series_0.csv");
  std::string line;
  std::getline(in, line);
  std::vector<double> t, v;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string a, b;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    t.push_back(std::stod(a));
    v.push_back(std::stod(b));
  }
  ASSERT_GT(t.size(), 100u);
  const double h = t[1] - t[0];
  std::size_t argmin = 0, argmax = 0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] < 0.5 && v[i] < v[argmin]) argmin = i;
    if (t[i] > 0.5 && (t[argmax] < 0.5 || v[i] > v[argmax])) argmax = i;
  }
  EXPECT_NEAR(t[argmin], 0.25, h);
  EXPECT_NEAR(t[argmax], 0.75, h);
  for (std::size_t i = t.size() * 9 / 10; i + 1 < t.size(); ++i) EXPECT_LT(v[i + 1], v[i]);
}

TEST(Commands, ConfigErrorWritesNothing) {
  const auto dir = scratch();
  const auto cfg = write(dir, "bad.ini", "[problem]\nkind = semilinear_cc\nq = 2.5\n");
  RunOptions o;
  o.config = cfg.string();
  o.out = (dir / "out").string();
  const auto r = run_cmd("solve", o);
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find(cfg.string() + ":3:"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Commands, UnknownSectionAndMissingConfig) {
  const auto dir = scratch();
  RunOptions o;
  o.config = write(dir, "x.ini", "[problem]\nkind = semilinear_cc\n[solver]\nstarts = 2\n").string();
  o.out = (dir / "out").string();
  const auto r = run_cmd("solve", o);
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find(":3:"), std::string::npos) << r.err;
  o.config.reset();
  EXPECT_EQ(run_cmd("solve", o).code, kConfigError);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Commands, SolveIsSeedDeterministic) {
  const auto dir = scratch();
  const auto cfg = write(dir, "s.ini",
                         "[problem]\nkind = semilinear_cc\n[grid]\nn = 31\n[optimizer]\nstarts = 3\n");
  RunOptions o;
  o.config = cfg.string();
  o.seed = 4;
  o.out = (dir / "a").string();
  ASSERT_EQ(run_cmd("solve", o).code, kOk);
  o.out = (dir / "b").string();
  o.threads = 3;
  ASSERT_EQ(run_cmd("solve", o).code, kOk);
  const auto a = read_json(dir / "a" / "report.json");
  const auto b = read_json(dir / "b" / "report.json");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a["seed"], 4);
  EXPECT_LT(a["records"]["levels"]["plus"]["level"].get<double>(),
            a["records"]["levels"]["minus"]["level"].get<double>());
}

TEST(Commands, LevelAboveMaximumIsRecordedNotFailed) {
  const auto dir = scratch();
  const auto cfg = write(dir, "p.ini",
                         "[problem]\nkind = semilinear_cc\n[grid]\nn = 31\n[optimizer]\nstarts = 2\n"
                         "[prescribed]\nrho = 1.1\nsamples = 10\n");
  RunOptions o;
  o.config = cfg.string();
  o.out = (dir / "out").string();
  const auto r = run_cmd("prescribed", o);
  EXPECT_EQ(r.code, kOk) << r.err;
  const auto level = read_json(dir / "out" / "report.json")["records"]["levels"][0];
  EXPECT_EQ(level["status"], "out_of_range");
  EXPECT_TRUE(level["h0_direction_rootless"].get<bool>());
  EXPECT_LT(level["c"].get<double>(), 0.0);
  o.strict = true;
  o.out = (dir / "strict").string();
  EXPECT_EQ(run_cmd("prescribed", o).code, kOk);
}

TEST(Commands, NumericalFailureExitCode) {
  const auto dir = scratch();
  // Far above the threshold no start reaches either branch.
  const auto cfg = write(dir, "f.ini",
                         "[problem]\nkind = semilinear_cc\nlambda = 1e6\n[grid]\nn = 15\n"
                         "[optimizer]\nstarts = 1\n");
  RunOptions o;
  o.config = cfg.string();
  o.out = (dir / "out").string();
  const auto r = run_cmd("solve", o);
  EXPECT_EQ(r.code, kNumericalFailure);
  const auto rep = read_json(dir / "out" / "report.json");
  EXPECT_FALSE(rep["summary"]["passed"].get<bool>());
}

TEST(Checks, QuickCriteriaPass) {
  CheckOptions o;
  o.criteria = {2, 3, 9};
  Report rep("check");
  const auto sums = run_checks(o, rep);
  ASSERT_EQ(sums.size(), 3u);
  for (const auto& s : sums) {
    EXPECT_TRUE(s.pass) << s.id << ": " << s.headline;
    EXPECT_TRUE(s.within_time());
  }
  EXPECT_TRUE(rep.passed(false));
}

TEST(Checks, TitlesCoverAllCriteria) {
  const auto& t = criterion_titles();
  ASSERT_EQ(t.size(), 10u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(t[static_cast<std::size_t>(i)].first, i + 1);
}

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "breakscope/breakscope.hpp"

using namespace breakscope;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

int run(const std::string& args) {
  const std::string cmd = std::string(BREAKSCOPE_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("breakscope_report_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

Panel small_panel() {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(1, 0) = 0.8;
  return gen_var_coupled(a, 1.0, 300, 5).panel;
}

}  // namespace

TEST(Assemble, HurstOnly) {
  const auto sec = run_hurst_section(small_panel());
  const auto rep = assemble_report({sec}, {"hurst"});
  EXPECT_EQ(rep.exit_code, 0);
  EXPECT_EQ(rep.document["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(rep.document["sections"].size(), 1u);
  EXPECT_EQ(rep.document["status"], "complete");
  bool rolling = false;
  for (const auto& m : rep.document["manifest"]) rolling |= m["file"] == "hurst_rolling.csv";
  EXPECT_TRUE(rolling);
}

TEST(Assemble, EmptyIsPartialFailure) {
  try {
    assemble_report({}, {"hurst"}, {{"hurst", "TooShort"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PartialFailure);
  }
}

TEST(Assemble, MissingSectionGivesExitTwo) {
  const auto rep = assemble_report({run_hurst_section(small_panel())}, {"hurst", "pmime"}, {{"pmime", "boom"}});
  EXPECT_EQ(rep.exit_code, 2);
  EXPECT_EQ(rep.missing, std::vector<std::string>{"pmime"});
  EXPECT_EQ(rep.document["failures"]["pmime"], "boom");
  EXPECT_EQ(rep.document["status"], "partial");
}

TEST(Assemble, AllFiveSectionsOnSyntheticPanel) {
  const auto p = small_panel();
  PmimeOptions po;
  po.lmax = 2;
  po.surrogates = 20;
  BeastOptions bo;
  bo.samples = 600;
  bo.burn_in = 200;
  bo.chains = 2;
  auto beast = run_beast_section(p, bo);
  std::vector<SectionOutput> secs{run_hurst_section(p), run_mi_section(p), run_pmime_section(p, po), beast.section,
                                  run_events_section(beast.summaries, default_event_catalog())};
  const auto rep = assemble_report(secs, report_section_names());
  EXPECT_EQ(rep.exit_code, 0);
  for (const auto& n : report_section_names()) EXPECT_TRUE(rep.document["sections"].contains(n)) << n;
  EXPECT_EQ(rep.document["sections"]["beast"]["series"].size(), 2u);
  EXPECT_TRUE(rep.document["sections"]["pmime"].contains("network"));
}

TEST(Cli, SynthAndHurstAreByteIdentical) {
  const auto d = fresh_dir("cli");
  const auto csv = d / "fbm.csv";
  ASSERT_EQ(run("--seed 4 synth --kind fbm --hurst 0.6 --n 400 --out " + csv.string()), 0);
  const auto first = slurp(csv);
  ASSERT_EQ(run("--seed 4 synth --kind fbm --hurst 0.6 --n 400 --out " + csv.string()), 0);
  EXPECT_EQ(first, slurp(csv));
  EXPECT_EQ(first.substr(0, 5), "date,");

  const auto o1 = d / "a", o2 = d / "b";
  ASSERT_EQ(run("--input " + csv.string() + " --out-dir " + o1.string() + " hurst"), 0);
  ASSERT_EQ(run("--input " + csv.string() + " --out-dir " + o2.string() + " hurst"), 0);
  EXPECT_EQ(slurp(o1 / "hurst.json"), slurp(o2 / "hurst.json"));
  EXPECT_FALSE(slurp(o1 / "hurst.json").empty());
}

TEST(Cli, ReportWritesManifestFiles) {
  const auto d = fresh_dir("full");
  const auto csv = d / "var.csv";
  ASSERT_EQ(run("--seed 2 synth --kind var_coupled --n 300 --out " + csv.string()), 0);
  const auto out = d / "out";
  ASSERT_EQ(run("--input " + csv.string() + " --out-dir " + out.string() +
                " report --samples 600 --burn-in 200 --chains 2 --surrogates 20 --lmax 2"),
            0);
  const auto doc = nlohmann::json::parse(slurp(out / "report.json"));
  EXPECT_EQ(doc["sections"].size(), 5u);
  for (const auto& m : doc["manifest"]) EXPECT_TRUE(fs::exists(out / m["file"].get<std::string>())) << m["file"];
}

TEST(Cli, ErrorsExitNonZero) {
  EXPECT_EQ(run("--input /nonexistent.csv hurst"), 1);
  const auto d = fresh_dir("short");
  const auto csv = d / "short.csv";
  std::ofstream(csv) << "date,A\n2022-01-01,1\n2022-01-02,2\n";
  EXPECT_EQ(run("--input " + csv.string() + " --out-dir " + (d / "o").string() + " report --sections hurst"), 2);
}

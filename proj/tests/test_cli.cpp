#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "msrlab/process.hpp"

namespace fs = std::filesystem;
using fixtures::day;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

msrlab::ProcessResult cli(const std::vector<std::string>& args) {
  std::vector<std::string> argv{MSRLAB_CLI_PATH};
  argv.insert(argv.end(), args.begin(), args.end());
  return msrlab::run_process(argv);
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    fixtures::build_branch_fixture(repo);
    dir = fixtures::scratch_dir("cli");
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path config(const std::string& extra_project = "", const std::string& variants = "") {
    auto p = dir / "cfg.toml";
    std::ofstream(p) << "[project]\nname = \"fixture\"\nrepo = \"" << repo.path().string()
                     << "\"\nbranch = \"main\"\n"
                     << extra_project << "\n"
                     << (variants.empty() ? "[[variant]]\nname = \"base\"\nwindows.length = 2\n"
                                            "[[variant]]\nname = \"nodocs\"\nwindows.length = 2\n"
                                            "filters.deny_extensions = [\".md\"]\n"
                                          : variants);
    return p;
  }

  fixtures::Repo repo{"cli-repo"};
  fs::path dir;
};

}  // namespace

TEST_F(CliTest, CompareWritesArtifactsWithMetadata) {
  auto out = dir / "out";
  auto r = cli({"compare", "--config", config().string(), "--out", out.string(), "--jobs", "2"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  for (const char* rel : {"facts/base/commits.csv", "facts/base/baseline.csv", "networks/base/network_metrics.csv",
                          "studies/base/roles_agreement.csv", "studies/nodocs/brooks_models.csv",
                          "studies/nodocs/turnover_ci.csv", "compare/verdicts.csv", "report.md"})
    EXPECT_TRUE(fs::exists(out / rel)) << rel;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    auto p = e.path().string();
    if (e.path().extension() == ".csv") {
      EXPECT_TRUE(fs::exists(p + ".meta.json")) << p;
    }
    if (e.path().extension() == ".svg") {
      EXPECT_NE(slurp(e.path()).find("<metadata>{"), std::string::npos) << p;
    }
  }
  EXPECT_NE(r.err.find("cache hit"), std::string::npos) << r.err;
  auto report = slurp(out / "report.md");
  EXPECT_NE(report.find("filters.deny_extensions"), std::string::npos);
}

TEST_F(CliTest, RerunIsByteIdentical) {
  auto cfg = config().string();
  ASSERT_EQ(cli({"compare", "--config", cfg, "--out", (dir / "a").string(), "--jobs", "1"}).exit_code, 0);
  ASSERT_EQ(cli({"compare", "--config", cfg, "--out", (dir / "b").string(), "--jobs", "4"}).exit_code, 0);
  EXPECT_EQ(tree_contents(dir / "a"), tree_contents(dir / "b"));
}

TEST_F(CliTest, SeedOverrideIsRecorded) {
  auto out = dir / "out";
  ASSERT_EQ(cli({"turnover", "--config", config().string(), "--out", out.string(), "--seed", "123"}).exit_code, 0);
  EXPECT_NE(slurp(out / "studies/base/turnover_ci.csv").find(",123\n"), std::string::npos);
}

TEST_F(CliTest, ConfigErrorsExitTwo) {
  auto bad = dir / "bad.toml";
  std::ofstream(bad) << "[project]\nrepo = \".\"\n[[variant]]\nname = \"a\"\nbogus = 1\n";
  auto r = cli({"extract", "--config", bad.string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("variant[0].bogus"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"extract", "--config", (dir / "missing.toml").string()}).exit_code, 2);
  EXPECT_EQ(cli({"frobnicate", "--config", bad.string()}).exit_code, 2);
}

TEST_F(CliTest, RepositoryErrorsExitThree) {
  auto p = dir / "norepo.toml";
  std::ofstream(p) << "[project]\nrepo = \"" << (dir / "nowhere").string() << "\"\n[[variant]]\nname = \"a\"\n";
  auto r = cli({"extract", "--config", p.string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.exit_code, 3) << r.err;
  auto b = config("", "[[variant]]\nname = \"a\"\n");
  std::ofstream(b, std::ios::trunc) << "[project]\nrepo = \"" << repo.path().string()
                                    << "\"\nbranch = \"nope\"\n[[variant]]\nname = \"a\"\n";
  EXPECT_EQ(cli({"extract", "--config", b.string(), "--out", (dir / "o").string()}).exit_code, 3);
}

TEST_F(CliTest, StageFailureExitsOneAndKeepsPartialOutputs) {
  auto fixes = dir / "fixes.txt";
  std::ofstream(fixes) << "not-a-hash\n";
  auto out = dir / "out";
  auto r = cli({"turnover", "--config", config("bugfix_list = \"" + fixes.string() + "\"").string(), "--out",
                out.string()});
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("stage 'turnover'"), std::string::npos) << r.err;
  EXPECT_TRUE(fs::exists(out / "facts/base/commits.csv"));
}

TEST_F(CliTest, ReportRendersFromExistingArtifacts) {
  auto out = dir / "out";
  auto cfg = config().string();
  ASSERT_EQ(cli({"compare", "--config", cfg, "--out", out.string()}).exit_code, 0);
  auto before = slurp(out / "report.md");
  fs::remove(out / "report.md");
  ASSERT_EQ(cli({"report", "--config", cfg, "--out", out.string()}).exit_code, 0);
  EXPECT_EQ(slurp(out / "report.md"), before);
}

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli/cli.hpp"
#include "kalm/model/config.hpp"
#include "support/support.hpp"

using namespace kalm;
using kalm::testing::TempDir;
namespace fs = std::filesystem;
namespace files = kalm::cli::files;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result kalm_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) { return std::size_t(std::count(s.begin(), s.end(), '\n')); }

// Small model and corpus so each command finishes in well under a second.
std::vector<std::string> small(const std::string& command, const fs::path& out) {
  return {command,    "--out",     out.string(), "--set",         "d_model=8",      "n_heads=2",       "ffn_mult=2",
          "kge_dim=4", "d_embed=8", "max_epochs=2", "transe_epochs=5", "n_docs=40", "kg_size=60"};
}

void expect_one_error_line(const Result& r, int code, const std::string& kind) {
  EXPECT_EQ(r.code, code) << r.err;
  EXPECT_EQ(r.err.rfind("error=" + kind + " message=\"", 0), 0u) << r.err;
  EXPECT_EQ(count_lines(r.err), 1u) << r.err;
}

void expect_no_temp_files(const fs::path& dir) {
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    EXPECT_EQ(e.path().string().find(".tmp"), std::string::npos) << e.path();
  }
}

}  // namespace

TEST(Cli, GenIsDeterministic) {
  TempDir a("gen_a"), b("gen_b"), c("gen_c");
  ASSERT_EQ(kalm_run({"gen", "--set", "seed=7", "n_docs=100", "--out", a.path().string()}).code, 0);
  ASSERT_EQ(kalm_run({"gen", "--set", "seed=7", "n_docs=100", "--out", b.path().string()}).code, 0);
  ASSERT_EQ(kalm_run({"gen", "--set", "seed=8", "n_docs=100", "--out", c.path().string()}).code, 0);
  for (const char* name : {files::kCorpus, files::kTriples, files::kDescriptions, files::kConfig}) {
    const auto content = slurp(a / name);
    EXPECT_FALSE(content.empty()) << name;
    EXPECT_EQ(content, slurp(b / name)) << name;
  }
  EXPECT_EQ(count_lines(slurp(a / files::kCorpus)), 100u);
  EXPECT_NE(slurp(a / files::kCorpus), slurp(c / files::kCorpus));
  expect_no_temp_files(a.path());
}

TEST(Cli, SeedFlagOverridesConfig) {
  TempDir a("seed_a"), b("seed_b");
  ASSERT_EQ(kalm_run({"gen", "--set", "seed=3", "--out", a.path().string()}).code, 0);
  ASSERT_EQ(kalm_run({"gen", "--set", "seed=1", "--seed", "3", "--out", b.path().string()}).code, 0);
  EXPECT_EQ(slurp(a / files::kCorpus), slurp(b / files::kCorpus));
}

TEST(Cli, ConfigFileThenOverrides) {
  TempDir dir("cfgfile");
  {
    std::ofstream f(dir / "run.cfg");
    f << "# small corpus\nn_docs=30\nseed=4\n";
  }
  ASSERT_EQ(kalm_run({"gen", "--config", (dir / "run.cfg").string(), "--set", "n_docs=25", "--out",
                      (dir / "o").string()})
                .code,
            0);
  EXPECT_EQ(count_lines(slurp(dir / "o" / files::kCorpus)), 25u);
  const auto cfg = model::load_config((dir / "o" / files::kConfig).string());
  EXPECT_EQ(cfg.seed, 4u);
  EXPECT_EQ(cfg.n_docs, 25u);
}

TEST(Cli, TrainThenEvalReproducesTestMetrics) {
  TempDir dir("train_eval");
  ASSERT_EQ(kalm_run(small("gen", dir.path())).code, 0);
  const auto tr = kalm_run(small("train", dir.path()));
  ASSERT_EQ(tr.code, 0) << tr.err;
  EXPECT_TRUE(fs::exists(dir / files::kCheckpoint / files::kConfig));
  EXPECT_EQ(slurp(dir / files::kTrainLog).rfind("epoch,split,loss,", 0), 0u);

  auto ev_args = small("eval", dir.path());
  ev_args.insert(ev_args.end(), {"--split", "test"});
  const auto ev = kalm_run(ev_args);
  ASSERT_EQ(ev.code, 0) << ev.err;
  const auto trained = slurp(dir / files::kTestMetrics);
  EXPECT_EQ(trained.rfind("split,acc,bacc,maf,mif,map,mar\ntest,", 0), 0u);
  EXPECT_EQ(slurp(dir / files::kEvalMetrics), trained);
  expect_no_temp_files(dir.path());
}

TEST(Cli, BuildWritesEmbeddingsThatTrainReuses) {
  TempDir dir("build");
  ASSERT_EQ(kalm_run(small("gen", dir.path())).code, 0);
  const auto b = kalm_run(small("build", dir.path()));
  ASSERT_EQ(b.code, 0) << b.err;
  const auto table = slurp(dir / files::kBundles);
  EXPECT_EQ(table.rfind("doc_id,label,paragraphs,mentions,doc_edges,subgraph_nodes,subgraph_edges,digest\n", 0), 0u);
  EXPECT_EQ(count_lines(table), 41u);
  EXPECT_TRUE(fs::exists(dir / files::kEmbeddings));
  // A second build is byte-identical.
  ASSERT_EQ(kalm_run(small("build", dir.path())).code, 0);
  EXPECT_EQ(slurp(dir / files::kBundles), table);

  // Saved embeddings with another width conflict with the requested kge_dim.
  auto args = small("train", dir.path());
  args.push_back("kge_dim=6");
  expect_one_error_line(kalm_run(args), 2, "config");
}

TEST(Cli, ExplainWithoutCheckpointNamesThePath) {
  TempDir dir("explain_missing");
  ASSERT_EQ(kalm_run(small("gen", dir.path())).code, 0);
  const auto r = kalm_run(small("explain", dir.path()));
  expect_one_error_line(r, 2, "config");
  EXPECT_NE(r.err.find((dir / files::kCheckpoint).string()), std::string::npos) << r.err;
}

TEST(Cli, ExplainNeedsCaptureAndWritesReports) {
  TempDir dir("explain");
  ASSERT_EQ(kalm_run(small("gen", dir.path())).code, 0);
  ASSERT_EQ(kalm_run(small("train", dir.path())).code, 0);
  expect_one_error_line(kalm_run(small("explain", dir.path())), 2, "config");

  auto args = small("explain", dir.path());
  args.insert(args.end(), {"capture_attention=true", "--mention-edges", "4"});
  auto good = args;
  good.insert(good.end(), {"--paragraph-edges", "3,5"});
  const auto r = kalm_run(good);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto attention = slurp(dir / files::kAttention);
  EXPECT_EQ(attention.rfind("layer,query,t_L,g_L,k_L,t_G,g_G,k_G\n", 0), 0u);
  EXPECT_EQ(count_lines(attention), 1u + 2u * 6u);
  const auto grid = slurp(dir / files::kErrorGrid);
  EXPECT_EQ(count_lines(grid), 1u + 3u * 2u);

  args.insert(args.end(), {"--paragraph-edges", "5,3"});
  expect_one_error_line(kalm_run(args), 2, "config");
}

TEST(Cli, SweepAndAblateWriteTables) {
  TempDir dir("experiments");
  ASSERT_EQ(kalm_run(small("gen", dir.path())).code, 0);
  const auto base = small("sweep", dir.path());
  auto sweep = base;
  sweep.insert(sweep.end(), {"--fractions", "0.5,1"});
  ASSERT_EQ(kalm_run(sweep).code, 0);
  const auto table = slurp(dir / files::kSweep);
  EXPECT_EQ(count_lines(table), 3u);
  EXPECT_EQ(slurp(dir / files::kBaseline).rfind("split,acc,", 0), 0u);
  ASSERT_EQ(kalm_run(sweep).code, 0);
  EXPECT_EQ(slurp(dir / files::kSweep), table);

  auto ablate = small("ablate", dir.path());
  ablate.insert(ablate.end(), {"--variants", "full", "no_global"});
  ASSERT_EQ(kalm_run(ablate).code, 0);
  const auto rows = slurp(dir / files::kAblation);
  EXPECT_EQ(count_lines(rows), 3u);
  EXPECT_NE(rows.find("\nno_global,"), std::string::npos);

  auto bad = base;
  bad.insert(bad.end(), {"--fractions", "0.5,x"});
  expect_one_error_line(kalm_run(bad), 2, "config");
}

TEST(Cli, BadConfigurationExitsTwo) {
  TempDir dir("badcfg");
  expect_one_error_line(kalm_run({"gen", "--set", "no_such_key=1", "--out", dir.path().string()}), 2, "config");
  expect_one_error_line(kalm_run({"gen", "--set", "lr=fast", "--out", dir.path().string()}), 2, "config");
  expect_one_error_line(kalm_run({"gen", "--set", "n_heads", "--out", dir.path().string()}), 2, "config");
  expect_one_error_line(kalm_run({"gen", "--config", (dir / "absent.cfg").string()}), 2, "config");
  expect_one_error_line(kalm_run({"frobnicate"}), 2, "usage");
  expect_one_error_line(kalm_run({}), 2, "usage");
  EXPECT_FALSE(fs::exists(dir / files::kCorpus));
}

TEST(Cli, MissingInputsExitOne) {
  TempDir dir("noinput");
  expect_one_error_line(kalm_run(small("train", dir.path())), 1, "input");
}

TEST(Cli, HelpListsEveryKeyAndDefault) {
  for (const char* sub : {"gen", "build", "train", "eval", "explain", "ablate", "sweep"}) {
    const auto r = kalm_run({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    for (const auto& k : model::config_keys()) {
      EXPECT_NE(r.out.find(k.name + "=" + k.default_value), std::string::npos) << sub << " lacks " << k.name;
    }
  }
}

#ifdef KALM_CLI_BINARY
TEST(Cli, InstalledBinaryRunsEndToEnd) {
  TempDir dir("binary");
  const std::string cmd = std::string("\"") + KALM_CLI_BINARY + "\" gen --set seed=2 n_docs=20 --out \"" +
                          dir.path().string() + "\" > \"" + (dir / "stdout.txt").string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0) << slurp(dir / "stdout.txt");
  EXPECT_EQ(count_lines(slurp(dir / files::kCorpus)), 20u);

  const std::string bad = std::string("\"") + KALM_CLI_BINARY + "\" explain --out \"" + dir.path().string() +
                          "\" 2> \"" + (dir / "stderr.txt").string() + "\"";
  const int bad_status = std::system(bad.c_str());
  ASSERT_TRUE(WIFEXITED(bad_status));
  EXPECT_EQ(WEXITSTATUS(bad_status), 2);
  EXPECT_EQ(slurp(dir / "stderr.txt").rfind("error=config message=", 0), 0u);
}
#endif

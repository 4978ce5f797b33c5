#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "kgec/cli.hpp"
#include "support/synthetic_kg.hpp"

using namespace kgec;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct ToolRun {
    int code;
    std::string err;
};

ToolRun run_tool(const std::string& args, const fs::path& scratch) {
    const auto err_path = scratch / "stderr.txt";
    const std::string cmd = std::string(KGEC_TOOL_PATH) + " " + args + " >/dev/null 2>" + err_path.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err_path)};
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class CliFlow : public ::testing::Test {
protected:
    void SetUp() override {
        auto kg = testkit::typed_kg(3, 40, 20);
        // give the typed KG a test split so eval has something to rank
        kg.ds.test.assign(kg.ds.valid.begin(), kg.ds.valid.begin() + 4);
        testkit::write_dataset(data(), kg.ds);
        std::ofstream types(dir / "types.tsv");
        for (std::size_t e = 0; e < kg.type_of.size(); ++e)
            types << kg.ds.vocab.entities.name(static_cast<EntityId>(e)) << '\t' << kg.type_names[kg.type_of[e]] << '\n';
        std::ofstream(dir / "small.cfg") << "d = 8\nmax_iters = 6\nn_batches = 4\neval_every = 3\nneg_ratio = 2\n"
                                            "lr = 0.5\nmu = 0.1\nprecision = float64\n";
    }

    fs::path data() const { return dir / "data"; }
    std::string str(const fs::path& p) const { return p.string(); }

    testkit::TempDir dir{"cli"};
};

}  // namespace

TEST_F(CliFlow, MineTrainEvalAnalyzeSignificance) {
    const auto before = slurp(data() / "train.txt");
    ASSERT_EQ(cli::run({"mine", "--data", str(data()), "--out", str(dir / "mined"), "--min-support", "5"}), 0);
    const auto ents = dir / "mined" / "entailments.tsv";
    EXPECT_GT(line_count(slurp(ents)), 0u);
    EXPECT_EQ(slurp(dir / "mined" / "rule_diagnostics.csv").rfind("premise,conclusion,support,pca_body,pca_confidence\n", 0), 0u);
    EXPECT_EQ(slurp(dir / "mined" / "relation_classes.csv").rfind("class,first,second\n", 0), 0u);

    ASSERT_EQ(cli::run({"train", "--data", str(data()), "--ents", str(ents), "--config", str(dir / "small.cfg"), "--out",
                        str(dir / "aer")}),
              0);
    ASSERT_EQ(cli::run({"train", "--data", str(data()), "--config", str(dir / "small.cfg"), "--mu", "0",
                        "--no-projection", "--out", str(dir / "plain")}),
              0);
    auto log = slurp(dir / "aer" / "train_log.csv");
    EXPECT_EQ(log.rfind("epoch,logistic,penalty,l2,total,valid_mrr\n", 0), 0u);
    EXPECT_EQ(line_count(log), 7u);
    auto aer = load_checkpoint(dir / "aer" / "checkpoint.bin");
    for (double x : aer.params.entity_re.data()) ASSERT_TRUE(x >= 0.0 && x <= 1.0);
    auto plain_manifest = read_manifest(dir / "plain" / "manifest.json");
    EXPECT_EQ(plain_manifest.config.mu, 0.0);
    EXPECT_FALSE(plain_manifest.config.projection);

    for (const char* model : {"aer", "plain"}) {
        ASSERT_EQ(cli::run({"eval", "--checkpoint", str(dir / model / "checkpoint.bin"), "--data", str(data()), "--out",
                            str(dir / model)}),
                  0);
        auto metrics = slurp(dir / model / "metrics.csv");
        EXPECT_EQ(metrics.rfind("metric,value\nmrr,", 0), 0u);
        EXPECT_NE(metrics.find("hits@10,"), std::string::npos);
        auto ranks = slurp(dir / model / "ranks.csv");
        EXPECT_EQ(ranks.rfind("head,rel,tail,head_rank,tail_rank\n", 0), 0u);
        EXPECT_EQ(line_count(ranks), 5u);
    }

    ASSERT_EQ(cli::run({"analyze", "--checkpoint", str(dir / "aer" / "checkpoint.bin"), "--types", str(dir / "types.tsv"),
                        "--ents", str(ents), "--per-type", "3", "--out", str(dir / "analysis")}),
              0);
    auto purity = slurp(dir / "analysis" / "purity_re.csv");
    EXPECT_EQ(purity.rfind("K_percent,mean_entropy_nats\n", 0), 0u);
    EXPECT_EQ(line_count(purity), 7u);
    EXPECT_TRUE(fs::exists(dir / "analysis" / "purity_im.csv"));
    EXPECT_EQ(line_count(slurp(dir / "analysis" / "heatmap_re.csv")), 1u + 4 * 3);
    EXPECT_EQ(slurp(dir / "analysis" / "relation_diagnostics.csv").rfind("class,first,second,residual,re_violation,im_gap\n", 0),
              0u);

    ASSERT_EQ(cli::run({"significance", "--a", str(dir / "aer" / "ranks.csv"), "--b", str(dir / "plain" / "ranks.csv"),
                        "--out", str(dir / "sig")}),
              0);
    auto sig = slurp(dir / "sig" / "significance.csv");
    EXPECT_EQ(sig.rfind("metric,mean_a,mean_b,t,p_value,significant_p_lt_0.05\n", 0), 0u);
    EXPECT_EQ(line_count(sig), 5u);

    EXPECT_EQ(slurp(data() / "train.txt"), before);
}

TEST_F(CliFlow, ManifestReplayIsBitIdentical) {
    ASSERT_EQ(cli::run({"train", "--data", str(data()), "--config", str(dir / "small.cfg"), "--seed", "5", "--out",
                        str(dir / "first")}),
              0);
    ASSERT_EQ(cli::run({"train", "--manifest", str(dir / "first" / "manifest.json"), "--out", str(dir / "replay")}), 0);
    EXPECT_EQ(read_manifest(dir / "replay" / "manifest.json").seed(), 5u);
    EXPECT_EQ(slurp(dir / "first" / "checkpoint.bin"), slurp(dir / "replay" / "checkpoint.bin"));

    std::ofstream(data() / "train.txt", std::ios::app) << "e0\tr0\te1\n";
    EXPECT_NE(cli::run({"train", "--manifest", str(dir / "first" / "manifest.json"), "--out", str(dir / "stale")}), 0);
}

TEST_F(CliFlow, SignificanceRejectsMismatchedDumps) {
    std::ofstream(dir / "a.csv") << "head,rel,tail,head_rank,tail_rank\ne0,r0,e1,1,2\n";
    std::ofstream(dir / "b.csv") << "head,rel,tail,head_rank,tail_rank\ne0,r0,e2,1,2\n";
    EXPECT_NE(cli::run({"significance", "--a", str(dir / "a.csv"), "--b", str(dir / "b.csv"), "--out", str(dir / "s")}), 0);
}

TEST_F(CliFlow, AnalyzeNeedsTypesOrEntailments) {
    ASSERT_EQ(cli::run({"train", "--data", str(data()), "--config", str(dir / "small.cfg"), "--out", str(dir / "m")}), 0);
    EXPECT_NE(cli::run({"analyze", "--checkpoint", str(dir / "m" / "checkpoint.bin"), "--out", str(dir / "a")}), 0);
}

TEST(CliTool, UnknownSubcommandFails) {
    testkit::TempDir dir("cli_tool");
    auto r = run_tool("frobnicate", dir.path());
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("kgec: error:"), std::string::npos);
}

TEST(CliTool, MissingFilesAreNamed) {
    testkit::TempDir dir("cli_missing");
    auto r = run_tool("eval --checkpoint missing.bin --data " + (dir / "nodata").string(), dir.path());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("missing.bin"), std::string::npos);
    EXPECT_EQ(line_count(r.err), 1u);

    auto m = run_tool("mine --data " + (dir / "absent").string(), dir.path());
    EXPECT_EQ(m.code, 1);
    EXPECT_NE(m.err.find("absent"), std::string::npos);
}

TEST(CliTool, HelpSucceeds) {
    testkit::TempDir dir("cli_help");
    EXPECT_EQ(run_tool("--help", dir.path()).code, 0);
}

TEST(CliTool, BadOptionValue) {
    testkit::TempDir dir("cli_bad");
    auto r = run_tool("mine --data . --min-conf lots", dir.path());
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("min-conf"), std::string::npos);
}

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <map>
#include "json.hpp"

#include "helpers.hpp"
#include "lmpcast/common/csv.hpp"

namespace fs = std::filesystem;
using namespace lmpcast;

namespace {

struct Run {
    int code = -1;
    std::string output;
};

Run cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + LMPCAST_CLI + std::string(" ") + args + " 2>&1";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    while (auto n = std::fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::string gen_args(const fs::path& out, int seed = 4) {
    return "gen-data --case " + q(testutil::case_dir("tri3")) + " --hours 300 --zones 1 --congested-lines 3 --threads 1 --seed " +
           std::to_string(seed) + " --out " + q(out);
}

std::string train_args(const fs::path& data, const fs::path& out, const std::string& kind = "astgcn") {
    return "train --data " + q(data) + " --model " + kind + " --epochs 2 --lr 1e-3 --channels 6 --t-hist 4 --quiet --out " + q(out);
}

/// Every regular file under `dir`, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = testutil::read_file(e.path());
    return files;
}

}  // namespace

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = testutil::temp_dir("cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        ASSERT_EQ(cli(gen_args(dir_ / "ds")).code, 0);
    }
    fs::path dir_;
};

TEST_F(CliTest, HelpExitsZero) {
    auto r = cli("--help");
    EXPECT_EQ(r.code, 0);
    for (auto cmd : {"gen-data", "train", "eval", "predict", "export-attention", "plot"})
        EXPECT_NE(r.output.find(cmd), std::string::npos) << cmd;
}

TEST_F(CliTest, GenDataWritesDatasetAndCase) {
    for (auto f : {"loads.csv", "lambda.csv", "mu.csv", "s.csv", "lmp.csv", "split.json", "genconfig.json", "manifest.json",
                   "case/nodes.csv"})
        EXPECT_TRUE(fs::exists(dir_ / "ds" / f)) << f;
    EXPECT_EQ(csv::read(dir_ / "ds" / "loads.csv").rows.size(), 300u);
}

TEST_F(CliTest, RefusesToOverwriteWithoutForce) {
    auto r = cli(gen_args(dir_ / "ds"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("--force"), std::string::npos);
    EXPECT_EQ(cli(gen_args(dir_ / "ds") + " --force").code, 0);
}

TEST_F(CliTest, TrainPredictRoundTrip) {
    ASSERT_EQ(cli(train_args(dir_ / "ds", dir_ / "run")).code, 0);
    for (auto f : {"model.ckpt", "best.ckpt", "history.csv", "manifest.json"}) EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
    EXPECT_EQ(csv::read(dir_ / "run" / "history.csv").rows.size(), 2u);

    auto loads = csv::read(dir_ / "ds" / "loads.csv");
    std::string text = "hour,0,1,2\n";
    for (std::size_t r = 0; r < 10; ++r)
        text += loads.rows[r][0] + "," + loads.rows[r][1] + "," + loads.rows[r][2] + "," + loads.rows[r][3] + "\n";
    testutil::write_file(dir_ / "loads10.csv", text);
    ASSERT_EQ(cli("predict --ckpt " + q(dir_ / "run" / "best.ckpt") + " --loads " + q(dir_ / "loads10.csv") + " --out " +
                  q(dir_ / "pred.csv"))
                  .code,
              0);
    auto p = csv::read(dir_ / "pred.csv");
    EXPECT_EQ(p.header, (std::vector<std::string>{"hour", "lambda", "s", "0", "1", "2"}));
    ASSERT_EQ(p.rows.size(), 7u);  // hours 3..9 have four hours of history
    EXPECT_EQ(csv::parse_int(p, 0, 0), 3);
    EXPECT_TRUE(fs::exists(dir_ / "pred.csv.manifest.json"));
}

TEST_F(CliTest, PredictNeedsFullHistory) {
    ASSERT_EQ(cli(train_args(dir_ / "ds", dir_ / "run")).code, 0);
    testutil::write_file(dir_ / "short.csv", "0,1,2\n10,20,30\n");
    auto r = cli("predict --ckpt " + q(dir_ / "run" / "best.ckpt") + " --loads " + q(dir_ / "short.csv") + " --out " +
                 q(dir_ / "p.csv"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("history"), std::string::npos);
}

TEST_F(CliTest, EvalOfGroundTruthIsPerfect) {
    ASSERT_EQ(cli(train_args(dir_ / "ds", dir_ / "run", "gcn")).code, 0);
    ASSERT_EQ(cli("eval --data " + q(dir_ / "ds") + " --ckpt " + q(dir_ / "run" / "best.ckpt") + " --out " + q(dir_ / "ev")).code, 0);
    auto r = cli("eval --data " + q(dir_ / "ds") + " --pred " + q(dir_ / "ev" / "ground_truth.csv") + " --out " + q(dir_ / "ev2"));
    ASSERT_EQ(r.code, 0) << r.output;
    auto m = csv::read(dir_ / "ev2" / "metrics.csv");
    ASSERT_EQ(m.rows.size(), 1u);
    EXPECT_EQ(csv::parse_double(m, 0, m.column("mae")), 0.0);
    EXPECT_EQ(csv::parse_double(m, 0, m.column("rmse")), 0.0);
    EXPECT_EQ(csv::parse_double(m, 0, m.column("mape")), 0.0);
    EXPECT_EQ(csv::parse_double(m, 0, m.column("s_accuracy")), 100.0);
}

TEST_F(CliTest, EvalOfOwnPredictionsReproducesMetrics) {
    ASSERT_EQ(cli(train_args(dir_ / "ds", dir_ / "run")).code, 0);
    ASSERT_EQ(cli("eval --data " + q(dir_ / "ds") + " --ckpt " + q(dir_ / "run" / "best.ckpt") + " --out " + q(dir_ / "a")).code, 0);
    ASSERT_EQ(cli("eval --data " + q(dir_ / "ds") + " --pred " + q(dir_ / "a" / "predictions.csv") + " --out " + q(dir_ / "b")).code, 0);
    EXPECT_EQ(testutil::read_file(dir_ / "a" / "metrics.csv"), testutil::read_file(dir_ / "b" / "metrics.csv"));
}

TEST_F(CliTest, MlpRequiresNodes) {
    auto r = cli(train_args(dir_ / "ds", dir_ / "m", "mlp"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("--nodes"), std::string::npos);
    EXPECT_EQ(cli(train_args(dir_ / "ds", dir_ / "m", "mlp") + " --nodes 0,2 --mlp-hidden 4 --mlp-layers 2").code, 0);
    EXPECT_EQ(cli(train_args(dir_ / "ds", dir_ / "m2", "mlp") + " --nodes 7").code, 2);
}

TEST_F(CliTest, ExportAttention) {
    ASSERT_EQ(cli(train_args(dir_ / "ds", dir_ / "run")).code, 0);
    ASSERT_EQ(cli("export-attention --ckpt " + q(dir_ / "run" / "best.ckpt") + " --sample 250 --out " + q(dir_ / "att")).code, 0);
    for (auto b : {"lambda", "s", "mu"}) {
        auto s = csv::read(dir_ / "att" / (std::string(b) + "_spatial.csv"));
        ASSERT_EQ(s.rows.size(), 3u);
        for (std::size_t r = 0; r < 3; ++r) {
            double sum = 0.0;
            for (std::size_t c = 1; c <= 3; ++c) sum += csv::parse_double(s, r, c);
            EXPECT_NEAR(sum, 1.0, 1e-12);
        }
        EXPECT_EQ(csv::read(dir_ / "att" / (std::string(b) + "_temporal.csv")).rows.size(), 4u);
        EXPECT_TRUE(fs::exists(dir_ / "att" / (std::string(b) + "_spatial.svg")));
    }
}

TEST_F(CliTest, ExportAttentionRejectsGcn) {
    ASSERT_EQ(cli(train_args(dir_ / "ds", dir_ / "run", "gcn")).code, 0);
    auto r = cli("export-attention --ckpt " + q(dir_ / "run" / "best.ckpt") + " --sample 250 --out " + q(dir_ / "att"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("no attention parameters"), std::string::npos);
}

TEST_F(CliTest, PlotSeriesAndComparison) {
    ASSERT_EQ(cli(train_args(dir_ / "ds", dir_ / "a")).code, 0);
    ASSERT_EQ(cli(train_args(dir_ / "ds", dir_ / "b", "gcn")).code, 0);
    for (auto x : {"a", "b"})
        ASSERT_EQ(cli("eval --data " + q(dir_ / "ds") + " --ckpt " + q(dir_ / x / "best.ckpt") + " --out " + q(dir_ / (std::string("e") + x))).code, 0);
    auto r = cli("plot --pred " + q(dir_ / "ea" / "predictions.csv") + " --gt " + q(dir_ / "ea" / "ground_truth.csv") +
                 " --node 2 --from 210 --to 230 --rmse-a " + q(dir_ / "ea" / "metrics_per_node.csv") + " --rmse-b " +
                 q(dir_ / "eb" / "metrics_per_node.csv") + " --nodes 1,2 --out " + q(dir_ / "plot"));
    ASSERT_EQ(r.code, 0) << r.output;
    auto s = csv::read(dir_ / "plot" / "series_node2.csv");
    EXPECT_EQ(s.rows.size(), 20u);
    EXPECT_EQ(csv::parse_int(s, 0, 0), 210);
    EXPECT_EQ(csv::read(dir_ / "plot" / "node_rmse.csv").rows.size(), 3u);
    EXPECT_EQ(csv::read(dir_ / "plot" / "node_table.csv").rows.size(), 2u);
    EXPECT_EQ(cli("plot --pred " + q(dir_ / "ea" / "predictions.csv") + " --gt " + q(dir_ / "ea" / "ground_truth.csv") +
                  " --node 9 --out " + q(dir_ / "p2"))
                  .code,
              2);
    EXPECT_FALSE(fs::exists(dir_ / "p2"));
}

TEST_F(CliTest, ConfigFileFillsUnsetOptions) {
    testutil::write_file(dir_ / "t.cfg", "# training defaults\nepochs = 3\nchannels=5\n\nmodel = gcn\n");
    auto r = cli("train --data " + q(dir_ / "ds") + " --epochs 1 --quiet --config " + q(dir_ / "t.cfg") + " --out " + q(dir_ / "run"));
    ASSERT_EQ(r.code, 0) << r.output;
    auto man = nlohmann::json::parse(testutil::read_file(dir_ / "run" / "manifest.json"));
    EXPECT_EQ(man["config"]["epochs"], 1);
    EXPECT_EQ(man["config"]["channels"], 5);
    EXPECT_EQ(man["config"]["model"], "gcn");
    testutil::write_file(dir_ / "bad.cfg", "no_such_option = 1\n");
    EXPECT_EQ(cli("train --data " + q(dir_ / "ds") + " --model gcn --config " + q(dir_ / "bad.cfg") + " --out " + q(dir_ / "x")).code, 1);
}

TEST_F(CliTest, ExitCodes) {
    EXPECT_EQ(cli("").code, 1);
    EXPECT_EQ(cli("train --model gcn").code, 1);
    EXPECT_EQ(cli("train --data " + q(dir_ / "missing") + " --model gcn --out " + q(dir_ / "x")).code, 2);
    testutil::write_file(dir_ / "junk.ckpt", "not a checkpoint");
    EXPECT_EQ(cli("eval --data " + q(dir_ / "ds") + " --ckpt " + q(dir_ / "junk.ckpt") + " --out " + q(dir_ / "y")).code, 2);
    EXPECT_EQ(cli("gen-data --case " + q(testutil::case_dir("tri3")) + " --source csv:" + q(dir_ / "none.csv") + " --hours 10 --out " +
                  q(dir_ / "z"))
                  .code,
              2);
}

TEST_F(CliTest, ManifestRecordsGitObjectIds) {
    auto man = nlohmann::json::parse(testutil::read_file(dir_ / "ds" / "manifest.json"));
    EXPECT_EQ(man["command"], "gen-data");
    EXPECT_EQ(man["seeds"]["seed"], 4);
    EXPECT_EQ(man["config"]["hours"], 300);
    // Independent oracle: git's own object id for the same bytes.
    auto git = [](const std::string& args) {
        std::string out;
        FILE* p = popen(("git " + args + " 2>/dev/null").c_str(), "r");
        if (!p) return out;
        char buf[256];
        while (auto n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
        return pclose(p) == 0 ? out.substr(0, out.find('\n')) : std::string();
    };
    const auto expect = git("hash-object " + q(dir_ / "ds" / "lmp.csv"));
    if (expect.empty()) GTEST_SKIP() << "git not available";
    EXPECT_EQ(man["outputs"]["lmp.csv"], expect);
}

TEST_F(CliTest, SameSeedsGiveIdenticalOutputs) {
    const std::string env = "SOURCE_DATE_EPOCH=1700000000";
    ASSERT_EQ(cli(gen_args(dir_ / "d1", 9), env).code, 0);
    ASSERT_EQ(cli(gen_args(dir_ / "d2", 9), env).code, 0);
    EXPECT_EQ(snapshot(dir_ / "d1"), snapshot(dir_ / "d2"));
    ASSERT_EQ(cli(train_args(dir_ / "d1", dir_ / "r1"), env).code, 0);
    ASSERT_EQ(cli(train_args(dir_ / "d1", dir_ / "r2"), env).code, 0);
    EXPECT_EQ(snapshot(dir_ / "r1"), snapshot(dir_ / "r2"));
    ASSERT_EQ(cli(gen_args(dir_ / "d3", 10), env).code, 0);
    EXPECT_NE(testutil::read_file(dir_ / "d1" / "loads.csv"), testutil::read_file(dir_ / "d3" / "loads.csv"));
}

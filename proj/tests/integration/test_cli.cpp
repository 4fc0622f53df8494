#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <sstream>

#include "cli_app.hpp"
#include "test_support.hpp"

using namespace tcfd;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  Result run(std::vector<std::string> args, const std::string& script = "scripts/f2_jpm_2021.json") {
    std::vector<std::string> full{"tcfdlens", "--workspace", (dir.path() / "ws").string()};
    if (!script.empty()) {
      full.push_back("--mock-script");
      full.push_back(tt::fixture(script).string());
    }
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : full) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Result r;
    r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
  }

  std::string ingest() {
    const auto r = run({"ingest", tt::fixture("reports/sample_report.txt").string()});
    EXPECT_EQ(r.code, 0) << r.err;
    std::string id = r.out;
    while (!id.empty() && id.back() == '\n') id.pop_back();
    return id;
  }

  tt::TempDir dir;
};

}  // namespace

TEST_F(CliTest, IngestAnalyzePrintsAverage) {
  const std::string doc = ingest();
  EXPECT_EQ(doc, tt::sample_report().doc_id);
  const auto r = run({"analyze", doc});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Average: 61.36"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("Status: complete"), std::string::npos);
  const auto serial = run({"analyze", doc, "--serial", "--json"});
  ASSERT_EQ(serial.code, 0);
  EXPECT_EQ(nlohmann::json::parse(serial.out).at("average_score"), "61.36");
}

TEST_F(CliTest, AskAndEvidence) {
  const std::string doc = ingest();
  const auto r = run({"ask", doc, "Who oversees climate risks?"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Answer: "), std::string::npos);
  EXPECT_NE(r.out.find("Pages: "), std::string::npos);
  EXPECT_EQ(run({"ask", doc, ""}).code, cli::kUsage);
  const auto e = run({"evidence", doc, "quarterly meeting"});
  EXPECT_EQ(e.code, 0);
  EXPECT_NE(e.out.find("(page 2)"), std::string::npos) << e.out;
}

TEST_F(CliTest, EvaluateCorpora) {
  const auto chatgpt = run({"evaluate", tt::fixture("eval/chatgpt_answers.jsonl").string(),
                            tt::fixture("eval/chatgpt_annotations.jsonl").string()},
                           "");
  ASSERT_EQ(chatgpt.code, 0) << chatgpt.err;
  EXPECT_NE(chatgpt.out.find("Content: 83.63% Source: 75.00%"), std::string::npos) << chatgpt.out;
  const auto gpt4 = run({"evaluate", tt::fixture("eval/gpt4_answers.jsonl").string(),
                         tt::fixture("eval/gpt4_annotations.jsonl").string()},
                        "");
  ASSERT_EQ(gpt4.code, 0) << gpt4.err;
  EXPECT_NE(gpt4.out.find("Content: 69.09% Source: 72.36%"), std::string::npos) << gpt4.out;
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({"analyze", "0123456789abcdef"}).code, cli::kNotFound);
  EXPECT_EQ(run({"ingest", (dir.path() / "missing.txt").string()}).code, cli::kNotFound);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(run({"evaluate", "a.jsonl"}).code, cli::kUsage);
  const std::string doc = ingest();
  // only q5 is scripted; the other ten get the mock default of 50
  const auto partial = run({"analyze", doc}, "scripts/q5_malformed.json");
  EXPECT_EQ(partial.code, 0);
  EXPECT_NE(partial.out.find("Average: 50.00"), std::string::npos) << partial.out;
  EXPECT_NE(partial.err.find("warning: question 5"), std::string::npos);
  EXPECT_EQ(run({"check"}).out, "ok\n");
}

TEST(CliBinary, EmptyQuestionExitsTwo) {
  tt::TempDir dir;
  const std::string cmd = std::string(TCFDLENS_BIN) + " --backend mock --workspace " + (dir.path() / "ws").string() +
                          " ask 0123456789abcdef '' 2>/dev/null";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 2);
  const int help = std::system((std::string(TCFDLENS_BIN) + " --help >/dev/null").c_str());
  EXPECT_EQ(WEXITSTATUS(help), 0);
}

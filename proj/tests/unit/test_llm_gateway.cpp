#include <gtest/gtest.h>

#include <atomic>
#include <random>

#include "test_support.hpp"
#include "tcfd/error.hpp"
#include "tcfd/hashing.hpp"
#include "tcfd/llm_gateway.hpp"
#include "tcfd/text.hpp"

using namespace tcfd;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no tcfd::Error thrown";
  return ErrorCode::InvalidArgument;
}

class FlakyBackend final : public LlmBackend {
 public:
  FlakyBackend(int failures, ErrorCode code) : failures_(failures), code_(code) {}
  std::string complete(std::string_view, const CompletionParams&) const override {
    if (calls_++ < failures_) throw Error(code_, "transient");
    return "ok";
  }
  int calls() const { return calls_; }

 private:
  int failures_;
  ErrorCode code_;
  mutable std::atomic<int> calls_{0};
};

CompletionParams fast(int retries) {
  CompletionParams p;
  p.max_retries = retries;
  p.initial_backoff = std::chrono::milliseconds(1);
  return p;
}

}  // namespace

TEST(Complete, ScriptedFingerprint) {
  ScriptedLlmBackend llm;
  llm.add_response("the prompt", "X");
  EXPECT_EQ(complete(std::string_view("the prompt"), fast(0), llm).text, "X");
  nlohmann::json script{{"responses", {{fingerprint("p2"), "Y"}}}};
  EXPECT_EQ(complete(std::string_view("p2"), fast(0), ScriptedLlmBackend(script)).text, "Y");
}

TEST(Complete, RuleOrderAndDefault) {
  ScriptedLlmBackend llm;
  llm.add_rule("alpha", "first");
  llm.add_rule("alp", "second");
  llm.set_default("fallback");
  llm.set_auto_reply(false);
  EXPECT_EQ(llm.complete("xx alpha", {}), "first");
  EXPECT_EQ(llm.complete("alp", {}), "second");
  EXPECT_EQ(llm.complete("zzz", {}), "fallback");
  EXPECT_EQ(llm.calls(), 3u);
}

TEST(Complete, NoReplyWithoutAuto) {
  ScriptedLlmBackend llm;
  llm.set_auto_reply(false);
  EXPECT_EQ(code_of([&] { llm.complete("p", {}); }), ErrorCode::BackendUnavailable);
}

TEST(Complete, RetriesThenSucceeds) {
  FlakyBackend b(2, ErrorCode::RateLimited);
  const auto r = complete(std::string_view("p"), fast(3), b);
  EXPECT_EQ(r.text, "ok");
  EXPECT_EQ(r.retries, 2);
  EXPECT_EQ(b.calls(), 3);
}

TEST(Complete, ExhaustedRetries) {
  FlakyBackend b(10, ErrorCode::Timeout);
  EXPECT_EQ(code_of([&] { complete(std::string_view("p"), fast(3), b); }), ErrorCode::BackendUnavailable);
  EXPECT_EQ(b.calls(), 4);
}

TEST(Complete, NonRetriableNotRetried) {
  FlakyBackend b(1, ErrorCode::MalformedOutput);
  EXPECT_EQ(code_of([&] { complete(std::string_view("p"), fast(3), b); }), ErrorCode::MalformedOutput);
  EXPECT_EQ(b.calls(), 1);
}

TEST(Complete, ScriptErrorRules) {
  ScriptedLlmBackend llm(nlohmann::json::parse(R"({"rules":[{"contains":"x","error":"Timeout"}]})"));
  EXPECT_EQ(code_of([&] { llm.complete("x", {}); }), ErrorCode::Timeout);
  EXPECT_EQ(code_of([] { ScriptedLlmBackend(nlohmann::json::parse(R"({"rules":[{"contains":"x","error":"NotFound"}]})")); }),
            ErrorCode::InvalidArgument);
}

TEST(ExtractJson, RepairPasses) {
  EXPECT_EQ(extract_json_object(R"({"a":1})")["a"], 1);
  EXPECT_EQ(extract_json_object("```json\n{\"a\":2}\n```")["a"], 2);
  EXPECT_EQ(extract_json_object("Sure! Here it is: {\"a\":3} Hope that helps.")["a"], 3);
  EXPECT_EQ(extract_json_object("{ broken { \"a\": 4 }")["a"], 4);
  EXPECT_EQ(code_of([] { extract_json_object("no json here"); }), ErrorCode::MalformedOutput);
  EXPECT_EQ(code_of([] { extract_json_object("[1,2]"); }), ErrorCode::MalformedOutput);
}

TEST(ParseAnswer, DedupeAndSort) {
  const auto a = parse_answer_json(R"({"ANSWER":"a","SOURCES":[2,1,2]})", {1, 2, 3});
  EXPECT_EQ(a.answer_text, "a");
  EXPECT_EQ(a.cited_sources, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(a.citation_order, (std::vector<std::size_t>{2, 1}));
  EXPECT_EQ(a.kind, AnswerKind::Answer);
  EXPECT_TRUE(a.warnings.empty());
}

TEST(ParseAnswer, FencedSummaryWithStringSource) {
  const auto a = parse_answer_json("```json\n{\"SUMMARY\":\"s\",\"SOURCES\":[\"3\"]}\n```", {3});
  EXPECT_EQ(a.kind, AnswerKind::Summary);
  EXPECT_EQ(a.cited_sources, (std::vector<std::size_t>{3}));
}

TEST(ParseAnswer, InvalidCitationDroppedWithWarning) {
  const auto a = parse_answer_json(R"({"ANSWER":"a","SOURCES":[1, 99, "Source 2", "bogus"]})", {1, 2});
  EXPECT_EQ(a.cited_sources, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(a.warnings.size(), 2u);
}

TEST(ParseAnswer, Errors) {
  EXPECT_EQ(code_of([] { parse_answer_json(R"({"ANSWER":"a"})", {}); }), ErrorCode::MissingKey);
  EXPECT_EQ(code_of([] { parse_answer_json(R"({"SOURCES":[]})", {}); }), ErrorCode::MissingKey);
  EXPECT_EQ(code_of([] { parse_answer_json(R"({"ANSWER":"","SOURCES":[]})", {}); }), ErrorCode::MalformedOutput);
  EXPECT_EQ(code_of([] { parse_answer_json("garbage", {}); }), ErrorCode::MalformedOutput);
}

TEST(ParseConformity, Scores) {
  EXPECT_EQ(parse_conformity_json(R"({"ANALYSIS":"ok","SCORE":60})", 1).score, 60);
  EXPECT_EQ(parse_conformity_json(R"({"ANALYSIS":"ok","SCORE":0})", 1).score, 0);
  EXPECT_EQ(parse_conformity_json(R"({"ANALYSIS":"ok","SCORE":"70"})", 1).score, 70);
  EXPECT_EQ(parse_conformity_json(R"({"ANALYSIS":"ok","SCORE":100.0})", 1).score, 100);
  EXPECT_EQ(code_of([] { parse_conformity_json(R"({"ANALYSIS":"ok","SCORE":101})", 1); }),
            ErrorCode::ScoreOutOfRange);
  EXPECT_EQ(code_of([] { parse_conformity_json(R"({"ANALYSIS":"ok","SCORE":-1})", 1); }),
            ErrorCode::ScoreOutOfRange);
  EXPECT_EQ(code_of([] { parse_conformity_json(R"({"ANALYSIS":"ok","SCORE":"high"})", 1); }),
            ErrorCode::MalformedOutput);
  EXPECT_EQ(code_of([] { parse_conformity_json(R"({"SCORE":5})", 1); }), ErrorCode::MissingKey);
}

TEST(ParseConformity, WordLimitIsSoft) {
  auto words = [](int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += (i ? " w" : "w");
    return s;
  };
  const auto ok = parse_conformity_json(nlohmann::json{{"ANALYSIS", words(150)}, {"SCORE", 5}}.dump(), 2);
  EXPECT_FALSE(ok.analysis_too_long);
  const auto longer = parse_conformity_json(nlohmann::json{{"ANALYSIS", words(151)}, {"SCORE", 5}}.dump(), 2);
  EXPECT_TRUE(longer.analysis_too_long);
  EXPECT_EQ(longer.question_index, 2);
}

TEST(ParseGuideline, Variants) {
  EXPECT_EQ(parse_guideline_json(R"({"GUIDELINE":"g"})"), "g");
  EXPECT_EQ(parse_guideline_json("```\n{\"GUIDELINE\":\"g\"}\n```"), "g");
  EXPECT_EQ(code_of([] { parse_guideline_json(R"({"guide":"g"})"); }), ErrorCode::MissingKey);
  EXPECT_EQ(code_of([] { parse_guideline_json(R"({"GUIDELINE":"  "})"); }), ErrorCode::MalformedOutput);
}

TEST(ParseBasicInfo, MissingFieldsUnknown) {
  const auto b = parse_basic_info_json(R"({"COMPANY_NAME":"Acme","LOCATION":"Oslo"})");
  EXPECT_EQ(b, (BasicInfo{"Acme", "Oslo", "unknown"}));
  EXPECT_EQ(code_of([] { parse_basic_info_json("nope"); }), ErrorCode::MalformedOutput);
}

TEST(ParseSerialize, RoundTripRandom) {
  std::mt19937 rng(3);
  for (int i = 0; i < 100; ++i) {
    ModelAnswer a;
    a.kind = (i % 2) ? AnswerKind::Summary : AnswerKind::Answer;
    a.answer_text = tt::random_words(rng, 1, 30) + " \"quoted\" \xC3\xA9";
    std::set<std::size_t> valid;
    for (int k = 0; k < 5; ++k) {
      const std::size_t s = rng() % 300;
      if (std::find(a.citation_order.begin(), a.citation_order.end(), s) == a.citation_order.end()) {
        a.citation_order.push_back(s);
      }
      valid.insert(s);
    }
    a.cited_sources = a.citation_order;
    std::sort(a.cited_sources.begin(), a.cited_sources.end());
    const std::string payload = serialize_answer_payload(a);
    a.raw = payload;
    EXPECT_EQ(parse_answer_json(payload, valid), a);

    ConformityResult c;
    c.question_index = 1 + i % 11;
    c.analysis_text = tt::random_words(rng, 1, 200);
    c.score = static_cast<int>(rng() % 101);
    c.analysis_too_long = text::word_count(c.analysis_text) > kMaxAnalysisWords;
    EXPECT_EQ(parse_conformity_json(serialize_conformity_payload(c), c.question_index), c);
    EXPECT_EQ(conformity_from_json(to_json(c)), c);
    EXPECT_EQ(model_answer_from_json(to_json(a)), a);
  }
}

TEST(AutoReply, TemplateAware) {
  const auto qa = ScriptedLlmBackend::auto_reply("QUESTION: q\nContent: some text\nSource: 12\n");
  const auto a = parse_answer_json(qa, {12});
  EXPECT_EQ(a.cited_sources, (std::vector<std::size_t>{12}));
  const auto conf = ScriptedLlmBackend::auto_reply("SCORE: An integer score from 0 to 100");
  EXPECT_EQ(parse_conformity_json(conf, 1).score, 50);
  EXPECT_EQ(parse_basic_info_json(ScriptedLlmBackend::auto_reply("keys: COMPANY_NAME, LOCATION")).company_name,
            "unknown");
  EXPECT_FALSE(parse_guideline_json(ScriptedLlmBackend::auto_reply("a single key \"GUIDELINE\"")).empty());
}

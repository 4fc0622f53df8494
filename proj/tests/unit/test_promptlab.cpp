#include <gtest/gtest.h>

#include <fstream>

#include "test_support.hpp"
#include "tcfd/error.hpp"
#include "tcfd/promptlab.hpp"

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

const GuidelineList& seed() {
  static const GuidelineList g = QuestionBank::builtin().seed_guidelines;
  return g;
}

FeedbackRecord cheap_talk() {
  FeedbackRecord fb;
  fb.answer_id = "doc:q3";
  fb.expert_id = "expert-1";
  fb.feedback_text = "The answer repeats cheap talk instead of concrete measures.";
  fb.question_index = 3;
  return fb;
}

const FeedbackContext kCtx{"QUESTION: How does the company assess climate risks?",
                           R"({"ANSWER":"The company is committed to climate action.","SOURCES":[4]})", "Assurant"};

}  // namespace

TEST(FeedbackToGuideline, ReturnsModelGuideline) {
  ScriptedLlmBackend llm;
  llm.add_rule("repeats cheap talk",
               R"({"GUIDELINE":"Ignore commitments that lack concrete actions, targets or figures."})");
  const auto g = feedback_to_guideline(cheap_talk(), seed(), kCtx, llm);
  EXPECT_EQ(g, "Ignore commitments that lack concrete actions, targets or figures.");
  EXPECT_EQ(llm.calls(), 1u);
}

TEST(FeedbackToGuideline, RejectsCompanyNames) {
  ScriptedLlmBackend llm;
  llm.add_rule("repeats cheap talk", R"({"GUIDELINE":"For ASSURANT, list the insurance products."})");
  try {
    feedback_to_guideline(cheap_talk(), seed(), kCtx, llm);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CompanySpecificGuideline);
    EXPECT_EQ(e.stage(), "prompt_engineering");
  }
}

TEST(FeedbackToGuideline, MalformedAndNotPending) {
  ScriptedLlmBackend llm;
  llm.add_rule("repeats cheap talk", "Here is my advice: be concrete.");
  EXPECT_EQ(code_of([&] { feedback_to_guideline(cheap_talk(), seed(), kCtx, llm); }), ErrorCode::MalformedOutput);
  auto done = cheap_talk();
  done.status = FeedbackStatus::Transformed;
  EXPECT_EQ(code_of([&] { feedback_to_guideline(done, seed(), kCtx, llm); }), ErrorCode::InvalidTransition);
}

TEST(AppendGuideline, GeneralAndSpecific) {
  const auto g2 = append_guideline(seed(), "Prefer figures over intentions.", GuidelineScope::general(), "feedback:fb-1");
  ASSERT_EQ(g2.general.size(), 8u);
  EXPECT_EQ(g2.version, 2);
  EXPECT_EQ(g2.general.back().origin, "feedback:fb-1");
  EXPECT_NE(g2.render_general(100).find("8. Prefer figures over intentions."), std::string::npos);
  EXPECT_EQ(seed().general.size(), 7u);

  const auto g3 = append_guideline(g2, "Name the scenarios used.", GuidelineScope::specific(3));
  EXPECT_EQ(g3.version, 3);
  EXPECT_EQ(g3.specific.at(3).text, "Name the scenarios used.");
  EXPECT_EQ(g3.specific.at(4), seed().specific.at(4));
  EXPECT_EQ(g3.general.size(), 8u);

  EXPECT_EQ(code_of([] { append_guideline(seed(), "  ", GuidelineScope::general()); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { append_guideline(seed(), "x", GuidelineScope::specific(12)); }), ErrorCode::InvalidArgument);
}

TEST(FeedbackStore, RecordListTransition) {
  FeedbackStore store;
  const auto a = store.record_feedback(cheap_talk());
  EXPECT_EQ(a.feedback_id, "fb-000001");
  EXPECT_FALSE(a.created_at.empty());
  auto other = cheap_talk();
  other.question_index.reset();
  const auto b = store.record_feedback(other);
  EXPECT_EQ(store.list_feedback().size(), 2u);
  EXPECT_EQ(store.list_feedback(FeedbackStatus::Pending).size(), 2u);

  const auto t = store.transition(a.feedback_id, FeedbackStatus::Transformed, 2);
  EXPECT_EQ(t.guideline_version, 2);
  EXPECT_EQ(store.list_feedback(FeedbackStatus::Pending).size(), 1u);
  EXPECT_EQ(store.get(a.feedback_id)->status, FeedbackStatus::Transformed);
  EXPECT_EQ(code_of([&] { store.transition(a.feedback_id, FeedbackStatus::Archived); }), ErrorCode::InvalidTransition);
  EXPECT_EQ(code_of([&] { store.transition(b.feedback_id, FeedbackStatus::Pending); }), ErrorCode::InvalidTransition);
  EXPECT_EQ(code_of([&] { store.transition("fb-999", FeedbackStatus::Archived); }), ErrorCode::NotFound);
  EXPECT_EQ(store.transition(b.feedback_id, FeedbackStatus::Archived).status, FeedbackStatus::Archived);
}

TEST(FeedbackStore, Validation) {
  FeedbackStore store;
  auto blank = cheap_talk();
  blank.feedback_text = " ";
  EXPECT_EQ(code_of([&] { store.record_feedback(blank); }), ErrorCode::InvalidArgument);
  auto bad_q = cheap_talk();
  bad_q.question_index = 0;
  EXPECT_EQ(code_of([&] { store.record_feedback(bad_q); }), ErrorCode::InvalidArgument);
  auto named = cheap_talk();
  named.feedback_id = "mine";
  store.record_feedback(named);
  EXPECT_EQ(code_of([&] { store.record_feedback(named); }), ErrorCode::Conflict);
}

TEST(FeedbackStore, AppendOnlyFile) {
  tt::TempDir dir;
  const auto path = dir.path() / "feedback.jsonl";
  {
    FeedbackStore store(path);
    const auto a = store.record_feedback(cheap_talk());
    store.transition(a.feedback_id, FeedbackStatus::Transformed, 2);
  }
  const std::string log = tt::read_text(path);
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 2);
  FeedbackStore reopened(path);
  const auto all = reopened.list_feedback();
  ASSERT_EQ(all.size(), 1u);
  EXPECT_EQ(all[0].status, FeedbackStatus::Transformed);
  EXPECT_EQ(feedback_from_json(to_json(all[0])), all[0]);
}

TEST(GuidelineStore, DraftsPromoteAndReload) {
  tt::TempDir dir;
  const auto path = dir.path() / "guidelines.json";
  {
    GuidelineStore store(seed(), path);
    EXPECT_EQ(store.active_version(), 1);
    const auto v2 = store.append("Prefer figures over intentions.", GuidelineScope::general(), "feedback:fb-1");
    const auto v3 = store.append("Name the scenarios used.", GuidelineScope::specific(3), "feedback:fb-2");
    EXPECT_EQ(v2.version, 2);
    EXPECT_EQ(v3.version, 3);
    EXPECT_EQ(v3.general.size(), 8u);
    EXPECT_EQ(store.latest_version(), 3);
    EXPECT_EQ(store.active(), seed());
    store.promote(3);
    EXPECT_EQ(store.active().version, 3);
    EXPECT_FALSE(store.is_promoted(2));
    EXPECT_EQ(code_of([&] { store.promote(9); }), ErrorCode::NotFound);
  }
  GuidelineStore reloaded(GuidelineList{}, path);
  EXPECT_EQ(reloaded.active_version(), 3);
  EXPECT_EQ(reloaded.active().specific.at(3).text, "Name the scenarios used.");
  EXPECT_EQ(*reloaded.version(1), seed());
  EXPECT_TRUE(reloaded.is_promoted(1));
  const auto j = nlohmann::json::parse(tt::read_text(path));
  EXPECT_EQ(j.at("history").size(), 3u);
  EXPECT_EQ(j.at("version"), 3);
}

TEST(GuidelineStore, CorruptFile) {
  tt::TempDir dir;
  const auto path = dir.path() / "guidelines.json";
  std::ofstream(path) << "{not json";
  EXPECT_EQ(code_of([&] { GuidelineStore s(seed(), path); }), ErrorCode::IoFailure);
}

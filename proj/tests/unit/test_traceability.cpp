#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "test_support.hpp"
#include "tcfd/error.hpp"
#include "tcfd/traceability.hpp"

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

AnnotationRecord ann(std::string id, std::string who, ContentLabel c, SourceLabel s, bool adj = false) {
  return {std::move(id), std::move(who), c, s, adj};
}

constexpr auto S = ContentLabel::Supported;
constexpr auto H = ContentLabel::Hallucinated;
constexpr auto Honest = SourceLabel::Honest;
constexpr auto SrcH = SourceLabel::Hallucinated;
constexpr auto NA = SourceLabel::NotApplicable;

}  // namespace

TEST(Rouge, Identity) {
  for (const auto v : {RougeVariant::R1, RougeVariant::R2, RougeVariant::RL}) {
    EXPECT_DOUBLE_EQ(rouge_precision("the board meets", "the board meets", v), 1.0);
  }
}

TEST(Rouge, HandDerived) {
  EXPECT_DOUBLE_EQ(rouge_precision("a b c", "a x c", RougeVariant::R1), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(rouge_precision("a b c", "a x c", RougeVariant::R2), 0.0);
  EXPECT_DOUBLE_EQ(rouge_precision("a b c", "a x c", RougeVariant::RL), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(rouge_precision("a b", "x y", RougeVariant::R1), 0.0);
  // Clipping: "a a a" against "a" matches one unigram.
  EXPECT_DOUBLE_EQ(rouge_precision("a a a", "a", RougeVariant::R1), 1.0 / 3.0);
  // Case and punctuation are ignored.
  EXPECT_DOUBLE_EQ(rouge_precision("Net-Zero!", "net zero", RougeVariant::R2), 1.0);
}

TEST(Rouge, EmptyCandidate) {
  EXPECT_EQ(code_of([] { rouge_precision("", "x", RougeVariant::R1); }), ErrorCode::EmptyCandidate);
  EXPECT_EQ(code_of([] { rouge_precision(" ,. ", "x", RougeVariant::RL); }), ErrorCode::EmptyCandidate);
}

TEST(Rouge, AppendingReferenceNeverLowersR1) {
  std::mt19937 rng(9);
  for (int i = 0; i < 200; ++i) {
    const std::string c = tt::random_words(rng, 1, 15);
    const std::string r = tt::random_words(rng, 1, 15);
    const std::string more = r + " " + tt::random_words(rng, 1, 10);
    EXPECT_LE(rouge_precision(c, r, RougeVariant::R1), rouge_precision(c, more, RougeVariant::R1));
    EXPECT_LE(rouge_precision(c, r, RougeVariant::RL), rouge_precision(c, more, RougeVariant::RL));
  }
}

TEST(Evidence, QuotedFragments) {
  const auto chunks = tt::evidence_chunks();
  const auto m = locate_evidence("preliminary scenario analysis", chunks);
  ASSERT_FALSE(m.empty());
  EXPECT_EQ(m[0].source_number, 215u);
  const auto& c215 = chunks[0];
  EXPECT_EQ(c215.text.substr(m[0].start, m[0].end - m[0].start), "Preliminary Scenario Analysis");
  const auto l = locate_evidence("Longer-Term", chunks);
  ASSERT_EQ(l.size(), 1u);
  EXPECT_EQ(l[0].source_number, 166u);
  EXPECT_TRUE(locate_evidence("offshore wind", chunks).empty());
}

TEST(Evidence, WhitespaceCollapsedAndSourceOrder) {
  std::vector<DocumentChunk> chunks(2);
  chunks[0].source_number = 9;
  chunks[0].text = "net   zero\nby 2040";
  chunks[1].source_number = 4;
  chunks[1].text = "Net zero by 2050";
  const auto m = locate_evidence("NET ZERO  by", chunks);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].source_number, 4u);
  EXPECT_EQ(m[1].source_number, 9u);
  EXPECT_EQ(chunks[0].text.substr(m[1].start, m[1].end - m[1].start), "net   zero\nby");
  EXPECT_EQ(code_of([&] { locate_evidence(" ab ", chunks); }), ErrorCode::FragmentTooShort);
}

TEST(Lint, SeamWarning) {
  const auto w = lint_concatenation(tt::kSeamAnswer, tt::seam_chunks());
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].first_source, 174u);
  EXPECT_EQ(w[0].second_source, 186u);
  EXPECT_NE(w[0].window.find("tracking climate"), std::string::npos);
}

TEST(Lint, NoWarningsForSingleChunkOrNovelText) {
  const auto chunks = tt::seam_chunks();
  EXPECT_TRUE(lint_concatenation("additional costs associated with tracking", chunks).empty());
  EXPECT_TRUE(lint_concatenation(chunks[1].text, chunks).empty());
  EXPECT_TRUE(lint_concatenation("Completely unrelated statement about wind farms and solar parks.", chunks).empty());
  EXPECT_TRUE(lint_concatenation(tt::kSeamAnswer, std::span(chunks).first(1)).empty());
}

TEST(Kappa, HandCase) {
  // a=20 both 1, b=5 (1,0), c=10 (0,1), d=15 both 0.
  std::vector<int> x, y;
  auto push = [&](int n, int l, int r) {
    for (int i = 0; i < n; ++i) {
      x.push_back(l);
      y.push_back(r);
    }
  };
  push(20, 1, 1);
  push(5, 1, 0);
  push(10, 0, 1);
  push(15, 0, 0);
  EXPECT_NEAR(cohens_kappa(x, y), 0.4, 1e-9);
}

TEST(Kappa, DegenerateAndErrors) {
  const std::vector<int> same{1, 0, 1, 1};
  EXPECT_DOUBLE_EQ(cohens_kappa(same, same), 1.0);
  const std::vector<int> ones{1, 1, 1};
  EXPECT_DOUBLE_EQ(cohens_kappa(ones, ones), 1.0);
  const std::vector<int> a{1, 0}, b{1};
  EXPECT_EQ(code_of([&] { cohens_kappa(a, b); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([] { cohens_kappa(std::vector<int>{}, std::vector<int>{}); }), ErrorCode::InvalidArgument);
}

TEST(Kappa, IndependentLabelsNearZero) {
  std::mt19937 rng(17);
  std::vector<int> a(20000), b(20000);
  for (auto& x : a) x = rng() % 2;
  for (auto& x : b) x = rng() % 2;
  EXPECT_NEAR(cohens_kappa(a, b), 0.0, 0.03);
  EXPECT_NEAR(cohens_kappa(a, b), tt::kappa_from_confusion(a, b), 1e-12);
}

TEST(Adjudication, AgreementDisputeAndMissing) {
  const std::vector<AnnotationRecord> recs = {
      ann("x", "a", S, Honest), ann("x", "b", S, Honest),
      ann("y", "a", S, Honest), ann("y", "b", H, NA), ann("y", "c", H, NA, true),
  };
  std::size_t disputed = 0;
  const auto f = adjudicate(recs, &disputed);
  EXPECT_EQ(disputed, 1u);
  EXPECT_EQ(f.at("x").content, S);
  EXPECT_EQ(f.at("y").content, H);
  const std::vector<AnnotationRecord> unresolved = {ann("z", "a", S, Honest), ann("z", "b", S, SrcH)};
  EXPECT_EQ(code_of([&] { adjudicate(unresolved); }), ErrorCode::MissingAdjudication);
  const auto summary = evaluation_run({}, recs);
  EXPECT_EQ(summary.n_total, 2u);
  EXPECT_EQ(summary.n_content_supported, 1u);
}

TEST(Validate, SourceLabelRule) {
  EXPECT_NO_THROW(validate(ann("x", "a", S, Honest)));
  EXPECT_NO_THROW(validate(ann("x", "a", H, NA)));
  EXPECT_EQ(code_of([] { validate(ann("x", "a", H, Honest)); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { validate(ann("x", "a", S, NA)); }), ErrorCode::InvalidArgument);
}

TEST(Rates, TableOneRows) {
  auto rates = [](int n, int supported, int honest) {
    std::vector<AnnotationRecord> recs;
    std::map<std::string, FinalLabel> finals;
    for (int i = 0; i < n; ++i) {
      const std::string id = "a" + std::to_string(i);
      const auto c = i < supported ? S : H;
      const auto s = i >= supported ? NA : (i < honest ? Honest : SrcH);
      recs.push_back(ann(id, "a", c, s));
      finals[id] = {c, s};
    }
    return hallucination_rates(recs, finals);
  };
  const auto chatgpt = rates(110, 92, 69);
  EXPECT_NEAR(chatgpt.content_free_rate, 83.63, 0.01);
  EXPECT_NEAR(chatgpt.source_free_rate_given_content, 75.00, 0.01);
  EXPECT_EQ(format_percent(chatgpt.content_free_rate), "83.63");
  const auto gpt4 = rates(110, 76, 55);
  EXPECT_NEAR(gpt4.content_free_rate, 69.09, 0.01);
  EXPECT_NEAR(gpt4.source_free_rate_given_content, 72.37, 0.01);
  const auto all = rates(10, 10, 10);
  EXPECT_DOUBLE_EQ(all.content_free_rate, 100.0);
  EXPECT_DOUBLE_EQ(all.source_free_rate_given_content, 100.0);
  EXPECT_EQ(code_of([] {
              const std::vector<AnnotationRecord> r{ann("q", "a", S, Honest)};
              hallucination_rates(r, {});
            }),
            ErrorCode::MissingFinalLabel);
}

TEST(Rates, CountSearchOracleIsUnique) {
  EXPECT_EQ(tt::count_search(110, 83.63, 75.00, 0.01), (std::vector<std::pair<int, int>>{{92, 69}}));
  EXPECT_EQ(tt::count_search(110, 69.09, 72.37, 0.01), (std::vector<std::pair<int, int>>{{76, 55}}));
}

TEST(Rates, PermutationInvariant) {
  auto recs = load_annotations_jsonl(tt::fixture("eval/chatgpt_annotations.jsonl"));
  const auto base = hallucination_rates(recs, adjudicate(recs));
  std::mt19937 rng(1);
  std::shuffle(recs.begin(), recs.end(), rng);
  const auto shuffled = hallucination_rates(recs, adjudicate(recs));
  EXPECT_EQ(base.n_content_supported, shuffled.n_content_supported);
  EXPECT_EQ(base.n_source_honest, shuffled.n_source_honest);
}

TEST(EvaluationRun, ChatGptCorpus) {
  const auto answers = load_answers_jsonl(tt::fixture("eval/chatgpt_answers.jsonl"));
  const auto recs = load_annotations_jsonl(tt::fixture("eval/chatgpt_annotations.jsonl"));
  const EvalSummary s = evaluation_run(answers, recs);
  EXPECT_EQ(s.n_total, 110u);
  EXPECT_EQ(s.n_content_supported, 92u);
  EXPECT_EQ(s.n_source_honest, 69u);
  EXPECT_EQ(s.n_disputed, 17u);
  EXPECT_NEAR(s.content_free_rate, 83.63, 0.01);
  EXPECT_NEAR(s.source_free_rate_given_content, 75.00, 0.01);
  // Kappa recomputed from the primary annotators' labels.
  std::map<std::string, std::pair<int, int>> labels;
  std::map<std::string, int> seen;
  for (const auto& r : recs) {
    if (r.adjudicator) continue;
    const int v = r.content_label == S ? 1 : 0;
    (seen[r.answer_id]++ == 0 ? labels[r.answer_id].first : labels[r.answer_id].second) = v;
  }
  std::vector<int> a, b;
  for (const auto& [id, p] : labels) {
    a.push_back(p.first);
    b.push_back(p.second);
  }
  EXPECT_NEAR(s.kappa_content, tt::kappa_from_confusion(a, b), 1e-12);
  EXPECT_GT(s.rouge1_p, 0.0);
  EXPECT_LE(s.rouge1_p, 100.0);
}

TEST(Jsonl, ReportsLineOnError) {
  tt::TempDir dir;
  const auto p = dir.path() / "bad.jsonl";
  {
    std::ofstream out(p);
    out << R"({"answer_id":"x","annotator_id":"a","content_label":"supported","source_label":"honest"})" << "\n";
    out << R"({"answer_id":"x","annotator_id":"b","content_label":"maybe","source_label":"honest"})" << "\n";
  }
  try {
    load_annotations_jsonl(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
}

TEST(FormatPercent, Truncates) {
  EXPECT_EQ(format_percent(100.0 * 92 / 110), "83.63");
  EXPECT_EQ(format_percent(75.0), "75.00");
  EXPECT_EQ(format_percent(100.0 * 55 / 76), "72.36");
  EXPECT_EQ(format_percent(100.0), "100.00");
}

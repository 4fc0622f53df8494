#include <gtest/gtest.h>

#include <random>
#include <string>

#include "test_support.hpp"
#include "tcfd/error.hpp"
#include "tcfd/ingestion.hpp"
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

Document plain(const std::string& s) { return load_document(s, InputFormat::PlainText); }

}  // namespace

TEST(LoadDocument, PlainTextIsOnePage) {
  const Document d = plain("hello");
  ASSERT_EQ(d.pages.size(), 1u);
  EXPECT_EQ(d.pages[0].number, 1);
  EXPECT_EQ(d.pages[0].text, "hello");
  EXPECT_EQ(d.canonical_text(), "hello");
}

TEST(LoadDocument, FormFeedSplitsPages) {
  const Document d = load_document("a\x0C" "b", InputFormat::PageDelimitedText);
  ASSERT_EQ(d.pages.size(), 2u);
  EXPECT_EQ(d.pages[0], (Page{1, "a"}));
  EXPECT_EQ(d.pages[1], (Page{2, "b"}));
  EXPECT_EQ(d.canonical_text(), "a\nb");
}

TEST(LoadDocument, TrailingFormFeedAddsNoPage) {
  const Document d = load_document("a\x0C" "b\x0C", InputFormat::PageDelimitedText);
  EXPECT_EQ(d.pages.size(), 2u);
}

TEST(LoadDocument, EmptyInputRejected) {
  EXPECT_EQ(code_of([] { plain(""); }), ErrorCode::EmptyDocument);
  EXPECT_EQ(code_of([] { load_document("\x0C", InputFormat::PageDelimitedText); }), ErrorCode::EmptyDocument);
}

TEST(LoadDocument, RawPdfNeedsExtractor) {
  EXPECT_EQ(code_of([] { load_document("%PDF-1.7 binary", InputFormat::Pdf); }), ErrorCode::ExtractionFailure);
  const Document d = load_document("page one\x0Cpage two", InputFormat::Pdf);
  EXPECT_EQ(d.pages.size(), 2u);
}

TEST(LoadDocument, ContentHashId) {
  const Document a = plain("same text");
  const Document b = plain("same text");
  EXPECT_EQ(a.doc_id, b.doc_id);
  EXPECT_EQ(a.doc_id.size(), 16u);
  EXPECT_NE(a.doc_id, plain("other text").doc_id);
  LoadOptions opts;
  opts.doc_id = "custom";
  EXPECT_EQ(load_document("x", InputFormat::PlainText, opts).doc_id, "custom");
}

TEST(LoadDocument, InvalidUtf8IsReplaced) {
  const Document d = plain(std::string("ab\xff" "c"));
  EXPECT_EQ(d.pages[0].text, "ab\xEF\xBF\xBD" "c");
}

TEST(LoadDocument, UnknownFormatName) {
  EXPECT_EQ(code_of([] { parse_input_format("docx"); }), ErrorCode::UnsupportedFormat);
  EXPECT_EQ(parse_input_format("pages"), InputFormat::PageDelimitedText);
}

TEST(ChunkDocument, ExactlyOneWindow) {
  const auto chunks = chunk_document(plain(std::string(500, 'x')));
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].char_start, 0u);
  EXPECT_EQ(chunks[0].char_end, 500u);
  EXPECT_EQ(chunks[0].text.size(), 500u);
}

TEST(ChunkDocument, Boundary980) {
  const auto chunks = chunk_document(plain(std::string(980, 'x')), 500, 20);
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].char_start, 0u);
  EXPECT_EQ(chunks[1].char_start, 480u);
  EXPECT_EQ(chunks[1].char_end - chunks[1].char_start, 500u);
}

TEST(ChunkDocument, Boundary981) {
  const auto chunks = chunk_document(plain(std::string(981, 'x')), 500, 20);
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[0].char_start, 0u);
  EXPECT_EQ(chunks[1].char_start, 480u);
  EXPECT_EQ(chunks[2].char_start, 960u);
  EXPECT_EQ(chunks[2].text.size(), 21u);
}

TEST(ChunkDocument, InvalidParams) {
  const Document d = plain("abc");
  EXPECT_EQ(code_of([&] { chunk_document(d, 0, 0); }), ErrorCode::InvalidChunkParams);
  EXPECT_EQ(code_of([&] { chunk_document(d, 10, 10); }), ErrorCode::InvalidChunkParams);
}

TEST(ChunkDocument, SourceNumbersAndPages) {
  // Page 1 is 600 chars, so the chunk starting at 480 is on page 1 and the
  // one at 960 on page 2.
  const Document d = load_document(std::string(600, 'a') + "\x0C" + std::string(600, 'b'),
                                   InputFormat::PageDelimitedText);
  const auto chunks = chunk_document(d);
  ASSERT_EQ(chunks.size(), tt::expected_chunk_count(1201, 500, 20));
  for (std::size_t i = 0; i < chunks.size(); ++i) EXPECT_EQ(chunks[i].source_number, i);
  EXPECT_EQ(chunks[0].page_number, 1);
  EXPECT_EQ(chunks[1].page_number, 1);
  EXPECT_EQ(chunks[2].page_number, 2);
}

TEST(ChunkDocument, MultiByteNeverSplit) {
  std::string s;
  for (int i = 0; i < 700; ++i) s += (i % 3 == 0) ? "\xC3\xA9" : "\xE2\x82\xAC";
  const auto chunks = chunk_document(plain(s));
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(text::code_point_count(chunks[0].text), 500u);
  EXPECT_EQ(text::code_point_count(chunks[1].text), 220u);
  EXPECT_EQ(text::sanitize_utf8(chunks[1].text), chunks[1].text);
}

TEST(ChunkDocument, Deterministic) {
  const Document d = tt::sample_report();
  EXPECT_EQ(chunk_document(d), chunk_document(d));
  EXPECT_EQ(chunks_to_jsonl(chunk_document(d)), chunks_to_jsonl(chunk_document(d)));
}

TEST(ChunkDocument, JsonRoundTrip) {
  const Document d = tt::sample_report();
  EXPECT_EQ(document_from_json(to_json(d)), d);
  for (const auto& c : chunk_document(d)) EXPECT_EQ(chunk_from_json(to_json(c)), c);
}

TEST(Text, AlnumTokens) {
  EXPECT_EQ(text::alnum_tokens("Net-Zero by 2050!"), (std::vector<std::string>{"net", "zero", "by", "2050"}));
  EXPECT_TRUE(text::alnum_tokens("  ...  ").empty());
}

TEST(Text, NormalizeForSearchKeepsOffsets) {
  const auto n = text::normalize_for_search("  Longer \n\t TERM ");
  EXPECT_EQ(n.text, "longer term");
  ASSERT_EQ(n.source_offset.size(), n.text.size());
  EXPECT_EQ(n.source_offset.front(), 2u);
  EXPECT_EQ(n.source_offset[7], 12u);
}

TEST(Text, WordCount) {
  EXPECT_EQ(text::word_count(""), 0u);
  EXPECT_EQ(text::word_count(" a  b\tc\n"), 3u);
}

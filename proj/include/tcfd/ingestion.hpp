#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace tcfd {

struct Page {
  int number = 1;  // 1-based
  std::string text;

  bool operator==(const Page&) const = default;
};

/// A report as page-addressed text. The canonical text is the pages joined
/// by a single '\n'.
struct Document {
  std::string doc_id;
  std::vector<Page> pages;
  std::map<std::string, std::string> metadata;

  std::string canonical_text() const;

  bool operator==(const Document&) const = default;
};

/// A source-numbered character window of the canonical text. Offsets are in
/// code points; `text` is the corresponding UTF-8 slice.
struct DocumentChunk {
  std::size_t source_number = 0;
  int page_number = 1;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::string text;

  bool operator==(const DocumentChunk&) const = default;
};

enum class InputFormat { PlainText, PageDelimitedText, Pdf };

InputFormat parse_input_format(std::string_view name);

/// Turns PDF bytes into page-delimited text (pages separated by '\f').
class TextExtractor {
 public:
  virtual ~TextExtractor() = default;
  virtual std::string extract(std::string_view pdf_bytes) const = 0;
};

/// Accepts text that was already extracted (pdftotext output). Raw PDF
/// bytes are refused with ExtractionFailure.
class PassThroughExtractor final : public TextExtractor {
 public:
  std::string extract(std::string_view bytes) const override;
};

/// Runs poppler's `pdftotext` on a temporary copy of the bytes.
class PdftotextExtractor final : public TextExtractor {
 public:
  explicit PdftotextExtractor(std::string executable = "pdftotext");
  std::string extract(std::string_view pdf_bytes) const override;

 private:
  std::string executable_;
};

struct LoadOptions {
  std::string doc_id;  // empty: derived from the canonical text
  std::map<std::string, std::string> metadata;
  const TextExtractor* extractor = nullptr;  // nullptr: PassThroughExtractor
};

Document load_document(std::string_view raw, InputFormat format,
                       const LoadOptions& options = {});

inline constexpr std::size_t kDefaultChunkSize = 500;
inline constexpr std::size_t kDefaultChunkOverlap = 20;

std::vector<DocumentChunk> chunk_document(const Document& doc,
                                          std::size_t chunk_size = kDefaultChunkSize,
                                          std::size_t overlap = kDefaultChunkOverlap);

/// Content-hash identifier of a canonical text (first 16 hex digits of its
/// SHA-256).
std::string content_doc_id(std::string_view canonical_text);

nlohmann::json to_json(const Document& doc);
Document document_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DocumentChunk& chunk);
DocumentChunk chunk_from_json(const nlohmann::json& j);

/// One JSON object per line: {source, page, start, end, text}.
std::string chunks_to_jsonl(const std::vector<DocumentChunk>& chunks);

}  // namespace tcfd

#include "tcfd/ingestion.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "tcfd/error.hpp"
#include "tcfd/hashing.hpp"
#include "tcfd/text.hpp"

namespace tcfd {

namespace fs = std::filesystem;

std::string Document::canonical_text() const {
  std::string out;
  for (std::size_t i = 0; i < pages.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out += pages[i].text;
  }
  return out;
}

InputFormat parse_input_format(std::string_view name) {
  if (name == "plain_text" || name == "text" || name == "txt") return InputFormat::PlainText;
  if (name == "page_delimited_text" || name == "pages") return InputFormat::PageDelimitedText;
  if (name == "pdf") return InputFormat::Pdf;
  throw Error(ErrorCode::UnsupportedFormat, "unsupported input format: " + std::string(name));
}

std::string PassThroughExtractor::extract(std::string_view bytes) const {
  if (bytes.substr(0, 5) == "%PDF-") {
    throw Error(ErrorCode::ExtractionFailure,
                "binary PDF input needs a PDF text extractor (e.g. pdftotext)");
  }
  return std::string(bytes);
}

PdftotextExtractor::PdftotextExtractor(std::string executable) : executable_(std::move(executable)) {}

std::string PdftotextExtractor::extract(std::string_view pdf_bytes) const {
  char tmpl[] = "/tmp/tcfd-pdf-XXXXXX";
  const int fd = ::mkstemp(tmpl);
  if (fd < 0) throw Error(ErrorCode::IoFailure, "cannot create temporary file for PDF extraction");
  ::close(fd);
  const fs::path pdf_path = tmpl;
  {
    std::ofstream out(pdf_path, std::ios::binary);
    out.write(pdf_bytes.data(), static_cast<std::streamsize>(pdf_bytes.size()));
  }
  const std::string cmd = executable_ + " -q -enc UTF-8 '" + pdf_path.string() + "' - 2>/dev/null";
  std::string text;
  if (FILE* pipe = ::popen(cmd.c_str(), "r")) {
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) text.append(buf.data(), n);
    ::pclose(pipe);
  }
  std::error_code ec;
  fs::remove(pdf_path, ec);
  return text;
}

namespace {

std::vector<Page> split_pages(std::string_view text) {
  std::vector<Page> pages;
  std::size_t begin = 0;
  int number = 1;
  while (true) {
    const std::size_t ff = text.find('\f', begin);
    if (ff == std::string_view::npos) {
      // A trailing delimiter does not open an empty final page.
      if (begin < text.size() || pages.empty()) {
        pages.push_back({number, std::string(text.substr(begin))});
      }
      break;
    }
    pages.push_back({number++, std::string(text.substr(begin, ff - begin))});
    begin = ff + 1;
  }
  return pages;
}

bool all_blank(const std::vector<Page>& pages) {
  return std::all_of(pages.begin(), pages.end(),
                     [](const Page& p) { return text::trim(p.text).empty(); });
}

}  // namespace

Document load_document(std::string_view raw, InputFormat format, const LoadOptions& options) {
  if (raw.empty()) throw Error(ErrorCode::EmptyDocument, "document is empty");

  Document doc;
  switch (format) {
    case InputFormat::PlainText:
      doc.pages.push_back({1, text::sanitize_utf8(raw)});
      break;
    case InputFormat::PageDelimitedText:
      doc.pages = split_pages(text::sanitize_utf8(raw));
      break;
    case InputFormat::Pdf: {
      const PassThroughExtractor fallback;
      const TextExtractor& extractor = options.extractor ? *options.extractor : fallback;
      const std::string extracted = extractor.extract(raw);
      if (text::trim(extracted).empty()) {
        throw Error(ErrorCode::ExtractionFailure, "extractor reported no text");
      }
      doc.pages = split_pages(text::sanitize_utf8(extracted));
      if (all_blank(doc.pages)) throw Error(ErrorCode::ExtractionFailure, "extractor reported no text");
      break;
    }
  }
  if (doc.canonical_text().empty()) throw Error(ErrorCode::EmptyDocument, "document has no text");
  doc.metadata = options.metadata;
  doc.doc_id = options.doc_id.empty() ? content_doc_id(doc.canonical_text()) : options.doc_id;
  return doc;
}

std::vector<DocumentChunk> chunk_document(const Document& doc, std::size_t chunk_size,
                                          std::size_t overlap) {
  if (chunk_size == 0 || overlap >= chunk_size) {
    throw Error(ErrorCode::InvalidChunkParams,
                "need chunk_size > 0 and overlap < chunk_size (got " + std::to_string(chunk_size) +
                    ", " + std::to_string(overlap) + ")");
  }
  const std::string canonical = doc.canonical_text();
  const std::vector<std::size_t> offsets = text::code_point_offsets(canonical);
  const std::size_t length = offsets.size() - 1;
  if (length == 0) return {};

  // Code-point offset at which each page starts.
  std::vector<std::size_t> page_starts;
  {
    std::size_t pos = 0;
    for (const Page& p : doc.pages) {
      page_starts.push_back(pos);
      pos += text::code_point_count(p.text) + 1;
    }
  }
  auto page_of = [&](std::size_t cp) {
    const auto it = std::upper_bound(page_starts.begin(), page_starts.end(), cp);
    const auto idx = static_cast<std::size_t>(std::distance(page_starts.begin(), it)) - 1;
    return doc.pages.at(idx).number;
  };

  std::vector<DocumentChunk> chunks;
  const std::size_t stride = chunk_size - overlap;
  for (std::size_t start = 0;; start += stride) {
    const std::size_t end = std::min(start + chunk_size, length);
    DocumentChunk c;
    c.source_number = chunks.size();
    c.char_start = start;
    c.char_end = end;
    c.page_number = doc.pages.empty() ? 1 : page_of(start);
    c.text = canonical.substr(offsets[start], offsets[end] - offsets[start]);
    chunks.push_back(std::move(c));
    if (end >= length) break;
  }
  return chunks;
}

std::string content_doc_id(std::string_view canonical_text) {
  return sha256_hex(canonical_text).substr(0, 16);
}

nlohmann::json to_json(const Document& doc) {
  nlohmann::json pages = nlohmann::json::array();
  for (const Page& p : doc.pages) pages.push_back({{"page", p.number}, {"text", p.text}});
  return {{"doc_id", doc.doc_id}, {"metadata", doc.metadata}, {"pages", std::move(pages)}};
}

Document document_from_json(const nlohmann::json& j) {
  try {
    Document doc;
    doc.doc_id = j.at("doc_id").get<std::string>();
    if (j.contains("metadata")) doc.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    int expected = 1;
    for (const auto& p : j.at("pages")) {
      Page page{p.at("page").get<int>(), p.at("text").get<std::string>()};
      if (page.number != expected++) {
        throw Error(ErrorCode::InvalidArgument, "page numbers must increase from 1 without gaps");
      }
      doc.pages.push_back(std::move(page));
    }
    if (doc.pages.empty()) throw Error(ErrorCode::EmptyDocument, "document has no pages");
    return doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("invalid document JSON: ") + e.what());
  }
}

nlohmann::json to_json(const DocumentChunk& c) {
  return {{"source", c.source_number}, {"page", c.page_number}, {"start", c.char_start},
          {"end", c.char_end}, {"text", c.text}};
}

DocumentChunk chunk_from_json(const nlohmann::json& j) {
  DocumentChunk c;
  c.source_number = j.at("source").get<std::size_t>();
  c.page_number = j.at("page").get<int>();
  c.char_start = j.at("start").get<std::size_t>();
  c.char_end = j.at("end").get<std::size_t>();
  c.text = j.at("text").get<std::string>();
  return c;
}

std::string chunks_to_jsonl(const std::vector<DocumentChunk>& chunks) {
  std::string out;
  for (const auto& c : chunks) {
    out += to_json(c).dump();
    out.push_back('\n');
  }
  return out;
}

}  // namespace tcfd

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tcfd/analysis.hpp"
#include "tcfd/ingestion.hpp"
#include "tcfd/vector_index.hpp"

namespace tcfd {

/// Writes via a temporary sibling and rename.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

struct CatalogEntry {
  std::string doc_id;
  std::string title;
  std::string created_at;
  bool has_index = false;
  std::size_t analyses = 0;
};

struct WorkspaceIssue {
  std::string kind;  // orphan_directory, missing_document, missing_checksum, ...
  std::string path;
};

/// Filesystem store:
///
///   {root}/catalog.json
///   {root}/guidelines.json
///   {root}/feedback.jsonl
///   {root}/{doc_id}/document.json
///   {root}/{doc_id}/index.bin
///   {root}/{doc_id}/analyses/{timestamp}.json (+ .sha256)
///
/// Writers to one doc_id are serialised; distinct documents proceed
/// concurrently.
class Workspace {
 public:
  explicit Workspace(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  /// Stores the document under its content-hash id. Idempotent: returns the
  /// existing id when the same content was stored before.
  std::string put_document(Document doc);
  Document get_document(const std::string& doc_id) const;
  std::vector<CatalogEntry> list_documents() const;
  bool has_document(const std::string& doc_id) const;
  /// Conflict when analyses exist, unless forced.
  void delete_document(const std::string& doc_id, bool force = false);

  void put_index(const std::string& doc_id, const VectorIndex& index);
  VectorIndex get_index(const std::string& doc_id) const;
  bool has_index(const std::string& doc_id) const;

  /// Returns the analysis file name (timestamp-based, unique).
  std::string put_analysis(const ReportAnalysis& analysis);
  /// Raw bytes exactly as written; IoFailure on checksum mismatch.
  std::string get_latest_analysis_bytes(const std::string& doc_id) const;
  ReportAnalysis get_latest_analysis(const std::string& doc_id) const;
  /// Analysis file names in chronological order.
  std::vector<std::string> history(const std::string& doc_id) const;
  std::string get_analysis_bytes(const std::string& doc_id, const std::string& name) const;

  std::filesystem::path guidelines_path() const { return root_ / "guidelines.json"; }
  std::filesystem::path feedback_path() const { return root_ / "feedback.jsonl"; }

  /// Consistency check between catalog and files. Reports, never repairs.
  std::vector<WorkspaceIssue> check() const;

 private:
  std::filesystem::path doc_dir(const std::string& doc_id) const;
  std::mutex& doc_mutex(const std::string& doc_id) const;
  std::map<std::string, CatalogEntry> read_catalog() const;
  void write_catalog(const std::map<std::string, CatalogEntry>& catalog) const;

  std::filesystem::path root_;
  mutable std::mutex catalog_mutex_;
  mutable std::mutex locks_mutex_;
  mutable std::map<std::string, std::unique_ptr<std::mutex>> doc_locks_;
};

}  // namespace tcfd

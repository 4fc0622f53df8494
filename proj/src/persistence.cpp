#include "tcfd/persistence.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "tcfd/hashing.hpp"

namespace fs = std::filesystem;

namespace tcfd {

void atomic_write(const fs::path& path, std::string_view bytes) {
  static std::atomic<unsigned> counter{0};
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp" + std::to_string(counter++) + "-" +
                       std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) % 100000);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::IoFailure, "cannot replace " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

bool valid_doc_id(const std::string& id) {
  return !id.empty() && id.size() <= 128 && std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '-' || c == '_';
  });
}

nlohmann::json entry_json(const CatalogEntry& e) {
  return {{"doc_id", e.doc_id}, {"title", e.title}, {"created_at", e.created_at}};
}

// "2024-05-01T10:00:00.000Z" -> "2024-05-01T10-00-00.000Z"
std::string file_safe(std::string s) {
  std::replace(s.begin(), s.end(), ':', '-');
  std::erase_if(s, [](unsigned char c) { return !(std::isalnum(c) || c == '-' || c == '.' || c == '_'); });
  return s;
}

}  // namespace

Workspace::Workspace(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create workspace " + root_.string() + ": " + ec.message());
}

fs::path Workspace::doc_dir(const std::string& doc_id) const {
  if (!valid_doc_id(doc_id)) throw Error(ErrorCode::InvalidArgument, "invalid doc_id '" + doc_id + "'");
  return root_ / doc_id;
}

std::mutex& Workspace::doc_mutex(const std::string& doc_id) const {
  std::lock_guard lock(locks_mutex_);
  auto& slot = doc_locks_[doc_id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::map<std::string, CatalogEntry> Workspace::read_catalog() const {
  std::map<std::string, CatalogEntry> out;
  const fs::path p = root_ / "catalog.json";
  if (!fs::exists(p)) return out;
  const auto j = nlohmann::json::parse(read_file(p), nullptr, false);
  if (j.is_discarded() || !j.contains("documents")) throw Error(ErrorCode::IoFailure, "corrupt catalog " + p.string());
  for (const auto& e : j.at("documents")) {
    CatalogEntry c;
    c.doc_id = e.at("doc_id").get<std::string>();
    c.title = e.value("title", std::string{});
    c.created_at = e.value("created_at", std::string{});
    out[c.doc_id] = c;
  }
  return out;
}

void Workspace::write_catalog(const std::map<std::string, CatalogEntry>& catalog) const {
  nlohmann::json docs = nlohmann::json::array();
  for (const auto& [id, e] : catalog) docs.push_back(entry_json(e));
  atomic_write(root_ / "catalog.json", nlohmann::json{{"documents", docs}}.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Documents

std::string Workspace::put_document(Document doc) {
  if (doc.doc_id.empty()) doc.doc_id = content_doc_id(doc.canonical_text());
  const std::string id = doc.doc_id;
  const fs::path dir = doc_dir(id);
  std::lock_guard doc_lock(doc_mutex(id));
  const fs::path file = dir / "document.json";
  const std::string bytes = to_json(doc).dump() + "\n";
  if (!fs::exists(file) || read_file(file) != bytes) atomic_write(file, bytes);

  std::lock_guard lock(catalog_mutex_);
  auto catalog = read_catalog();
  if (!catalog.contains(id)) {
    CatalogEntry e;
    e.doc_id = id;
    const auto title = doc.metadata.find("title");
    const auto name = doc.metadata.find("filename");
    e.title = title != doc.metadata.end() ? title->second : (name != doc.metadata.end() ? name->second : id);
    e.created_at = utc_timestamp();
    catalog[id] = e;
    write_catalog(catalog);
  }
  return id;
}

Document Workspace::get_document(const std::string& doc_id) const {
  const fs::path file = doc_dir(doc_id) / "document.json";
  if (!fs::exists(file)) throw Error(ErrorCode::NotFound, "no document " + doc_id);
  const auto j = nlohmann::json::parse(read_file(file), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::IoFailure, "corrupt document file " + file.string());
  return document_from_json(j);
}

bool Workspace::has_document(const std::string& doc_id) const {
  return valid_doc_id(doc_id) && fs::exists(root_ / doc_id / "document.json");
}

std::vector<CatalogEntry> Workspace::list_documents() const {
  std::map<std::string, CatalogEntry> catalog;
  {
    std::lock_guard lock(catalog_mutex_);
    catalog = read_catalog();
  }
  std::vector<CatalogEntry> out;
  for (auto& [id, e] : catalog) {
    e.has_index = has_index(id);
    e.analyses = history(id).size();
    out.push_back(e);
  }
  return out;
}

void Workspace::delete_document(const std::string& doc_id, bool force) {
  const fs::path dir = doc_dir(doc_id);
  std::lock_guard doc_lock(doc_mutex(doc_id));
  if (!fs::exists(dir)) throw Error(ErrorCode::NotFound, "no document " + doc_id);
  if (!force && !history(doc_id).empty()) {
    throw Error(ErrorCode::Conflict, "document " + doc_id + " has stored analyses; pass force to delete");
  }
  std::lock_guard lock(catalog_mutex_);
  auto catalog = read_catalog();
  catalog.erase(doc_id);
  write_catalog(catalog);
  std::error_code ec;
  fs::remove_all(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot remove " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// Indexes

void Workspace::put_index(const std::string& doc_id, const VectorIndex& index) {
  const fs::path dir = doc_dir(doc_id);
  if (!has_document(doc_id)) throw Error(ErrorCode::NotFound, "no document " + doc_id);
  std::lock_guard doc_lock(doc_mutex(doc_id));
  atomic_write(dir / "index.bin", serialize_index(index));
}

VectorIndex Workspace::get_index(const std::string& doc_id) const {
  const fs::path file = doc_dir(doc_id) / "index.bin";
  if (!fs::exists(file)) throw Error(ErrorCode::NotFound, "no index for " + doc_id);
  return load_index(file);
}

bool Workspace::has_index(const std::string& doc_id) const {
  return valid_doc_id(doc_id) && fs::exists(root_ / doc_id / "index.bin");
}

// ---------------------------------------------------------------------------
// Analyses

std::string Workspace::put_analysis(const ReportAnalysis& analysis) {
  const fs::path dir = doc_dir(analysis.doc_id) / "analyses";
  if (!has_document(analysis.doc_id)) throw Error(ErrorCode::NotFound, "no document " + analysis.doc_id);
  std::lock_guard doc_lock(doc_mutex(analysis.doc_id));
  const std::size_t seq = history(analysis.doc_id).size() + 1;
  char prefix[16];
  std::snprintf(prefix, sizeof prefix, "%06zu", seq);
  const std::string name = std::string(prefix) + "_" + file_safe(analysis.created_at);
  const std::string bytes = serialize(analysis);
  atomic_write(dir / (name + ".json"), bytes);
  atomic_write(dir / (name + ".sha256"), sha256_hex(bytes) + "\n");
  return name;
}

std::vector<std::string> Workspace::history(const std::string& doc_id) const {
  const fs::path dir = doc_dir(doc_id) / "analyses";
  std::vector<std::string> names;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::string Workspace::get_analysis_bytes(const std::string& doc_id, const std::string& name) const {
  const bool safe_name = !name.empty() && name.find("..") == std::string::npos &&
                         std::all_of(name.begin(), name.end(), [](unsigned char c) {
                           return std::isalnum(c) || c == '-' || c == '_' || c == '.';
                         });
  if (!safe_name) throw Error(ErrorCode::InvalidArgument, "invalid analysis name '" + name + "'");
  const fs::path dir = doc_dir(doc_id) / "analyses";
  const fs::path file = dir / (name + ".json");
  if (!fs::exists(file)) throw Error(ErrorCode::NotFound, "no analysis " + name + " for " + doc_id);
  const std::string bytes = read_file(file);
  const fs::path sum = dir / (name + ".sha256");
  if (!fs::exists(sum)) throw Error(ErrorCode::IoFailure, "missing checksum for " + file.string());
  std::string expected = read_file(sum);
  while (!expected.empty() && std::isspace(static_cast<unsigned char>(expected.back()))) expected.pop_back();
  if (sha256_hex(bytes) != expected) throw Error(ErrorCode::IoFailure, "checksum mismatch for " + file.string());
  return bytes;
}

std::string Workspace::get_latest_analysis_bytes(const std::string& doc_id) const {
  const auto names = history(doc_id);
  if (names.empty()) throw Error(ErrorCode::NotFound, "no analysis for " + doc_id);
  return get_analysis_bytes(doc_id, names.back());
}

ReportAnalysis Workspace::get_latest_analysis(const std::string& doc_id) const {
  const auto j = nlohmann::json::parse(get_latest_analysis_bytes(doc_id), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::IoFailure, "corrupt analysis for " + doc_id);
  return report_analysis_from_json(j);
}

// ---------------------------------------------------------------------------
// Consistency check

std::vector<WorkspaceIssue> Workspace::check() const {
  std::vector<WorkspaceIssue> issues;
  std::map<std::string, CatalogEntry> catalog;
  try {
    std::lock_guard lock(catalog_mutex_);
    catalog = read_catalog();
  } catch (const Error&) {
    issues.push_back({"corrupt_catalog", (root_ / "catalog.json").string()});
  }
  std::set<std::string> dirs;
  for (const auto& e : fs::directory_iterator(root_)) {
    if (e.is_directory()) dirs.insert(e.path().filename().string());
  }
  for (const auto& d : dirs) {
    if (!catalog.contains(d)) issues.push_back({"orphan_directory", (root_ / d).string()});
  }
  for (const auto& [id, entry] : catalog) {
    const fs::path dir = root_ / id;
    if (!fs::exists(dir / "document.json")) {
      issues.push_back({"missing_document", (dir / "document.json").string()});
      continue;
    }
    if (fs::exists(dir / "index.bin")) {
      try {
        (void)load_index(dir / "index.bin");
      } catch (const Error&) {
        issues.push_back({"corrupt_index", (dir / "index.bin").string()});
      }
    }
    const fs::path adir = dir / "analyses";
    if (!fs::is_directory(adir)) continue;
    for (const auto& f : fs::directory_iterator(adir)) {
      const auto ext = f.path().extension();
      const fs::path stem = adir / f.path().stem();
      if (ext == ".json") {
        if (!fs::exists(stem.string() + ".sha256")) {
          issues.push_back({"missing_checksum", f.path().string()});
          continue;
        }
        try {
          (void)get_analysis_bytes(id, f.path().stem().string());
        } catch (const Error&) {
          issues.push_back({"checksum_mismatch", f.path().string()});
        }
      } else if (ext == ".sha256") {
        if (!fs::exists(stem.string() + ".json")) issues.push_back({"orphan_checksum", f.path().string()});
      } else {
        issues.push_back({"unexpected_file", f.path().string()});
      }
    }
  }
  return issues;
}

}  // namespace tcfd

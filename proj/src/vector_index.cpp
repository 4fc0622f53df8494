#include "tcfd/vector_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <openssl/sha.h>

#include "tcfd/error.hpp"
#include "tcfd/kernels.hpp"

namespace tcfd {

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "vectors of dimension " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

VectorIndex::VectorIndex(std::string doc_id, std::size_t dim, std::string embedder_id)
    : doc_id_(std::move(doc_id)), embedder_id_(std::move(embedder_id)), dim_(dim) {
  if (dim == 0) throw Error(ErrorCode::InvalidArgument, "index dimension must be positive");
}

VectorIndex VectorIndex::build(std::string doc_id, std::vector<DocumentChunk> chunks,
                               const EmbeddingBackend& backend) {
  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) texts.push_back(c.text);
  std::vector<EmbeddingVector> vectors = embed_texts(texts, backend);
  VectorIndex index(std::move(doc_id), backend.dim(), backend.id());
  for (std::size_t i = 0; i < chunks.size(); ++i) index.add(std::move(chunks[i]), std::move(vectors[i]));
  return index;
}

void VectorIndex::add(DocumentChunk chunk, EmbeddingVector vector) {
  if (vector.size() != dim_) {
    throw Error(ErrorCode::DimensionMismatch, "vector of dimension " + std::to_string(vector.size()) +
                                                  ", index has " + std::to_string(dim_));
  }
  if (!std::all_of(vector.begin(), vector.end(), [](float x) { return std::isfinite(x); })) {
    throw Error(ErrorCode::InvalidArgument, "vector contains non-finite values");
  }
  const auto pos = std::lower_bound(chunks_.begin(), chunks_.end(), chunk.source_number,
                                    [](const DocumentChunk& c, std::size_t s) { return c.source_number < s; });
  if (pos != chunks_.end() && pos->source_number == chunk.source_number) {
    throw Error(ErrorCode::Conflict, "duplicate source number " + std::to_string(chunk.source_number));
  }
  const auto row = static_cast<std::size_t>(pos - chunks_.begin());
  double norm = 0.0;
  for (const float x : vector) norm += static_cast<double>(x) * x;
  chunks_.insert(pos, std::move(chunk));
  data_.insert(data_.begin() + static_cast<long>(row * dim_), vector.begin(), vector.end());
  norms_.insert(norms_.begin() + static_cast<long>(row), std::sqrt(norm));
}

std::span<const float> VectorIndex::vector(std::size_t row) const {
  return std::span<const float>(data_).subspan(row * dim_, dim_);
}

const DocumentChunk* VectorIndex::find(std::size_t source_number) const {
  const auto pos = std::lower_bound(chunks_.begin(), chunks_.end(), source_number,
                                    [](const DocumentChunk& c, std::size_t s) { return c.source_number < s; });
  if (pos == chunks_.end() || pos->source_number != source_number) return nullptr;
  return &*pos;
}

bool VectorIndex::operator==(const VectorIndex& other) const {
  if (doc_id_ != other.doc_id_ || embedder_id_ != other.embedder_id_ || dim_ != other.dim_ ||
      chunks_ != other.chunks_ || data_.size() != other.data_.size()) {
    return false;
  }
  // Bit-exact comparison, so -0.0 != 0.0 and NaN payloads would count.
  return std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

std::vector<ScoredChunk> top_k(const VectorIndex& index, std::span<const float> query, std::size_t k) {
  if (index.empty()) throw Error(ErrorCode::EmptyIndex, "index is empty");
  if (query.size() != index.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "query of dimension " + std::to_string(query.size()) +
                                                  ", index has " + std::to_string(index.dim()));
  }
  const std::vector<double> scores = kernels::cosine_scores(index.matrix(), index.norms(), index.dim(), query);
  std::vector<std::size_t> rows(scores.size());
  std::iota(rows.begin(), rows.end(), 0);
  const std::size_t n = std::min(k, rows.size());
  // Rows are in ascending source order, so row order breaks ties.
  std::partial_sort(rows.begin(), rows.begin() + static_cast<long>(n), rows.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  std::vector<ScoredChunk> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({index.chunks()[rows[i]], scores[rows[i]]});
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kMagic[8] = {'T', 'C', 'F', 'D', 'I', 'D', 'X', '1'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw Error(ErrorCode::CorruptIndex, "index file is truncated");
    const auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  template <typename T>
  T get_le() {
    const auto raw = take(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[i])) << (8 * i);
    return static_cast<T>(v);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string sha256_raw(std::string_view data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  return std::string(reinterpret_cast<const char*>(digest), SHA256_DIGEST_LENGTH);
}

}  // namespace

std::string serialize_index(const VectorIndex& index) {
  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(index.dim()));
  put_le<std::uint64_t>(out, index.size());
  for (const float x : index.matrix()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));

  nlohmann::json chunks = nlohmann::json::array();
  for (const auto& c : index.chunks()) chunks.push_back(to_json(c));
  const std::string meta =
      nlohmann::json{{"doc_id", index.doc_id()}, {"embedder", index.embedder_id()}, {"chunks", std::move(chunks)}}.dump();
  put_le<std::uint64_t>(out, meta.size());
  out += meta;
  out += sha256_raw(out);
  return out;
}

VectorIndex deserialize_index(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic + SHA256_DIGEST_LENGTH) throw Error(ErrorCode::CorruptIndex, "index file is truncated");
  const auto body = bytes.substr(0, bytes.size() - SHA256_DIGEST_LENGTH);
  if (sha256_raw(body) != bytes.substr(body.size())) throw Error(ErrorCode::CorruptIndex, "index checksum mismatch");

  Reader r(body);
  if (r.take(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
    throw Error(ErrorCode::CorruptIndex, "not an index file");
  }
  if (r.get_le<std::uint32_t>() != kFormatVersion) throw Error(ErrorCode::CorruptIndex, "unsupported index version");
  const auto dim = r.get_le<std::uint32_t>();
  const auto count = r.get_le<std::uint64_t>();
  if (dim == 0 || count > r.remaining() / (sizeof(float) * dim)) {
    throw Error(ErrorCode::CorruptIndex, "index header inconsistent with file size");
  }
  std::vector<float> data(count * dim);
  for (auto& x : data) x = std::bit_cast<float>(r.get_le<std::uint32_t>());
  const auto meta_len = r.get_le<std::uint64_t>();
  if (meta_len != r.remaining()) throw Error(ErrorCode::CorruptIndex, "index metadata length mismatch");
  const auto meta_text = r.take(meta_len);

  try {
    const auto meta = nlohmann::json::parse(meta_text);
    const auto& chunks = meta.at("chunks");
    if (chunks.size() != count) throw Error(ErrorCode::CorruptIndex, "chunk count does not match vector count");
    VectorIndex index(meta.at("doc_id").get<std::string>(), dim, meta.at("embedder").get<std::string>());
    for (std::size_t i = 0; i < count; ++i) {
      index.add(chunk_from_json(chunks[i]),
                EmbeddingVector(data.begin() + static_cast<long>(i * dim), data.begin() + static_cast<long>((i + 1) * dim)));
    }
    return index;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptIndex, std::string("index metadata unreadable: ") + e.what());
  }
}

void save_index(const VectorIndex& index, const std::filesystem::path& path) {
  const std::string bytes = serialize_index(index);
  const auto tmp = std::filesystem::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot rename " + tmp.string() + ": " + ec.message());
}

VectorIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_index(ss.str());
}

}  // namespace tcfd

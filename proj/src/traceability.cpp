#include "tcfd/traceability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <tuple>

#include "tcfd/error.hpp"
#include "tcfd/text.hpp"

namespace tcfd {

double rouge_precision(std::string_view candidate, std::string_view reference, RougeVariant variant) {
  return kernels::rouge_precision_one(candidate, reference, variant);
}

// ---------------------------------------------------------------------------
// Evidence search

std::vector<EvidenceMatch> locate_evidence(std::string_view answer_fragment,
                                           std::span<const DocumentChunk> chunks) {
  const std::string needle = text::trim(text::normalize_for_search(answer_fragment).text);
  if (text::code_point_count(needle) < kMinFragmentLength) {
    throw Error(ErrorCode::FragmentTooShort, "evidence fragment needs at least 3 characters");
  }
  std::vector<const DocumentChunk*> ordered;
  for (const auto& c : chunks) ordered.push_back(&c);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const DocumentChunk* a, const DocumentChunk* b) { return a->source_number < b->source_number; });

  std::vector<EvidenceMatch> out;
  for (const DocumentChunk* c : ordered) {
    const text::Normalized hay = text::normalize_for_search(c->text);
    for (std::size_t pos = hay.text.find(needle); pos != std::string::npos; pos = hay.text.find(needle, pos + 1)) {
      const std::size_t last = pos + needle.size() - 1;
      out.push_back({c->source_number, hay.source_offset[pos], hay.source_offset[last] + 1,
                     std::string(answer_fragment)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Concatenation lint

namespace {

using Tokens = std::vector<std::string>;

bool contains_run(const Tokens& hay, const Tokens& needle, std::size_t from, std::size_t len) {
  if (len == 0 || len > hay.size()) return len == 0;
  for (std::size_t i = 0; i + len <= hay.size(); ++i) {
    if (std::equal(needle.begin() + static_cast<std::ptrdiff_t>(from),
                   needle.begin() + static_cast<std::ptrdiff_t>(from + len), hay.begin() + static_cast<std::ptrdiff_t>(i))) {
      return true;
    }
  }
  return false;
}

bool is_suffix(const Tokens& chunk, const Tokens& seq, std::size_t from, std::size_t len) {
  if (len > chunk.size()) return false;
  return std::equal(seq.begin() + static_cast<std::ptrdiff_t>(from),
                    seq.begin() + static_cast<std::ptrdiff_t>(from + len),
                    chunk.end() - static_cast<std::ptrdiff_t>(len));
}

bool is_prefix(const Tokens& chunk, const Tokens& seq, std::size_t from, std::size_t len) {
  if (len > chunk.size()) return false;
  return std::equal(seq.begin() + static_cast<std::ptrdiff_t>(from),
                    seq.begin() + static_cast<std::ptrdiff_t>(from + len), chunk.begin());
}

std::string join(const Tokens& t, std::size_t from, std::size_t len) {
  std::string out;
  for (std::size_t i = from; i < from + len; ++i) {
    if (!out.empty()) out += ' ';
    out += t[i];
  }
  return out;
}

}  // namespace

std::vector<ConcatenationWarning> lint_concatenation(std::string_view answer,
                                                     std::span<const DocumentChunk> cited_chunks,
                                                     std::size_t window) {
  const Tokens ans = text::alnum_tokens(answer);
  const std::size_t n = std::min(window, ans.size());
  if (n < 2 || cited_chunks.size() < 2) return {};
  std::vector<Tokens> chunk_tokens;
  for (const auto& c : cited_chunks) chunk_tokens.push_back(text::alnum_tokens(c.text));

  std::vector<ConcatenationWarning> out;
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;  // (first, second, seam position)
  for (std::size_t start = 0; start + n <= ans.size(); ++start) {
    const bool inside_one = std::any_of(chunk_tokens.begin(), chunk_tokens.end(),
                                        [&](const Tokens& t) { return contains_run(t, ans, start, n); });
    if (inside_one) continue;
    for (std::size_t split = 1; split < n; ++split) {
      for (std::size_t a = 0; a < cited_chunks.size(); ++a) {
        if (!is_suffix(chunk_tokens[a], ans, start, split)) continue;
        for (std::size_t b = 0; b < cited_chunks.size(); ++b) {
          if (b == a || cited_chunks[b].source_number == cited_chunks[a].source_number) continue;
          if (!is_prefix(chunk_tokens[b], ans, start + split, n - split)) continue;
          const auto key = std::make_tuple(cited_chunks[a].source_number, cited_chunks[b].source_number, start + split);
          if (!seen.insert(key).second) continue;
          out.push_back({cited_chunks[a].source_number, cited_chunks[b].source_number, join(ans, start, n), split});
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Annotation statistics

std::string_view to_string(ContentLabel l) { return l == ContentLabel::Supported ? "supported" : "hallucinated"; }

std::string_view to_string(SourceLabel l) {
  switch (l) {
    case SourceLabel::Honest: return "honest";
    case SourceLabel::Hallucinated: return "hallucinated";
    case SourceLabel::NotApplicable: return "not_applicable";
  }
  return "not_applicable";
}

void validate(const AnnotationRecord& r) {
  const bool hallucinated = r.content_label == ContentLabel::Hallucinated;
  const bool na = r.source_label == SourceLabel::NotApplicable;
  if (hallucinated != na) {
    throw Error(ErrorCode::InvalidArgument, "annotation " + r.answer_id + "/" + r.annotator_id +
                                                ": source label must be not_applicable exactly when content is hallucinated");
  }
}

EvalSummary hallucination_rates(std::span<const AnnotationRecord> annotations,
                                const std::map<std::string, FinalLabel>& final_labels) {
  std::set<std::string> ids;
  for (const auto& a : annotations) ids.insert(a.answer_id);
  EvalSummary s;
  for (const auto& id : ids) {
    const auto it = final_labels.find(id);
    if (it == final_labels.end()) throw Error(ErrorCode::MissingFinalLabel, "no final label for answer " + id);
    ++s.n_total;
    if (it->second.content == ContentLabel::Supported) {
      ++s.n_content_supported;
      if (it->second.source == SourceLabel::Honest) ++s.n_source_honest;
    }
  }
  if (s.n_total > 0) s.content_free_rate = 100.0 * static_cast<double>(s.n_content_supported) / static_cast<double>(s.n_total);
  if (s.n_content_supported > 0) {
    s.source_free_rate_given_content =
        100.0 * static_cast<double>(s.n_source_honest) / static_cast<double>(s.n_content_supported);
  }
  return s;
}

double cohens_kappa(std::span<const int> labels_a, std::span<const int> labels_b) {
  if (labels_a.size() != labels_b.size()) {
    throw Error(ErrorCode::LengthMismatch, "label vectors differ in length: " + std::to_string(labels_a.size()) +
                                               " vs " + std::to_string(labels_b.size()));
  }
  if (labels_a.empty()) throw Error(ErrorCode::InvalidArgument, "kappa needs at least one label pair");
  const auto n = static_cast<double>(labels_a.size());
  std::map<int, double> freq_a;
  std::map<int, double> freq_b;
  double agree = 0;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    freq_a[labels_a[i]] += 1;
    freq_b[labels_b[i]] += 1;
    if (labels_a[i] == labels_b[i]) agree += 1;
  }
  const double p_o = agree / n;
  double p_e = 0;
  for (const auto& [label, count] : freq_a) {
    const auto it = freq_b.find(label);
    if (it != freq_b.end()) p_e += (count / n) * (it->second / n);
  }
  if (p_e >= 1.0 - 1e-15) return 1.0;
  return (p_o - p_e) / (1.0 - p_e);
}

std::string AnswerRecord::reference_text() const {
  std::string out;
  for (std::size_t i = 0; i < context.size(); ++i) {
    if (i) out += '\n';
    out += context[i].text;
  }
  return out;
}

namespace {

struct Grouped {
  std::vector<const AnnotationRecord*> primary;
  const AnnotationRecord* adjudicator = nullptr;
};

std::vector<std::pair<std::string, Grouped>> group(std::span<const AnnotationRecord> annotations) {
  std::vector<std::pair<std::string, Grouped>> groups;
  std::map<std::string, std::size_t> slot;
  for (const auto& a : annotations) {
    validate(a);
    auto [it, fresh] = slot.try_emplace(a.answer_id, groups.size());
    if (fresh) groups.push_back({a.answer_id, {}});
    Grouped& g = groups[it->second].second;
    if (!a.adjudicator && g.primary.size() < 2) {
      g.primary.push_back(&a);
    } else if (!g.adjudicator) {
      g.adjudicator = &a;
    }
  }
  return groups;
}

bool agree(const AnnotationRecord& x, const AnnotationRecord& y) {
  return x.content_label == y.content_label && x.source_label == y.source_label;
}

}  // namespace

std::map<std::string, FinalLabel> adjudicate(std::span<const AnnotationRecord> annotations, std::size_t* disputed) {
  std::map<std::string, FinalLabel> out;
  std::size_t n_disputed = 0;
  for (const auto& [id, g] : group(annotations)) {
    if (g.primary.size() < 2) {
      throw Error(ErrorCode::MissingFinalLabel, "answer " + id + " needs two primary annotations");
    }
    const AnnotationRecord* final_record = g.primary[0];
    if (!agree(*g.primary[0], *g.primary[1])) {
      ++n_disputed;
      if (!g.adjudicator) throw Error(ErrorCode::MissingAdjudication, "answer " + id + " is disputed but not adjudicated");
      final_record = g.adjudicator;
    }
    out[id] = {final_record->content_label, final_record->source_label};
  }
  if (disputed) *disputed = n_disputed;
  return out;
}

EvalSummary evaluation_run(std::span<const AnswerRecord> answers, std::span<const AnnotationRecord> annotations) {
  std::size_t disputed = 0;
  const auto finals = adjudicate(annotations, &disputed);
  EvalSummary s = hallucination_rates(annotations, finals);
  s.n_disputed = disputed;

  std::vector<int> a;
  std::vector<int> b;
  for (const auto& [id, g] : group(annotations)) {
    a.push_back(g.primary[0]->content_label == ContentLabel::Supported ? 1 : 0);
    b.push_back(g.primary[1]->content_label == ContentLabel::Supported ? 1 : 0);
  }
  if (!a.empty()) s.kappa_content = cohens_kappa(a, b);

  if (!answers.empty()) {
    std::vector<kernels::RougePair> pairs;
    pairs.reserve(answers.size());
    for (const auto& r : answers) pairs.push_back({r.answer_text, r.reference_text()});
    auto mean = [&](RougeVariant v) {
      const auto p = kernels::rouge_precision_batch(pairs, v);
      double sum = 0;
      for (const double x : p) sum += x;
      return 100.0 * sum / static_cast<double>(p.size());
    };
    s.rouge1_p = mean(RougeVariant::R1);
    s.rouge2_p = mean(RougeVariant::R2);
    s.rougeL_p = mean(RougeVariant::RL);
  }
  return s;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

ContentLabel parse_content(std::string_view s) {
  if (s == "supported") return ContentLabel::Supported;
  if (s == "hallucinated") return ContentLabel::Hallucinated;
  throw Error(ErrorCode::InvalidArgument, "unknown content label " + std::string(s));
}

SourceLabel parse_source(std::string_view s) {
  if (s == "honest") return SourceLabel::Honest;
  if (s == "hallucinated") return SourceLabel::Hallucinated;
  if (s == "not_applicable") return SourceLabel::NotApplicable;
  throw Error(ErrorCode::InvalidArgument, "unknown source label " + std::string(s));
}

template <typename T, typename Fn>
std::vector<T> load_jsonl(const std::filesystem::path& path, Fn&& parse) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(ErrorCode::InvalidArgument, path.string() + ":" + std::to_string(line_no) + ": invalid JSON");
    }
    try {
      out.push_back(parse(j));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const AnnotationRecord& r) {
  nlohmann::json j{{"answer_id", r.answer_id},
                   {"annotator_id", r.annotator_id},
                   {"content_label", to_string(r.content_label)},
                   {"source_label", to_string(r.source_label)}};
  if (r.adjudicator) j["adjudicator"] = true;
  return j;
}

AnnotationRecord annotation_from_json(const nlohmann::json& j) {
  AnnotationRecord r;
  r.answer_id = j.at("answer_id").get<std::string>();
  r.annotator_id = j.at("annotator_id").get<std::string>();
  r.content_label = parse_content(j.at("content_label").get<std::string>());
  r.source_label = parse_source(j.at("source_label").get<std::string>());
  r.adjudicator = j.value("adjudicator", false) || j.value("role", std::string{}) == "adjudicator";
  return r;
}

nlohmann::json to_json(const AnswerRecord& r) {
  nlohmann::json ctx = nlohmann::json::array();
  for (const auto& c : r.context) ctx.push_back({{"source", c.source_number}, {"page", c.page_number}, {"text", c.text}});
  return {{"answer_id", r.answer_id}, {"answer", r.answer_text}, {"sources", r.cited_sources}, {"context", ctx}};
}

AnswerRecord answer_record_from_json(const nlohmann::json& j) {
  AnswerRecord r;
  r.answer_id = j.at("answer_id").get<std::string>();
  r.answer_text = j.at("answer").get<std::string>();
  r.cited_sources = j.value("sources", std::vector<std::size_t>{});
  for (const auto& c : j.value("context", nlohmann::json::array())) {
    r.context.push_back({c.at("source").get<std::size_t>(), c.value("page", 0), c.at("text").get<std::string>()});
  }
  return r;
}

nlohmann::json to_json(const EvalSummary& s) {
  return {{"n_total", s.n_total},
          {"n_content_supported", s.n_content_supported},
          {"n_source_honest", s.n_source_honest},
          {"n_disputed", s.n_disputed},
          {"content_free_rate", s.content_free_rate},
          {"source_free_rate_given_content", s.source_free_rate_given_content},
          {"rouge1_p", s.rouge1_p},
          {"rouge2_p", s.rouge2_p},
          {"rougeL_p", s.rougeL_p},
          {"kappa_content", s.kappa_content}};
}

nlohmann::json to_json(const EvidenceMatch& m) {
  return {{"source", m.source_number}, {"start", m.start}, {"end", m.end}, {"fragment", m.query_fragment}};
}

std::vector<AnnotationRecord> load_annotations_jsonl(const std::filesystem::path& path) {
  return load_jsonl<AnnotationRecord>(path, annotation_from_json);
}

std::vector<AnswerRecord> load_answers_jsonl(const std::filesystem::path& path) {
  return load_jsonl<AnswerRecord>(path, answer_record_from_json);
}

std::string format_percent(double percent) {
  const double scaled = std::floor(percent * 100.0 + 1e-7);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", scaled / 100.0);
  return buf;
}

}  // namespace tcfd

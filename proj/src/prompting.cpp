#include "tcfd/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "tcfd/error.hpp"
#include "tcfd/resources.hpp"

namespace tcfd {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::Governance: return "Governance";
    case Category::Strategy: return "Strategy";
    case Category::RiskManagement: return "RiskManagement";
    case Category::MetricsTargets: return "MetricsTargets";
  }
  return "Governance";
}

Category parse_category(std::string_view name) {
  for (const Category c : {Category::Governance, Category::Strategy, Category::RiskManagement,
                           Category::MetricsTargets}) {
    if (to_string(c) == name) return c;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown category " + std::string(name));
}

std::optional<Category> category_for_index(int index) {
  if (index >= 1 && index <= 2) return Category::Governance;
  if (index >= 3 && index <= 5) return Category::Strategy;
  if (index >= 6 && index <= 8) return Category::RiskManagement;
  if (index >= 9 && index <= 11) return Category::MetricsTargets;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Guidelines

namespace {

std::string replace_all(std::string s, std::string_view what, std::string_view with) {
  for (std::size_t pos = s.find(what); pos != std::string::npos; pos = s.find(what, pos + with.size())) {
    s.replace(pos, what.size(), with);
  }
  return s;
}

std::string numbered(std::size_t n, const std::string& text) { return std::to_string(n) + ". " + text; }

}  // namespace

std::string GuidelineList::render_general(int answer_length) const {
  std::string out;
  for (std::size_t i = 0; i < general.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out += numbered(i + 1, replace_all(general[i].text, "{answer_length}", std::to_string(answer_length)));
  }
  return out;
}

std::string GuidelineList::render_for_question(const TcfdQuestion& q, int answer_length) const {
  const auto it = specific.find(q.index);
  const std::string& extra = it != specific.end() ? it->second.text : q.specific_guideline;
  std::string out = render_general(answer_length);
  if (!extra.empty()) out += "\n" + numbered(general.size() + 1, extra);
  return out;
}

std::string GuidelineList::render_for_custom(int answer_length) const {
  std::string out = render_general(answer_length);
  if (!cqa.text.empty()) out += "\n" + numbered(general.size() + 1, cqa.text);
  return out;
}

namespace {

nlohmann::json entry_json(const GuidelineEntry& e) { return {{"text", e.text}, {"origin", e.origin}}; }

GuidelineEntry entry_from(const nlohmann::json& j) {
  if (j.is_string()) return {j.get<std::string>(), "seed"};
  return {j.at("text").get<std::string>(), j.value("origin", std::string("seed"))};
}

}  // namespace

nlohmann::json to_json(const GuidelineList& g) {
  nlohmann::json general = nlohmann::json::array();
  for (const auto& e : g.general) general.push_back(entry_json(e));
  nlohmann::json specific = nlohmann::json::object();
  for (const auto& [q, e] : g.specific) specific[std::to_string(q)] = entry_json(e);
  return {{"version", g.version}, {"general", std::move(general)}, {"specific", std::move(specific)},
          {"cqa", entry_json(g.cqa)}};
}

GuidelineList guideline_list_from_json(const nlohmann::json& j) {
  try {
    GuidelineList g;
    g.version = j.value("version", 1);
    for (const auto& e : j.at("general")) g.general.push_back(entry_from(e));
    if (j.contains("specific")) {
      for (const auto& [key, e] : j.at("specific").items()) g.specific[std::stoi(key)] = entry_from(e);
    }
    if (j.contains("cqa")) g.cqa = entry_from(j.at("cqa"));
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("invalid guideline list: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Question bank

QuestionBank QuestionBank::from_json(const nlohmann::json& j) {
  QuestionBank bank;
  try {
    for (const auto& g : j.at("general_guidelines")) bank.seed_guidelines.general.push_back({g.get<std::string>(), "seed"});
    bank.seed_guidelines.cqa = {j.value("cqa_guideline", std::string{}), "seed"};
    for (const auto& q : j.at("questions")) {
      TcfdQuestion t;
      t.index = q.at("index").get<int>();
      t.category = parse_category(q.at("category").get<std::string>());
      t.recommendation_text = q.at("recommendation").get<std::string>();
      t.question_text = q.at("question").get<std::string>();
      t.specific_guideline = q.at("specific_guideline").get<std::string>();
      t.requirements = q.value("requirements", std::string{});
      const auto expected = category_for_index(t.index);
      if (!expected || *expected != t.category) {
        throw Error(ErrorCode::InvalidArgument, "question " + std::to_string(t.index) + " has the wrong category");
      }
      if (t.specific_guideline.empty()) {
        throw Error(ErrorCode::InvalidArgument, "question " + std::to_string(t.index) + " lacks a specific guideline");
      }
      bank.seed_guidelines.specific[t.index] = {t.specific_guideline, "seed"};
      bank.questions.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("invalid question data: ") + e.what());
  }
  std::set<int> seen;
  for (const auto& q : bank.questions) seen.insert(q.index);
  if (seen.size() != bank.questions.size() || bank.questions.size() != 11) {
    throw Error(ErrorCode::InvalidArgument, "question data must hold questions 1..11 exactly once");
  }
  return bank;
}

QuestionBank QuestionBank::builtin() {
  static const nlohmann::json data = nlohmann::json::parse(resources::get("tcfd_data.json"));
  return from_json(data);
}

QuestionBank QuestionBank::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

const TcfdQuestion& QuestionBank::question(int index) const {
  for (const auto& q : questions) {
    if (q.index == index) return q;
  }
  throw Error(ErrorCode::NotFound, "no question " + std::to_string(index));
}

std::string BasicInfo::render() const {
  return "Company name: " + company_name + "\nLocation: " + location + "\nSector: " + sector;
}

// ---------------------------------------------------------------------------
// Templates

std::string_view to_string(TemplateId id) {
  switch (id) {
    case TemplateId::Qa: return "qa";
    case TemplateId::Summarization: return "summarization";
    case TemplateId::Conformity: return "conformity";
    case TemplateId::Cqa: return "cqa";
    case TemplateId::PromptEngineering: return "prompt_engineering";
    case TemplateId::BasicInfo: return "basic_info";
  }
  return "qa";
}

namespace {

constexpr TemplateId kAllTemplates[] = {TemplateId::Qa, TemplateId::Summarization, TemplateId::Conformity,
                                        TemplateId::Cqa, TemplateId::PromptEngineering, TemplateId::BasicInfo};

std::string strip_final_newline(std::string s) {
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

}  // namespace

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet set = [] {
    TemplateSet s;
    for (const TemplateId id : kAllTemplates) {
      s.templates_[id] = strip_final_newline(resources::get("templates/" + std::string(to_string(id)) + ".txt"));
    }
    return s;
  }();
  return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  TemplateSet s;
  for (const TemplateId id : kAllTemplates) {
    const auto path = dir / (std::string(to_string(id)) + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      s.templates_[id] = builtin().get(id);
      continue;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    s.templates_[id] = strip_final_newline(ss.str());
  }
  return s;
}

const std::string& TemplateSet::get(TemplateId id) const { return templates_.at(id); }

// ---------------------------------------------------------------------------
// Rendering

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Length of the "{identifier}" token at s[i], or 0.
std::size_t placeholder_at(std::string_view s, std::size_t i) {
  if (s[i] != '{' || i + 2 >= s.size() || !ident_start(s[i + 1])) return 0;
  std::size_t j = i + 2;
  while (j < s.size() && ident_char(s[j])) ++j;
  return (j < s.size() && s[j] == '}') ? j - i + 1 : 0;
}

std::string render_impl(std::string_view tmpl, const std::map<std::string, std::string>& bindings,
                        const std::set<std::string>& may_be_empty) {
  std::string out;
  out.reserve(tmpl.size() * 2);
  for (std::size_t i = 0; i < tmpl.size();) {
    if (const std::size_t len = placeholder_at(tmpl, i); len > 0) {
      const std::string name(tmpl.substr(i + 1, len - 2));
      const auto it = bindings.find(name);
      if (it == bindings.end() || (it->second.empty() && !may_be_empty.contains(name))) {
        throw Error(ErrorCode::MissingBinding, "no value bound to {" + name + "}");
      }
      out += it->second;
      i += len;
    } else {
      out.push_back(tmpl[i++]);
    }
  }
  return out;
}

void require(bool ok, std::string_view what) {
  if (!ok) throw Error(ErrorCode::MissingBinding, std::string(what) + " is empty");
}

void require_info(const BasicInfo& info) {
  require(!info.company_name.empty() && !info.location.empty() && !info.sector.empty(), "basic_info");
}

RenderedPrompt make(TemplateId id, const TemplateSet& templates, std::map<std::string, std::string> bindings,
                    std::vector<std::size_t> sources) {
  RenderedPrompt p;
  p.template_id = id;
  p.text = render_template(templates.get(id), bindings);
  p.variable_bindings = std::move(bindings);
  p.included_sources = std::move(sources);
  return p;
}

}  // namespace

std::vector<std::string> template_placeholders(std::string_view tmpl) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (const std::size_t len = placeholder_at(tmpl, i); len > 0) {
      std::string name(tmpl.substr(i + 1, len - 2));
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(std::move(name));
      i += len - 1;
    }
  }
  return names;
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& bindings) {
  return render_impl(tmpl, bindings, {});
}

std::size_t prompt_overhead_tokens(std::string_view tmpl, std::map<std::string, std::string> bindings,
                                   const TokenEstimator& estimator) {
  bindings["retrieved_chunks_with_source"] = "";
  bindings["disclosure"] = "";
  return estimator.count(render_impl(tmpl, bindings, {"retrieved_chunks_with_source", "disclosure"}));
}

RenderedPrompt render_qa_prompt(const BasicInfo& info, const TcfdQuestion& q, const ContextWindow& ctx,
                                const GuidelineList& g, int answer_length, const TemplateSet& templates) {
  require_info(info);
  require(!ctx.entries.empty(), "retrieved context");
  return make(TemplateId::Qa, templates,
              {{"basic_info", info.render()},
               {"question_regarding_a_TCFD_recommendation", q.question_text},
               {"retrieved_chunks_with_source", ctx.formatted_text},
               {"guidelines", g.render_for_question(q, answer_length)}},
              ctx.sources());
}

RenderedPrompt render_summarization_prompt(const BasicInfo& info, const TcfdQuestion& q,
                                           const ContextWindow& ctx, const GuidelineList& g,
                                           int answer_length, const TemplateSet& templates) {
  require_info(info);
  require(!ctx.entries.empty(), "retrieved context");
  return make(TemplateId::Summarization, templates,
              {{"basic_info", info.render()},
               {"A_TCFD_recommendation", q.recommendation_text},
               {"retrieved_chunks_with_source", ctx.formatted_text},
               {"guidelines", g.render_for_question(q, answer_length)}},
              ctx.sources());
}

RenderedPrompt render_conformity_prompt(const TcfdQuestion& q, std::string_view requirements,
                                        std::string_view disclosure, const TemplateSet& templates) {
  require(!requirements.empty(), "requirements");
  require(!disclosure.empty(), "disclosure");
  return make(TemplateId::Conformity, templates,
              {{"tcfd_recommendation", q.recommendation_text},
               {"requirements", std::string(requirements)},
               {"disclosure", std::string(disclosure)}},
              {});
}

RenderedPrompt render_cqa_prompt(const BasicInfo& info, std::string_view user_question, const ContextWindow& ctx,
                                 const GuidelineList& g, int answer_length, const TemplateSet& templates) {
  require_info(info);
  require(!user_question.empty(), "question");
  require(!ctx.entries.empty(), "retrieved context");
  return make(TemplateId::Cqa, templates,
              {{"basic_info", info.render()},
               {"question_regarding_a_TCFD_recommendation", std::string(user_question)},
               {"retrieved_chunks_with_source", ctx.formatted_text},
               {"guidelines", g.render_for_custom(answer_length)}},
              ctx.sources());
}

RenderedPrompt render_prompt_engineering_prompt(std::string_view original_prompt, const GuidelineList& g,
                                                std::string_view old_response, std::string_view feedback,
                                                int answer_length, const TemplateSet& templates) {
  require(!original_prompt.empty(), "original_prompt");
  require(!old_response.empty(), "old_response");
  require(!feedback.empty(), "feedback");
  require(!g.general.empty(), "guideline_list");
  return make(TemplateId::PromptEngineering, templates,
              {{"original_prompt", std::string(original_prompt)},
               {"guideline_list", g.render_general(answer_length)},
               {"old_response", std::string(old_response)},
               {"feedback", std::string(feedback)}},
              {});
}

RenderedPrompt render_basic_info_prompt(const ContextWindow& ctx, const TemplateSet& templates) {
  require(!ctx.entries.empty(), "retrieved context");
  return make(TemplateId::BasicInfo, templates, {{"retrieved_chunks_with_source", ctx.formatted_text}},
              ctx.sources());
}

}  // namespace tcfd

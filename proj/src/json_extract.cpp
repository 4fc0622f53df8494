#include "tcfd/error.hpp"
#include "tcfd/llm_gateway.hpp"
#include "tcfd/text.hpp"

namespace tcfd {

namespace {

constexpr std::size_t kMaxObjectAttempts = 64;

std::optional<nlohmann::json> parse_object(std::string_view s) {
  auto j = nlohmann::json::parse(s.begin(), s.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

// Body of the first ``` fenced block, without the info string.
std::optional<std::string_view> fenced_body(std::string_view raw) {
  const std::size_t open = raw.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  std::size_t body = raw.find('\n', open + 3);
  if (body == std::string_view::npos) return std::nullopt;
  ++body;
  const std::size_t close = raw.find("```", body);
  return raw.substr(body, close == std::string_view::npos ? std::string_view::npos : close - body);
}

// End (exclusive) of the balanced {...} starting at `open`, honouring JSON
// string literals; npos when unbalanced.
std::size_t balanced_end(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace

nlohmann::json extract_json_object(std::string_view raw) {
  const std::string trimmed = text::trim(raw);
  if (auto j = parse_object(trimmed)) return *j;

  // Repair pass 1: code fences.
  if (const auto body = fenced_body(trimmed)) {
    if (auto j = parse_object(text::trim(*body))) return *j;
  }

  // Repair pass 2: first balanced object that parses.
  std::size_t attempts = 0;
  for (std::size_t open = trimmed.find('{'); open != std::string::npos && attempts < kMaxObjectAttempts;
       open = trimmed.find('{', open + 1), ++attempts) {
    const std::size_t end = balanced_end(trimmed, open);
    if (end == std::string::npos) continue;
    if (auto j = parse_object(std::string_view(trimmed).substr(open, end - open))) return *j;
  }
  throw Error(ErrorCode::MalformedOutput, "no JSON object found in model output");
}

}  // namespace tcfd

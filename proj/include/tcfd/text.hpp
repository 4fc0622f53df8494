#pragma once

// UTF-8 and tokenization helpers shared by chunking, token estimation,
// ROUGE, evidence search and the concatenation lint.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tcfd::text {

/// Replaces every invalid UTF-8 sequence with U+FFFD.
std::string sanitize_utf8(std::string_view s);

/// Byte offset of every code point in `s`, plus a final entry equal to
/// s.size(). Assumes valid UTF-8.
std::vector<std::size_t> code_point_offsets(std::string_view s);

std::size_t code_point_count(std::string_view s);

/// Lowercased maximal runs of ASCII alphanumerics. Non-ASCII bytes act as
/// separators.
std::vector<std::string> alnum_tokens(std::string_view s);

/// Count of whitespace-separated words.
std::size_t word_count(std::string_view s);

/// Case-folded (ASCII), whitespace-collapsed copy of `s` with the byte
/// offset in `s` that produced each output byte. Leading and trailing
/// whitespace is dropped.
struct Normalized {
  std::string text;
  std::vector<std::size_t> source_offset;  // same length as text
};
Normalized normalize_for_search(std::string_view s);

std::string trim(std::string_view s);

}  // namespace tcfd::text

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace curio::text {

std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
std::string trim(std::string_view s);

// Collapses every whitespace run to one space and trims both ends.
std::string normalize_whitespace(std::string_view s);

// Case-folds, drops punctuation and collapses whitespace.
std::string normalize_answer(std::string_view s);

bool contains_icase(std::string_view haystack, std::string_view needle);

// Splits on '.', '!' and '?'. Terminators inside double quotes do not end a
// sentence. Each returned sentence is trimmed and keeps its terminator.
std::vector<std::string> split_sentences(std::string_view s);

// Sentences whose final character is '?'.
int count_questions(std::string_view s);

// Lowercased alphanumeric words (apostrophes kept inside words).
std::vector<std::string> words(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace curio::text

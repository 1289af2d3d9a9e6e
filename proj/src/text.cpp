#include "curio/text.hpp"

#include <algorithm>
#include <cctype>

namespace curio::text {

namespace {
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }
}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string to_upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

std::string trim(std::string_view s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

std::string normalize_answer(std::string_view s) {
  std::string kept;
  kept.reserve(s.size());
  for (char c : s) {
    if (is_alnum(c) || is_space(c)) {
      kept.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (c == '.' || c == '-' || c == '/') {
      // keeps "3.5" and "1/2" intact, separates words otherwise
      kept.push_back(c);
    } else {
      kept.push_back(' ');
    }
  }
  // strip separators that are not between digits
  std::string cleaned;
  cleaned.reserve(kept.size());
  for (size_t i = 0; i < kept.size(); ++i) {
    char c = kept[i];
    if (c == '.' || c == '-' || c == '/') {
      bool digit_before = i > 0 && std::isdigit(static_cast<unsigned char>(kept[i - 1]));
      bool digit_after =
          i + 1 < kept.size() && std::isdigit(static_cast<unsigned char>(kept[i + 1]));
      bool leading_minus = c == '-' && digit_after && (i == 0 || kept[i - 1] == ' ');
      if ((digit_before && digit_after) || leading_minus) {
        cleaned.push_back(c);
      } else {
        cleaned.push_back(' ');
      }
    } else {
      cleaned.push_back(c);
    }
  }
  return normalize_whitespace(cleaned);
}

bool contains_icase(std::string_view haystack, std::string_view needle) {
  return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

std::vector<std::string> split_sentences(std::string_view s) {
  std::vector<std::string> out;
  std::string current;
  bool in_quote = false;
  for (size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    current.push_back(c);
    if (c == '"') {
      in_quote = !in_quote;
      continue;
    }
    if (in_quote || !is_terminator(c)) continue;
    // absorb runs like "?!" or "..."
    while (i + 1 < s.size() && is_terminator(s[i + 1])) current.push_back(s[++i]);
    // a period between digits is a decimal point
    if (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])) &&
        current.size() >= 2 &&
        std::isdigit(static_cast<unsigned char>(current[current.size() - 2]))) {
      continue;
    }
    auto t = trim(current);
    if (!t.empty()) out.push_back(std::move(t));
    current.clear();
  }
  auto t = trim(current);
  if (!t.empty()) out.push_back(std::move(t));
  return out;
}

int count_questions(std::string_view s) {
  int n = 0;
  for (const auto& sentence : split_sentences(s)) {
    size_t end = sentence.size();
    while (end > 0 && (sentence[end - 1] == '"' || sentence[end - 1] == '\'' ||
                       sentence[end - 1] == ')' || sentence[end - 1] == '*')) {
      --end;
    }
    // the closing run of terminators, e.g. "?!" counts as a question
    for (size_t i = end; i > 0 && is_terminator(sentence[i - 1]); --i) {
      if (sentence[i - 1] == '?') {
        ++n;
        break;
      }
    }
  }
  return n;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    bool inner_apostrophe = c == '\'' && !cur.empty() && i + 1 < s.size() && is_alnum(s[i + 1]);
    if (is_alnum(c) || inner_apostrophe) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

}  // namespace curio::text

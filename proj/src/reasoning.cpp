#include "curio/reasoning.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "curio/embedded_data.hpp"
#include "curio/errors.hpp"
#include "curio/hashing.hpp"
#include "curio/parallel.hpp"
#include "curio/text.hpp"

namespace curio::reasoning {

namespace {

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string> non_empty_lines(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string line;
  while (std::getline(in, line)) {
    std::string t = text::trim(line);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

bool close(double a, double b, double rel_tol) {
  const double scale = std::max({std::fabs(a), std::fabs(b), 1e-12});
  return std::fabs(a - b) <= rel_tol * scale;
}

const Json& prompts_json() {
  static const Json j = Json::parse(embedded::k_reasoning_prompts);
  return j;
}

}  // namespace

const char* to_string(AnswerKind k) {
  switch (k) {
    case AnswerKind::Numeric: return "numeric";
    case AnswerKind::Exact: return "exact";
    case AnswerKind::Choice: return "choice";
    case AnswerKind::NumericList: return "numeric_list";
  }
  return "?";
}

AnswerKind answer_kind_from_string(const std::string& s) {
  for (AnswerKind k : {AnswerKind::Numeric, AnswerKind::Exact, AnswerKind::Choice, AnswerKind::NumericList}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown answer kind '" + s + "'");
}

void ReasoningTask::validate() const {
  if (text::trim(id).empty()) throw ConfigError("task without id");
  if (text::trim(question).empty()) throw ConfigError("task " + id + " has an empty question");
  if (text::trim(gold_answer).empty()) throw ConfigError("task " + id + " has an empty gold answer");
  if (kind == AnswerKind::Numeric && !parse_number(gold_answer)) {
    throw ConfigError("task " + id + ": numeric gold answer does not parse: '" + gold_answer + "'");
  }
  if (kind == AnswerKind::NumericList && numbers_in(gold_answer).empty()) {
    throw ConfigError("task " + id + ": numeric_list gold answer holds no numbers");
  }
  if (kind == AnswerKind::Choice && !option_letter(text::to_upper(gold_answer))) {
    throw ConfigError("task " + id + ": choice gold answer is not an option letter");
  }
}

Json ReasoningTask::to_json() const {
  return {{"id", id}, {"context", context}, {"question", question}, {"answer", gold_answer},
          {"kind", to_string(kind)}};
}

ReasoningTask ReasoningTask::from_json(const Json& j) { return from_native(j); }

const char* to_string(PromptMode m) {
  switch (m) {
    case PromptMode::VanillaCoT: return "VanillaCoT";
    case PromptMode::RefinedCoT: return "RefinedCoT";
    case PromptMode::CuriousCoQ: return "CuriousCoQ";
  }
  return "?";
}

PromptMode prompt_mode_from_string(const std::string& s) {
  const std::string l = text::to_lower(s);
  for (PromptMode m : kPromptModes) {
    if (l == text::to_lower(to_string(m))) return m;
  }
  if (l == "cot" || l == "vanilla") return PromptMode::VanillaCoT;
  if (l == "refined") return PromptMode::RefinedCoT;
  if (l == "coq" || l == "curious") return PromptMode::CuriousCoQ;
  throw ConfigError("unknown prompt mode '" + s + "'");
}

std::string build_system_prompt(PromptMode mode) {
  return prompts_json().at(to_string(mode)).get<std::string>();
}

std::string prompt_checksum(PromptMode mode) { return sha256_hex(build_system_prompt(mode)); }

std::string user_content(const ReasoningTask& task) {
  if (text::trim(task.context).empty()) return "Question: " + task.question;
  return "Context: " + task.context + "\n\nQuestion: " + task.question;
}

Json MatcherConfig::to_json() const { return {{"marker", marker}, {"rel_tol", rel_tol}}; }

// ---- answer matching -------------------------------------------------------

std::optional<std::string> extract_final_answer(std::string_view output, const MatcherConfig& cfg) {
  if (!cfg.marker.empty()) {
    const std::string lower = text::to_lower(output);
    const std::size_t pos = lower.rfind(text::to_lower(cfg.marker));
    if (pos != std::string::npos) {
      const auto lines = non_empty_lines(output.substr(pos + cfg.marker.size()));
      if (!lines.empty()) return lines.front();
    }
  }
  const auto lines = non_empty_lines(output);
  if (lines.empty()) return std::nullopt;
  return lines.back();
}

std::vector<double> numbers_in(std::string_view s) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_digit(s[i]) || (i > 0 && (is_digit(s[i - 1]) || s[i - 1] == '.'))) {
      ++i;
      continue;
    }
    const bool negative =
        i > 0 && s[i - 1] == '-' && (i == 1 || !std::isalnum(static_cast<unsigned char>(s[i - 2])));
    std::string digits;
    std::size_t j = i;
    while (j < s.size() && is_digit(s[j])) digits += s[j++];
    // thousands groups: ",ddd" not followed by another digit
    while (digits.size() <= 3 && j + 3 < s.size() && s[j] == ',' && is_digit(s[j + 1]) &&
           is_digit(s[j + 2]) && is_digit(s[j + 3]) && (j + 4 >= s.size() || !is_digit(s[j + 4]))) {
      digits += s.substr(j + 1, 3);
      j += 4;
    }
    if (j + 1 < s.size() && s[j] == '.' && is_digit(s[j + 1])) {
      digits += '.';
      ++j;
      while (j < s.size() && is_digit(s[j])) digits += s[j++];
    }
    double value = std::stod(digits);
    if (j + 1 < s.size() && s[j] == '/' && is_digit(s[j + 1])) {
      std::string den;
      ++j;
      while (j < s.size() && is_digit(s[j])) den += s[j++];
      const double d = std::stod(den);
      if (d != 0.0) value /= d;
    }
    out.push_back(negative ? -value : value);
    i = j;
  }
  return out;
}

std::optional<double> parse_number(std::string_view s) {
  const auto nums = numbers_in(s);
  if (nums.size() != 1) return std::nullopt;
  return nums.front();
}

std::optional<char> option_letter(std::string_view s) {
  std::optional<char> last;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c < 'A' || c > 'J') continue;
    const bool left = i == 0 || !std::isalnum(static_cast<unsigned char>(s[i - 1]));
    const bool right = i + 1 >= s.size() || !std::isalnum(static_cast<unsigned char>(s[i + 1]));
    if (left && right) last = c;
  }
  return last;
}

CheckResult check(std::string_view output, const ReasoningTask& task, const MatcherConfig& cfg) {
  CheckResult r;
  const auto extracted = extract_final_answer(output, cfg);
  if (!extracted) {
    r.no_answer = true;
    return r;
  }
  r.extracted = *extracted;
  switch (task.kind) {
    case AnswerKind::Numeric: {
      const auto nums = numbers_in(r.extracted);
      const auto gold = parse_number(task.gold_answer);
      if (nums.empty()) {
        r.no_answer = true;
      } else {
        r.correct = gold && close(nums.back(), *gold, cfg.rel_tol);
      }
      break;
    }
    case AnswerKind::NumericList: {
      const auto nums = numbers_in(r.extracted);
      const auto gold = numbers_in(task.gold_answer);
      if (nums.empty()) {
        r.no_answer = true;
      } else if (nums.size() >= gold.size()) {
        r.correct = true;
        const std::size_t off = nums.size() - gold.size();
        for (std::size_t k = 0; k < gold.size(); ++k) {
          r.correct = r.correct && close(nums[off + k], gold[k], cfg.rel_tol);
        }
      }
      break;
    }
    case AnswerKind::Exact: {
      const std::string got = text::normalize_answer(r.extracted);
      const std::string want = text::normalize_answer(task.gold_answer);
      if (got.empty()) {
        r.no_answer = true;
      } else {
        r.correct = got == want ||
                    (got.size() > want.size() && !want.empty() &&
                     got.compare(got.size() - want.size(), want.size(), want) == 0 &&
                     got[got.size() - want.size() - 1] == ' ');
      }
      break;
    }
    case AnswerKind::Choice: {
      const auto got = option_letter(r.extracted);
      const auto want = option_letter(text::to_upper(task.gold_answer));
      if (!got) {
        r.no_answer = true;
      } else {
        r.correct = want && *got == *want;
      }
      break;
    }
  }
  return r;
}

bool check_answer(std::string_view output, const ReasoningTask& task, const MatcherConfig& cfg) {
  return check(output, task, cfg).correct;
}

int count_self_questions(std::string_view thinking) { return text::count_questions(thinking); }

// ---- eval ------------------------------------------------------------------

Json TaskRecord::to_json() const {
  return {{"task_id", task_id},     {"mode", to_string(mode)}, {"seed", seed},
          {"output", output},       {"extracted", extracted},  {"correct", correct},
          {"no_answer", no_answer}, {"errored", errored},      {"error", error},
          {"self_questions", self_questions}, {"token_count", token_count}};
}

TaskRecord TaskRecord::from_json(const Json& j) {
  TaskRecord r;
  r.task_id = j.at("task_id").get<std::string>();
  r.mode = prompt_mode_from_string(j.at("mode").get<std::string>());
  r.seed = j.at("seed").get<std::int64_t>();
  r.output = j.value("output", "");
  r.extracted = j.value("extracted", "");
  r.correct = j.value("correct", false);
  r.no_answer = j.value("no_answer", false);
  r.errored = j.value("errored", false);
  r.error = j.value("error", "");
  r.self_questions = j.value("self_questions", 0);
  r.token_count = j.value("token_count", 0);
  return r;
}

long EvalResult::accuracy_tenths() const {
  if (total == 0) return 0;
  // round(1000 c / t) half-up, in integers
  return (2000L * correct + total) / (2L * total);
}

Json EvalResult::to_json() const {
  return {{"mode", to_string(mode)},
          {"total", total},
          {"correct", correct},
          {"errored", errored},
          {"no_answer", no_answer},
          {"accuracy", accuracy()},
          {"mean_self_questions", mean_self_questions},
          {"system_prompt_sha256", prompt_checksum(mode)}};
}

EvalResult summarize(PromptMode mode, std::vector<TaskRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const TaskRecord& a, const TaskRecord& b) { return a.task_id < b.task_id; });
  EvalResult r;
  r.mode = mode;
  long questions = 0;
  for (const auto& rec : records) {
    if (rec.errored) {
      ++r.errored;
      continue;
    }
    ++r.total;
    r.correct += rec.correct ? 1 : 0;
    r.no_answer += rec.no_answer ? 1 : 0;
    questions += rec.self_questions;
  }
  r.mean_self_questions = r.total ? static_cast<double>(questions) / r.total : 0.0;
  r.records = std::move(records);
  return r;
}

std::int64_t task_seed(std::uint64_t base, const std::string& task_id) {
  return static_cast<std::int64_t>(derive_seed(base, {label_hash("reasoning"), label_hash(task_id)}) &
                                   0x7fffffffULL);
}

EvalResult run_eval(Backend& backend, std::span<const ReasoningTask> tasks, PromptMode mode,
                    const EvalOptions& opts) {
  if (tasks.empty()) throw PreconditionError("task list is empty");
  std::set<std::string> ids;
  for (const auto& t : tasks) {
    t.validate();
    if (!ids.insert(t.id).second) throw ConfigError("duplicate task id " + t.id);
  }
  std::map<std::string, TaskRecord> done;
  for (const auto& r : opts.completed_records) {
    if (r.mode == mode && ids.count(r.task_id)) done[r.task_id] = r;
  }

  const std::string system = build_system_prompt(mode);
  std::vector<std::optional<TaskRecord>> slots(tasks.size());
  std::mutex mu;
  std::atomic<bool> stop{false};
  std::exception_ptr unavailable;
  parallel_for(tasks.size(), opts.parallelism, [&](std::size_t idx) {
    const ReasoningTask& task = tasks[idx];
    if (auto it = done.find(task.id); it != done.end()) {
      slots[idx] = it->second;
      return;
    }
    if (stop.load()) return;
    TaskRecord rec;
    rec.task_id = task.id;
    rec.mode = mode;
    rec.seed = task_seed(opts.seed, task.id);
    SamplingParams params = opts.sampling;
    params.seed = rec.seed;
    try {
      const Conversation conv = {Message::system(system), Message::user(user_content(task))};
      rec.output = backend.chat(conv, params).content;
    } catch (const BackendUnavailable&) {
      std::lock_guard lock(mu);
      stop = true;
      if (!unavailable) unavailable = std::current_exception();
      return;
    } catch (const BackendError& e) {
      rec.errored = true;
      rec.error = e.what();
    }
    if (!rec.errored) {
      const CheckResult c = check(rec.output, task, opts.matcher);
      rec.extracted = c.extracted;
      rec.correct = c.correct;
      rec.no_answer = c.no_answer;
      rec.self_questions = count_self_questions(rec.output);
      std::istringstream in(rec.output);
      std::string tok;
      while (in >> tok) ++rec.token_count;
    }
    if (opts.on_record) opts.on_record(rec);
    slots[idx] = std::move(rec);
  });
  if (unavailable) std::rethrow_exception(unavailable);
  std::vector<TaskRecord> records;
  for (auto& s : slots) {
    if (s) records.push_back(std::move(*s));
  }
  return summarize(mode, std::move(records));
}

// ---- task files ------------------------------------------------------------

TaskFormat task_format_from_string(const std::string& s) {
  const std::string l = text::to_lower(s);
  if (l == "native" || l == "jsonl") return TaskFormat::Native;
  if (l == "detectbench") return TaskFormat::Detectbench;
  if (l == "numinamath" || l == "numina") return TaskFormat::NuminaMath;
  throw ConfigError("unknown task format '" + s + "'");
}

namespace {

std::string string_field(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return "";
  const Json& v = j.at(key);
  return v.is_string() ? v.get<std::string>() : v.dump();
}

std::string line_id(const Json& j, const char* prefix, std::size_t line) {
  const std::string id = string_field(j, "id");
  return id.empty() ? std::string(prefix) + "-" + std::to_string(line) : id;
}

AnswerKind infer_kind(const std::string& gold) {
  return parse_number(gold) && text::normalize_answer(gold).find_first_of("abcdefghijklmnopqrstuvwxyz") ==
                                   std::string::npos
             ? AnswerKind::Numeric
             : AnswerKind::Exact;
}

std::string last_boxed(const std::string& s) {
  const std::string tag = "\\boxed{";
  const std::size_t pos = s.rfind(tag);
  if (pos == std::string::npos) return "";
  int depth = 1;
  std::string out;
  for (std::size_t i = pos + tag.size(); i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) return out;
    out += s[i];
  }
  return "";
}

}  // namespace

ReasoningTask from_native(const Json& j) {
  ReasoningTask t;
  t.id = string_field(j, "id");
  t.context = string_field(j, "context");
  t.question = string_field(j, "question");
  t.gold_answer = string_field(j, "answer");
  t.kind = j.contains("kind") ? answer_kind_from_string(j.at("kind").get<std::string>())
                              : infer_kind(t.gold_answer);
  t.validate();
  return t;
}

ReasoningTask from_detectbench(const Json& j, std::size_t line) {
  ReasoningTask t;
  t.id = line_id(j, "detectbench", line);
  t.context = string_field(j, "context");
  t.question = string_field(j, "question");
  t.gold_answer = text::trim(string_field(j, "answer"));
  if (j.contains("options") && j.at("options").is_array() && !j.at("options").empty()) {
    const auto& opts = j.at("options");
    std::string listed;
    std::optional<char> gold_letter;
    for (std::size_t k = 0; k < opts.size() && k < 10; ++k) {
      const char letter = static_cast<char>('A' + k);
      const std::string option = opts[k].get<std::string>();
      listed += std::string("\n") + letter + ". " + option;
      if (text::normalize_answer(option) == text::normalize_answer(t.gold_answer)) gold_letter = letter;
    }
    t.question += listed;
    if (!gold_letter) gold_letter = option_letter(text::to_upper(t.gold_answer));
    if (!gold_letter) throw ConfigError("detectbench line " + std::to_string(line) + ": answer matches no option");
    t.gold_answer = std::string(1, *gold_letter);
    t.kind = AnswerKind::Choice;
  } else {
    t.kind = infer_kind(t.gold_answer);
  }
  t.validate();
  return t;
}

ReasoningTask from_numinamath(const Json& j, std::size_t line) {
  ReasoningTask t;
  t.id = line_id(j, "numina", line);
  t.question = string_field(j, "problem");
  t.gold_answer = text::trim(string_field(j, "answer"));
  if (t.gold_answer.empty()) t.gold_answer = text::trim(last_boxed(string_field(j, "solution")));
  if (t.gold_answer.empty()) {
    throw ConfigError("numinamath line " + std::to_string(line) + ": no answer and no \\boxed{} in solution");
  }
  t.kind = infer_kind(t.gold_answer);
  t.validate();
  return t;
}

std::vector<ReasoningTask> parse_tasks_jsonl(const std::string& text_in, TaskFormat format) {
  std::vector<ReasoningTask> out;
  std::istringstream in(text_in);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ConfigError("task file line " + std::to_string(n) + ": " + e.what());
    }
    switch (format) {
      case TaskFormat::Native: out.push_back(from_native(j)); break;
      case TaskFormat::Detectbench: out.push_back(from_detectbench(j, n)); break;
      case TaskFormat::NuminaMath: out.push_back(from_numinamath(j, n)); break;
    }
  }
  if (out.empty()) throw ConfigError("task file holds no tasks");
  return out;
}

std::vector<ReasoningTask> load_tasks(const std::string& path, TaskFormat format) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open task file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_tasks_jsonl(ss.str(), format);
}

std::string summary_csv(std::span<const EvalResult> results) {
  std::ostringstream os;
  os << "mode,total,correct,errored,no_answer,accuracy,mean_self_questions\n";
  for (const auto& r : results) {
    char acc[32];
    std::snprintf(acc, sizeof acc, "%.1f", r.accuracy());
    char msq[32];
    std::snprintf(msq, sizeof msq, "%.3f", r.mean_self_questions);
    os << to_string(r.mode) << "," << r.total << "," << r.correct << "," << r.errored << ","
       << r.no_answer << "," << acc << "," << msq << "\n";
  }
  return os.str();
}

}  // namespace curio::reasoning

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curio/backend.hpp"

namespace curio::reasoning {

// NumericList compares the last k numbers of the answer with the k numbers of
// the gold answer, in order ("thick 128, thin 256").
enum class AnswerKind { Numeric, Exact, Choice, NumericList };

const char* to_string(AnswerKind k);
AnswerKind answer_kind_from_string(const std::string& s);

struct ReasoningTask {
  std::string id;
  std::string context;
  std::string question;
  std::string gold_answer;
  AnswerKind kind = AnswerKind::Exact;

  // Non-empty id, question and gold; numeric gold parses as a number.
  void validate() const;
  Json to_json() const;
  static ReasoningTask from_json(const Json& j);
};

enum class PromptMode { VanillaCoT, RefinedCoT, CuriousCoQ };

inline constexpr std::array<PromptMode, 3> kPromptModes = {
    PromptMode::VanillaCoT, PromptMode::RefinedCoT, PromptMode::CuriousCoQ};

const char* to_string(PromptMode m);
PromptMode prompt_mode_from_string(const std::string& s);

std::string build_system_prompt(PromptMode mode);
// SHA-256 of the system prompt, for pinning the templates.
std::string prompt_checksum(PromptMode mode);

// Identical across modes: "Context: ...\n\nQuestion: ..." (context omitted when empty).
std::string user_content(const ReasoningTask& task);

struct MatcherConfig {
  std::string marker = "Answer:";
  double rel_tol = 1e-6;
  Json to_json() const;
};

// First non-empty line after the last marker (case-insensitive), else the
// last non-empty line. Empty optional for blank output.
std::optional<std::string> extract_final_answer(std::string_view output, const MatcherConfig& cfg = {});

// Integers, decimals, thousands separators and simple a/b fractions.
std::vector<double> numbers_in(std::string_view s);
std::optional<double> parse_number(std::string_view s);

// Last standalone capital option letter A-J, e.g. "(C)" or "B.".
std::optional<char> option_letter(std::string_view s);

struct CheckResult {
  bool correct = false;
  bool no_answer = false;
  std::string extracted;
};

CheckResult check(std::string_view output, const ReasoningTask& task, const MatcherConfig& cfg = {});
bool check_answer(std::string_view output, const ReasoningTask& task, const MatcherConfig& cfg = {});

// Sentences ending in '?'.
int count_self_questions(std::string_view thinking);

struct TaskRecord {
  std::string task_id;
  PromptMode mode = PromptMode::VanillaCoT;
  std::int64_t seed = 0;
  std::string output;
  std::string extracted;
  bool correct = false;
  bool no_answer = false;
  bool errored = false;
  std::string error;
  int self_questions = 0;
  int token_count = 0;  // whitespace-delimited tokens of the output

  Json to_json() const;
  static TaskRecord from_json(const Json& j);
};

struct EvalResult {
  PromptMode mode = PromptMode::VanillaCoT;
  std::vector<TaskRecord> records;  // ordered by task id
  int total = 0;                    // scored tasks (errored excluded)
  int correct = 0;
  int errored = 0;
  int no_answer = 0;
  double mean_self_questions = 0.0;

  // 100 * correct / total rounded half-up to one decimal, in tenths.
  long accuracy_tenths() const;
  double accuracy() const { return static_cast<double>(accuracy_tenths()) / 10.0; }
  Json to_json() const;
};

// Aggregates from records; used after resume as well.
EvalResult summarize(PromptMode mode, std::vector<TaskRecord> records);

struct EvalOptions {
  int parallelism = 4;
  std::uint64_t seed = 0;
  SamplingParams sampling;
  MatcherConfig matcher;
  std::vector<TaskRecord> completed_records;
  std::function<void(const TaskRecord&)> on_record;
};

std::int64_t task_seed(std::uint64_t base, const std::string& task_id);

// One single-turn conversation per task. Backend errors mark the task
// errored; BackendUnavailable stops the eval and is rethrown.
EvalResult run_eval(Backend& backend, std::span<const ReasoningTask> tasks, PromptMode mode,
                    const EvalOptions& opts = {});

// ---- task files ------------------------------------------------------------

enum class TaskFormat { Native, Detectbench, NuminaMath };
TaskFormat task_format_from_string(const std::string& s);

// Native: {id, context, question, answer, kind}.
ReasoningTask from_native(const Json& j);
// {id?, context, question, answer, options?}; options turn the task into a
// choice task with lettered options appended to the question.
ReasoningTask from_detectbench(const Json& j, std::size_t line);
// {id?, problem, solution, answer?}; gold is `answer` or the last \boxed{...}
// of the solution.
ReasoningTask from_numinamath(const Json& j, std::size_t line);

std::vector<ReasoningTask> parse_tasks_jsonl(const std::string& text, TaskFormat format = TaskFormat::Native);
std::vector<ReasoningTask> load_tasks(const std::string& path, TaskFormat format = TaskFormat::Native);

// "mode,total,correct,errored,no_answer,accuracy,mean_self_questions"
std::string summary_csv(std::span<const EvalResult> results);

}  // namespace curio::reasoning

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curio/backend.hpp"
#include "curio/psychometrics.hpp"

namespace curio::scale {

enum class Subdimension { JE, DS, ST, TS, OSC, CSC };
enum class Dimension { InformationSeeking, ThrillSeeking, SocialCuriosity };

inline constexpr std::array<Subdimension, 6> kSubdimensions = {
    Subdimension::JE, Subdimension::DS,  Subdimension::ST,
    Subdimension::TS, Subdimension::OSC, Subdimension::CSC};

inline constexpr int kItemsPerSubdimension = 4;
inline constexpr int kItemCount = 24;

const char* code(Subdimension s);
const char* full_name(Subdimension s);
Subdimension subdimension_from_code(std::string_view code);
Dimension parent(Subdimension s);
const char* to_string(Dimension d);

struct ScaleItem {
  int id = 0;
  Subdimension subdimension = Subdimension::JE;
  std::string statement;
};

// Ships with placeholder statements in the instrument's structure; the
// licensed item texts can be loaded from a file with the same schema:
// JSON array of {id, subdimension, statement}.
std::vector<ScaleItem> default_item_bank();
std::vector<ScaleItem> parse_item_bank(const Json& j);
std::vector<ScaleItem> load_item_bank(const std::string& path);
// 24 items, unique ids 1..24, 4 per subdimension, non-empty statements.
void validate_item_bank(std::span<const ScaleItem> items);

class LikertScore {
 public:
  explicit LikertScore(int value);
  int value() const { return value_; }
  bool operator==(const LikertScore&) const = default;

 private:
  int value_;
};

enum class ScaleOrder { Normal, Reversed };

struct PerturbationSpec {
  std::optional<std::string> synonym_swap;  // lexicon id
  ScaleOrder scale_order = ScaleOrder::Normal;
  std::string language = "en";

  // Stable short name, e.g. "normal", "reversed+syn-default".
  std::string label() const;
  Json to_json() const;
  static PerturbationSpec from_json(const Json& j);
  bool operator==(const PerturbationSpec&) const = default;
};

// Verb substitution tables keyed by lexicon id.
using Lexicon = std::map<std::string, std::string>;
using LexiconSet = std::map<std::string, Lexicon>;

const LexiconSet& default_lexicons();
LexiconSet parse_lexicons(const Json& j);

// Whole-word, single-pass substitution; a capitalized word keeps its capital.
std::string apply_synonyms(std::string_view statement, const Lexicon& lexicon);

// Instruction block with the seven anchors followed by the statement. Under
// reversed order the anchors are listed from the "Completely describes me"
// pole. Throws ConfigError for unknown languages or lexicon ids.
std::string render_item_prompt(const ScaleItem& item, const PerturbationSpec& p,
                               const LexiconSet& lexicons = default_lexicons());

// First standalone integer (or number word) in 1..7; remapped to 8 - r under
// reversed order. Throws UnparseableResponse carrying the raw reply.
LikertScore parse_likert(std::string_view reply, const PerturbationSpec& p);

// Follow-up sent once when a reply cannot be parsed.
std::string reask_prompt(const PerturbationSpec& p);

struct CellRecord {
  int repetition = 0;
  int item_id = 0;
  std::int64_t seed = 0;
  Conversation transcript;  // prompt(s) and reply(s), including any re-ask
  int raw = 0;              // parsed value before remapping
  int score = 0;            // remapped LikertScore
  bool reasked = false;

  Json to_json() const;
  static CellRecord from_json(const Json& j);
};

struct ScaleRun {
  std::string backend_id;
  PerturbationSpec perturbation;
  int repetitions = 0;
  std::vector<ScaleItem> items;
  // matrix[rep][item index]; empty optional when the cell is missing
  std::vector<std::vector<std::optional<int>>> matrix;
  std::vector<bool> completed;           // per repetition
  std::vector<std::string> rep_errors;   // per repetition, empty when fine
  std::vector<CellRecord> cells;         // ordered by (repetition, item order)

  int completed_repetitions() const;
  bool partial() const { return completed_repetitions() < repetitions; }
};

struct AdministerOptions {
  int parallelism = 4;
  std::uint64_t seed = 0;
  SamplingParams sampling;
  const LexiconSet* lexicons = nullptr;
  // Cells finished by an earlier, interrupted run; they are not re-asked.
  std::vector<CellRecord> completed_cells;
  // Called once per newly finished cell, possibly from worker threads.
  std::function<void(const CellRecord&)> on_cell;
};

// Sampling seed used for every item of one repetition.
std::int64_t repetition_seed(std::uint64_t base, int repetition);

// Asks each item in its own single-turn conversation, reps times. A backend
// or parse failure aborts only its repetition. BackendUnavailable stops the
// run and is rethrown once in-flight cells finish.
ScaleRun administer_scale(Backend& backend, std::span<const ScaleItem> items,
                          const PerturbationSpec& p, int reps, const AdministerOptions& opts = {});

enum class SdEstimator { ItemScores, RepetitionMeans };

struct ScoreOptions {
  bool allow_partial = false;
  SdEstimator estimator = SdEstimator::ItemScores;
};

// Mean and population SD per subdimension over its 4 x reps item scores
// (or over per-repetition means); n is the number of repetitions used.
std::map<Subdimension, psy::SampleStats> score_dimensions(const ScaleRun& run,
                                                          const ScoreOptions& opts = {});

// Scores of one subdimension as a (completed reps) x 4 matrix, for CFA.
Eigen::MatrixXd subdimension_matrix(const ScaleRun& run, Subdimension s);

// CSV: header "repetition,<item ids...>", one row per repetition.
std::string matrix_csv(const ScaleRun& run);
// Rebuilds matrix/completed from CSV text; items must already be set.
void read_matrix_csv(ScaleRun& run, const std::string& csv);

}  // namespace curio::scale
